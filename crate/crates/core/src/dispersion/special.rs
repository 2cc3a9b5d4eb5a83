//! One-dimensional adaptive quadrature and the special functions built on it.
//!
//! `erfi`, `erf` and the modified Bessel function `I0` are evaluated from
//! their integral definitions. All of them are returned in exponentially
//! scaled form so that large concentration parameters do not overflow.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes.
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Upper bound on the number of subintervals of one integration.
const MAX_INTERVALS: usize = 4000;
/// Relative accuracy floor of the adaptive integrator.
const REL_FLOOR: f64 = 1e-13;

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = KRONROD_WEIGHTS[7] * fc;
    let mut g = GAUSS_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = h * KRONROD_NODES[i];
        let s = f(c - dx) + f(c + dx);
        k += KRONROD_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += GAUSS_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, (k - g).abs() * h)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Globally adaptive Gauss-Kronrod (7/15) integral of `f` over the
/// consecutive segments of `points`.
///
/// The segment with the largest error estimate is bisected until the summed
/// estimate drops below `max(tol, 1e-13·|I|)`. Interior points should mark
/// peaks or kinks of `f`.
pub fn integrate_points<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: f64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::domain("integration needs at least two points"));
    }
    let mut segs: Vec<Segment> = Vec::with_capacity(64);
    for w in points.windows(2) {
        if !(w[1] >= w[0]) {
            return Err(Error::domain(format!(
                "integration points must be nondecreasing, got {} then {}",
                w[0], w[1]
            )));
        }
        if w[1] > w[0] {
            let (value, error) = kronrod15(&f, w[0], w[1]);
            segs.push(Segment { a: w[0], b: w[1], value, error });
        }
    }
    loop {
        let total: f64 = segs.iter().map(|s| s.value).sum();
        let error: f64 = segs.iter().map(|s| s.error).sum();
        if !total.is_finite() {
            return Err(Error::Numeric("non-finite integrand".into()));
        }
        if error <= tol.max(REL_FLOOR * total.abs()) {
            return Ok(total);
        }
        let (worst, seg) = segs
            .iter()
            .copied()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let m = 0.5 * (seg.a + seg.b);
        if segs.len() >= MAX_INTERVALS || m <= seg.a || m >= seg.b {
            return Err(Error::Numeric(format!(
                "adaptive quadrature did not converge (estimate {total}, error {error:e})"
            )));
        }
        let (v1, e1) = kronrod15(&f, seg.a, m);
        let (v2, e2) = kronrod15(&f, m, seg.b);
        segs[worst] = Segment { a: seg.a, b: m, value: v1, error: e1 };
        segs.push(Segment { a: m, b: seg.b, value: v2, error: e2 });
    }
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    integrate_points(f, &[a, b], tol)
}

/// `exp(-x²) erfi(x)`, i.e. `(2/√π) ∫₀ˣ exp(t² − x²) dt`, for `x ≥ 0`.
pub fn erfi_scaled(x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::domain(format!("erfi_scaled needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let x2 = x * x;
    // Integrand peaks at t = x with width ~1/x; split there for large x.
    let split = if x > 4.0 { x - 8.0 / x } else { 0.0 };
    let f = |t: f64| (t * t - x2).exp();
    let tail = integrate(f, split, x, 1e-15 * x)?;
    let head = if split > 0.0 {
        integrate(f, 0.0, split, 1e-17)?
    } else {
        0.0
    };
    Ok(2.0 / PI.sqrt() * (head + tail))
}

/// `erf(x)` for `x ≥ 0` from `(2/√π) ∫₀ˣ exp(−t²) dt`.
pub fn erf(x: f64) -> Result<f64> {
    if x < 0.0 {
        return Ok(-erf(-x)?);
    }
    let upper = x.min(9.0);
    let v = integrate(|t| (-t * t).exp(), 0.0, upper, 1e-16)?;
    Ok(2.0 / PI.sqrt() * v)
}

/// `exp(−|a|) I0(a)` with `I0(a) = (1/π) ∫₀^π exp(a cos θ) dθ`.
pub fn bessel_i0_scaled(a: f64) -> Result<f64> {
    let a = a.abs();
    if a == 0.0 {
        return Ok(1.0);
    }
    // The integrand has width ~1/√a about t = 0.
    let knee = (12.0 / a.sqrt()).min(PI);
    let v = integrate_points(|t| (-2.0 * a * (0.5 * t).sin().powi(2)).exp(), &[0.0, knee, PI], 1e-16)?;
    Ok(v / PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| 3.0 * x * x + 2.0 * x - 1.0, -1.0, 2.0, 1e-14).unwrap();
        assert_relative_eq!(v, 9.0, epsilon = 1e-13);
    }

    #[test]
    fn erf_reference_values() {
        // Abramowitz & Stegun table 7.1.
        assert_relative_eq!(erf(0.5).unwrap(), 0.520_499_877_813_046_5, epsilon = 1e-14);
        assert_relative_eq!(erf(1.0).unwrap(), 0.842_700_792_949_714_9, epsilon = 1e-14);
        assert_relative_eq!(erf(2.0).unwrap(), 0.995_322_265_018_952_7, epsilon = 1e-14);
    }

    #[test]
    fn erfi_reference_values() {
        // erfi(1) = 1.6504257587975428...
        assert_relative_eq!(
            erfi_scaled(1.0).unwrap() * 1f64.exp(),
            1.650_425_758_797_542_8,
            max_relative = 1e-13
        );
        // Large argument: exp(-x^2) erfi(x) ~ 1/(x sqrt(pi)) (1 + 1/(2x^2) + 3/(4x^4)).
        let x = 40.0f64;
        let asym = (1.0 + 0.5 / (x * x) + 0.75 / x.powi(4) + 15.0 / 8.0 / x.powi(6))
            / (x * PI.sqrt());
        assert_relative_eq!(erfi_scaled(x).unwrap(), asym, max_relative = 1e-9);
    }

    #[test]
    fn bessel_reference_values() {
        // I0(1) = 1.2660658777520082, I0(5) = 27.239871823604442
        assert_relative_eq!(
            bessel_i0_scaled(1.0).unwrap() * 1f64.exp(),
            1.266_065_877_752_008_2,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            bessel_i0_scaled(-5.0).unwrap() * 5f64.exp(),
            27.239_871_823_604_442,
            max_relative = 1e-13
        );
    }
}
