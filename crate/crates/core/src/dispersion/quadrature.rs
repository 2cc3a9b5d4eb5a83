//! Product quadrature rules on the unit sphere.
//!
//! Rules are Gauss-Legendre in `cos θ` times a rule in the azimuth `φ`
//! (trapezoid on the full period, or Gauss-Legendre on sub-arcs). Weights
//! sum to `4π`; [`integrate_sphere`] divides by the sphere area so that it
//! returns the orientation average `⟨f⟩`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};

pub const SPHERE_AREA: f64 = 4.0 * PI;

/// Default number of Gauss-Legendre nodes per polar segment.
pub const DEFAULT_ORDER: usize = 24;

type GaussRule = Rc<(Vec<f64>, Vec<f64>)>;

thread_local! {
    static GAUSS_CACHE: RefCell<HashMap<usize, GaussRule>> = RefCell::new(HashMap::new());
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> GaussRule {
    GAUSS_CACHE.with(|cache| {
        cache
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| Rc::new(compute_gauss_legendre(n)))
            .clone()
    })
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Three-term recurrence for P_n and its derivative.
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Discrete orientations `rⁱ` with positive weights `wⁱ`, `Σ wⁱ = 4π`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    nodes: Vec<Vector3<f64>>,
    weights: Vec<f64>,
}

/// An orthonormal frame `(u, v, a)`; `a` is the polar axis.
#[derive(Debug, Clone, Copy)]
struct Frame {
    u: Vector3<f64>,
    v: Vector3<f64>,
    a: Vector3<f64>,
}

impl Frame {
    fn about(axis: &Vector3<f64>) -> Self {
        let a = axis.normalize();
        let t = if a.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let u = a.cross(&t).normalize();
        let v = a.cross(&u);
        Frame { u, v, a }
    }
}

/// How the polar axis of a kink-aligned rule is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolarAxis {
    /// The principal direction of `C` whose stretch sign differs from the others.
    Auto,
    /// A fixed axis (must be a principal direction of `C` to enable splitting).
    Fixed(Vector3<f64>),
}

impl SphereQuadrature {
    /// Build a rule from raw nodes and weights (weights summing to `4π`).
    pub fn from_parts(nodes: Vec<Vector3<f64>>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::domain("node and weight counts differ"));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::domain("quadrature weights must be positive"));
        }
        Ok(Self { nodes, weights })
    }

    /// Product rule with polar axis `e3`: `order` Gauss nodes in `cos θ`,
    /// `2·order` trapezoid nodes in `φ`.
    pub fn product(order: usize) -> Self {
        Self::product_about(&Vector3::z(), order)
    }

    /// Product rule whose polar axis is `axis`.
    pub fn product_about(axis: &Vector3<f64>, order: usize) -> Self {
        let frame = if (axis.normalize() - Vector3::z()).norm() < 1e-15 {
            Frame {
                u: Vector3::x(),
                v: Vector3::y(),
                a: Vector3::z(),
            }
        } else {
            Frame::about(axis)
        };
        let order = order.max(1);
        let azimuth = trapezoid(2 * order);
        Self::assemble(&frame, &azimuth, order, |_| None)
    }

    /// Rule adapted to the fiber activation cone `r·(C − 1)r = 0` of `c`.
    ///
    /// The polar axis is a principal direction of `C`; for every azimuth the
    /// polar integration is split where the fiber stretch crosses 1, and the
    /// azimuth itself is split where the cone degenerates. Integrands that
    /// are smooth except across that cone are then integrated spectrally.
    pub fn kink_aligned(c: &Matrix3<f64>, polar: PolarAxis, order: usize) -> Self {
        let order = order.max(1);
        let off = c[(0, 1)].abs() + c[(0, 2)].abs() + c[(1, 2)].abs();
        let (eigenvalues, dirs): ([f64; 3], [Vector3<f64>; 3]) = if off <= 1e-15 * c.abs().max() {
            // Keep the coordinate axes when eigenvalues repeat.
            ([c[(0, 0)], c[(1, 1)], c[(2, 2)]], [Vector3::x(), Vector3::y(), Vector3::z()])
        } else {
            let eig = SymmetricEigen::new(*c);
            (
                std::array::from_fn(|k| eig.eigenvalues[k]),
                std::array::from_fn(|k| eig.eigenvectors.column(k).into_owned()),
            )
        };
        let d: [f64; 3] = std::array::from_fn(|k| eigenvalues[k] - 1.0);

        if d.iter().all(|x| x.abs() < 1e-14) {
            return match polar {
                PolarAxis::Fixed(a) => Self::product_about(&a, order),
                PolarAxis::Auto => Self::product(order),
            };
        }

        let k = match polar {
            PolarAxis::Auto => auto_polar_index(&d),
            PolarAxis::Fixed(axis) => {
                let axis = axis.normalize();
                match (0..3).find(|&k| dirs[k].dot(&axis).abs() > 1.0 - 1e-12) {
                    Some(k) => k,
                    None => return Self::product_about(&axis, order),
                }
            }
        };
        let (i, j) = match k {
            0 => (1, 2),
            1 => (2, 0),
            _ => (0, 1),
        };
        let frame = Frame {
            u: dirs[i],
            v: dirs[j],
            a: dirs[k],
        };
        let (da, du, dv) = (d[k], d[i], d[j]);

        let azimuth = if du * dv < 0.0 {
            // g(φ) = du cos²φ + dv sin²φ changes sign at ±φ0, π ± φ0.
            let p0 = (-du / dv).sqrt().atan();
            let cuts = [p0, PI - p0, PI + p0, 2.0 * PI - p0];
            let mut rule = Vec::with_capacity(4 * order);
            for s in 0..4 {
                let (lo, hi) = (cuts[s], if s == 3 { cuts[0] + 2.0 * PI } else { cuts[s + 1] });
                rule.extend(gauss_on(lo, hi, order));
            }
            rule
        } else {
            trapezoid(2 * order)
        };

        Self::assemble(&frame, &azimuth, order, |phi| {
            let (s, c) = phi.sin_cos();
            let g = du * c * c + dv * s * s;
            if g * da < 0.0 {
                let xk = (g / (g - da)).sqrt();
                if xk > 1e-14 && xk < 1.0 - 1e-14 {
                    return Some(xk);
                }
            }
            None
        })
    }

    fn assemble(
        frame: &Frame,
        azimuth: &[(f64, f64)],
        order: usize,
        split: impl Fn(f64) -> Option<f64>,
    ) -> Self {
        let gl = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(azimuth.len() * order * 3);
        let mut weights = Vec::with_capacity(azimuth.len() * order * 3);
        for &(phi, wphi) in azimuth {
            let (s, c) = phi.sin_cos();
            let ring = frame.u * c + frame.v * s;
            let mut push_segment = |lo: f64, hi: f64| {
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (hi + lo);
                for (x0, w0) in gl.0.iter().zip(gl.1.iter()) {
                    let x = mid + half * x0;
                    let st = (1.0 - x * x).max(0.0).sqrt();
                    nodes.push(frame.a * x + ring * st);
                    weights.push(w0 * half * wphi);
                }
            };
            match split(phi) {
                Some(xk) => {
                    push_segment(-1.0, -xk);
                    push_segment(-xk, xk);
                    push_segment(xk, 1.0);
                }
                None => push_segment(-1.0, 1.0),
            }
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[Vector3<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vector3<f64>, f64)> {
        self.nodes.iter().zip(self.weights.iter().copied())
    }
}

/// Nodes of one azimuth about `e3`: all share the azimuth `phi`.
#[derive(Debug, Clone)]
pub struct Ring {
    pub phi: f64,
    pub nodes: Vec<Vector3<f64>>,
    /// Full node weights (azimuth times polar weight).
    pub weights: Vec<f64>,
}

/// Rule on rings about `e3` for a `C` that has `e3` as a principal
/// direction, for integrands that are sharply peaked in the azimuth.
///
/// Azimuth breakpoints are the activation-cone cuts and the edges of the
/// arcs in `windows` (given as `(center, half_width)`, angles in radians).
/// Every sub-arc gets `order` Gauss nodes; without breakpoints the azimuth
/// is a `2·order` trapezoid rule. Polar segments are split at the cone as in
/// [`SphereQuadrature::kink_aligned`].
pub fn rings_about_e3(c: &Matrix3<f64>, order: usize, windows: &[(f64, f64)]) -> Vec<Ring> {
    let order = order.max(1);
    let scale = c.abs().max();
    let planar = c[(0, 2)].abs() + c[(1, 2)].abs() <= 1e-14 * scale;
    // In-plane principal frame rotated by beta from e1.
    let (beta, du, dv, da) = if planar {
        let beta = 0.5 * (2.0 * c[(0, 1)]).atan2(c[(0, 0)] - c[(1, 1)]);
        let (s, co) = beta.sin_cos();
        let lu = co * co * c[(0, 0)] + 2.0 * s * co * c[(0, 1)] + s * s * c[(1, 1)];
        let lv = s * s * c[(0, 0)] - 2.0 * s * co * c[(0, 1)] + co * co * c[(1, 1)];
        (beta, lu - 1.0, lv - 1.0, c[(2, 2)] - 1.0)
    } else {
        (0.0, 0.0, 0.0, 0.0)
    };
    let wrap = |x: f64| x.rem_euclid(2.0 * PI);
    // Cut angles, flagged when the integrand has a kink there.
    let mut cuts: Vec<(f64, bool)> = Vec::new();
    if planar && du * dv < 0.0 {
        let p0 = (-du / dv).sqrt().atan();
        cuts.extend([p0, PI - p0, PI + p0, 2.0 * PI - p0].map(|x| (wrap(x + beta), true)));
    }
    for &(center, half) in windows {
        if 2.0 * half < 2.0 * PI {
            cuts.push((wrap(center - half), false));
            cuts.push((wrap(center + half), false));
        }
    }
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
    cuts.dedup_by(|a, b| {
        let same = (a.0 - b.0).abs() < 1e-12;
        if same {
            b.1 |= a.1;
        }
        same
    });
    let azimuth = if cuts.is_empty() {
        trapezoid(2 * order)
    } else {
        let mut rule = Vec::with_capacity(cuts.len() * order);
        for s in 0..cuts.len() {
            let (lo, kink_lo) = cuts[s];
            let (hi, kink_hi) = if s + 1 == cuts.len() {
                (cuts[0].0 + 2.0 * PI, cuts[0].1)
            } else {
                cuts[s + 1]
            };
            if hi - lo > 1e-13 {
                if kink_lo || kink_hi {
                    rule.extend(gauss_clustered(lo, hi, order));
                } else {
                    rule.extend(gauss_on(lo, hi, order));
                }
            }
        }
        rule
    };
    let gl = gauss_legendre(order);
    azimuth
        .into_iter()
        .map(|(phi, wphi)| {
            let (s, co) = phi.sin_cos();
            let ring = Vector3::new(co, s, 0.0);
            let (sl, cl) = (phi - beta).sin_cos();
            let g = du * cl * cl + dv * sl * sl;
            let split = if planar && g * da < 0.0 {
                let xk = (g / (g - da)).sqrt();
                (xk > 1e-14 && xk < 1.0 - 1e-14).then_some(xk)
            } else {
                None
            };
            let segments: Vec<(f64, f64)> = match split {
                Some(xk) => vec![(-1.0, -xk), (-xk, xk), (xk, 1.0)],
                None => vec![(-1.0, 1.0)],
            };
            let mut nodes = Vec::with_capacity(segments.len() * order);
            let mut weights = Vec::with_capacity(segments.len() * order);
            for (lo, hi) in segments {
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (hi + lo);
                for (x0, w0) in gl.0.iter().zip(gl.1.iter()) {
                    let x = mid + half * x0;
                    let st = (1.0 - x * x).max(0.0).sqrt();
                    nodes.push(Vector3::z() * x + ring * st);
                    weights.push(w0 * half * wphi);
                }
            }
            Ring { phi, nodes, weights }
        })
        .collect()
}

fn auto_polar_index(d: &[f64; 3]) -> usize {
    let sign = |x: f64| {
        if x > 1e-14 {
            1
        } else if x < -1e-14 {
            -1
        } else {
            0
        }
    };
    let s: [i32; 3] = std::array::from_fn(|k| sign(d[k]));
    let mut best: Option<usize> = None;
    for k in 0..3 {
        if s[k] == 0 {
            continue;
        }
        let unique = (0..3).filter(|&m| m != k).all(|m| s[m] != s[k]);
        if unique && best.is_none_or(|b| d[k].abs() > d[b].abs()) {
            best = Some(k);
        }
    }
    best.unwrap_or_else(|| {
        (0..3)
            .max_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()))
            .unwrap_or(2)
    })
}

fn trapezoid(m: usize) -> Vec<(f64, f64)> {
    let h = 2.0 * PI / m as f64;
    (0..m).map(|j| (j as f64 * h, h)).collect()
}

/// Gauss-Legendre under `t = (3x − x³)/2`, which clusters nodes at both
/// ends and absorbs square-root behavior there.
fn gauss_clustered(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let gl = gauss_legendre(n);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    gl.0
        .iter()
        .zip(gl.1.iter())
        .map(|(x, w)| {
            let t = 0.5 * (3.0 * x - x * x * x);
            (mid + half * t, w * half * 1.5 * (1.0 - x * x))
        })
        .collect()
}

fn gauss_on(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let gl = gauss_legendre(n);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    gl.0
        .iter()
        .zip(gl.1.iter())
        .map(|(x, w)| (mid + half * x, w * half))
        .collect()
}

/// Orientation average `(1/4π) Σ wⁱ f(rⁱ)`, summed in node order.
pub fn integrate_sphere<F>(f: F, quad: &SphereQuadrature) -> Result<f64>
where
    F: Fn(&Vector3<f64>) -> f64,
{
    if quad.is_empty() {
        return Err(Error::domain("empty quadrature rule"));
    }
    let sum: f64 = quad.iter().map(|(r, w)| w * f(r)).sum();
    Ok(sum / SPHERE_AREA)
}

/// Orientation average of a tensor-valued integrand.
pub fn integrate_sphere_tensor<F>(f: F, quad: &SphereQuadrature) -> Result<Matrix3<f64>>
where
    F: Fn(&Vector3<f64>) -> Matrix3<f64>,
{
    if quad.is_empty() {
        return Err(Error::domain("empty quadrature rule"));
    }
    let sum = quad
        .iter()
        .fold(Matrix3::zeros(), |acc, (r, w)| acc + f(r) * w);
    Ok(sum / SPHERE_AREA)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rings_integrate_peaked_azimuth() {
        // ∫ exp(-(φ-1)²/2σ²) dφ over the sphere with σ = 0.05.
        let sigma: f64 = 0.05;
        let exact = 2.0 * sigma * (2.0 * PI).sqrt() / SPHERE_AREA;
        let c = Matrix3::from_diagonal(&Vector3::new(1.2, 0.9, 1.0 / 1.08));
        for windows in [vec![(1.0, 8.0 * sigma)], vec![]] {
            let rings = rings_about_e3(&c, 32, &windows);
            let total: f64 = rings.iter().map(|r| r.weights.iter().sum::<f64>()).sum();
            assert_relative_eq!(total, SPHERE_AREA, max_relative = 1e-12);
            let v: f64 = rings
                .iter()
                .map(|r| {
                    let d = r.phi - 1.0;
                    (-d * d / (2.0 * sigma * sigma)).exp() * r.weights.iter().sum::<f64>()
                })
                .sum::<f64>()
                / SPHERE_AREA;
            if windows.is_empty() {
                assert!((v - exact).abs() > 1e-6 * exact);
            } else {
                assert_relative_eq!(v, exact, max_relative = 1e-9);
            }
        }
        // Rotated in-plane frame: a kinked integrand still converges fast.
        let n = Vector3::new(0.6, 0.8, 0.0);
        let t = Vector3::new(-0.8, 0.6, 0.0);
        let c = n * n.transpose() * 1.3 + t * t.transpose() * 0.9 + Vector3::z() * Vector3::z().transpose() / 1.17;
        let avg = |order: usize| -> f64 {
            rings_about_e3(&c, order, &[])
                .iter()
                .flat_map(|r| r.nodes.iter().zip(&r.weights))
                .map(|(x, w)| w * (x.dot(&(c * x)) - 1.0).max(0.0).powi(2))
                .sum::<f64>()
        };
        assert_relative_eq!(avg(24), avg(96), max_relative = 1e-9);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 33] {
            let gl = gauss_legendre(n);
            let sum_w: f64 = gl.1.iter().sum();
            assert_relative_eq!(sum_w, 2.0, epsilon = 1e-13);
            // exact up to degree 2n - 1
            let deg = 2 * n - 1;
            let v: f64 = gl
                .0
                .iter()
                .zip(gl.1.iter())
                .map(|(x, w)| w * x.powi(deg as i32 - 1))
                .sum();
            let exact = if (deg - 1) % 2 == 0 {
                2.0 / deg as f64
            } else {
                0.0
            };
            assert_relative_eq!(v, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn uniform_moments() {
        let quad = SphereQuadrature::product(8);
        assert_relative_eq!(integrate_sphere(|_| 1.0, &quad).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            integrate_sphere(|r| r.x * r.x, &quad).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
        let h = integrate_sphere_tensor(|r| r * r.transpose(), &quad).unwrap();
        assert_relative_eq!(h, Matrix3::identity() / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_rule_is_rejected() {
        let quad = SphereQuadrature::from_parts(vec![], vec![]).unwrap();
        assert!(integrate_sphere(|_| 1.0, &quad).is_err());
        assert!(SphereQuadrature::from_parts(vec![Vector3::x()], vec![-1.0]).is_err());
    }

    #[test]
    fn kink_aligned_rules_are_valid() {
        let cases = [
            Matrix3::from_diagonal(&Vector3::new(1.21, 1.21, 1.21f64.powi(-2))),
            Matrix3::from_diagonal(&Vector3::new(1.44, 1.0 / 1.2, 1.0 / 1.2)),
            Matrix3::from_diagonal(&Vector3::new(1.3, 0.9, 1.0 / (1.3 * 0.9))),
            Matrix3::identity(),
        ];
        for c in cases {
            for polar in [PolarAxis::Auto, PolarAxis::Fixed(Vector3::z())] {
                let quad = SphereQuadrature::kink_aligned(&c, polar, 12);
                let w: f64 = quad.weights().iter().sum();
                assert_relative_eq!(w, SPHERE_AREA, epsilon = 1e-11);
                let h = integrate_sphere_tensor(|r| r * r.transpose(), &quad).unwrap();
                assert_relative_eq!(h, Matrix3::identity() / 3.0, epsilon = 1e-11);
                for r in quad.nodes() {
                    assert_relative_eq!(r.norm(), 1.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn kinked_integrand_converges_fast() {
        // ⟨max(r·(C−1)r, 0)⟩ has a derivative jump on the activation cone.
        let c = Matrix3::from_diagonal(&Vector3::new(1.3, 0.9, 1.0 / (1.3 * 0.9)));
        let f = |r: &Vector3<f64>| r.dot(&((c - Matrix3::identity()) * r)).max(0.0).powi(1);
        let a = integrate_sphere(f, &SphereQuadrature::kink_aligned(&c, PolarAxis::Auto, 16)).unwrap();
        let b = integrate_sphere(f, &SphereQuadrature::kink_aligned(&c, PolarAxis::Auto, 32)).unwrap();
        assert!((a - b).abs() < 1e-12 * b.abs(), "{a} vs {b}");
    }
}
