//! Fiber orientation densities, dispersion measures and generalized
//! structure tensors.
//!
//! All densities are normalized with respect to the orientation average
//! `⟨f⟩ = (1/4π) ∫ f dA`, so that `⟨ρ⟩ = 1`.

pub mod quadrature;
pub mod special;

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use quadrature::{
    gauss_legendre, integrate_sphere, integrate_sphere_tensor, rings_about_e3, PolarAxis, Ring,
    SphereQuadrature,
    DEFAULT_ORDER, SPHERE_AREA,
};

const KAPPA_TOL: f64 = 1e-14;

/// Rotationally symmetric, π-periodic von Mises density about a mean direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMisesPlanar {
    b: f64,
    #[serde(skip)]
    prefactor: f64,
}

impl VonMisesPlanar {
    pub fn new(b: f64) -> Result<Self> {
        if !(b >= 0.0) || !b.is_finite() {
            return Err(Error::domain(format!(
                "von Mises concentration must be >= 0, got {b}"
            )));
        }
        let prefactor = if b == 0.0 {
            1.0
        } else {
            4.0 * (b / (2.0 * PI)).sqrt() / special::erfi_scaled((2.0 * b).sqrt())?
        };
        Ok(Self { b, prefactor })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Density as a function of `c = cos Θ`, the cosine to the mean direction.
    pub fn density_cos(&self, c: f64) -> f64 {
        if self.b == 0.0 {
            return 1.0;
        }
        self.prefactor * (-2.0 * self.b * (1.0 - c * c)).exp()
    }

    /// Density at the angle `theta` to the mean direction.
    pub fn density(&self, theta: f64) -> f64 {
        self.density_cos(theta.cos())
    }

    /// Density of orientation `r` about the mean direction `m`.
    pub fn density_at(&self, r: &Vector3<f64>, m: &Vector3<f64>) -> f64 {
        self.density_cos(r.dot(m))
    }

    pub fn kappa(&self) -> Result<f64> {
        if self.b == 0.0 {
            return Ok(1.0 / 3.0);
        }
        // κ = ¼∫₀^π ρ sin³Θ dΘ = ½∫₀¹ ρ(c)(1 − c²) dc
        let knee = (1.0 - 10.0 / self.b).max(0.0);
        let v = special::integrate_points(
            |c| self.density_cos(c) * (1.0 - c * c),
            &[0.0, knee, 1.0],
            KAPPA_TOL,
        )?;
        Ok(0.5 * v)
    }
}

pub fn vonmises_density(dist: &VonMisesPlanar, theta: f64) -> f64 {
    dist.density(theta)
}

/// Dispersion parameter `κ ∈ [0, 1/3]` of the von Mises density.
pub fn kappa_from_b(b: f64) -> Result<f64> {
    VonMisesPlanar::new(b)?.kappa()
}

/// Inverse of [`kappa_from_b`] by bisection on `ln(1 + b)`.
pub fn b_from_kappa(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa <= 1.0 / 3.0) {
        return Err(Error::domain(format!(
            "kappa must lie in (0, 1/3], got {kappa}"
        )));
    }
    if (kappa - 1.0 / 3.0).abs() < 1e-15 {
        return Ok(0.0);
    }
    bisect_decreasing(kappa_from_b, kappa, 0.0, 1e5)
}

fn bisect_decreasing(f: impl Fn(f64) -> Result<f64>, target: f64, lo: f64, hi: f64) -> Result<f64> {
    let (mut lo, mut hi) = ((1.0 + lo).ln(), (1.0 + hi).ln());
    if f(hi.exp_m1())? > target {
        return Err(Error::domain(format!(
            "target {target} lies beyond the invertible range"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid.exp_m1())? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp_m1())
}

/// `H = κ 1 + (1 − 3κ) M⊗M`.
pub fn goh_structure_tensor(kappa: f64, m: &Vector3<f64>) -> Result<Matrix3<f64>> {
    if !(0.0..=1.0 / 3.0).contains(&kappa) {
        return Err(Error::domain(format!(
            "GOH kappa must lie in [0, 1/3], got {kappa}"
        )));
    }
    Ok(Matrix3::identity() * kappa + m * m.transpose() * (1.0 - 3.0 * kappa))
}

/// Structure tensor of the bivariate (in-plane × out-of-plane) density.
pub fn hnors_structure_tensor(
    kappa_ip: f64,
    kappa_op: f64,
    mi: &Vector3<f64>,
    mn: &Vector3<f64>,
) -> Result<Matrix3<f64>> {
    if !(0.0..=1.0).contains(&kappa_ip) || !(0.0..=0.5).contains(&kappa_op) {
        return Err(Error::domain(format!(
            "HNORS needs kappa_ip in [0, 1] and kappa_op in [0, 1/2], got ({kappa_ip}, {kappa_op})"
        )));
    }
    let ki = kappa_ip;
    let ko = kappa_op;
    Ok(Matrix3::identity() * (2.0 * ki * ko)
        + mi * mi.transpose() * (2.0 * ko * (1.0 - 2.0 * ki))
        + mn * mn.transpose() * (1.0 - 2.0 * ko - 2.0 * ki * ko))
}

/// Product of an in-plane von Mises density (concentration `a`) and an
/// out-of-plane density (concentration `b`).
///
/// `a` may be negative, which concentrates fibers perpendicular to the mean
/// in-plane direction and gives `κ_ip > 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateVonMises {
    a: f64,
    b: f64,
    i0_scaled: f64,
    op_prefactor: f64,
}

impl BivariateVonMises {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !(b >= 0.0) || !b.is_finite() {
            return Err(Error::domain(format!(
                "bivariate von Mises needs finite a and b >= 0, got ({a}, {b})"
            )));
        }
        let x = (2.0 * b).sqrt();
        let op_prefactor = if x < 1e-8 {
            1.0
        } else {
            2.0 * (2.0 * b / PI).sqrt() / special::erf(x)?
        };
        Ok(Self {
            a,
            b,
            i0_scaled: special::bessel_i0_scaled(a)?,
            op_prefactor,
        })
    }

    pub fn from_kappas(kappa_ip: f64, kappa_op: f64) -> Result<Self> {
        Self::new(a_from_kappa_ip(kappa_ip)?, b_from_kappa_op(kappa_op)?)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// In-plane density at angle `phi` from the mean in-plane direction.
    pub fn density_ip(&self, phi: f64) -> f64 {
        // a cos 2Φ − |a| without cancellation
        let e = if self.a >= 0.0 {
            -2.0 * self.a * phi.sin().powi(2)
        } else {
            2.0 * self.a * phi.cos().powi(2)
        };
        e.exp() / self.i0_scaled
    }

    /// Out-of-plane density at elevation `theta` above the plane.
    pub fn density_op(&self, theta: f64) -> f64 {
        let s = theta.sin();
        self.op_prefactor * (-2.0 * self.b * s * s).exp()
    }

    /// Density of orientation `r`; `mi` is the mean in-plane direction and
    /// `mn` the plane normal.
    pub fn density_at(&self, r: &Vector3<f64>, mi: &Vector3<f64>, mn: &Vector3<f64>) -> f64 {
        let mt = mn.cross(mi);
        let phi = r.dot(&mt).atan2(r.dot(mi));
        let theta = r.dot(mn).clamp(-1.0, 1.0).asin();
        self.density_ip(phi) * self.density_op(theta)
    }

    pub fn kappa_ip(&self) -> Result<f64> {
        let w = (6.0 / self.a.abs().sqrt()).min(0.25 * PI);
        let v = special::integrate_points(
            |p| self.density_ip(p) * p.sin().powi(2),
            &[0.0, w, 0.5 * PI - w, 0.5 * PI],
            KAPPA_TOL,
        )?;
        Ok(2.0 * v / PI)
    }

    pub fn kappa_op(&self) -> Result<f64> {
        let w = (6.0 / self.b.sqrt()).min(0.25 * PI);
        let v = special::integrate_points(
            |t| self.density_op(t) * t.cos().powi(3),
            &[0.0, w, 0.5 * PI],
            KAPPA_TOL,
        )?;
        Ok(0.5 * v)
    }
}

/// `(κ_ip, κ_op)` of the bivariate density.
pub fn kappas_from_concentrations(a: f64, b: f64) -> Result<(f64, f64)> {
    let d = BivariateVonMises::new(a, b)?;
    Ok((d.kappa_ip()?, d.kappa_op()?))
}

/// Signed in-plane concentration giving `kappa_ip ∈ (0, 1)`.
pub fn a_from_kappa_ip(kappa_ip: f64) -> Result<f64> {
    if !(kappa_ip > 0.0 && kappa_ip < 1.0) {
        return Err(Error::domain(format!(
            "kappa_ip must lie in (0, 1), got {kappa_ip}"
        )));
    }
    if (kappa_ip - 0.5).abs() < 1e-15 {
        return Ok(0.0);
    }
    let kip = |a: f64| BivariateVonMises::new(a, 0.0)?.kappa_ip();
    if kappa_ip < 0.5 {
        bisect_decreasing(kip, kappa_ip, 0.0, 1e5)
    } else {
        // κ_ip(−a) = 1 − κ_ip(a)
        Ok(-bisect_decreasing(kip, 1.0 - kappa_ip, 0.0, 1e5)?)
    }
}

/// Out-of-plane concentration giving `kappa_op ∈ [1/3, 1/2)`.
pub fn b_from_kappa_op(kappa_op: f64) -> Result<f64> {
    if !(1.0 / 3.0 - 1e-15..0.5).contains(&kappa_op) {
        return Err(Error::domain(format!(
            "kappa_op must lie in [1/3, 1/2) to be represented by the out-of-plane density, got {kappa_op}"
        )));
    }
    if kappa_op <= 1.0 / 3.0 + 1e-15 {
        return Ok(0.0);
    }
    // κ_op increases with b; bisect on the mirrored quantity.
    bisect_decreasing(
        |b| Ok(-BivariateVonMises::new(0.0, b)?.kappa_op()?),
        -kappa_op,
        0.0,
        1e5,
    )
}

/// Bingham density `ρ(r) = exp(Σ κⱼ (qⱼ·r)²) / F`, with `qⱼ` the columns of `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinghamDistribution {
    kappa: [f64; 3],
    q: Matrix3<f64>,
    shift: f64,
    log_norm: f64,
}

/// Coarsest and finest orders tried when normalizing a Bingham density.
const BINGHAM_ORDERS: (usize, usize) = (16, 512);
const BINGHAM_TOL: f64 = 1e-12;

impl BinghamDistribution {
    pub fn new(kappa: [f64; 3], q: Matrix3<f64>) -> Result<Self> {
        if kappa.iter().any(|k| !k.is_finite()) {
            return Err(Error::domain("Bingham eigenvalues must be finite"));
        }
        let orth = (q.transpose() * q - Matrix3::identity()).abs().max();
        if orth > 1e-12 {
            return Err(Error::domain(format!(
                "Bingham orientation matrix is not orthogonal (deviation {orth:e})"
            )));
        }
        let shift = kappa.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut dist = Self {
            kappa,
            q,
            shift,
            log_norm: 0.0,
        };
        let kmax = (0..3)
            .max_by(|&i, &j| kappa[i].total_cmp(&kappa[j]))
            .unwrap_or(2);
        let axis: Vector3<f64> = q.column(kmax).into_owned();
        let eval = |order: usize| {
            integrate_sphere(|r| dist.unnormalized(r), &SphereQuadrature::product_about(&axis, order))
        };
        let mut order = BINGHAM_ORDERS.0;
        let mut prev = eval(order)?;
        loop {
            order *= 2;
            let next = eval(order)?;
            if (next - prev).abs() <= BINGHAM_TOL * next.abs() {
                dist.log_norm = next.ln();
                return Ok(dist);
            }
            if order >= BINGHAM_ORDERS.1 {
                return Err(Error::Numeric(format!(
                    "Bingham normalizer did not converge: orders {} and {order} give {prev} and {next}",
                    order / 2
                )));
            }
            prev = next;
        }
    }

    /// Bingham density with `Q` the rotation by `angle` about `e3`.
    pub fn rotated(kappa: [f64; 3], angle: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let q = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        Self::new(kappa, q)
    }

    pub fn kappa(&self) -> [f64; 3] {
        self.kappa
    }

    pub fn q(&self) -> &Matrix3<f64> {
        &self.q
    }

    /// `F₀₀₀₀(Z) = ⟨etr(Z : r⊗r)⟩`.
    pub fn normalizer(&self) -> f64 {
        (self.log_norm + self.shift).exp()
    }

    fn unnormalized(&self, r: &Vector3<f64>) -> f64 {
        let qr = self.q.transpose() * r;
        let e: f64 = (0..3).map(|j| self.kappa[j] * qr[j] * qr[j]).sum();
        (e - self.shift).exp()
    }

    pub fn density(&self, r: &Vector3<f64>) -> f64 {
        self.unnormalized(r) * (-self.log_norm).exp()
    }
}

pub fn bingham_density(dist: &BinghamDistribution, r: &Vector3<f64>) -> f64 {
    dist.density(r)
}

/// Planar Gaussian fiber volume fraction `v_f = A v̄(φ)` in the azimuth `φ`
/// of `r` about `e3`.
///
/// `v̄` is π-periodic (wrapped) and averages the two mirrored lobes at
/// `±ϑ`, so `A = v_tot / (σ √(2/π))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarGaussian {
    sigma: f64,
    vartheta: f64,
    v_tot: f64,
    wraps: i32,
}

impl PlanarGaussian {
    pub fn new(sigma: f64, vartheta: f64, v_tot: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::domain(format!("sigma must be > 0, got {sigma}")));
        }
        if !(v_tot > 0.0 && v_tot <= 1.0) {
            return Err(Error::domain(format!(
                "v_tot must lie in (0, 1], got {v_tot}"
            )));
        }
        // Images beyond this count contribute below exp(-40).
        let wraps = (sigma * 80f64.sqrt() / PI).ceil() as i32 + 1;
        Ok(Self {
            sigma,
            vartheta,
            v_tot,
            wraps,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn vartheta(&self) -> f64 {
        self.vartheta
    }

    pub fn v_tot(&self) -> f64 {
        self.v_tot
    }

    /// Normalization constant `A`.
    pub fn normalization(&self) -> f64 {
        self.v_tot / (self.sigma * (2.0 / PI).sqrt())
    }

    fn wrapped(&self, x: f64) -> f64 {
        let s2 = 2.0 * self.sigma * self.sigma;
        (-self.wraps..=self.wraps)
            .map(|k| {
                let d = x - k as f64 * PI;
                (-d * d / s2).exp()
            })
            .sum()
    }

    /// Unnormalized profile `v̄(φ)`.
    pub fn profile(&self, phi: f64) -> f64 {
        0.5 * (self.wrapped(phi - self.vartheta) + self.wrapped(phi + self.vartheta))
    }

    pub fn volume_fraction_azimuth(&self, phi: f64) -> f64 {
        self.normalization() * self.profile(phi)
    }

    pub fn volume_fraction(&self, r: &Vector3<f64>) -> f64 {
        self.volume_fraction_azimuth(r.y.atan2(r.x))
    }

    /// Nested azimuth windows `(center, half_width)` at 4σ and 8σ around
    /// each lobe peak; empty when the lobes are too wide to be worth
    /// isolating.
    pub fn lobe_windows(&self) -> Vec<(f64, f64)> {
        if 8.0 * self.sigma >= 0.5 * PI {
            return Vec::new();
        }
        let t = self.vartheta;
        [t, -t, PI - t, PI + t]
            .into_iter()
            .flat_map(|c| [(c, 4.0 * self.sigma), (c, 8.0 * self.sigma)])
            .collect()
    }
}
