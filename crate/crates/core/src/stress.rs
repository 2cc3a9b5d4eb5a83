//! Second Piola-Kirchhoff stress for general `C`, pressure elimination under
//! principal-axis loading, nominal and Cauchy stresses, and directional
//! stiffness.
//!
//! The isochoric stress `S̃` of every model is assembled for an arbitrary
//! symmetric `C`. For a diagonal incompressible state the hydrostatic
//! pressure follows from the traction-free thickness direction,
//! `p = λ₃² S̃₃₃`, and `Pᵢ = λᵢ(S̃ᵢᵢ − p/λᵢ²)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dispersion::{
    a_from_kappa_ip, b_from_kappa_op, integrate_sphere, integrate_sphere_tensor, BivariateVonMises,
    rings_about_e3, PlanarGaussian, PolarAxis, SphereQuadrature, VonMisesPlanar, DEFAULT_ORDER,
    SPHERE_AREA,
};
use crate::error::{Error, Result};
use crate::kinematics::{DeformationState, InvariantSet, PrincipalStretches};
use crate::models::{
    amdm_fiber_sq, dbb_fiber_energy_sq, dbb_fiber_sq, gst_terms, Law, Model, ModelClass,
};

/// Relative change allowed between a sphere integral and its doubled-order
/// counterpart.
pub const VERIFY_RTOL: f64 = 1e-6;

/// Sphere quadrature settings for angular-integration models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Gauss-Legendre nodes per polar segment.
    pub order: usize,
    /// Re-evaluate at doubled order and fail if the result moves by more
    /// than [`VERIFY_RTOL`].
    pub verify: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            verify: false,
        }
    }
}

impl QuadratureConfig {
    pub fn with_order(order: usize) -> Self {
        Self {
            order,
            verify: false,
        }
    }

    pub fn verified(self) -> Self {
        Self {
            verify: true,
            ..self
        }
    }
}

/// Nominal stresses of a principal-axis state after pressure elimination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressResult {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    /// Hydrostatic pressure.
    pub pressure: f64,
    pub cauchy1: f64,
    pub cauchy2: f64,
}

impl StressResult {
    /// Nominal component along `e1` (`index = 0`) or `e2` (`index = 1`).
    pub fn nominal(&self, index: usize) -> f64 {
        match index {
            0 => self.p1,
            1 => self.p2,
            _ => self.p3,
        }
    }
}

fn outer(r: &Vector3<f64>) -> Matrix3<f64> {
    r * r.transpose()
}

fn kink_rule(c: &Matrix3<f64>, polar: PolarAxis, order: usize) -> SphereQuadrature {
    SphereQuadrature::kink_aligned(c, polar, order)
}

/// Sphere average of a tensor integrand, optionally checked against the
/// doubled order.
fn sphere_tensor<F>(c: &Matrix3<f64>, polar: PolarAxis, quad: &QuadratureConfig, f: F) -> Result<Matrix3<f64>>
where
    F: Fn(&Vector3<f64>) -> Matrix3<f64>,
{
    let base = integrate_sphere_tensor(&f, &kink_rule(c, polar, quad.order))?;
    if !quad.verify {
        return Ok(base);
    }
    let fine = integrate_sphere_tensor(&f, &kink_rule(c, polar, 2 * quad.order))?;
    let delta = (fine - base).abs().max();
    let scale = fine.abs().max();
    if delta > VERIFY_RTOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numeric(format!(
            "sphere quadrature not converged: order {} vs {} differ by {delta:e} (scale {scale:e})",
            quad.order,
            2 * quad.order
        )));
    }
    Ok(fine)
}

fn sphere_scalar<F>(c: &Matrix3<f64>, polar: PolarAxis, quad: &QuadratureConfig, f: F) -> Result<f64>
where
    F: Fn(&Vector3<f64>) -> f64,
{
    let base = integrate_sphere(&f, &kink_rule(c, polar, quad.order))?;
    if !quad.verify {
        return Ok(base);
    }
    let fine = integrate_sphere(&f, &kink_rule(c, polar, 2 * quad.order))?;
    if (fine - base).abs() > VERIFY_RTOL * fine.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Numeric(format!(
            "sphere quadrature not converged: order {} gives {base}, order {} gives {fine}",
            quad.order,
            2 * quad.order
        )));
    }
    Ok(fine)
}

/// Sphere average over rings about `e3` weighted by the planar volume
/// fraction, which is evaluated once per ring. Rings with a negligible
/// fraction are skipped.
fn ring_average<T, F>(c: &Matrix3<f64>, fraction: &PlanarGaussian, order: usize, zero: T, f: F) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Copy,
    F: Fn(&Vector3<f64>) -> T,
{
    let floor = 1e-16 * fraction.normalization();
    let mut acc = zero;
    for ring in rings_about_e3(c, order, &fraction.lobe_windows()) {
        let vf = fraction.volume_fraction_azimuth(ring.phi);
        if vf.abs() <= floor {
            continue;
        }
        let mut sum = zero;
        for (r, w) in ring.nodes.iter().zip(&ring.weights) {
            sum = sum + f(r) * *w;
        }
        acc = acc + sum * vf;
    }
    acc * (1.0 / SPHERE_AREA)
}

fn dbb_tensor<F>(c: &Matrix3<f64>, fraction: &PlanarGaussian, quad: &QuadratureConfig, f: F) -> Result<Matrix3<f64>>
where
    F: Fn(&Vector3<f64>) -> Matrix3<f64>,
{
    let base = ring_average(c, fraction, quad.order, Matrix3::zeros(), &f);
    if !quad.verify {
        return Ok(base);
    }
    let fine = ring_average(c, fraction, 2 * quad.order, Matrix3::zeros(), &f);
    let delta = (fine - base).abs().max();
    let scale = fine.abs().max();
    if delta > VERIFY_RTOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numeric(format!(
            "sphere quadrature not converged: order {} vs {} differ by {delta:e} (scale {scale:e})",
            quad.order,
            2 * quad.order
        )));
    }
    Ok(fine)
}

fn dbb_scalar<F>(c: &Matrix3<f64>, fraction: &PlanarGaussian, quad: &QuadratureConfig, f: F) -> Result<f64>
where
    F: Fn(&Vector3<f64>) -> f64,
{
    let base = ring_average(c, fraction, quad.order, 0.0, &f);
    if !quad.verify {
        return Ok(base);
    }
    let fine = ring_average(c, fraction, 2 * quad.order, 0.0, &f);
    if (fine - base).abs() > VERIFY_RTOL * fine.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Numeric(format!(
            "sphere quadrature not converged: order {} gives {base}, order {} gives {fine}",
            quad.order,
            2 * quad.order
        )));
    }
    Ok(fine)
}

/// Isochoric second Piola-Kirchhoff stress `S̃` (no pressure term).
pub fn pk2(model: &Model, c: &Matrix3<f64>, quad: &QuadratureConfig) -> Result<Matrix3<f64>> {
    let id = Matrix3::identity();
    match &model.law {
        Law::NeoHooke { .. } | Law::Ny { .. } | Law::Hgo { .. } | Law::Hsgr { .. } | Law::Os { .. } => {
            let fibers = model.fibers();
            let inv = InvariantSet::from_right_cauchy_green(c, fibers);
            let (_, d) = model.psi(&inv)?;
            let [a1, a2] = fibers.structure_tensors();
            let mut s = id * (2.0 * (d.psi1 + inv.i1 * d.psi2)) - c * (2.0 * d.psi2)
                + a1 * (2.0 * d.psi4)
                + (a1 * c + c * a1) * (2.0 * d.psi5)
                + a2 * (2.0 * d.psi6)
                + (a2 * c + c * a2) * (2.0 * d.psi7);
            if d.psi3 != 0.0 {
                let cinv = c.try_inverse().ok_or_else(|| Error::domain("C is singular"))?;
                s += cinv * (2.0 * inv.i3 * d.psi3);
            }
            Ok(s)
        }
        Law::Gst { mu, k1, k2, h } => {
            let t = gst_eval(model, *mu, *k1, *k2, h, c);
            Ok(id * (2.0 * t.psi1) + h[0] * (2.0 * t.psi_f[0]) + h[1] * (2.0 * t.psi_f[1]))
        }
        Law::Amdm { mu, k1, k2, density } => {
            let fams = model.fibers().families();
            let fiber = sphere_tensor(c, PolarAxis::Auto, quad, |r| {
                let x = r.dot(&(c * r));
                let (_, g) = amdm_fiber_sq(*k1, *k2, x);
                if g == 0.0 {
                    return Matrix3::zeros();
                }
                let rho: f64 = fams.iter().map(|m| density.density_at(r, m)).sum();
                outer(r) * (rho * g)
            })?;
            Ok(id * *mu + fiber)
        }
        Law::Asmd { mu, k1, k2, density } => {
            let fiber = sphere_tensor(c, PolarAxis::Auto, quad, |r| {
                let x = r.dot(&(c * r));
                let (_, g) = amdm_fiber_sq(*k1, *k2, x);
                if g == 0.0 {
                    return Matrix3::zeros();
                }
                outer(r) * (density.density(r) * g)
            })?;
            Ok(id * *mu + fiber)
        }
        Law::Dbb { mu, k1, k2, fraction, cutoff } => {
            let cinv = c.try_inverse().ok_or_else(|| Error::domain("C is singular"))?;
            let c2 = c * c;
            let fiber = dbb_tensor(c, fraction, quad, |r| {
                let x = r.dot(&(c * r));
                let matrix_part = mu * (r.dot(&(c2 * r)) - x) / x;
                outer(r) * ((dbb_fiber_sq(*k1, *k2, x, *cutoff) - matrix_part) / x)
            })?;
            Ok((id - cinv) * *mu + fiber)
        }
    }
}

fn gst_eval(
    model: &Model,
    mu: f64,
    k1: f64,
    k2: f64,
    h: &[Matrix3<f64>; 2],
    c: &Matrix3<f64>,
) -> crate::models::GstTerms {
    let fams = model.fibers().families();
    let e = [h[0].dot(c) - 1.0, h[1].dot(c) - 1.0];
    // Tension-only: a family acts while its mean direction is stretched.
    let active = [fams[0].dot(&(c * fams[0])) > 1.0, fams[1].dot(&(c * fams[1])) > 1.0];
    gst_terms(mu, k1, k2, c.trace(), e, active)
}

/// Strain energy for a general `C`.
///
/// For DBB, whose rule-of-mixtures stress has no potential, this is the
/// energy of the matrix and fiber terms without the matrix-exclusion term.
pub fn strain_energy(model: &Model, c: &Matrix3<f64>, quad: &QuadratureConfig) -> Result<f64> {
    match &model.law {
        Law::NeoHooke { .. } | Law::Ny { .. } | Law::Hgo { .. } | Law::Hsgr { .. } | Law::Os { .. } => {
            let inv = InvariantSet::from_right_cauchy_green(c, model.fibers());
            Ok(model.psi(&inv)?.0)
        }
        Law::Gst { mu, k1, k2, h } => Ok(gst_eval(model, *mu, *k1, *k2, h, c).energy),
        Law::Amdm { mu, k1, k2, density } => {
            let fams = model.fibers().families();
            let fiber = sphere_scalar(c, PolarAxis::Auto, quad, |r| {
                let (w, _) = amdm_fiber_sq(*k1, *k2, r.dot(&(c * r)));
                if w == 0.0 {
                    return 0.0;
                }
                w * fams.iter().map(|m| density.density_at(r, m)).sum::<f64>()
            })?;
            Ok(0.5 * mu * (c.trace() - 3.0) + fiber)
        }
        Law::Asmd { mu, k1, k2, density } => {
            let fiber = sphere_scalar(c, PolarAxis::Auto, quad, |r| {
                let (w, _) = amdm_fiber_sq(*k1, *k2, r.dot(&(c * r)));
                if w == 0.0 {
                    return 0.0;
                }
                w * density.density(r)
            })?;
            Ok(0.5 * mu * (c.trace() - 3.0) + fiber)
        }
        Law::Dbb { mu, k1, k2, fraction, cutoff } => {
            let fiber = dbb_scalar(c, fraction, quad, |r| {
                dbb_fiber_energy_sq(*k1, *k2, r.dot(&(c * r)), *cutoff)
            })?;
            Ok(0.5 * mu * (c.trace() - 3.0 - c.determinant().ln()) + fiber)
        }
    }
}

/// Nominal stresses of an incompressible principal state with `P₃ = 0`.
pub fn nominal_stress_principal(
    model: &Model,
    stretches: &PrincipalStretches,
    quad: &QuadratureConfig,
) -> Result<StressResult> {
    let l = stretches.0;
    let s = pk2(model, &stretches.right_cauchy_green(), quad)?;
    let pressure = l[2] * l[2] * s[(2, 2)];
    let p: [f64; 3] = std::array::from_fn(|i| l[i] * (s[(i, i)] - pressure / (l[i] * l[i])));
    Ok(StressResult {
        p1: p[0],
        p2: p[1],
        p3: p[2],
        pressure,
        cauchy1: l[0] * p[0],
        cauchy2: l[1] * p[1],
    })
}

/// Hydrostatic pressure making the thickness direction traction free.
pub fn solve_pressure(model: &Model, state: &DeformationState, quad: &QuadratureConfig) -> Result<f64> {
    Ok(nominal_stress_principal(model, &state.stretches(), quad)?.pressure)
}

fn require_class(model: &Model, class: ModelClass) -> Result<()> {
    if model.kind().class() == class {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{} is not a {class:?}-class model",
            model.kind()
        )))
    }
}

/// Nominal stress of an invariant-based model.
pub fn nominal_stress_invariant(model: &Model, state: &DeformationState) -> Result<StressResult> {
    require_class(model, ModelClass::Invariant)?;
    nominal_stress_principal(model, &state.stretches(), &QuadratureConfig::default())
}

/// Nominal stress of a structure-tensor model.
pub fn nominal_stress_gst(model: &Model, state: &DeformationState) -> Result<StressResult> {
    require_class(model, ModelClass::Gst)?;
    nominal_stress_principal(model, &state.stretches(), &QuadratureConfig::default())
}

/// Nominal stress of an angular-integration model.
pub fn nominal_stress_ai(model: &Model, state: &DeformationState, quad: &QuadratureConfig) -> Result<StressResult> {
    require_class(model, ModelClass::Ai)?;
    nominal_stress_principal(model, &state.stretches(), quad)
}

/// Nominal stress of any model.
pub fn nominal_stress(model: &Model, state: &DeformationState, quad: &QuadratureConfig) -> Result<StressResult> {
    nominal_stress_principal(model, &state.stretches(), quad)
}

/// Cauchy stresses `σᵢ = λᵢPᵢ`.
pub fn convert_stress(p: &StressResult, state: &DeformationState) -> [f64; 3] {
    let l = state.stretches().0;
    [l[0] * p.p1, l[1] * p.p2, l[2] * p.p3]
}

/// Samples of a 2π-periodic function of the in-plane angle `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarCurve {
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
}

/// `n + 1` equally spaced angles covering `[0, 2π]`.
pub fn alpha_grid(n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / n as f64)
        .collect()
}

const DS_STEP: f64 = 1e-5;
const DS_RICHARDSON_TRIGGER: f64 = 1e-4;

fn in_plane(alpha: f64) -> Vector3<f64> {
    Vector3::new(alpha.cos(), alpha.sin(), 0.0)
}

/// Directional stiffness `n⊗n : ℂ_ani : n⊗n` at the reference state with
/// `n = cos α e₁ + sin α e₂`.
///
/// Structure-tensor models use the closed form `4k₁ Σ (n·Hᵢn)²`. For the
/// others `ℂ_ani = 2 ∂S_ani/∂C` is differenced on the tension side,
/// `C = 1 + s n⊗n` with `s > 0`, because the fiber terms switch on there.
/// `S_ani` is the stress of [`Model::anisotropic_part`].
pub fn directional_stiffness(model: &Model, alphas: &[f64], quad: &QuadratureConfig) -> Result<PolarCurve> {
    let values = match &model.law {
        Law::Gst { k1, h, .. } => alphas
            .iter()
            .map(|&a| {
                let n = in_plane(a);
                4.0 * k1 * h.iter().map(|h| n.dot(&(h * n)).powi(2)).sum::<f64>()
            })
            .collect(),
        _ => {
            let ani = model.anisotropic_part();
            let id = Matrix3::identity();
            let s0 = pk2(&ani, &id, quad)?;
            alphas
                .iter()
                .map(|&a| {
                    let n = in_plane(a);
                    let f = |s: f64| -> Result<f64> {
                        Ok(n.dot(&(pk2(&ani, &(id + outer(&n) * s), quad)? * n)))
                    };
                    let f0 = n.dot(&(s0 * n));
                    let d1 = (f(DS_STEP)? - f0) / DS_STEP;
                    let d2 = (f(0.5 * DS_STEP)? - f0) / (0.5 * DS_STEP);
                    let d = if (d1 - d2).abs() > DS_RICHARDSON_TRIGGER * d2.abs().max(1e-12) {
                        2.0 * d2 - d1
                    } else {
                        d2
                    };
                    Ok(2.0 * d)
                })
                .collect::<Result<Vec<f64>>>()?
        }
    };
    Ok(PolarCurve {
        angles: alphas.to_vec(),
        values,
    })
}

/// Fiber density (or DBB volume fraction) along `n(α)`, summed over the
/// fiber families; `None` for models without a dispersion density.
pub fn density_curve(model: &Model, alphas: &[f64]) -> Result<Option<PolarCurve>> {
    let fams = model.fibers().families();
    let density: Box<dyn Fn(&Vector3<f64>) -> f64> = match &model.law {
        Law::Amdm { density, .. } => {
            let d = *density;
            Box::new(move |n| fams.iter().map(|m| d.density_at(n, m)).sum())
        }
        Law::Asmd { density, .. } => {
            let d = density.clone();
            Box::new(move |n| d.density(n))
        }
        Law::Dbb { fraction, .. } => {
            let g = *fraction;
            Box::new(move |n| g.volume_fraction(n))
        }
        Law::Gst { .. } => match model.kind() {
            crate::models::ModelKind::Goh => {
                let kappa = model.params()[3];
                if kappa <= 0.0 || kappa >= 1.0 / 3.0 {
                    return Ok(None);
                }
                let d = VonMisesPlanar::new(crate::dispersion::b_from_kappa(kappa)?)?;
                Box::new(move |n| fams.iter().map(|m| d.density_at(n, m)).sum())
            }
            _ => {
                let (kip, kop) = (model.params()[3], model.params()[4]);
                let (Ok(a), Ok(b)) = (a_from_kappa_ip(kip), b_from_kappa_op(kop)) else {
                    return Ok(None);
                };
                let d = BivariateVonMises::new(a, b)?;
                let mn = model.fibers().mn;
                Box::new(move |n| fams.iter().map(|m| d.density_at(n, m, &mn)).sum())
            }
        },
        _ => return Ok(None),
    };
    Ok(Some(PolarCurve {
        angles: alphas.to_vec(),
        values: alphas.iter().map(|&a| density(&in_plane(a))).collect(),
    }))
}
