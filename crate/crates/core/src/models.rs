//! Strain-energy functions of the model catalog and their first derivatives.
//!
//! Invariant-based models return `Ψ` together with `ψᵢ = ∂Ψ/∂Iᵢ`. The
//! structure-tensor models return `ψ_f = ∂Ψ/∂E` per fiber family, and the
//! angular-integration models expose their single-fiber laws. [`Model`] is
//! the validated, ready-to-evaluate form of a [`ModelSpec`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::dispersion::{
    goh_structure_tensor, hnors_structure_tensor, BinghamDistribution, PlanarGaussian,
    VonMisesPlanar,
};
use crate::error::{Error, Result};
use crate::kinematics::{FiberGeometry, InvariantSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    NeoHooke,
    #[serde(rename = "NY")]
    Ny,
    #[serde(rename = "HGO")]
    Hgo,
    #[serde(rename = "HSGR")]
    Hsgr,
    #[serde(rename = "OS")]
    Os,
    #[serde(rename = "GOH")]
    Goh,
    #[serde(rename = "HNORS")]
    Hnors,
    #[serde(rename = "AMDM")]
    Amdm,
    #[serde(rename = "ASMD")]
    Asmd,
    #[serde(rename = "DBB")]
    Dbb,
}

/// How a model's stress is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelClass {
    Invariant,
    Gst,
    Ai,
}

/// A fit parameter with its default search interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamInfo {
    pub name: &'static str,
    pub lower: f64,
    pub upper: f64,
    /// Searched on a logarithmic scale.
    pub log_scale: bool,
}

const fn lin(name: &'static str, lower: f64, upper: f64) -> ParamInfo {
    ParamInfo { name, lower, upper, log_scale: false }
}

const fn log(name: &'static str, lower: f64, upper: f64) -> ParamInfo {
    ParamInfo { name, lower, upper, log_scale: true }
}

const MU: ParamInfo = log("mu", 1e-4, 20.0);
const K1: ParamInfo = log("k1", 1e-4, 500.0);
const K2: ParamInfo = log("k2", 1e-2, 500.0);

const P_NEO: [ParamInfo; 1] = [MU];
const P_NY: [ParamInfo; 3] = [log("k0", 1e-4, 1e4), log("k1", 1e-4, 1e3), log("k2", 1e-2, 1e4)];
const P_HGO: [ParamInfo; 3] = [MU, K1, K2];
const P_HSGR: [ParamInfo; 4] = [MU, K1, K2, lin("p", 0.0, 1.0)];
const P_OS: [ParamInfo; 4] = [MU, log("jm", 1e-3, 10.0), log("k1", 1e-4, 100.0), log("jf", 1e-3, 10.0)];
const P_GOH: [ParamInfo; 4] = [MU, K1, K2, lin("kappa", 0.0, 1.0 / 3.0)];
const P_HNORS: [ParamInfo; 5] = [MU, K1, K2, lin("kappa_ip", 0.0, 1.0), lin("kappa_op", 0.0, 0.5)];
const P_AMDM: [ParamInfo; 4] = [MU, K1, K2, log("b", 1e-3, 100.0)];
const P_ASMD: [ParamInfo; 6] = [
    MU,
    K1,
    K2,
    lin("kappa1", 0.0, 10.0),
    lin("kappa2", 0.0, 10.0),
    lin("kappa3", 0.0, 10.0),
];
const P_DBB: [ParamInfo; 5] = [
    MU,
    log("k1", 1e-4, 100.0),
    log("k2", 1e-2, 100.0),
    lin("sigma", 0.05, 2.0),
    lin("v_tot", 0.01, 1.0),
];

impl ModelKind {
    pub const ALL: [ModelKind; 10] = [
        ModelKind::NeoHooke,
        ModelKind::Ny,
        ModelKind::Hgo,
        ModelKind::Hsgr,
        ModelKind::Os,
        ModelKind::Goh,
        ModelKind::Hnors,
        ModelKind::Amdm,
        ModelKind::Asmd,
        ModelKind::Dbb,
    ];

    /// The nine anisotropic models compared against each other.
    pub const REVIEWED: [ModelKind; 9] = [
        ModelKind::Ny,
        ModelKind::Hgo,
        ModelKind::Hsgr,
        ModelKind::Os,
        ModelKind::Goh,
        ModelKind::Hnors,
        ModelKind::Amdm,
        ModelKind::Asmd,
        ModelKind::Dbb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::NeoHooke => "NeoHooke",
            ModelKind::Ny => "NY",
            ModelKind::Hgo => "HGO",
            ModelKind::Hsgr => "HSGR",
            ModelKind::Os => "OS",
            ModelKind::Goh => "GOH",
            ModelKind::Hnors => "HNORS",
            ModelKind::Amdm => "AMDM",
            ModelKind::Asmd => "ASMD",
            ModelKind::Dbb => "DBB",
        }
    }

    pub fn class(self) -> ModelClass {
        match self {
            ModelKind::NeoHooke | ModelKind::Ny | ModelKind::Hgo | ModelKind::Hsgr | ModelKind::Os => {
                ModelClass::Invariant
            }
            ModelKind::Goh | ModelKind::Hnors => ModelClass::Gst,
            ModelKind::Amdm | ModelKind::Asmd | ModelKind::Dbb => ModelClass::Ai,
        }
    }

    pub fn type_tag(self) -> &'static str {
        match self.class() {
            ModelClass::Invariant => "I1-I4",
            ModelClass::Gst => "GST",
            ModelClass::Ai => "AI",
        }
    }

    /// Material parameters in vector order (the fiber angle is not included).
    pub fn parameters(self) -> &'static [ParamInfo] {
        match self {
            ModelKind::NeoHooke => &P_NEO,
            ModelKind::Ny => &P_NY,
            ModelKind::Hgo => &P_HGO,
            ModelKind::Hsgr => &P_HSGR,
            ModelKind::Os => &P_OS,
            ModelKind::Goh => &P_GOH,
            ModelKind::Hnors => &P_HNORS,
            ModelKind::Amdm => &P_AMDM,
            ModelKind::Asmd => &P_ASMD,
            ModelKind::Dbb => &P_DBB,
        }
    }

    pub fn param_names(self) -> Vec<&'static str> {
        self.parameters().iter().map(|p| p.name).collect()
    }

    /// Whether the mean fiber angle enters the model.
    pub fn uses_fiber_angle(self) -> bool {
        !matches!(self, ModelKind::NeoHooke | ModelKind::Asmd)
    }

    /// Number of material parameters, counting the fiber angle.
    pub fn nop(self) -> usize {
        self.parameters().len() + usize::from(self.uses_fiber_angle())
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(t))
            .or_else(|| {
                ["neo-hooke", "neohookean", "neo_hooke"]
                    .iter()
                    .any(|a| a.eq_ignore_ascii_case(t))
                    .then_some(ModelKind::NeoHooke)
            })
            .ok_or_else(|| Error::domain(format!("unknown model '{s}'")))
    }
}

/// `∂Ψ/∂Iᵢ` and, for dispersion models, `∂Ψ/∂E` per fiber family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PsiDerivatives {
    pub psi1: f64,
    pub psi2: f64,
    pub psi3: f64,
    pub psi4: f64,
    pub psi5: f64,
    pub psi6: f64,
    pub psi7: f64,
    pub psi_f: [f64; 2],
}

/// Energy and derivatives of a structure-tensor model.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GstTerms {
    pub energy: f64,
    pub psi1: f64,
    pub psi_f: [f64; 2],
}

fn macaulay(x: f64) -> f64 {
    x.max(0.0)
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be > 0, got {v}")))
    }
}

fn require_range(name: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [{lo}, {hi}], got {v}")))
    }
}

/// `Ψ = ½μ(I₁ − 3)`.
pub fn neo_hookean(mu: f64, inv: &InvariantSet) -> (f64, PsiDerivatives) {
    (
        0.5 * mu * (inv.i1 - 3.0),
        PsiDerivatives {
            psi1: 0.5 * mu,
            ..Default::default()
        },
    )
}

/// `Ψ = k₀(exp Q − 1)`, `Q = k₁(I₁−3)² + k₂(√I₄−1)⁴ + k₂(√I₆−1)⁴`.
pub fn ny_model(k0: f64, k1: f64, k2: f64, inv: &InvariantSet) -> Result<(f64, PsiDerivatives)> {
    if !(inv.i4 > 0.0 && inv.i6 > 0.0) {
        return Err(Error::domain(format!(
            "NY model needs I4, I6 > 0, got ({}, {})",
            inv.i4, inv.i6
        )));
    }
    let (s4, s6) = (inv.i4.sqrt(), inv.i6.sqrt());
    let (d4, d6) = (s4 - 1.0, s6 - 1.0);
    let q = k1 * (inv.i1 - 3.0).powi(2) + k2 * d4.powi(4) + k2 * d6.powi(4);
    let eq = q.exp();
    Ok((
        k0 * q.exp_m1(),
        PsiDerivatives {
            psi1: 2.0 * k0 * k1 * (inv.i1 - 3.0) * eq,
            psi4: 2.0 * k0 * k2 * d4.powi(3) / s4 * eq,
            psi6: 2.0 * k0 * k2 * d6.powi(3) / s6 * eq,
            ..Default::default()
        },
    ))
}

/// Tension-only exponential fiber term `(k₁/2k₂)(exp(k₂⟨I−1⟩²) − 1)` and its
/// derivative `k₁⟨I−1⟩exp(k₂⟨I−1⟩²)`.
fn hgo_family(k1: f64, k2: f64, i: f64) -> (f64, f64) {
    let x = macaulay(i - 1.0);
    let q = k2 * x * x;
    (0.5 * k1 / k2 * q.exp_m1(), k1 * x * q.exp())
}

/// Neo-Hookean matrix plus two tension-only exponential fiber families.
pub fn hgo_model(mu: f64, k1: f64, k2: f64, inv: &InvariantSet) -> (f64, PsiDerivatives) {
    let (w_iso, mut d) = neo_hookean(mu, inv);
    let (w4, p4) = hgo_family(k1, k2, inv.i4);
    let (w6, p6) = hgo_family(k1, k2, inv.i6);
    d.psi4 = p4;
    d.psi6 = p6;
    (w_iso + w4 + w6, d)
}

/// Neo-Hookean matrix plus, per family `i ∈ {4, 6}` in tension,
/// `(k₁/2k₂)(exp(k₂[(1−p)(I₁−3)² + p(Iᵢ−1)²]) − 1)`.
pub fn hsgr_model(mu: f64, k1: f64, k2: f64, p: f64, inv: &InvariantSet) -> (f64, PsiDerivatives) {
    let (mut w, mut d) = neo_hookean(mu, inv);
    let a = inv.i1 - 3.0;
    for (i, slot) in [(inv.i4, &mut d.psi4), (inv.i6, &mut d.psi6)] {
        if i > 1.0 {
            let x = i - 1.0;
            let q = k2 * ((1.0 - p) * a * a + p * x * x);
            let e = q.exp();
            w += 0.5 * k1 / k2 * q.exp_m1();
            d.psi1 += k1 * (1.0 - p) * a * e;
            *slot = k1 * p * x * e;
        }
    }
    (w, d)
}

const LIMIT_RTOL: f64 = 1e-12;

/// Gent-type matrix with extensibility `J_m` plus fiber families with
/// extensibility `J_f`.
pub fn os_model(mu: f64, jm: f64, k1: f64, jf: f64, inv: &InvariantSet) -> Result<(f64, PsiDerivatives)> {
    let a = inv.i1 - 3.0;
    // The limit counts as reached within rounding of the stored inputs.
    if a >= jm * (1.0 - LIMIT_RTOL) {
        return Err(Error::Infeasible {
            what: "matrix extensibility I1 - 3 < Jm",
            value: a,
            limit: jm,
        });
    }
    let mut w = -0.5 * mu * jm * (-a / jm).ln_1p();
    let mut d = PsiDerivatives {
        psi1: 0.5 * mu * jm / (jm - a),
        ..Default::default()
    };
    for (i, slot) in [(inv.i4, &mut d.psi4), (inv.i6, &mut d.psi6)] {
        let x = macaulay(i - 1.0);
        if x * x >= jf * (1.0 - LIMIT_RTOL) {
            return Err(Error::Infeasible {
                what: "fiber extensibility <I - 1>^2 < Jf",
                value: x * x,
                limit: jf,
            });
        }
        w -= 0.5 * k1 * jf * (-x * x / jf).ln_1p();
        *slot = k1 * jf * x / (jf - x * x);
    }
    Ok((w, d))
}

pub(crate) fn gst_terms(mu: f64, k1: f64, k2: f64, i1: f64, e: [f64; 2], active: [bool; 2]) -> GstTerms {
    let mut t = GstTerms {
        energy: 0.5 * mu * (i1 - 3.0),
        psi1: 0.5 * mu,
        psi_f: [0.0; 2],
    };
    for f in 0..2 {
        if active[f] {
            let q = k2 * e[f] * e[f];
            t.energy += 0.5 * k1 / k2 * q.exp_m1();
            t.psi_f[f] = k1 * e[f] * q.exp();
        }
    }
    t
}

/// GOH energy for fiber strains `Eᵢ = Hᵢ : C − 1`; `active` flags the
/// families whose mean direction is stretched.
pub fn goh_model(
    mu: f64,
    k1: f64,
    k2: f64,
    kappa: f64,
    i1: f64,
    e: [f64; 2],
    active: [bool; 2],
) -> Result<GstTerms> {
    require_range("kappa", kappa, 0.0, 1.0 / 3.0)?;
    Ok(gst_terms(mu, k1, k2, i1, e, active))
}

/// HNORS energy; same functional form as [`goh_model`].
#[allow(clippy::too_many_arguments)]
pub fn hnors_model(
    mu: f64,
    k1: f64,
    k2: f64,
    kappa_ip: f64,
    kappa_op: f64,
    i1: f64,
    e: [f64; 2],
    active: [bool; 2],
) -> Result<GstTerms> {
    require_range("kappa_ip", kappa_ip, 0.0, 1.0)?;
    require_range("kappa_op", kappa_op, 0.0, 0.5)?;
    Ok(gst_terms(mu, k1, k2, i1, e, active))
}

/// Single-fiber law in terms of `x = λ_f²`: returns `(ψ_fib, ψ_f/λ_f)`.
pub fn amdm_fiber_sq(k1: f64, k2: f64, x: f64) -> (f64, f64) {
    if x < 1.0 {
        return (0.0, 0.0);
    }
    let s = x - 1.0;
    let q = k2 * s * s;
    (0.5 * k1 / k2 * q.exp_m1(), 2.0 * k1 * s * q.exp())
}

/// `(ψ_fib, ψ_f)` of a fiber with stretch `lambda_f`.
pub fn amdm_fiber(k1: f64, k2: f64, lambda_f: f64) -> (f64, f64) {
    let (w, g) = amdm_fiber_sq(k1, k2, lambda_f * lambda_f);
    (w, g * lambda_f)
}

/// Fiber Kirchhoff stress `τ_f = k₁λ_f²[k₂ exp(λ_f² − 1) − 1]`.
pub fn dbb_fiber(k1: f64, k2: f64, lambda_f: f64) -> f64 {
    dbb_fiber_sq(k1, k2, lambda_f * lambda_f, false)
}

/// `τ_f` in terms of `x = λ_f²`; `cutoff` zeroes compressed fibers.
pub fn dbb_fiber_sq(k1: f64, k2: f64, x: f64, cutoff: bool) -> f64 {
    if cutoff && x < 1.0 {
        return 0.0;
    }
    k1 * x * (k2 * (x - 1.0).exp() - 1.0)
}

/// Potential of the fiber stress, `w(x)` with `2 dw/dx = τ_f / x`, zero at `x = 1`.
pub fn dbb_fiber_energy_sq(k1: f64, k2: f64, x: f64, cutoff: bool) -> f64 {
    if cutoff && x < 1.0 {
        return 0.0;
    }
    0.5 * k1 * (k2 * (x - 1.0).exp_m1() - (x - 1.0))
}

/// Options that are not material parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOptions {
    /// Zero the DBB fiber stress of compressed fibers.
    pub dbb_cutoff: bool,
    /// Rotation of the Bingham frame about `e3`, in degrees.
    pub bingham_angle_deg: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            dbb_cutoff: false,
            bingham_angle_deg: 0.0,
        }
    }
}

/// Serializable model description: kind, named parameters and fiber angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub phi_deg: f64,
    #[serde(default)]
    pub options: ModelOptions,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, values: &[f64], phi_deg: f64) -> Result<Self> {
        let names = kind.param_names();
        if names.len() != values.len() {
            return Err(Error::domain(format!(
                "{kind} takes {} parameters, got {}",
                names.len(),
                values.len()
            )));
        }
        Ok(Self {
            kind,
            params: names
                .iter()
                .map(|n| n.to_string())
                .zip(values.iter().copied())
                .collect(),
            phi_deg,
            options: ModelOptions::default(),
        })
    }

    /// Parameter values in the kind's vector order.
    pub fn values(&self) -> Result<Vec<f64>> {
        let names = self.kind.param_names();
        for key in self.params.keys() {
            if !names.contains(&key.as_str()) {
                return Err(Error::domain(format!(
                    "{} has no parameter '{key}' (expected {})",
                    self.kind,
                    names.join(", ")
                )));
            }
        }
        names
            .iter()
            .map(|n| {
                self.params.get(*n).copied().ok_or_else(|| {
                    Error::domain(format!("{} is missing parameter '{n}'", self.kind))
                })
            })
            .collect()
    }

    pub fn build(&self) -> Result<Model> {
        Model::new(
            self.kind,
            &self.values()?,
            FiberGeometry::from_degrees(self.phi_deg),
            self.options,
        )
    }
}

/// Evaluation data specific to each model.
#[derive(Debug, Clone)]
pub(crate) enum Law {
    NeoHooke { mu: f64 },
    Ny { k0: f64, k1: f64, k2: f64 },
    Hgo { mu: f64, k1: f64, k2: f64 },
    Hsgr { mu: f64, k1: f64, k2: f64, p: f64 },
    Os { mu: f64, jm: f64, k1: f64, jf: f64 },
    Gst { mu: f64, k1: f64, k2: f64, h: [Matrix3<f64>; 2] },
    Amdm { mu: f64, k1: f64, k2: f64, density: VonMisesPlanar },
    Asmd { mu: f64, k1: f64, k2: f64, density: Box<BinghamDistribution> },
    Dbb { mu: f64, k1: f64, k2: f64, fraction: PlanarGaussian, cutoff: bool },
}

/// A validated model with fixed parameters and fiber geometry.
#[derive(Debug, Clone)]
pub struct Model {
    kind: ModelKind,
    params: Vec<f64>,
    fibers: FiberGeometry,
    options: ModelOptions,
    pub(crate) law: Law,
}

impl Model {
    pub fn new(kind: ModelKind, params: &[f64], fibers: FiberGeometry, options: ModelOptions) -> Result<Self> {
        let n = kind.parameters().len();
        if params.len() != n {
            return Err(Error::domain(format!(
                "{kind} takes {n} parameters, got {}",
                params.len()
            )));
        }
        if let Some(v) = params.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("{kind} parameter is not finite: {v}")));
        }
        let p = params;
        let law = match kind {
            ModelKind::NeoHooke => {
                require_positive("mu", p[0])?;
                Law::NeoHooke { mu: p[0] }
            }
            ModelKind::Ny => {
                require_positive("k0", p[0])?;
                require_range("k1", p[1], 0.0, f64::INFINITY)?;
                require_positive("k2", p[2])?;
                Law::Ny { k0: p[0], k1: p[1], k2: p[2] }
            }
            ModelKind::Hgo => {
                for (name, v) in [("mu", p[0]), ("k1", p[1]), ("k2", p[2])] {
                    require_positive(name, v)?;
                }
                Law::Hgo { mu: p[0], k1: p[1], k2: p[2] }
            }
            ModelKind::Hsgr => {
                for (name, v) in [("mu", p[0]), ("k1", p[1]), ("k2", p[2])] {
                    require_positive(name, v)?;
                }
                require_range("p", p[3], 0.0, 1.0)?;
                Law::Hsgr { mu: p[0], k1: p[1], k2: p[2], p: p[3] }
            }
            ModelKind::Os => {
                for (name, v) in [("mu", p[0]), ("jm", p[1]), ("k1", p[2]), ("jf", p[3])] {
                    require_positive(name, v)?;
                }
                Law::Os { mu: p[0], jm: p[1], k1: p[2], jf: p[3] }
            }
            ModelKind::Goh => {
                for (name, v) in [("mu", p[0]), ("k1", p[1]), ("k2", p[2])] {
                    require_positive(name, v)?;
                }
                let [m1, m2] = fibers.families();
                let h = [goh_structure_tensor(p[3], &m1)?, goh_structure_tensor(p[3], &m2)?];
                Law::Gst { mu: p[0], k1: p[1], k2: p[2], h }
            }
            ModelKind::Hnors => {
                for (name, v) in [("mu", p[0]), ("k1", p[1]), ("k2", p[2])] {
                    require_positive(name, v)?;
                }
                let [m1, m2] = fibers.families();
                let h = [
                    hnors_structure_tensor(p[3], p[4], &m1, &fibers.mn)?,
                    hnors_structure_tensor(p[3], p[4], &m2, &fibers.mn)?,
                ];
                Law::Gst { mu: p[0], k1: p[1], k2: p[2], h }
            }
            ModelKind::Amdm => {
                for (name, v) in [("mu", p[0]), ("k1", p[1]), ("k2", p[2])] {
                    require_positive(name, v)?;
                }
                Law::Amdm { mu: p[0], k1: p[1], k2: p[2], density: VonMisesPlanar::new(p[3])? }
            }
            ModelKind::Asmd => {
                for (name, v) in [("mu", p[0]), ("k1", p[1]), ("k2", p[2])] {
                    require_positive(name, v)?;
                }
                let density = BinghamDistribution::rotated(
                    [p[3], p[4], p[5]],
                    options.bingham_angle_deg.to_radians(),
                )?;
                Law::Asmd { mu: p[0], k1: p[1], k2: p[2], density: Box::new(density) }
            }
            ModelKind::Dbb => {
                for (name, v) in [("mu", p[0]), ("k1", p[1]), ("k2", p[2])] {
                    require_positive(name, v)?;
                }
                Law::Dbb {
                    mu: p[0],
                    k1: p[1],
                    k2: p[2],
                    fraction: PlanarGaussian::new(p[3], fibers.phi(), p[4])?,
                    cutoff: options.dbb_cutoff,
                }
            }
        };
        Ok(Self {
            kind,
            params: params.to_vec(),
            fibers,
            options,
            law,
        })
    }

    /// Same kind, fibers and options with new parameter values.
    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        Self::new(self.kind, params, self.fibers, self.options)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn fibers(&self) -> &FiberGeometry {
        &self.fibers
    }

    pub fn options(&self) -> ModelOptions {
        self.options
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            kind: self.kind,
            params: self
                .kind
                .param_names()
                .iter()
                .map(|n| n.to_string())
                .zip(self.params.iter().copied())
                .collect(),
            phi_deg: self.fibers.phi_degrees(),
            options: self.options,
        }
    }

    /// Shear modulus of the isotropic matrix, if the model has one.
    pub fn matrix_modulus(&self) -> Option<f64> {
        match &self.law {
            Law::Ny { .. } => None,
            Law::NeoHooke { mu }
            | Law::Hgo { mu, .. }
            | Law::Hsgr { mu, .. }
            | Law::Os { mu, .. }
            | Law::Gst { mu, .. }
            | Law::Amdm { mu, .. }
            | Law::Asmd { mu, .. }
            | Law::Dbb { mu, .. } => Some(*mu),
        }
    }

    /// The model with its isotropic matrix removed (`μ = 0`).
    ///
    /// The NY energy has no separable matrix and is returned unchanged.
    pub fn anisotropic_part(&self) -> Self {
        let mut out = self.clone();
        match &mut out.law {
            Law::Ny { .. } => {}
            Law::NeoHooke { mu }
            | Law::Hgo { mu, .. }
            | Law::Hsgr { mu, .. }
            | Law::Os { mu, .. }
            | Law::Gst { mu, .. }
            | Law::Amdm { mu, .. }
            | Law::Asmd { mu, .. }
            | Law::Dbb { mu, .. } => *mu = 0.0,
        }
        out
    }

    /// The model with its fiber stiffness removed (`k1 = 0`).
    ///
    /// NY couples matrix and fibers in one exponential and is returned
    /// unchanged, as is the neo-Hookean model. The DBB matrix-exclusion
    /// term is kept.
    pub fn isotropic_part(&self) -> Self {
        let mut out = self.clone();
        match &mut out.law {
            Law::Ny { .. } | Law::NeoHooke { .. } => {}
            Law::Hgo { k1, .. }
            | Law::Hsgr { k1, .. }
            | Law::Os { k1, .. }
            | Law::Gst { k1, .. }
            | Law::Amdm { k1, .. }
            | Law::Asmd { k1, .. }
            | Law::Dbb { k1, .. } => *k1 = 0.0,
        }
        out
    }

    /// Energy and `ψᵢ` of an invariant-based model.
    pub fn psi(&self, inv: &InvariantSet) -> Result<(f64, PsiDerivatives)> {
        match self.law {
            Law::NeoHooke { mu } => Ok(neo_hookean(mu, inv)),
            Law::Ny { k0, k1, k2 } => ny_model(k0, k1, k2, inv),
            Law::Hgo { mu, k1, k2 } => Ok(hgo_model(mu, k1, k2, inv)),
            Law::Hsgr { mu, k1, k2, p } => Ok(hsgr_model(mu, k1, k2, p, inv)),
            Law::Os { mu, jm, k1, jf } => os_model(mu, jm, k1, jf, inv),
            _ => Err(Error::domain(format!(
                "{} is not an invariant-based model",
                self.kind
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{invariants, DeformationState, LoadingMode, PrincipalStretches};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn inv(i1: f64, i4: f64, i6: f64) -> InvariantSet {
        InvariantSet {
            i4,
            i6,
            ..InvariantSet::isotropic(i1)
        }
    }

    /// Central difference of `f` at `x` with step `1e-6·max(1, |x|)`.
    fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6 * x.abs().max(1.0);
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn neo_hookean_examples() {
        let (w, d) = neo_hookean(2.0, &InvariantSet::isotropic(3.0));
        assert_eq!(w, 0.0);
        assert_eq!(d.psi1, 1.0);
        assert_eq!(neo_hookean(1.0, &InvariantSet::isotropic(5.0)).0, 1.0);
        assert_relative_eq!(
            neo_hookean(2.6712, &InvariantSet::isotropic(3.01)).0,
            0.013356,
            max_relative = 1e-12
        );
    }

    #[test]
    fn ny_examples() {
        let (w, d) = ny_model(0.1148, 31.1439, 1523.0, &inv(3.0, 1.0, 1.0)).unwrap();
        assert_eq!(w, 0.0);
        assert_eq!((d.psi1, d.psi4, d.psi6), (0.0, 0.0, 0.0));
        assert_eq!(ny_model(1.0, 2.0, 3.0, &inv(3.2, 1.0, 1.3)).unwrap().1.psi4, 0.0);
        assert!(ny_model(1.0, 1.0, 1.0, &inv(3.0, 0.0, 1.0)).is_err());

        // ET λ = 1.05: I1 = 2λ² + λ⁻⁴, I4 = I6 = λ², √I4 − 1 = 0.05
        let l: f64 = 1.05;
        let s = DeformationState::new(LoadingMode::Et, l).unwrap();
        let iv = invariants(&s, &FiberGeometry::from_degrees(26.0));
        let i1 = 2.0 * l * l + l.powi(-4);
        let q = 31.1439 * (i1 - 3.0).powi(2) + 2.0 * 1523.0 * 0.05f64.powi(4);
        let expected = 0.1148 * (q.exp() - 1.0);
        let (w, _) = ny_model(0.1148, 31.1439, 1523.0, &iv).unwrap();
        assert_relative_eq!(w, expected, max_relative = 1e-10);
        assert_relative_eq!(w, 0.005_036_661, max_relative = 1e-8);
    }

    #[test]
    fn hgo_examples() {
        let (w, d) = hgo_model(1.0, 1.0, 1.0, &inv(3.0, 0.9, 0.9));
        assert_eq!(w, 0.0);
        assert_eq!(d.psi4, 0.0);
        let (_, d) = hgo_model(1.0, 1.0, 1.0, &inv(3.0, 1.1, 1.0));
        assert_relative_eq!(d.psi4, 0.1 * 0.01f64.exp(), max_relative = 1e-14);
        assert_relative_eq!(d.psi4, 0.101_005, max_relative = 1e-6);
        let fd = central(|x| hgo_model(1.0, 1.0, 1.0, &inv(3.0, x, 1.0)).0, 1.1);
        assert_relative_eq!(d.psi4, fd, max_relative = 1e-6);
    }

    #[test]
    fn hsgr_examples() {
        // p = 1 reproduces the HGO family term
        for i4 in [0.9, 1.0, 1.05, 1.1, 1.3] {
            let a = hsgr_model(1.0, 1.0, 1.0, 1.0, &inv(3.2, i4, 1.0));
            let b = hgo_model(1.0, 1.0, 1.0, &inv(3.2, i4, 1.0));
            assert_relative_eq!(a.0, b.0, max_relative = 1e-14);
            assert_relative_eq!(a.1.psi4, b.1.psi4, max_relative = 1e-14);
        }
        let (w, d) = hsgr_model(0.0, 1.0, 1.0, 0.3, &inv(3.5, 0.95, 0.99));
        assert_eq!(w, 0.0);
        assert_eq!(d.psi1, 0.0);

        let s = DeformationState::new(LoadingMode::Et, 1.1).unwrap();
        let iv = invariants(&s, &FiberGeometry::from_degrees(26.0));
        let m = |iv: &InvariantSet| hsgr_model(0.9347, 0.2704, 47.0232, 0.9126, iv);
        let (_, d) = m(&iv);
        let fd1 = central(|x| m(&InvariantSet { i1: x, ..iv }).0, iv.i1);
        let fd4 = central(|x| m(&InvariantSet { i4: x, ..iv }).0, iv.i4);
        assert_relative_eq!(d.psi1, fd1, max_relative = 1e-6);
        assert_relative_eq!(d.psi4, fd4, max_relative = 1e-6);
    }

    #[test]
    fn os_examples() {
        let mu = 2.5537;
        let (_, d) = os_model(mu, 1e8, 1.0, 1.0, &inv(3.4, 1.0, 1.0)).unwrap();
        assert_relative_eq!(d.psi1, 0.5 * mu, max_relative = 1e-6);
        assert_eq!(d.psi4, 0.0);
        let err = os_model(mu, 0.2369, 3.38107, 0.1149, &inv(3.2369, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
        assert!(os_model(mu, 1.0, 1.0, 0.01, &inv(3.1, 1.2, 1.0)).is_err());
    }

    #[test]
    fn gst_examples() {
        let t = goh_model(1.0, 2.0, 3.0, 0.2, 3.0, [0.0, 0.0], [true, true]).unwrap();
        assert_eq!(t.psi_f, [0.0, 0.0]);
        assert!(goh_model(1.0, 2.0, 3.0, 0.5, 3.0, [0.0; 2], [true; 2]).is_err());
        assert!(hnors_model(1.0, 2.0, 3.0, 0.5, 0.6, 3.0, [0.0; 2], [true; 2]).is_err());
        // κ = 0: E = I4 − 1 and the family term equals the HGO term
        let t = goh_model(1.0, 1.3, 2.1, 0.0, 3.1, [0.07, -0.02], [true, false]).unwrap();
        let (w, d) = hgo_model(1.0, 1.3, 2.1, &inv(3.1, 1.07, 0.98));
        assert_relative_eq!(t.energy, w, max_relative = 1e-14);
        assert_relative_eq!(t.psi_f[0], d.psi4, max_relative = 1e-14);
    }

    #[test]
    fn fiber_laws() {
        assert_eq!(amdm_fiber(0.9118, 46.8474, 0.95), (0.0, 0.0));
        assert_eq!(amdm_fiber(0.9118, 46.8474, 1.0).1, 0.0);
        let (_, g) = amdm_fiber(0.9118, 46.8474, 1.05);
        let fd = central(|l| amdm_fiber(0.9118, 46.8474, l).0, 1.05);
        assert_relative_eq!(g, fd, max_relative = 1e-6);

        assert_eq!(dbb_fiber(3.0, 1.0, 1.0), 0.0);
        assert_relative_eq!(dbb_fiber(56.0009, 0.7921, 1.0), 56.0009 * (0.7921 - 1.0), max_relative = 1e-14);
        let l: f64 = 1.1;
        assert_relative_eq!(
            dbb_fiber(56.0009, 0.7921, l),
            56.0009 * l * l * (0.7921 * (l * l - 1.0).exp() - 1.0),
            max_relative = 1e-14
        );
        assert_eq!(dbb_fiber_sq(1.0, 2.0, 0.9, true), 0.0);
        // 2 dw/dx = τ_f / x
        let x = 1.21;
        let fd = central(|x| dbb_fiber_energy_sq(3.1, 46.9, x, false), x);
        assert_relative_eq!(2.0 * fd, dbb_fiber_sq(3.1, 46.9, x, false) / x, max_relative = 1e-7);
    }

    #[test]
    fn undeformed_state_is_stress_free() {
        let iv = InvariantSet::from_stretches(
            &PrincipalStretches::incompressible(1.0, 1.0),
            &FiberGeometry::from_degrees(30.0),
        );
        for kind in ModelKind::ALL.into_iter().filter(|k| k.class() == ModelClass::Invariant) {
            let mid: Vec<f64> = kind
                .parameters()
                .iter()
                .map(|p| 0.5 * (p.lower + p.upper.min(10.0)))
                .collect();
            let model = Model::new(kind, &mid, FiberGeometry::from_degrees(30.0), ModelOptions::default())
                .unwrap();
            let (w, d) = model.psi(&iv).unwrap();
            assert_eq!(w, 0.0, "{kind}");
            assert_eq!((d.psi4, d.psi6), (0.0, 0.0), "{kind}");
        }
    }

    #[test]
    fn parameter_tables() {
        let nop: Vec<usize> = ModelKind::REVIEWED.iter().map(|k| k.nop()).collect();
        assert_eq!(nop, vec![4, 4, 5, 5, 5, 6, 5, 6, 6]);
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
            for p in k.parameters() {
                assert!(p.lower < p.upper);
                assert!(!p.log_scale || p.lower > 0.0);
            }
        }
        assert!("XYZ".parse::<ModelKind>().is_err());
    }

    #[test]
    fn spec_round_trip() {
        let spec = ModelSpec::new(ModelKind::Goh, &[1.7416, 4.446, 161.392, 0.2256], 26.0).unwrap();
        let model = spec.build().unwrap();
        assert_eq!(model.spec(), spec);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ModelSpec>(&json).unwrap(), spec);
        let mut bad = spec.clone();
        bad.params.insert("zeta".into(), 1.0);
        assert!(bad.build().is_err());
        assert!(ModelSpec::new(ModelKind::Goh, &[1.0, 1.0, 1.0, 0.5], 0.0).unwrap().build().is_err());
    }

    fn check_invariant_derivatives(kind: ModelKind, params: &[f64], l1: f64, l2: f64, phi: f64) {
        let model = Model::new(kind, params, FiberGeometry::new(phi), ModelOptions::default());
        let Ok(model) = model else { return };
        let iv = InvariantSet::from_stretches(&PrincipalStretches::incompressible(l1, l2), model.fibers());
        if (iv.i4 - 1.0).abs() < 1e-3 || (iv.i6 - 1.0).abs() < 1e-3 {
            return;
        }
        let Ok((w0, d)) = model.psi(&iv) else { return };
        let slots: [(fn(&mut InvariantSet) -> &mut f64, f64); 3] = [
            (|s| &mut s.i1, d.psi1),
            (|s| &mut s.i4, d.psi4),
            (|s| &mut s.i6, d.psi6),
        ];
        for (slot, analytic) in slots {
            let x0 = *slot(&mut iv.clone());
            let h = 1e-6 * x0.abs().max(1.0);
            let eval = |x: f64| {
                let mut s = iv;
                *slot(&mut s) = x;
                model.psi(&s).map(|r| r.0)
            };
            let (Ok(wp), Ok(wm)) = (eval(x0 + h), eval(x0 - h)) else { return };
            let fd = (wp - wm) / (2.0 * h);
            // central differences lose about eps·|Ψ|/h to cancellation
            let tol = 1e-5 * analytic.abs().max(fd.abs()) + 1e-9 * w0.abs() + 1e-14;
            assert!(
                (analytic - fd).abs() <= tol,
                "{kind}: analytic {analytic} vs fd {fd}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn invariant_model_derivatives(
            kind in prop::sample::select(vec![ModelKind::NeoHooke, ModelKind::Ny, ModelKind::Hgo, ModelKind::Hsgr, ModelKind::Os]),
            seed in any::<u64>(),
            l1 in 0.9f64..1.25,
            l2 in 0.9f64..1.25,
            phi in 0.0f64..1.5,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let params: Vec<f64> = kind.parameters().iter().map(|p| {
                if p.log_scale {
                    let (lo, hi) = (p.lower.max(1e-2).ln(), p.upper.min(50.0).ln());
                    rng.random_range(lo..hi).exp()
                } else {
                    rng.random_range(p.lower..p.upper)
                }
            }).collect();
            check_invariant_derivatives(kind, &params, l1, l2, phi);
        }

        #[test]
        fn gst_fiber_derivative(k1 in 0.01f64..10.0, k2 in 0.01f64..50.0, e in -0.2f64..0.2) {
            let f = |e: f64| goh_model(0.0, k1, k2, 0.1, 3.0, [e, 0.0], [true, false]).unwrap().energy;
            let t = goh_model(0.0, k1, k2, 0.1, 3.0, [e, 0.0], [true, false]).unwrap();
            let fd = central(f, e);
            prop_assert!((t.psi_f[0] - fd).abs() <= 1e-5 * t.psi_f[0].abs().max(1e-8));
        }
    }
}
