//! Parameter identification: weighted least squares over one or two test
//! curves, searched by a genetic algorithm and refined by projected
//! Levenberg-Marquardt inside box bounds.
//!
//! The search variables are the free model parameters, optionally the mean
//! fiber angle, and the curve weight `w1` (`w2 = 1 − w1`). Every variable is
//! mapped to `[0, 1]`, logarithmically for parameters spanning decades.

pub mod ga;
pub mod refine;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ga::{ga_minimize, Candidate, GaConfig, GaOutcome};
pub use refine::{refine, RefineConfig, RefineOutcome};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kinematics::{DeformationState, FiberGeometry};
use crate::models::{Model, ModelKind, ModelOptions, ModelSpec};
use crate::stress::{nominal_stress, QuadratureConfig};

/// Tolerance on `w1 + w2 = 1`.
pub const WEIGHT_TOL: f64 = 1e-12;

/// What a search variable sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Model parameter by index.
    Param(usize),
    /// Mean fiber angle in degrees.
    FiberAngle,
    /// Weight `w1` of the first curve.
    Weight,
}

/// A bounded search variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub target: Target,
    pub lower: f64,
    pub upper: f64,
    pub log_scale: bool,
}

impl Variable {
    fn logarithmic(&self) -> bool {
        self.log_scale && self.lower > 0.0
    }

    /// Value at unit-cube coordinate `u`.
    pub fn decode(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u == 0.0 {
            return self.lower;
        }
        if u == 1.0 {
            return self.upper;
        }
        if self.logarithmic() {
            (self.lower.ln() + u * (self.upper.ln() - self.lower.ln())).exp()
        } else {
            self.lower + u * (self.upper - self.lower)
        }
    }

    /// Unit-cube coordinate of `x` (clamped to the bounds).
    pub fn encode(&self, x: f64) -> f64 {
        if self.upper == self.lower {
            return 0.0;
        }
        let u = if self.logarithmic() {
            (x.max(self.lower).ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln())
        } else {
            (x - self.lower) / (self.upper - self.lower)
        };
        u.clamp(0.0, 1.0)
    }
}

/// Weight handling for two-curve problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `w1` is searched within the bounds.
    Free { lower: f64, upper: f64 },
    /// `w1` is held at the given value.
    Fixed(f64),
}

impl Default for WeightMode {
    fn default() -> Self {
        WeightMode::Free { lower: 0.1, upper: 0.9 }
    }
}

/// Fully specified identification problem.
#[derive(Debug, Clone)]
pub struct FitProblem {
    pub kind: ModelKind,
    pub fiber_angle_deg: f64,
    pub options: ModelOptions,
    pub datasets: Vec<Dataset>,
    /// Parameter values; entries targeted by a free variable are overwritten.
    pub base: Vec<f64>,
    pub vars: Vec<Variable>,
    pub weights: WeightMode,
    pub quad: QuadratureConfig,
}

/// Value of `x` in a box `[lo, hi]` check.
fn check_bounds(name: &str, lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::Validation(format!("bounds of {name} must be finite and ordered, got [{lo}, {hi}]")));
    }
    Ok(())
}

impl FitProblem {
    /// All parameters free with their default bounds, fiber angle fixed,
    /// weights free on `[0.1, 0.9]`.
    pub fn new(kind: ModelKind, fiber_angle_deg: f64, datasets: Vec<Dataset>) -> Result<Self> {
        if datasets.is_empty() || datasets.len() > 2 {
            return Err(Error::Validation(format!("a fit takes one or two curves, got {}", datasets.len())));
        }
        for d in &datasets {
            d.validate()?;
        }
        let params = kind.parameters();
        let vars = params
            .iter()
            .enumerate()
            .map(|(i, p)| Variable {
                name: p.name.to_string(),
                target: Target::Param(i),
                lower: p.lower,
                upper: p.upper,
                log_scale: p.log_scale,
            })
            .collect();
        let base = params
            .iter()
            .map(|p| if p.log_scale && p.lower > 0.0 { (p.lower * p.upper).sqrt() } else { 0.5 * (p.lower + p.upper) })
            .collect();
        let mut problem = Self {
            kind,
            fiber_angle_deg,
            options: ModelOptions::default(),
            datasets,
            base,
            vars,
            weights: WeightMode::default(),
            quad: QuadratureConfig::default(),
        };
        problem.sync_weight_var();
        Ok(problem)
    }

    fn param_index(&self, name: &str) -> Result<usize> {
        self.kind
            .param_names()
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::Validation(format!("{} has no parameter '{name}'", self.kind)))
    }

    /// Holds a parameter at `value`.
    pub fn fix(&mut self, name: &str, value: f64) -> Result<&mut Self> {
        let i = self.param_index(name)?;
        self.base[i] = value;
        self.vars.retain(|v| v.target != Target::Param(i));
        Ok(self)
    }

    /// Sets the search interval of a free parameter (or the fiber angle,
    /// by the name `phi`).
    pub fn bound(&mut self, name: &str, lower: f64, upper: f64) -> Result<&mut Self> {
        check_bounds(name, lower, upper)?;
        let var = self
            .vars
            .iter_mut()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::Validation(format!("'{name}' is not a free variable of {}", self.kind)))?;
        var.lower = lower;
        var.upper = upper;
        Ok(self)
    }

    /// Searches the mean fiber angle within `[lower, upper]` degrees.
    pub fn free_fiber_angle(&mut self, lower: f64, upper: f64) -> Result<&mut Self> {
        check_bounds("phi", lower, upper)?;
        self.vars.retain(|v| v.target != Target::FiberAngle);
        let at = self.vars.iter().position(|v| v.target == Target::Weight).unwrap_or(self.vars.len());
        self.vars.insert(
            at,
            Variable {
                name: "phi".into(),
                target: Target::FiberAngle,
                lower,
                upper,
                log_scale: false,
            },
        );
        Ok(self)
    }

    pub fn set_weights(&mut self, mode: WeightMode) -> Result<&mut Self> {
        match mode {
            WeightMode::Free { lower, upper } => {
                check_bounds("w1", lower, upper)?;
                if lower < 0.0 || upper > 1.0 {
                    return Err(Error::Validation(format!("w1 bounds [{lower}, {upper}] leave [0, 1]")));
                }
            }
            WeightMode::Fixed(w) => {
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::Validation(format!("fixed w1 = {w} is outside [0, 1]")));
                }
            }
        }
        self.weights = mode;
        self.sync_weight_var();
        Ok(self)
    }

    fn sync_weight_var(&mut self) {
        self.vars.retain(|v| v.target != Target::Weight);
        if let (WeightMode::Free { lower, upper }, 2) = (self.weights, self.datasets.len()) {
            self.vars.push(Variable {
                name: "w1".into(),
                target: Target::Weight,
                lower,
                upper,
                log_scale: false,
            });
        }
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    /// Model parameters, fiber angle and weights at unit-cube point `u`.
    pub fn decode(&self, u: &[f64]) -> (Vec<f64>, f64, [f64; 2]) {
        let mut params = self.base.clone();
        let mut phi = self.fiber_angle_deg;
        let mut w1 = match (self.weights, self.datasets.len()) {
            (_, 1) => 1.0,
            (WeightMode::Fixed(w), _) => w,
            (WeightMode::Free { lower, upper }, _) => 0.5 * (lower + upper),
        };
        for (v, &x) in self.vars.iter().zip(u) {
            let val = v.decode(x);
            match v.target {
                Target::Param(i) => params[i] = val,
                Target::FiberAngle => phi = val,
                Target::Weight => w1 = val,
            }
        }
        (params, phi, [w1, 1.0 - w1])
    }

    /// Unit-cube point of the given values (free entries only).
    pub fn encode(&self, params: &[f64], phi: f64, w1: f64) -> Vec<f64> {
        self.vars
            .iter()
            .map(|v| match v.target {
                Target::Param(i) => v.encode(params[i]),
                Target::FiberAngle => v.encode(phi),
                Target::Weight => v.encode(w1),
            })
            .collect()
    }

    pub fn model(&self, params: &[f64], phi: f64) -> Result<Model> {
        Model::new(self.kind, params, FiberGeometry::from_degrees(phi), self.options)
    }

    /// Per-curve residuals `P_model − P_exp`, or `None` if the model is
    /// invalid or infeasible anywhere on the data.
    pub fn curve_residuals(&self, model: &Model) -> Option<Vec<Vec<f64>>> {
        self.datasets.iter().map(|d| dataset_residuals(model, d, &self.quad).ok()).collect()
    }

    /// Weighted residual vector `√wₖ (P_model − P_exp)` at `u`.
    pub fn residuals(&self, u: &[f64]) -> Option<Vec<f64>> {
        let (params, phi, w) = self.decode(u);
        let model = self.model(&params, phi).ok()?;
        let curves = self.curve_residuals(&model)?;
        Some(
            curves
                .iter()
                .zip(w)
                .flat_map(|(r, wk)| r.iter().map(move |x| wk.sqrt() * x))
                .collect(),
        )
    }

    /// Weighted total cost at `u` (`+∞` when infeasible).
    pub fn cost(&self, u: &[f64]) -> f64 {
        refine::cost_of(&|v: &[f64]| self.residuals(v), u)
    }

    /// Cost gradient in unit-cube coordinates, as used by the refinement.
    pub fn cost_gradient(&self, u: &[f64], step: f64) -> Option<Vec<f64>> {
        let r = self.residuals(u)?;
        let jac = refine::jacobian(&|v: &[f64]| self.residuals(v), u, &r, step);
        let rv = nalgebra::DVector::from_column_slice(&r);
        Some((jac.transpose() * rv * 2.0).iter().copied().collect())
    }
}

fn dataset_residuals(model: &Model, data: &Dataset, quad: &QuadratureConfig) -> Result<Vec<f64>> {
    let k = data.component()?;
    data.nominal_points()
        .into_iter()
        .map(|(l, p)| {
            let s = nominal_stress(model, &DeformationState::new(data.mode, l)?, quad)?;
            Ok(s.nominal(k) - p)
        })
        .collect()
}

/// Sum of squared nominal-stress residuals of one curve; `+∞` when the model
/// is infeasible at any stretch of the curve.
pub fn curve_error(model: &Model, data: &Dataset, quad: &QuadratureConfig) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::domain("curve has no points"));
    }
    match dataset_residuals(model, data, quad) {
        Ok(r) => Ok(r.iter().map(|x| x * x).sum()),
        Err(Error::Infeasible { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// `w1·E1 + w2·E2` for weights summing to one.
pub fn weighted_total(errors: &[f64], w: [f64; 2]) -> Result<f64> {
    if w.iter().any(|x| !(0.0..=1.0).contains(x)) || (w[0] + w[1] - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::domain(format!("weights {w:?} must lie in [0, 1] and sum to 1")));
    }
    Ok(errors.iter().zip(w).map(|(e, wk)| if wk == 0.0 { 0.0 } else { wk * e }).sum())
}

/// Weighted total cost of the problem's curves for parameters `zeta`
/// (all model parameters) and weights `w`.
pub fn total_cost(zeta: &[f64], w: [f64; 2], problem: &FitProblem) -> Result<f64> {
    let model = problem.model(zeta, problem.fiber_angle_deg)?;
    let errors = problem
        .datasets
        .iter()
        .map(|d| curve_error(&model, d, &problem.quad))
        .collect::<Result<Vec<f64>>>()?;
    weighted_total(&errors, w)
}

/// Lagrange multiplier of an active bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundMultiplier {
    pub name: String,
    /// `lower` or `upper`.
    pub bound: String,
    /// Nonnegative at a KKT point.
    pub multiplier: f64,
}

/// Identified parameters and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelSpec,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub free: Vec<String>,
    pub weights: [f64; 2],
    /// Per-curve sums of squared residuals, labelled by curve.
    pub curve_labels: Vec<String>,
    pub errors: Vec<f64>,
    /// `w1·E1 + w2·E2`.
    pub total_cost: f64,
    /// `E1 + E2`.
    pub unweighted_total: f64,
    /// Largest entry of the projected cost gradient in unit-cube coordinates.
    pub kkt_residual: f64,
    pub multipliers: Vec<BoundMultiplier>,
    pub converged: bool,
    pub message: String,
    pub ga_best_cost: f64,
    pub ga_trace: Vec<f64>,
    pub refine_trace: Vec<f64>,
    pub iterations: usize,
}

impl FitResult {
    pub fn build_model(&self) -> Result<Model> {
        self.model.build()
    }
}

/// Fit settings beyond the problem definition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub ga: GaConfig,
    pub refine: RefineConfig,
    /// GA candidates used as refinement starts.
    pub starts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            ga: GaConfig::default(),
            refine: RefineConfig::default(),
            starts: 5,
        }
    }
}

/// Ranked GA candidates of a problem.
pub fn ga_search(problem: &FitProblem, config: &GaConfig) -> Result<GaOutcome> {
    ga_minimize(problem.dim(), |u| problem.cost(u), config)
}

fn assemble(problem: &FitProblem, u: &[f64], outcome: &RefineOutcome, ga: &GaOutcome) -> Result<FitResult> {
    let (params, phi, w) = problem.decode(u);
    let model = problem.model(&params, phi)?;
    let errors = problem
        .datasets
        .iter()
        .map(|d| curve_error(&model, d, &problem.quad))
        .collect::<Result<Vec<f64>>>()?;
    let total_cost = weighted_total(&errors, w)?;
    let mut multipliers = Vec::new();
    for (i, v) in problem.vars.iter().enumerate() {
        let g = outcome.gradient.get(i).copied().unwrap_or(0.0);
        if u[i] <= 0.0 {
            multipliers.push(BoundMultiplier { name: v.name.clone(), bound: "lower".into(), multiplier: g });
        } else if u[i] >= 1.0 {
            multipliers.push(BoundMultiplier { name: v.name.clone(), bound: "upper".into(), multiplier: -g });
        }
    }
    Ok(FitResult {
        model: model.spec(),
        param_names: problem.kind.param_names().iter().map(|s| s.to_string()).collect(),
        params,
        free: problem.vars.iter().map(|v| v.name.clone()).collect(),
        weights: w,
        curve_labels: problem.datasets.iter().map(|d| d.label()).collect(),
        unweighted_total: errors.iter().sum(),
        errors,
        total_cost,
        kkt_residual: outcome.projected_gradient.iter().fold(0.0f64, |a, x| a.max(x.abs())),
        multipliers,
        converged: outcome.converged,
        message: outcome.message.clone(),
        ga_best_cost: ga.candidates.first().map_or(f64::INFINITY, |c| c.cost),
        ga_trace: ga.trace.clone(),
        refine_trace: outcome.trace.clone(),
        iterations: outcome.iterations,
    })
}

/// Refines one unit-cube start point.
pub fn gradient_refine(problem: &FitProblem, start: &[f64], config: &RefineConfig) -> RefineOutcome {
    refine(|u: &[f64]| problem.residuals(u), start, config)
}

/// GA search followed by refinement of the best distinct candidates; the
/// lowest refined cost wins (ties go to the better GA rank).
pub fn hybrid_fit(problem: &FitProblem, config: &FitConfig) -> Result<FitResult> {
    let ga = ga_search(problem, &config.ga)?;
    let mut starts: Vec<&Candidate> = Vec::new();
    for c in &ga.candidates {
        if starts.len() >= config.starts.max(1) {
            break;
        }
        if c.cost.is_finite() && !starts.iter().any(|s| s.u == c.u) {
            starts.push(c);
        }
    }
    if starts.is_empty() {
        return Err(Error::Numeric(format!(
            "{}: every GA candidate is infeasible for the data",
            problem.kind
        )));
    }
    let outcomes: Vec<RefineOutcome> = starts
        .par_iter()
        .map(|c| gradient_refine(problem, &c.u, &config.refine))
        .collect();
    let best = (0..outcomes.len())
        .min_by(|&a, &b| outcomes[a].cost.total_cmp(&outcomes[b].cost).then(a.cmp(&b)))
        .expect("at least one start");
    let outcome = &outcomes[best];
    let mut result = assemble(problem, &outcome.u, outcome, &ga)?;
    if !outcome.converged {
        let notes: Vec<String> = outcomes
            .iter()
            .enumerate()
            .map(|(i, o)| format!("start {i}: cost {:e}, {}", o.cost, o.message))
            .collect();
        result.message = format!("{}; {}", outcome.message, notes.join("; "));
    }
    Ok(result)
}
