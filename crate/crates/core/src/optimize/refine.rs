//! Projected Levenberg-Marquardt on the unit cube with finite-difference
//! Jacobians.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Stopping rules of the gradient refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub max_iterations: usize,
    /// Stop when the projected gradient's largest entry falls below this.
    pub gradient_tol: f64,
    /// Stop when an accepted step lowers the cost by less than this.
    pub decrease_tol: f64,
    /// Central-difference step in unit-cube coordinates.
    pub fd_step: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            gradient_tol: 1e-8,
            decrease_tol: 1e-12,
            fd_step: 1e-6,
        }
    }
}

/// Result of one refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub u: Vec<f64>,
    pub cost: f64,
    /// Cost gradient at `u`.
    pub gradient: Vec<f64>,
    /// Projected gradient `P(u − g) − u`.
    pub projected_gradient: Vec<f64>,
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub converged: bool,
    pub message: String,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Cost `Σ r²` or `+∞` for infeasible points.
pub fn cost_of<R>(residuals: &R, u: &[f64]) -> f64
where
    R: Fn(&[f64]) -> Option<Vec<f64>>,
{
    match residuals(u) {
        Some(r) if r.iter().all(|x| x.is_finite()) => sum_sq(&r),
        _ => f64::INFINITY,
    }
}

/// Finite-difference Jacobian; central where both neighbors are inside the
/// cube and feasible, one-sided otherwise, zero if neither side evaluates.
pub fn jacobian<R>(residuals: &R, u: &[f64], r0: &[f64], h: f64) -> DMatrix<f64>
where
    R: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let m = r0.len();
    let mut jac = DMatrix::zeros(m, u.len());
    let eval = |i: usize, x: f64| -> Option<Vec<f64>> {
        if !(0.0..=1.0).contains(&x) {
            return None;
        }
        let mut v = u.to_vec();
        v[i] = x;
        residuals(&v).filter(|r| r.len() == m && r.iter().all(|x| x.is_finite()))
    };
    for i in 0..u.len() {
        let col: Option<Vec<f64>> = match (eval(i, u[i] + h), eval(i, u[i] - h)) {
            (Some(p), Some(q)) => Some(p.iter().zip(&q).map(|(a, b)| (a - b) / (2.0 * h)).collect()),
            (Some(p), None) => Some(p.iter().zip(r0).map(|(a, b)| (a - b) / h).collect()),
            (None, Some(q)) => Some(r0.iter().zip(&q).map(|(a, b)| (a - b) / h).collect()),
            (None, None) => None,
        };
        if let Some(col) = col {
            for (k, v) in col.into_iter().enumerate() {
                jac[(k, i)] = v;
            }
        }
    }
    jac
}

fn projected(u: &[f64], g: &[f64]) -> Vec<f64> {
    u.iter().zip(g).map(|(&x, &gi)| (x - gi).clamp(0.0, 1.0) - x).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Minimizes `Σ r(u)²` over `[0, 1]^n` from `u0`.
///
/// Variables sitting on a bound with the gradient pushing outward are held
/// fixed for the step; the damped Gauss-Newton step of the rest is clipped
/// to the cube. A step that fails to lower the cost raises the damping;
/// repeated failure ends the run as not converged with the best point so far.
pub fn refine<R>(residuals: R, u0: &[f64], config: &RefineConfig) -> RefineOutcome
where
    R: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = u0.len();
    let mut u: Vec<f64> = u0.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    let Some(mut r) = residuals(&u).filter(|r| r.iter().all(|x| x.is_finite())) else {
        return RefineOutcome {
            u,
            cost: f64::INFINITY,
            gradient: vec![0.0; n],
            projected_gradient: vec![0.0; n],
            iterations: 0,
            trace: vec![f64::INFINITY],
            converged: false,
            message: "start point is infeasible".into(),
        };
    };
    let mut cost = sum_sq(&r);
    let mut trace = vec![cost];
    let mut damping = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let mut message = String::from("iteration limit reached");
    let (mut g, mut pg);
    loop {
        let jac = jacobian(&residuals, &u, &r, config.fd_step);
        let rv = DVector::from_column_slice(&r);
        let jtr = jac.transpose() * &rv;
        g = (&jtr * 2.0).iter().copied().collect::<Vec<f64>>();
        pg = projected(&u, &g);
        if inf_norm(&pg) < config.gradient_tol {
            converged = true;
            message = "projected gradient below tolerance".into();
            break;
        }
        if iterations >= config.max_iterations {
            break;
        }
        iterations += 1;
        let free: Vec<usize> = (0..n)
            .filter(|&i| !((u[i] <= 0.0 && g[i] > 0.0) || (u[i] >= 1.0 && g[i] < 0.0)))
            .collect();
        let jf = jac.select_columns(&free);
        let a = jf.transpose() * &jf;
        let b = -(jf.transpose() * &rv);
        let mut accepted = false;
        while damping < 1e16 {
            let mut m = a.clone();
            for k in 0..free.len() {
                m[(k, k)] += damping * a[(k, k)].max(1e-12);
            }
            let step = m
                .clone()
                .cholesky()
                .map(|c| c.solve(&b))
                .or_else(|| m.lu().solve(&b));
            let Some(step) = step else {
                damping *= 10.0;
                continue;
            };
            let mut trial = u.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] = (u[i] + step[k]).clamp(0.0, 1.0);
            }
            let trial_r = residuals(&trial).filter(|r| r.iter().all(|x| x.is_finite()));
            match trial_r {
                Some(tr) if sum_sq(&tr) < cost => {
                    let new_cost = sum_sq(&tr);
                    let decrease = cost - new_cost;
                    u = trial;
                    r = tr;
                    cost = new_cost;
                    trace.push(cost);
                    damping = (damping * 0.3).max(1e-12);
                    accepted = true;
                    if decrease < config.decrease_tol {
                        converged = true;
                        message = "cost decrease below tolerance".into();
                    }
                    break;
                }
                _ => damping *= 10.0,
            }
        }
        if !accepted {
            message = "line search failed; returning best point found".into();
            break;
        }
        if converged {
            let jac = jacobian(&residuals, &u, &r, config.fd_step);
            g = (jac.transpose() * DVector::from_column_slice(&r) * 2.0).iter().copied().collect();
            pg = projected(&u, &g);
            break;
        }
    }
    RefineOutcome {
        u,
        cost,
        gradient: g,
        projected_gradient: pg,
        iterations,
        trace,
        converged,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converges_immediately_at_optimum() {
        let res = |u: &[f64]| Some(vec![u[0] - 0.3, 2.0 * (u[1] - 0.6)]);
        let out = refine(res, &[0.3, 0.6], &RefineConfig::default());
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
        assert!(inf_norm(&out.projected_gradient) < 1e-8);
    }

    #[test]
    fn solves_convex_problem() {
        let res = |u: &[f64]| Some(vec![u[0] - 0.3, 2.0 * (u[1] - 0.6), u[0] + u[1] - 0.9]);
        let out = refine(res, &[0.9, 0.05], &RefineConfig::default());
        assert!(out.converged, "{}", out.message);
        assert!((out.u[0] - 0.3).abs() < 1e-6 && (out.u[1] - 0.6).abs() < 1e-6, "{:?}", out.u);
        for w in out.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn active_bound_has_outward_gradient() {
        // Unconstrained minimum at u0 = -0.5 lies outside the cube.
        let res = |u: &[f64]| Some(vec![u[0] + 0.5, u[1] - 0.4]);
        let out = refine(res, &[0.7, 0.7], &RefineConfig::default());
        assert!(out.converged);
        assert_eq!(out.u[0], 0.0);
        assert!(out.gradient[0] > 0.0);
        assert!((out.u[1] - 0.4).abs() < 1e-7);
    }

    #[test]
    fn nonlinear_residuals() {
        // Rosenbrock as least squares.
        let res = |u: &[f64]| {
            let (x, y) = (2.0 * u[0] - 0.5, 2.0 * u[1] - 0.5);
            Some(vec![10.0 * (y - x * x), 1.0 - x])
        };
        let out = refine(res, &[0.1, 0.9], &RefineConfig::default());
        assert!(out.cost < 1e-12, "{out:?}");
        assert!((out.u[0] - 0.75).abs() < 1e-5);
    }

    #[test]
    fn infeasible_start_is_flagged() {
        let out = refine(|_: &[f64]| None, &[0.5], &RefineConfig::default());
        assert!(!out.converged);
        assert!(out.cost.is_infinite());
    }
}
