//! Real-coded genetic algorithm on the unit cube.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Genetic algorithm settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    /// Probability that a child is produced by blend crossover rather than
    /// copied from its first parent.
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Standard deviation of a mutation step, in unit-cube coordinates.
    pub mutation_scale: f64,
    /// Individuals copied unchanged into the next generation.
    pub elite: usize,
    pub tournament: usize,
    /// Blend crossover extension factor.
    pub blend_alpha: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 60,
            generations: 60,
            crossover_rate: 0.9,
            mutation_rate: 0.15,
            mutation_scale: 0.1,
            elite: 2,
            tournament: 2,
            blend_alpha: 0.5,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(format!("GA config: {m}")));
        if self.population < 2 * dim.max(1) {
            return bad(format!("population {} is below twice the dimension {dim}", self.population));
        }
        for (name, r) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} = {r} is outside [0, 1]"));
            }
        }
        if !(self.mutation_scale >= 0.0) || !(self.blend_alpha >= 0.0) {
            return bad("mutation_scale and blend_alpha must be nonnegative".into());
        }
        if self.elite >= self.population {
            return bad(format!("elite count {} must be below the population", self.elite));
        }
        if self.tournament == 0 {
            return bad("tournament size must be positive".into());
        }
        Ok(())
    }
}

/// A point of the unit cube with its cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub u: Vec<f64>,
    pub cost: f64,
}

/// Final population ranked by cost and the best cost of every generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub candidates: Vec<Candidate>,
    pub trace: Vec<f64>,
}

fn sanitize(c: f64) -> f64 {
    if c.is_nan() {
        f64::INFINITY
    } else {
        c
    }
}

/// Indices ordered by cost, ties broken by index.
fn ranking(costs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..costs.len()).collect();
    idx.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    idx
}

/// Minimizes `cost` over `[0, 1]^dim`.
///
/// Fitness evaluations run in parallel; all random draws happen on the
/// calling thread, so the outcome depends only on the seed.
pub fn ga_minimize<F>(dim: usize, cost: F, config: &GaConfig) -> Result<GaOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let step = Normal::new(0.0, config.mutation_scale).map_err(|e| Error::Validation(e.to_string()))?;
    let evaluate = |pop: &[Vec<f64>]| -> Vec<f64> { pop.par_iter().map(|u| sanitize(cost(u))).collect() };

    let mut pop: Vec<Vec<f64>> = (0..config.population)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut costs = evaluate(&pop);
    let mut trace = Vec::with_capacity(config.generations + 1);

    for _ in 0..config.generations {
        let order = ranking(&costs);
        trace.push(costs[order[0]]);
        let mut next: Vec<Vec<f64>> = order[..config.elite].iter().map(|&i| pop[i].clone()).collect();
        let mut next_costs: Vec<f64> = order[..config.elite].iter().map(|&i| costs[i]).collect();
        let tournament = |rng: &mut ChaCha8Rng| -> usize {
            let mut best = rng.random_range(0..pop.len());
            for _ in 1..config.tournament {
                let c = rng.random_range(0..pop.len());
                if costs[c] < costs[best] || (costs[c] == costs[best] && c < best) {
                    best = c;
                }
            }
            best
        };
        let mut children = Vec::with_capacity(config.population - config.elite);
        while next.len() + children.len() < config.population {
            let a = tournament(&mut rng);
            let b = tournament(&mut rng);
            let mut child = if rng.random::<f64>() < config.crossover_rate {
                pop[a]
                    .iter()
                    .zip(&pop[b])
                    .map(|(&x, &y)| {
                        let (lo, hi) = (x.min(y), x.max(y));
                        let ext = config.blend_alpha * (hi - lo);
                        lo - ext + rng.random::<f64>() * (hi - lo + 2.0 * ext)
                    })
                    .collect()
            } else {
                pop[a].clone()
            };
            for g in child.iter_mut() {
                if rng.random::<f64>() < config.mutation_rate {
                    *g += step.sample(&mut rng);
                }
                *g = g.clamp(0.0, 1.0);
            }
            children.push(child);
        }
        next_costs.extend(evaluate(&children));
        next.extend(children);
        pop = next;
        costs = next_costs;
    }

    let order = ranking(&costs);
    trace.push(costs[order[0]]);
    let candidates = order
        .into_iter()
        .map(|i| Candidate {
            u: pop[i].clone(),
            cost: costs[i],
        })
        .collect();
    Ok(GaOutcome { candidates, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum() {
        let cfg = GaConfig { generations: 50, ..GaConfig::default() };
        let out = ga_minimize(1, |u| (u[0] - 0.37).powi(2), &cfg).unwrap();
        assert!((out.candidates[0].u[0] - 0.37).abs() < 1e-2);
        for w in out.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for w in out.candidates.windows(2) {
            assert!(w[0].cost <= w[1].cost);
        }
    }

    #[test]
    fn exterior_optimum_lands_on_bound() {
        let out = ga_minimize(2, |u| (u[0] + 1.0).powi(2) + (u[1] - 2.0).powi(2), &GaConfig::default()).unwrap();
        let best = &out.candidates[0].u;
        assert!(best[0] < 1e-3 && best[1] > 1.0 - 1e-3, "{best:?}");
        assert!(out.candidates.iter().all(|c| c.u.iter().all(|x| (0.0..=1.0).contains(x))));
    }

    #[test]
    fn seeded_runs_repeat() {
        let f = |u: &[f64]| (u[0] - 0.2).powi(2) + (u[1] - 0.7).abs();
        let a = ga_minimize(2, f, &GaConfig { seed: 3, ..GaConfig::default() }).unwrap();
        let b = ga_minimize(2, f, &GaConfig { seed: 3, ..GaConfig::default() }).unwrap();
        let c = ga_minimize(2, f, &GaConfig { seed: 4, ..GaConfig::default() }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn infeasible_points_do_not_win() {
        let out = ga_minimize(1, |u| if u[0] > 0.5 { f64::NAN } else { 1.0 - u[0] }, &GaConfig::default()).unwrap();
        assert!(out.candidates[0].cost.is_finite());
        assert!(out.candidates[0].u[0] <= 0.5);
    }

    #[test]
    fn rejects_small_population() {
        let cfg = GaConfig { population: 5, ..GaConfig::default() };
        assert!(ga_minimize(3, |_| 0.0, &cfg).is_err());
    }
}
