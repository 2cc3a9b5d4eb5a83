//! Normalized χ² quality of fit, its three nested stretch regions, and model
//! ranking.
//!
//! For each curve `χ² = Σ (P − P_exp)² / P_exp` over the loaded nominal
//! stress component. Points whose experimental stress is not above `ε` are
//! left out and counted.

use serde::{Deserialize, Deserializer, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kinematics::DeformationState;
use crate::models::{Model, ModelKind};
use crate::stress::{nominal_stress, QuadratureConfig};

/// Default denominator guard in MPa.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// The nested stretch ranges `[1, 1 + k/3 (λ_max − 1)]`, `k = 1, 2, 3`.
pub fn regional_ranges(lambda_max: f64) -> Result<[(f64, f64); 3]> {
    if !(lambda_max > 1.0) || !lambda_max.is_finite() {
        return Err(Error::domain(format!("λ_max must exceed 1, got {lambda_max}")));
    }
    let d = lambda_max - 1.0;
    Ok([
        (1.0, 1.0 + d / 3.0),
        (1.0, 1.0 + 2.0 * d / 3.0),
        (1.0, lambda_max),
    ])
}

// JSON has no infinity; an infeasible model's χ² is written as null.
fn inf_if_null<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

fn inf_if_null3<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<[f64; 3], D::Error> {
    Ok(<[Option<f64>; 3]>::deserialize(d)?.map(|x| x.unwrap_or(f64::INFINITY)))
}

/// χ² of one curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveQuality {
    pub label: String,
    pub lambda_max: f64,
    /// Regional values; the last one covers the whole curve.
    #[serde(deserialize_with = "inf_if_null3")]
    pub regions: [f64; 3],
    /// Points left out because `P_exp ≤ ε`.
    pub excluded: usize,
    pub points: usize,
}

impl CurveQuality {
    pub fn chi2(&self) -> f64 {
        self.regions[2]
    }
}

/// χ² of one curve from `(λ, P_exp, P_model)` triples, `λ` increasing.
pub fn curve_chi_squared(label: &str, points: &[(f64, f64, f64)], epsilon: f64) -> Result<CurveQuality> {
    let Some(&(lambda_max, _, _)) = points.last() else {
        return Err(Error::domain(format!("curve {label} has no points")));
    };
    // A curve holding only λ = 1 has degenerate regions that all contain it.
    let ranges = if lambda_max > 1.0 {
        regional_ranges(lambda_max)?
    } else {
        [(1.0, 1.0); 3]
    };
    let mut regions = [0.0; 3];
    let mut excluded = 0;
    for &(l, exp, model) in points {
        if !(exp > epsilon) {
            excluded += 1;
            continue;
        }
        let term = (model - exp).powi(2) / exp;
        for (acc, (_, hi)) in regions.iter_mut().zip(ranges) {
            if l <= hi * (1.0 + 1e-12) {
                *acc += term;
            }
        }
    }
    Ok(CurveQuality {
        label: label.to_string(),
        lambda_max,
        regions,
        excluded,
        points: points.len(),
    })
}

/// Quality of one model against a set of curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub model: ModelKind,
    pub type_tag: String,
    pub nop: usize,
    pub curves: Vec<CurveQuality>,
    #[serde(deserialize_with = "inf_if_null")]
    pub chi2_total: f64,
    #[serde(deserialize_with = "inf_if_null")]
    pub chi2_region1: f64,
    #[serde(deserialize_with = "inf_if_null")]
    pub chi2_region2: f64,
    #[serde(deserialize_with = "inf_if_null")]
    pub chi2_region3: f64,
    pub epsilon: f64,
    /// Content hash of the curves, so reports on different data are not
    /// ranked together.
    pub data_fingerprint: String,
}

impl QualityReport {
    /// Assembles a report from per-curve values.
    pub fn from_curves(model: ModelKind, curves: Vec<CurveQuality>, epsilon: f64, data_fingerprint: String) -> Self {
        let region = |k: usize| curves.iter().map(|c| c.regions[k]).sum::<f64>();
        let (r1, r2, r3) = (region(0), region(1), region(2));
        Self {
            model,
            type_tag: model.type_tag().to_string(),
            nop: model.nop(),
            curves,
            chi2_total: r3,
            chi2_region1: r1,
            chi2_region2: r2,
            chi2_region3: r3,
            epsilon,
            data_fingerprint,
        }
    }

    pub fn chi2_per_curve(&self) -> Vec<f64> {
        self.curves.iter().map(CurveQuality::chi2).collect()
    }

    pub fn excluded(&self) -> usize {
        self.curves.iter().map(|c| c.excluded).sum()
    }
}

/// Combined fingerprint of curves, in order.
pub fn data_fingerprint(datasets: &[Dataset]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for d in datasets {
        h.update(d.fingerprint().as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Model predictions of the loaded nominal stress at each stretch of a
/// curve; `+∞` where the model is infeasible.
pub fn predictions(model: &Model, data: &Dataset, quad: &QuadratureConfig) -> Result<Vec<f64>> {
    let k = data.component()?;
    data.points
        .iter()
        .map(|&(l, _)| {
            let state = DeformationState::new(data.mode, l)?;
            match nominal_stress(model, &state, quad) {
                Ok(s) => Ok(s.nominal(k)),
                Err(Error::Infeasible { .. }) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// χ² of a model against its curves, whole and by region.
pub fn chi_squared(model: &Model, datasets: &[Dataset], quad: &QuadratureConfig, epsilon: f64) -> Result<QualityReport> {
    if datasets.is_empty() {
        return Err(Error::domain("no curves to evaluate"));
    }
    let curves = datasets
        .iter()
        .map(|d| {
            if d.is_empty() {
                return Err(Error::domain(format!("curve {} has no points", d.label())));
            }
            let pred = predictions(model, d, quad)?;
            let triples: Vec<(f64, f64, f64)> = d
                .nominal_points()
                .into_iter()
                .zip(pred)
                .map(|((l, e), p)| (l, e, p))
                .collect();
            curve_chi_squared(&d.label(), &triples, epsilon)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QualityReport::from_curves(model.kind(), curves, epsilon, data_fingerprint(datasets)))
}

/// One row of a ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    pub model: String,
    pub type_tag: String,
    pub chi2: f64,
    pub nop: usize,
}

/// Models ordered by ascending χ².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub rows: Vec<RankRow>,
}

/// χ² as fixed-point text, switching to scientific notation for values
/// that would print as zero.
pub fn format_chi2(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:.4e}")
    } else {
        format!("{x:.6}")
    }
}

impl RankTable {
    /// Aligned text table.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:>4}  {:<8} {:<6} {:>14} {:>4}\n", "rank", "model", "type", "chi2", "nop");
        for r in &self.rows {
            out.push_str(&format!(
                "{:>4}  {:<8} {:<6} {:>14} {:>4}\n",
                r.rank,
                r.model,
                r.type_tag,
                format_chi2(r.chi2),
                r.nop
            ));
        }
        out
    }
}

/// Ranks reports computed on the same curves by total χ², breaking ties by
/// parameter count and then by name.
pub fn rank_models(reports: &[QualityReport]) -> Result<RankTable> {
    if let Some(first) = reports.first() {
        if let Some(other) = reports.iter().find(|r| r.data_fingerprint != first.data_fingerprint) {
            return Err(Error::domain(format!(
                "reports for {} and {} were computed on different curves",
                first.model, other.model
            )));
        }
    }
    let mut order: Vec<&QualityReport> = reports.iter().collect();
    order.sort_by(|a, b| {
        a.chi2_total
            .total_cmp(&b.chi2_total)
            .then(a.nop.cmp(&b.nop))
            .then(a.model.as_str().cmp(b.model.as_str()))
    });
    Ok(RankTable {
        rows: order
            .into_iter()
            .enumerate()
            .map(|(i, r)| RankRow {
                rank: i + 1,
                model: r.model.to_string(),
                type_tag: r.type_tag.clone(),
                chi2: r.chi2_total,
                nop: r.nop,
            })
            .collect(),
    })
}
