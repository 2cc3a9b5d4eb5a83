//! Batch commands: fit, evaluate, polar sweeps, synthetic data and ranking,
//! with their JSON, text and CSV outputs.
//!
//! JSON reports hold only seed-determined content, so repeated runs produce
//! identical files; wall-clock times go to the text report.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::{load_datasets, synth_dataset, write_datasets, Dataset, SynthOptions};
use crate::error::{Error, Result};
use crate::kinematics::LoadingMode;
use crate::models::{ModelKind, ModelSpec};
use crate::optimize::{hybrid_fit, FitProblem, FitResult};
use crate::quality::{chi_squared, format_chi2, predictions, rank_models, QualityReport, RankTable};
use crate::stress::{alpha_grid, density_curve, directional_stiffness};

/// Summary of one input curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveInfo {
    pub label: String,
    pub tissue: String,
    pub points: usize,
    pub lambda_max: f64,
    pub fingerprint: String,
}

impl CurveInfo {
    fn of(d: &Dataset) -> Self {
        Self {
            label: d.label(),
            tissue: d.tissue.clone(),
            points: d.len(),
            lambda_max: d.lambda_max(),
            fingerprint: d.fingerprint(),
        }
    }
}

/// Outcome for one model; a failure is recorded instead of aborting the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelKind,
    pub ok: bool,
    pub error: Option<String>,
    /// Parameters used for the quality report.
    pub spec: Option<ModelSpec>,
    pub fit: Option<FitResult>,
    pub quality: Option<QualityReport>,
}

impl ModelReport {
    fn failed(model: ModelKind, e: Error) -> Self {
        Self {
            model,
            ok: false,
            error: Some(e.to_string()),
            spec: None,
            fit: None,
            quality: None,
        }
    }
}

/// Contents of a per-model JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub curves: Vec<CurveInfo>,
    pub report: ModelReport,
}

/// Result of a fit or evaluation run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub files: Vec<ModelFile>,
    pub runtimes: Vec<f64>,
    pub ranking: RankTable,
    pub written: Vec<PathBuf>,
}

/// Loads every curve named by the configuration.
pub fn load_inputs(cfg: &RunConfig) -> Result<Vec<Dataset>> {
    if cfg.data.is_empty() {
        return Err(Error::Config("no datasets given".into()));
    }
    let mut out = Vec::new();
    for p in &cfg.data {
        out.extend(load_datasets(p)?);
    }
    Ok(out)
}

fn fit_one(kind: ModelKind, cfg: &RunConfig, datasets: &[Dataset]) -> Result<(FitResult, QualityReport)> {
    let mut problem = FitProblem::new(kind, cfg.fiber_angle(), datasets.to_vec())?;
    problem.quad = cfg.quadrature();
    if let Some(s) = cfg.section(kind) {
        problem.options = s.options;
        for (name, v) in &s.fixed {
            problem.fix(name, *v)?;
        }
        for (name, [lo, hi]) in &s.bounds {
            if !s.fixed.contains_key(name) {
                problem.bound(name, *lo, *hi)?;
            }
        }
        if let Some([lo, hi]) = s.fiber_angle_range {
            problem.free_fiber_angle(lo, hi)?;
        }
    }
    problem.set_weights(cfg.weights.mode())?;
    let fit = hybrid_fit(&problem, &cfg.fit_config())?;
    let model = fit.build_model()?;
    let quality = chi_squared(&model, datasets, &problem.quad, cfg.epsilon)?;
    Ok((fit, quality))
}

fn eval_one(kind: ModelKind, cfg: &RunConfig, datasets: &[Dataset]) -> Result<(ModelSpec, QualityReport)> {
    let spec = cfg.model_spec(kind)?;
    let model = spec.build()?;
    let quality = chi_squared(&model, datasets, &cfg.quadrature(), cfg.epsilon)?;
    Ok((spec, quality))
}

fn kinds(cfg: &RunConfig) -> Result<Vec<ModelKind>> {
    let k = cfg.model_kinds()?;
    if k.is_empty() {
        return Err(Error::Config("no models selected".into()));
    }
    Ok(k)
}

/// Fits every configured model to the configured curves, writes the reports
/// and returns them. Models run concurrently; outputs do not depend on
/// scheduling.
pub fn run_fit(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let datasets = load_inputs(cfg)?;
    if datasets.len() > 2 {
        return Err(Error::Validation(format!(
            "a fit takes one or two curves, the datasets hold {}",
            datasets.len()
        )));
    }
    let kinds = kinds(cfg)?;
    let results: Vec<(ModelReport, f64)> = kinds
        .par_iter()
        .map(|&kind| {
            let t = Instant::now();
            let report = match fit_one(kind, cfg, &datasets) {
                Ok((fit, quality)) => ModelReport {
                    model: kind,
                    ok: true,
                    error: None,
                    spec: Some(fit.model.clone()),
                    fit: Some(fit),
                    quality: Some(quality),
                },
                Err(e) => ModelReport::failed(kind, e),
            };
            (report, t.elapsed().as_secs_f64())
        })
        .collect();
    finish("fit", cfg, &datasets, results)
}

/// Scores configured or tabulated parameters against the curves, without
/// fitting.
pub fn run_eval(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let datasets = load_inputs(cfg)?;
    let kinds = kinds(cfg)?;
    let results: Vec<(ModelReport, f64)> = kinds
        .par_iter()
        .map(|&kind| {
            let t = Instant::now();
            let report = match eval_one(kind, cfg, &datasets) {
                Ok((spec, quality)) => ModelReport {
                    model: kind,
                    ok: true,
                    error: None,
                    spec: Some(spec),
                    fit: None,
                    quality: Some(quality),
                },
                Err(e) => ModelReport::failed(kind, e),
            };
            (report, t.elapsed().as_secs_f64())
        })
        .collect();
    finish("eval", cfg, &datasets, results)
}

fn finish(command: &str, cfg: &RunConfig, datasets: &[Dataset], results: Vec<(ModelReport, f64)>) -> Result<RunOutput> {
    let hash = cfg.hash();
    let curves: Vec<CurveInfo> = datasets.iter().map(CurveInfo::of).collect();
    let (reports, runtimes): (Vec<ModelReport>, Vec<f64>) = results.into_iter().unzip();
    let qualities: Vec<QualityReport> = reports.iter().filter_map(|r| r.quality.clone()).collect();
    let ranking = rank_models(&qualities)?;
    let files: Vec<ModelFile> = reports
        .into_iter()
        .map(|report| ModelFile {
            command: command.to_string(),
            config_hash: hash.clone(),
            seed: cfg.seed,
            curves: curves.clone(),
            report,
        })
        .collect();

    let out = &cfg.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    for f in &files {
        let path = out.join(format!("{}.json", f.report.model));
        write_json(&path, f)?;
        written.push(path);
        if let Some(spec) = &f.report.spec {
            let model = spec.build()?;
            for d in datasets {
                let path = out.join(format!("{}_{}_{}.csv", f.report.model, d.mode, d.direction));
                let pred = predictions(&model, d, &cfg.quadrature())?;
                write_curve_csv(&path, d, &pred)?;
                written.push(path);
            }
        }
    }
    let path = out.join("ranking.csv");
    write_ranking_csv(&path, &ranking)?;
    written.push(path);
    let path = out.join("report.txt");
    let text = text_report(command, &hash, cfg.seed, &files, &runtimes, &ranking);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(RunOutput {
        files,
        runtimes,
        ranking,
        written,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

fn write_curve_csv(path: &Path, d: &Dataset, pred: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["lambda", "experimental", "model", "mode", "direction"])
        .map_err(|e| csv_error(path, e))?;
    for ((l, p), m) in d.nominal_points().into_iter().zip(pred) {
        w.write_record([l.to_string(), p.to_string(), m.to_string(), d.mode.to_string(), d.direction.clone()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_ranking_csv(path: &Path, table: &RankTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["rank", "model", "type", "chi2", "nop"])
        .map_err(|e| csv_error(path, e))?;
    for r in &table.rows {
        w.write_record([r.rank.to_string(), r.model.clone(), r.type_tag.clone(), r.chi2.to_string(), r.nop.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Human-readable summary with aligned columns.
pub fn text_report(
    command: &str,
    hash: &str,
    seed: u64,
    files: &[ModelFile],
    runtimes: &[f64],
    ranking: &RankTable,
) -> String {
    let mut s = format!("command      {command}\nconfig hash  {hash}\nseed         {seed}\n\n");
    if let Some(f) = files.first() {
        s.push_str("curves\n");
        for c in &f.curves {
            s.push_str(&format!("  {:<22} {:>4} points  λ_max {:.4}\n", c.label, c.points, c.lambda_max));
        }
        s.push('\n');
    }
    s.push_str(&format!(
        "{:<8} {:>6} {:>14} {:>14} {:>14} {:>12} {:>10} {:>9}\n",
        "model", "status", "chi2_r1", "chi2_r2", "chi2_r3", "cost", "kkt", "time_s"
    ));
    for (f, t) in files.iter().zip(runtimes) {
        let r = &f.report;
        let (q1, q2, q3) = r
            .quality
            .as_ref()
            .map_or((f64::NAN, f64::NAN, f64::NAN), |q| (q.chi2_region1, q.chi2_region2, q.chi2_region3));
        let (cost, kkt) = r.fit.as_ref().map_or((f64::NAN, f64::NAN), |x| (x.total_cost, x.kkt_residual));
        s.push_str(&format!(
            "{:<8} {:>6} {:>14} {:>14} {:>14} {:>12.4e} {:>10.2e} {:>9.2}\n",
            r.model.as_str(),
            if r.ok { "ok" } else { "failed" },
            format_chi2(q1),
            format_chi2(q2),
            format_chi2(q3),
            cost,
            kkt,
            t
        ));
    }
    s.push('\n');
    for f in files {
        let r = &f.report;
        if let Some(e) = &r.error {
            s.push_str(&format!("{}: {e}\n", r.model));
            continue;
        }
        if let Some(spec) = &r.spec {
            let params: Vec<String> = spec.params.iter().map(|(k, v)| format!("{k} = {v:.6}")).collect();
            s.push_str(&format!("{:<8} {}  phi = {:.3}°", r.model.as_str(), params.join("  "), spec.phi_deg));
            if let Some(fit) = &r.fit {
                s.push_str(&format!(
                    "  w = ({:.4}, {:.4})  {}",
                    fit.weights[0], fit.weights[1], fit.message
                ));
            }
            s.push('\n');
        }
    }
    s.push_str("\nranking\n");
    s.push_str(&ranking.to_text());
    s
}

/// Writes `polar_<MODEL>.csv` with directional stiffness and, for
/// dispersion models, the fiber density on a 1° grid.
pub fn run_polar(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let kinds = kinds(cfg)?;
    let alphas = alpha_grid(360);
    let quad = cfg.quadrature();
    let tables = kinds
        .par_iter()
        .map(|&kind| -> Result<_> {
            let model = cfg.model_spec(kind)?.build()?;
            let ds = directional_stiffness(&model, &alphas, &quad)?;
            let density = density_curve(&model, &alphas)?;
            Ok((kind, ds, density))
        })
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let mut written = Vec::new();
    for (kind, ds, density) in tables {
        let path = cfg.out.join(format!("polar_{kind}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        w.write_record(["alpha_deg", "stiffness", "density"])
            .map_err(|e| csv_error(&path, e))?;
        for (i, a) in ds.angles.iter().enumerate() {
            let rho = density.as_ref().map_or(String::new(), |d| d.values[i].to_string());
            w.write_record([a.to_degrees().round().to_string(), ds.values[i].to_string(), rho])
                .map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Settings of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthRequest {
    pub model: ModelKind,
    pub mode: LoadingMode,
    pub options: SynthOptions,
    pub path: PathBuf,
}

/// Writes noisy or exact model curves: both in-plane components for ET,
/// the loaded component for UT1 and UT2.
pub fn run_synth(cfg: &RunConfig, req: &SynthRequest) -> Result<Vec<Dataset>> {
    let model = cfg.model_spec(req.model)?.build()?;
    let components: &[usize] = match req.mode {
        LoadingMode::Et => &[0, 1],
        LoadingMode::Ut1 => &[0],
        LoadingMode::Ut2 => &[1],
    };
    let curves = components
        .iter()
        .map(|&k| {
            // Distinct noise per component.
            let options = SynthOptions {
                seed: req.options.seed.wrapping_add(k as u64),
                ..req.options
            };
            synth_dataset(&model, req.mode, k, &options, &cfg.quadrature())
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = req.path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_datasets(&req.path, &curves)?;
    Ok(curves)
}

/// Ranks models from per-model JSON reports of a fit or evaluation.
pub fn run_rank(reports: &[PathBuf], out: Option<&Path>) -> Result<RankTable> {
    let mut qualities = Vec::new();
    for p in reports {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let bad = |e: String| Error::Config(format!("{}: not a model report: {e}", p.display()));
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let quality = value
            .pointer("/report/quality")
            .ok_or_else(|| bad("missing report.quality".into()))?;
        if !quality.is_null() {
            qualities.push(serde_json::from_value(quality.clone()).map_err(|e| bad(e.to_string()))?);
        }
    }
    let table = rank_models(&qualities)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_ranking_csv(&dir.join("ranking.csv"), &table)?;
    }
    Ok(table)
}
