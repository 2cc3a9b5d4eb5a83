//! Command-line front end: fit, evaluate, synthesize, sweep and rank
//! anisotropic tissue models.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use tissuefit::config::RunConfig;
use tissuefit::data::SynthOptions;
use tissuefit::error::Error;
use tissuefit::kinematics::LoadingMode;
use tissuefit::models::ModelKind;
use tissuefit::pipeline::{run_eval, run_fit, run_polar, run_rank, run_synth, RunOutput, SynthRequest};
use tissuefit::presets::Tissue;

#[derive(Parser)]
#[command(name = "tissuefit", version, about = "Fit and compare anisotropic hyperelastic models of soft tissue")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Identify parameters of each model from one or two curves.
    Fit(RunArgs),
    /// Score given or tabulated parameters against curves.
    Eval(RunArgs),
    /// Write model curves, optionally with Gaussian noise, as a dataset CSV.
    Synth(SynthArgs),
    /// Directional stiffness and fiber density on a 1° grid.
    Polar(RunArgs),
    /// Rank models from per-model JSON reports.
    Rank(RankArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model to run; repeat for several. Replaces the configured list.
    #[arg(long = "model")]
    models: Vec<String>,
    /// Dataset CSV; repeat for several. Replaces the configured list.
    #[arg(long = "data")]
    data: Vec<PathBuf>,
    /// Tissue supplying the fiber angle and tabulated parameters (AAA, LA, RS).
    #[arg(long)]
    tissue: Option<Tissue>,
    /// Mean fiber angle in degrees.
    #[arg(long)]
    fiber_angle: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Gauss-Legendre nodes per segment of the sphere quadrature.
    #[arg(long)]
    quad_order: Option<usize>,
    /// Hold the first curve's weight at this value.
    #[arg(long)]
    fix_weights: Option<f64>,
    /// Parameter value `name=value` for the single selected model.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Loading mode (UT1, UT2, ET).
    #[arg(long, default_value = "ET")]
    mode: LoadingMode,
    #[arg(long, default_value_t = 1.2)]
    lambda_max: f64,
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// Standard deviation of the stress noise in MPa.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

#[derive(Args)]
struct RankArgs {
    /// Per-model JSON reports.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Directory for ranking.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value in '{s}': {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn build_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if !a.models.is_empty() {
        cfg.models = a.models.clone();
    }
    if !a.data.is_empty() {
        cfg.data = a.data.clone();
    }
    if a.tissue.is_some() {
        cfg.tissue = a.tissue;
    }
    if a.fiber_angle.is_some() {
        cfg.fiber_angle_deg = a.fiber_angle;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(q) = a.quad_order {
        cfg.quad_order = q;
    }
    if a.fix_weights.is_some() {
        cfg.weights.fixed = a.fix_weights;
    }
    if let Some(o) = &a.out {
        cfg.out = o.clone();
    }
    if !a.params.is_empty() {
        let kinds = cfg.model_kinds()?;
        let [kind] = kinds.as_slice() else {
            bail!("--param needs exactly one model, {} selected", kinds.len());
        };
        let params: BTreeMap<String, f64> = a.params.iter().cloned().collect();
        cfg.model.entry(kind.to_string()).or_default().params = Some(params);
    }
    Ok(cfg)
}

fn print_run(out: &RunOutput) {
    for f in &out.files {
        if let Some(e) = &f.report.error {
            eprintln!("{}: {e}", f.report.model);
        }
    }
    print!("{}", out.ranking.to_text());
    for p in &out.written {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => print_run(&run_fit(&build_config(&a)?)?),
        Command::Eval(a) => print_run(&run_eval(&build_config(&a)?)?),
        Command::Polar(a) => {
            for p in run_polar(&build_config(&a)?)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Synth(a) => {
            let cfg = build_config(&a.run)?;
            let kinds = cfg.model_kinds()?;
            let [model]: [ModelKind; 1] = kinds
                .try_into()
                .map_err(|k: Vec<ModelKind>| anyhow::anyhow!("synth needs exactly one model, {} selected", k.len()))?;
            let path = a.run.out.clone().unwrap_or_else(|| PathBuf::from(format!("{model}_{}.csv", a.mode)));
            let req = SynthRequest {
                model,
                mode: a.mode,
                options: SynthOptions {
                    lambda_max: a.lambda_max,
                    n_points: a.points,
                    noise_sigma: a.noise,
                    seed: cfg.seed,
                },
                path: path.clone(),
            };
            let curves = run_synth(&cfg, &req)?;
            println!("wrote {} ({} curves)", path.display(), curves.len());
        }
        Command::Rank(a) => {
            let table = run_rank(&a.reports, a.out.as_deref())?;
            print!("{}", table.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            // Missing or unreadable inputs exit like usage errors.
            match e.downcast_ref::<Error>() {
                Some(Error::Io { .. } | Error::Config(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
