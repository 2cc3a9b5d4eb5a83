//! Acceptance criteria A1-A7. Each test prints one `PASS`/`FAIL`/`SKIP`
//! line; run with `--nocapture` to see them.

use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tissuefit::config::RunConfig;
use tissuefit::data::{load_datasets, synth_dataset, write_datasets, StressKind, SynthOptions};
use tissuefit::dispersion::{
    goh_structure_tensor, hnors_structure_tensor, integrate_sphere, kappa_from_b, BinghamDistribution,
    BivariateVonMises, SphereQuadrature, VonMisesPlanar,
};
use tissuefit::error::Error;
use tissuefit::kinematics::{DeformationState, FiberGeometry, LoadingMode, PrincipalStretches};
use tissuefit::models::{Model, ModelKind, ModelOptions};
use tissuefit::optimize::{hybrid_fit, FitConfig, FitProblem};
use tissuefit::pipeline::run_fit;
use tissuefit::presets::{self, Tissue};
use tissuefit::quality::{chi_squared, curve_chi_squared, rank_models, DEFAULT_EPSILON};
use tissuefit::stress::{nominal_stress, nominal_stress_principal, strain_energy, QuadratureConfig};

/// Environment variable naming a digitized aorta equibiaxial dataset.
const AAA_DATA_ENV: &str = "TISSUEFIT_AAA_DATA";

fn verdict(id: &str, pass: bool, elapsed: Duration, detail: &str) -> bool {
    println!(
        "{id} {}  ({:.2} s)  {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    pass
}

fn quad() -> QuadratureConfig {
    QuadratureConfig::default()
}

/// Random value inside a parameter's default search interval.
fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64, log: bool) -> f64 {
    let t: f64 = rng.random();
    if log && lo > 0.0 {
        (lo.ln() + t * (hi.ln() - lo.ln())).exp()
    } else {
        lo + t * (hi - lo)
    }
}

// ---------------------------------------------------------------- A1

struct EnergyCheck {
    p1: f64,
    fd: f64,
}

/// `P1` against `∂W/∂λ1` of `W(λ1, λ2)` on `C = diag(λ1², λ2², (λ1λ2)⁻²)`.
/// `None` when the state is infeasible or a fiber kink lies inside the
/// difference stencil. Sphere integrals use a converged order so that
/// stiff draws test the stress law rather than the default rule.
fn energy_check(m: &Model, mode: LoadingMode, l: f64) -> Option<EnergyCheck> {
    let l2 = match mode {
        LoadingMode::Et => l,
        _ => l.powf(-0.5),
    };
    let q = QuadratureConfig::with_order(96);
    let w = |a: f64| strain_energy(m, &PrincipalStretches::incompressible(a, l2).right_cauchy_green(), &q).ok();
    let h = 1e-6 * l;
    let (wp, w0, wm) = (w(l + h)?, w(l)?, w(l - h)?);
    let p1 = nominal_stress_principal(m, &PrincipalStretches::incompressible(l, l2), &q).ok()?.p1;
    let fwd = (wp - w0) / h;
    let bwd = (w0 - wm) / h;
    let scale = fwd.abs().max(bwd.abs()).max(1e-8);
    // Smooth energies give one-sided slopes within O(h·W''); a kink gives an
    // O(1) jump.
    if (fwd - bwd).abs() > 1e-2 * scale {
        return None;
    }
    Some(EnergyCheck {
        p1,
        fd: (wp - wm) / (2.0 * h),
    })
}

#[test]
fn a1_energy_stress_consistency() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: Vec<(ModelKind, f64, String)> = Vec::new();
    let mut guarded = 0;
    for kind in ModelKind::ALL {
        let mut kind_worst = (0.0f64, String::new());
        for mode in [LoadingMode::Ut1, LoadingMode::Et] {
            let mut done = 0;
            let mut attempts = 0;
            while done < 20 {
                attempts += 1;
                assert!(attempts < 2000, "{kind} {mode}: no admissible draws");
                let params: Vec<f64> = kind
                    .parameters()
                    .iter()
                    .map(|p| draw(&mut rng, p.lower, p.upper, p.log_scale))
                    .collect();
                let phi = rng.random_range(0.0..90.0);
                let l = rng.random_range(1.01..1.2);
                let Ok(m) = Model::new(kind, &params, FiberGeometry::from_degrees(phi), ModelOptions::default()) else {
                    continue;
                };
                let Some(c) = energy_check(&m, mode, l) else {
                    guarded += 1;
                    continue;
                };
                if !(c.p1.is_finite() && c.fd.is_finite()) {
                    continue;
                }
                done += 1;
                let rel = (c.p1 - c.fd).abs() / c.p1.abs().max(1e-8);
                if rel > kind_worst.0 || rel.is_nan() {
                    kind_worst = (rel, format!("{mode} λ = {l:.4} params {params:?}: P1 {} vs {}", c.p1, c.fd));
                }
            }
        }
        worst.push((kind, kind_worst.0, kind_worst.1));
    }
    let elapsed = start.elapsed();
    let failing: Vec<&(ModelKind, f64, String)> = worst.iter().filter(|w| !(w.1 <= 1e-4)).collect();
    let detail = worst
        .iter()
        .map(|(k, r, _)| format!("{k} {r:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    let pass = failing.is_empty() && elapsed < Duration::from_secs(30);
    verdict("A1", pass, elapsed, &format!("max rel. error per model: {detail}; {guarded} kink-guarded draws"));
    for (k, r, d) in &failing {
        println!("   {k}: {r:.3e} at {d}");
    }
    // DBB carries a fiber-matrix exclusion stress without a potential, so
    // only the other nine models are held to the bound.
    for (k, r, d) in &worst {
        if *k != ModelKind::Dbb {
            assert!(*r <= 1e-4, "{k}: {r:e} at {d}");
        }
    }
    assert!(elapsed < Duration::from_secs(30));
}

// ---------------------------------------------------------------- A2

fn max_curve_deviation(a: &Model, b: &Model) -> f64 {
    let mut worst = 0.0f64;
    for mode in [LoadingMode::Ut1, LoadingMode::Ut2, LoadingMode::Et] {
        for i in 0..=20 {
            let l = 1.0 + 0.01 * i as f64;
            let s = DeformationState::new(mode, l).unwrap();
            let pa = nominal_stress(a, &s, &quad()).unwrap();
            let pb = nominal_stress(b, &s, &quad()).unwrap();
            for k in 0..2 {
                let (x, y) = (pa.nominal(k), pb.nominal(k));
                worst = worst.max((x - y).abs() / y.abs().max(1e-9));
            }
        }
    }
    worst
}

#[test]
fn a2_limit_recoveries() {
    let start = Instant::now();
    let fibers = FiberGeometry::from_degrees(26.0);
    let opts = ModelOptions::default();
    let (mu, k1, k2) = (1.7416, 4.446, 161.392);
    let hgo = Model::new(ModelKind::Hgo, &[mu, k1, k2], fibers, opts).unwrap();
    let hsgr = Model::new(ModelKind::Hsgr, &[mu, k1, k2, 1.0], fibers, opts).unwrap();
    let goh = Model::new(ModelKind::Goh, &[mu, k1, k2, 0.0], fibers, opts).unwrap();
    let os = Model::new(ModelKind::Os, &[mu, 1e8, 1.0, 1.0], fibers, opts).unwrap().isotropic_part();
    let neo = Model::new(ModelKind::NeoHooke, &[mu], fibers, opts).unwrap();
    let d = [
        ("HSGR(p=1)/HGO", max_curve_deviation(&hsgr, &hgo)),
        ("GOH(κ=0)/HGO", max_curve_deviation(&goh, &hgo)),
        ("OS(Jm=1e8) matrix/neo-Hookean", max_curve_deviation(&os, &neo)),
    ];
    let elapsed = start.elapsed();
    let pass = d.iter().all(|x| x.1 <= 1e-6) && elapsed < Duration::from_secs(5);
    let detail = d.iter().map(|(n, v)| format!("{n} {v:.1e}")).collect::<Vec<_>>().join(", ");
    assert!(verdict("A2", pass, elapsed, &detail), "{detail}");
}

// ---------------------------------------------------------------- A3, A7

const GOH_AAA: [f64; 4] = [1.7416, 4.446, 161.392, 0.2256];

fn goh_fixture() -> (Model, Vec<tissuefit::data::Dataset>) {
    let m = Model::new(ModelKind::Goh, &GOH_AAA, FiberGeometry::from_degrees(26.0), ModelOptions::default()).unwrap();
    let opts = SynthOptions {
        lambda_max: 1.2,
        n_points: 20,
        noise_sigma: 0.0,
        seed: 0,
    };
    let sets = (0..2)
        .map(|k| synth_dataset(&m, LoadingMode::Et, k, &opts, &quad()).unwrap())
        .collect();
    (m, sets)
}

#[test]
fn a3_optimizer_round_trip() {
    let start = Instant::now();
    let (truth, sets) = goh_fixture();
    let problem = FitProblem::new(ModelKind::Goh, 26.0, sets.clone()).unwrap();
    let fit = hybrid_fit(&problem, &FitConfig::default()).unwrap();
    let model = fit.build_model().unwrap();
    let q = chi_squared(&model, &sets, &quad(), DEFAULT_EPSILON).unwrap();
    let rel: Vec<(String, f64)> = fit
        .param_names
        .iter()
        .zip(fit.params.iter().zip(truth.params()))
        .map(|(n, (a, b))| (n.clone(), (a - b).abs() / b.abs()))
        .collect();
    let elapsed = start.elapsed();
    let pass = q.chi2_total < 1e-6 && rel.iter().all(|r| r.1 <= 0.05) && elapsed < Duration::from_secs(600);
    let detail = format!(
        "χ² = {:.2e}; relative parameter errors {}",
        q.chi2_total,
        rel.iter().map(|(n, r)| format!("{n} {r:.1e}")).collect::<Vec<_>>().join(", ")
    );
    assert!(verdict("A3", pass, elapsed, &detail), "{detail}");
}

#[test]
fn a7_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (_, sets) = goh_fixture();
    let data = dir.path().join("aaa.csv");
    write_datasets(&data, &sets).unwrap();
    let mut bytes = Vec::new();
    for run in ["first", "second"] {
        let cfg = RunConfig {
            data: vec![data.clone()],
            models: vec!["GOH".into()],
            tissue: Some(Tissue::Aaa),
            seed: 42,
            out: dir.path().join(run),
            ..RunConfig::default()
        };
        let out = run_fit(&cfg).unwrap();
        assert!(out.files[0].report.ok);
        bytes.push(std::fs::read(dir.path().join(run).join("GOH.json")).unwrap());
    }
    let elapsed = start.elapsed();
    let pass = bytes[0] == bytes[1];
    assert!(
        verdict("A7", pass, elapsed, &format!("two seeded runs, {} byte reports", bytes[0].len())),
        "reports differ"
    );
}

// ---------------------------------------------------------------- A4

#[test]
fn a4_dispersion_calculus() {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;

    let k0 = kappa_from_b(0.0).unwrap();
    let e0 = (k0 - 1.0 / 3.0).abs();
    pass &= e0 < 1e-8;
    notes.push(format!("|κ(0) − 1/3| = {e0:.1e}"));

    let grid = [0.0, 0.01, 0.1, 0.3, 0.5, 1.0, 2.0, 3.67, 5.0, 10.0, 20.0, 50.0, 100.0];
    let ks: Vec<f64> = grid.iter().map(|&b| kappa_from_b(b).unwrap()).collect();
    let decreasing = ks.windows(2).all(|w| w[1] < w[0]);
    pass &= decreasing;
    notes.push(format!("κ decreasing on {} b values: {decreasing}", grid.len()));

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tr_err = 0.0f64;
    for _ in 0..100 {
        let phi: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let m = Vector3::new(phi.cos(), phi.sin(), 0.0);
        let h = goh_structure_tensor(rng.random_range(0.0..=1.0 / 3.0), &m).unwrap();
        tr_err = tr_err.max((h.trace() - 1.0).abs());
        let h = hnors_structure_tensor(rng.random_range(0.0..=1.0), rng.random_range(0.0..=0.5), &m, &Vector3::z()).unwrap();
        tr_err = tr_err.max((h.trace() - 1.0).abs());
    }
    pass &= tr_err <= 1e-12;
    notes.push(format!("max |tr H − 1| = {tr_err:.1e}"));

    let fine = SphereQuadrature::product(400);
    let m = Vector3::new(26f64.to_radians().cos(), 26f64.to_radians().sin(), 0.0);
    let mut norm_err = 0.0f64;
    for &b in &grid {
        let d = VonMisesPlanar::new(b).unwrap();
        norm_err = norm_err.max((integrate_sphere(|r| d.density_at(r, &m), &fine).unwrap() - 1.0).abs());
    }
    for (a, b) in [(0.0, 0.0), (2.0, 5.0), (-1.5, 10.0), (8.0, 30.0)] {
        let d = BivariateVonMises::new(a, b).unwrap();
        norm_err = norm_err.max((integrate_sphere(|r| d.density_at(r, &m, &Vector3::z()), &fine).unwrap() - 1.0).abs());
    }
    for _ in 0..5 {
        let k = [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
        let d = BinghamDistribution::rotated(k, rng.random_range(0.0..3.0)).unwrap();
        norm_err = norm_err.max((integrate_sphere(|r| d.density(r), &fine).unwrap() - 1.0).abs());
    }
    pass &= norm_err <= 1e-8;
    notes.push(format!("max density normalization error {norm_err:.1e}"));

    let mut doubling = 0.0f64;
    for kind in [ModelKind::Amdm, ModelKind::Asmd, ModelKind::Dbb] {
        for tissue in Tissue::ALL {
            let Ok(m) = presets::model(kind, tissue) else { continue };
            for mode in tissue.test_modes() {
                for i in 1..=4 {
                    let l = 1.0 + (tissue.lambda_max() - 1.0) * i as f64 / 4.0;
                    let s = DeformationState::new(mode, l).unwrap();
                    let q = quad();
                    let a = nominal_stress(&m, &s, &q).unwrap();
                    let b = nominal_stress(&m, &s, &QuadratureConfig::with_order(2 * q.order)).unwrap();
                    for k in 0..2 {
                        let scale = a.nominal(0).abs().max(a.nominal(1).abs());
                        doubling = doubling.max((a.nominal(k) - b.nominal(k)).abs() / scale);
                    }
                }
            }
        }
    }
    pass &= doubling < 1e-6;
    notes.push(format!("max order-doubling change of AI stresses {doubling:.1e}"));

    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    let detail = notes.join("; ");
    assert!(verdict("A4", pass, elapsed, &detail), "{detail}");
}

// ---------------------------------------------------------------- A5

#[test]
fn a5_chi_squared_oracle() {
    let start = Instant::now();
    let two = curve_chi_squared("oracle", &[(1.05, 1.0, 1.1), (1.1, 2.0, 2.2)], DEFAULT_EPSILON).unwrap();
    let oracle_err = (two.chi2() - 0.03).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut monotone = true;
    for i in 0..50 {
        let noise = SynthOptions {
            lambda_max: rng.random_range(1.05..1.2),
            n_points: rng.random_range(3..30),
            noise_sigma: rng.random_range(0.0..0.5),
            seed: i,
        };
        let data_model = Model::new(ModelKind::Goh, &GOH_AAA, FiberGeometry::from_degrees(26.0), ModelOptions::default()).unwrap();
        let sets: Vec<_> = (0..2)
            .filter_map(|k| synth_dataset(&data_model, LoadingMode::Et, k, &noise, &quad()).ok())
            .collect();
        let p: Vec<f64> = [(0.5, 5.0), (0.5, 10.0), (1.0, 300.0)].iter().map(|&(a, b)| rng.random_range(a..b)).collect();
        let m = Model::new(ModelKind::Hgo, &p, FiberGeometry::from_degrees(rng.random_range(0.0..90.0)), ModelOptions::default())
            .unwrap();
        let r = chi_squared(&m, &sets, &quad(), DEFAULT_EPSILON).unwrap();
        monotone &= r.chi2_region1 <= r.chi2_region2 && r.chi2_region2 <= r.chi2_region3;
        monotone &= r.curves.iter().all(|c| c.regions[0] <= c.regions[1] && c.regions[1] <= c.regions[2]);
    }
    let elapsed = start.elapsed();
    let pass = oracle_err <= 1e-12 && monotone && elapsed < Duration::from_secs(5);
    let detail = format!("two-point χ² = {:.15} (error {oracle_err:.1e}); regional monotonicity on 50 reports: {monotone}", two.chi2());
    assert!(verdict("A5", pass, elapsed, &detail), "{detail}");
}

// ---------------------------------------------------------------- A6

#[test]
fn a6_published_aorta_quality() {
    let Ok(path) = std::env::var(AAA_DATA_ENV) else {
        println!("A6 SKIP  set {AAA_DATA_ENV} to a digitized aorta equibiaxial CSV to run this check");
        return;
    };
    let start = Instant::now();
    let sets = match load_datasets(&path) {
        Ok(s) => s,
        Err(e) => panic!("A6: cannot read {path}: {e}"),
    };
    assert!(sets.iter().all(|d| d.mode == LoadingMode::Et), "A6 expects equibiaxial curves");
    assert!(sets.iter().all(|d| matches!(d.kind, StressKind::Nominal | StressKind::Cauchy)));
    let mut reports = Vec::new();
    let mut notes = Vec::new();
    let mut within = true;
    for kind in ModelKind::REVIEWED {
        let m = presets::model(kind, Tissue::Aaa).unwrap();
        let r = match chi_squared(&m, &sets, &quad(), DEFAULT_EPSILON) {
            Ok(r) => r,
            Err(Error::Infeasible { .. }) => unreachable!("infeasible points score +∞"),
            Err(e) => panic!("A6: {kind}: {e}"),
        };
        let published = presets::aaa_chi_squared(kind).unwrap();
        let dev = (r.chi2_region3 - published) / published;
        within &= dev.abs() <= 0.15;
        notes.push(format!("{kind} {:.4} vs {published} ({:+.1}%)", r.chi2_region3, 100.0 * dev));
        reports.push(r);
    }
    let table = rank_models(&reports).unwrap();
    let order: Vec<&str> = table.rows.iter().map(|r| r.model.as_str()).collect();
    let top_ok = order[..3] == ["HNORS", "HSGR", "AMDM"];
    let bottom_ok = order[7..] == ["HGO", "OS"];
    let elapsed = start.elapsed();
    let pass = within && top_ok && bottom_ok;
    let detail = format!("{}; ranking {}", notes.join(", "), order.join(" < "));
    assert!(verdict("A6", pass, elapsed, &detail), "{detail}");
}
