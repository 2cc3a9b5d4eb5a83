//! Stress-stretch datasets: CSV reading and writing, unit and stress-kind
//! normalization, and synthetic curves generated from a model.
//!
//! A file holds one point per row under the header
//! `lambda,stress,kind,unit,direction,mode`. Rows sharing a mode and
//! direction form one curve, in order of first appearance.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{DeformationState, LoadingMode};
use crate::models::Model;
use crate::stress::{nominal_stress, QuadratureConfig};

/// Stress measure of the recorded values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StressKind {
    Nominal,
    Cauchy,
}

impl StressKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StressKind::Nominal => "nominal",
            StressKind::Cauchy => "cauchy",
        }
    }
}

impl fmt::Display for StressKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StressKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nominal" => Ok(StressKind::Nominal),
            "cauchy" => Ok(StressKind::Cauchy),
            other => Err(Error::Validation(format!("unknown stress kind '{other}'"))),
        }
    }
}

/// Stress unit; values are stored in MPa after loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "MPa")]
    Mpa,
    #[serde(rename = "kPa")]
    Kpa,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Mpa => "MPa",
            Unit::Kpa => "kPa",
        }
    }

    /// Factor converting a value in this unit to MPa.
    pub fn to_mpa(self) -> f64 {
        match self {
            Unit::Mpa => 1.0,
            Unit::Kpa => 1e-3,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "MPa" | "mpa" | "MPA" => Ok(Unit::Mpa),
            "kPa" | "kpa" | "KPA" => Ok(Unit::Kpa),
            other => Err(Error::Validation(format!("unknown unit '{other}'"))),
        }
    }
}

/// Stress component (0 for `e1`, 1 for `e2`) named by a direction label.
pub fn direction_component(label: &str) -> Result<usize> {
    match label.trim().to_ascii_lowercase().as_str() {
        "e1" | "1" | "circumferential" | "circ" | "transverse" => Ok(0),
        "e2" | "2" | "axial" | "longitudinal" => Ok(1),
        other => Err(Error::Validation(format!(
            "unknown direction '{other}' (expected e1/circumferential/transverse or e2/axial/longitudinal)"
        ))),
    }
}

/// One stress-stretch curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub tissue: String,
    pub direction: String,
    pub mode: LoadingMode,
    pub kind: StressKind,
    /// Unit of the source file; `points` are always in MPa.
    pub unit: Unit,
    pub points: Vec<(f64, f64)>,
}

impl Dataset {
    /// Builds and validates a curve whose stresses are already in MPa.
    pub fn new(
        tissue: impl Into<String>,
        direction: impl Into<String>,
        mode: LoadingMode,
        kind: StressKind,
        points: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let d = Self {
            tissue: tissue.into(),
            direction: direction.into(),
            mode,
            kind,
            unit: Unit::Mpa,
            points,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Validation(format!("curve {} has no points", self.label())));
        }
        self.component()?;
        let mut prev = f64::NEG_INFINITY;
        for &(l, s) in &self.points {
            if !l.is_finite() || l < 1.0 {
                return Err(Error::Validation(format!("curve {}: stretch {l} is below 1", self.label())));
            }
            if l <= prev {
                return Err(Error::Validation(format!(
                    "curve {}: stretches must increase strictly ({prev} then {l})",
                    self.label()
                )));
            }
            if !s.is_finite() {
                return Err(Error::Validation(format!("curve {}: non-finite stress at λ = {l}", self.label())));
            }
            prev = l;
        }
        Ok(())
    }

    /// Stress component compared with this curve: `e1` for UT1, `e2` for
    /// UT2, and the direction label for ET.
    pub fn component(&self) -> Result<usize> {
        match self.mode {
            LoadingMode::Ut1 => Ok(0),
            LoadingMode::Ut2 => Ok(1),
            LoadingMode::Et => direction_component(&self.direction),
        }
    }

    /// `mode/direction` label used in reports.
    pub fn label(&self) -> String {
        format!("{}/{}", self.mode, self.direction)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.points.last().map_or(1.0, |p| p.0)
    }

    /// Points as nominal stress, converting Cauchy values by `P = σ/λ`
    /// (the loaded direction is stretched by `λ` in every mode).
    pub fn nominal_points(&self) -> Vec<(f64, f64)> {
        match self.kind {
            StressKind::Nominal => self.points.clone(),
            StressKind::Cauchy => self.points.iter().map(|&(l, s)| (l, s / l)).collect(),
        }
    }

    /// Identifier of the curve's content, used to check that quality reports
    /// refer to the same data.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.mode.as_str());
        h.update(self.component().unwrap_or(9).to_le_bytes());
        for (l, p) in self.nominal_points() {
            h.update(l.to_le_bytes());
            h.update(p.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    lambda: f64,
    stress: f64,
    kind: String,
    unit: String,
    direction: String,
    mode: String,
}

const HEADER: [&str; 6] = ["lambda", "stress", "kind", "unit", "direction", "mode"];

/// Reads every curve of a CSV file.
pub fn load_datasets(path: impl AsRef<Path>) -> Result<Vec<Dataset>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let tissue = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(parse_err(1, format!("expected header '{}'", HEADER.join(","))));
    }
    let mut curves: Vec<Dataset> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row: Row = record.deserialize(Some(&headers)).map_err(|e| parse_err(line, e.to_string()))?;
        let kind: StressKind = row.kind.parse().map_err(|e: Error| parse_err(line, e.to_string()))?;
        let unit: Unit = row.unit.parse().map_err(|e: Error| parse_err(line, e.to_string()))?;
        let mode: LoadingMode = row.mode.parse().map_err(|e: Error| parse_err(line, e.to_string()))?;
        if mode == LoadingMode::Et {
            direction_component(&row.direction).map_err(|e| parse_err(line, e.to_string()))?;
        }
        let stress = row.stress * unit.to_mpa();
        match curves.iter_mut().find(|c| c.mode == mode && c.direction == row.direction) {
            Some(c) => {
                if c.kind != kind {
                    return Err(parse_err(line, format!("curve {} mixes stress kinds", c.label())));
                }
                c.points.push((row.lambda, stress));
            }
            None => curves.push(Dataset {
                tissue: tissue.clone(),
                direction: row.direction,
                mode,
                kind,
                unit,
                points: vec![(row.lambda, stress)],
            }),
        }
    }
    if curves.is_empty() {
        return Err(Error::Validation(format!("{}: no data rows", path.display())));
    }
    for c in &curves {
        c.validate()?;
    }
    Ok(curves)
}

/// Reads a file holding exactly one curve.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut curves = load_datasets(path)?;
    if curves.len() != 1 {
        return Err(Error::Validation(format!(
            "{}: expected one curve, found {}",
            path.display(),
            curves.len()
        )));
    }
    Ok(curves.remove(0))
}

/// Writes curves to one CSV file. Stresses are written in MPa.
pub fn write_datasets(path: impl AsRef<Path>, curves: &[Dataset]) -> Result<()> {
    let path = path.as_ref();
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Validation(format!("csv encoding failed: {e}"));
    out.write_record(HEADER).map_err(csv_err)?;
    for c in curves {
        for &(l, s) in &c.points {
            out.serialize(Row {
                lambda: l,
                stress: s,
                kind: c.kind.as_str().into(),
                unit: Unit::Mpa.as_str().into(),
                direction: c.direction.clone(),
                mode: c.mode.as_str().into(),
            })
            .map_err(csv_err)?;
        }
    }
    let bytes = out
        .into_inner()
        .map_err(|e| Error::Validation(format!("csv encoding failed: {e}")))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Default direction label of a stress component.
pub fn component_label(component: usize) -> &'static str {
    if component == 0 {
        "e1"
    } else {
        "e2"
    }
}

/// Settings for [`synth_dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub lambda_max: f64,
    pub n_points: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Nominal-stress curve sampled from a model at `n_points` stretches evenly
/// spaced on `[1, λ_max]`, with optional Gaussian noise.
pub fn synth_dataset(
    model: &Model,
    mode: LoadingMode,
    component: usize,
    opts: &SynthOptions,
    quad: &QuadratureConfig,
) -> Result<Dataset> {
    if !(opts.lambda_max > 1.0) || opts.n_points < 2 {
        return Err(Error::domain(format!(
            "synthetic curve needs λ_max > 1 and at least two points, got {} and {}",
            opts.lambda_max, opts.n_points
        )));
    }
    if component > 1 || (mode == LoadingMode::Ut1 && component != 0) || (mode == LoadingMode::Ut2 && component != 1) {
        return Err(Error::domain(format!("component {component} is not loaded under {mode}")));
    }
    if !(opts.noise_sigma >= 0.0) {
        return Err(Error::domain(format!("noise sigma must be nonnegative, got {}", opts.noise_sigma)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let noise = Normal::new(0.0, opts.noise_sigma).map_err(|e| Error::domain(e.to_string()))?;
    let last = (opts.n_points - 1) as f64;
    let mut points = Vec::with_capacity(opts.n_points);
    for i in 0..opts.n_points {
        let l = 1.0 + (opts.lambda_max - 1.0) * i as f64 / last;
        let state = DeformationState::new(mode, l)?;
        let p = nominal_stress(model, &state, quad)
            .map_err(|e| Error::Validation(format!("model infeasible at λ = {l}: {e}")))?
            .nominal(component);
        let p = if opts.noise_sigma > 0.0 { p + noise.sample(&mut rng) } else { p };
        points.push((l, p));
    }
    Dataset::new("synthetic", component_label(component), mode, StressKind::Nominal, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::FiberGeometry;
    use crate::models::{ModelKind, ModelOptions};
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_two_rows() {
        let f = write("lambda,stress,kind,unit,direction,mode\n1.0,0.0,nominal,MPa,e1,UT1\n1.1,0.2,nominal,MPa,e1,UT1\n");
        let d = load_dataset(f.path()).unwrap();
        assert_eq!(d.points, vec![(1.0, 0.0), (1.1, 0.2)]);
        assert_eq!(d.mode, LoadingMode::Ut1);
        assert_eq!(d.component().unwrap(), 0);
    }

    #[test]
    fn kilopascal_values_are_scaled() {
        let f = write("lambda,stress,kind,unit,direction,mode\n1.05,150,nominal,kPa,e2,UT2\n");
        let d = load_dataset(f.path()).unwrap();
        assert_eq!(d.points[0].1, 0.15);
        assert_eq!(d.unit, Unit::Kpa);
    }

    #[test]
    fn rejects_bad_input() {
        let dup = write("lambda,stress,kind,unit,direction,mode\n1.1,0.1,nominal,MPa,e1,UT1\n1.1,0.2,nominal,MPa,e1,UT1\n");
        assert!(matches!(load_dataset(dup.path()), Err(Error::Validation(_))));
        let bad = write("lambda,stress,kind,unit,direction,mode\n1.0,0.0,nominal,MPa,e1,UT1\n1.1,abc,nominal,MPa,e1,UT1\n");
        match load_dataset(bad.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let unit = write("lambda,stress,kind,unit,direction,mode\n1.0,0.0,nominal,psi,e1,UT1\n");
        assert!(matches!(load_dataset(unit.path()), Err(Error::Parse { line: 2, .. })));
        let header = write("x,y\n1,2\n");
        assert!(matches!(load_dataset(header.path()), Err(Error::Parse { line: 1, .. })));
        let below = write("lambda,stress,kind,unit,direction,mode\n0.9,0.0,nominal,MPa,e1,UT1\n");
        assert!(load_dataset(below.path()).is_err());
        assert!(matches!(load_dataset("/nonexistent/file.csv"), Err(Error::Io { .. })));
    }

    #[test]
    fn equibiaxial_file_splits_by_direction() {
        let f = write(
            "lambda,stress,kind,unit,direction,mode\n\
             1.05,0.1,cauchy,MPa,circumferential,ET\n\
             1.05,0.05,cauchy,MPa,axial,ET\n\
             1.10,0.3,cauchy,MPa,circumferential,ET\n\
             1.10,0.2,cauchy,MPa,axial,ET\n",
        );
        let curves = load_datasets(f.path()).unwrap();
        assert_eq!(curves.len(), 2);
        assert_eq!(curves[0].component().unwrap(), 0);
        assert_eq!(curves[1].component().unwrap(), 1);
        let nominal = curves[0].nominal_points();
        assert_eq!(nominal[1], (1.1, 0.3 / 1.1));
        assert!(load_dataset(f.path()).is_err());
    }

    #[test]
    fn synthetic_round_trip_is_exact() {
        let model = Model::new(
            ModelKind::Goh,
            &[1.7416, 4.446, 161.392, 0.2256],
            FiberGeometry::from_degrees(26.0),
            ModelOptions::default(),
        )
        .unwrap();
        let opts = SynthOptions { lambda_max: 1.2, n_points: 20, noise_sigma: 0.0, seed: 7 };
        let q = QuadratureConfig::default();
        let a = synth_dataset(&model, LoadingMode::Et, 0, &opts, &q).unwrap();
        let b = synth_dataset(&model, LoadingMode::Et, 1, &opts, &q).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a.points[0], (1.0, a.points[0].1));
        assert!(a.points[0].1.abs() < 1e-14);
        assert_eq!(a.lambda_max(), 1.2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("goh.csv");
        write_datasets(&path, &[a.clone(), b.clone()]).unwrap();
        let back = load_datasets(&path).unwrap();
        assert_eq!(back[0].points, a.points);
        assert_eq!(back[1].points, b.points);
        assert_eq!(back[0].fingerprint(), a.fingerprint());

        let noisy = SynthOptions { noise_sigma: 1e-3, ..opts };
        let n1 = synth_dataset(&model, LoadingMode::Et, 0, &noisy, &q).unwrap();
        let n2 = synth_dataset(&model, LoadingMode::Et, 0, &noisy, &q).unwrap();
        assert_eq!(n1, n2);
        assert_ne!(n1.points, a.points);
        assert!(synth_dataset(&model, LoadingMode::Ut1, 1, &opts, &q).is_err());
    }

    #[test]
    fn infeasible_synthesis_names_stretch() {
        let model = Model::new(ModelKind::Os, &[1.0, 0.05, 1.0, 1.0], FiberGeometry::from_degrees(0.0), ModelOptions::default()).unwrap();
        let opts = SynthOptions { lambda_max: 1.5, n_points: 11, noise_sigma: 0.0, seed: 0 };
        let err = synth_dataset(&model, LoadingMode::Ut1, 0, &opts, &QuadratureConfig::default()).unwrap_err();
        assert!(err.to_string().contains("λ = 1.15"), "{err}");
    }
}
