//! Run configuration read from TOML.
//!
//! ```toml
//! data = ["aaa.csv"]
//! models = ["GOH", "HGO"]
//! tissue = "AAA"
//! seed = 7
//! quad_order = 24
//! out = "results"
//!
//! [weights]
//! lower = 0.1
//! upper = 0.9
//!
//! [ga]
//! generations = 80
//!
//! [model.GOH]
//! fixed = { kappa = 0.2256 }
//! bounds = { k2 = [1.0, 500.0] }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelOptions, ModelSpec};
use crate::optimize::{FitConfig, GaConfig, RefineConfig, WeightMode};
use crate::presets::{self, Tissue};
use crate::quality::DEFAULT_EPSILON;
use crate::stress::QuadratureConfig;

/// Curve weights of a two-curve fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    /// Holds `w1` at this value when set.
    pub fixed: Option<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            fixed: None,
            lower: 0.1,
            upper: 0.9,
        }
    }
}

impl WeightConfig {
    pub fn mode(&self) -> WeightMode {
        match self.fixed {
            Some(w) => WeightMode::Fixed(w),
            None => WeightMode::Free {
                lower: self.lower,
                upper: self.upper,
            },
        }
    }
}

/// Settings of one model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Parameters held constant during a fit.
    pub fixed: BTreeMap<String, f64>,
    /// Search intervals replacing the defaults.
    pub bounds: BTreeMap<String, [f64; 2]>,
    /// Fits the mean fiber angle within this interval in degrees.
    pub fiber_angle_range: Option<[f64; 2]>,
    /// Parameters used by `eval`, `polar` and `synth`.
    pub params: Option<BTreeMap<String, f64>>,
    pub options: ModelOptions,
}

/// Everything a run needs besides the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset CSV files; their curves are used together.
    pub data: Vec<PathBuf>,
    pub models: Vec<String>,
    /// Supplies the mean fiber angle and, when `params` are absent, the
    /// tabulated parameters.
    pub tissue: Option<Tissue>,
    /// Overrides the tissue's mean fiber angle, in degrees.
    pub fiber_angle_deg: Option<f64>,
    pub seed: u64,
    pub quad_order: usize,
    /// Re-evaluate sphere integrals at doubled order.
    pub quad_verify: bool,
    /// Denominator guard of the χ² metric, in MPa.
    pub epsilon: f64,
    pub weights: WeightConfig,
    pub ga: GaConfig,
    pub refine: RefineConfig,
    /// GA candidates refined by gradient search.
    pub starts: usize,
    pub out: PathBuf,
    pub model: BTreeMap<String, ModelSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        Self {
            data: Vec::new(),
            models: Vec::new(),
            tissue: None,
            fiber_angle_deg: None,
            seed: 0,
            quad_order: QuadratureConfig::default().order,
            quad_verify: false,
            epsilon: DEFAULT_EPSILON,
            weights: WeightConfig::default(),
            ga: fit.ga,
            refine: fit.refine,
            starts: fit.starts,
            out: PathBuf::from("out"),
            model: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML file; relative data paths are taken from the file's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            for d in cfg.data.iter_mut() {
                if d.is_relative() {
                    *d = dir.join(&*d);
                }
            }
        }
        Ok(cfg)
    }

    /// Model kinds in listed order, without repeats.
    pub fn model_kinds(&self) -> Result<Vec<ModelKind>> {
        let mut out: Vec<ModelKind> = Vec::new();
        for name in &self.models {
            let k: ModelKind = name.parse()?;
            if !out.contains(&k) {
                out.push(k);
            }
        }
        Ok(out)
    }

    pub fn section(&self, kind: ModelKind) -> Option<&ModelSection> {
        self.model
            .iter()
            .find(|(k, _)| k.parse::<ModelKind>().ok() == Some(kind))
            .map(|(_, s)| s)
    }

    /// Mean fiber angle in degrees.
    pub fn fiber_angle(&self) -> f64 {
        self.fiber_angle_deg
            .or(self.tissue.map(Tissue::fiber_angle_deg))
            .unwrap_or(0.0)
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            order: self.quad_order,
            verify: self.quad_verify,
        }
    }

    /// Optimizer settings with the run seed.
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            ga: GaConfig { seed: self.seed, ..self.ga },
            refine: self.refine,
            starts: self.starts,
        }
    }

    /// Parameters of `kind` given in its section, else the tabulated values
    /// of the configured tissue.
    pub fn model_spec(&self, kind: ModelKind) -> Result<ModelSpec> {
        let section = self.section(kind);
        let mut spec = match (section.and_then(|s| s.params.as_ref()), self.tissue) {
            (Some(p), _) => ModelSpec {
                kind,
                params: p.clone(),
                phi_deg: self.fiber_angle(),
                options: ModelOptions::default(),
            },
            (None, Some(t)) => {
                let mut s = presets::spec(kind, t)?;
                s.phi_deg = self.fiber_angle();
                s
            }
            (None, None) => {
                return Err(Error::Config(format!(
                    "no parameters for {kind}: give [model.{kind}] params or a tissue"
                )))
            }
        };
        if let Some(s) = section {
            spec.options = s.options;
        }
        spec.values()?;
        Ok(spec)
    }

    /// Checks internal consistency; data files must exist.
    pub fn validate(&self) -> Result<()> {
        for d in &self.data {
            if !d.is_file() {
                return Err(Error::io(
                    d,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not found"),
                ));
            }
        }
        self.model_kinds()?;
        if self.quad_order == 0 {
            return Err(Error::Config("quad_order must be positive".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        let w = &self.weights;
        if let Some(f) = w.fixed {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("fixed weight {f} is outside [0, 1]")));
            }
        } else if !(0.0 <= w.lower && w.lower <= w.upper && w.upper <= 1.0) {
            return Err(Error::Config(format!("weight bounds [{}, {}] are not ordered within [0, 1]", w.lower, w.upper)));
        }
        for (name, s) in &self.model {
            let kind: ModelKind = name.parse()?;
            let names = kind.param_names();
            for key in s.fixed.keys().chain(s.bounds.keys()) {
                if !names.contains(&key.as_str()) {
                    return Err(Error::Config(format!("{kind} has no parameter '{key}'")));
                }
            }
            for (key, [lo, hi]) in &s.bounds {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::Config(format!("{kind}: bounds of '{key}' are not ordered: [{lo}, {hi}]")));
                }
            }
            if let Some([lo, hi]) = s.fiber_angle_range {
                if !(lo <= hi) {
                    return Err(Error::Config(format!("{kind}: fiber angle range [{lo}, {hi}] is not ordered")));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the configuration's canonical JSON form, leaving out the
    /// output directory.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let keyed = Self {
            out: PathBuf::new(),
            ..self.clone()
        };
        let json = serde_json::to_string(&keyed).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
