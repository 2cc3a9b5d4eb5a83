//! Identified parameter sets for the three reference tissues.
//!
//! Each tissue carries its mean fiber angle, the loading mode of its test
//! data and a representative maximum stretch used for fixture sweeps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{FiberGeometry, LoadingMode};
use crate::models::{Model, ModelKind, ModelOptions, ModelSpec};

/// Reference tissue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tissue {
    /// Aneurysmatic abdominal aorta, equibiaxial data.
    #[serde(rename = "AAA")]
    Aaa,
    /// Linea alba, uniaxial data.
    #[serde(rename = "LA")]
    LineaAlba,
    /// Anterior rectus sheath, uniaxial data.
    #[serde(rename = "RS")]
    RectusSheath,
}

impl Tissue {
    pub const ALL: [Tissue; 3] = [Tissue::Aaa, Tissue::LineaAlba, Tissue::RectusSheath];

    pub fn as_str(self) -> &'static str {
        match self {
            Tissue::Aaa => "AAA",
            Tissue::LineaAlba => "LA",
            Tissue::RectusSheath => "RS",
        }
    }

    /// Mean fiber angle from `e1`, in degrees.
    pub fn fiber_angle_deg(self) -> f64 {
        match self {
            Tissue::Aaa => 26.0,
            Tissue::LineaAlba => 0.0,
            Tissue::RectusSheath => 90.0,
        }
    }

    /// Test type of the tissue's data: ET for the aorta, UT otherwise.
    pub fn test_modes(self) -> [LoadingMode; 2] {
        match self {
            Tissue::Aaa => [LoadingMode::Et, LoadingMode::Et],
            _ => [LoadingMode::Ut1, LoadingMode::Ut2],
        }
    }

    /// Upper stretch of fixture sweeps; every identified set stays feasible
    /// (extensibility limits of OS) below it.
    pub fn lambda_max(self) -> f64 {
        match self {
            Tissue::Aaa => 1.12,
            Tissue::LineaAlba => 1.15,
            Tissue::RectusSheath => 1.16,
        }
    }

    pub fn fibers(self) -> FiberGeometry {
        FiberGeometry::from_degrees(self.fiber_angle_deg())
    }
}

impl fmt::Display for Tissue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tissue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AAA" | "AORTA" => Ok(Tissue::Aaa),
            "LA" | "LINEA_ALBA" | "LINEA-ALBA" => Ok(Tissue::LineaAlba),
            "RS" | "RECTUS_SHEATH" | "RECTUS-SHEATH" => Ok(Tissue::RectusSheath),
            _ => Err(Error::Validation(format!("unknown tissue '{s}' (expected AAA, LA or RS)"))),
        }
    }
}

/// Identified parameters in the model's parameter order, or `None` for
/// models without a published set (neo-Hookean).
pub fn parameters(kind: ModelKind, tissue: Tissue) -> Option<&'static [f64]> {
    use ModelKind::*;
    use Tissue::*;
    let p: &'static [f64] = match (kind, tissue) {
        (Ny, Aaa) => &[0.1148, 31.1439, 1523.0],
        (Ny, LineaAlba) => &[2907.6, 0.0028, 0.838],
        (Ny, RectusSheath) => &[0.8366, 6.3492, 25.7852],
        (Hgo, Aaa) => &[2.6712, 0.1742, 55.9001],
        (Hgo, LineaAlba) => &[1.1586, 8.6064, 11.4196],
        (Hgo, RectusSheath) => &[0.07, 0.4465, 7.6186],
        (Hsgr, Aaa) => &[0.9347, 0.2704, 47.0232, 0.9126],
        (Hsgr, LineaAlba) => &[1.1525, 87.4399, 5.0524, 0.0458],
        (Hsgr, RectusSheath) => &[0.09, 3.126, 35.2661, 0.1],
        // Order: mu, jm, k1, jf.
        (Os, Aaa) => &[2.5537, 0.2369, 3.38107, 0.1149],
        (Os, LineaAlba) => &[1.7592, 0.0944, 9.8814, 0.2883],
        (Os, RectusSheath) => &[0.6971, 0.3263, 0.3315, 0.1381],
        (Goh, Aaa) => &[1.7416, 4.446, 161.392, 0.2256],
        (Goh, LineaAlba) => &[2.3048, 17.2552, 20.549, 0.0998],
        (Goh, RectusSheath) => &[0.07, 23.5547, 131.2277, 0.25],
        (Hnors, Aaa) => &[1.8517, 0.6981, 59.9093, 0.7657, 0.47],
        (Hnors, LineaAlba) => &[2.305, 270.6246, 5.05, 0.6448, 0.4999],
        (Hnors, RectusSheath) => &[0.0851, 16.7116, 152.3987, 0.5217, 0.39],
        (Amdm, Aaa) => &[0.9337, 0.9118, 46.8474, 3.67],
        (Amdm, LineaAlba) => &[0.7418, 15.3359, 10.6226, 2.6374],
        (Amdm, RectusSheath) => &[1.8478e-5, 3.1303, 9.3118, 0.262],
        (Asmd, Aaa) => &[0.6517, 3.5475, 46.4817, 2.3798e-7, 0.9, 0.0],
        (Asmd, LineaAlba) => &[0.742, 15.656, 10.6286, 4.999e-7, 5.2757, 0.0],
        (Asmd, RectusSheath) => &[0.0503, 1.9067, 13.5294, 6.3935e-7, 8.9346e-7, 0.0],
        (Dbb, Aaa) => &[2.1366, 3.1017, 46.8793, 0.2597, 0.7],
        (Dbb, LineaAlba) => &[0.05, 56.0009, 0.7921, 0.4985, 0.52],
        (Dbb, RectusSheath) => &[0.05, 9.0099, 5.0009, 1.0473, 0.3001],
        (NeoHooke, _) => return None,
    };
    Some(p)
}

/// Published quality-of-fit values of the aorta data set (region 3).
pub fn aaa_chi_squared(kind: ModelKind) -> Option<f64> {
    use ModelKind::*;
    Some(match kind {
        Hnors => 2.4368,
        Hsgr => 2.4734,
        Amdm => 2.8541,
        Goh => 3.3643,
        Asmd => 3.7984,
        Dbb => 10.0814,
        Ny => 11.0814,
        Hgo => 47.4992,
        Os => 86.1323,
        NeoHooke => return None,
    })
}

/// Model specification with the tissue's identified parameters and fiber angle.
pub fn spec(kind: ModelKind, tissue: Tissue) -> Result<ModelSpec> {
    let p = parameters(kind, tissue)
        .ok_or_else(|| Error::Validation(format!("no identified parameters for {kind} on {tissue}")))?;
    ModelSpec::new(kind, p, tissue.fiber_angle_deg())
}

/// Ready-to-evaluate model with the tissue's identified parameters.
pub fn model(kind: ModelKind, tissue: Tissue) -> Result<Model> {
    let p = parameters(kind, tissue)
        .ok_or_else(|| Error::Validation(format!("no identified parameters for {kind} on {tissue}")))?;
    Model::new(kind, p, tissue.fibers(), ModelOptions::default())
}
