//! Principal-axis kinematics for incompressible homogeneous tests.
//!
//! Every deformation handled here has a diagonal deformation gradient whose
//! axes coincide with the symmetry axes of the fiber arrangement, so shear
//! never appears and `det F = 1` holds by construction.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loading mode of a homogeneous test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LoadingMode {
    /// Uniaxial tension along `e1`.
    #[serde(rename = "UT1")]
    Ut1,
    /// Uniaxial tension along `e2`.
    #[serde(rename = "UT2")]
    Ut2,
    /// Equibiaxial tension in the `e1`-`e2` plane.
    #[serde(rename = "ET")]
    Et,
}

impl LoadingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LoadingMode::Ut1 => "UT1",
            LoadingMode::Ut2 => "UT2",
            LoadingMode::Et => "ET",
        }
    }
}

impl std::fmt::Display for LoadingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LoadingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "UT1" | "ut1" => Ok(LoadingMode::Ut1),
            "UT2" | "ut2" => Ok(LoadingMode::Ut2),
            "ET" | "et" => Ok(LoadingMode::Et),
            other => Err(Error::domain(format!("unknown loading mode '{other}'"))),
        }
    }
}

/// A loading mode together with the applied principal stretch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationState {
    mode: LoadingMode,
    lambda: f64,
}

impl DeformationState {
    pub fn new(mode: LoadingMode, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::domain(format!(
                "stretch must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { mode, lambda })
    }

    pub fn mode(&self) -> LoadingMode {
        self.mode
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Principal stretches `(λ1, λ2, λ3)`.
    pub fn stretches(&self) -> PrincipalStretches {
        let l = self.lambda;
        let t = 1.0 / l.sqrt();
        let s = match self.mode {
            LoadingMode::Ut1 => [l, t, t],
            LoadingMode::Ut2 => [t, l, t],
            LoadingMode::Et => [l, l, 1.0 / (l * l)],
        };
        PrincipalStretches(s)
    }
}

/// Diagonal deformation gradient of a state.
pub fn deformation_gradient(state: &DeformationState) -> Matrix3<f64> {
    state.stretches().deformation_gradient()
}

/// Principal stretches of a diagonal deformation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalStretches(pub [f64; 3]);

impl PrincipalStretches {
    /// Incompressible state with prescribed in-plane stretches; `λ3 = 1/(λ1 λ2)`.
    pub fn incompressible(l1: f64, l2: f64) -> Self {
        PrincipalStretches([l1, l2, 1.0 / (l1 * l2)])
    }

    pub fn deformation_gradient(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.0))
    }

    pub fn right_cauchy_green(&self) -> Matrix3<f64> {
        let [a, b, c] = self.0;
        Matrix3::from_diagonal(&Vector3::new(a * a, b * b, c * c))
    }

    pub fn jacobian(&self) -> f64 {
        self.0[0] * self.0[1] * self.0[2]
    }
}

/// Two fiber families symmetrically disposed at `±phi` to `e1` in the
/// `e1`-`e2` plane, plus the out-of-plane normal `e3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberGeometry {
    phi: f64,
    pub m1: Vector3<f64>,
    pub m2: Vector3<f64>,
    pub mn: Vector3<f64>,
}

impl FiberGeometry {
    /// Fiber angle in radians.
    pub fn new(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Self {
            phi,
            m1: Vector3::new(c, s, 0.0),
            m2: Vector3::new(c, -s, 0.0),
            mn: Vector3::z(),
        }
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::new(deg.to_radians())
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn phi_degrees(&self) -> f64 {
        self.phi.to_degrees()
    }

    /// Mean directions of both families.
    pub fn families(&self) -> [Vector3<f64>; 2] {
        [self.m1, self.m2]
    }

    /// Structure tensors `A_i = M_i ⊗ M_i`.
    pub fn structure_tensors(&self) -> [Matrix3<f64>; 2] {
        [self.m1 * self.m1.transpose(), self.m2 * self.m2.transpose()]
    }
}

/// The seven invariants of `C` with respect to the two fiber families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantSet {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
    pub i6: f64,
    pub i7: f64,
}

impl InvariantSet {
    /// Invariants of an arbitrary symmetric right Cauchy-Green tensor.
    pub fn from_right_cauchy_green(c: &Matrix3<f64>, fibers: &FiberGeometry) -> Self {
        let c2 = c * c;
        let i1 = c.trace();
        let i2 = 0.5 * (i1 * i1 - c2.trace());
        let i3 = c.determinant();
        let quad = |m: &Vector3<f64>, t: &Matrix3<f64>| m.dot(&(t * m));
        Self {
            i1,
            i2,
            i3,
            i4: quad(&fibers.m1, c),
            i5: quad(&fibers.m1, &c2),
            i6: quad(&fibers.m2, c),
            i7: quad(&fibers.m2, &c2),
        }
    }

    pub fn from_stretches(s: &PrincipalStretches, fibers: &FiberGeometry) -> Self {
        Self::from_right_cauchy_green(&s.right_cauchy_green(), fibers)
    }

    /// Invariants for a purely isotropic evaluation; fiber slots at the
    /// reference value 1.
    pub fn isotropic(i1: f64) -> Self {
        Self {
            i1,
            i2: 3.0,
            i3: 1.0,
            i4: 1.0,
            i5: 1.0,
            i6: 1.0,
            i7: 1.0,
        }
    }
}

/// Invariants of a loading state.
pub fn invariants(state: &DeformationState, fibers: &FiberGeometry) -> InvariantSet {
    InvariantSet::from_stretches(&state.stretches(), fibers)
}
