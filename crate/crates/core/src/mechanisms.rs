//! The ambiguity set: a finite, auditable grid of exposure mechanisms.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::CalibrationScales;

/// Grouping that defines a unit's graph neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locality {
    Cluster,
    Budget,
    Region,
}

impl Locality {
    pub const ALL: [Locality; 3] = [Locality::Cluster, Locality::Budget, Locality::Region];

    pub fn as_str(&self) -> &'static str {
        match self {
            Locality::Cluster => "cluster",
            Locality::Budget => "budget",
            Locality::Region => "region",
        }
    }
}

impl fmt::Display for Locality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One grid point θ = (γ_g, γ_b, λ, ℓ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismPoint {
    pub gamma_g: f64,
    pub gamma_b: f64,
    pub lambda: f64,
    pub locality: Locality,
}

impl MechanismPoint {
    pub fn new(gamma_g: f64, gamma_b: f64, lambda: f64, locality: Locality) -> Result<Self> {
        let p = Self {
            gamma_g,
            gamma_b,
            lambda,
            locality,
        };
        p.validate()?;
        Ok(p)
    }

    /// No interference through any channel.
    pub fn null(locality: Locality) -> Self {
        Self {
            gamma_g: 0.0,
            gamma_b: 0.0,
            lambda: 0.0,
            locality,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_g", self.gamma_g),
            ("gamma_b", self.gamma_b),
            ("lambda", self.lambda),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// γ_g + γ_b + λ.
    pub fn intensity(&self) -> f64 {
        self.gamma_g + self.gamma_b + self.lambda
    }

    fn sort_key(&self) -> (f64, f64, f64, Locality) {
        (self.gamma_g, self.gamma_b, self.lambda, self.locality)
    }
}

impl fmt::Display for MechanismPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(gamma_g={}, gamma_b={}, lambda={}, locality={})",
            self.gamma_g, self.gamma_b, self.lambda, self.locality
        )
    }
}

pub const DEFAULT_GAMMA_G: [f64; 3] = [0.0, 0.1, 0.3];
pub const DEFAULT_GAMMA_B: [f64; 3] = [0.0, 0.2, 0.5];
pub const DEFAULT_LAMBDA: [f64; 3] = [0.0, 0.05, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbiguityGrid {
    points: Vec<MechanismPoint>,
}

impl AmbiguityGrid {
    pub fn new(points: Vec<MechanismPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("ambiguity grid is empty".into()));
        }
        for (i, p) in points.iter().enumerate() {
            p.validate()?;
            if points[..i].iter().any(|q| q == p) {
                return Err(Error::InvalidInput(format!("duplicate grid point {p}")));
            }
        }
        Ok(Self { points })
    }

    /// Full cross product of the axes, ordered lexicographically by
    /// (γ_g, γ_b, λ, ℓ).
    pub fn from_axes(spec: &GridSpec) -> Result<Self> {
        let mut points = Vec::new();
        for &gamma_g in &spec.gamma_g {
            for &gamma_b in &spec.gamma_b {
                for &lambda in &spec.lambda {
                    for &locality in &spec.locality {
                        points.push(MechanismPoint::new(gamma_g, gamma_b, lambda, locality)?);
                    }
                }
            }
        }
        points.sort_by(|a, b| {
            let (ka, kb) = (a.sort_key(), b.sort_key());
            ka.0.total_cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(ka.2.total_cmp(&kb.2))
                .then(ka.3.cmp(&kb.3))
        });
        Self::new(points)
    }

    pub fn points(&self) -> &[MechanismPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn default_grid() -> AmbiguityGrid {
    AmbiguityGrid::from_axes(&GridSpec::default()).expect("default grid is valid")
}

/// Axis lists for a grid; absent axes take the default audit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub gamma_g: Vec<f64>,
    pub gamma_b: Vec<f64>,
    pub lambda: Vec<f64>,
    pub locality: Vec<Locality>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            gamma_g: DEFAULT_GAMMA_G.to_vec(),
            gamma_b: DEFAULT_GAMMA_B.to_vec(),
            lambda: DEFAULT_LAMBDA.to_vec(),
            locality: Locality::ALL.to_vec(),
        }
    }
}

/// Reference intensities that map to the full calibrated outcome scale.
pub const GRAPH_REFERENCE: f64 = 0.3;
pub const BUDGET_REFERENCE: f64 = 0.5;
pub const CARRY_REFERENCE: f64 = 0.2;

/// Outcome-scale interference strengths γ_g†, γ_b†, λ†.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeStrengths {
    pub gamma_g_dagger: f64,
    pub gamma_b_dagger: f64,
    pub lambda_dagger: f64,
}

pub fn outcome_strengths(theta: &MechanismPoint, calib: &CalibrationScales) -> OutcomeStrengths {
    OutcomeStrengths {
        gamma_g_dagger: calib.s_spill * calib.rho_g * theta.gamma_g / GRAPH_REFERENCE,
        gamma_b_dagger: calib.s_spill * calib.rho_b * theta.gamma_b / BUDGET_REFERENCE,
        lambda_dagger: calib.s_carry * theta.lambda / CARRY_REFERENCE,
    }
}

/// Full-launch effect τ + γ_g† + γ_b† + λ†.
pub fn launch_effect(theta: &MechanismPoint, calib: &CalibrationScales) -> f64 {
    let s = outcome_strengths(theta, calib);
    calib.tau + s.gamma_g_dagger + s.gamma_b_dagger + s.lambda_dagger
}
