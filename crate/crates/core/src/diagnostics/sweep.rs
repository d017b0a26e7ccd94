//! Regime sweep: one interference-intensity knob γ ∈ [0, 1] mapped onto the
//! mechanism space, with the catalog re-scored at every step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designs::DesignSpec;
use crate::error::{Error, Result};
use crate::evaluate::evaluate_surface;
use crate::mechanisms::{Locality, MechanismPoint};
use crate::risk::EvalContext;
use crate::selector::{robust_select, EpsilonRule};

/// `scale · clamp(slope·γ − offset, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ramp {
    pub scale: f64,
    pub slope: f64,
    pub offset: f64,
}

impl Ramp {
    pub fn at(&self, gamma: f64) -> f64 {
        self.scale * (self.slope * gamma - self.offset).clamp(0.0, 1.0)
    }
}

/// γ → (γ_g, γ_b, λ). The budget channel fades out by the factor
/// `1 − max(0, budget_fade_slope·γ − budget_fade_offset)` so carryover
/// dominates the top of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepMapping {
    pub graph: Ramp,
    pub budget: Ramp,
    pub budget_fade_slope: f64,
    pub budget_fade_offset: f64,
    pub carry: Ramp,
}

impl Default for SweepMapping {
    fn default() -> Self {
        Self {
            graph: Ramp { scale: 0.3, slope: 3.0, offset: 0.5 },
            budget: Ramp { scale: 0.5, slope: 2.0, offset: 0.4 },
            budget_fade_slope: 2.0,
            budget_fade_offset: 1.4,
            carry: Ramp { scale: 0.2, slope: 2.0, offset: 1.0 },
        }
    }
}

impl SweepMapping {
    pub fn point(&self, gamma: f64, locality: Locality) -> Result<MechanismPoint> {
        let fade = (1.0 - (self.budget_fade_slope * gamma - self.budget_fade_offset).max(0.0)).max(0.0);
        MechanismPoint::new(
            self.graph.at(gamma),
            self.budget.at(gamma) * fade,
            self.carry.at(gamma),
            locality,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub gamma_grid: Vec<f64>,
    pub mapping: SweepMapping,
    pub locality: Locality,
    /// Set from the run's top-level `reps` and `seed`.
    #[serde(skip)]
    pub reps: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            gamma_grid: (0..=20).map(|i| i as f64 / 20.0).collect(),
            mapping: SweepMapping::default(),
            locality: Locality::Cluster,
            reps: 20,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_grid.is_empty() {
            return Err(Error::config("sweep.gamma_grid", "must not be empty"));
        }
        if self.gamma_grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::config("sweep.gamma_grid", "values must lie in [0, 1]"));
        }
        if self.gamma_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("sweep.gamma_grid", "must be strictly increasing"));
        }
        if self.reps == 0 {
            return Err(Error::config("sweep.reps", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub theta: MechanismPoint,
    /// Risk per catalog design, normalized within this γ.
    pub risk: Vec<f64>,
    pub winner: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub designs: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Distinct winners in order of first appearance along the sweep.
    pub fn winner_sequence(&self) -> Vec<usize> {
        let mut seq: Vec<usize> = Vec::new();
        for r in &self.rows {
            if seq.last() != Some(&r.winner) {
                seq.push(r.winner);
            }
        }
        seq
    }

    pub fn distinct_winners(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.rows.iter().map(|r| r.winner).collect();
        w.sort_unstable();
        w.dedup();
        w
    }
}

pub fn regime_sweep(cfg: &SweepConfig, ctx: &EvalContext<'_>, catalog: &[DesignSpec]) -> Result<SweepReport> {
    cfg.validate()?;
    let rows = cfg
        .gamma_grid
        .par_iter()
        .enumerate()
        .map(|(i, &gamma)| {
            let theta = cfg.mapping.point(gamma, cfg.locality)?;
            // each γ gets its own seed stream
            let seed = crate::rng::substream(cfg.seed, i as u64);
            let surface = evaluate_surface(ctx, catalog, &[theta], cfg.reps, seed)?;
            let decision = robust_select(&surface, &EpsilonRule::default())?;
            Ok(SweepRow {
                gamma,
                theta,
                risk: decision.q,
                winner: decision.selected,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        designs: catalog.iter().map(DesignSpec::name).collect(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapping_endpoints() {
        let m = SweepMapping::default();
        let zero = m.point(0.0, Locality::Cluster).unwrap();
        assert_eq!((zero.gamma_g, zero.gamma_b, zero.lambda), (0.0, 0.0, 0.0));
        let one = m.point(1.0, Locality::Cluster).unwrap();
        assert!((one.gamma_g - 0.3).abs() < 1e-12);
        assert!((one.gamma_b - 0.2).abs() < 1e-12);
        assert!((one.lambda - 0.2).abs() < 1e-12);
        let mid = m.point(0.5, Locality::Cluster).unwrap();
        assert!((mid.gamma_g - 0.3).abs() < 1e-12);
        assert!((mid.gamma_b - 0.3).abs() < 1e-12);
        assert_eq!(mid.lambda, 0.0);
    }

    #[test]
    fn mapping_orders_regimes() {
        // spillover switches on before carryover
        let m = SweepMapping::default();
        let first_on = |f: fn(&MechanismPoint) -> f64| {
            (0..=100)
                .map(|i| i as f64 / 100.0)
                .find(|&g| f(&m.point(g, Locality::Cluster).unwrap()) > 0.0)
                .unwrap()
        };
        assert!(first_on(|p| p.gamma_g) < first_on(|p| p.lambda));
        assert!(first_on(|p| p.gamma_b) < first_on(|p| p.lambda));
    }

    #[test]
    fn config_validation() {
        let mut c = SweepConfig::default();
        assert!(c.validate().is_ok());
        c.gamma_grid = vec![0.0, 0.5, 0.5];
        assert!(c.validate().is_err());
        c.gamma_grid = vec![0.0, 1.2];
        assert!(c.validate().is_err());
    }
}
