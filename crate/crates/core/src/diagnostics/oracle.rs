//! Empirical selector against a high-replication oracle run.

use serde::Serialize;

use crate::designs::DesignSpec;
use crate::error::{Error, Result};
use crate::evaluate::evaluate_surface;
use crate::mechanisms::MechanismPoint;
use crate::risk::EvalContext;
use crate::selector::{robust_select, EpsilonRule};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub low_reps: usize,
    pub high_reps: usize,
    pub selected_low: String,
    pub selected_high: String,
    pub q_low: f64,
    pub q_high: f64,
    pub risk_gap: f64,
    /// Budget of the high-replication run.
    pub epsilon_t: f64,
    pub pass: bool,
}

pub fn oracle_comparison(
    ctx: &EvalContext<'_>,
    designs: &[DesignSpec],
    thetas: &[MechanismPoint],
    low_reps: usize,
    high_reps: usize,
    seed: u64,
    rule: &EpsilonRule,
) -> Result<OracleReport> {
    if low_reps == 0 || high_reps == 0 {
        return Err(Error::InvalidInput("replication counts must be positive".into()));
    }
    let low = robust_select(&evaluate_surface(ctx, designs, thetas, low_reps, seed)?, rule)?;
    let high = robust_select(&evaluate_surface(ctx, designs, thetas, high_reps, seed)?, rule)?;
    let (q_low, q_high) = (low.q[low.selected], high.q[high.selected]);
    let risk_gap = (q_low - q_high).abs();
    Ok(OracleReport {
        low_reps,
        high_reps,
        selected_low: designs[low.selected].name(),
        selected_high: designs[high.selected].name(),
        q_low,
        q_high,
        risk_gap,
        epsilon_t: high.epsilon_t,
        pass: low.selected == high.selected && risk_gap <= 2.0 * high.epsilon_t,
    })
}
