//! Planning MDE as a function of experiment duration.

use serde::Serialize;

use crate::designs::{effective_units, DesignSpec};
use crate::error::{Error, Result};
use crate::mechanisms::MechanismPoint;
use crate::risk::{mde, replicate, EvalContext};
use crate::rng::SeedSchedule;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdeRow {
    pub design: String,
    /// Replication-averaged assignment-unit variance.
    pub variance: f64,
    pub units: Vec<usize>,
    pub mde: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdeGridReport {
    pub durations: Vec<usize>,
    pub rows: Vec<MdeRow>,
    /// Every row non-increasing in duration.
    pub pass: bool,
}

pub fn mde_grid(
    designs: &[DesignSpec],
    ctx: &EvalContext<'_>,
    theta: &MechanismPoint,
    durations: &[usize],
    reps: usize,
    seed: u64,
) -> Result<MdeGridReport> {
    if durations.is_empty() || durations.contains(&0) {
        return Err(Error::InvalidInput("durations must be non-empty and positive".into()));
    }
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    let seeds = SeedSchedule::new(seed);
    let mut rows = Vec::with_capacity(designs.len());
    for (d, design) in designs.iter().enumerate() {
        let mut v = 0.0;
        for r in 0..reps {
            v += replicate(design, theta, ctx, seeds.replication(d, 0, r))?.v;
        }
        let variance = v / reps as f64;
        let mut units = Vec::with_capacity(durations.len());
        let mut values = Vec::with_capacity(durations.len());
        for &weeks in durations {
            let n = effective_units(design, ctx.panel, ctx.weights.periods_per_week, weeks)?;
            units.push(n);
            values.push(mde(variance, n, ctx.weights)?);
        }
        rows.push(MdeRow {
            design: design.name(),
            variance,
            units,
            mde: values,
        });
    }
    let mut order: Vec<usize> = (0..durations.len()).collect();
    order.sort_by_key(|&i| durations[i]);
    let pass = rows
        .iter()
        .all(|r| order.windows(2).all(|w| r.mde[w[1]] <= r.mde[w[0]] + 1e-12));
    Ok(MdeGridReport {
        durations: durations.to_vec(),
        rows,
        pass,
    })
}
