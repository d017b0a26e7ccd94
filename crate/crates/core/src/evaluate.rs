//! Parallel evaluation of the catalog over the ambiguity grid.

use rayon::prelude::*;

use crate::designs::DesignSpec;
use crate::error::Result;
use crate::mechanisms::MechanismPoint;
use crate::risk::{component_scores, CellIndex, ComponentScores, EvalContext};
use crate::rng::SeedSchedule;
use crate::selector::RiskSurface;

/// Component scores for every (design, mechanism) pair, design-major.
/// Each cell draws from its own seed stream, so the result does not depend
/// on how rayon schedules the work.
pub fn evaluate_scores(
    ctx: &EvalContext<'_>,
    designs: &[DesignSpec],
    thetas: &[MechanismPoint],
    reps: usize,
    seed: u64,
) -> Result<Vec<ComponentScores>> {
    let seeds = SeedSchedule::new(seed);
    let nt = thetas.len();
    (0..designs.len() * nt)
        .into_par_iter()
        .map(|i| {
            let cell = CellIndex {
                design: i / nt,
                theta: i % nt,
            };
            component_scores(&designs[cell.design], &thetas[cell.theta], ctx, reps, &seeds, cell)
        })
        .collect()
}

pub fn evaluate_surface(
    ctx: &EvalContext<'_>,
    designs: &[DesignSpec],
    thetas: &[MechanismPoint],
    reps: usize,
    seed: u64,
) -> Result<RiskSurface> {
    let scores = evaluate_scores(ctx, designs, thetas, reps, seed)?;
    RiskSurface::build(
        designs.len(),
        thetas.len(),
        scores.into_iter().map(Some).collect(),
        ctx.weights,
    )
}
