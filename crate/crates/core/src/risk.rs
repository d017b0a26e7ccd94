//! Semi-synthetic outcomes and the six planning-risk components.
//!
//! For one (design, mechanism) pair each replication replays the assignment,
//! derives exposures, simulates outcomes and scores
//!
//! | key | component |
//! |-----|-----------|
//! | `g` | exposure-geometry proxy |
//! | `v` | variance of assignment-unit mean outcomes |
//! | `m` | planning MDE over the horizon |
//! | `c` | control-arm spillover and switching contamination |
//! | `o` | operational cost (design constant) |
//! | `e` | mean L1 gap to the full-launch exposure profile |
//!
//! Replications are averaged; `o` is computed once.

use std::fmt;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::designs::{effective_units, replay, AssignmentTable, DesignSpec, OpCostInputs};
use crate::error::{Error, Result};
use crate::exposure::{exposure_features, geometry_score, ExposurePanel};
use crate::mechanisms::{launch_effect, outcome_strengths, MechanismPoint};
use crate::panel::{CalibrationScales, Panel};
use crate::rng::{rng_from_seed, substream, SeedSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    G,
    V,
    M,
    C,
    O,
    E,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::G,
        Component::V,
        Component::M,
        Component::C,
        Component::O,
        Component::E,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Component::G => "g",
            Component::V => "v",
            Component::M => "m",
            Component::C => "c",
            Component::O => "o",
            Component::E => "e",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Values ordered as [`Component::ALL`].
pub type ComponentVector = [f64; 6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanningWeights {
    pub w_g: f64,
    pub w_v: f64,
    pub w_m: f64,
    pub w_c: f64,
    pub w_o: f64,
    pub w_e: f64,
    pub alpha: f64,
    pub beta: f64,
    pub t_weeks: usize,
    pub periods_per_week: usize,
}

impl Default for PlanningWeights {
    fn default() -> Self {
        Self {
            w_g: 1.00,
            w_v: 0.80,
            w_m: 0.75,
            w_c: 0.45,
            w_o: 0.45,
            w_e: 0.65,
            alpha: 0.05,
            beta: 0.20,
            t_weeks: 2,
            periods_per_week: 7,
        }
    }
}

impl PlanningWeights {
    pub fn vector(&self) -> ComponentVector {
        [self.w_g, self.w_v, self.w_m, self.w_c, self.w_o, self.w_e]
    }

    pub fn with_vector(self, w: ComponentVector) -> Self {
        Self {
            w_g: w[0],
            w_v: w[1],
            w_m: w[2],
            w_c: w[3],
            w_o: w[4],
            w_e: w[5],
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.vector();
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::config("weights", "weights must be finite and non-negative"));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err(Error::config("weights", "at least one weight must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("weights.alpha", "must lie in (0, 1)"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config("weights.beta", "must lie in (0, 1)"));
        }
        if self.t_weeks == 0 {
            return Err(Error::config("weights.t_weeks", "must be at least 1"));
        }
        if self.periods_per_week == 0 {
            return Err(Error::config("weights.periods_per_week", "must be at least 1"));
        }
        Ok(())
    }
}

/// Raw component scores for one (design, mechanism) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentScores {
    pub g: f64,
    pub v: f64,
    pub m: f64,
    pub c: f64,
    pub o: f64,
    pub e: f64,
    pub reps: usize,
    /// Mean difference-in-means estimate minus the launch effect. Diagnostic
    /// only; never enters the risk.
    pub bias_est: f64,
    /// Standard error of each averaged component over replications.
    pub std_err: ComponentVector,
}

impl ComponentScores {
    pub fn as_vector(&self) -> ComponentVector {
        [self.g, self.v, self.m, self.c, self.o, self.e]
    }

    /// Single-replication scores with the given component values.
    pub fn from_vector(x: ComponentVector) -> Self {
        Self {
            g: x[0],
            v: x[1],
            m: x[2],
            c: x[3],
            o: x[4],
            e: x[5],
            reps: 1,
            bias_est: 0.0,
            std_err: [0.0; 6],
        }
    }
}

/// `Y = Y⁰ + τZ + γ_g†·graph + γ_b†·budget + λ†·lag + ε`, for observed cells.
pub fn simulate_outcomes(
    panel: &Panel,
    exposure: &ExposurePanel,
    theta: &MechanismPoint,
    calib: &CalibrationScales,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    if exposure.n_cells() != panel.n_cells() {
        return Err(Error::InvalidInput("exposure panel does not cover the panel".into()));
    }
    let s = outcome_strengths(theta, calib);
    let noise = if calib.sigma_eps > 0.0 {
        Some(
            Normal::new(0.0, calib.sigma_eps)
                .map_err(|e| Error::Calibration(e.to_string()))?,
        )
    } else {
        None
    };
    let mut rng = rng_from_seed(seed);
    let direct = exposure.direct();
    let budget = exposure.budget_share();
    let graph = exposure.graph_share();
    let lag = exposure.lag();
    Ok(panel
        .baseline_cells()
        .iter()
        .enumerate()
        .map(|(i, y0)| {
            y0.map(|y0| {
                let eps = noise.map_or(0.0, |n| n.sample(&mut rng));
                y0 + calib.tau * direct[i] as f64
                    + s.gamma_g_dagger * graph[i]
                    + s.gamma_b_dagger * budget[i]
                    + s.lambda_dagger * lag[i] as f64
                    + eps
            })
        })
        .collect())
}

/// Sample variance of assignment-unit mean outcomes.
pub fn variance_component(outcomes: &[Option<f64>], assignment: &AssignmentTable) -> Result<f64> {
    if outcomes.len() != assignment.labels().len() {
        return Err(Error::InvalidInput("outcomes do not match the assignment table".into()));
    }
    let k = assignment.n_assignment_units();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (y, &l) in outcomes.iter().zip(assignment.labels()) {
        if let Some(y) = y {
            sums[l as usize] += y;
            counts[l as usize] += 1;
        }
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| s / c as f64)
        .collect();
    if means.len() < 2 {
        return Err(Error::Planning(format!(
            "variance needs at least 2 observed assignment units, got {}",
            means.len()
        )));
    }
    let n = means.len() as f64;
    let grand = means.iter().sum::<f64>() / n;
    Ok(means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Standard-normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    StdNormal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(p)
}

/// `(z_{1−α/2} + z_{1−β}) · sqrt(2V/N)`.
pub fn mde(v: f64, n_units: usize, weights: &PlanningWeights) -> Result<f64> {
    if n_units < 2 {
        return Err(Error::Planning(format!(
            "insufficient assignment units: N = {n_units}"
        )));
    }
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::InvalidInput(format!("variance must be non-negative, got {v}")));
    }
    let z = normal_quantile(1.0 - weights.alpha / 2.0) + normal_quantile(1.0 - weights.beta);
    Ok(z * (2.0 * v / n_units as f64).sqrt())
}

/// Support-stress penalty `1 − ess` (zero without propensities).
pub fn support_stress(ess: Option<f64>) -> f64 {
    ess.map_or(0.0, |e| (1.0 - e).max(0.0))
}

/// Control-arm spillover exposure and treatment switching, averaged with the
/// mechanism's channel intensities, plus support stress.
pub fn contamination(exposure: &ExposurePanel, theta: &MechanismPoint, ess: Option<f64>) -> f64 {
    let stress = support_stress(ess);
    let total = theta.intensity();
    if total == 0.0 {
        return stress;
    }
    let direct = exposure.direct();
    let (mut graph, mut budget, mut controls) = (0.0, 0.0, 0usize);
    for (i, &z) in direct.iter().enumerate() {
        if z == 0 {
            graph += exposure.graph_share()[i];
            budget += exposure.budget_share()[i];
            controls += 1;
        }
    }
    if controls == 0 {
        return stress;
    }
    let periods = exposure.periods();
    let (mut switches, mut transitions) = (0usize, 0usize);
    if periods > 1 {
        for row in direct.chunks(periods) {
            for w in row.windows(2) {
                switches += usize::from(w[0] != w[1]);
                transitions += 1;
            }
        }
    }
    let switch_rate = if transitions == 0 {
        0.0
    } else {
        switches as f64 / transitions as f64
    };
    let controls = controls as f64;
    (theta.gamma_g * graph / controls
        + theta.gamma_b * budget / controls
        + theta.lambda * switch_rate)
        / total
        + stress
}

/// Weighted mean of the operational subscores.
pub fn operational_cost(inputs: &OpCostInputs) -> Result<f64> {
    inputs.validate()?;
    let num = inputs.a_h * inputs.h + inputs.a_s * inputs.s + inputs.a_r * inputs.r + inputs.a_p * inputs.p;
    let den = inputs.a_h + inputs.a_s + inputs.a_r + inputs.a_p;
    Ok(num / den)
}

/// Unweighted mean L1 gap of the four exposure coordinates to the all-ones
/// launch profile, plus support stress.
pub fn estimand_mismatch(exposure: &ExposurePanel, ess: Option<f64>) -> f64 {
    let n = exposure.n_cells();
    let mut total = 0.0;
    for i in 0..n {
        total += (1.0 - exposure.direct()[i] as f64)
            + (1.0 - exposure.budget_share()[i])
            + (1.0 - exposure.graph_share()[i])
            + (1.0 - exposure.lag()[i] as f64);
    }
    total / (4.0 * n as f64) + support_stress(ess)
}

/// Treated-minus-control difference in means over observed cells. When one
/// arm is empty its mean is replaced by the baseline mean of the other arm's
/// cells.
pub fn difference_in_means(panel: &Panel, outcomes: &[Option<f64>], direct: &[u8]) -> f64 {
    let mut sum = [0.0f64; 2];
    let mut base = [0.0f64; 2];
    let mut count = [0usize; 2];
    for ((y, y0), &z) in outcomes.iter().zip(panel.baseline_cells()).zip(direct) {
        if let (Some(y), Some(y0)) = (y, y0) {
            let arm = z as usize;
            sum[arm] += y;
            base[arm] += y0;
            count[arm] += 1;
        }
    }
    match count {
        [0, 0] => 0.0,
        [0, t] => (sum[1] - base[1]) / t as f64,
        [c, 0] => (base[0] - sum[0]) / c as f64,
        [c, t] => sum[1] / t as f64 - sum[0] / c as f64,
    }
}

/// Everything a replication needs besides the design and mechanism.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub panel: &'a Panel,
    pub calib: &'a CalibrationScales,
    pub weights: &'a PlanningWeights,
    /// IPS effective-sample share of the log, when propensities are known.
    pub ess: Option<f64>,
}

impl<'a> EvalContext<'a> {
    pub fn new(panel: &'a Panel, calib: &'a CalibrationScales, weights: &'a PlanningWeights) -> Self {
        Self {
            panel,
            calib,
            weights,
            ess: panel.ess(),
        }
    }
}

/// Scores from one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationScores {
    pub g: f64,
    pub v: f64,
    pub m: f64,
    pub c: f64,
    pub e: f64,
    pub dim: f64,
}

pub fn replicate(
    design: &DesignSpec,
    theta: &MechanismPoint,
    ctx: &EvalContext<'_>,
    seed: u64,
) -> Result<ReplicationScores> {
    let n_eff = effective_units(
        design,
        ctx.panel,
        ctx.weights.periods_per_week,
        ctx.weights.t_weeks,
    )?;
    let assignment = replay(design, ctx.panel, substream(seed, 0))?;
    let exposure = exposure_features(&assignment, ctx.panel, theta)?;
    let outcomes = simulate_outcomes(ctx.panel, &exposure, theta, ctx.calib, substream(seed, 1))?;
    let v = variance_component(&outcomes, &assignment)?;
    Ok(ReplicationScores {
        g: geometry_score(&exposure, theta),
        v,
        m: mde(v, n_eff, ctx.weights)?,
        c: contamination(&exposure, theta, ctx.ess),
        e: estimand_mismatch(&exposure, ctx.ess),
        dim: difference_in_means(ctx.panel, &outcomes, exposure.direct()),
    })
}

/// Position of a (design, mechanism) pair in the evaluation grid; selects
/// the replication seed stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellIndex {
    pub design: usize,
    pub theta: usize,
}

/// Averages `reps` seeded replications.
pub fn component_scores(
    design: &DesignSpec,
    theta: &MechanismPoint,
    ctx: &EvalContext<'_>,
    reps: usize,
    seeds: &SeedSchedule,
    cell: CellIndex,
) -> Result<ComponentScores> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    let runs = (0..reps)
        .map(|r| replicate(design, theta, ctx, seeds.replication(cell.design, cell.theta, r)))
        .collect::<Result<Vec<_>>>()?;
    let o = operational_cost(&design.op_cost)?;
    let n = reps as f64;
    let mean = |f: fn(&ReplicationScores) -> f64| runs.iter().map(f).sum::<f64>() / n;
    let se = |f: fn(&ReplicationScores) -> f64, m: f64| {
        if reps < 2 {
            0.0
        } else {
            let ss: f64 = runs.iter().map(|r| (f(r) - m).powi(2)).sum();
            (ss / (n - 1.0) / n).sqrt()
        }
    };
    let (g, v, m, c, e) = (
        mean(|r| r.g),
        mean(|r| r.v),
        mean(|r| r.m),
        mean(|r| r.c),
        mean(|r| r.e),
    );
    let dim = mean(|r| r.dim);
    Ok(ComponentScores {
        g,
        v,
        m,
        c,
        o,
        e,
        reps,
        bias_est: dim - launch_effect(theta, ctx.calib),
        std_err: [
            se(|r| r.g, g),
            se(|r| r.v, v),
            se(|r| r.m, m),
            se(|r| r.c, c),
            0.0,
            se(|r| r.e, e),
        ],
    })
}
