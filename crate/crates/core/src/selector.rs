//! Normalized risk surface, minimax selection and the audits around it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::{ComponentScores, ComponentVector, PlanningWeights};
use crate::rng::rng_from_seed;

/// Per-component scale so every normalized value lies in [-1, 1]. A
/// component whose max |x| is 0 keeps scale 0 and normalizes to 0.
pub fn normalization_scale(values: &[ComponentVector]) -> ComponentVector {
    let mut scale = [0.0; 6];
    for x in values {
        for k in 0..6 {
            scale[k] = f64::max(scale[k], x[k].abs());
        }
    }
    scale
}

pub fn normalize(values: &[ComponentVector]) -> Vec<ComponentVector> {
    let scale = normalization_scale(values);
    values.iter().map(|x| apply_scale(x, &scale)).collect()
}

fn apply_scale(x: &ComponentVector, scale: &ComponentVector) -> ComponentVector {
    let mut out = [0.0; 6];
    for k in 0..6 {
        out[k] = if scale[k] == 0.0 { 0.0 } else { x[k] / scale[k] };
    }
    out
}

pub fn weighted_risk(normalized: &ComponentVector, weights: &ComponentVector) -> f64 {
    normalized.iter().zip(weights).map(|(x, w)| x * w).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceEntry {
    pub raw: ComponentScores,
    pub normalized: ComponentVector,
    pub risk: f64,
}

/// Risk for every evaluated (design, mechanism) cell, stored design-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskSurface {
    n_designs: usize,
    n_thetas: usize,
    weights: ComponentVector,
    scale: ComponentVector,
    entries: Vec<Option<SurfaceEntry>>,
}

impl RiskSurface {
    /// Normalizes the present raw cells jointly and aggregates them with
    /// `weights`. `raw` is design-major with `n_designs * n_thetas` slots.
    pub fn build(
        n_designs: usize,
        n_thetas: usize,
        raw: Vec<Option<ComponentScores>>,
        weights: &PlanningWeights,
    ) -> Result<Self> {
        check_shape(n_designs, n_thetas, raw.len())?;
        let present: Vec<ComponentVector> = raw.iter().flatten().map(|s| s.as_vector()).collect();
        if present.is_empty() {
            return Err(Error::Surface("risk surface has no evaluated cells".into()));
        }
        let scale = normalization_scale(&present);
        let w = weights.vector();
        let entries = raw
            .into_iter()
            .map(|cell| {
                cell.map(|raw| {
                    let normalized = apply_scale(&raw.as_vector(), &scale);
                    SurfaceEntry {
                        raw,
                        normalized,
                        risk: weighted_risk(&normalized, &w),
                    }
                })
            })
            .collect();
        Ok(Self {
            n_designs,
            n_thetas,
            weights: w,
            scale,
            entries,
        })
    }

    /// Surface whose normalized components are given directly, skipping
    /// normalization. Used for synthetic surfaces.
    pub fn from_normalized(
        n_designs: usize,
        n_thetas: usize,
        normalized: Vec<ComponentVector>,
        weights: &PlanningWeights,
    ) -> Result<Self> {
        check_shape(n_designs, n_thetas, normalized.len())?;
        if normalized.is_empty() {
            return Err(Error::Surface("risk surface has no evaluated cells".into()));
        }
        let w = weights.vector();
        let entries = normalized
            .into_iter()
            .map(|x| {
                Some(SurfaceEntry {
                    raw: ComponentScores::from_vector(x),
                    normalized: x,
                    risk: weighted_risk(&x, &w),
                })
            })
            .collect();
        Ok(Self {
            n_designs,
            n_thetas,
            weights: w,
            scale: [1.0; 6],
            entries,
        })
    }

    pub fn n_designs(&self) -> usize {
        self.n_designs
    }

    pub fn n_thetas(&self) -> usize {
        self.n_thetas
    }

    pub fn weights(&self) -> &ComponentVector {
        &self.weights
    }

    /// Max |x| per component used for normalization.
    pub fn scale(&self) -> &ComponentVector {
        &self.scale
    }

    pub fn entry(&self, design: usize, theta: usize) -> Option<&SurfaceEntry> {
        self.entries
            .get(design * self.n_thetas + theta)
            .and_then(Option::as_ref)
    }

    pub fn risk(&self, design: usize, theta: usize) -> Option<f64> {
        self.entry(design, theta).map(|e| e.risk)
    }

    fn complete_entry(&self, design: usize, theta: usize) -> Result<&SurfaceEntry> {
        self.entry(design, theta).ok_or_else(|| {
            Error::Surface(format!(
                "missing risk cell for design {design} at grid point {theta}"
            ))
        })
    }
}

fn check_shape(n_designs: usize, n_thetas: usize, len: usize) -> Result<()> {
    if n_designs == 0 || n_thetas == 0 {
        return Err(Error::Surface("risk surface needs at least one design and grid point".into()));
    }
    if n_designs * n_thetas != len {
        return Err(Error::Surface(format!(
            "expected {} cells for {n_designs} designs x {n_thetas} grid points, got {len}",
            n_designs * n_thetas
        )));
    }
    Ok(())
}

/// How the planning-error budget ε_T is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsilonRule {
    /// Fraction of the selected design's worst-case risk.
    Fraction { fraction: f64 },
    /// Fixed budget on the risk scale.
    Absolute { value: f64 },
    /// Weighted sum of per-component error budgets, each `multiplier` times
    /// the largest normalized replication standard error of that component.
    ReplicationSe { multiplier: f64 },
}

impl Default for EpsilonRule {
    fn default() -> Self {
        EpsilonRule::Fraction { fraction: 0.10 }
    }
}

impl EpsilonRule {
    pub fn validate(&self) -> Result<()> {
        let (field, v) = match *self {
            EpsilonRule::Fraction { fraction } => ("selector.fraction", fraction),
            EpsilonRule::Absolute { value } => ("selector.value", value),
            EpsilonRule::ReplicationSe { multiplier } => ("selector.multiplier", multiplier),
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::config(field, "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Per-component error budgets from replication standard errors.
pub fn replication_error_budgets(surface: &RiskSurface, multiplier: f64) -> ComponentVector {
    let mut eps = [0.0; 6];
    for e in surface.entries.iter().flatten() {
        let se = apply_scale(&e.raw.std_err, &surface.scale);
        for k in 0..6 {
            eps[k] = f64::max(eps[k], multiplier * se[k]);
        }
    }
    eps
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustDecision {
    /// Worst-case risk per design.
    pub q: Vec<f64>,
    pub selected: usize,
    pub epsilon_t: f64,
    /// Designs within 2ε_T of the selected one, in catalog order.
    pub shortlist: Vec<usize>,
    /// Grid point attaining each design's worst case.
    pub worst_theta: Vec<usize>,
    /// Second-best worst-case risk minus the best; 0 with a single design.
    pub separation_margin: f64,
}

pub fn robust_select(surface: &RiskSurface, rule: &EpsilonRule) -> Result<RobustDecision> {
    rule.validate()?;
    let mut q = Vec::with_capacity(surface.n_designs);
    let mut worst_theta = Vec::with_capacity(surface.n_designs);
    for d in 0..surface.n_designs {
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
        for t in 0..surface.n_thetas {
            let r = surface.complete_entry(d, t)?.risk;
            if r > best {
                best = r;
                arg = t;
            }
        }
        q.push(best);
        worst_theta.push(arg);
    }
    let mut selected = 0;
    for d in 1..q.len() {
        if q[d] < q[selected] {
            selected = d;
        }
    }
    let q_sel = q[selected];
    let epsilon_t = match *rule {
        EpsilonRule::Fraction { fraction } => fraction * q_sel,
        EpsilonRule::Absolute { value } => value,
        EpsilonRule::ReplicationSe { multiplier } => {
            let eps = replication_error_budgets(surface, multiplier);
            weighted_risk(&eps, &surface.weights)
        }
    };
    let shortlist = (0..q.len())
        .filter(|&d| q[d] <= q_sel + 2.0 * epsilon_t)
        .collect();
    let separation_margin = q
        .iter()
        .enumerate()
        .filter(|&(d, _)| d != selected)
        .map(|(_, v)| v - q_sel)
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.min(x))))
        .unwrap_or(0.0);
    Ok(RobustDecision {
        q,
        selected,
        epsilon_t,
        shortlist,
        worst_theta,
        separation_margin,
    })
}

/// Raw component vector of every cell, or an error on a missing cell.
fn raw_grid(surface: &RiskSurface) -> Result<Vec<ComponentVector>> {
    let mut out = Vec::with_capacity(surface.entries.len());
    for d in 0..surface.n_designs {
        for t in 0..surface.n_thetas {
            out.push(surface.complete_entry(d, t)?.raw.as_vector());
        }
    }
    Ok(out)
}

/// A design that is no worse than every other design on every raw
/// component at every grid point, if one exists. Such a design minimizes
/// the risk for any non-negative weights.
pub fn dominance_audit(surface: &RiskSurface) -> Result<Option<usize>> {
    let raw = raw_grid(surface)?;
    let nt = surface.n_thetas;
    let dominates = |a: usize, b: usize| {
        (0..nt).all(|t| {
            let (xa, xb) = (&raw[a * nt + t], &raw[b * nt + t]);
            (0..6).all(|k| xa[k] <= xb[k])
        })
    };
    Ok((0..surface.n_designs)
        .find(|&a| (0..surface.n_designs).all(|b| b == a || dominates(a, b))))
}

/// Distinct minimizers of `w·x(d, θ)` across random non-negative weight
/// vectors and grid points. Two or more winners witness that no design is
/// uniformly best.
pub fn weight_witness_search(surface: &RiskSurface, trials: usize, seed: u64) -> Result<Vec<usize>> {
    let raw = raw_grid(surface)?;
    let nt = surface.n_thetas;
    let mut rng = rng_from_seed(seed);
    let mut winners = Vec::new();
    for _ in 0..trials {
        let w: ComponentVector = std::array::from_fn(|_| rng.random::<f64>());
        let t = rng.random_range(0..nt);
        let mut best = 0;
        let mut best_risk = f64::INFINITY;
        for d in 0..surface.n_designs {
            let r = weighted_risk(&raw[d * nt + t], &w);
            if r < best_risk {
                best_risk = r;
                best = d;
            }
        }
        if !winners.contains(&best) {
            winners.push(best);
        }
    }
    winners.sort_unstable();
    Ok(winners)
}

/// Interference intensity beyond which the lower-geometry design `d2`
/// overtakes `d1`: the weighted non-geometry gap `Σ_{k≠g} w_k (d2_k − d1_k)`
/// over `w_g (g1 − g2)`. The geometry slot of the component vectors is
/// ignored.
pub fn regime_threshold(
    d1: &ComponentVector,
    d2: &ComponentVector,
    g1: f64,
    g2: f64,
    weights: &PlanningWeights,
) -> Result<f64> {
    let w = weights.vector();
    let denom = w[0] * (g1 - g2);
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "regime threshold needs w_g > 0 and g1 > g2, got w_g = {}, g1 = {g1}, g2 = {g2}",
            w[0]
        )));
    }
    let gap: f64 = (1..6).map(|k| w[k] * (d2[k] - d1[k])).sum();
    Ok(gap / denom)
}
