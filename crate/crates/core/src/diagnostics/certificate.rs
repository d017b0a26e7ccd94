//! Selector certificate under bounded component-wise perturbations, and the
//! dominance audit on constructed surfaces.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::risk::{ComponentVector, PlanningWeights};
use crate::rng::rng_from_seed;
use crate::selector::{
    dominance_audit, robust_select, weight_witness_search, weighted_risk, EpsilonRule, RiskSurface,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub trials: usize,
    /// Trials whose selection had true excess risk within 2ε_T.
    pub excess_ok: usize,
    /// Trials with true separation margin above 2ε_T.
    pub separated: usize,
    /// Separated trials where the selection was truly optimal.
    pub recovered: usize,
    /// Trials whose 2ε_T shortlist held a truly optimal design.
    pub covered: usize,
    pub pass: bool,
}

/// Random true surfaces in [0, 1]⁶ perturbed by at most ε_k per component;
/// ε_T is the weighted sum of the ε_k.
pub fn selector_certificate(trials: usize, seed: u64, weights: &PlanningWeights) -> Result<CertificateReport> {
    let mut rng = rng_from_seed(seed);
    let w = weights.vector();
    let (mut excess_ok, mut separated, mut recovered, mut covered) = (0, 0, 0, 0);
    for _ in 0..trials {
        let nd = rng.random_range(2..=6);
        let nt = rng.random_range(1..=9);
        // small budgets in some trials so the separated case is exercised
        let scale = if rng.random::<bool>() { 0.1 } else { 0.01 };
        let eps: ComponentVector = std::array::from_fn(|_| rng.random_range(0.0..scale));
        let truth: Vec<ComponentVector> = (0..nd * nt)
            .map(|_| std::array::from_fn(|_| rng.random::<f64>()))
            .collect();
        let est: Vec<ComponentVector> = truth
            .iter()
            .map(|x| std::array::from_fn(|k| x[k] + eps[k] * rng.random_range(-1.0..=1.0)))
            .collect();
        let eps_t = weighted_risk(&eps, &w);
        let t = robust_select(&RiskSurface::from_normalized(nd, nt, truth, weights)?, &EpsilonRule::Absolute { value: 0.0 })?;
        let e = robust_select(&RiskSurface::from_normalized(nd, nt, est, weights)?, &EpsilonRule::Absolute { value: eps_t })?;
        let q_star = t.q[t.selected];
        let optimal: Vec<usize> = (0..nd).filter(|&d| t.q[d] == q_star).collect();
        if t.q[e.selected] - q_star <= 2.0 * eps_t + 1e-12 {
            excess_ok += 1;
        }
        let margin = (0..nd)
            .filter(|d| !optimal.contains(d))
            .map(|d| t.q[d] - q_star)
            .fold(f64::INFINITY, f64::min);
        if margin > 2.0 * eps_t {
            separated += 1;
            if optimal.contains(&e.selected) {
                recovered += 1;
            }
        }
        if optimal.iter().any(|d| e.shortlist.contains(d)) {
            covered += 1;
        }
    }
    Ok(CertificateReport {
        trials,
        excess_ok,
        separated,
        recovered,
        covered,
        pass: excess_ok == trials && recovered == separated && covered == trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub crossing_audit: Option<usize>,
    pub crossing_winners: Vec<usize>,
    pub dominating_audit: Option<usize>,
    /// Index of the constructed dominator.
    pub dominator: usize,
    pub pass: bool,
}

/// Audit on two fixtures: three designs whose components cross, and the same
/// surface with one design lowered to the component-wise minimum.
pub fn dominance_check(trials: usize, seed: u64) -> Result<DominanceReport> {
    let weights = PlanningWeights::default();
    let crossing_cells: Vec<ComponentVector> = vec![
        [0.1, 0.9, 0.5, 0.2, 0.1, 0.6],
        [0.2, 0.8, 0.6, 0.3, 0.2, 0.5],
        [0.9, 0.1, 0.2, 0.7, 0.4, 0.3],
        [0.8, 0.2, 0.1, 0.6, 0.4, 0.2],
        [0.5, 0.5, 0.9, 0.1, 0.8, 0.9],
        [0.4, 0.6, 0.8, 0.1, 0.8, 0.8],
    ];
    let crossing = RiskSurface::from_normalized(3, 2, crossing_cells.clone(), &weights)?;
    let crossing_audit = dominance_audit(&crossing)?;
    let crossing_winners = weight_witness_search(&crossing, trials, seed)?;

    let dominator = 1;
    let mut cells = crossing_cells;
    for t in 0..2 {
        let min: ComponentVector = std::array::from_fn(|k| (0..3).map(|d| cells[d * 2 + t][k]).fold(f64::INFINITY, f64::min));
        cells[dominator * 2 + t] = min;
    }
    let dominating_audit = dominance_audit(&RiskSurface::from_normalized(3, 2, cells, &weights)?)?;
    Ok(DominanceReport {
        pass: crossing_audit.is_none() && crossing_winners.len() >= 2 && dominating_audit == Some(dominator),
        crossing_audit,
        crossing_winners,
        dominating_audit,
        dominator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certificate_holds_over_200_trials() {
        let r = selector_certificate(200, 3, &PlanningWeights::default()).unwrap();
        assert_eq!(r.trials, 200);
        assert!(r.separated > 0);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn dominance_fixtures() {
        let r = dominance_check(1000, 1).unwrap();
        assert_eq!(r.crossing_audit, None);
        assert!(r.crossing_winners.len() >= 2);
        assert_eq!(r.dominating_audit, Some(1));
        assert!(r.pass);
    }
}
