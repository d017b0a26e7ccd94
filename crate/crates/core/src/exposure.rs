//! Exposure features and exposure geometry.
//!
//! Each cell gets four coordinates: direct treatment, the treated share of
//! its budget pool, the treated share of its locality neighborhood, and the
//! unit's previous-period treatment. Shares include the unit itself. At the
//! first period the lag equals the current treatment, so carryover adds no
//! penalty there. The full-launch profile is all ones.

use crate::designs::AssignmentTable;
use crate::error::{Error, Result};
use crate::mechanisms::{Locality, MechanismPoint};
use crate::panel::{Grouping, Panel};

#[derive(Debug, Clone, PartialEq)]
pub struct ExposurePanel {
    periods: usize,
    direct: Vec<u8>,
    budget_share: Vec<f64>,
    graph_share: Vec<f64>,
    lag: Vec<u8>,
}

impl ExposurePanel {
    /// Builds an exposure panel from explicit coordinates (unit-major cells).
    pub fn from_parts(
        periods: usize,
        direct: Vec<u8>,
        budget_share: Vec<f64>,
        graph_share: Vec<f64>,
        lag: Vec<u8>,
    ) -> Result<Self> {
        let n = direct.len();
        if periods == 0
            || !n.is_multiple_of(periods)
            || budget_share.len() != n
            || graph_share.len() != n
            || lag.len() != n
        {
            return Err(Error::InvalidInput("exposure panel shape mismatch".into()));
        }
        let share_ok = |s: &f64| (0.0..=1.0).contains(s);
        if !budget_share.iter().all(share_ok) || !graph_share.iter().all(share_ok) {
            return Err(Error::InvalidInput("exposure shares must lie in [0, 1]".into()));
        }
        if direct.iter().chain(&lag).any(|&v| v > 1) {
            return Err(Error::InvalidInput("direct and lag must be 0 or 1".into()));
        }
        Ok(Self {
            periods,
            direct,
            budget_share,
            graph_share,
            lag,
        })
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn n_cells(&self) -> usize {
        self.direct.len()
    }

    pub fn direct(&self) -> &[u8] {
        &self.direct
    }

    pub fn budget_share(&self) -> &[f64] {
        &self.budget_share
    }

    pub fn graph_share(&self) -> &[f64] {
        &self.graph_share
    }

    pub fn lag(&self) -> &[u8] {
        &self.lag
    }
}

fn grouping_for(panel: &Panel, locality: Locality) -> &Grouping {
    match locality {
        Locality::Cluster => panel.clusters(),
        Locality::Budget => panel.budgets(),
        Locality::Region => panel.regions(),
    }
}

/// Per-cell treated share of each unit's group, period by period.
fn group_shares(z: &[u8], periods: usize, grouping: &Grouping) -> Vec<f64> {
    let n_groups = grouping.count();
    let n_units = z.len() / periods;
    let mut treated = vec![0u32; n_groups * periods];
    for u in 0..n_units {
        let g = grouping.group_of(u);
        let row = &z[u * periods..(u + 1) * periods];
        let acc = &mut treated[g * periods..(g + 1) * periods];
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v as u32;
        }
    }
    let mut shares = vec![0.0; z.len()];
    for u in 0..n_units {
        let g = grouping.group_of(u);
        let size = grouping.size(g) as f64;
        for t in 0..periods {
            shares[u * periods + t] = treated[g * periods + t] as f64 / size;
        }
    }
    shares
}

pub fn exposure_features(
    assignment: &AssignmentTable,
    panel: &Panel,
    theta: &MechanismPoint,
) -> Result<ExposurePanel> {
    let periods = panel.periods();
    if assignment.periods() != periods || assignment.z().len() != panel.n_cells() {
        return Err(Error::InvalidInput(
            "assignment table does not cover the panel".into(),
        ));
    }
    let z = assignment.z();
    let budget_share = group_shares(z, periods, panel.budgets());
    let graph_share = if theta.locality == Locality::Budget {
        budget_share.clone()
    } else {
        group_shares(z, periods, grouping_for(panel, theta.locality))
    };
    let mut lag = vec![0u8; z.len()];
    for (cell, l) in lag.iter_mut().enumerate() {
        *l = if cell % periods == 0 { z[cell] } else { z[cell - 1] };
    }
    Ok(ExposurePanel {
        periods,
        direct: z.to_vec(),
        budget_share,
        graph_share,
        lag,
    })
}

/// Paired L1 exposure-distance proxy to the full-launch profile, normalized by
/// `1 + γ_g + γ_b + λ`.
pub fn geometry_score(exposure: &ExposurePanel, theta: &MechanismPoint) -> f64 {
    let n = exposure.n_cells();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        total += (1.0 - exposure.direct[i] as f64)
            + theta.gamma_b * (1.0 - exposure.budget_share[i])
            + theta.gamma_g * (1.0 - exposure.graph_share[i])
            + theta.lambda * (1.0 - exposure.lag[i] as f64);
    }
    total / n as f64 / (1.0 + theta.intensity())
}

/// Exact Wasserstein-1 distance between two equal-size empirical samples on
/// the line: mean absolute difference of the sorted samples.
pub fn wasserstein1_1d(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::InvalidInput("wasserstein1_1d of an empty sample".into()));
    }
    if p.len() != q.len() {
        return Err(Error::InvalidInput(format!(
            "wasserstein1_1d needs equal sample sizes, got {} and {}",
            p.len(),
            q.len()
        )));
    }
    if p.iter().chain(q).any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("wasserstein1_1d of non-finite values".into()));
    }
    let mut a = p.to_vec();
    let mut b = q.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let sum: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{replay, DesignKind, DesignSpec};
    use crate::panel::{generate_synthetic_panel, SyntheticPanelConfig, UnitRecord};
    use proptest::prelude::*;

    fn lone_units(n: usize, periods: usize) -> Panel {
        let units = (0..n)
            .map(|i| UnitRecord {
                unit_id: format!("u{i}"),
                cluster_id: format!("c{i}"),
                budget_id: format!("b{i}"),
                region_id: format!("r{i}"),
            })
            .collect();
        Panel::new(units, periods, vec![Some(0.0); n * periods], None).unwrap()
    }

    fn shared_budget_pair() -> Panel {
        let units = (0..2)
            .map(|i| UnitRecord {
                unit_id: format!("u{i}"),
                cluster_id: format!("c{i}"),
                budget_id: "b".into(),
                region_id: format!("r{i}"),
            })
            .collect();
        Panel::new(units, 1, vec![Some(0.0); 2], None).unwrap()
    }

    #[test]
    fn full_launch_features_are_one() {
        let panel = generate_synthetic_panel(&SyntheticPanelConfig::default(), 0).unwrap();
        let d = DesignSpec {
            full_launch: true,
            ..DesignSpec::new(DesignKind::Cluster)
        };
        let a = replay(&d, &panel, 0).unwrap();
        for loc in Locality::ALL {
            let theta = MechanismPoint::new(0.3, 0.5, 0.2, loc).unwrap();
            let x = exposure_features(&a, &panel, &theta).unwrap();
            assert!(x.budget_share().iter().all(|&s| s == 1.0));
            assert!(x.graph_share().iter().all(|&s| s == 1.0));
            assert!(x.lag().iter().all(|&l| l == 1));
            assert_eq!(geometry_score(&x, &theta), 0.0);
        }
    }

    #[test]
    fn isolated_control_unit() {
        let panel = lone_units(2, 3);
        let a = AssignmentTable::from_cells(3, vec![0; 6], (0..6).map(|c| c / 3).collect()).unwrap();
        let theta = MechanismPoint::null(Locality::Cluster);
        let x = exposure_features(&a, &panel, &theta).unwrap();
        assert!(x.budget_share().iter().all(|&s| s == 0.0));
        assert!(x.graph_share().iter().all(|&s| s == 0.0));
        assert!(x.lag().iter().all(|&l| l == 0));
    }

    #[test]
    fn lag_convention_at_first_period() {
        let panel = lone_units(2, 3);
        // unit 0 switches 1 → 0 → 1
        let z = vec![1, 0, 1, 0, 0, 0];
        let a = AssignmentTable::from_cells(3, z, (0..6).collect()).unwrap();
        let x = exposure_features(&a, &panel, &MechanismPoint::null(Locality::Cluster)).unwrap();
        assert_eq!(x.lag(), &[1, 1, 0, 0, 0, 0]);
    }

    #[test]
    fn budget_share_hand_mean() {
        let panel = shared_budget_pair();
        let a = AssignmentTable::from_cells(1, vec![1, 0], vec![0, 1]).unwrap();
        let theta = MechanismPoint::new(0.0, 0.5, 0.0, Locality::Cluster).unwrap();
        let x = exposure_features(&a, &panel, &theta).unwrap();
        assert_eq!(x.budget_share(), &[0.5, 0.5]);
        // (1/1.5) · mean{0 + 0.5·0.5, 1 + 0.5·0.5}
        assert!((geometry_score(&x, &theta) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn direct_term_only() {
        let x = ExposurePanel::from_parts(1, vec![0], vec![0.0], vec![0.0], vec![0]).unwrap();
        assert_eq!(geometry_score(&x, &MechanismPoint::null(Locality::Region)), 1.0);
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein1_1d(&[0.3, 0.1], &[0.1, 0.3]).unwrap(), 0.0);
        assert_eq!(wasserstein1_1d(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(wasserstein1_1d(&[0.0], &[1.0, 2.0]).is_err());
        assert!(wasserstein1_1d(&[], &[]).is_err());
    }

    /// Minimum-cost perfect matching over all permutations.
    fn brute_force_w1(p: &[f64], q: &[f64]) -> f64 {
        fn permute(k: usize, idx: &mut Vec<usize>, p: &[f64], q: &[f64], best: &mut f64) {
            if k == idx.len() {
                let cost: f64 = idx.iter().enumerate().map(|(i, &j)| (p[i] - q[j]).abs()).sum();
                *best = best.min(cost);
                return;
            }
            for i in k..idx.len() {
                idx.swap(k, i);
                permute(k + 1, idx, p, q, best);
                idx.swap(k, i);
            }
        }
        let mut idx: Vec<usize> = (0..q.len()).collect();
        let mut best = f64::INFINITY;
        permute(0, &mut idx, p, q, &mut best);
        best / p.len() as f64
    }

    fn exposure_strategy() -> impl Strategy<Value = ExposurePanel> {
        (1usize..4, 1usize..5).prop_flat_map(|(units, periods)| {
            let n = units * periods;
            (
                prop::collection::vec(0u8..2, n),
                prop::collection::vec(0.0f64..=1.0, n),
                prop::collection::vec(0.0f64..=1.0, n),
                prop::collection::vec(0u8..2, n),
            )
                .prop_map(move |(d, b, g, l)| {
                    ExposurePanel::from_parts(periods, d, b, g, l).unwrap()
                })
        })
    }

    fn theta_strategy() -> impl Strategy<Value = MechanismPoint> {
        (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
            .prop_map(|(g, b, l)| MechanismPoint::new(g, b, l, Locality::Cluster).unwrap())
    }

    proptest! {
        #[test]
        fn w1_matches_matching_oracle(
            pairs in (1usize..=6).prop_flat_map(|n| (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(-5.0f64..5.0, n),
            ))
        ) {
            let (p, q) = pairs;
            let fast = wasserstein1_1d(&p, &q).unwrap();
            prop_assert!((fast - brute_force_w1(&p, &q)).abs() < 1e-12);
            prop_assert!((fast - wasserstein1_1d(&q, &p).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn w1_translation_and_triangle(
            p in prop::collection::vec(-3.0f64..3.0, 5),
            q in prop::collection::vec(-3.0f64..3.0, 5),
            r in prop::collection::vec(-3.0f64..3.0, 5),
            c in -2.0f64..2.0,
        ) {
            let shifted: Vec<f64> = p.iter().map(|x| x + c).collect();
            prop_assert!((wasserstein1_1d(&p, &shifted).unwrap() - c.abs()).abs() < 1e-12);
            let pq = wasserstein1_1d(&p, &q).unwrap();
            let qr = wasserstein1_1d(&q, &r).unwrap();
            let pr = wasserstein1_1d(&p, &r).unwrap();
            prop_assert!(pr <= pq + qr + 1e-12);
        }

        #[test]
        fn geometry_matches_independent_recomputation(x in exposure_strategy(), theta in theta_strategy()) {
            let n = x.n_cells() as f64;
            let direct: f64 = x.direct().iter().map(|&d| (1 - d) as f64).sum::<f64>() / n;
            let budget: f64 = x.budget_share().iter().map(|s| 1.0 - s).sum::<f64>() / n;
            let graph: f64 = x.graph_share().iter().map(|s| 1.0 - s).sum::<f64>() / n;
            let lag: f64 = x.lag().iter().map(|&l| (1 - l) as f64).sum::<f64>() / n;
            let expected = (direct + theta.gamma_b * budget + theta.gamma_g * graph + theta.lambda * lag)
                / (1.0 + theta.gamma_g + theta.gamma_b + theta.lambda);
            prop_assert!((geometry_score(&x, &theta) - expected).abs() < 1e-12);
        }

        #[test]
        fn geometry_decreases_toward_launch(x in exposure_strategy(), theta in theta_strategy(), step in 0.0f64..=1.0) {
            let toward = ExposurePanel::from_parts(
                x.periods(),
                x.direct().to_vec(),
                x.budget_share().iter().map(|s| s + step * (1.0 - s)).collect(),
                x.graph_share().iter().map(|s| s + step * (1.0 - s)).collect(),
                x.lag().iter().map(|_| 1).collect(),
            ).unwrap();
            prop_assert!(geometry_score(&toward, &theta) <= geometry_score(&x, &theta) + 1e-12);
        }
    }
}
