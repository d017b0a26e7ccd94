//! The six-design catalog and its assignment rules.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Panel;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    User,
    Cluster,
    Switchback,
    BudgetSplit,
    TwoStage,
    Mixed,
}

impl DesignKind {
    pub const ALL: [DesignKind; 6] = [
        DesignKind::User,
        DesignKind::Cluster,
        DesignKind::Switchback,
        DesignKind::BudgetSplit,
        DesignKind::TwoStage,
        DesignKind::Mixed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DesignKind::User => "user",
            DesignKind::Cluster => "cluster",
            DesignKind::Switchback => "switchback",
            DesignKind::BudgetSplit => "budget_split",
            DesignKind::TwoStage => "two_stage",
            DesignKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordinal operational-cost subscores and their weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpCostInputs {
    /// engineering effort
    pub h: f64,
    /// orchestration complexity
    pub s: f64,
    /// rollback / failure-mode risk
    pub r: f64,
    /// platform-integration burden
    pub p: f64,
    #[serde(default = "unit_weight")]
    pub a_h: f64,
    #[serde(default = "unit_weight")]
    pub a_s: f64,
    #[serde(default = "unit_weight")]
    pub a_r: f64,
    #[serde(default = "unit_weight")]
    pub a_p: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl OpCostInputs {
    pub fn equal_weights(h: f64, s: f64, r: f64, p: f64) -> Self {
        Self {
            h,
            s,
            r,
            p,
            a_h: 1.0,
            a_s: 1.0,
            a_r: 1.0,
            a_p: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("h", self.h), ("s", self.s), ("r", self.r), ("p", self.p)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "op-cost subscore {name} must lie in [0, 1], got {v}"
                )));
            }
        }
        let weights = [self.a_h, self.a_s, self.a_r, self.a_p];
        if weights.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidInput("op-cost weights must be non-negative".into()));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidInput("op-cost weights sum to zero".into()));
        }
        Ok(())
    }

    /// Preset subscores: 0.10 for user-level randomization, 0.40 for
    /// designs needing blocking or scheduling, 0.80 for new allocation rules
    /// or multi-axis orchestration.
    pub fn preset(kind: DesignKind) -> Self {
        match kind {
            DesignKind::User => Self::equal_weights(0.05, 0.10, 0.15, 0.10),
            DesignKind::Cluster => Self::equal_weights(0.40, 0.45, 0.35, 0.40),
            DesignKind::Switchback => Self::equal_weights(0.35, 0.50, 0.40, 0.35),
            DesignKind::BudgetSplit => Self::equal_weights(0.85, 0.80, 0.75, 0.80),
            DesignKind::TwoStage => Self::equal_weights(0.80, 0.85, 0.75, 0.80),
            DesignKind::Mixed => Self::equal_weights(0.85, 0.90, 0.70, 0.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: DesignKind,
    /// Display name; defaults to the kind.
    pub label: Option<String>,
    pub treat_prob: f64,
    pub block_length: usize,
    pub saturation_levels: Vec<f64>,
    pub mixture_prob: f64,
    /// Full-launch benchmark: every cell treated.
    pub full_launch: bool,
    pub op_cost: OpCostInputs,
}

impl DesignSpec {
    pub fn new(kind: DesignKind) -> Self {
        Self {
            kind,
            label: None,
            treat_prob: 0.5,
            block_length: 1,
            saturation_levels: vec![0.25, 0.75],
            mixture_prob: 0.5,
            full_launch: false,
            op_cost: OpCostInputs::preset(kind),
        }
    }

    pub fn name(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.kind.as_str().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.treat_prob > 0.0 && self.treat_prob < 1.0) {
            return Err(Error::InvalidInput(format!(
                "{}: treat_prob must lie in (0, 1), got {}",
                self.name(),
                self.treat_prob
            )));
        }
        if self.block_length == 0 {
            return Err(Error::InvalidInput(format!(
                "{}: block_length must be at least 1",
                self.name()
            )));
        }
        if self.saturation_levels.is_empty()
            || self.saturation_levels.iter().any(|s| !(0.0..=1.0).contains(s))
        {
            return Err(Error::InvalidInput(format!(
                "{}: saturation_levels must be non-empty and within [0, 1]",
                self.name()
            )));
        }
        if !(0.0..=1.0).contains(&self.mixture_prob) {
            return Err(Error::InvalidInput(format!(
                "{}: mixture_prob must lie in [0, 1]",
                self.name()
            )));
        }
        self.op_cost.validate()
    }
}

pub fn default_catalog() -> Vec<DesignSpec> {
    DesignKind::ALL.into_iter().map(DesignSpec::new).collect()
}

/// Replayed treatment `z` per cell and the assignment unit each cell belongs
/// to. Labels are dense `0..n_labels`. Treatment may vary inside an
/// assignment unit (two-stage saturation clusters).
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentTable {
    periods: usize,
    z: Vec<u8>,
    label: Vec<u32>,
    n_labels: usize,
}

impl AssignmentTable {
    /// Builds a table from raw per-cell labels, compacting them to `0..k` in
    /// order of first appearance.
    pub fn from_cells(periods: usize, z: Vec<u8>, raw_labels: Vec<u64>) -> Result<Self> {
        if z.len() != raw_labels.len() || periods == 0 || !z.len().is_multiple_of(periods) {
            return Err(Error::InvalidInput("assignment table shape mismatch".into()));
        }
        let mut map: HashMap<u64, u32> = HashMap::new();
        let mut label = Vec::with_capacity(raw_labels.len());
        for raw in raw_labels {
            let next = map.len() as u32;
            let l = *map.entry(raw).or_insert(next);
            label.push(l);
        }
        Ok(Self {
            periods,
            z,
            label,
            n_labels: map.len(),
        })
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn z(&self) -> &[u8] {
        &self.z
    }

    pub fn labels(&self) -> &[u32] {
        &self.label
    }

    pub fn n_assignment_units(&self) -> usize {
        self.n_labels
    }

    pub fn treated_fraction(&self) -> f64 {
        self.z.iter().map(|&z| z as f64).sum::<f64>() / self.z.len() as f64
    }
}

fn draw(rng: &mut impl Rng, p: f64) -> u8 {
    u8::from(rng.random::<f64>() < p)
}

/// Replays the assignment rule of `design` on `panel`. Deterministic in `seed`.
pub fn replay(design: &DesignSpec, panel: &Panel, seed: u64) -> Result<AssignmentTable> {
    design.validate()?;
    let mut rng = rng_from_seed(seed);
    let n = panel.n_units();
    let t_len = panel.periods();
    let p = design.treat_prob;
    let launch = design.full_launch;
    let pick = |rng: &mut rand_chacha::ChaCha8Rng, prob: f64| {
        if launch {
            1
        } else {
            draw(rng, prob)
        }
    };

    let mut z = vec![0u8; n * t_len];
    let mut labels = vec![0u64; n * t_len];
    let fill_unit = |z: &mut [u8], labels: &mut [u64], unit: usize, value: u8, label: u64| {
        for t in 0..t_len {
            z[unit * t_len + t] = value;
            labels[unit * t_len + t] = label;
        }
    };

    match design.kind {
        DesignKind::User => {
            for u in 0..n {
                let v = pick(&mut rng, p);
                fill_unit(&mut z, &mut labels, u, v, u as u64);
            }
        }
        DesignKind::Cluster | DesignKind::BudgetSplit => {
            let grouping = if design.kind == DesignKind::Cluster {
                panel.clusters()
            } else {
                panel.budgets()
            };
            let draws: Vec<u8> = (0..grouping.count()).map(|_| pick(&mut rng, p)).collect();
            for u in 0..n {
                let g = grouping.group_of(u);
                fill_unit(&mut z, &mut labels, u, draws[g], g as u64);
            }
        }
        DesignKind::Switchback => {
            let regions = panel.regions();
            let blocks = t_len.div_ceil(design.block_length);
            let draws: Vec<u8> = (0..regions.count() * blocks)
                .map(|_| pick(&mut rng, p))
                .collect();
            for u in 0..n {
                let r = regions.group_of(u);
                for t in 0..t_len {
                    let key = r * blocks + t / design.block_length;
                    z[u * t_len + t] = draws[key];
                    labels[u * t_len + t] = key as u64;
                }
            }
        }
        DesignKind::TwoStage => {
            let clusters = panel.clusters();
            let levels = &design.saturation_levels;
            let saturation: Vec<f64> = (0..clusters.count())
                .map(|_| levels[rng.random_range(0..levels.len())])
                .collect();
            for u in 0..n {
                let c = clusters.group_of(u);
                let v = pick(&mut rng, saturation[c]);
                fill_unit(&mut z, &mut labels, u, v, c as u64);
            }
        }
        DesignKind::Mixed => {
            let clusters = panel.clusters();
            let n_clusters = clusters.count();
            // Some(draw) when the cluster is assigned as a whole.
            let whole: Vec<Option<u8>> = (0..n_clusters)
                .map(|_| {
                    if rng.random::<f64>() < design.mixture_prob {
                        Some(pick(&mut rng, p))
                    } else {
                        None
                    }
                })
                .collect();
            for u in 0..n {
                let c = clusters.group_of(u);
                match whole[c] {
                    Some(v) => fill_unit(&mut z, &mut labels, u, v, c as u64),
                    None => {
                        let v = pick(&mut rng, p);
                        fill_unit(&mut z, &mut labels, u, v, (n_clusters + u) as u64);
                    }
                }
            }
        }
    }
    AssignmentTable::from_cells(t_len, z, labels)
}

/// Number of independent randomization draws `N_d(T)` over a planning
/// horizon of `t_weeks` weeks.
pub fn effective_units(
    design: &DesignSpec,
    panel: &Panel,
    periods_per_week: usize,
    t_weeks: usize,
) -> Result<usize> {
    let n = match design.kind {
        DesignKind::User => panel.n_units(),
        DesignKind::Cluster | DesignKind::TwoStage => panel.clusters().count(),
        DesignKind::BudgetSplit => panel.budgets().count(),
        DesignKind::Switchback => {
            panel.regions().count() * (periods_per_week * t_weeks / design.block_length.max(1))
        }
        DesignKind::Mixed => {
            let m = design.mixture_prob;
            (m * panel.clusters().count() as f64 + (1.0 - m) * panel.n_units() as f64).floor()
                as usize
        }
    };
    if n < 2 {
        return Err(Error::Planning(format!(
            "insufficient assignment units for {}: N = {n}",
            design.name()
        )));
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{generate_synthetic_panel, SyntheticPanelConfig};
    use crate::risk::operational_cost;

    fn panel() -> Panel {
        generate_synthetic_panel(
            &SyntheticPanelConfig {
                n_units: 100,
                n_clusters: 10,
                n_budget_groups: 5,
                n_regions: 2,
                t: 8,
                baseline_mean: 0.0,
                baseline_sd: 1.0,
            },
            1,
        )
        .unwrap()
    }

    #[test]
    fn full_launch_treats_everything() {
        let panel = panel();
        for kind in DesignKind::ALL {
            let d = DesignSpec {
                full_launch: true,
                ..DesignSpec::new(kind)
            };
            let a = replay(&d, &panel, 4).unwrap();
            assert!(a.z().iter().all(|&z| z == 1), "{kind}");
        }
    }

    #[test]
    fn cluster_members_share_treatment() {
        let panel = panel();
        let a = replay(&DesignSpec::new(DesignKind::Cluster), &panel, 9).unwrap();
        let t_len = panel.periods();
        for u in 0..panel.n_units() {
            for v in 0..panel.n_units() {
                if panel.clusters().group_of(u) == panel.clusters().group_of(v) {
                    for t in 0..t_len {
                        assert_eq!(a.z()[u * t_len + t], a.z()[v * t_len]);
                    }
                }
            }
        }
        assert_eq!(a.n_assignment_units(), 10);
    }

    #[test]
    fn switchback_is_constant_within_region_block() {
        let panel = panel();
        let d = DesignSpec {
            block_length: 3,
            ..DesignSpec::new(DesignKind::Switchback)
        };
        let a = replay(&d, &panel, 2).unwrap();
        let t_len = panel.periods();
        for u in 0..panel.n_units() {
            for v in 0..panel.n_units() {
                if panel.regions().group_of(u) != panel.regions().group_of(v) {
                    continue;
                }
                for t in 0..t_len {
                    let block_start = (t / 3) * 3;
                    assert_eq!(a.z()[u * t_len + t], a.z()[v * t_len + block_start]);
                }
            }
        }
        // 2 regions × ceil(8 / 3) blocks
        assert_eq!(a.n_assignment_units(), 6);
    }

    #[test]
    fn replay_is_deterministic() {
        let panel = panel();
        for d in default_catalog() {
            assert_eq!(replay(&d, &panel, 77).unwrap(), replay(&d, &panel, 77).unwrap());
        }
    }

    #[test]
    fn mixed_labels_split_by_branch() {
        let panel = panel();
        let all_cluster = DesignSpec {
            mixture_prob: 1.0,
            ..DesignSpec::new(DesignKind::Mixed)
        };
        assert_eq!(replay(&all_cluster, &panel, 3).unwrap().n_assignment_units(), 10);
        let all_unit = DesignSpec {
            mixture_prob: 0.0,
            ..DesignSpec::new(DesignKind::Mixed)
        };
        assert_eq!(replay(&all_unit, &panel, 3).unwrap().n_assignment_units(), 100);
    }

    #[test]
    fn effective_unit_rules() {
        let panel = panel();
        let user = DesignSpec::new(DesignKind::User);
        assert_eq!(effective_units(&user, &panel, 7, 2).unwrap(), 100);
        let mixed = DesignSpec::new(DesignKind::Mixed);
        assert_eq!(effective_units(&mixed, &panel, 7, 2).unwrap(), 55);
        let cluster = DesignSpec::new(DesignKind::Cluster);
        assert_eq!(effective_units(&cluster, &panel, 7, 2).unwrap(), 10);
        assert_eq!(
            effective_units(&DesignSpec::new(DesignKind::BudgetSplit), &panel, 7, 2).unwrap(),
            5
        );
    }

    #[test]
    fn switchback_effective_units_single_region() {
        let one_region = generate_synthetic_panel(
            &SyntheticPanelConfig {
                n_units: 10,
                n_clusters: 2,
                n_budget_groups: 2,
                n_regions: 1,
                t: 4,
                baseline_mean: 0.0,
                baseline_sd: 1.0,
            },
            0,
        )
        .unwrap();
        let sb = DesignSpec {
            block_length: 4,
            ..DesignSpec::new(DesignKind::Switchback)
        };
        assert_eq!(effective_units(&sb, &one_region, 20, 2).unwrap(), 10);
        let err = effective_units(&sb, &one_region, 4, 1).unwrap_err();
        assert!(err.to_string().contains("insufficient assignment units"));
    }

    #[test]
    fn effective_units_monotone_in_horizon() {
        let panel = panel();
        for d in default_catalog() {
            let counts: Vec<usize> = (1..6)
                .map(|w| effective_units(&d, &panel, 7, w).unwrap())
                .collect();
            if d.kind == DesignKind::Switchback {
                assert!(counts.windows(2).all(|w| w[0] <= w[1]));
            } else {
                assert!(counts.iter().all(|&c| c == counts[0]));
            }
        }
    }

    #[test]
    fn preset_costs() {
        let cost = |k| operational_cost(&OpCostInputs::preset(k)).unwrap();
        assert!((cost(DesignKind::User) - 0.10).abs() < 1e-12);
        for k in [DesignKind::Cluster, DesignKind::Switchback] {
            assert!((cost(k) - 0.40).abs() < 1e-12);
            assert!((0.35..=0.45).contains(&cost(k)));
        }
        for k in [DesignKind::BudgetSplit, DesignKind::TwoStage, DesignKind::Mixed] {
            assert!((cost(k) - 0.80).abs() < 1e-12);
            assert!((0.70..=0.90).contains(&cost(k)));
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let d = DesignSpec {
            treat_prob: 1.0,
            ..DesignSpec::new(DesignKind::User)
        };
        assert!(d.validate().is_err());
        let d = DesignSpec {
            saturation_levels: vec![],
            ..DesignSpec::new(DesignKind::TwoStage)
        };
        assert!(d.validate().is_err());
    }

    #[test]
    fn treated_fraction_concentrates() {
        let panel = generate_synthetic_panel(
            &SyntheticPanelConfig {
                n_units: 4000,
                n_clusters: 400,
                n_budget_groups: 400,
                n_regions: 20,
                t: 20,
                baseline_mean: 0.0,
                baseline_sd: 1.0,
            },
            5,
        )
        .unwrap();
        for d in default_catalog() {
            let a = replay(&d, &panel, 31).unwrap();
            let draws: f64 = match d.kind {
                DesignKind::User => 4000.0,
                DesignKind::Cluster | DesignKind::BudgetSplit => 400.0,
                DesignKind::Switchback => 400.0,
                // dominated by the coarser cluster-level randomness
                DesignKind::TwoStage | DesignKind::Mixed => 400.0,
            };
            let sd = (0.25 / draws).sqrt();
            let frac = a.treated_fraction();
            assert!((frac - 0.5).abs() < 4.0 * sd, "{}: {frac}", d.kind);
        }
    }
}
