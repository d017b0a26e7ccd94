//! Unit × period panels.
//!
//! A [`Panel`] is the historical log that candidate designs are replayed on.
//! It is built either by [`generate_synthetic_panel`] (a calibrated platform
//! with clusters, shared-budget groups and regions) or by [`ingest_log_csv`]
//! from a generic log. Cells are stored densely, unit-major; a cell without an
//! observed baseline outcome still participates in assignment and exposure.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, substream};

/// Group label used when a log carries no column for a grouping.
pub const SHARED_GROUP: &str = "all";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub unit_id: String,
    pub cluster_id: String,
    pub budget_id: String,
    pub region_id: String,
}

/// Dense index of one group membership map (clusters, budget pools or regions).
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    labels: Vec<String>,
    of_unit: Vec<usize>,
    sizes: Vec<usize>,
}

impl Grouping {
    fn build<'a>(labels: impl Iterator<Item = &'a str>) -> Self {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut names = Vec::new();
        let mut of_unit = Vec::new();
        for label in labels {
            let next = names.len();
            let g = *index.entry(label).or_insert_with(|| {
                names.push(label.to_string());
                next
            });
            of_unit.push(g);
        }
        let mut sizes = vec![0; names.len()];
        for &g in &of_unit {
            sizes[g] += 1;
        }
        Self {
            labels: names,
            of_unit,
            sizes,
        }
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn group_of(&self, unit: usize) -> usize {
        self.of_unit[unit]
    }

    pub fn memberships(&self) -> &[usize] {
        &self.of_unit
    }

    pub fn size(&self, group: usize) -> usize {
        self.sizes[group]
    }

    pub fn label(&self, group: usize) -> &str {
        &self.labels[group]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    units: Vec<UnitRecord>,
    periods: usize,
    baseline: Vec<Option<f64>>,
    propensities: Option<Vec<Option<f64>>>,
    clusters: Grouping,
    budgets: Grouping,
    regions: Grouping,
}

impl Panel {
    /// Builds a panel from dense unit-major cell vectors of length
    /// `units.len() * periods`.
    pub fn new(
        units: Vec<UnitRecord>,
        periods: usize,
        baseline: Vec<Option<f64>>,
        propensities: Option<Vec<Option<f64>>>,
    ) -> Result<Self> {
        if units.len() < 2 {
            return Err(Error::Panel(format!(
                "need at least 2 units, got {}",
                units.len()
            )));
        }
        if periods == 0 {
            return Err(Error::Panel("need at least 1 period".into()));
        }
        let mut seen = HashSet::new();
        for u in &units {
            if !seen.insert(u.unit_id.as_str()) {
                return Err(Error::Panel(format!("duplicate unit_id {:?}", u.unit_id)));
            }
            if u.cluster_id.is_empty() || u.budget_id.is_empty() || u.region_id.is_empty() {
                return Err(Error::Panel(format!(
                    "unit {:?} has an empty group label",
                    u.unit_id
                )));
            }
        }
        let cells = units.len() * periods;
        if baseline.len() != cells {
            return Err(Error::Panel(format!(
                "expected {cells} baseline cells, got {}",
                baseline.len()
            )));
        }
        if baseline.iter().flatten().any(|y| !y.is_finite()) {
            return Err(Error::Panel("non-finite baseline outcome".into()));
        }
        if let Some(props) = &propensities {
            if props.len() != cells {
                return Err(Error::Panel(format!(
                    "expected {cells} propensity cells, got {}",
                    props.len()
                )));
            }
            if let Some(p) = props.iter().flatten().find(|p| !(**p > 0.0 && **p <= 1.0)) {
                return Err(Error::Panel(format!("propensity {p} outside (0, 1]")));
            }
        }
        let clusters = Grouping::build(units.iter().map(|u| u.cluster_id.as_str()));
        let budgets = Grouping::build(units.iter().map(|u| u.budget_id.as_str()));
        let regions = Grouping::build(units.iter().map(|u| u.region_id.as_str()));
        Ok(Self {
            units,
            periods,
            baseline,
            propensities,
            clusters,
            budgets,
            regions,
        })
    }

    pub fn units(&self) -> &[UnitRecord] {
        &self.units
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn n_cells(&self) -> usize {
        self.units.len() * self.periods
    }

    /// Cell index for `unit` (0-based) and `period` (1-based).
    pub fn cell(&self, unit: usize, period: usize) -> usize {
        debug_assert!(period >= 1 && period <= self.periods);
        unit * self.periods + (period - 1)
    }

    pub fn baseline_cells(&self) -> &[Option<f64>] {
        &self.baseline
    }

    pub fn baseline(&self, unit: usize, period: usize) -> Option<f64> {
        self.baseline[self.cell(unit, period)]
    }

    pub fn n_observations(&self) -> usize {
        self.baseline.iter().flatten().count()
    }

    pub fn propensity_cells(&self) -> Option<&[Option<f64>]> {
        self.propensities.as_deref()
    }

    pub fn has_propensities(&self) -> bool {
        self.propensities.is_some()
    }

    pub fn clusters(&self) -> &Grouping {
        &self.clusters
    }

    pub fn budgets(&self) -> &Grouping {
        &self.budgets
    }

    pub fn regions(&self) -> &Grouping {
        &self.regions
    }

    /// Sample standard deviation of the observed baseline outcomes.
    pub fn outcome_sd(&self) -> f64 {
        let ys: Vec<f64> = self.baseline.iter().flatten().copied().collect();
        if ys.len() < 2 {
            return 0.0;
        }
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let ss: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    }

    /// IPS effective-sample share of the logged propensities, if any.
    pub fn ess(&self) -> Option<f64> {
        let props: Vec<f64> = self.propensities.as_ref()?.iter().flatten().copied().collect();
        ess_share(&props).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPanelConfig {
    pub n_units: usize,
    pub n_clusters: usize,
    pub n_budget_groups: usize,
    pub n_regions: usize,
    #[serde(rename = "periods")]
    pub t: usize,
    #[serde(default)]
    pub baseline_mean: f64,
    #[serde(default = "one")]
    pub baseline_sd: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for SyntheticPanelConfig {
    fn default() -> Self {
        Self {
            n_units: 2000,
            n_clusters: 50,
            n_budget_groups: 20,
            n_regions: 1,
            t: 40,
            baseline_mean: 0.0,
            baseline_sd: 1.0,
        }
    }
}

impl SyntheticPanelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_units < 2 {
            return Err(Error::config("n_units", "must be at least 2"));
        }
        for (field, n) in [
            ("n_clusters", self.n_clusters),
            ("n_budget_groups", self.n_budget_groups),
            ("n_regions", self.n_regions),
        ] {
            if n == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
            if n > self.n_units {
                return Err(Error::config(field, "cannot exceed n_units"));
            }
        }
        if self.t == 0 {
            return Err(Error::config("periods", "must be at least 1"));
        }
        if !self.baseline_mean.is_finite() {
            return Err(Error::config("baseline_mean", "must be finite"));
        }
        if !(self.baseline_sd >= 0.0 && self.baseline_sd.is_finite()) {
            return Err(Error::config("baseline_sd", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Round-robin assignment of shuffled units to `groups` labels.
fn shuffled_round_robin(
    n_units: usize,
    groups: usize,
    prefix: &str,
    rng: &mut impl rand::Rng,
) -> Vec<String> {
    let mut order: Vec<usize> = (0..n_units).collect();
    order.shuffle(rng);
    let width = digits(groups);
    let mut labels = vec![String::new(); n_units];
    for (k, unit) in order.into_iter().enumerate() {
        labels[unit] = format!("{prefix}{:0width$}", k % groups);
    }
    labels
}

fn digits(n: usize) -> usize {
    n.max(1).to_string().len()
}

pub fn generate_synthetic_panel(cfg: &SyntheticPanelConfig, seed: u64) -> Result<Panel> {
    cfg.validate()?;
    let mut rng = rng_from_seed(substream(seed, 0));
    let clusters = shuffled_round_robin(cfg.n_units, cfg.n_clusters, "c", &mut rng);
    let budgets = shuffled_round_robin(cfg.n_units, cfg.n_budget_groups, "b", &mut rng);
    let regions = shuffled_round_robin(cfg.n_units, cfg.n_regions, "r", &mut rng);
    let width = digits(cfg.n_units);
    let units: Vec<UnitRecord> = (0..cfg.n_units)
        .map(|i| UnitRecord {
            unit_id: format!("u{i:0width$}"),
            cluster_id: clusters[i].clone(),
            budget_id: budgets[i].clone(),
            region_id: regions[i].clone(),
        })
        .collect();

    let normal = Normal::new(cfg.baseline_mean, cfg.baseline_sd)
        .map_err(|e| Error::config("baseline_sd", e.to_string()))?;
    let mut rng = rng_from_seed(substream(seed, 1));
    let baseline = (0..cfg.n_units * cfg.t)
        .map(|_| Some(normal.sample(&mut rng)))
        .collect();
    Panel::new(units, cfg.t, baseline, None)
}

/// Column names of the log CSV. Optional columns are used only if the header
/// contains them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub unit_id: String,
    pub period: String,
    pub outcome: String,
    pub cluster_id: String,
    pub budget_id: String,
    pub region_id: String,
    pub propensity: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            unit_id: "unit_id".into(),
            period: "period".into(),
            outcome: "outcome".into(),
            cluster_id: "cluster_id".into(),
            budget_id: "budget_id".into(),
            region_id: "region_id".into(),
            propensity: "propensity".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum PeriodKey {
    Numeric(OrderedF64),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedF64(f64);
impl Eq for OrderedF64 {}
impl PartialOrd for OrderedF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrderedF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct RawRow {
    line: u64,
    unit: usize,
    period: String,
    outcome: f64,
    propensity: Option<f64>,
}

/// Reads a unit × period log. Period values are re-indexed to `1..=T` in
/// ascending order (numerically if every value parses as a number).
pub fn ingest_log_csv<R: Read>(stream: R, schema: &CsvSchema) -> Result<Panel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(stream);
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::ingest(None, "no data rows"));
    }
    let find = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| {
        find(name).ok_or_else(|| Error::ingest(Some(1), format!("missing required column {name:?}")))
    };
    let unit_col = required(&schema.unit_id)?;
    let period_col = required(&schema.period)?;
    let outcome_col = required(&schema.outcome)?;
    let cluster_col = find(&schema.cluster_id);
    let budget_col = find(&schema.budget_id);
    let region_col = find(&schema.region_id);
    let prop_col = find(&schema.propensity);

    let mut units: Vec<UnitRecord> = Vec::new();
    let mut unit_index: HashMap<String, usize> = HashMap::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |col: usize| record.get(col).unwrap_or("");
        let unit_id = field(unit_col);
        if unit_id.is_empty() {
            return Err(Error::ingest(Some(line), "empty unit_id"));
        }
        let group = |col: Option<usize>, what: &str| -> Result<String> {
            match col {
                None => Ok(SHARED_GROUP.to_string()),
                Some(c) => {
                    let v = field(c);
                    if v.is_empty() {
                        Err(Error::ingest(Some(line), format!("empty {what}")))
                    } else {
                        Ok(v.to_string())
                    }
                }
            }
        };
        let unit = UnitRecord {
            unit_id: unit_id.to_string(),
            cluster_id: group(cluster_col, "cluster_id")?,
            budget_id: group(budget_col, "budget_id")?,
            region_id: group(region_col, "region_id")?,
        };
        let idx = match unit_index.get(unit_id) {
            Some(&i) => {
                if units[i] != unit {
                    return Err(Error::ingest(
                        Some(line),
                        format!("unit {unit_id:?} has conflicting group labels"),
                    ));
                }
                i
            }
            None => {
                unit_index.insert(unit_id.to_string(), units.len());
                units.push(unit);
                units.len() - 1
            }
        };
        let outcome_raw = field(outcome_col);
        let outcome: f64 = outcome_raw
            .parse()
            .ok()
            .filter(|y: &f64| y.is_finite())
            .ok_or_else(|| {
                Error::ingest(Some(line), format!("non-numeric outcome {outcome_raw:?}"))
            })?;
        let propensity = match prop_col {
            None => None,
            Some(c) => {
                let raw = field(c);
                let p: f64 = raw.parse().map_err(|_| {
                    Error::ingest(Some(line), format!("non-numeric propensity {raw:?}"))
                })?;
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::ingest(
                        Some(line),
                        format!("propensity {p} outside (0, 1]"),
                    ));
                }
                Some(p)
            }
        };
        let period = field(period_col);
        if period.is_empty() {
            return Err(Error::ingest(Some(line), "empty period"));
        }
        rows.push(RawRow {
            line,
            unit: idx,
            period: period.to_string(),
            outcome,
            propensity,
        });
    }
    if rows.is_empty() {
        return Err(Error::ingest(None, "no data rows"));
    }

    let numeric = rows.iter().all(|r| r.period.parse::<f64>().is_ok());
    let key = |p: &str| {
        if numeric {
            PeriodKey::Numeric(OrderedF64(p.parse().unwrap_or(f64::NAN)))
        } else {
            PeriodKey::Text(p.to_string())
        }
    };
    let mut period_index: BTreeMap<PeriodKey, usize> =
        rows.iter().map(|r| (key(&r.period), 0)).collect();
    for (i, v) in period_index.values_mut().enumerate() {
        *v = i + 1;
    }
    let periods = period_index.len();
    let n_units = units.len();
    if n_units < 2 {
        return Err(Error::ingest(None, "log must contain at least 2 units"));
    }

    let mut baseline = vec![None; n_units * periods];
    let mut props = prop_col.map(|_| vec![None; n_units * periods]);
    for row in &rows {
        let t = period_index[&key(&row.period)];
        let cell = row.unit * periods + (t - 1);
        if baseline[cell].is_some() {
            return Err(Error::ingest(
                Some(row.line),
                format!(
                    "duplicate observation for unit {:?} period {:?}",
                    units[row.unit].unit_id, row.period
                ),
            ));
        }
        baseline[cell] = Some(row.outcome);
        if let Some(p) = props.as_mut() {
            p[cell] = row.propensity;
        }
    }
    Panel::new(units, periods, baseline, props)
}

/// Writes a panel in the ingestion schema (default column names).
pub fn write_panel_csv<W: std::io::Write>(panel: &Panel, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let with_props = panel.has_propensities();
    let mut header = vec![
        "unit_id",
        "period",
        "outcome",
        "cluster_id",
        "budget_id",
        "region_id",
    ];
    if with_props {
        header.push("propensity");
    }
    w.write_record(&header)?;
    for (u, unit) in panel.units().iter().enumerate() {
        for t in 1..=panel.periods() {
            let cell = panel.cell(u, t);
            let Some(y) = panel.baseline_cells()[cell] else {
                continue;
            };
            let mut rec = vec![
                unit.unit_id.clone(),
                t.to_string(),
                y.to_string(),
                unit.cluster_id.clone(),
                unit.budget_id.clone(),
                unit.region_id.clone(),
            ];
            if let Some(props) = panel.propensity_cells() {
                rec.push(props[cell].map(|p| p.to_string()).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Outcome-scale constants of the semi-synthetic interference layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationScales {
    pub tau: f64,
    pub s_spill: f64,
    pub s_carry: f64,
    pub rho_g: f64,
    pub rho_b: f64,
    pub sigma_eps: f64,
}

impl CalibrationScales {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tau", self.tau),
            ("s_spill", self.s_spill),
            ("s_carry", self.s_carry),
            ("rho_g", self.rho_g),
            ("rho_b", self.rho_b),
            ("sigma_eps", self.sigma_eps),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::Calibration(format!("{name} must be finite")));
            }
            if name != "tau" && v < 0.0 {
                return Err(Error::Calibration(format!("{name} must be non-negative")));
            }
        }
        if self.rho_g > 1.0 || self.rho_b > 1.0 {
            return Err(Error::Calibration("rho_g and rho_b must lie in [0, 1]".into()));
        }
        if (self.rho_g + self.rho_b - 1.0).abs() > 1e-12 {
            return Err(Error::Calibration(format!(
                "rho_g + rho_b must equal 1, got {}",
                self.rho_g + self.rho_b
            )));
        }
        Ok(())
    }
}

/// Partial [`CalibrationScales`]; `None` fields take the panel-derived default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationOverrides {
    pub tau: Option<f64>,
    pub s_spill: Option<f64>,
    pub s_carry: Option<f64>,
    pub rho_g: Option<f64>,
    pub rho_b: Option<f64>,
    pub sigma_eps: Option<f64>,
}

impl From<CalibrationScales> for CalibrationOverrides {
    fn from(c: CalibrationScales) -> Self {
        Self {
            tau: Some(c.tau),
            s_spill: Some(c.s_spill),
            s_carry: Some(c.s_carry),
            rho_g: Some(c.rho_g),
            rho_b: Some(c.rho_b),
            sigma_eps: Some(c.sigma_eps),
        }
    }
}

pub const DEFAULT_TAU_FRACTION: f64 = 0.1;
pub const DEFAULT_SPILL_FRACTION: f64 = 0.5;
pub const DEFAULT_CARRY_FRACTION: f64 = 0.25;
pub const DEFAULT_NOISE_FRACTION: f64 = 0.5;

/// Fills missing scales from the panel outcome SD. A single `rho` override
/// implies its complement.
pub fn calibrate_scales(panel: &Panel, overrides: &CalibrationOverrides) -> Result<CalibrationScales> {
    let needs_sd = overrides.tau.is_none()
        || overrides.s_spill.is_none()
        || overrides.s_carry.is_none()
        || overrides.sigma_eps.is_none();
    let sd = if needs_sd {
        let sd = panel.outcome_sd();
        if sd.is_nan() || sd <= 0.0 {
            return Err(Error::Calibration(
                "outcome standard deviation is zero; supply tau, s_spill, s_carry and sigma_eps"
                    .into(),
            ));
        }
        sd
    } else {
        0.0
    };
    let (rho_g, rho_b) = match (overrides.rho_g, overrides.rho_b) {
        (Some(g), Some(b)) => (g, b),
        (Some(g), None) => (g, 1.0 - g),
        (None, Some(b)) => (1.0 - b, b),
        (None, None) => (0.5, 0.5),
    };
    let scales = CalibrationScales {
        tau: overrides.tau.unwrap_or(DEFAULT_TAU_FRACTION * sd),
        s_spill: overrides.s_spill.unwrap_or(DEFAULT_SPILL_FRACTION * sd),
        s_carry: overrides.s_carry.unwrap_or(DEFAULT_CARRY_FRACTION * sd),
        rho_g,
        rho_b,
        sigma_eps: overrides.sigma_eps.unwrap_or(DEFAULT_NOISE_FRACTION * sd),
    };
    scales.validate()?;
    Ok(scales)
}

/// Normalized IPS effective-sample share `(Σw)² / (n·Σw²)` with `w = 1/π`.
pub fn ess_share(propensities: &[f64]) -> Result<f64> {
    if propensities.is_empty() {
        return Err(Error::InvalidInput("ess_share of an empty list".into()));
    }
    if let Some(p) = propensities.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::InvalidInput(format!("propensity {p} outside (0, 1]")));
    }
    if propensities.iter().all(|p| *p == propensities[0]) {
        return Ok(1.0);
    }
    let n = propensities.len() as f64;
    let (sum, sum_sq) = propensities.iter().fold((0.0, 0.0), |(s, s2), p| {
        let w = 1.0 / p;
        (s + w, s2 + w * w)
    });
    Ok((sum * sum / (n * sum_sq)).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(id: &str, c: &str) -> UnitRecord {
        UnitRecord {
            unit_id: id.into(),
            cluster_id: c.into(),
            budget_id: "b".into(),
            region_id: "r".into(),
        }
    }

    fn small_cfg() -> SyntheticPanelConfig {
        SyntheticPanelConfig {
            n_units: 100,
            n_clusters: 10,
            n_budget_groups: 4,
            n_regions: 3,
            t: 5,
            baseline_mean: 2.0,
            baseline_sd: 1.0,
        }
    }

    #[test]
    fn zero_sd_gives_constant_baseline() {
        let cfg = SyntheticPanelConfig {
            baseline_sd: 0.0,
            ..small_cfg()
        };
        let panel = generate_synthetic_panel(&cfg, 3).unwrap();
        assert!(panel.baseline_cells().iter().all(|y| *y == Some(2.0)));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_synthetic_panel(&small_cfg(), 11).unwrap();
        let b = generate_synthetic_panel(&small_cfg(), 11).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_panel(&small_cfg(), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn clusters_are_balanced() {
        let panel = generate_synthetic_panel(&small_cfg(), 0).unwrap();
        assert_eq!(panel.clusters().count(), 10);
        for g in 0..10 {
            assert_eq!(panel.clusters().size(g), 10);
        }
    }

    #[test]
    fn invalid_counts_name_the_field() {
        let cfg = SyntheticPanelConfig {
            n_clusters: 0,
            ..small_cfg()
        };
        let err = generate_synthetic_panel(&cfg, 0).unwrap_err().to_string();
        assert!(err.contains("n_clusters"), "{err}");
        let cfg = SyntheticPanelConfig {
            n_units: 1,
            ..small_cfg()
        };
        let err = generate_synthetic_panel(&cfg, 0).unwrap_err().to_string();
        assert!(err.contains("n_units"), "{err}");
    }

    #[test]
    fn empty_file_has_no_data_rows() {
        let err = ingest_log_csv("".as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(err.to_string().contains("no data rows"), "{err}");
        let err = ingest_log_csv("unit_id,period,outcome\n".as_bytes(), &CsvSchema::default())
            .unwrap_err();
        assert!(err.to_string().contains("no data rows"), "{err}");
    }

    #[test]
    fn minimal_log_without_propensities() {
        let csv = "unit_id,period,outcome\na,7,1.5\nb,7,2.5\n";
        let panel = ingest_log_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(panel.n_units(), 2);
        assert_eq!(panel.periods(), 1);
        assert_eq!(panel.n_observations(), 2);
        assert!(!panel.has_propensities());
        assert_eq!(panel.units()[0].cluster_id, SHARED_GROUP);
        assert_eq!(panel.baseline(1, 1), Some(2.5));
    }

    #[test]
    fn zero_propensity_cites_row() {
        let csv = "unit_id,period,outcome,propensity\na,1,1.0,0.5\nb,1,2.0,0\n";
        let err = ingest_log_csv(csv.as_bytes(), &CsvSchema::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3"), "{msg}");
        assert!(msg.contains("propensity"), "{msg}");
    }

    #[test]
    fn non_numeric_outcome_and_missing_column() {
        let csv = "unit_id,period,outcome\na,1,x\nb,1,2\n";
        let msg = ingest_log_csv(csv.as_bytes(), &CsvSchema::default())
            .unwrap_err()
            .to_string();
        assert!(msg.contains("row 2") && msg.contains("outcome"), "{msg}");
        let csv = "unit_id,period\na,1\n";
        let msg = ingest_log_csv(csv.as_bytes(), &CsvSchema::default())
            .unwrap_err()
            .to_string();
        assert!(msg.contains("missing required column"), "{msg}");
    }

    #[test]
    fn periods_are_reindexed_in_order() {
        let csv = "unit_id,period,outcome\na,30,3\na,10,1\nb,20,2\nb,100,4\n";
        let panel = ingest_log_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(panel.periods(), 4);
        assert_eq!(panel.baseline(0, 1), Some(1.0));
        assert_eq!(panel.baseline(0, 3), Some(3.0));
        assert_eq!(panel.baseline(1, 2), Some(2.0));
        assert_eq!(panel.baseline(1, 4), Some(4.0));
        assert_eq!(panel.baseline(0, 2), None);
    }

    #[test]
    fn custom_schema_names() {
        let schema = CsvSchema {
            unit_id: "user".into(),
            period: "day".into(),
            outcome: "clicks".into(),
            cluster_id: "community".into(),
            ..CsvSchema::default()
        };
        let csv = "user,day,clicks,community\nx,1,0,k1\ny,1,1,k2\n";
        let panel = ingest_log_csv(csv.as_bytes(), &schema).unwrap();
        assert_eq!(panel.clusters().count(), 2);
        assert_eq!(panel.budgets().count(), 1);
    }

    #[test]
    fn calibration_overrides_are_verbatim() {
        let panel = Panel::new(
            vec![unit("a", "c"), unit("b", "c")],
            1,
            vec![Some(1.0), Some(1.0)],
            None,
        )
        .unwrap();
        let full = CalibrationScales {
            tau: 0.3,
            s_spill: 2.0,
            s_carry: 1.0,
            rho_g: 0.25,
            rho_b: 0.75,
            sigma_eps: 0.0,
        };
        assert_eq!(calibrate_scales(&panel, &full.into()).unwrap(), full);
        // constant outcomes and nothing overridden
        assert!(matches!(
            calibrate_scales(&panel, &CalibrationOverrides::default()),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn calibration_defaults_scale_with_sd() {
        // outcomes {-√2, +√2} have sample sd 2
        let r = std::f64::consts::SQRT_2;
        let panel = Panel::new(
            vec![unit("a", "c"), unit("b", "c")],
            1,
            vec![Some(-r), Some(r)],
            None,
        )
        .unwrap();
        let c = calibrate_scales(&panel, &CalibrationOverrides::default()).unwrap();
        assert!((c.s_spill - 1.0).abs() < 1e-12);
        assert!((c.s_carry - 0.5).abs() < 1e-12);
        assert!((c.tau - 0.2).abs() < 1e-12);
        assert!((c.sigma_eps - 1.0).abs() < 1e-12);
        assert_eq!((c.rho_g, c.rho_b), (0.5, 0.5));
        let again = calibrate_scales(&panel, &c.into()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn ess_examples() {
        assert_eq!(ess_share(&[0.2; 17]).unwrap(), 1.0);
        assert!((ess_share(&[0.5, 0.25]).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(ess_share(&[0.3]).unwrap(), 1.0);
        assert!(ess_share(&[]).is_err());
        assert!(ess_share(&[0.5, 0.0]).is_err());
    }

    #[test]
    fn panel_rejects_duplicate_units_and_bad_propensity() {
        let dup = Panel::new(vec![unit("a", "c"), unit("a", "c")], 1, vec![None, None], None);
        assert!(dup.is_err());
        let bad = Panel::new(
            vec![unit("a", "c"), unit("b", "c")],
            1,
            vec![Some(0.0), Some(0.0)],
            Some(vec![Some(0.5), Some(1.5)]),
        );
        assert!(bad.is_err());
    }
}
