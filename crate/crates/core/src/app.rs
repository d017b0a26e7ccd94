//! Command pipelines: load a run configuration, evaluate, and write reports.
//!
//! Every command renders its artifacts in memory first and only then writes
//! them, so a failure never leaves a half-written report behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Check, Format, PanelSource, RunConfig};
use crate::designs::DesignSpec;
use crate::diagnostics::catalog::{catalog_approximation_check, random_surfaces};
use crate::diagnostics::certificate::{dominance_check, selector_certificate};
use crate::diagnostics::mde_grid::mde_grid;
use crate::diagnostics::oracle::oracle_comparison;
use crate::diagnostics::sweep::{regime_sweep, SweepReport};
use crate::diagnostics::transport::{minimax_tightness_check, random_scenarios, transport_bound_check};
use crate::error::{Error, Result};
use crate::evaluate::evaluate_surface;
use crate::mechanisms::{AmbiguityGrid, Locality, MechanismPoint};
use crate::panel::{calibrate_scales, generate_synthetic_panel, ingest_log_csv, write_panel_csv, CalibrationScales, Panel};
use crate::plot::{bar_chart, line_chart, scatter_chart, Series};
use crate::risk::{Component, EvalContext};
use crate::rng::substream;
use crate::selector::{dominance_audit, robust_select, RiskSurface, RobustDecision};

pub const SCHEMA_VERSION: &str = "1.0.0";

/// Runs `f` on a rayon pool capped at `threads` workers, or on the global
/// pool when `None`.
pub fn with_thread_cap<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::config("XDESIGN_THREADS", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Files rendered in memory, keyed by file name inside the output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Writes all files; on the first failure removes whatever was written.
    pub fn commit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let created = !dir.exists();
        let mut written = Vec::new();
        let result = (|| -> Result<()> {
            fs::create_dir_all(dir)?;
            for (name, bytes) in &self.files {
                let path = dir.join(name);
                fs::write(&path, bytes).inspect_err(|_| {
                    let _ = fs::remove_file(&path);
                })?;
                written.push(path);
            }
            Ok(())
        })();
        match result {
            Ok(()) => Ok(written),
            Err(e) => {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                if created {
                    let _ = fs::remove_dir(dir);
                }
                Err(e)
            }
        }
    }
}

pub fn load_panel(cfg: &RunConfig) -> Result<Panel> {
    match &cfg.panel {
        PanelSource::Synthetic(p) => generate_synthetic_panel(p, cfg.seed),
        PanelSource::Csv { path, schema } => {
            let file = fs::File::open(path).map_err(|e| {
                Error::config("panel.path", format!("cannot open {}: {e}", path.display()))
            })?;
            ingest_log_csv(std::io::BufReader::new(file), schema)
        }
    }
}

/// Panel, calibration and catalog shared by the evaluating commands.
pub struct Prepared {
    pub panel: Panel,
    pub calib: CalibrationScales,
    pub designs: Vec<DesignSpec>,
    pub grid: AmbiguityGrid,
}

impl Prepared {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let panel = load_panel(cfg)?;
        let calib = calibrate_scales(&panel, &cfg.calibration)?;
        Ok(Self {
            panel,
            calib,
            designs: cfg.designs(),
            grid: cfg.ambiguity_grid()?,
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.designs.iter().map(DesignSpec::name).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaReport {
    pub index: usize,
    pub gamma_g: f64,
    pub gamma_b: f64,
    pub lambda: f64,
    pub locality: Locality,
}

impl ThetaReport {
    fn new(index: usize, t: &MechanismPoint) -> Self {
        Self {
            index,
            gamma_g: t.gamma_g,
            gamma_b: t.gamma_b,
            lambda: t.lambda,
            locality: t.locality,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionSummary {
    pub selected: String,
    pub q: BTreeMap<String, f64>,
    pub epsilon_t: f64,
    pub shortlist: Vec<String>,
    pub margin: f64,
    pub worst_theta: BTreeMap<String, ThetaReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectReport {
    pub schema_version: &'static str,
    pub config_digest: String,
    pub seed: u64,
    pub reps: usize,
    pub designs: Vec<String>,
    pub grid_size: usize,
    pub decision: DecisionSummary,
    /// Normalized components at each design's worst-case point.
    pub breakdown: BTreeMap<String, BTreeMap<&'static str, f64>>,
    /// Design no worse than every other on every component and grid point.
    pub dominant: Option<String>,
    pub surface_path: Option<String>,
}

pub struct SelectOutcome {
    pub report: SelectReport,
    pub decision: RobustDecision,
    pub surface: RiskSurface,
    pub artifacts: Artifacts,
}

/// Evaluates and selects without touching the filesystem.
pub fn select(cfg: &RunConfig) -> Result<SelectOutcome> {
    let prep = Prepared::new(cfg)?;
    let ctx = EvalContext::new(&prep.panel, &prep.calib, &cfg.weights);
    let thetas = prep.grid.points();
    let surface = evaluate_surface(&ctx, &prep.designs, thetas, cfg.reps, cfg.seed)?;
    let decision = robust_select(&surface, &cfg.selector)?;
    let names = prep.names();

    let mut breakdown = BTreeMap::new();
    let mut worst = BTreeMap::new();
    for (d, name) in names.iter().enumerate() {
        let t = decision.worst_theta[d];
        worst.insert(name.clone(), ThetaReport::new(t, &thetas[t]));
        let entry = surface.entry(d, t).ok_or(Error::Surface("missing cell".into()))?;
        let parts = Component::ALL
            .iter()
            .zip(entry.normalized)
            .map(|(c, x)| (c.as_str(), x))
            .collect();
        breakdown.insert(name.clone(), parts);
    }
    let summary = DecisionSummary {
        selected: names[decision.selected].clone(),
        q: names.iter().cloned().zip(decision.q.iter().copied()).collect(),
        epsilon_t: decision.epsilon_t,
        shortlist: decision.shortlist.iter().map(|&d| names[d].clone()).collect(),
        margin: decision.separation_margin,
        worst_theta: worst,
    };
    let report = SelectReport {
        schema_version: SCHEMA_VERSION,
        config_digest: cfg.digest(),
        seed: cfg.seed,
        reps: cfg.reps,
        designs: names.clone(),
        grid_size: thetas.len(),
        decision: summary,
        breakdown,
        dominant: dominance_audit(&surface)?.map(|d| names[d].clone()),
        surface_path: cfg.wants(Format::Csv).then(|| "surface.csv".to_string()),
    };

    let mut artifacts = Artifacts::default();
    if cfg.wants(Format::Json) {
        artifacts.add("decision.json", to_json(&report)?);
    }
    if cfg.wants(Format::Csv) {
        artifacts.add("surface.csv", surface_csv(&surface, &names, thetas)?);
    }
    if cfg.wants(Format::Svg) {
        let bars: Vec<(&str, f64)> = names.iter().map(String::as_str).zip(decision.q.iter().copied()).collect();
        let svg = bar_chart("Worst-case risk by design", "worst-case risk", &bars, Some(decision.selected));
        artifacts.add("ranking.svg", svg.into_bytes());
    }
    Ok(SelectOutcome {
        report,
        decision,
        surface,
        artifacts,
    })
}

pub fn run_select(cfg: &RunConfig) -> Result<SelectOutcome> {
    let outcome = select(cfg)?;
    outcome.artifacts.commit(&cfg.out)?;
    Ok(outcome)
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_error(e: csv::IntoInnerError<csv::Writer<Vec<u8>>>) -> Error {
    Error::Io(e.into_error())
}

fn surface_csv(surface: &RiskSurface, names: &[String], thetas: &[MechanismPoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["design", "theta", "gamma_g", "gamma_b", "lambda", "locality"];
    header.extend(Component::ALL.iter().map(|c| c.as_str()));
    let norm: Vec<String> = Component::ALL.iter().map(|c| format!("{}_norm", c.as_str())).collect();
    header.extend(norm.iter().map(String::as_str));
    header.extend(["risk", "reps", "bias_est"]);
    w.write_record(&header)?;
    for (d, name) in names.iter().enumerate() {
        for (t, theta) in thetas.iter().enumerate() {
            let e = surface.entry(d, t).ok_or(Error::Surface("missing cell".into()))?;
            let mut row = vec![
                name.clone(),
                t.to_string(),
                theta.gamma_g.to_string(),
                theta.gamma_b.to_string(),
                theta.lambda.to_string(),
                theta.locality.as_str().to_string(),
            ];
            row.extend(e.raw.as_vector().iter().map(f64::to_string));
            row.extend(e.normalized.iter().map(f64::to_string));
            row.push(e.risk.to_string());
            row.push(e.raw.reps.to_string());
            row.push(e.raw.bias_est.to_string());
            w.write_record(&row)?;
        }
    }
    w.into_inner().map_err(csv_error)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRowReport {
    pub gamma: f64,
    pub gamma_g: f64,
    pub gamma_b: f64,
    pub lambda: f64,
    pub risk: BTreeMap<String, f64>,
    pub winner: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepJson {
    pub schema_version: &'static str,
    pub config_digest: String,
    pub designs: Vec<String>,
    pub rows: Vec<SweepRowReport>,
    /// Winners with consecutive repeats collapsed.
    pub winner_sequence: Vec<String>,
    pub distinct_winners: Vec<String>,
}

pub struct SweepOutcome {
    pub report: SweepReport,
    pub json: SweepJson,
    pub artifacts: Artifacts,
}

pub fn sweep(cfg: &RunConfig) -> Result<SweepOutcome> {
    let prep = Prepared::new(cfg)?;
    let ctx = EvalContext::new(&prep.panel, &prep.calib, &cfg.weights);
    let mut sweep_cfg = cfg.sweep.clone();
    sweep_cfg.reps = cfg.reps;
    sweep_cfg.seed = cfg.seed;
    let report = regime_sweep(&sweep_cfg, &ctx, &prep.designs)?;
    let names = &report.designs;
    let rows = report
        .rows
        .iter()
        .map(|r| SweepRowReport {
            gamma: r.gamma,
            gamma_g: r.theta.gamma_g,
            gamma_b: r.theta.gamma_b,
            lambda: r.theta.lambda,
            risk: names.iter().cloned().zip(r.risk.iter().copied()).collect(),
            winner: names[r.winner].clone(),
        })
        .collect();
    let json = SweepJson {
        schema_version: SCHEMA_VERSION,
        config_digest: cfg.digest(),
        designs: names.clone(),
        rows,
        winner_sequence: report.winner_sequence().iter().map(|&d| names[d].clone()).collect(),
        distinct_winners: report.distinct_winners().iter().map(|&d| names[d].clone()).collect(),
    };

    let mut artifacts = Artifacts::default();
    if cfg.wants(Format::Json) {
        artifacts.add("sweep.json", to_json(&json)?);
    }
    if cfg.wants(Format::Csv) {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["gamma", "gamma_g", "gamma_b", "lambda"];
        header.extend(names.iter().map(String::as_str));
        header.push("winner");
        w.write_record(&header)?;
        for r in &report.rows {
            let mut row = vec![
                r.gamma.to_string(),
                r.theta.gamma_g.to_string(),
                r.theta.gamma_b.to_string(),
                r.theta.lambda.to_string(),
            ];
            row.extend(r.risk.iter().map(f64::to_string));
            row.push(names[r.winner].clone());
            w.write_record(&row)?;
        }
        artifacts.add("sweep.csv", w.into_inner().map_err(csv_error)?);
    }
    if cfg.wants(Format::Svg) {
        let mut series: Vec<Series> = names
            .iter()
            .enumerate()
            .map(|(d, name)| Series {
                name,
                points: report.rows.iter().map(|r| (r.gamma, r.risk[d])).collect(),
                dashed: false,
            })
            .collect();
        series.push(Series {
            name: "envelope",
            points: report
                .rows
                .iter()
                .map(|r| (r.gamma, r.risk.iter().copied().fold(f64::INFINITY, f64::min)))
                .collect(),
            dashed: true,
        });
        let svg = line_chart("Risk along the interference sweep", "interference strength", "risk", &series);
        artifacts.add("sweep.svg", svg.into_bytes());
    }
    Ok(SweepOutcome {
        report,
        json,
        artifacts,
    })
}

pub fn run_sweep(cfg: &RunConfig) -> Result<SweepOutcome> {
    let outcome = sweep(cfg)?;
    outcome.artifacts.commit(&cfg.out)?;
    Ok(outcome)
}

pub struct DiagnoseOutcome {
    pub results: Vec<(Check, bool)>,
    pub json: Value,
    pub artifacts: Artifacts,
}

impl DiagnoseOutcome {
    pub fn pass(&self) -> bool {
        self.results.iter().all(|r| r.1)
    }
}

/// Runs the selected checks. `checks` overrides the configured list when
/// given.
pub fn diagnose(cfg: &RunConfig, checks: Option<&[Check]>) -> Result<DiagnoseOutcome> {
    let mut selected: Vec<Check> = checks.map(<[Check]>::to_vec).unwrap_or_else(|| cfg.diagnostics.checks.clone());
    selected.sort();
    selected.dedup();
    if selected.is_empty() {
        return Err(Error::config("diagnostics.checks", "no diagnostics selected"));
    }
    let d = &cfg.diagnostics;
    let seed = cfg.seed;
    let needs_panel = selected.iter().any(|c| matches!(c, Check::Mde | Check::Oracle));
    let prep = if needs_panel { Some(Prepared::new(cfg)?) } else { None };

    let mut results = Vec::new();
    let mut reports = serde_json::Map::new();
    let mut artifacts = Artifacts::default();
    let want_svg = cfg.wants(Format::Svg);
    for check in selected {
        let (pass, value) = match check {
            Check::Transport => {
                let r = transport_bound_check(&random_scenarios(d.transport_scenarios, seed), substream(seed, 1), d.tolerance)?;
                if want_svg {
                    let pts: Vec<(f64, f64)> = r.results.iter().map(|x| (x.bound, x.bias)).collect();
                    artifacts.add("transport.svg", scatter_chart("Transport bias against bound", "bound", "bias", &pts).into_bytes());
                }
                (r.pass, serde_json::to_value(&r)?)
            }
            Check::Minimax => {
                let r = minimax_tightness_check(&d.lipschitz, &d.shifts, d.tolerance)?;
                (r.pass, serde_json::to_value(&r)?)
            }
            Check::Catalog => {
                let r = catalog_approximation_check(&random_surfaces(d.catalog_surfaces, seed), &d.catalog_sizes, d.tolerance)?;
                if want_svg {
                    let pts: Vec<(f64, f64)> = r.results.iter().map(|x| (x.bound, x.gap)).collect();
                    artifacts.add("catalog.svg", scatter_chart("Catalog gap against bound", "bound", "gap", &pts).into_bytes());
                }
                (r.pass, serde_json::to_value(&r)?)
            }
            Check::Mde => {
                let p = prep.as_ref().expect("panel prepared");
                let ctx = EvalContext::new(&p.panel, &p.calib, &cfg.weights);
                let theta = MechanismPoint::null(Locality::Cluster);
                let r = mde_grid(&p.designs, &ctx, &theta, &d.durations, cfg.reps, seed)?;
                if want_svg {
                    let series: Vec<Series> = r
                        .rows
                        .iter()
                        .map(|row| Series {
                            name: &row.design,
                            points: r.durations.iter().zip(&row.mde).map(|(&w, &m)| (w as f64, m)).collect(),
                            dashed: false,
                        })
                        .collect();
                    artifacts.add("mde.svg", line_chart("Planning MDE by duration", "weeks", "MDE", &series).into_bytes());
                }
                (r.pass, serde_json::to_value(&r)?)
            }
            Check::Oracle => {
                let p = prep.as_ref().expect("panel prepared");
                let ctx = EvalContext::new(&p.panel, &p.calib, &cfg.weights);
                let r = oracle_comparison(&ctx, &p.designs, p.grid.points(), d.low_reps, d.high_reps, seed, &cfg.selector)?;
                (r.pass, serde_json::to_value(&r)?)
            }
            Check::Dominance => {
                let r = dominance_check(d.witness_trials, seed)?;
                (r.pass, serde_json::to_value(&r)?)
            }
            Check::Certificate => {
                let r = selector_certificate(d.certificate_trials, seed, &cfg.weights)?;
                (r.pass, serde_json::to_value(&r)?)
            }
        };
        results.push((check, pass));
        reports.insert(check.as_str().to_string(), json!({ "pass": pass, "report": value }));
    }
    let pass = results.iter().all(|r| r.1);
    let json = json!({
        "schema_version": SCHEMA_VERSION,
        "config_digest": cfg.digest(),
        "seed": seed,
        "pass": pass,
        "checks": Value::Object(reports),
    });
    if cfg.wants(Format::Json) {
        artifacts.files.insert(0, ("diagnostics.json".to_string(), to_json(&json)?));
    }
    Ok(DiagnoseOutcome {
        results,
        json,
        artifacts,
    })
}

pub fn run_diagnose(cfg: &RunConfig, checks: Option<&[Check]>) -> Result<DiagnoseOutcome> {
    let outcome = diagnose(cfg, checks)?;
    outcome.artifacts.commit(&cfg.out)?;
    Ok(outcome)
}

/// Writes the configured panel as `panel.csv` in the ingestion format.
pub fn run_simulate(cfg: &RunConfig) -> Result<PathBuf> {
    let panel = load_panel(cfg)?;
    let mut bytes = Vec::new();
    write_panel_csv(&panel, &mut bytes)?;
    let mut artifacts = Artifacts::default();
    artifacts.add("panel.csv", bytes);
    let mut written = artifacts.commit(&cfg.out)?;
    Ok(written.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(out: &Path) -> RunConfig {
        let text = r#"
            reps = 2
            [panel]
            source = "synthetic"
            n_units = 60
            n_clusters = 6
            n_budget_groups = 3
            n_regions = 2
            periods = 6
            [grid]
            gamma_g = [0.0, 0.3]
            gamma_b = [0.0]
            lambda = [0.0, 0.2]
            locality = ["cluster"]
            [diagnostics]
            transport_scenarios = 5
            catalog_surfaces = 2
            low_reps = 2
            high_reps = 3
            certificate_trials = 10
            witness_trials = 20
        "#;
        let mut c = RunConfig::from_toml_str(text, Path::new(".")).unwrap();
        c.out = out.to_path_buf();
        c
    }

    #[test]
    fn select_writes_all_formats() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(&dir.path().join("run"));
        let out = run_select(&cfg).unwrap();
        assert_eq!(out.artifacts.names(), vec!["decision.json", "surface.csv", "ranking.svg"]);
        let json: Value = serde_json::from_slice(&fs::read(cfg.out.join("decision.json")).unwrap()).unwrap();
        assert_eq!(json["schema_version"], SCHEMA_VERSION);
        assert_eq!(json["surface_path"], "surface.csv");
        assert_eq!(json["decision"]["q"].as_object().unwrap().len(), 6);
        let csv = fs::read_to_string(cfg.out.join("surface.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 6 * 4);
    }

    #[test]
    fn format_selection_limits_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.formats = vec![Format::Json];
        let out = select(&cfg).unwrap();
        assert_eq!(out.artifacts.names(), vec!["decision.json"]);
        assert_eq!(out.report.surface_path, None);
    }

    #[test]
    fn failed_commit_leaves_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::default();
        a.add("ok.txt", b"x".to_vec());
        a.add("missing/nested.txt", b"y".to_vec());
        let target = dir.path().join("out");
        assert!(a.commit(&target).is_err());
        assert!(!target.exists());
    }

    #[test]
    fn diagnose_rejects_empty_selection() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let e = diagnose(&cfg, Some(&[])).err().unwrap();
        assert!(e.to_string().contains("no diagnostics selected"), "{e}");
    }

    #[test]
    fn diagnose_runs_every_check() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let out = diagnose(&cfg, None).unwrap();
        assert_eq!(out.results.len(), Check::ALL.len());
        assert_eq!(out.json["checks"].as_object().unwrap().len(), Check::ALL.len());
    }

    #[test]
    fn simulate_round_trips_through_ingestion() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let path = run_simulate(&cfg).unwrap();
        let back = ingest_log_csv(fs::File::open(path).unwrap(), &Default::default()).unwrap();
        let orig = load_panel(&cfg).unwrap();
        assert_eq!(back.n_units(), orig.n_units());
        assert_eq!(back.periods(), orig.periods());
    }

    #[test]
    fn thread_cap_rejects_zero() {
        assert!(with_thread_cap(Some(0), || 1).is_err());
        assert_eq!(with_thread_cap(Some(2), rayon::current_num_threads).unwrap(), 2);
    }
}
