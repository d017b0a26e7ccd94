//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use xdesign::app::{diagnose, run_select, sweep, with_thread_cap};
use xdesign::config::{Check, RunConfig};
use xdesign::designs::AssignmentTable;
use xdesign::diagnostics::catalog::{catalog_approximation_check, random_surfaces, DENSE_SCAN};
use xdesign::diagnostics::certificate::{dominance_check, selector_certificate};
use xdesign::diagnostics::transport::{minimax_tightness_check, random_scenarios, transport_bound_check};
use xdesign::exposure::{exposure_features, geometry_score};
use xdesign::mechanisms::{Locality, MechanismPoint};
use xdesign::panel::{ess_share, Panel, UnitRecord};
use xdesign::risk::{mde, PlanningWeights};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn shipped(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn transport_bound() -> Outcome {
    let start = Instant::now();
    let report = transport_bound_check(&random_scenarios(100, 0), 1, 1e-9).expect("transport check runs");
    let secs = start.elapsed().as_secs_f64();
    let worst = report
        .results
        .iter()
        .filter(|r| r.bound > 0.0)
        .map(|r| r.bias / r.bound)
        .fold(0.0, f64::max);
    let ok = report.results.len() == 100 && report.pass && secs < 10.0;
    outcome(ok, format!("100 scenarios, max bias/bound = {worst:.4}, {secs:.2} s"))
}

fn minimax_tightness() -> Outcome {
    let report = minimax_tightness_check(&[0.5, 1.0, 2.0], &[0.1, 0.3, 0.6], 1e-9).expect("tightness check runs");
    let worst = report.results.iter().map(|r| (r.ratio - 1.0).abs()).fold(0.0, f64::max);
    outcome(report.results.len() == 9 && worst <= 1e-9, format!("9 cells, max |ratio - 1| = {worst:.1e}"))
}

fn catalog_approximation() -> Outcome {
    let report = catalog_approximation_check(&random_surfaces(20, 0), &[5, 10, 20, 40], 1e-9).expect("catalog check runs");
    let slack = report
        .results
        .iter()
        .map(|r| r.bound - r.gap)
        .fold(f64::INFINITY, f64::min);
    let ok = report.results.len() == 80 && report.results.iter().all(|r| r.gap <= r.bound + 1e-9) && DENSE_SCAN == 100_000;
    outcome(ok, format!("80 cases, min(bound - gap) = {slack:.4}"))
}

fn selector_certificate_criterion() -> Outcome {
    let r = selector_certificate(200, 0, &PlanningWeights::default()).expect("certificate runs");
    let ok = r.trials == 200 && r.excess_ok == 200 && r.recovered == r.separated && r.separated > 0 && r.covered == 200;
    outcome(
        ok,
        format!(
            "excess within 2eps {}/200, recovered {}/{} separated, optimum shortlisted {}/200",
            r.excess_ok, r.recovered, r.separated, r.covered
        ),
    )
}

fn regime_sweep_criterion() -> Outcome {
    let cfg = shipped("sweep.toml");
    let start = Instant::now();
    let out = sweep(&cfg).expect("sweep runs");
    let secs = start.elapsed().as_secs_f64();
    let j = &out.json;
    let first = &j.rows.first().expect("rows").winner;
    let last = &j.rows.last().expect("rows").winner;
    let panel_ok = matches!(cfg.panel, xdesign::config::PanelSource::Synthetic(ref p) if p.n_units == 2000 && p.t == 40) && cfg.reps == 20;
    let ok = first == "user" && last == "switchback" && j.distinct_winners.len() >= 3 && secs < 60.0 && panel_ok;
    outcome(ok, format!("winners {} ({} distinct), {secs:.1} s", j.winner_sequence.join(" -> "), j.distinct_winners.len()))
}

fn oracle_criterion() -> Outcome {
    let base = shipped("oracle.toml");
    let (mut matched, mut certified) = (0, 0);
    for seed in 0..20 {
        let mut cfg = base.clone();
        cfg.seed = seed;
        cfg.diagnostics.low_reps = 45;
        cfg.diagnostics.high_reps = 260;
        let out = diagnose(&cfg, Some(&[Check::Oracle])).expect("oracle runs");
        let report = &out.json["checks"]["oracle"]["report"];
        if report["selected_low"] == report["selected_high"] {
            matched += 1;
        }
        if out.pass() {
            certified += 1;
        }
    }
    outcome(
        certified >= 19,
        format!("same design {matched}/20 seeds, same design and gap within 2eps {certified}/20 seeds"),
    )
}

/// Standard normal quantile by bisection on a Simpson-rule CDF.
fn quantile_oracle(p: f64) -> f64 {
    let cdf = |x: f64| {
        let n = 20_000;
        let h = x / n as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = pdf(0.0) + pdf(x);
        for i in 1..n {
            s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        0.5 + s * h / 3.0
    };
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn formula_regressions() -> Outcome {
    let w = PlanningWeights::default();
    let got = mde(1.0, 8, &w).expect("mde");
    let oracle = (quantile_oracle(0.975) + quantile_oracle(0.8)) * (2.0f64 / 8.0).sqrt();
    let mde_ok = (got - 1.400792).abs() <= 1e-5 && (got - oracle).abs() <= 1e-5;

    let units = (0..2)
        .map(|i| UnitRecord {
            unit_id: format!("u{i}"),
            cluster_id: format!("c{i}"),
            budget_id: "b".into(),
            region_id: format!("r{i}"),
        })
        .collect();
    let panel = Panel::new(units, 1, vec![Some(0.0); 2], None).expect("panel");
    let assignment = AssignmentTable::from_cells(1, vec![1, 0], vec![0, 1]).expect("assignment");
    let theta = MechanismPoint::new(0.0, 0.5, 0.0, Locality::Cluster).expect("theta");
    let g = geometry_score(&exposure_features(&assignment, &panel, &theta).expect("features"), &theta);
    let g_ok = (g - 0.5).abs() <= 1e-12;

    let ess = ess_share(&[0.5, 0.25]).expect("ess");
    let ess_ok = (ess - 0.9).abs() <= 1e-12;
    let constant = ess_share(&[0.3; 50]).expect("ess");
    outcome(
        mde_ok && g_ok && ess_ok && constant == 1.0,
        format!("mde {got:.6} (oracle {oracle:.6}), geometry {g}, ess {ess}, constant ess {constant:.2}"),
    )
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    ["decision.json", "surface.csv"]
        .iter()
        .map(|n| (n.to_string(), fs::read(dir.join(n)).expect("artifact written")))
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().expect("tempdir");
    let run = |threads: usize, dir: PathBuf| {
        let mut cfg = shipped("select.toml");
        cfg.out = dir.clone();
        with_thread_cap(Some(threads), || run_select(&cfg).map(|_| ()))
            .expect("pool")
            .expect("select runs");
        read_outputs(&dir)
    };
    let a = run(1, tmp.path().join("one"));
    let b = run(4, tmp.path().join("four"));
    let c = run(1, tmp.path().join("again"));
    outcome(a == b && a == c, "decision.json and surface.csv identical at 1 and 4 threads")
}

fn dominance_audit() -> Outcome {
    let r = dominance_check(1000, 0).expect("dominance check runs");
    let ok = r.crossing_audit.is_none() && r.crossing_winners.len() >= 2 && r.dominating_audit == Some(r.dominator);
    outcome(
        ok,
        format!(
            "crossing audit {:?} with winners {:?}; dominating audit {:?} (dominator {})",
            r.crossing_audit, r.crossing_winners, r.dominating_audit, r.dominator
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("transport_bound", transport_bound),
        ("minimax_tightness", minimax_tightness),
        ("catalog_approximation", catalog_approximation),
        ("selector_certificate", selector_certificate_criterion),
        ("regime_sweep", regime_sweep_criterion),
        ("oracle_comparison", oracle_criterion),
        ("formula_regressions", formula_regressions),
        ("determinism", determinism),
        ("dominance_audit", dominance_audit),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
