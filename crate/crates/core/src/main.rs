use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use xdesign::app::{run_diagnose, run_select, run_simulate, run_sweep, with_thread_cap};
use xdesign::config::{Check, Format, RunConfig};
use xdesign::{Error, Result};

/// Pick an experiment design that stays defensible under uncertain interference.
#[derive(Parser)]
#[command(name = "xdesign", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the catalog over the ambiguity grid and pick the minimax design.
    Select(Common),
    /// Trace the winner as interference strength grows.
    Sweep(Common),
    /// Run theory and calibration checks; exits non-zero if any fails.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of transport,minimax,catalog,mde,oracle,dominance,certificate.
        #[arg(long)]
        checks: Option<String>,
    },
    /// Write the configured panel as CSV.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of json,csv,svg.
    #[arg(long)]
    format: Option<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.reps {
            cfg.reps = r;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(f) = &self.format {
            cfg.formats = Format::parse_list(f)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("XDESIGN_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::config("XDESIGN_THREADS", format!("not a positive integer: {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Select(c) => {
            let cfg = c.load()?;
            let out = run_select(&cfg)?;
            let d = &out.report.decision;
            println!(
                "selected {} (worst-case risk {:.4}, epsilon {:.4}, margin {:.4}); shortlist: {}",
                d.selected,
                d.q[&d.selected],
                d.epsilon_t,
                d.margin,
                d.shortlist.join(", ")
            );
            Ok(true)
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            let out = run_sweep(&cfg)?;
            println!("winner sequence: {}", out.json.winner_sequence.join(" -> "));
            Ok(true)
        }
        Command::Diagnose { common, checks } => {
            let cfg = common.load()?;
            let selected = checks
                .map(|s| s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(Check::parse).collect::<Result<Vec<_>>>())
                .transpose()?;
            let out = run_diagnose(&cfg, selected.as_deref())?;
            for (check, pass) in &out.results {
                println!("{} {}", if *pass { "PASS" } else { "FAIL" }, check.as_str());
            }
            Ok(out.pass())
        }
        Command::Simulate(c) => {
            let cfg = c.load()?;
            let path = run_simulate(&cfg)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = thread_cap().and_then(|cap| with_thread_cap(cap, || execute(cli.command))).and_then(|r| r);
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
