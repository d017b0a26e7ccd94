//! TOML run configuration.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::designs::{default_catalog, DesignKind, DesignSpec, OpCostInputs};
use crate::diagnostics::sweep::SweepConfig;
use crate::error::{Error, Result};
use crate::mechanisms::{AmbiguityGrid, GridSpec};
use crate::panel::{CalibrationOverrides, CsvSchema, SyntheticPanelConfig};
use crate::risk::PlanningWeights;
use crate::selector::EpsilonRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PanelSource {
    Synthetic(SyntheticPanelConfig),
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: CsvSchema,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl Format {
    pub fn parse_list(s: &str) -> Result<Vec<Format>> {
        s.split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| match x {
                "json" => Ok(Format::Json),
                "csv" => Ok(Format::Csv),
                "svg" => Ok(Format::Svg),
                other => Err(Error::config("format", format!("unknown format {other:?}"))),
            })
            .collect()
    }
}

/// One catalog design; absent fields keep the kind's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub kind: DesignKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treat_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation_levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_launch: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op_cost: Option<OpCostInputs>,
}

impl CatalogEntry {
    pub fn to_spec(&self) -> DesignSpec {
        let mut d = DesignSpec::new(self.kind);
        d.label = self.label.clone();
        if let Some(v) = self.treat_prob {
            d.treat_prob = v;
        }
        if let Some(v) = self.block_length {
            d.block_length = v;
        }
        if let Some(v) = &self.saturation_levels {
            d.saturation_levels = v.clone();
        }
        if let Some(v) = self.mixture_prob {
            d.mixture_prob = v;
        }
        if let Some(v) = self.full_launch {
            d.full_launch = v;
        }
        if let Some(v) = self.op_cost {
            d.op_cost = v;
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Transport,
    Minimax,
    Catalog,
    Mde,
    Oracle,
    Dominance,
    Certificate,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Transport,
        Check::Minimax,
        Check::Catalog,
        Check::Mde,
        Check::Oracle,
        Check::Dominance,
        Check::Certificate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Check::Transport => "transport",
            Check::Minimax => "minimax",
            Check::Catalog => "catalog",
            Check::Mde => "mde",
            Check::Oracle => "oracle",
            Check::Dominance => "dominance",
            Check::Certificate => "certificate",
        }
    }

    pub fn parse(s: &str) -> Result<Check> {
        Check::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::config("checks", format!("unknown diagnostic {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub checks: Vec<Check>,
    /// Slack allowed on every bound comparison.
    pub tolerance: f64,
    pub transport_scenarios: usize,
    pub lipschitz: Vec<f64>,
    pub shifts: Vec<f64>,
    pub catalog_surfaces: usize,
    pub catalog_sizes: Vec<usize>,
    pub durations: Vec<usize>,
    pub low_reps: usize,
    pub high_reps: usize,
    pub certificate_trials: usize,
    pub witness_trials: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            checks: Check::ALL.to_vec(),
            tolerance: 1e-9,
            transport_scenarios: 100,
            lipschitz: vec![0.5, 1.0, 2.0],
            shifts: vec![0.1, 0.3, 0.6],
            catalog_surfaces: 20,
            catalog_sizes: vec![5, 10, 20, 40],
            durations: vec![1, 2, 4, 8],
            low_reps: 45,
            high_reps: 260,
            certificate_trials: 200,
            witness_trials: 1000,
        }
    }
}

fn default_reps() -> usize {
    20
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv, Format::Svg]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    pub panel: PanelSource,
    #[serde(default)]
    pub calibration: CalibrationOverrides,
    #[serde(default)]
    pub grid: GridSpec,
    /// Empty means the six default designs.
    #[serde(default)]
    pub catalog: Vec<CatalogEntry>,
    #[serde(default)]
    pub weights: PlanningWeights,
    #[serde(default)]
    pub selector: EpsilonRule,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

impl RunConfig {
    /// Parses and validates; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        if let PanelSource::Csv { path, .. } = &mut cfg.panel {
            if path.is_relative() {
                *path = base_dir.join(&*path);
            }
        }
        if cfg.out.is_relative() {
            cfg.out = base_dir.join(&cfg.out);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config("config", format!("cannot read {}: {e}", path.display()))
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::config("reps", "must be at least 1"));
        }
        if let PanelSource::Synthetic(p) = &self.panel {
            p.validate()?;
        }
        self.weights.validate()?;
        self.selector.validate()?;
        self.sweep.validate()?;
        let catalog = self.designs();
        let mut names = HashSet::new();
        for (i, d) in catalog.iter().enumerate() {
            d.validate()
                .map_err(|e| Error::config(format!("catalog[{i}]"), e.to_string()))?;
            if !names.insert(d.name()) {
                return Err(Error::config(
                    format!("catalog[{i}]"),
                    format!("duplicate design name {:?}; set a label", d.name()),
                ));
            }
        }
        self.ambiguity_grid()
            .map_err(|e| Error::config("grid", e.to_string()))?;
        let d = &self.diagnostics;
        if d.low_reps == 0 || d.high_reps == 0 {
            return Err(Error::config("diagnostics", "replication counts must be positive"));
        }
        if d.catalog_sizes.iter().any(|&k| k < 2) {
            return Err(Error::config("diagnostics.catalog_sizes", "sizes must be at least 2"));
        }
        Ok(())
    }

    pub fn designs(&self) -> Vec<DesignSpec> {
        if self.catalog.is_empty() {
            default_catalog()
        } else {
            self.catalog.iter().map(CatalogEntry::to_spec).collect()
        }
    }

    pub fn ambiguity_grid(&self) -> Result<AmbiguityGrid> {
        AmbiguityGrid::from_axes(&self.grid)
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration,
    /// excluding the output directory.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}
