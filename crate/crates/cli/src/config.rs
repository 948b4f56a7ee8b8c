//! Run configuration. Precedence: command-line flag, then environment
//! variable, then config file, then built-in default.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use semdensity::density::DEFAULT_TEMPERATURE;
use semdensity::eval::rouge::{Trimmer, DEFAULT_ROUGE_THRESHOLD};
use semdensity::eval::studies::DEFAULT_SWEEP;
use semdensity::{DensityConfig, Metric, ScoreConfig};

pub const DEFAULT_MAX_REFS: usize = 10;

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Input file(s). Records JSONL, scores JSONL, or an AUROC table for `ttest`.
    #[arg(long, short, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Output file (`score`, `ablate`, `sweep`, `ttest`) or directory (`eval`, `report`).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// TOML file with defaults for any of the options below.
    #[arg(long, env = "SEMDENSITY_CONFIG")]
    pub config: Option<PathBuf>,
    /// Temperature applied to token probabilities before weighting references.
    #[arg(long, env = "SEMDENSITY_TEMPERATURE")]
    pub temperature: Option<f64>,
    /// Rouge-L above which a response counts as correct.
    #[arg(long, env = "SEMDENSITY_ROUGE_THRESHOLD")]
    pub rouge_threshold: Option<f64>,
    /// Comma-separated metrics, e.g. `sd,se,deg,nl,ne,pe,fd,ptrue`.
    #[arg(long, env = "SEMDENSITY_METRICS", value_delimiter = ',')]
    pub metrics: Option<Vec<String>>,
    /// Largest reference count in the ablation curve.
    #[arg(long, env = "SEMDENSITY_MAX_REFS")]
    pub max_refs: Option<usize>,
    /// Comma-separated Rouge-L thresholds for the sweep.
    #[arg(long, env = "SEMDENSITY_THRESHOLDS", value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Markers that cut off a response before correctness checking (repeatable).
    #[arg(long = "trim-marker", env = "SEMDENSITY_TRIM_MARKERS", value_delimiter = ',')]
    pub trim_markers: Option<Vec<String>>,
    /// Worker threads; 0 picks one per core, 1 runs sequentially.
    #[arg(long, short, env = "SEMDENSITY_JOBS")]
    pub jobs: Option<usize>,
    /// Skip invalid lines instead of stopping at the first one.
    #[arg(long, env = "SEMDENSITY_KEEP_GOING")]
    pub keep_going: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub temperature: Option<f64>,
    pub rouge_threshold: Option<f64>,
    pub metrics: Option<Vec<String>>,
    pub max_refs: Option<usize>,
    pub thresholds: Option<Vec<f64>>,
    pub trim_markers: Option<Vec<String>>,
    pub jobs: Option<usize>,
    pub keep_going: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub output: Option<PathBuf>,
    pub temperature: f64,
    pub rouge_threshold: f64,
    /// `None` means the command's default selection.
    pub metrics: Option<Vec<Metric>>,
    pub max_refs: usize,
    pub thresholds: Vec<f64>,
    pub trim_markers: Vec<String>,
    pub jobs: usize,
    pub keep_going: bool,
}

fn parse_metrics(names: &[String]) -> Result<Vec<Metric>> {
    let mut out = Vec::new();
    for name in names.iter().filter(|n| !n.trim().is_empty()) {
        let m: Metric = name.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        bail!("metric list is empty");
    }
    Ok(out)
}

impl RunConfig {
    pub fn resolve(args: CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let temperature = args.temperature.or(file.temperature).unwrap_or(DEFAULT_TEMPERATURE);
        if !(temperature > 0.0 && temperature.is_finite()) {
            bail!("temperature must be positive, got {temperature}");
        }
        let rouge_threshold = args
            .rouge_threshold
            .or(file.rouge_threshold)
            .unwrap_or(DEFAULT_ROUGE_THRESHOLD);
        let metrics = args.metrics.or(file.metrics).map(|m| parse_metrics(&m)).transpose()?;
        let max_refs = args.max_refs.or(file.max_refs).unwrap_or(DEFAULT_MAX_REFS);
        if max_refs == 0 {
            bail!("--max-refs must be at least 1");
        }
        Ok(Self {
            inputs: args.input,
            output: args.output,
            temperature,
            rouge_threshold,
            metrics,
            max_refs,
            thresholds: args
                .thresholds
                .or(file.thresholds)
                .unwrap_or_else(|| DEFAULT_SWEEP.to_vec()),
            trim_markers: args
                .trim_markers
                .or(file.trim_markers)
                .unwrap_or_else(|| Trimmer::default().markers),
            jobs: args.jobs.or(file.jobs).unwrap_or(0),
            keep_going: args.keep_going || file.keep_going.unwrap_or(false),
        })
    }

    pub fn score_config(&self) -> ScoreConfig {
        ScoreConfig {
            density: DensityConfig::default().with_temperature(self.temperature),
            rouge_threshold: self.rouge_threshold,
            trimmer: Trimmer::new(self.trim_markers.iter().map(|m| m.replace("\\n", "\n"))),
            metrics: self.metrics.clone().unwrap_or_else(|| Metric::ALL.to_vec()),
            ..ScoreConfig::default()
        }
    }
}
