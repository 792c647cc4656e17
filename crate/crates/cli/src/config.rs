//! Config-file schemas for `train` and `experiment`, with strict key
//! validation and `--set key=value` overrides.

use crate::CliError;
use mocap_recon::model::{Architecture, TrainConfig};
use serde::Deserialize;
use std::path::PathBuf;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::config(msg.into())
}

/// Apply `--set key=value` overrides to raw TOML text. Dotted keys descend
/// into tables (e.g. `train.width=128`). Values are parsed as TOML when
/// possible, else taken as strings.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<String, CliError> {
    if overrides.is_empty() {
        return Ok(text.to_string());
    }
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| config_err(format!("config is not valid TOML: {e}")))?;
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| config_err(format!("--set `{item}` is not KEY=VALUE")))?;
        // Values parse as TOML when possible (numbers, bools, arrays),
        // else they are taken verbatim as strings.
        let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").unwrap(),
            Err(_) => toml::Value::String(value.to_string()),
        };
        let mut cursor = &mut table;
        let parts: Vec<&str> = key.split('.').collect();
        for part in &parts[..parts.len() - 1] {
            cursor = cursor
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| config_err(format!("`{part}` in `{key}` is not a table")))?;
        }
        cursor.insert(parts[parts.len() - 1].to_string(), parsed);
    }
    Ok(toml::to_string(&table).expect("table serializes"))
}

/// Hyperparameter keys shared by `train` configs and the `[train]` table of
/// generalization experiments.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainParams {
    pub architecture: String,
    pub width: usize,
    pub depth: usize,
    #[serde(default = "default_keep_prob")]
    pub keep_prob: f64,
    pub learning_rate: f64,
    #[serde(default = "default_one")]
    pub lr_decay: f64,
    pub seq_len: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default = "default_alpha")]
    pub noise_alpha: f64,
    pub missing_rate: f64,
    #[serde(default = "default_gap_mean")]
    pub gap_mean: f64,
    #[serde(default = "default_gap_std")]
    pub gap_std: f64,
    #[serde(default = "default_usize_one")]
    pub stride: usize,
    #[serde(default)]
    pub max_windows_per_sequence: usize,
    pub seed: u64,
}

fn default_keep_prob() -> f64 {
    0.9
}
fn default_one() -> f64 {
    1.0
}
fn default_batch() -> usize {
    32
}
fn default_alpha() -> f64 {
    0.3
}
fn default_gap_mean() -> f64 {
    10.0
}
fn default_gap_std() -> f64 {
    5.0
}
fn default_usize_one() -> usize {
    1
}

impl TrainParams {
    pub fn to_train_config(&self) -> Result<TrainConfig, CliError> {
        let architecture: Architecture = self
            .architecture
            .parse()
            .map_err(|e| config_err(format!("{e}")))?;
        let cfg = TrainConfig {
            architecture,
            width: self.width,
            depth: self.depth,
            keep_prob: self.keep_prob,
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            seq_len: self.seq_len,
            batch_size: self.batch_size,
            epochs: self.epochs,
            noise_alpha: self.noise_alpha,
            missing_rate: self.missing_rate,
            gap_mean: self.gap_mean,
            gap_std: self.gap_std,
            stride: self.stride,
            max_windows_per_sequence: self.max_windows_per_sequence,
            rng_seed: self.seed,
        };
        cfg.validate().map_err(|e| config_err(format!("{e}")))?;
        Ok(cfg)
    }
}

/// `train` command config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub catalog: PathBuf,
    pub split: PathBuf,
    pub model_out: PathBuf,
    #[serde(default)]
    pub log_out: Option<PathBuf>,
    #[serde(default = "default_usize_one")]
    pub threads: usize,
    #[serde(flatten)]
    pub params: TrainParams,
}

impl TrainFile {
    pub fn parse(text: &str) -> Result<TrainFile, CliError> {
        toml::from_str(text).map_err(|e| config_err(format!("train config: {e}")))
    }
}

/// `experiment` command config file. Experiment-specific keys are validated
/// against the chosen experiment; setting a key the experiment does not use
/// is an error.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub experiment: String,
    pub catalog: PathBuf,
    pub split: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    #[serde(default = "default_usize_one")]
    pub threads: usize,
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(default)]
    pub lstm_model: Option<PathBuf>,
    #[serde(default)]
    pub window_model: Option<PathBuf>,
    #[serde(default)]
    pub sequences: Vec<String>,
    #[serde(default)]
    pub repeats: Option<usize>,

    // rate_table
    #[serde(default)]
    pub rates: Option<Vec<f64>>,
    #[serde(default)]
    pub gap_mean: Option<f64>,
    #[serde(default)]
    pub gap_std: Option<f64>,

    // gap_sweep
    #[serde(default)]
    pub gap_lengths: Option<Vec<usize>>,
    #[serde(default)]
    pub missing_markers: Option<usize>,
    #[serde(default)]
    pub lead_in: Option<usize>,

    // long_gap
    #[serde(default)]
    pub marker_counts: Option<Vec<usize>>,
    #[serde(default)]
    pub start_s: Option<f64>,
    #[serde(default)]
    pub present_s: Option<f64>,
    #[serde(default)]
    pub gap_s: Option<f64>,

    // generalization
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub gap_frames: Option<usize>,
    #[serde(default)]
    pub train: Option<TrainParams>,
}

pub const EXPERIMENT_NAMES: [&str; 4] = ["rate_table", "gap_sweep", "long_gap", "generalization"];

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<ExperimentFile, CliError> {
        let file: ExperimentFile =
            toml::from_str(text).map_err(|e| config_err(format!("experiment config: {e}")))?;
        if !EXPERIMENT_NAMES.contains(&file.experiment.as_str()) {
            return Err(config_err(format!(
                "unknown experiment `{}`; valid names: {}",
                file.experiment,
                EXPERIMENT_NAMES.join(", ")
            )));
        }
        file.check_key_scope()?;
        Ok(file)
    }

    /// Reject keys that belong to a different experiment type.
    fn check_key_scope(&self) -> Result<(), CliError> {
        let mut misplaced: Vec<&str> = Vec::new();
        let e = self.experiment.as_str();
        if e != "rate_table" {
            if self.rates.is_some() {
                misplaced.push("rates");
            }
            if e != "gap_sweep" && (self.gap_mean.is_some() || self.gap_std.is_some()) {
                // gap_mean/gap_std only parameterize rate_table masks
                misplaced.push("gap_mean/gap_std");
            }
        }
        if e != "gap_sweep" {
            if self.gap_lengths.is_some() {
                misplaced.push("gap_lengths");
            }
            if self.missing_markers.is_some() {
                misplaced.push("missing_markers");
            }
            if self.lead_in.is_some() {
                misplaced.push("lead_in");
            }
        }
        if e != "long_gap" {
            if self.marker_counts.is_some() {
                misplaced.push("marker_counts");
            }
            if self.start_s.is_some() || self.present_s.is_some() || self.gap_s.is_some() {
                misplaced.push("start_s/present_s/gap_s");
            }
        }
        if e != "generalization" {
            if self.rate.is_some() {
                misplaced.push("rate");
            }
            if self.gap_frames.is_some() {
                misplaced.push("gap_frames");
            }
            if self.train.is_some() {
                misplaced.push("train");
            }
        }
        if e == "gap_sweep" && (self.gap_mean.is_some() || self.gap_std.is_some()) {
            misplaced.push("gap_mean/gap_std");
        }
        if misplaced.is_empty() {
            Ok(())
        } else {
            Err(config_err(format!(
                "keys not applicable to experiment `{e}`: {}",
                misplaced.join(", ")
            )))
        }
    }
}
