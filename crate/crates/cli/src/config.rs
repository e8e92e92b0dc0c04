//! Pipeline and model settings from a TOML file plus command-line overrides.
//!
//! Top-level keys are [`PipelineConfig`] fields; model hyperparameters go
//! in optional `[svr]`, `[mlp]` and `[enet]` tables.

use std::path::{Path, PathBuf};

use clap::Args;
use insole_core::domain::PipelineConfig;
use insole_core::regress::ModelParams;

use crate::CliError;

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with pipeline keys and optional [svr]/[mlp]/[enet] tables
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub sample_rate_hz: Option<f64>,
    #[arg(long)]
    pub cutoff_hz: Option<f64>,
    #[arg(long)]
    pub filter_order: Option<u32>,
    #[arg(long)]
    pub baseline_window_s: Option<f64>,
    #[arg(long)]
    pub lift_window_s: Option<f64>,
    #[arg(long)]
    pub aggregation_count: Option<usize>,
    #[arg(long)]
    pub trim_low: Option<f64>,
    #[arg(long)]
    pub trim_high: Option<f64>,
    /// Comma-separated loads held out of training, e.g. 3,6,9
    #[arg(long, value_delimiter = ',')]
    pub unseen_loads_kg: Option<Vec<f64>>,
    #[arg(long)]
    pub split_seed: Option<u64>,
}

const MODEL_TABLES: [&str; 3] = ["svr", "mlp", "enet"];

fn parse_file(path: &Path) -> Result<(PipelineConfig, ModelParams), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let bad = |m: String| CliError::Input(format!("{}: {m}", path.display()));
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| bad(e.to_string()))?;

    let mut models = toml::Table::new();
    for key in MODEL_TABLES {
        if let Some(v) = table.remove(key) {
            models.insert(key.into(), v);
        }
    }
    let known = toml::Table::try_from(PipelineConfig::default()).expect("config serialises");
    if let Some(k) = table.keys().find(|k| !known.contains_key(*k)) {
        return Err(bad(format!("unknown key `{k}`")));
    }
    let pipeline: PipelineConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| bad(e.to_string()))?;
    let params: ModelParams = models
        .try_into()
        .map_err(|e: toml::de::Error| bad(e.to_string()))?;
    Ok((pipeline, params))
}

impl ConfigArgs {
    /// File settings (or defaults) with flags applied, validated.
    pub fn resolve(&self) -> Result<(PipelineConfig, ModelParams), CliError> {
        let (mut cfg, params) = match &self.config {
            Some(path) => parse_file(path)?,
            None => (PipelineConfig::default(), ModelParams::default()),
        };
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        apply!(
            sample_rate_hz,
            cutoff_hz,
            filter_order,
            baseline_window_s,
            lift_window_s,
            aggregation_count,
            trim_low,
            trim_high,
            unseen_loads_kg,
            split_seed
        );
        cfg.validate()
            .map_err(|e| CliError::Input(format!("invalid configuration: {e}")))?;
        Ok((cfg, params))
    }
}
