//! `insole`: preprocess recordings, train and evaluate load regressors,
//! render pressure maps and replay sessions through the live estimator.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 computation failure,
//! 4 output or connection failure.

mod commands;
mod config;
mod stream_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use insole_core::regress::ModelKind;

use config::ConfigArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Compute(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Compute(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Svr,
    Mlp,
    Enet,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Svr => ModelKind::Svr,
            ModelArg::Mlp => ModelKind::Mlp,
            ModelArg::Enet => ModelKind::Enet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rate {
    /// Recorded cadence
    X1,
    /// Ten times faster than recorded
    X10,
    /// No pacing
    Max,
}

impl Rate {
    pub fn speedup(self) -> Option<f64> {
        match self {
            Rate::X1 => Some(1.0),
            Rate::X10 => Some(10.0),
            Rate::Max => None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "insole",
    version,
    about = "Lifted-load estimation from insole pressure data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter, segment and difference sessions into a labelled dataset CSV
    Preprocess {
        /// Session manifest (JSON); repeat for several sessions
        #[arg(long, required = true, num_args = 1..)]
        manifest: Vec<PathBuf>,
        /// Output directory; receives dataset.csv
        #[arg(long)]
        out: PathBuf,
        /// Treat recordings as already low-pass filtered
        #[arg(long)]
        skip_filter: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Fit one model on the training split and write the model file
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Model file to write
        #[arg(long)]
        out: PathBuf,
        /// Also report k-fold cross-validation MAE on the training split
        #[arg(long, value_name = "K")]
        cv: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the subject-wise, unseen-load evaluation protocol
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, required = true, num_args = 1.., value_delimiter = ',')]
        models: Vec<ModelArg>,
        /// Report JSON to write
        #[arg(long)]
        report: PathBuf,
        /// Directory for SVG box plots
        #[arg(long)]
        plots: Option<PathBuf>,
        /// Per-window errors as CSV (subject,model,load,mae)
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render every sample as a 224x224 pressure map
    RenderMaps {
        #[arg(long)]
        dataset: PathBuf,
        /// Sensor layout JSON; the built-in layout when omitted
        #[arg(long)]
        layout: Option<PathBuf>,
        /// `train` fits the colour scale on the training split; otherwise a
        /// scale.json written by an earlier run
        #[arg(long, default_value = "train")]
        scale_from: String,
        #[arg(long, visible_alias = "maps-out")]
        out: PathBuf,
        /// Render at most N samples
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Replay a session through the live estimator, one JSON line per window
    Stream {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "x1")]
        rate: Rate,
        /// Send estimates to HOST:PORT instead of standard output
        #[arg(long, value_name = "HOST:PORT")]
        tcp: Option<String>,
        /// Treat the recording as already low-pass filtered
        #[arg(long)]
        skip_filter: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write a synthetic corpus with known load response
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        subjects: usize,
        #[arg(long, default_value_t = 3)]
        sessions: u32,
        /// Mean channel response, raw units per kg
        #[arg(long, default_value_t = 65.0)]
        response_scale: f64,
        /// Sensor noise standard deviation, raw units
        #[arg(long, default_value_t = 700.0)]
        noise_sigma: f64,
        /// Timestamp jitter amplitude in ms
        #[arg(long, default_value_t = 0)]
        jitter_ms: i64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Preprocess {
            manifest,
            out,
            skip_filter,
            config,
        } => commands::preprocess(&manifest, &out, skip_filter, &config),
        Command::Train {
            dataset,
            model,
            out,
            cv,
            config,
        } => commands::train(&dataset, model.into(), &out, cv, &config),
        Command::Evaluate {
            dataset,
            models,
            report,
            plots,
            csv,
            config,
        } => commands::evaluate(
            &dataset,
            models.into_iter().map(Into::into).collect(),
            &report,
            plots.as_deref(),
            csv.as_deref(),
            &config,
        ),
        Command::RenderMaps {
            dataset,
            layout,
            scale_from,
            out,
            limit,
            config,
        } => commands::render_maps(
            &dataset,
            layout.as_deref(),
            &scale_from,
            &out,
            limit,
            &config,
        ),
        Command::Stream {
            manifest,
            model,
            rate,
            tcp,
            skip_filter,
            config,
        } => stream_cmd::run(
            &manifest,
            &model,
            rate,
            tcp.as_deref(),
            skip_filter,
            &config,
        ),
        Command::Synth {
            out,
            seed,
            subjects,
            sessions,
            response_scale,
            noise_sigma,
            jitter_ms,
        } => commands::synth(
            &out,
            insole_core::synth::CorpusParams {
                subjects,
                sessions,
                response_scale,
                noise_sigma,
                seed,
                ..Default::default()
            },
            jitter_ms,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
