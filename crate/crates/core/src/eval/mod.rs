//! Evaluation protocol: session-wise split with unseen loads held out,
//! MAE distributions and Mann-Whitney U comparisons between models.

mod plot;
mod protocol;
mod split;
mod stats;

pub use plot::{box_plot_svg, PlotGroup};
pub use protocol::{
    aggregate_windows, cross_validate, report_csv, run_protocol, EvalReport, LoadMae, ModelSummary,
    OverallMae, PairwiseTest, ProtocolConfig, SplitSummary, SubjectMae, WindowError,
    WindowEstimate,
};
pub use split::{build_split, Split, SplitSpec};
pub use stats::{
    mae, mae_samples, mann_whitney_u, mann_whitney_u_with, significance_stars, MannWhitney,
    MwMethod, EXACT_MAX_N,
};

use crate::aggregate::AggregateError;
use crate::regress::{ModelKind, RegressError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("subject {subject} has no session {session}")]
    MissingSession { subject: String, session: u32 },
    #[error("length mismatch: {0} predictions, {1} labels")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("{0}")]
    InvalidSpec(String),
    #[error("training {model} failed: {source}")]
    Training {
        model: ModelKind,
        #[source]
        source: RegressError,
    },
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
}
