//! Load regressors: elastic net, epsilon-SVR and a small MLP, plus the
//! versioned model file.

mod elastic_net;
mod io;
mod mlp;
mod svr;

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use elastic_net::{
    fit_elastic_net, fit_elastic_net_traced, soft_threshold, ElasticNetModel, ElasticNetParams,
};
pub use io::{load_model, model_from_json, model_to_json, save_model, FORMAT_VERSION};
pub use mlp::{fit_mlp, MlpConfig, MlpModel, Mode as MlpMode};
pub use svr::{
    dual_objective as svr_dual_objective, fit_svr, fit_svr_full, PolyKernel, SvrModel, SvrParams,
};

#[derive(Debug, thiserror::Error)]
pub enum RegressError {
    #[error("training data contains non-finite values")]
    NonFiniteInput,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("{0}")]
    ShapeMismatch(String),
    #[error(
        "SMO did not converge after {iterations} iterations (KKT residual {kkt_residual:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        kkt_residual: f64,
    },
    #[error("training loss became non-finite at epoch {epoch} (recent losses: {tail:?})")]
    NonFiniteLoss { epoch: usize, tail: Vec<f64> },
    #[error("model file version {found} is not supported (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Outcome of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Mean squared error on the training data, kg^2.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Sweeps, SMO iterations or epochs, depending on the model.
    pub epochs: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    /// Objective value, or validation loss for the MLP, at the end of the
    /// most recent iterations.
    #[serde(default)]
    pub loss_tail: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt_residual: Option<f64>,
}

impl TrainingReport {
    pub(crate) fn tail_of(history: &[f64]) -> Vec<f64> {
        history[history.len().saturating_sub(10)..].to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svr,
    Mlp,
    Enet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Svr, ModelKind::Mlp, ModelKind::Enet];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Svr => "svr",
            ModelKind::Mlp => "mlp",
            ModelKind::Enet => "enet",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "svr" => Ok(ModelKind::Svr),
            "mlp" => Ok(ModelKind::Mlp),
            "enet" | "elastic-net" | "elastic_net" => Ok(ModelKind::Enet),
            other => Err(format!(
                "unknown model `{other}` (expected svr, mlp or enet)"
            )),
        }
    }
}

/// Hyperparameters for every model kind.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub svr: SvrParams,
    pub mlp: MlpConfig,
    pub enet: ElasticNetParams,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    ElasticNet(ElasticNetModel),
    Svr(SvrModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::ElasticNet(_) => ModelKind::Enet,
            Model::Svr(_) => ModelKind::Svr,
            Model::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::ElasticNet(m) => m.weights.len(),
            Model::Svr(m) => m.n_features,
            Model::Mlp(m) => m.sizes[0],
        }
    }

    /// Load estimate for one feature vector.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Model::ElasticNet(m) => m.predict(x),
            Model::Svr(m) => m.predict(x),
            Model::Mlp(m) => m.predict(x),
        }
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|r| match r.as_slice() {
                Some(s) => self.predict(s),
                None => self.predict(&r.to_vec()),
            })
            .collect()
    }
}

/// A fitted model with the hyperparameters and report that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Model,
    pub report: TrainingReport,
}

impl TrainedModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.model.predict(x)
    }
}

/// Validation data handed to fits that use it.
pub struct Validation<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [f64],
}

/// Fits the requested kind with its hyperparameters from `params`.
pub fn fit_model(
    kind: ModelKind,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    val: Option<Validation<'_>>,
    params: &ModelParams,
) -> Result<TrainedModel, RegressError> {
    let (model, mut report) = match kind {
        ModelKind::Enet => {
            let (m, r) = fit_elastic_net(x, y, &params.enet)?;
            (Model::ElasticNet(m), r)
        }
        ModelKind::Svr => {
            let (m, r) = fit_svr(x, y, &params.svr)?;
            (Model::Svr(m), r)
        }
        ModelKind::Mlp => {
            let (m, r) = fit_mlp(x, y, val.as_ref().map(|v| (v.x, v.y)), &params.mlp)?;
            return Ok(TrainedModel {
                model: Model::Mlp(m),
                report: r,
            });
        }
    };
    if let Some(v) = val {
        if !v.y.is_empty() {
            let preds = model_predictions(&model, v.x);
            report.val_loss = Some(mse(&preds, v.y));
        }
    }
    Ok(TrainedModel { model, report })
}

fn model_predictions(model: &Model, x: ArrayView2<'_, f64>) -> Vec<f64> {
    model.predict_batch(x)
}

pub(crate) fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / y.len().max(1) as f64
}

pub(crate) fn check_inputs(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    min_samples: usize,
) -> Result<(), RegressError> {
    if x.nrows() != y.len() {
        return Err(RegressError::ShapeMismatch(format!(
            "{} feature rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if y.len() < min_samples {
        return Err(RegressError::InsufficientData {
            needed: min_samples,
            got: y.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(RegressError::NonFiniteInput);
    }
    Ok(())
}
