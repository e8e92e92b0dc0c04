//! Versioned JSON model file.
//!
//! ```json
//! {"kind": "svr", "version": 1, "hyperparams": {...},
//!  "parameters": {"bias": {"shape": [1], "data": "<base64 f64 LE>"}, ...},
//!  "training_report": {...}}
//! ```
//!
//! Parameters are stored as little-endian `f64`, so a loaded model predicts
//! bit-identically to the one that was saved.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    ElasticNetModel, MlpModel, Model, ModelKind, PolyKernel, RegressError, SvrModel, TrainedModel,
    TrainingReport,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Tensor {
    shape: Vec<usize>,
    data: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope {
    kind: ModelKind,
    version: u32,
    hyperparams: Value,
    parameters: BTreeMap<String, Tensor>,
    training_report: TrainingReport,
}

fn encode(shape: Vec<usize>, data: &[f64]) -> Tensor {
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    Tensor {
        shape,
        data: STANDARD.encode(bytes),
    }
}

fn corrupt(msg: impl Into<String>) -> RegressError {
    RegressError::CorruptFile(msg.into())
}

struct Params(BTreeMap<String, Tensor>);

impl Params {
    fn get(&self, name: &str) -> Result<(Vec<usize>, Vec<f64>), RegressError> {
        let t = self
            .0
            .get(name)
            .ok_or_else(|| corrupt(format!("missing parameter `{name}`")))?;
        let bytes = STANDARD
            .decode(&t.data)
            .map_err(|e| corrupt(format!("parameter `{name}`: {e}")))?;
        let expected: usize = t.shape.iter().product();
        if bytes.len() != expected * 8 {
            return Err(corrupt(format!(
                "parameter `{name}` holds {} bytes, shape {:?} needs {}",
                bytes.len(),
                t.shape,
                expected * 8
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok((t.shape.clone(), data))
    }

    fn vec(&self, name: &str) -> Result<Vec<f64>, RegressError> {
        self.get(name).map(|(_, d)| d)
    }

    fn scalar(&self, name: &str) -> Result<f64, RegressError> {
        match self.vec(name)?.as_slice() {
            [v] => Ok(*v),
            _ => Err(corrupt(format!("parameter `{name}` is not a scalar"))),
        }
    }
}

fn hyper<T: for<'de> Deserialize<'de>>(h: &Value, key: &str) -> Result<T, RegressError> {
    let v = h
        .get(key)
        .ok_or_else(|| corrupt(format!("missing hyperparameter `{key}`")))?;
    serde_json::from_value(v.clone()).map_err(|e| corrupt(format!("hyperparameter `{key}`: {e}")))
}

pub fn model_to_json(trained: &TrainedModel) -> String {
    let mut p = BTreeMap::new();
    let hyperparams = match &trained.model {
        Model::ElasticNet(m) => {
            p.insert("weights".into(), encode(vec![m.weights.len()], &m.weights));
            p.insert("intercept".into(), encode(vec![1], &[m.intercept]));
            json!({
                "alpha": m.alpha,
                "l1_ratio": m.l1_ratio,
                "objective": "(1/2n)||y - Xw - b||^2 + alpha*(l1_ratio*||w||_1 + (1-l1_ratio)/2*||w||_2^2)",
            })
        }
        Model::Svr(m) => {
            let (r, c) = m.support_vectors.dim();
            let sv: Vec<f64> = m.support_vectors.iter().copied().collect();
            p.insert("support_vectors".into(), encode(vec![r, c], &sv));
            p.insert(
                "dual_coef".into(),
                encode(vec![m.dual_coef.len()], &m.dual_coef),
            );
            p.insert("bias".into(), encode(vec![1], &[m.bias]));
            json!({
                "n_features": m.n_features,
                "kernel": m.kernel,
                "c": m.c,
                "epsilon": m.epsilon,
            })
        }
        Model::Mlp(m) => {
            p.insert("params".into(), encode(vec![m.params.len()], &m.params));
            for (k, (rm, rv)) in m.running_mean.iter().zip(&m.running_var).enumerate() {
                p.insert(format!("running_mean_{k}"), encode(vec![rm.len()], rm));
                p.insert(format!("running_var_{k}"), encode(vec![rv.len()], rv));
            }
            p.insert("x_mean".into(), encode(vec![m.x_mean.len()], &m.x_mean));
            p.insert("x_scale".into(), encode(vec![m.x_scale.len()], &m.x_scale));
            p.insert("y_mean".into(), encode(vec![1], &[m.y_mean]));
            p.insert("y_scale".into(), encode(vec![1], &[m.y_scale]));
            json!({
                "sizes": m.sizes,
                "batch_norm_layers": m.batch_norm_layers,
                "bn_eps": m.bn_eps,
                "dropout": m.dropout,
            })
        }
    };
    let env = Envelope {
        kind: trained.model.kind(),
        version: FORMAT_VERSION,
        hyperparams,
        parameters: p,
        training_report: trained.report.clone(),
    };
    serde_json::to_string_pretty(&env).expect("model envelope serialises")
}

pub fn model_from_json(text: &str) -> Result<TrainedModel, RegressError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    let version = raw
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| corrupt("missing version"))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(RegressError::FormatVersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let env: Envelope = serde_json::from_value(raw).map_err(|e| corrupt(e.to_string()))?;
    let h = &env.hyperparams;
    let p = Params(env.parameters);
    let model = match env.kind {
        ModelKind::Enet => Model::ElasticNet(ElasticNetModel {
            weights: p.vec("weights")?,
            intercept: p.scalar("intercept")?,
            alpha: hyper(h, "alpha")?,
            l1_ratio: hyper(h, "l1_ratio")?,
        }),
        ModelKind::Svr => {
            let n_features: usize = hyper(h, "n_features")?;
            let (shape, sv) = p.get("support_vectors")?;
            let dual_coef = p.vec("dual_coef")?;
            if shape.len() != 2 || shape[0] != dual_coef.len() || shape[1] != n_features {
                return Err(corrupt(format!(
                    "support vectors have shape {shape:?} for {} coefficients and {n_features} features",
                    dual_coef.len()
                )));
            }
            let support_vectors = Array2::from_shape_vec((shape[0], shape[1]), sv)
                .map_err(|e| corrupt(e.to_string()))?;
            let kernel: PolyKernel = hyper(h, "kernel")?;
            Model::Svr(SvrModel {
                n_features,
                support_vectors,
                dual_coef,
                bias: p.scalar("bias")?,
                kernel,
                c: hyper(h, "c")?,
                epsilon: hyper(h, "epsilon")?,
            })
        }
        ModelKind::Mlp => {
            let sizes: Vec<usize> = hyper(h, "sizes")?;
            let batch_norm_layers: usize = hyper(h, "batch_norm_layers")?;
            if sizes.len() < 2 || batch_norm_layers > sizes.len() - 2 {
                return Err(corrupt(format!(
                    "invalid layer sizes {sizes:?} with {batch_norm_layers} batch-norm layers"
                )));
            }
            let mut running_mean = Vec::new();
            let mut running_var = Vec::new();
            for k in 0..batch_norm_layers {
                let rm = p.vec(&format!("running_mean_{k}"))?;
                let rv = p.vec(&format!("running_var_{k}"))?;
                if rm.len() != sizes[k + 1] || rv.len() != sizes[k + 1] {
                    return Err(corrupt(format!("batch-norm layer {k} has the wrong width")));
                }
                running_mean.push(rm);
                running_var.push(rv);
            }
            let x_mean = p.vec("x_mean")?;
            let x_scale = p.vec("x_scale")?;
            let m = MlpModel {
                sizes: sizes.clone(),
                batch_norm_layers,
                params: p.vec("params")?,
                running_mean,
                running_var,
                bn_eps: hyper(h, "bn_eps")?,
                dropout: hyper(h, "dropout")?,
                x_mean,
                x_scale,
                y_mean: p.scalar("y_mean")?,
                y_scale: p.scalar("y_scale")?,
            };
            if m.params.len() != m.expected_param_count()
                || m.x_mean.len() != sizes[0]
                || m.x_scale.len() != sizes[0]
            {
                return Err(corrupt(
                    "MLP parameter count does not match its layer sizes",
                ));
            }
            Model::Mlp(m)
        }
    };
    Ok(TrainedModel {
        model,
        report: env.training_report,
    })
}

pub fn save_model(trained: &TrainedModel, path: &Path) -> Result<(), RegressError> {
    std::fs::write(path, model_to_json(trained))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel, RegressError> {
    model_from_json(&std::fs::read_to_string(path)?)
}
