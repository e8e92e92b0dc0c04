use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::split::{build_split, SplitSpec};
use super::stats::{mae_samples, mann_whitney_u, significance_stars};
use super::EvalError;
use crate::aggregate::Aggregator;
use crate::dataset::design_matrix;
use crate::domain::{LabeledSample, PipelineConfig};
use crate::regress::{fit_model, ModelKind, ModelParams, TrainedModel, Validation};

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub split: SplitSpec,
    pub models: Vec<ModelKind>,
    pub params: ModelParams,
    pub aggregation_count: usize,
    pub trim_low: f64,
    pub trim_high: f64,
}

impl ProtocolConfig {
    pub fn new(cfg: &PipelineConfig, models: Vec<ModelKind>, params: ModelParams) -> Self {
        Self {
            split: SplitSpec::from_config(cfg),
            models,
            params,
            aggregation_count: cfg.aggregation_count,
            trim_low: cfg.trim_low,
            trim_high: cfg.trim_high,
        }
    }
}

/// One aggregated estimate over consecutive lift-window samples.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowEstimate {
    pub subject: String,
    pub session: u32,
    pub label_kg: f64,
    /// Timestamp of the last sample in the window.
    pub t_ms: i64,
    pub estimate_kg: f64,
}

/// Aggregates per-sample predictions in tumbling windows, restarting at
/// every (subject, session, load) group. Partial windows are dropped.
pub fn aggregate_windows(
    samples: &[LabeledSample],
    idx: &[usize],
    preds: &[f64],
    count: usize,
    q_low: f64,
    q_high: f64,
) -> Result<Vec<WindowEstimate>, EvalError> {
    if idx.len() != preds.len() {
        return Err(EvalError::LengthMismatch(preds.len(), idx.len()));
    }
    let mut groups: BTreeMap<(&str, u32, i64), Vec<(i64, f64)>> = BTreeMap::new();
    for (&i, &p) in idx.iter().zip(preds) {
        let s = &samples[i];
        let Some(label) = s.label_kg else { continue };
        groups
            .entry((
                &s.subject_id,
                s.session_index,
                (label * 1000.0).round() as i64,
            ))
            .or_default()
            .push((s.frame_timestamp_ms, p));
    }
    let mut out = Vec::new();
    for ((subject, session, key), mut seq) in groups {
        seq.sort_by_key(|&(t, _)| t);
        let mut agg = Aggregator::new(count, q_low, q_high)?;
        for (t, p) in seq {
            if let Some(est) = agg.push(p)? {
                out.push(WindowEstimate {
                    subject: subject.to_string(),
                    session,
                    label_kg: key as f64 / 1000.0,
                    t_ms: t,
                    estimate_kg: est,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub train_loads_kg: Vec<f64>,
    pub test_loads_kg: Vec<f64>,
    pub subjects: Vec<String>,
}

/// Training outcome without timing, so reports are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelKind,
    pub epochs: usize,
    pub converged: bool,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub val_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallMae {
    pub model: ModelKind,
    /// Mean over aggregated windows of the whole test set.
    pub mae: f64,
    /// Mean over individual test samples.
    pub mae_raw: f64,
    pub mae_unseen: f64,
    pub mae_unseen_raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMae {
    pub subject: String,
    pub model: ModelKind,
    /// Absolute error of every aggregated window.
    pub mae: Vec<f64>,
    pub mean: f64,
    pub mean_raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadMae {
    pub load_kg: f64,
    pub model: ModelKind,
    pub mae: Vec<f64>,
    pub mean: f64,
    pub mean_raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    /// `subject` or `unseen_load`.
    pub grouping: String,
    pub group: String,
    pub model_a: ModelKind,
    pub model_b: ModelKind,
    pub u: f64,
    pub p_value: f64,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowError {
    pub subject: String,
    pub session: u32,
    pub model: ModelKind,
    pub load_kg: f64,
    pub t_ms: i64,
    pub estimate_kg: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub models: Vec<ModelKind>,
    pub unseen_loads_kg: Vec<f64>,
    pub aggregation_count: usize,
    pub trim_quantiles: (f64, f64),
    pub split: SplitSummary,
    pub training: Vec<ModelSummary>,
    pub overall: Vec<OverallMae>,
    pub per_subject: Vec<SubjectMae>,
    pub per_unseen_load: Vec<LoadMae>,
    pub pairwise: Vec<PairwiseTest>,
    pub windows: Vec<WindowError>,
}

impl EvalReport {
    pub fn overall_for(&self, model: ModelKind) -> Option<&OverallMae> {
        self.overall.iter().find(|o| o.model == model)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn loads_of(samples: &[LabeledSample], idx: &[usize]) -> Vec<f64> {
    let mut keys: Vec<i64> = idx
        .iter()
        .filter_map(|&i| samples[i].label_kg)
        .map(|l| (l * 1000.0).round() as i64)
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter().map(|k| k as f64 / 1000.0).collect()
}

/// Trains every requested model on the pooled training split (concurrently)
/// and evaluates it on the test sessions.
pub fn run_protocol(
    samples: &[LabeledSample],
    cfg: &ProtocolConfig,
) -> Result<EvalReport, EvalError> {
    if cfg.models.is_empty() {
        return Err(EvalError::InvalidSpec("no models requested".into()));
    }
    let split = build_split(samples, &cfg.split)?;
    if split.train.is_empty() || split.test.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let (x_tr, y_tr) = design_matrix(samples, &split.train);
    let (x_val, y_val) = design_matrix(samples, &split.val);
    let (x_te, y_te) = design_matrix(samples, &split.test);

    let fitted: Vec<Result<TrainedModel, EvalError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .models
            .iter()
            .map(|&kind| {
                let (x_tr, y_tr, x_val, y_val) = (&x_tr, &y_tr, &x_val, &y_val);
                scope.spawn(move || {
                    let val = Validation {
                        x: x_val.view(),
                        y: y_val,
                    };
                    fit_model(kind, x_tr.view(), y_tr, Some(val), &cfg.params).map_err(|source| {
                        EvalError::Training {
                            model: kind,
                            source,
                        }
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    });
    let fitted = fitted.into_iter().collect::<Result<Vec<_>, _>>()?;

    let unseen = &cfg.split.unseen_loads_kg;
    let is_unseen = |kg: f64| unseen.iter().any(|u| (u - kg).abs() < 1e-9);
    let subjects = split.subjects.clone();
    let mut report = EvalReport {
        models: cfg.models.clone(),
        unseen_loads_kg: unseen.clone(),
        aggregation_count: cfg.aggregation_count,
        trim_quantiles: (cfg.trim_low, cfg.trim_high),
        split: SplitSummary {
            n_train: split.train.len(),
            n_val: split.val.len(),
            n_test: split.test.len(),
            train_loads_kg: loads_of(samples, &split.train),
            test_loads_kg: loads_of(samples, &split.test),
            subjects: subjects.clone(),
        },
        training: Vec::new(),
        overall: Vec::new(),
        per_subject: Vec::new(),
        per_unseen_load: Vec::new(),
        pairwise: Vec::new(),
        windows: Vec::new(),
    };

    // per model: window errors and raw errors, keyed for grouping
    let mut by_subject: BTreeMap<(String, ModelKind), Vec<f64>> = BTreeMap::new();
    let mut by_load: BTreeMap<(i64, ModelKind), Vec<f64>> = BTreeMap::new();
    for (kind, trained) in cfg.models.iter().copied().zip(&fitted) {
        let val_mae = if y_val.is_empty() {
            None
        } else {
            let p = trained.model.predict_batch(x_val.view());
            Some(mean(&mae_samples(&p, &y_val)?))
        };
        report.training.push(ModelSummary {
            model: kind,
            epochs: trained.report.epochs,
            converged: trained.report.converged,
            train_mse: trained.report.train_loss,
            val_mse: trained.report.val_loss,
            val_mae,
        });
        let preds = trained.model.predict_batch(x_te.view());
        let raw = mae_samples(&preds, &y_te)?;
        let windows = aggregate_windows(
            samples,
            &split.test,
            &preds,
            cfg.aggregation_count,
            cfg.trim_low,
            cfg.trim_high,
        )?;
        let mut all = Vec::new();
        let mut unseen_w = Vec::new();
        for w in &windows {
            let err = (w.estimate_kg - w.label_kg).abs();
            all.push(err);
            if is_unseen(w.label_kg) {
                unseen_w.push(err);
                by_load
                    .entry(((w.label_kg * 1000.0).round() as i64, kind))
                    .or_default()
                    .push(err);
            }
            by_subject
                .entry((w.subject.clone(), kind))
                .or_default()
                .push(err);
            report.windows.push(WindowError {
                subject: w.subject.clone(),
                session: w.session,
                model: kind,
                load_kg: w.label_kg,
                t_ms: w.t_ms,
                estimate_kg: w.estimate_kg,
                mae: err,
            });
        }
        let mut raw_subject: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut raw_load: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        let mut raw_unseen = Vec::new();
        for (&i, &e) in split.test.iter().zip(&raw) {
            let s = &samples[i];
            raw_subject.entry(&s.subject_id).or_default().push(e);
            if let Some(l) = s.label_kg.filter(|&l| is_unseen(l)) {
                raw_unseen.push(e);
                raw_load
                    .entry((l * 1000.0).round() as i64)
                    .or_default()
                    .push(e);
            }
        }
        report.overall.push(OverallMae {
            model: kind,
            mae: mean(&all),
            mae_raw: mean(&raw),
            mae_unseen: mean(&unseen_w),
            mae_unseen_raw: mean(&raw_unseen),
        });
        for subject in &subjects {
            let errs = by_subject
                .get(&(subject.clone(), kind))
                .cloned()
                .unwrap_or_default();
            report.per_subject.push(SubjectMae {
                subject: subject.clone(),
                model: kind,
                mean: mean(&errs),
                mae: errs,
                mean_raw: mean(raw_subject.get(subject.as_str()).map_or(&[][..], |v| v)),
            });
        }
        for &load in unseen {
            let key = (load * 1000.0).round() as i64;
            let errs = by_load.get(&(key, kind)).cloned().unwrap_or_default();
            report.per_unseen_load.push(LoadMae {
                load_kg: load,
                model: kind,
                mean: mean(&errs),
                mae: errs,
                mean_raw: mean(raw_load.get(&key).map_or(&[][..], |v| v)),
            });
        }
    }

    let pairs: Vec<(ModelKind, ModelKind)> = cfg
        .models
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| cfg.models[i + 1..].iter().map(move |&b| (a, b)))
        .collect();
    let mut push_test =
        |grouping: &str, group: String, a: ModelKind, b: ModelKind, ea: &[f64], eb: &[f64]| {
            if let Ok(t) = mann_whitney_u(ea, eb) {
                report.pairwise.push(PairwiseTest {
                    grouping: grouping.into(),
                    group,
                    model_a: a,
                    model_b: b,
                    u: t.u,
                    p_value: t.p,
                    stars: significance_stars(t.p).into(),
                });
            }
        };
    for subject in &subjects {
        for &(a, b) in &pairs {
            let ea = by_subject
                .get(&(subject.clone(), a))
                .cloned()
                .unwrap_or_default();
            let eb = by_subject
                .get(&(subject.clone(), b))
                .cloned()
                .unwrap_or_default();
            push_test("subject", subject.clone(), a, b, &ea, &eb);
        }
    }
    for &load in unseen {
        let key = (load * 1000.0).round() as i64;
        for &(a, b) in &pairs {
            let ea = by_load.get(&(key, a)).cloned().unwrap_or_default();
            let eb = by_load.get(&(key, b)).cloned().unwrap_or_default();
            push_test("unseen_load", format!("{load}"), a, b, &ea, &eb);
        }
    }
    Ok(report)
}

/// `subject,model,load,mae` with one row per aggregated window.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("subject,model,load,mae\n");
    for w in &report.windows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            w.subject, w.model, w.load_kg, w.mae
        ));
    }
    out
}

/// Mean absolute error of each of `k` folds (rows shuffled with `seed`).
pub fn cross_validate(
    kind: ModelKind,
    samples: &[LabeledSample],
    idx: &[usize],
    params: &ModelParams,
    k: usize,
    seed: u64,
) -> Result<Vec<f64>, EvalError> {
    if k < 2 || idx.len() < k {
        return Err(EvalError::InvalidSpec(format!(
            "{k}-fold cross-validation needs k >= 2 and at least k samples"
        )));
    }
    let mut order = idx.to_vec();
    order.sort_by_key(|&i| samples[i].id());
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(k);
    for fold in 0..k {
        let (held, kept): (Vec<(usize, usize)>, Vec<(usize, usize)>) = order
            .iter()
            .copied()
            .enumerate()
            .partition(|(p, _)| p % k == fold);
        let held: Vec<usize> = held.into_iter().map(|(_, i)| i).collect();
        let kept: Vec<usize> = kept.into_iter().map(|(_, i)| i).collect();
        let (x, y) = design_matrix(samples, &kept);
        let (xh, yh) = design_matrix(samples, &held);
        let m =
            fit_model(kind, x.view(), &y, None, params).map_err(|source| EvalError::Training {
                model: kind,
                source,
            })?;
        let p = m.model.predict_batch(xh.view());
        out.push(mean(&mae_samples(&p, &yh)?));
    }
    Ok(out)
}
