use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::domain::{LabeledSample, PipelineConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_sessions: Vec<u32>,
    pub test_sessions: Vec<u32>,
    /// Loads removed from training and validation, kept in the test set.
    pub unseen_loads_kg: Vec<f64>,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self::from_config(&PipelineConfig::default())
    }
}

impl SplitSpec {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        Self {
            train_sessions: vec![1, 2],
            test_sessions: vec![3],
            unseen_loads_kg: cfg.unseen_loads_kg.clone(),
            val_fraction: 0.2,
            seed: cfg.split_seed,
        }
    }

    fn is_unseen(&self, kg: f64) -> bool {
        self.unseen_loads_kg.iter().any(|u| (u - kg).abs() < 1e-9)
    }
}

/// Sample indices of each partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Subjects present; fewer than expected is allowed.
    pub subjects: Vec<String>,
}

fn load_key(kg: f64) -> i64 {
    (kg * 1000.0).round() as i64
}

/// Splits labeled samples by session and holds out the unseen loads.
///
/// The validation part is drawn per load level so every training level
/// appears in both partitions. The result depends only on the sample set
/// and the seed, not on the order of `samples`.
pub fn build_split(samples: &[LabeledSample], spec: &SplitSpec) -> Result<Split, EvalError> {
    if !(0.0..1.0).contains(&spec.val_fraction) {
        return Err(EvalError::InvalidSpec(format!(
            "validation fraction {} outside [0, 1)",
            spec.val_fraction
        )));
    }
    let mut sessions: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for s in samples {
        sessions
            .entry(&s.subject_id)
            .or_default()
            .insert(s.session_index);
    }
    for (subject, have) in &sessions {
        for &needed in spec.train_sessions.iter().chain(&spec.test_sessions) {
            if !have.contains(&needed) {
                return Err(EvalError::MissingSession {
                    subject: subject.to_string(),
                    session: needed,
                });
            }
        }
    }

    let mut candidates: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    let mut test = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let Some(label) = s.label_kg else { continue };
        if spec.test_sessions.contains(&s.session_index) {
            test.push(i);
        } else if spec.train_sessions.contains(&s.session_index) && !spec.is_unseen(label) {
            candidates.entry(load_key(label)).or_default().push(i);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (_, mut group) in candidates {
        group.sort_by_key(|&i| samples[i].id());
        group.shuffle(&mut rng);
        let mut n_val = (group.len() as f64 * spec.val_fraction).round() as usize;
        if spec.val_fraction > 0.0 && group.len() >= 2 {
            n_val = n_val.clamp(1, group.len() - 1);
        }
        val.extend_from_slice(&group[..n_val]);
        train.extend_from_slice(&group[n_val..]);
    }
    train.sort_by_key(|&i| samples[i].id());
    val.sort_by_key(|&i| samples[i].id());
    test.sort_by_key(|&i| samples[i].id());
    Ok(Split {
        train,
        val,
        test,
        subjects: sessions.keys().map(|s| s.to_string()).collect(),
    })
}
