use statrs::distribution::{ContinuousCDF, Normal};

use super::EvalError;

pub fn mae_samples(pred: &[f64], labels: &[f64]) -> Result<Vec<f64>, EvalError> {
    if pred.len() != labels.len() {
        return Err(EvalError::LengthMismatch(pred.len(), labels.len()));
    }
    if pred.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(pred
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y).abs())
        .collect())
}

/// Mean absolute error in kg.
pub fn mae(pred: &[f64], labels: &[f64]) -> Result<f64, EvalError> {
    let errs = mae_samples(pred, labels)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Largest sample size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwMethod {
    /// Exact when both samples have at most [`EXACT_MAX_N`] values.
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, EvalError> {
    mann_whitney_u_with(a, b, MwMethod::Auto)
}

/// Doubled midranks of the pooled sample (integers even with ties) and the
/// tie-group sizes.
fn doubled_midranks(pooled: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share (i + j + 2) / 2; doubled: i + j + 2
        for &k in &order[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

pub fn mann_whitney_u_with(
    a: &[f64],
    b: &[f64],
    method: MwMethod,
) -> Result<MannWhitney, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);
    let r2: u64 = ranks[..n1].iter().sum();
    let offset2 = (n1 * (n1 + 1)) as u64;
    let u = (r2 as f64 - offset2 as f64) / 2.0;
    let exact = match method {
        MwMethod::Auto => n1 <= EXACT_MAX_N && n2 <= EXACT_MAX_N,
        MwMethod::Exact => true,
        MwMethod::Normal => false,
    };
    let p = if exact {
        exact_p(&ranks, n1, r2)
    } else {
        normal_p(u, n1, n2, &ties)
    };
    Ok(MannWhitney { u, p, exact })
}

/// Two-sided exact p: share of all `C(n, n1)` rank assignments whose U is
/// at least as far from its mean as the observed one.
fn exact_p(ranks: &[u64], n1: usize, observed_r2: u64) -> f64 {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // ways[k][s]: subsets of size k with doubled-rank sum s
    let mut ways = vec![vec![0f64; width]; n1 + 1];
    ways[0][0] = 1.0;
    for &r in ranks {
        let r = r as usize;
        for k in (1..=n1).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            let (prev, cur) = (&lo[k - 1], &mut hi[0]);
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let n = ranks.len();
    let n2 = n - n1;
    let offset2 = (n1 * (n1 + 1)) as i64;
    let mean2 = (n1 * n2) as i64;
    let dev = |s: i64| (s - offset2 - mean2).abs();
    let observed = dev(observed_r2 as i64);
    let total: f64 = ways[n1].iter().sum();
    let extreme: f64 = ways[n1]
        .iter()
        .enumerate()
        .filter(|&(s, _)| dev(s as i64) >= observed)
        .map(|(_, w)| w)
        .sum();
    (extreme / total).min(1.0)
}

fn normal_p(u: f64, n1: usize, n2: usize, ties: &[usize]) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let mean = n1f * n2f / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = n1f * n2f / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(var > 0.0) {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * std.sf(z)).min(1.0)
}

/// `***`, `**`, `*` at 0.001 / 0.01 / 0.05, otherwise `ns`.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        "ns"
    }
}
