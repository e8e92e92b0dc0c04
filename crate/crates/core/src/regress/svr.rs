//! Epsilon-SVR trained by sequential minimal optimisation.
//!
//! The dual is written over `2n` variables, `alpha_i` (sign +1) and
//! `alpha*_i` (sign -1), in the standard box-constrained form
//!
//! ```text
//! min 1/2 a^T Q a + p^T a   s.t.  s^T a = 0,  0 <= a <= C
//! Q_tu = s_t s_u K(x_t, x_u),  p = [eps - y; eps + y]
//! ```
//!
//! Working pairs are picked with second-order information (maximal
//! violating `i`, then the `j` with the largest guaranteed decrease).
//! Kernel rows are computed on demand and kept in a bounded LRU cache.

use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{check_inputs, mse, RegressError, TrainingReport};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyKernel {
    pub degree: u32,
    pub gamma: f64,
    pub coef0: f64,
}

impl PolyKernel {
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        (self.gamma * dot + self.coef0).powi(self.degree as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrParams {
    pub degree: u32,
    pub c: f64,
    pub gamma: f64,
    pub coef0: f64,
    pub epsilon: f64,
    /// Stopping threshold on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
    /// Kernel row cache budget.
    pub cache_mb: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            degree: 2,
            c: 1.0,
            gamma: 1e-8,
            coef0: 10.0,
            epsilon: 1.3,
            tol: 1e-3,
            max_iter: 100_000,
            cache_mb: 512,
        }
    }
}

impl SvrParams {
    pub fn kernel(&self) -> PolyKernel {
        PolyKernel {
            degree: self.degree,
            gamma: self.gamma,
            coef0: self.coef0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub n_features: usize,
    /// Support vectors, one per row.
    pub support_vectors: Array2<f64>,
    /// `alpha_i - alpha*_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub kernel: PolyKernel,
    pub c: f64,
    pub epsilon: f64,
}

impl SvrModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut f = self.bias;
        for (sv, beta) in self.support_vectors.rows().into_iter().zip(&self.dual_coef) {
            f += beta
                * self
                    .kernel
                    .eval(sv.as_slice().expect("row-major support vectors"), x);
        }
        f
    }

    pub fn n_support(&self) -> usize {
        self.dual_coef.len()
    }
}

struct KernelCache<'a> {
    x: ArrayView2<'a, f64>,
    kernel: PolyKernel,
    rows: Vec<Option<Box<[f64]>>>,
    last_used: Vec<u64>,
    resident: usize,
    capacity: usize,
    tick: u64,
}

impl<'a> KernelCache<'a> {
    fn new(x: ArrayView2<'a, f64>, kernel: PolyKernel, budget_bytes: usize) -> Self {
        let n = x.nrows();
        let capacity = (budget_bytes / (8 * n.max(1))).clamp(2, n.max(2));
        Self {
            x,
            kernel,
            rows: vec![None; n],
            last_used: vec![0; n],
            resident: 0,
            capacity,
            tick: 0,
        }
    }

    fn diag(&self) -> Vec<f64> {
        self.x
            .rows()
            .into_iter()
            .map(|r| {
                let r = r.to_vec();
                self.kernel.eval(&r, &r)
            })
            .collect()
    }

    fn ensure(&mut self, i: usize) {
        self.tick += 1;
        self.last_used[i] = self.tick;
        if self.rows[i].is_some() {
            return;
        }
        if self.resident >= self.capacity {
            let victim = (0..self.rows.len())
                .filter(|&k| k != i && self.rows[k].is_some())
                .min_by_key(|&k| self.last_used[k])
                .expect("cache holds at least one row");
            self.rows[victim] = None;
            self.resident -= 1;
        }
        let xi = self.x.row(i).to_vec();
        let row: Box<[f64]> = self
            .x
            .rows()
            .into_iter()
            .map(|r| match r.as_slice() {
                Some(s) => self.kernel.eval(&xi, s),
                None => self.kernel.eval(&xi, &r.to_vec()),
            })
            .collect();
        self.rows[i] = Some(row);
        self.resident += 1;
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i].as_deref().expect("row was ensured")
    }
}

struct Solution {
    beta: Vec<f64>,
    bias: f64,
    iterations: usize,
    kkt_residual: f64,
    dual_objective: f64,
    converged: bool,
}

fn solve(x: ArrayView2<'_, f64>, y: &[f64], params: &SvrParams) -> Solution {
    let n = y.len();
    let l = 2 * n;
    let c = params.c;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let real = |t: usize| if t < n { t } else { t - n };

    let mut cache = KernelCache::new(x, params.kernel(), params.cache_mb * 1024 * 1024);
    let kdiag = cache.diag();
    let p: Vec<f64> = (0..l)
        .map(|t| {
            if t < n {
                params.epsilon - y[t]
            } else {
                params.epsilon + y[t - n]
            }
        })
        .collect();
    let mut alpha = vec![0.0; l];
    let mut grad = p.clone();

    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;
    let in_up = |t: usize, a: f64| {
        if sign(t) > 0.0 {
            !is_upper(a)
        } else {
            !is_lower(a)
        }
    };
    let in_low = |t: usize, a: f64| {
        if sign(t) > 0.0 {
            !is_lower(a)
        } else {
            !is_upper(a)
        }
    };

    let mut iterations = 0;
    let mut kkt_residual;
    let mut converged = false;
    loop {
        // maximal violating i
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..l {
            if in_up(t, alpha[t]) {
                let v = -sign(t) * grad[t];
                if v >= gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i_sel != usize::MAX {
            let ri = real(i_sel);
            cache.ensure(ri);
            let krow = cache.row(ri);
            for t in 0..l {
                if !in_low(t, alpha[t]) {
                    continue;
                }
                let st = sign(t);
                let v = st * grad[t];
                if v >= gmax2 {
                    gmax2 = v;
                }
                let grad_diff = gmax + v;
                if grad_diff > 0.0 {
                    // Q_ii + Q_tt - 2 s_i s_t Q_it with Q_it = s_i s_t K
                    let quad = kdiag[ri] + kdiag[real(t)] - 2.0 * krow[real(t)];
                    let quad = if quad > 0.0 { quad } else { TAU };
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = t;
                    }
                }
            }
        }
        kkt_residual = gmax + gmax2;
        if !(kkt_residual >= params.tol) || j_sel == usize::MAX {
            converged = true;
            break;
        }
        if iterations >= params.max_iter {
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (ri, rj) = (real(i), real(j));
        let (si, sj) = (sign(i), sign(j));
        cache.ensure(ri);
        cache.ensure(rj);
        let kij = cache.row(ri)[rj];
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let quad = kdiag[ri] + kdiag[rj] - 2.0 * kij;
        let quad = if quad > 0.0 { quad } else { TAU };
        if si != sj {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let d_ai = alpha[i] - old_ai;
        let d_aj = alpha[j] - old_aj;
        let row_i = cache.row(ri);
        let row_j = cache.row(rj);
        // Q_ti = s_t s_i K(real t, real i)
        for t in 0..l {
            let st = sign(t);
            let rt = real(t);
            grad[t] += st * (si * row_i[rt] * d_ai + sj * row_j[rt] * d_aj);
        }
    }

    // bias from free variables, else midpoint of the feasible interval
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut n_free = 0usize;
    for t in 0..l {
        let yg = sign(t) * grad[t];
        if is_upper(alpha[t]) {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let dual_objective = -0.5 * (0..l).map(|t| alpha[t] * (grad[t] + p[t])).sum::<f64>();
    let beta = (0..n).map(|i| alpha[i] - alpha[i + n]).collect();
    Solution {
        beta,
        bias: -rho,
        iterations,
        kkt_residual,
        dual_objective,
        converged,
    }
}

/// Value of the SVR dual `sum y b - eps sum |b| - 1/2 b^T K b` at `beta`.
pub fn dual_objective(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    beta: &[f64],
    kernel: &PolyKernel,
    epsilon: f64,
) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * beta[j] * kernel.eval(&x.row(i).to_vec(), &x.row(j).to_vec());
        }
    }
    let lin: f64 = (0..n)
        .map(|i| y[i] * beta[i] - epsilon * beta[i].abs())
        .sum();
    lin - 0.5 * quad
}

/// Fits an epsilon-SVR with a polynomial kernel.
pub fn fit_svr(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    params: &SvrParams,
) -> Result<(SvrModel, TrainingReport), RegressError> {
    fit_svr_full(x, y, params).map(|(m, r, _)| (m, r))
}

/// Like [`fit_svr`] and also returns the full dual vector `alpha - alpha*`
/// over all training points.
pub fn fit_svr_full(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    params: &SvrParams,
) -> Result<(SvrModel, TrainingReport, Vec<f64>), RegressError> {
    let start = Instant::now();
    check_inputs(x, y, 2)?;
    let x = x.as_standard_layout().into_owned();
    let sol = solve(x.view(), y, params);
    if !sol.converged {
        return Err(RegressError::NoConvergence {
            iterations: sol.iterations,
            kkt_residual: sol.kkt_residual,
        });
    }
    let support: Vec<usize> = (0..y.len()).filter(|&i| sol.beta[i] != 0.0).collect();
    let mut svs = Array2::zeros((support.len(), x.ncols()));
    for (k, &i) in support.iter().enumerate() {
        svs.row_mut(k).assign(&x.row(i));
    }
    let model = SvrModel {
        n_features: x.ncols(),
        support_vectors: svs,
        dual_coef: support.iter().map(|&i| sol.beta[i]).collect(),
        bias: sol.bias,
        kernel: params.kernel(),
        c: params.c,
        epsilon: params.epsilon,
    };
    let preds: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|r| model.predict(r.as_slice().expect("standard layout")))
        .collect();
    let report = TrainingReport {
        train_loss: mse(&preds, y),
        val_loss: None,
        epochs: sol.iterations,
        converged: true,
        wall_time_s: start.elapsed().as_secs_f64(),
        loss_tail: vec![sol.dual_objective],
        kkt_residual: Some(sol.kkt_residual),
    };
    Ok((model, report, sol.beta))
}
