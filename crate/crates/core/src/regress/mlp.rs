//! Fully connected regressor with batch normalisation and dropout, trained
//! with AdamW on mean squared error.
//!
//! Inputs and targets are standardised with statistics of the training set;
//! the stored model maps raw features to kilograms.

use std::time::Instant;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_inputs, mse, RegressError, TrainingReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    /// Number of leading hidden layers followed by batch normalisation.
    pub batch_norm_layers: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 16, 8],
            batch_norm_layers: 2,
            dropout: 0.3,
            lr: 1e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 64,
            max_epochs: 200,
            patience: 20,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
            seed: 0,
        }
    }
}

/// How batch normalisation and dropout behave in a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, dropout active, running statistics updated.
    Train,
    /// Batch statistics, no dropout, running statistics untouched.
    BatchStats,
    /// Running statistics, no dropout (inference).
    Frozen,
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    w: usize,
    b: usize,
    bn: Option<(usize, usize)>,
    n_in: usize,
    n_out: usize,
}

fn layout(sizes: &[usize], n_bn: usize) -> (Vec<Offsets>, usize) {
    let mut out = Vec::new();
    let mut at = 0;
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = at;
        at += n_in * n_out;
        let b = at;
        at += n_out;
        let bn = if l < n_bn && l + 2 < sizes.len() {
            let g = at;
            at += 2 * n_out;
            Some((g, g + n_out))
        } else {
            None
        };
        out.push(Offsets {
            w,
            b,
            bn,
            n_in,
            n_out,
        });
    }
    (out, at)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    /// Layer widths including input and output, e.g. `[36, 32, 16, 8, 1]`.
    pub sizes: Vec<usize>,
    pub batch_norm_layers: usize,
    /// All weights, biases and batch-norm scales/shifts, layer by layer.
    pub params: Vec<f64>,
    pub running_mean: Vec<Vec<f64>>,
    pub running_var: Vec<Vec<f64>>,
    pub bn_eps: f64,
    pub dropout: f64,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
}

struct LayerCache {
    input: Vec<f64>,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    pre_act: Vec<f64>,
    mask: Vec<f64>,
}

impl MlpModel {
    /// Fresh network with He-uniform weights.
    pub fn new(n_features: usize, cfg: &MlpConfig, rng: &mut impl Rng) -> Self {
        let mut sizes = vec![n_features];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        let n_bn = cfg.batch_norm_layers.min(cfg.hidden.len());
        let (offs, total) = layout(&sizes, n_bn);
        let mut params = vec![0.0; total];
        let mut running_mean = Vec::new();
        let mut running_var = Vec::new();
        for o in &offs {
            let bound = (6.0 / o.n_in as f64).sqrt();
            for p in &mut params[o.w..o.w + o.n_in * o.n_out] {
                *p = rng.random_range(-bound..bound);
            }
            if let Some((g, _)) = o.bn {
                params[g..g + o.n_out].fill(1.0);
                running_mean.push(vec![0.0; o.n_out]);
                running_var.push(vec![1.0; o.n_out]);
            }
        }
        Self {
            sizes,
            batch_norm_layers: n_bn,
            params,
            running_mean,
            running_var,
            bn_eps: cfg.bn_eps,
            dropout: cfg.dropout,
            x_mean: vec![0.0; n_features],
            x_scale: vec![1.0; n_features],
            y_mean: 0.0,
            y_scale: 1.0,
        }
    }

    /// Length of [`MlpModel::params`] implied by the layer sizes.
    pub fn expected_param_count(&self) -> usize {
        layout(&self.sizes, self.batch_norm_layers).1
    }

    fn offsets(&self) -> Vec<Offsets> {
        layout(&self.sizes, self.batch_norm_layers).0
    }

    fn standardize(&self, x: &[f64], out: &mut Vec<f64>) {
        out.extend(
            x.iter()
                .zip(&self.x_mean)
                .zip(&self.x_scale)
                .map(|((v, m), s)| (v - m) / s),
        );
    }

    /// Deterministic load estimate (running statistics, no dropout).
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut h = Vec::with_capacity(x.len());
        self.standardize(x, &mut h);
        let (out, _) = self.forward(&h, 1, Mode::Frozen, None, None);
        out[0] * self.y_scale + self.y_mean
    }

    /// Forward pass over a row-major batch of standardised inputs.
    fn forward(
        &self,
        x: &[f64],
        batch: usize,
        mode: Mode,
        mut rng: Option<&mut ChaCha8Rng>,
        mut running: Option<(&mut Vec<Vec<f64>>, &mut Vec<Vec<f64>>, f64)>,
    ) -> (Vec<f64>, Vec<LayerCache>) {
        let offs = self.offsets();
        let p = &self.params;
        let mut h = x.to_vec();
        let mut caches = Vec::with_capacity(offs.len());
        let last = offs.len() - 1;
        let mut bn_idx = 0;
        for (l, o) in offs.iter().enumerate() {
            let mut z = vec![0.0; batch * o.n_out];
            for r in 0..batch {
                let hr = &h[r * o.n_in..(r + 1) * o.n_in];
                for k in 0..o.n_out {
                    let wk = &p[o.w + k * o.n_in..o.w + (k + 1) * o.n_in];
                    z[r * o.n_out + k] =
                        p[o.b + k] + wk.iter().zip(hr).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            if l == last {
                caches.push(LayerCache {
                    input: h,
                    xhat: Vec::new(),
                    inv_std: Vec::new(),
                    pre_act: Vec::new(),
                    mask: Vec::new(),
                });
                return (z, caches);
            }
            let mut xhat = Vec::new();
            let mut inv_std = Vec::new();
            if let Some((g, be)) = o.bn {
                let (mean, var) = match mode {
                    Mode::Frozen => (
                        self.running_mean[bn_idx].clone(),
                        self.running_var[bn_idx].clone(),
                    ),
                    _ => {
                        let bf = batch as f64;
                        let mut mean = vec![0.0; o.n_out];
                        let mut var = vec![0.0; o.n_out];
                        for r in 0..batch {
                            for k in 0..o.n_out {
                                mean[k] += z[r * o.n_out + k];
                            }
                        }
                        mean.iter_mut().for_each(|m| *m /= bf);
                        for r in 0..batch {
                            for k in 0..o.n_out {
                                let d = z[r * o.n_out + k] - mean[k];
                                var[k] += d * d;
                            }
                        }
                        var.iter_mut().for_each(|v| *v /= bf);
                        if let Some((rm, rv, momentum)) = running.as_mut() {
                            let unbias = if batch > 1 { bf / (bf - 1.0) } else { 1.0 };
                            for k in 0..o.n_out {
                                rm[bn_idx][k] =
                                    (1.0 - *momentum) * rm[bn_idx][k] + *momentum * mean[k];
                                rv[bn_idx][k] =
                                    (1.0 - *momentum) * rv[bn_idx][k] + *momentum * var[k] * unbias;
                            }
                        }
                        (mean, var)
                    }
                };
                inv_std = var.iter().map(|v| 1.0 / (v + self.bn_eps).sqrt()).collect();
                xhat = vec![0.0; z.len()];
                for r in 0..batch {
                    for k in 0..o.n_out {
                        let i = r * o.n_out + k;
                        xhat[i] = (z[i] - mean[k]) * inv_std[k];
                        z[i] = p[g + k] * xhat[i] + p[be + k];
                    }
                }
                bn_idx += 1;
            }
            let pre_act = z;
            let mut mask = Vec::new();
            let mut a: Vec<f64> = pre_act.iter().map(|v| v.max(0.0)).collect();
            if mode == Mode::Train && self.dropout > 0.0 {
                let rng = rng.as_mut().expect("training mode needs an rng");
                let keep = 1.0 - self.dropout;
                mask = (0..a.len())
                    .map(|_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                a.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
            }
            caches.push(LayerCache {
                input: h,
                xhat,
                inv_std,
                pre_act,
                mask,
            });
            h = a;
        }
        unreachable!("network has an output layer")
    }

    /// Mean squared error on standardised targets and its gradient with
    /// respect to [`MlpModel::params`]. `x` holds raw features.
    pub fn loss_and_grad(&self, x: ArrayView2<'_, f64>, y: &[f64], mode: Mode) -> (f64, Vec<f64>) {
        let mut xs = Vec::with_capacity(x.len());
        for row in x.rows() {
            self.standardize(&row.to_vec(), &mut xs);
        }
        let ys: Vec<f64> = y.iter().map(|v| (v - self.y_mean) / self.y_scale).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        self.loss_and_grad_std(&xs, &ys, mode, Some(&mut rng), None)
    }

    fn loss_and_grad_std(
        &self,
        xs: &[f64],
        ys: &[f64],
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
        running: Option<(&mut Vec<Vec<f64>>, &mut Vec<Vec<f64>>, f64)>,
    ) -> (f64, Vec<f64>) {
        let batch = ys.len();
        let bf = batch as f64;
        let (out, caches) = self.forward(xs, batch, mode, rng, running);
        let loss = out
            .iter()
            .zip(ys)
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>()
            / bf;
        let mut grad = vec![0.0; self.params.len()];
        let offs = self.offsets();
        let p = &self.params;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(ys)
            .map(|(o, t)| 2.0 * (o - t) / bf)
            .collect();
        for l in (0..offs.len()).rev() {
            let o = offs[l];
            let cache = &caches[l];
            if l != offs.len() - 1 {
                // dropout and rectifier
                if !cache.mask.is_empty() {
                    delta.iter_mut().zip(&cache.mask).for_each(|(d, m)| *d *= m);
                }
                delta.iter_mut().zip(&cache.pre_act).for_each(|(d, u)| {
                    if *u <= 0.0 {
                        *d = 0.0
                    }
                });
                if let Some((g, be)) = o.bn {
                    let n = o.n_out;
                    let mut dgamma = vec![0.0; n];
                    let mut dbeta = vec![0.0; n];
                    for r in 0..batch {
                        for k in 0..n {
                            let i = r * n + k;
                            dgamma[k] += delta[i] * cache.xhat[i];
                            dbeta[k] += delta[i];
                        }
                    }
                    for k in 0..n {
                        grad[g + k] += dgamma[k];
                        grad[be + k] += dbeta[k];
                    }
                    if mode == Mode::Frozen {
                        for r in 0..batch {
                            for k in 0..n {
                                delta[r * n + k] *= p[g + k] * cache.inv_std[k];
                            }
                        }
                    } else {
                        // d xhat = delta * gamma; dz = inv_std/B (B dxhat - sum dxhat - xhat sum dxhat*xhat)
                        let mut sum_dx = vec![0.0; n];
                        let mut sum_dx_xhat = vec![0.0; n];
                        for r in 0..batch {
                            for k in 0..n {
                                let i = r * n + k;
                                let dx = delta[i] * p[g + k];
                                sum_dx[k] += dx;
                                sum_dx_xhat[k] += dx * cache.xhat[i];
                            }
                        }
                        for r in 0..batch {
                            for k in 0..n {
                                let i = r * n + k;
                                let dx = delta[i] * p[g + k];
                                delta[i] = cache.inv_std[k] / bf
                                    * (bf * dx - sum_dx[k] - cache.xhat[i] * sum_dx_xhat[k]);
                            }
                        }
                    }
                }
            }
            let mut next = vec![0.0; batch * o.n_in];
            for r in 0..batch {
                let hr = &cache.input[r * o.n_in..(r + 1) * o.n_in];
                for k in 0..o.n_out {
                    let d = delta[r * o.n_out + k];
                    if d == 0.0 {
                        continue;
                    }
                    grad[o.b + k] += d;
                    let w_row = o.w + k * o.n_in;
                    for (j, hv) in hr.iter().enumerate() {
                        grad[w_row + j] += d * hv;
                        next[r * o.n_in + j] += d * p[w_row + j];
                    }
                }
            }
            delta = next;
        }
        (loss, grad)
    }
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &MlpConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            params[i] *= 1.0 - cfg.lr * cfg.weight_decay;
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
}

fn column_stats(rows: &[&[f64]], p: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for r in rows {
        for j in 0..p {
            mean[j] += r[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; p];
    for r in rows {
        for j in 0..p {
            let d = r[j] - mean[j];
            var[j] += d * d;
        }
    }
    let scale = var
        .iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

/// Trains the network and returns the snapshot with the lowest validation
/// MSE. Without validation data the training MSE drives early stopping.
///
/// The result does not depend on the order of the training rows: samples
/// are put in a canonical order before the seeded shuffle.
pub fn fit_mlp(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    val: Option<(ArrayView2<'_, f64>, &[f64])>,
    cfg: &MlpConfig,
) -> Result<(MlpModel, TrainingReport), RegressError> {
    let start = Instant::now();
    check_inputs(x, y, cfg.batch_size.max(2))?;
    if let Some((vx, vy)) = val {
        check_inputs(vx, vy, 0)?;
    }
    let (n, p) = x.dim();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        y[a].total_cmp(&y[b]).then_with(|| {
            rows[a]
                .iter()
                .zip(&rows[b])
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let sorted_rows: Vec<&[f64]> = order.iter().map(|&i| rows[i].as_slice()).collect();
    let sorted_y: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::new(p, cfg, &mut rng);
    let (x_mean, x_scale) = column_stats(&sorted_rows, p);
    let y_rows: Vec<&[f64]> = sorted_y.chunks(1).collect();
    let (y_mean, y_scale) = column_stats(&y_rows, 1);
    model.x_mean = x_mean;
    model.x_scale = x_scale;
    model.y_mean = y_mean[0];
    model.y_scale = y_scale[0];

    let mut xs = Vec::with_capacity(n * p);
    for r in &sorted_rows {
        model.standardize(r, &mut xs);
    }
    let ys: Vec<f64> = sorted_y
        .iter()
        .map(|v| (v - model.y_mean) / model.y_scale)
        .collect();

    let eval_mse = |m: &MlpModel, ex: ArrayView2<'_, f64>, ey: &[f64]| {
        let preds: Vec<f64> = ex
            .rows()
            .into_iter()
            .map(|r| m.predict(&r.to_vec()))
            .collect();
        mse(&preds, ey)
    };

    let mut opt = AdamW::new(model.params.len());
    let mut idx: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, model.clone());
    let mut history = Vec::new();
    let mut since_best = 0;
    let mut epochs = 0;
    let mut early_stopped = false;
    let mut bx = Vec::with_capacity(cfg.batch_size * p);
    let mut by = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.max_epochs {
        epochs = epoch + 1;
        idx.shuffle(&mut rng);
        for chunk in idx.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.extend_from_slice(&xs[i * p..(i + 1) * p]);
                by.push(ys[i]);
            }
            let mut rm = std::mem::take(&mut model.running_mean);
            let mut rv = std::mem::take(&mut model.running_var);
            let (loss, grad) = model.loss_and_grad_std(
                &bx,
                &by,
                Mode::Train,
                Some(&mut rng),
                Some((&mut rm, &mut rv, cfg.bn_momentum)),
            );
            model.running_mean = rm;
            model.running_var = rv;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(RegressError::NonFiniteLoss {
                    epoch,
                    tail: TrainingReport::tail_of(&history),
                });
            }
            opt.step(&mut model.params, &grad, cfg);
        }
        let monitor = match val {
            Some((vx, vy)) if !vy.is_empty() => eval_mse(&model, vx, vy),
            _ => eval_mse(&model, x, y),
        };
        if !monitor.is_finite() {
            return Err(RegressError::NonFiniteLoss {
                epoch,
                tail: TrainingReport::tail_of(&history),
            });
        }
        history.push(monitor);
        if monitor < best.0 {
            best = (monitor, model.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                early_stopped = true;
                break;
            }
        }
    }
    let model = best.1;
    let report = TrainingReport {
        train_loss: eval_mse(&model, x, y),
        val_loss: val.filter(|(_, vy)| !vy.is_empty()).map(|_| best.0),
        epochs,
        converged: early_stopped,
        wall_time_s: start.elapsed().as_secs_f64(),
        loss_tail: TrainingReport::tail_of(&history),
        kkt_residual: None,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn data(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
        let y = x
            .rows()
            .into_iter()
            .map(|r| 3.0 + r[0] - 0.5 * r[1])
            .collect();
        (x, y)
    }

    #[test]
    fn layout_matches_architecture() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = MlpModel::new(36, &MlpConfig::default(), &mut rng);
        assert_eq!(m.sizes, vec![36, 32, 16, 8, 1]);
        let expected = 36 * 32 + 32 + 64 + 32 * 16 + 16 + 32 + 16 * 8 + 8 + 8 + 1;
        assert_eq!(m.params.len(), expected);
        assert_eq!(m.running_mean.len(), 2);
    }

    fn finite_difference_check(mode: Mode) -> f64 {
        let (x, y) = data(12, 5, 11);
        let cfg = MlpConfig {
            hidden: vec![6, 5, 4],
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = MlpModel::new(5, &cfg, &mut rng);
        // non-trivial running statistics and affine parameters
        for (k, v) in m.running_mean.iter_mut().flatten().enumerate() {
            *v = 0.1 * (k as f64).sin();
        }
        for (k, v) in m.running_var.iter_mut().flatten().enumerate() {
            *v = 0.5 + 0.3 * (k as f64).cos().abs();
        }
        for (k, v) in m.params.iter_mut().enumerate() {
            *v += 0.05 * ((k * 7) as f64).sin();
        }
        let (_, grad) = m.loss_and_grad(x.view(), &y, mode);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..m.params.len() {
            let orig = m.params[k];
            m.params[k] = orig + h;
            let (lp, _) = m.loss_and_grad(x.view(), &y, mode);
            m.params[k] = orig - h;
            let (lm, _) = m.loss_and_grad(x.view(), &y, mode);
            m.params[k] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let scale = grad[k].abs().max(numeric.abs());
            if scale > 1e-7 {
                worst = worst.max((grad[k] - numeric).abs() / scale);
            }
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences_frozen() {
        let e = finite_difference_check(Mode::Frozen);
        assert!(e < 1e-4, "max relative error {e}");
    }

    #[test]
    fn gradient_matches_finite_differences_batch_stats() {
        let e = finite_difference_check(Mode::BatchStats);
        assert!(e < 1e-4, "max relative error {e}");
    }

    #[test]
    fn same_seed_and_permuted_rows_give_identical_parameters() {
        let (x, y) = data(200, 4, 5);
        let cfg = MlpConfig {
            max_epochs: 5,
            batch_size: 32,
            ..Default::default()
        };
        let (a, _) = fit_mlp(x.view(), &y, None, &cfg).unwrap();
        let perm: Vec<usize> = (0..200).rev().collect();
        let xp = Array2::from_shape_fn((200, 4), |(i, j)| x[[perm[i], j]]);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let (b, _) = fit_mlp(xp.view(), &yp, None, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn insufficient_data() {
        let (x, y) = data(10, 2, 0);
        assert!(matches!(
            fit_mlp(x.view(), &y, None, &MlpConfig::default()),
            Err(RegressError::InsufficientData { .. })
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let (x, y) = data(64, 2, 1);
        let cfg = MlpConfig {
            lr: f64::INFINITY,
            max_epochs: 3,
            batch_size: 16,
            ..Default::default()
        };
        assert!(matches!(
            fit_mlp(x.view(), &y, None, &cfg),
            Err(RegressError::NonFiniteLoss { .. })
        ));
    }
}
