//! Elastic net by cyclic coordinate descent.
//!
//! Minimises
//!
//! ```text
//! (1/(2n)) ||y - Xw - b||^2 + alpha * (rho ||w||_1 + (1 - rho)/2 ||w||_2^2)
//! ```
//!
//! with the intercept `b` left unpenalised. For any `w` the optimal
//! intercept is `mean(y) - mean(X) w`, so the sweeps run on the centred
//! problem through its Gram matrix and `b` is recovered at the end.

use std::time::Instant;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{check_inputs, mse, RegressError, TrainingReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElasticNetParams {
    pub alpha: f64,
    pub l1_ratio: f64,
    /// Largest coordinate change, in units of the column's standard
    /// deviation, that still counts as converged.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for ElasticNetParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            l1_ratio: 0.1,
            tol: 1e-6,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNetModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
    pub l1_ratio: f64,
}

impl ElasticNetModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    /// Value of the penalised objective on `(x, y)`.
    pub fn objective(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> f64 {
        let n = y.len() as f64;
        let data: f64 = x
            .rows()
            .into_iter()
            .zip(y)
            .map(|(row, t)| {
                let r = t - self.intercept - row.dot(&ndarray::ArrayView1::from(&self.weights));
                r * r
            })
            .sum();
        let l1: f64 = self.weights.iter().map(|w| w.abs()).sum();
        let l2: f64 = self.weights.iter().map(|w| w * w).sum();
        data / (2.0 * n) + self.alpha * (self.l1_ratio * l1 + 0.5 * (1.0 - self.l1_ratio) * l2)
    }

    /// Largest violation of the coordinate-wise optimality conditions.
    pub fn stationarity_violation(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> f64 {
        let n = y.len() as f64;
        let resid: Vec<f64> = x
            .rows()
            .into_iter()
            .zip(y)
            .map(|(row, t)| t - self.predict(row.as_slice().unwrap_or(&row.to_vec())))
            .collect();
        let l1 = self.alpha * self.l1_ratio;
        let l2 = self.alpha * (1.0 - self.l1_ratio);
        let mut worst = resid.iter().sum::<f64>().abs() / n;
        for (j, &w) in self.weights.iter().enumerate() {
            let g = -x
                .column(j)
                .iter()
                .zip(&resid)
                .map(|(a, r)| a * r)
                .sum::<f64>()
                / n
                + l2 * w;
            let v = if w != 0.0 {
                (g + l1 * w.signum()).abs()
            } else {
                (g.abs() - l1).max(0.0)
            };
            worst = worst.max(v);
        }
        worst
    }
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Cyclic coordinate descent. `report.loss_tail` holds the objective after
/// the last sweeps; the full per-sweep trace is returned by
/// [`fit_elastic_net_traced`].
pub fn fit_elastic_net(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    params: &ElasticNetParams,
) -> Result<(ElasticNetModel, TrainingReport), RegressError> {
    fit_elastic_net_traced(x, y, params).map(|(m, r, _)| (m, r))
}

pub fn fit_elastic_net_traced(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    params: &ElasticNetParams,
) -> Result<(ElasticNetModel, TrainingReport, Vec<f64>), RegressError> {
    let start = Instant::now();
    check_inputs(x, y, 1)?;
    if !(params.alpha >= 0.0) || !(0.0..=1.0).contains(&params.l1_ratio) {
        return Err(RegressError::ShapeMismatch(format!(
            "alpha must be >= 0 and l1_ratio in [0, 1], got {} / {}",
            params.alpha, params.l1_ratio
        )));
    }
    let (n, p) = x.dim();
    let nf = n as f64;
    let x_mean: Vec<f64> = (0..p).map(|j| x.column(j).sum() / nf).collect();
    let y_mean = y.iter().sum::<f64>() / nf;

    // centred second moments
    let mut gram = vec![0.0; p * p];
    let mut xy = vec![0.0; p];
    let mut yy = 0.0;
    let mut xc = vec![0.0; p];
    for (row, &t) in x.rows().into_iter().zip(y) {
        for j in 0..p {
            xc[j] = row[j] - x_mean[j];
        }
        let yc = t - y_mean;
        yy += yc * yc;
        for j in 0..p {
            xy[j] += xc[j] * yc;
            for k in j..p {
                gram[j * p + k] += xc[j] * xc[k];
            }
        }
    }
    for j in 0..p {
        xy[j] /= nf;
        for k in j..p {
            gram[j * p + k] /= nf;
            gram[k * p + j] = gram[j * p + k];
        }
    }
    yy /= nf;

    let l1 = params.alpha * params.l1_ratio;
    let l2 = params.alpha * (1.0 - params.l1_ratio);
    let objective = |w: &[f64], gw: &[f64]| {
        let mut quad = yy;
        for j in 0..p {
            quad += w[j] * gw[j] - 2.0 * xy[j] * w[j];
        }
        let pen: f64 = w.iter().map(|v| l1 * v.abs() + 0.5 * l2 * v * v).sum();
        0.5 * quad.max(0.0) + pen
    };

    let mut w = vec![0.0; p];
    let mut gw = vec![0.0; p];
    let mut history = vec![objective(&w, &gw)];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < params.max_sweeps {
        sweeps += 1;
        let mut max_step: f64 = 0.0;
        for j in 0..p {
            let gjj = gram[j * p + j];
            let denom = gjj + l2;
            let new = if denom > 0.0 {
                let rho_j = xy[j] - gw[j] + gjj * w[j];
                soft_threshold(rho_j, l1) / denom
            } else {
                0.0
            };
            let delta = new - w[j];
            if delta != 0.0 {
                w[j] = new;
                for k in 0..p {
                    gw[k] += delta * gram[k * p + j];
                }
                max_step = max_step.max(delta.abs() * gjj.sqrt().max(f64::MIN_POSITIVE));
            }
        }
        history.push(objective(&w, &gw));
        if max_step < params.tol {
            converged = true;
            break;
        }
    }

    let intercept = y_mean - w.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
    let model = ElasticNetModel {
        weights: w,
        intercept,
        alpha: params.alpha,
        l1_ratio: params.l1_ratio,
    };
    let preds: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|r| model.predict(r.as_slice().unwrap_or(&r.to_vec())))
        .collect();
    let report = TrainingReport {
        train_loss: mse(&preds, y),
        val_loss: None,
        epochs: sweeps,
        converged,
        wall_time_s: start.elapsed().as_secs_f64(),
        loss_tail: TrainingReport::tail_of(&history),
        kkt_residual: None,
    };
    Ok((model, report, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_x(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn ols_limit_on_exact_linear_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_x(&mut rng, 60, 4);
        let y: Vec<f64> = x.column(0).iter().map(|v| 2.0 * v).collect();
        let params = ElasticNetParams {
            alpha: 0.0,
            ..Default::default()
        };
        let (m, r) = fit_elastic_net(x.view(), &y, &params).unwrap();
        assert!(r.converged);
        assert!((m.weights[0] - 2.0).abs() < 1e-8, "{:?}", m.weights);
        for w in &m.weights[1..] {
            assert!(w.abs() < 1e-8);
        }
        assert!(m.intercept.abs() < 1e-8);
    }

    #[test]
    fn huge_penalty_shrinks_to_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_x(&mut rng, 30, 3);
        let y: Vec<f64> = (0..30).map(|i| i as f64 * 0.3 + 1.0).collect();
        let params = ElasticNetParams {
            alpha: 1e9,
            ..Default::default()
        };
        let (m, _) = fit_elastic_net(x.view(), &y, &params).unwrap();
        assert!(m.weights.iter().all(|w| *w == 0.0));
        let mean = y.iter().sum::<f64>() / 30.0;
        assert!((m.intercept - mean).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let x = Array2::from_elem((3, 2), f64::NAN);
        assert!(matches!(
            fit_elastic_net(x.view(), &[1.0, 2.0, 3.0], &Default::default()),
            Err(RegressError::NonFiniteInput)
        ));
    }

    #[test]
    fn constant_label_shift_moves_only_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_x(&mut rng, 40, 5);
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(2.0..10.0)).collect();
        let y2: Vec<f64> = y.iter().map(|v| v + 3.25).collect();
        let p = ElasticNetParams::default();
        let (a, _) = fit_elastic_net(x.view(), &y, &p).unwrap();
        let (b, _) = fit_elastic_net(x.view(), &y2, &p).unwrap();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa - wb).abs() < 1e-12);
        }
        assert!((b.intercept - a.intercept - 3.25).abs() < 1e-9);
    }

    #[test]
    fn sweeps_never_increase_objective_and_end_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let x = random_x(&mut rng, 25, 6);
            let y: Vec<f64> = (0..25).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (m, r, hist) = fit_elastic_net_traced(x.view(), &y, &Default::default()).unwrap();
            assert!(r.converged);
            for pair in hist.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0));
            }
            assert!(m.stationarity_violation(x.view(), &y) < 1e-5);
            let direct = m.objective(x.view(), &y);
            assert!((direct - hist[hist.len() - 1]).abs() < 1e-9);
        }
    }
}
