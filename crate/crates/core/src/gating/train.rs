use serde::{Deserialize, Serialize};

use super::{cell_forward, volatility, GatingParams, MotionFeature, StepCache};
use crate::error::{Error, Result};

/// One stream for training: raw features fed one per step, a label per step
/// saying whether the cloud tier was needed, and the normalized transmit delay
/// each tier would have incurred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingEpisode {
    pub features: Vec<MotionFeature>,
    pub labels: Vec<bool>,
    pub latency_edge: Vec<f64>,
    pub latency_cloud: Vec<f64>,
}

impl TrainingEpisode {
    fn validate(&self, d: usize) -> Result<()> {
        let n = self.features.len();
        if n == 0 || self.labels.len() != n || self.latency_edge.len() != n || self.latency_cloud.len() != n {
            return Err(Error::Input("training episode needs equal, non-zero numbers of features, labels and latencies".into()));
        }
        if self.features.iter().any(|f| f.dim() != d) {
            return Err(Error::Input(format!("training features must have dimension {d}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the expected transmit delay term.
    pub lambda1: f64,
    /// Weight of the cloud-usage term.
    pub lambda2: f64,
    pub lr: f64,
    /// Gradient steps per stage.
    pub steps: usize,
    /// Pull of stage-two parameters towards the stage-one result.
    pub proximal_mu: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lambda1: 0.1, lambda2: 0.05, lr: 0.2, steps: 200, proximal_mu: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: GatingParams,
    /// Composite loss before each stage-one step.
    pub stage_a_loss: Vec<f64>,
    /// Composite plus proximal loss before each stage-two step.
    pub stage_b_loss: Vec<f64>,
}

/// Backpropagation is cut every this many steps.
const TBPTT: usize = 8;

fn rollout(p: &GatingParams, ep: &TrainingEpisode) -> Vec<StepCache> {
    let mut h = vec![0.0; p.hidden_dim];
    let mut window: Vec<MotionFeature> = Vec::with_capacity(p.window_t);
    let mut out = Vec::with_capacity(ep.features.len());
    for f in &ep.features {
        let x: Vec<f64> = f.0.iter().map(|v| v * p.input_scale).collect();
        if window.len() == p.window_t {
            window.remove(0);
        }
        window.push(MotionFeature(x.clone()));
        let step = cell_forward(p, &x, &h, volatility(&window));
        h = step.h.clone();
        out.push(step);
    }
    out
}

fn step_loss(tau: f64, label: bool, lat_edge: f64, lat_cloud: f64, l1: f64, l2: f64) -> f64 {
    let bce = if label { -tau.ln() } else { -(1.0 - tau).ln() };
    bce + l1 * (tau * lat_cloud + (1.0 - tau) * lat_edge) + l2 * tau
}

/// Mean over all steps of cross-entropy against the label, plus `lambda1`
/// times the score-weighted transmit delay, plus `lambda2` times the score.
pub fn composite_loss(p: &GatingParams, episodes: &[TrainingEpisode], lambda1: f64, lambda2: f64) -> Result<f64> {
    check(p, episodes)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for ep in episodes {
        for (t, s) in rollout(p, ep).iter().enumerate() {
            total += step_loss(s.tau, ep.labels[t], ep.latency_edge[t], ep.latency_cloud[t], lambda1, lambda2);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn check(p: &GatingParams, episodes: &[TrainingEpisode]) -> Result<()> {
    p.validate()?;
    if episodes.is_empty() {
        return Err(Error::Input("no training episodes".into()));
    }
    episodes.iter().try_for_each(|e| e.validate(p.input_dim))
}

/// Loss and its gradient in [`GatingParams::flatten`] order, by hand-derived
/// backpropagation through time truncated every 8 steps.
pub fn loss_and_gradient(
    p: &GatingParams,
    episodes: &[TrainingEpisode],
    lambda1: f64,
    lambda2: f64,
) -> Result<(f64, Vec<f64>)> {
    check(p, episodes)?;
    let m = p.hidden_dim;
    let steps: usize = episodes.iter().map(|e| e.features.len()).sum();
    let norm = 1.0 / steps as f64;
    let mut grad = GatingParams::zeros(p.input_dim, m);
    let mut loss = 0.0;

    for ep in episodes {
        let caches = rollout(p, ep);
        let mut dh_next = vec![0.0; m];
        for t in (0..caches.len()).rev() {
            let s = &caches[t];
            let (label, le, lc) = (ep.labels[t], ep.latency_edge[t], ep.latency_cloud[t]);
            loss += step_loss(s.tau, label, le, lc, lambda1, lambda2);

            let y = if label { 1.0 } else { 0.0 };
            let da_o = norm * ((s.tau - y) + (lambda1 * (lc - le) + lambda2) * s.tau * (1.0 - s.tau));
            for i in 0..m {
                grad.w_o[i] += da_o * s.h[i];
            }
            grad.b_o += da_o;

            let dh: Vec<f64> = (0..m).map(|i| dh_next[i] + da_o * p.w_o[i]).collect();
            let mut dh_prev: Vec<f64> = (0..m).map(|i| dh[i] * (1.0 - s.g[i])).collect();

            let da_c: Vec<f64> = (0..m).map(|i| dh[i] * s.g[i] * (1.0 - s.c[i] * s.c[i])).collect();
            let reset: Vec<f64> = (0..m).map(|i| s.r[i] * s.h_prev[i]).collect();
            grad.w_h.add_outer(&da_c, &s.x);
            grad.u_h.add_outer(&da_c, &reset);
            for i in 0..m {
                grad.b_h[i] += da_c[i];
            }
            let d_reset = p.u_h.mul_vec_t(&da_c);

            let da_r: Vec<f64> = (0..m).map(|i| d_reset[i] * s.h_prev[i] * s.r[i] * (1.0 - s.r[i])).collect();
            for i in 0..m {
                dh_prev[i] += d_reset[i] * s.r[i];
            }
            grad.w_r.add_outer(&da_r, &s.x);
            grad.u_r.add_outer(&da_r, &s.h_prev);
            for i in 0..m {
                grad.b_r[i] += da_r[i];
            }
            for (acc, v) in dh_prev.iter_mut().zip(p.u_r.mul_vec_t(&da_r)) {
                *acc += v;
            }

            let da_g: Vec<f64> = (0..m).map(|i| dh[i] * (s.c[i] - s.h_prev[i]) * s.g[i] * (1.0 - s.g[i])).collect();
            grad.w_g.add_outer(&da_g, &s.x);
            grad.u_g.add_outer(&da_g, &s.h_prev);
            for i in 0..m {
                grad.b_g[i] += da_g[i];
            }
            grad.alpha += s.volatility * da_g.iter().sum::<f64>();
            for (acc, v) in dh_prev.iter_mut().zip(p.u_g.mul_vec_t(&da_g)) {
                *acc += v;
            }

            dh_next = if t % TBPTT == 0 { vec![0.0; m] } else { dh_prev };
        }
    }
    Ok((loss * norm, grad.flatten()))
}

/// Two-stage curriculum by plain gradient descent.
///
/// Stage one fits the first three quarters of `episodes` (rounded up). Stage
/// two continues on the rest, or on all episodes if there is no rest, with an
/// added `proximal_mu * |theta - theta_a|^2`. That quadratic is applied in
/// closed form each step so large `proximal_mu` stays stable. `alpha` is kept
/// non-negative.
pub fn train_gating(params: &GatingParams, episodes: &[TrainingEpisode], cfg: &TrainConfig) -> Result<TrainOutcome> {
    check(params, episodes)?;
    if !(cfg.lr > 0.0 && cfg.proximal_mu >= 0.0 && cfg.lambda1 >= 0.0 && cfg.lambda2 >= 0.0) {
        return Err(Error::Config("training needs lr > 0 and non-negative weights".into()));
    }
    let split = (episodes.len() * 3).div_ceil(4);
    let (stage_a, rest) = episodes.split_at(split);
    let stage_b = if rest.is_empty() { stage_a } else { rest };

    let alpha_at = params.flatten().len() - 1;
    let mut theta = params.flatten();
    let mut stage_a_loss = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let (loss, grad) = loss_and_gradient(&params.unflatten(&theta), stage_a, cfg.lambda1, cfg.lambda2)?;
        stage_a_loss.push(loss);
        for (w, g) in theta.iter_mut().zip(&grad) {
            *w -= cfg.lr * g;
        }
        theta[alpha_at] = theta[alpha_at].max(0.0);
    }

    let anchor = theta.clone();
    let shrink = 1.0 / (1.0 + 2.0 * cfg.lr * cfg.proximal_mu);
    let mut stage_b_loss = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let (loss, grad) = loss_and_gradient(&params.unflatten(&theta), stage_b, cfg.lambda1, cfg.lambda2)?;
        let prox: f64 = theta.iter().zip(&anchor).map(|(a, b)| (a - b) * (a - b)).sum();
        stage_b_loss.push(loss + cfg.proximal_mu * prox);
        for ((w, g), a) in theta.iter_mut().zip(&grad).zip(&anchor) {
            *w = (*w - cfg.lr * g + 2.0 * cfg.lr * cfg.proximal_mu * a) * shrink;
        }
        theta[alpha_at] = theta[alpha_at].max(0.0);
    }
    Ok(TrainOutcome { params: params.unflatten(&theta), stage_a_loss, stage_b_loss })
}
