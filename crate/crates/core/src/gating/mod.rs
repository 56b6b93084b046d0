//! Temporal gating: a small recurrent cell over frame-difference features that
//! scores how much a stream currently needs the cloud tier.
//!
//! The cell is a GRU with a volatility term on the update gate. When motion in
//! the recent feature window varies a lot, the gate opens and the hidden state
//! tracks the new content faster.

mod features;
mod train;
mod warm_start;

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FirstStageDecision;
use crate::rng::{child_rng, Purpose};

pub use features::{motion_feature, smooth_features, Frame};
pub use train::{composite_loss, loss_and_gradient, train_gating, TrainConfig, TrainOutcome, TrainingEpisode};
pub use warm_start::{consistency_filter, location_budget, warm_start_config};

/// Non-negative motion descriptor of one frame pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MotionFeature(pub Vec<f64>);

impl MotionFeature {
    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SegmentContent {
    /// Raw grayscale frames, at least two.
    Frames(Vec<Frame>),
    /// Precomputed per-frame-pair motion features.
    Motion(Vec<MotionFeature>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSegment {
    pub content: SegmentContent,
    /// Seconds between consecutive frames.
    pub frame_interval: f64,
}

impl VideoSegment {
    /// Per-frame-pair motion features, smoothed with a trailing window of 3.
    pub fn smoothed_features(&self, d: usize) -> Result<Vec<MotionFeature>> {
        let raw = match &self.content {
            SegmentContent::Frames(frames) => {
                if frames.len() < 2 {
                    return Err(Error::Input("a segment of raw frames needs at least two frames".into()));
                }
                frames.windows(2).map(|w| motion_feature(&w[1], &w[0], d)).collect::<Result<Vec<_>>>()?
            }
            SegmentContent::Motion(m) => m.clone(),
        };
        (0..raw.len()).map(|t| smooth_features(&raw[t.saturating_sub(2)..=t])).collect()
    }

    /// The smoothed feature at the end of the segment; the gate steps once per segment.
    pub fn gate_input(&self, d: usize) -> Result<MotionFeature> {
        self.smoothed_features(d)?
            .pop()
            .ok_or_else(|| Error::Input("segment carries no motion features".into()))
    }
}

/// Mean over dimensions of the population variance across the window.
/// Zero when fewer than two features are present.
pub fn volatility<'a, I>(window: I) -> f64
where
    I: IntoIterator<Item = &'a MotionFeature>,
    I::IntoIter: Clone,
{
    let it = window.into_iter();
    let n = it.clone().count();
    if n < 2 {
        return 0.0;
    }
    let d = it.clone().next().map_or(0, |f| f.dim());
    if d == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for j in 0..d {
        let mean = it.clone().map(|f| f.0[j]).sum::<f64>() / n as f64;
        total += it.clone().map(|f| (f.0[j] - mean).powi(2)).sum::<f64>() / n as f64;
    }
    total / d as f64
}

/// Row-major dense matrix with its shape stored alongside the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.data.chunks(self.cols).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `self^T v`
    pub fn mul_vec_t(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &s) in self.data.chunks(self.cols).zip(v) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * s;
            }
        }
        out
    }

    /// `self += a b^T`
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        for (row, &s) in self.data.chunks_mut(self.cols).zip(a) {
            for (x, y) in row.iter_mut().zip(b) {
                *x += s * y;
            }
        }
    }

    fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check(&self, name: &str, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols || self.data.len() != rows * cols {
            return Err(Error::Config(format!(
                "{name} must be {rows}x{cols} with {} entries, got {}x{} with {}",
                rows * cols,
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(())
    }
}

/// Weights of the gating cell for input dimension `d` and hidden size `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatingParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_g: Matrix,
    pub u_g: Matrix,
    pub b_g: Vec<f64>,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub b_r: Vec<f64>,
    pub w_h: Matrix,
    pub u_h: Matrix,
    pub b_h: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_o: f64,
    /// Weight of the window volatility on the update gate.
    pub alpha: f64,
    /// Length of the volatility window.
    pub window_t: usize,
    /// Multiplier applied to raw features before they enter the cell.
    pub input_scale: f64,
}

/// Block means of 8-bit pixel differences reach 255; the cell sees them in [0, 1].
pub const DEFAULT_INPUT_SCALE: f64 = 1.0 / 255.0;

impl GatingParams {
    pub fn zeros(d: usize, m: usize) -> Self {
        Self {
            input_dim: d,
            hidden_dim: m,
            w_g: Matrix::zeros(m, d),
            u_g: Matrix::zeros(m, m),
            b_g: vec![0.0; m],
            w_r: Matrix::zeros(m, d),
            u_r: Matrix::zeros(m, m),
            b_r: vec![0.0; m],
            w_h: Matrix::zeros(m, d),
            u_h: Matrix::zeros(m, m),
            b_h: vec![0.0; m],
            w_o: vec![0.0; m],
            b_o: 0.0,
            alpha: 0.0,
            window_t: 4,
            input_scale: 1.0,
        }
    }

    /// Seeded draw: entries uniform in `[-scale, scale]`, recurrent matrices
    /// shrunk to Frobenius norm at most 0.85 (so their spectral norm is below 0.9).
    pub fn random(seed: u64, d: usize, m: usize, scale: f64) -> Self {
        let mut rng = child_rng(seed, Purpose::GateParams, 0);
        let mut draw = |n: usize| (0..n).map(|_| rng.gen_range(-scale..=scale)).collect::<Vec<f64>>();
        let mut p = Self::zeros(d, m);
        for w in [&mut p.w_g, &mut p.w_r, &mut p.w_h, &mut p.u_g, &mut p.u_r, &mut p.u_h] {
            w.data = draw(w.data.len());
        }
        for u in [&mut p.u_g, &mut p.u_r, &mut p.u_h] {
            let norm = u.frobenius();
            if norm > 0.85 {
                u.data.iter_mut().for_each(|x| *x *= 0.85 / norm);
            }
        }
        p.b_g = draw(m);
        p.b_r = draw(m);
        p.b_h = draw(m);
        p.w_o = draw(m);
        p.b_o = draw(1)[0];
        p.alpha = draw(1)[0].abs();
        p.input_scale = DEFAULT_INPUT_SCALE;
        p
    }

    pub fn validate(&self) -> Result<()> {
        let (d, m) = (self.input_dim, self.hidden_dim);
        if d == 0 || m == 0 {
            return Err(Error::Config("gating dimensions must be positive".into()));
        }
        self.w_g.check("w_g", m, d)?;
        self.w_r.check("w_r", m, d)?;
        self.w_h.check("w_h", m, d)?;
        self.u_g.check("u_g", m, m)?;
        self.u_r.check("u_r", m, m)?;
        self.u_h.check("u_h", m, m)?;
        for (name, b) in [("b_g", &self.b_g), ("b_r", &self.b_r), ("b_h", &self.b_h), ("w_o", &self.w_o)] {
            if b.len() != m {
                return Err(Error::Config(format!("{name} must have {m} entries, got {}", b.len())));
            }
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if self.window_t < 2 {
            return Err(Error::Config(format!("volatility window must hold at least 2 features, got {}", self.window_t)));
        }
        if !(self.input_scale.is_finite() && self.input_scale > 0.0) {
            return Err(Error::Config("input_scale must be positive".into()));
        }
        if self.flatten().iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("gating parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read gating params {}: {e}", path.display())))?;
        let p: Self = serde_json::from_str(&text)?;
        p.validate()?;
        Ok(p)
    }

    /// Trainable parameters in a fixed order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for w in [&self.w_g, &self.u_g] {
            v.extend_from_slice(&w.data);
        }
        v.extend_from_slice(&self.b_g);
        for w in [&self.w_r, &self.u_r] {
            v.extend_from_slice(&w.data);
        }
        v.extend_from_slice(&self.b_r);
        for w in [&self.w_h, &self.u_h] {
            v.extend_from_slice(&w.data);
        }
        v.extend_from_slice(&self.b_h);
        v.extend_from_slice(&self.w_o);
        v.push(self.b_o);
        v.push(self.alpha);
        v
    }

    /// Inverse of [`flatten`](Self::flatten), keeping shapes and the
    /// non-trainable fields of `self`.
    pub fn unflatten(&self, v: &[f64]) -> Self {
        let mut p = self.clone();
        let mut at = 0;
        let mut take = |dst: &mut Vec<f64>| {
            let n = dst.len();
            dst.copy_from_slice(&v[at..at + n]);
            at += n;
        };
        take(&mut p.w_g.data);
        take(&mut p.u_g.data);
        take(&mut p.b_g);
        take(&mut p.w_r.data);
        take(&mut p.u_r.data);
        take(&mut p.b_r);
        take(&mut p.w_h.data);
        take(&mut p.u_h.data);
        take(&mut p.b_h);
        take(&mut p.w_o);
        let mut tail = vec![0.0; 2];
        take(&mut tail);
        p.b_o = tail[0];
        p.alpha = tail[1];
        p
    }
}

/// Recurrent state of one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateState {
    pub hidden: Vec<f64>,
    /// Last `window_t` scaled features, oldest first.
    pub feature_window: VecDeque<MotionFeature>,
    pub last_score: Option<f64>,
    pub last_decision: Option<FirstStageDecision>,
}

impl GateState {
    pub fn new(params: &GatingParams) -> Self {
        Self {
            hidden: vec![0.0; params.hidden_dim],
            feature_window: VecDeque::with_capacity(params.window_t),
            last_score: None,
            last_decision: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOutput {
    pub gate: Vec<f64>,
    pub hidden: Vec<f64>,
    pub score: f64,
}

/// Largest double below one. Gate and hidden values are kept within
/// `[-ONE_MINUS, ONE_MINUS]` so the open-interval bounds survive rounding when
/// the pre-activations saturate.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

pub(crate) fn sigmoid(x: f64) -> f64 {
    (1.0 / (1.0 + (-x).exp())).clamp(f64::EPSILON / 2.0, ONE_MINUS)
}

pub(crate) fn tanh(x: f64) -> f64 {
    x.tanh().clamp(-ONE_MINUS, ONE_MINUS)
}

/// Intermediate values of one cell step, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub volatility: f64,
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
    pub tau: f64,
}

/// One cell step on an already scaled input and volatility.
pub(crate) fn cell_forward(p: &GatingParams, x: &[f64], h_prev: &[f64], volatility: f64) -> StepCache {
    let m = p.hidden_dim;
    let affine = |w: &Matrix, u: &Matrix, b: &[f64], hv: &[f64]| -> Vec<f64> {
        let wx = w.mul_vec(x);
        let uh = u.mul_vec(hv);
        (0..m).map(|i| wx[i] + uh[i] + b[i]).collect()
    };
    let r: Vec<f64> = affine(&p.w_r, &p.u_r, &p.b_r, h_prev).into_iter().map(sigmoid).collect();
    let g: Vec<f64> =
        affine(&p.w_g, &p.u_g, &p.b_g, h_prev).into_iter().map(|a| sigmoid(a + p.alpha * volatility)).collect();
    let reset: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    let c: Vec<f64> = affine(&p.w_h, &p.u_h, &p.b_h, &reset).into_iter().map(tanh).collect();
    let h: Vec<f64> =
        (0..m).map(|i| ((1.0 - g[i]) * h_prev[i] + g[i] * c[i]).clamp(-ONE_MINUS, ONE_MINUS)).collect();
    let tau = sigmoid(p.w_o.iter().zip(&h).map(|(w, h)| w * h).sum::<f64>() + p.b_o);
    StepCache { x: x.to_vec(), h_prev: h_prev.to_vec(), volatility, r, g, c, h, tau }
}

/// Feeds one raw feature through the cell and updates `state`.
///
/// The feature is scaled by `input_scale`, pushed into the volatility window,
/// and the window variance (including the new feature) enters the update gate.
pub fn gate_step(params: &GatingParams, state: &mut GateState, feature: &MotionFeature) -> Result<GateOutput> {
    if feature.dim() != params.input_dim {
        return Err(Error::Config(format!(
            "motion feature has {} entries, gating expects {}",
            feature.dim(),
            params.input_dim
        )));
    }
    if state.hidden.len() != params.hidden_dim {
        return Err(Error::Config(format!(
            "gate state has {} hidden units, params expect {}",
            state.hidden.len(),
            params.hidden_dim
        )));
    }
    let x: Vec<f64> = feature.0.iter().map(|v| v * params.input_scale).collect();
    if state.feature_window.len() == params.window_t {
        state.feature_window.pop_front();
    }
    state.feature_window.push_back(MotionFeature(x.clone()));
    let vol = volatility(&state.feature_window);
    let step = cell_forward(params, &x, &state.hidden, vol);
    state.hidden = step.h.clone();
    state.last_score = Some(step.tau);
    Ok(GateOutput { gate: step.g, hidden: step.h, score: step.tau })
}
