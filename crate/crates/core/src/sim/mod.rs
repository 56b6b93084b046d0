//! Synthetic workloads, traces and bandwidth, and the episode runner that
//! drives gating, solving and replay segment by segment.

mod episode;
mod profile;
mod regret;
mod workload;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gating::GatingParams;
use crate::model::UncertaintySet;
use crate::robust::SolverConfig;

pub use episode::{
    run_episode, run_episode_with, training_episodes, write_episode_csv, EpisodeMetrics, EpisodeSummary, Policy,
    SegmentMetrics,
};
pub use profile::{default_profile, random_instance, RandomInstanceDims};
pub use regret::{regret_experiment, write_regret_csv, RegretRow};
pub use workload::{
    bandwidth_process, burst_mask, generate_trace, generate_workload, segment_workload, RequirementMode, TraceFamily,
    DEFAULT_SEGMENT_FRAMES, FLUCTUATION_LEVELS, TRACE_SIDE,
};

/// Uncertainty coordinates in the default set.
pub const DEFAULT_COORDINATES: usize = 5;
pub const DEFAULT_GAMMA: usize = 2;

/// Default set for a fluctuation level: unit baselines, deviation 0.5 at 30%
/// fluctuation and proportionally less below, so no fluctuation means no
/// uncertainty.
pub fn default_uncertainty(fluctuation: f64, gamma: usize) -> UncertaintySet {
    UncertaintySet::new(
        vec![1.0; DEFAULT_COORDINATES],
        vec![0.5 * fluctuation / 0.3; DEFAULT_COORDINATES],
        gamma,
    )
}

fn default_beta() -> f64 {
    0.06
}
fn default_frames_per_segment() -> usize {
    6
}
fn default_segment_frames() -> u32 {
    DEFAULT_SEGMENT_FRAMES
}
fn default_feature_dim() -> usize {
    16
}
fn default_motion_threshold() -> f64 {
    8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub task_count: usize,
    pub requirement_mode: RequirementMode,
    /// Replaces the mode's requirement range when set.
    #[serde(default)]
    pub requirement_range: Option<(f64, f64)>,
    /// One of 0, 0.1, 0.2, 0.3.
    pub bandwidth_fluctuation: f64,
    pub trace_family: TraceFamily,
    pub episode_segments: usize,
    /// Defaults to [`default_uncertainty`] at the scenario's fluctuation.
    #[serde(default)]
    pub uset: Option<UncertaintySet>,
    /// Budget of the uncertainty set; 2 unless given, or the explicit set's own budget.
    #[serde(default)]
    pub gamma: Option<usize>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_frames_per_segment")]
    pub frames_per_segment: usize,
    /// Frames each task uploads per segment.
    #[serde(default = "default_segment_frames")]
    pub segment_frames: u32,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    /// Location flips allowed per unit change of the score; defaults to the task count.
    #[serde(default)]
    pub delta_max: Option<usize>,
    /// Mean block motion above which a segment is labelled as needing the cloud.
    #[serde(default = "default_motion_threshold")]
    pub motion_threshold: f64,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl ScenarioConfig {
    /// Ten tasks, stable requirements, no fluctuation, burst trace, ten segments.
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            task_count: 10,
            requirement_mode: RequirementMode::Stable,
            requirement_range: None,
            bandwidth_fluctuation: 0.0,
            trace_family: TraceFamily::Burst,
            episode_segments: 10,
            uset: None,
            gamma: None,
            beta: default_beta(),
            frames_per_segment: default_frames_per_segment(),
            segment_frames: default_segment_frames(),
            feature_dim: default_feature_dim(),
            delta_max: None,
            motion_threshold: default_motion_threshold(),
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.task_count == 0 {
            return Err(Error::Config("task_count must be at least 1".into()));
        }
        if self.episode_segments == 0 {
            return Err(Error::Config("episode_segments must be at least 1".into()));
        }
        if !FLUCTUATION_LEVELS.contains(&self.bandwidth_fluctuation) {
            return Err(Error::Config(format!(
                "bandwidth_fluctuation must be one of {FLUCTUATION_LEVELS:?}, got {}",
                self.bandwidth_fluctuation
            )));
        }
        if let Some((lo, hi)) = self.requirement_range {
            if !(0.0 < lo && lo <= hi && hi < 1.0) {
                return Err(Error::Config(format!("requirement_range must satisfy 0 < lo <= hi < 1, got ({lo}, {hi})")));
            }
        }
        if self.frames_per_segment < 2 {
            return Err(Error::Config("frames_per_segment must be at least 2".into()));
        }
        if self.segment_frames == 0 {
            return Err(Error::Config("segment_frames must be at least 1".into()));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config("beta must be finite and non-negative".into()));
        }
        self.uncertainty().validate()?;
        self.solver.validate()
    }

    pub fn uncertainty(&self) -> UncertaintySet {
        match (&self.uset, self.gamma) {
            (Some(u), Some(g)) => u.with_gamma(g),
            (Some(u), None) => u.clone(),
            (None, g) => default_uncertainty(self.bandwidth_fluctuation, g.unwrap_or(DEFAULT_GAMMA)),
        }
    }

    pub fn requirement_range(&self) -> (f64, f64) {
        self.requirement_range.unwrap_or(self.requirement_mode.range())
    }

    pub fn delta_max(&self) -> usize {
        self.delta_max.unwrap_or(self.task_count)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Gating weights used when a scenario does not bring its own.
pub fn default_gating_params(feature_dim: usize) -> GatingParams {
    let mut p = GatingParams::random(0x6a7e, feature_dim, 8, 0.5);
    p.alpha = 1.0;
    p.window_t = 4;
    p
}
