//! Domain types and the delay/energy/accuracy cost model.
//!
//! Each task picks a resolution, a frame rate and an execution tier before
//! uncertainty is revealed (the first stage), then a model version on that
//! tier (the second stage). Transmission delay is charged to the first stage.
//! Compute delay and the energy it burns are charged to the second stage,
//! where the uncertainty set can inflate them.

mod eval;
mod instance;
mod profile;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eval::{
    accuracy_of, bandwidth_feasible, cost_of, delay_of, energy_of, evaluate_task, task_bandwidth,
};
pub use instance::{build_robust_instance, group_coupling, CostEntry, InstanceDoc, RobustInstance, UncertaintySet};
pub use profile::{AccuracyEntry, DelayEntry, FrameBitsEntry, Profile, ProfileDoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Edge,
    Cloud,
}

impl Location {
    pub const ALL: [Location; 2] = [Location::Edge, Location::Cloud];

    /// The offloading bit: 0 for edge, 1 for cloud.
    pub fn bit(self) -> u8 {
        match self {
            Location::Edge => 0,
            Location::Cloud => 1,
        }
    }

    pub fn other(self) -> Location {
        match self {
            Location::Edge => Location::Cloud,
            Location::Cloud => Location::Edge,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Location::Edge => "edge",
            Location::Cloud => "cloud",
        }
    }
}

/// A pair of values, one per execution tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerLocation<T> {
    pub edge: T,
    pub cloud: T,
}

impl<T> PerLocation<T> {
    pub fn new(edge: T, cloud: T) -> Self {
        Self { edge, cloud }
    }

    pub fn get(&self, loc: Location) -> &T {
        match loc {
            Location::Edge => &self.edge,
            Location::Cloud => &self.cloud,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: u32,
    /// Minimum acceptable accuracy, strictly inside (0, 1).
    pub accuracy_req: f64,
    /// Frames in one segment when sampled at the highest frame rate.
    pub segment_frames: u32,
    /// Scale on the per-frame payload.
    #[serde(default = "default_data_weight")]
    pub data_weight: f64,
}

fn default_data_weight() -> f64 {
    1.0
}

impl TaskSpec {
    pub fn new(id: u32, accuracy_req: f64, segment_frames: u32) -> Self {
        Self { id, accuracy_req, segment_frames, data_weight: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.accuracy_req > 0.0 && self.accuracy_req < 1.0) {
            return Err(Error::Config(format!(
                "task {}: accuracy requirement {} outside (0, 1)",
                self.id, self.accuracy_req
            )));
        }
        if self.segment_frames == 0 {
            return Err(Error::Config(format!("task {}: segment_frames must be >= 1", self.id)));
        }
        if !(self.data_weight.is_finite() && self.data_weight >= 0.0) {
            return Err(Error::Config(format!("task {}: invalid data_weight", self.id)));
        }
        Ok(())
    }
}

/// The discrete configuration axes shared by every task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSpace {
    /// Pixel heights, strictly increasing.
    pub resolutions: Vec<u32>,
    /// Frames per second, strictly increasing.
    pub frame_rates: Vec<f64>,
    /// Model versions per tier, ordered by non-decreasing accuracy.
    pub models: PerLocation<Vec<String>>,
}

impl ConfigSpace {
    pub fn validate(&self) -> Result<()> {
        if self.resolutions.is_empty() || self.frame_rates.is_empty() {
            return Err(Error::Config("resolutions and frame rates must be non-empty".into()));
        }
        if self.models.edge.is_empty() || self.models.cloud.is_empty() {
            return Err(Error::Config("each tier needs at least one model".into()));
        }
        if !self.resolutions.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("resolutions must be strictly increasing".into()));
        }
        if !self.frame_rates.windows(2).all(|w| w[0] < w[1])
            || !self.frame_rates.iter().all(|r| r.is_finite() && *r > 0.0)
        {
            return Err(Error::Config("frame rates must be positive and strictly increasing".into()));
        }
        for loc in Location::ALL {
            let names = self.models.get(loc);
            let mut sorted = names.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != names.len() {
                return Err(Error::Config(format!("duplicate model name on the {} tier", loc.name())));
            }
        }
        Ok(())
    }

    pub fn model_count(&self, loc: Location) -> usize {
        self.models.get(loc).len()
    }

    pub fn max_frame_rate(&self) -> f64 {
        *self.frame_rates.last().expect("validated non-empty")
    }

    /// Frame rate used by the warm-start scan: the middle of the grid, rounding down.
    pub fn default_frame_rate_index(&self) -> usize {
        (self.frame_rates.len() - 1) / 2
    }
}

/// First-stage choice for one task.
///
/// Field order is the tie-break order: resolution, then frame rate, then the
/// location bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskConfig {
    pub resolution: usize,
    pub frame_rate: usize,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FirstStageDecision(pub Vec<TaskConfig>);

impl FirstStageDecision {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TaskConfig> {
        self.0.iter()
    }

    /// Number of tasks whose location bit differs.
    pub fn location_distance(&self, other: &FirstStageDecision) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a.location != b.location).count()
    }
}

/// Model index per task, within the tier chosen in the first stage.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SecondStageDecision(pub Vec<usize>);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub transmit_delay: f64,
    pub compute_delay: f64,
    pub energy: f64,
    pub total_cost: f64,
    pub achieved_accuracy: f64,
}

impl CostBreakdown {
    pub fn delay(&self) -> f64 {
        self.transmit_delay + self.compute_delay
    }
}
