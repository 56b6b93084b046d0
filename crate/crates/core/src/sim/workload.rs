use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gating::{Frame, SegmentContent, VideoSegment};
use crate::model::TaskSpec;
use crate::rng::{child_rng, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequirementMode {
    /// Requirements in [0.6, 0.7].
    Stable,
    /// Requirements in [0.5, 0.8].
    Fluctuating,
}

impl RequirementMode {
    pub fn range(self) -> (f64, f64) {
        match self {
            RequirementMode::Stable => (0.6, 0.7),
            RequirementMode::Fluctuating => (0.5, 0.8),
        }
    }
}

/// Segment frames per task unless a scenario says otherwise.
pub const DEFAULT_SEGMENT_FRAMES: u32 = 50;

/// `m` tasks with uniform requirements from the mode's range.
pub fn generate_workload(seed: u64, m: usize, mode: RequirementMode) -> Vec<TaskSpec> {
    segment_workload(seed, m, mode.range(), 0, DEFAULT_SEGMENT_FRAMES)
}

/// Requirements uniform in `range`, redrawn each segment from the stream for `segment`.
pub fn segment_workload(seed: u64, m: usize, range: (f64, f64), segment: u32, frames: u32) -> Vec<TaskSpec> {
    let mut rng = child_rng(seed, Purpose::Workload, segment);
    let (lo, hi) = range;
    (0..m as u32).map(|id| TaskSpec::new(id, rng.gen_range(lo..=hi), frames)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFamily {
    Static,
    Gradual,
    Burst,
}

pub const TRACE_SIDE: usize = 32;
/// Seconds between frames (30 fps capture).
const FRAME_INTERVAL: f64 = 1.0 / 30.0;

/// Synthetic grayscale video, `segments` segments of `frames_per_segment` frames.
///
/// Static repeats one seeded image. Gradual shifts brightness by one level
/// per frame. Burst is static except during seeded runs of segments where
/// every frame is fresh high-amplitude noise. Segments of a burst trace are
/// in a burst with probability 0.3 at each onset and bursts last 1 to 3 segments.
pub fn generate_trace(seed: u64, family: TraceFamily, segments: usize, frames_per_segment: usize) -> Vec<VideoSegment> {
    let mut rng = child_rng(seed, Purpose::Trace, 0);
    let base: Vec<u8> = (0..TRACE_SIDE * TRACE_SIDE).map(|_| rng.gen_range(40..=200)).collect();
    let frame = |pixels: Vec<u8>| Frame { width: TRACE_SIDE, height: TRACE_SIDE, pixels };
    let bursts = burst_mask(seed, segments);
    let mut noise = child_rng(seed, Purpose::Trace, 1);
    let mut out = Vec::with_capacity(segments);
    for s in 0..segments {
        let frames = (0..frames_per_segment)
            .map(|f| {
                let t = (s * frames_per_segment + f) as i32;
                match family {
                    TraceFamily::Static => frame(base.clone()),
                    TraceFamily::Gradual => {
                        frame(base.iter().map(|&p| (p as i32 + t).rem_euclid(256) as u8).collect())
                    }
                    TraceFamily::Burst if bursts[s] => {
                        frame((0..base.len()).map(|_| noise.gen_range(0..=255)).collect())
                    }
                    TraceFamily::Burst => frame(base.clone()),
                }
            })
            .collect();
        out.push(VideoSegment { content: SegmentContent::Frames(frames), frame_interval: FRAME_INTERVAL });
    }
    out
}

/// Which segments of a burst trace are inside a burst.
pub fn burst_mask(seed: u64, segments: usize) -> Vec<bool> {
    let mut rng = child_rng(seed, Purpose::Trace, 2);
    let mut mask = vec![false; segments];
    let mut s = 0;
    while s < segments {
        if rng.gen_bool(0.3) {
            let len = rng.gen_range(1..=3);
            for m in mask.iter_mut().skip(s).take(len) {
                *m = true;
            }
            s += len;
        } else {
            s += 1;
        }
    }
    mask
}

/// Fluctuation levels the simulator accepts.
pub const FLUCTUATION_LEVELS: [f64; 4] = [0.0, 0.1, 0.2, 0.3];

/// I.i.d. bandwidth multipliers, uniform in `[1 - f, 1 + f]`, at least 0.01.
pub fn bandwidth_process(fluctuation: f64, seed: u64, steps: usize) -> Vec<f64> {
    if fluctuation == 0.0 {
        return vec![1.0; steps];
    }
    let mut rng = child_rng(seed, Purpose::Bandwidth, 0);
    (0..steps).map(|_| rng.gen_range(1.0 - fluctuation..=1.0 + fluctuation).max(0.01)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gating::volatility;

    #[test]
    fn requirements_stay_in_range() {
        for mode in [RequirementMode::Stable, RequirementMode::Fluctuating] {
            let (lo, hi) = mode.range();
            for seed in 0..20 {
                assert!(generate_workload(seed, 50, mode).iter().all(|t| t.accuracy_req >= lo && t.accuracy_req <= hi));
            }
        }
        assert_eq!(RequirementMode::Stable.range(), (0.6, 0.7));
        assert_eq!(RequirementMode::Fluctuating.range(), (0.5, 0.8));
        assert_eq!(generate_workload(3, 10, RequirementMode::Stable), generate_workload(3, 10, RequirementMode::Stable));
    }

    #[test]
    fn static_trace_has_no_motion() {
        for seg in generate_trace(1, TraceFamily::Static, 3, 4) {
            assert!(seg.smoothed_features(16).unwrap().iter().all(|f| f.0.iter().all(|v| *v == 0.0)));
        }
    }

    #[test]
    fn traces_are_reproducible() {
        assert_eq!(generate_trace(5, TraceFamily::Burst, 6, 4), generate_trace(5, TraceFamily::Burst, 6, 4));
    }

    #[test]
    fn bursts_are_more_volatile() {
        let seed = (0..100).find(|&s| {
            let m = burst_mask(s, 12);
            m.iter().any(|b| *b) && m.iter().any(|b| !*b)
        });
        let seed = seed.unwrap();
        let mask = burst_mask(seed, 12);
        let trace = generate_trace(seed, TraceFamily::Burst, 12, 6);
        let vol = |s: usize| volatility(&trace[s].smoothed_features(16).unwrap());
        let inside = (0..12).filter(|&s| mask[s]).map(vol).fold(f64::INFINITY, f64::min);
        let outside = (0..12).filter(|&s| !mask[s]).map(vol).fold(0.0, f64::max);
        assert!(inside > outside, "{inside} vs {outside}");
    }

    #[test]
    fn bandwidth_multipliers() {
        assert!(bandwidth_process(0.0, 9, 100).iter().all(|m| *m == 1.0));
        assert!(bandwidth_process(0.3, 9, 1000).iter().all(|m| (0.7..=1.3).contains(m)));
        let long = bandwidth_process(0.3, 9, 100_000);
        let mean = long.iter().sum::<f64>() / long.len() as f64;
        assert!((mean - 1.0).abs() < 0.01);
    }
}
