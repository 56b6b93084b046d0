use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{build_robust_instance, ConfigSpace, Location, PerLocation, Profile, RobustInstance, TaskSpec, UncertaintySet};
use crate::rng::{child_rng, Purpose};

const RESOLUTIONS: [u32; 5] = [360, 540, 720, 900, 1080];
const FRAME_RATES: [f64; 5] = [10.0, 20.0, 30.0, 40.0, 50.0];
/// Compute time relative to 360p.
const RES_FACTOR: [f64; 5] = [1.0, 1.6, 2.3, 3.2, 4.2];
/// Seconds per segment at 360p, per model.
const EDGE_COMPUTE: [f64; 5] = [0.015, 0.03, 0.06, 0.12, 0.24];
const CLOUD_COMPUTE: [f64; 5] = [0.02, 0.028, 0.04, 0.056, 0.08];
const FRAME_BITS: [f64; 5] = [0.03e6, 0.06e6, 0.10e6, 0.16e6, 0.23e6];

/// Synthetic five-by-five-by-five profile.
///
/// Accuracy grows with resolution, frame rate and model size through the
/// score `s = 0.35 n/4 + 0.15 z/4 + 0.5 k/4`: edge models reach
/// `0.45 + 0.45 s`, cloud models `0.55 + 0.42 s`. Edge models are cheap at
/// low accuracy but slow down sharply for the large versions, so tasks asking
/// for less than about 0.68 go to the edge and the rest to the cloud.
pub fn default_profile() -> (ConfigSpace, Profile) {
    let names = |tier: &str| (0..5).map(|k| format!("{tier}-{k}")).collect::<Vec<_>>();
    let space = ConfigSpace {
        resolutions: RESOLUTIONS.to_vec(),
        frame_rates: FRAME_RATES.to_vec(),
        models: PerLocation::new(names("edge"), names("cloud")),
    };
    let mut p = Profile::new(PerLocation::new(50e6, 100e6), PerLocation::new(15.0, 100.0), 150e6);
    for n in 0..5 {
        p.set_frame_bits(n, FRAME_BITS[n]);
        for k in 0..5 {
            p.set_compute_delay(n, k, Location::Edge, EDGE_COMPUTE[k] * RES_FACTOR[n]);
            p.set_compute_delay(n, k, Location::Cloud, CLOUD_COMPUTE[k] * RES_FACTOR[n]);
            for z in 0..5 {
                let s = 0.35 * n as f64 / 4.0 + 0.15 * z as f64 / 4.0 + 0.5 * k as f64 / 4.0;
                p.set_accuracy(n, z, k, Location::Edge, 0.45 + 0.45 * s);
                p.set_accuracy(n, z, k, Location::Cloud, 0.55 + 0.42 * s);
            }
        }
    }
    (space, p)
}

/// Size ranges for [`random_instance`]; each bound is inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomInstanceDims {
    pub tasks: (usize, usize),
    pub resolutions: (usize, usize),
    pub frame_rates: (usize, usize),
    pub models: (usize, usize),
    pub coordinates: (usize, usize),
}

impl Default for RandomInstanceDims {
    fn default() -> Self {
        Self { tasks: (1, 4), resolutions: (2, 3), frame_rates: (1, 2), models: (2, 3), coordinates: (2, 4) }
    }
}

/// Seeded small instance with its own monotone profile. The budget is drawn
/// from `0..=K_u` and the bandwidth cap so that it binds on some seeds.
pub fn random_instance(seed: u64, dims: &RandomInstanceDims) -> RobustInstance {
    let mut rng = child_rng(seed, Purpose::Instance, 0);
    let mut pick = |(lo, hi): (usize, usize)| rng.gen_range(lo..=hi);
    let (m, n_res, n_fps, n_models, k_u) =
        (pick(dims.tasks), pick(dims.resolutions), pick(dims.frame_rates), pick(dims.models), pick(dims.coordinates));
    let gamma = pick((0, k_u));

    let mut rng = child_rng(seed, Purpose::Instance, 1);
    let mut resolutions: Vec<u32> = RESOLUTIONS.choose_multiple(&mut rng, n_res).copied().collect();
    resolutions.sort_unstable();
    let mut frame_rates: Vec<f64> = FRAME_RATES.choose_multiple(&mut rng, n_fps).copied().collect();
    frame_rates.sort_by(f64::total_cmp);
    let names = |tier: &str| (0..n_models).map(|k| format!("{tier}-{k}")).collect::<Vec<_>>();
    let space = ConfigSpace { resolutions, frame_rates, models: PerLocation::new(names("edge"), names("cloud")) };

    let mut p = Profile::new(
        PerLocation::new(rng.gen_range(20e6..80e6), rng.gen_range(60e6..160e6)),
        PerLocation::new(rng.gen_range(5.0..30.0), rng.gen_range(50.0..150.0)),
        0.0,
    );
    let mut bits = 0.0;
    for n in 0..n_res {
        bits += rng.gen_range(0.02e6..0.08e6);
        p.set_frame_bits(n, bits);
    }
    for loc in Location::ALL {
        let base = if loc == Location::Edge { 0.40 } else { 0.50 };
        let res_step: Vec<f64> = (0..n_res).map(|_| rng.gen_range(0.0..0.08)).collect();
        let fps_step: Vec<f64> = (0..n_fps).map(|_| rng.gen_range(0.0..0.04)).collect();
        let model_step: Vec<f64> = (0..n_models).map(|_| rng.gen_range(0.02..0.12)).collect();
        let compute: Vec<f64> = (0..n_models).map(|_| rng.gen_range(0.01..0.2)).collect();
        for n in 0..n_res {
            let mut delay = 0.0;
            for k in 0..n_models {
                delay += compute[k];
                p.set_compute_delay(n, k, loc, delay * (1.0 + 0.5 * n as f64));
                for z in 0..n_fps {
                    let acc = base
                        + res_step[..=n].iter().sum::<f64>()
                        + fps_step[..=z].iter().sum::<f64>()
                        + model_step[..=k].iter().sum::<f64>();
                    p.set_accuracy(n, z, k, loc, acc.min(0.99));
                }
            }
        }
    }
    let widest = bits * space.frame_rates.last().copied().unwrap_or(0.0);
    let narrowest = p.frame_bits(0).unwrap() * space.frame_rates[0];
    p.total_bandwidth_cap = m as f64 * rng.gen_range(narrowest..=widest.max(narrowest) * 1.1);

    let tasks = (0..m as u32).map(|i| TaskSpec::new(i, rng.gen_range(0.45..0.85), rng.gen_range(10..60))).collect();
    let uset = UncertaintySet::new(
        (0..k_u).map(|_| rng.gen_range(0.5..2.0)).collect(),
        (0..k_u).map(|_| rng.gen_range(0.0..1.5)).collect(),
        gamma,
    );
    build_robust_instance(tasks, space, p, uset, 0.06).expect("generated instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_shape() {
        let (space, p) = default_profile();
        assert_eq!(p.accuracy_entry_count(), 5 * 5 * 5 * 2);
        assert_eq!((p.bandwidth.edge, p.bandwidth.cloud), (50e6, 100e6));
        assert_eq!((p.power.edge, p.power.cloud), (15.0, 100.0));
        p.validate(&space).unwrap();
        assert_eq!(p.accuracy(0, 0, 0, Location::Edge).unwrap(), 0.45);
        assert!((p.accuracy(4, 4, 4, Location::Edge).unwrap() - 0.90).abs() < 1e-12);
        assert!((p.accuracy(4, 4, 4, Location::Cloud).unwrap() - 0.97).abs() < 1e-12);
        for n in 0..5 {
            for z in 0..5 {
                for k in 0..5 {
                    assert!(p.accuracy(n, z, k, Location::Cloud).unwrap() > p.accuracy(n, z, k, Location::Edge).unwrap());
                }
            }
        }
    }

    #[test]
    fn random_instances_are_reproducible_and_in_range() {
        for seed in 0..50 {
            let a = random_instance(seed, &RandomInstanceDims::default());
            let b = random_instance(seed, &RandomInstanceDims::default());
            assert_eq!(a.tasks, b.tasks);
            assert_eq!(a.uset, b.uset);
            assert!((1..=4).contains(&a.task_count()));
            assert!((2..=4).contains(&a.coordinate_count()));
            assert!(a.uset.gamma <= a.coordinate_count());
        }
    }
}
