use super::{ConfigSpace, CostBreakdown, FirstStageDecision, Location, Profile, TaskConfig, TaskSpec};
use crate::error::{Error, Result};

/// Accuracy of a configuration, read straight from the table.
pub fn accuracy_of(_task: &TaskSpec, n: usize, z: usize, k: usize, loc: Location, profile: &Profile) -> Result<f64> {
    profile.accuracy(n, z, k, loc)
}

/// Returns `(transmit, compute)` delay in seconds for one segment.
///
/// The payload is `segment_frames * frame_bits * data_weight`, scaled by the
/// selected frame rate over the highest one.
#[allow(clippy::too_many_arguments)]
pub fn delay_of(
    task: &TaskSpec,
    n: usize,
    z: usize,
    k: usize,
    loc: Location,
    effective_bandwidth: f64,
    space: &ConfigSpace,
    profile: &Profile,
) -> Result<(f64, f64)> {
    if !(effective_bandwidth > 0.0) {
        return Err(Error::Infeasible(format!(
            "task {}: effective bandwidth {effective_bandwidth} b/s cannot carry any payload",
            task.id
        )));
    }
    let rate = *space
        .frame_rates
        .get(z)
        .ok_or_else(|| Error::Config(format!("frame rate index {z} out of range")))?;
    let bits = task.segment_frames as f64 * profile.frame_bits(n)? * task.data_weight * (rate / space.max_frame_rate());
    Ok((bits / effective_bandwidth, profile.compute_delay(n, k, loc)?))
}

/// Server energy for a compute burst: power times time.
pub fn energy_of(compute_delay: f64, loc: Location, profile: &Profile) -> f64 {
    profile.power.get(loc) * compute_delay
}

pub fn cost_of(delay: f64, energy: f64, beta: f64) -> f64 {
    delay + beta * energy
}

/// Average uplink rate of one configuration in bits per second.
pub fn task_bandwidth(cfg: &TaskConfig, space: &ConfigSpace, profile: &Profile) -> Result<f64> {
    let rate = *space
        .frame_rates
        .get(cfg.frame_rate)
        .ok_or_else(|| Error::Config(format!("frame rate index {} out of range", cfg.frame_rate)))?;
    Ok(profile.frame_bits(cfg.resolution)? * rate)
}

/// Shared-uplink check: the per-task average rates must fit under the cap.
pub fn bandwidth_feasible(decisions: &FirstStageDecision, space: &ConfigSpace, profile: &Profile) -> Result<bool> {
    let mut total = 0.0;
    for cfg in decisions.iter() {
        total += task_bandwidth(cfg, space, profile)?;
    }
    Ok(total <= profile.total_bandwidth_cap)
}

/// Full breakdown for one task. `inflation` multiplies compute delay and energy
/// (1.0 is the nominal scenario); `bandwidth_scale` multiplies the path bandwidth.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_task(
    task: &TaskSpec,
    cfg: &TaskConfig,
    model: usize,
    space: &ConfigSpace,
    profile: &Profile,
    beta: f64,
    inflation: f64,
    bandwidth_scale: f64,
) -> Result<CostBreakdown> {
    let bandwidth = profile.bandwidth.get(cfg.location) * bandwidth_scale;
    let (transmit, compute) =
        delay_of(task, cfg.resolution, cfg.frame_rate, model, cfg.location, bandwidth, space, profile)?;
    let compute = compute * inflation;
    let energy = energy_of(compute, cfg.location, profile);
    Ok(CostBreakdown {
        transmit_delay: transmit,
        compute_delay: compute,
        energy,
        total_cost: cost_of(transmit + compute, energy, beta),
        achieved_accuracy: accuracy_of(task, cfg.resolution, cfg.frame_rate, model, cfg.location, profile)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PerLocation;
    use crate::sim::default_profile;

    fn one_resolution_profile() -> (ConfigSpace, Profile) {
        let space = ConfigSpace {
            resolutions: vec![540],
            frame_rates: vec![30.0],
            models: PerLocation::new(vec!["e".into()], vec!["c".into()]),
        };
        let mut profile = Profile::new(PerLocation::new(50e6, 100e6), PerLocation::new(15.0, 100.0), 50e6);
        profile.set_frame_bits(0, 1e6);
        for loc in Location::ALL {
            profile.set_compute_delay(0, 0, loc, 0.1);
            profile.set_accuracy(0, 0, 0, loc, 0.62);
        }
        (space, profile)
    }

    #[test]
    fn accuracy_is_a_table_lookup() {
        let (_, profile) = one_resolution_profile();
        let task = TaskSpec::new(0, 0.6, 10);
        assert_eq!(accuracy_of(&task, 0, 0, 0, Location::Edge, &profile).unwrap(), 0.62);
        assert!(accuracy_of(&task, 1, 0, 0, Location::Edge, &profile).is_err());
        assert!(accuracy_of(&task, 0, 0, 3, Location::Cloud, &profile).is_err());
    }

    #[test]
    fn accuracy_monotone_in_resolution_on_default_profile() {
        let (space, profile) = default_profile();
        let task = TaskSpec::new(0, 0.6, 50);
        for loc in Location::ALL {
            for k in 0..space.model_count(loc) {
                for z in 0..space.frame_rates.len() {
                    for n in 0..space.resolutions.len() {
                        for n2 in n + 1..space.resolutions.len() {
                            let lo = accuracy_of(&task, n, z, k, loc, &profile).unwrap();
                            let hi = accuracy_of(&task, n2, z, k, loc, &profile).unwrap();
                            assert!(hi >= lo);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn delay_splits_into_transmit_and_compute() {
        let (space, profile) = one_resolution_profile();
        // 10 frames of 1 Mb at the top frame rate: a 10 Mb payload.
        let task = TaskSpec::new(0, 0.6, 10);
        let (t, c) = delay_of(&task, 0, 0, 0, Location::Edge, 50e6, &space, &profile).unwrap();
        assert!((t - 0.2).abs() < 1e-15);
        assert_eq!(c, 0.1);
        let (t2, c2) = delay_of(&task, 0, 0, 0, Location::Edge, 100e6, &space, &profile).unwrap();
        assert!((t2 - t / 2.0).abs() < 1e-15);
        assert_eq!(c2, c);
        assert!(matches!(
            delay_of(&task, 0, 0, 0, Location::Edge, 0.0, &space, &profile),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn cloud_path_halves_transmit_on_default_bandwidths() {
        let (space, profile) = default_profile();
        let task = TaskSpec::new(0, 0.6, 50);
        let edge = delay_of(&task, 2, 2, 0, Location::Edge, profile.bandwidth.edge, &space, &profile).unwrap();
        let cloud = delay_of(&task, 2, 2, 0, Location::Cloud, profile.bandwidth.cloud, &space, &profile).unwrap();
        assert_eq!(cloud.0 * 2.0, edge.0);
    }

    #[test]
    fn frame_rate_scales_payload_linearly() {
        let (space, profile) = default_profile();
        let task = TaskSpec::new(0, 0.6, 50);
        let bw = profile.bandwidth.edge;
        let (t10, _) = delay_of(&task, 0, 0, 0, Location::Edge, bw, &space, &profile).unwrap();
        let (t50, _) = delay_of(&task, 0, 4, 0, Location::Edge, bw, &space, &profile).unwrap();
        assert!((t50 - 5.0 * t10).abs() < 1e-15);
    }

    #[test]
    fn energy_uses_server_power() {
        let (_, profile) = default_profile();
        assert!((energy_of(0.1, Location::Cloud, &profile) - 10.0).abs() < 1e-12);
        assert!((energy_of(0.1, Location::Edge, &profile) - 1.5).abs() < 1e-12);
        assert_eq!(energy_of(0.0, Location::Cloud, &profile), 0.0);
    }

    #[test]
    fn cost_combines_delay_and_weighted_energy() {
        assert!((cost_of(1.0, 10.0, 0.06) - 1.6).abs() < 1e-12);
        assert_eq!(cost_of(0.7, 123.0, 0.0), 0.7);
        assert_eq!(cost_of(0.0, 0.0, 0.06), 0.0);
    }

    #[test]
    fn bandwidth_cap_is_enforced() {
        let space = ConfigSpace {
            resolutions: vec![360],
            frame_rates: vec![30.0],
            models: PerLocation::new(vec!["e".into()], vec!["c".into()]),
        };
        let mut profile = Profile::new(PerLocation::new(50e6, 100e6), PerLocation::new(15.0, 100.0), 50e6);
        profile.set_frame_bits(0, 1e6); // 30 Mb/s at 30 fps
        let cfg = TaskConfig { resolution: 0, frame_rate: 0, location: Location::Edge };
        let two = FirstStageDecision(vec![cfg, cfg]);
        let one = FirstStageDecision(vec![cfg]);
        assert!(!bandwidth_feasible(&two, &space, &profile).unwrap());
        assert!(bandwidth_feasible(&one, &space, &profile).unwrap());
        assert!(bandwidth_feasible(&FirstStageDecision(vec![]), &space, &profile).unwrap());
    }

    #[test]
    fn breakdown_total_matches_components() {
        let (space, profile) = default_profile();
        let task = TaskSpec::new(3, 0.65, 50);
        let cfg = TaskConfig { resolution: 3, frame_rate: 1, location: Location::Cloud };
        let b = evaluate_task(&task, &cfg, 2, &space, &profile, 0.06, 1.25, 0.8).unwrap();
        let expect = b.transmit_delay + b.compute_delay + 0.06 * b.energy;
        assert!((b.total_cost - expect).abs() <= 1e-12 * expect);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cost_is_linear_in_each_argument(d in 0.0..10.0f64, e in 0.0..100.0f64, e2 in 0.0..100.0f64, beta in 0.0..1.0f64) {
                let lhs = cost_of(d, e + e2, beta) - cost_of(d, e, beta);
                prop_assert!((lhs - beta * e2).abs() < 1e-9);
                prop_assert!((cost_of(2.0 * d, e, beta) - cost_of(d, e, beta) - d).abs() < 1e-9);
            }

            #[test]
            fn dropping_a_task_never_breaks_bandwidth_feasibility(
                picks in proptest::collection::vec((0usize..5, 0usize..5), 1..12),
                drop in 0usize..12,
            ) {
                let (space, mut profile) = default_profile();
                profile.total_bandwidth_cap = 40e6;
                let cfgs: Vec<TaskConfig> = picks
                    .iter()
                    .map(|&(n, z)| TaskConfig { resolution: n, frame_rate: z, location: Location::Edge })
                    .collect();
                let full = FirstStageDecision(cfgs.clone());
                let mut fewer = cfgs;
                fewer.remove(drop % full.len());
                if bandwidth_feasible(&full, &space, &profile).unwrap() {
                    prop_assert!(bandwidth_feasible(&FirstStageDecision(fewer), &space, &profile).unwrap());
                }
            }
        }
    }
}
