//! Exhaustive min-max-min solver used to check the robust solver.
//!
//! Everything here is recomputed from the profile tables: transmit delay,
//! compute cost, accuracy checks, bandwidth and the inflation of coupled costs.
//! Nothing is read from the precomputed tables of [`RobustInstance`]. Each
//! per-task quantity is evaluated in the same floating-point order as the
//! cost model, so nominal objectives agree bit for bit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{FirstStageDecision, Location, RobustInstance, SecondStageDecision, TaskConfig};
use crate::robust::{BoundPoint, Scenario, SolveResult, TIE_TOL};

/// Largest number of `(y, pole, model tuple)` evaluations attempted.
pub const EVALUATION_GUARD: f64 = 1e8;

struct Tables {
    options: Vec<TaskConfig>,
    /// `[task][option]`
    transmit: Vec<Vec<f64>>,
    /// `[task][option][model]`: `Some(nominal cost)` when the model meets the requirement.
    model: Vec<Vec<Vec<Option<f64>>>>,
    bandwidth: Vec<f64>,
}

fn tables(inst: &RobustInstance) -> Result<Tables> {
    let space = &inst.space;
    let profile = &inst.profile;
    let mut options = Vec::new();
    for n in 0..space.resolutions.len() {
        for z in 0..space.frame_rates.len() {
            for loc in [Location::Edge, Location::Cloud] {
                if inst.allowed_locations.contains(&loc) {
                    options.push(TaskConfig { resolution: n, frame_rate: z, location: loc });
                }
            }
        }
    }
    let top_rate = space.frame_rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut bandwidth = Vec::new();
    for o in &options {
        bandwidth.push(profile.frame_bits(o.resolution)? * space.frame_rates[o.frame_rate]);
    }
    let mut transmit = Vec::new();
    let mut model = Vec::new();
    for task in &inst.tasks {
        let mut t_row = Vec::new();
        let mut m_row = Vec::new();
        for o in &options {
            let (link, power, names) = match o.location {
                Location::Edge => (profile.bandwidth.edge, profile.power.edge, &space.models.edge),
                Location::Cloud => (profile.bandwidth.cloud, profile.power.cloud, &space.models.cloud),
            };
            let bits = task.segment_frames as f64
                * profile.frame_bits(o.resolution)?
                * task.data_weight
                * (space.frame_rates[o.frame_rate] / top_rate);
            t_row.push(bits / link);
            let mut costs = Vec::new();
            for k in 0..names.len() {
                let seconds = profile.compute_delay(o.resolution, k, o.location)?;
                let acc = profile.accuracy(o.resolution, o.frame_rate, k, o.location)?;
                costs.push((acc >= task.accuracy_req).then_some(seconds + inst.beta * (power * seconds)));
            }
            m_row.push(costs);
        }
        transmit.push(t_row);
        model.push(m_row);
    }
    Ok(Tables { options, transmit, model, bandwidth })
}

/// Per task and tier, the factor on its second-stage cost under realized `u`.
fn inflation(inst: &RobustInstance, u: &[f64]) -> Vec<[f64; 2]> {
    let mut f = vec![[1.0, 1.0]; inst.tasks.len()];
    for (k, entries) in inst.coupling.iter().enumerate() {
        let mut seen = Vec::new();
        for e in entries {
            if seen.contains(e) {
                continue;
            }
            seen.push(*e);
            let slot = if e.location == Location::Edge { 0 } else { 1 };
            f[e.task][slot] += u[k] / inst.uset.baseline[k] - 1.0;
        }
    }
    f
}

/// Cheapest model tuple by explicit enumeration, first in lexicographic order on ties.
fn inner_min(t: &Tables, y: &[usize], infl: &[[f64; 2]]) -> (f64, Option<Vec<usize>>) {
    let m = y.len();
    let counts: Vec<usize> = y.iter().enumerate().map(|(i, &o)| t.model[i][o].len()).collect();
    let mut tuple = vec![0usize; m];
    let mut best = f64::INFINITY;
    let mut arg = None;
    'outer: loop {
        let mut total = 0.0;
        let mut ok = true;
        for i in 0..m {
            let o = y[i];
            match t.model[i][o][tuple[i]] {
                Some(c) => {
                    let slot = if t.options[o].location == Location::Edge { 0 } else { 1 };
                    total += t.transmit[i][o] + c * infl[i][slot];
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && total < best {
            best = total;
            arg = Some(tuple.clone());
        }
        let mut d = m;
        loop {
            if d == 0 {
                break 'outer;
            }
            d -= 1;
            tuple[d] += 1;
            if tuple[d] < counts[d] {
                break;
            }
            tuple[d] = 0;
        }
    }
    (best, arg)
}

fn decode(mut index: u64, base: usize, m: usize) -> Vec<usize> {
    let mut y = vec![0; m];
    for d in (0..m).rev() {
        y[d] = (index % base as u64) as usize;
        index /= base as u64;
    }
    y
}

/// Min over bandwidth-feasible `y`, max over `poles`, min over model tuples.
///
/// Ties resolve like the robust solver: the lexicographically smallest pole
/// among those within [`TIE_TOL`] of the maximum, and the lexicographically
/// smallest `y` among those within [`TIE_TOL`] of the minimum.
pub fn brute_force_solve(instance: &RobustInstance, poles: &[Scenario]) -> Result<SolveResult> {
    if poles.is_empty() {
        return Err(Error::Config("oracle needs at least one pole".into()));
    }
    let t = tables(instance)?;
    let m = instance.tasks.len();
    let base = t.options.len();
    let widest = [&instance.space.models.edge, &instance.space.models.cloud].iter().map(|v| v.len()).max().unwrap_or(0);
    let work = (base as f64).powi(m as i32) * poles.len() as f64 * (widest as f64).powi(m as i32);
    if work > EVALUATION_GUARD {
        return Err(Error::Capacity(format!(
            "exhaustive search needs about {work:.3e} evaluations, above the {EVALUATION_GUARD:.0e} guard"
        )));
    }
    let mut sorted = poles.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite deviations"));
    let factors: Vec<Vec<[f64; 2]>> =
        sorted.iter().map(|p| inflation(instance, &instance.uset.realize(&p.g))).collect();

    let total = (base as u64).pow(m as u32);
    let cap = instance.profile.total_bandwidth_cap;
    // (robust value, worst pole) per y; None when y breaks the cap.
    let scored: Vec<Option<(f64, usize)>> = (0..total)
        .into_par_iter()
        .map(|index| {
            let y = decode(index, base, m);
            let used: f64 = y.iter().map(|&o| t.bandwidth[o]).sum();
            if used > cap {
                return None;
            }
            let mut worst = (f64::NEG_INFINITY, 0);
            for (j, infl) in factors.iter().enumerate() {
                let (v, _) = inner_min(&t, &y, infl);
                if j == 0 || v > worst.0 + TIE_TOL {
                    worst = (v, j);
                }
            }
            Some(worst)
        })
        .collect();

    let best_value = scored.iter().flatten().map(|s| s.0).fold(f64::INFINITY, f64::min);
    if !best_value.is_finite() {
        return Err(infeasibility(instance, &t, scored.iter().any(Option::is_some)));
    }
    let (index, (value, pole)) = scored
        .iter()
        .enumerate()
        .find_map(|(i, s)| s.filter(|s| s.0 <= best_value + TIE_TOL).map(|s| (i, s)))
        .expect("minimum is attained");
    let y = decode(index as u64, base, m);
    let (_, tuple) = inner_min(&t, &y, &factors[pole]);
    let worst_case = sorted[pole].clone();
    Ok(SolveResult {
        y_star: FirstStageDecision(y.iter().map(|&o| t.options[o]).collect()),
        v_star: SecondStageDecision(tuple.expect("finite value has a tuple")),
        upper: value,
        lower: value,
        iterations: 0,
        converged: true,
        worst_case: worst_case.clone(),
        scenarios: vec![worst_case],
        bound_trace: vec![BoundPoint { lower: value, upper: value }],
    })
}

fn infeasibility(instance: &RobustInstance, t: &Tables, any_fits: bool) -> Error {
    for (i, task) in instance.tasks.iter().enumerate() {
        if t.model[i].iter().all(|row| row.iter().all(Option::is_none)) {
            return Error::InfeasibleTask { task: task.id, requirement: task.accuracy_req };
        }
    }
    if any_fits {
        Error::Infeasible("no configuration within the bandwidth cap meets every accuracy requirement".into())
    } else {
        Error::Infeasible(format!("no configuration fits the {} b/s bandwidth cap", instance.profile.total_bandwidth_cap))
    }
}

/// [`brute_force_solve`] against the baseline scenario alone.
pub fn brute_force_nominal(instance: &RobustInstance) -> Result<SolveResult> {
    brute_force_solve(instance, &[Scenario::nominal(instance.uset.len())])
}

/// Every binary deviation vector with at most `gamma` ones, built by
/// recursion rather than bit masks.
pub fn oracle_poles(coordinates: usize, gamma: usize) -> Vec<Scenario> {
    fn grow(prefix: &mut Vec<f64>, left: usize, budget: usize, out: &mut Vec<Scenario>) {
        if left == 0 {
            out.push(Scenario { g: prefix.clone() });
            return;
        }
        for bit in [0.0, 1.0] {
            if bit == 1.0 && budget == 0 {
                continue;
            }
            prefix.push(bit);
            grow(prefix, left - 1, budget - bit as usize, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), coordinates, gamma, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_robust_instance, ConfigSpace, PerLocation, Profile, TaskSpec, UncertaintySet};

    fn tiny(req: f64) -> RobustInstance {
        // One task, two resolutions, one frame rate, edge only, two models.
        let space = ConfigSpace {
            resolutions: vec![360, 720],
            frame_rates: vec![30.0],
            models: PerLocation::new(vec!["a".into(), "b".into()], vec!["a".into(), "b".into()]),
        };
        let mut p = Profile::new(PerLocation::new(50e6, 100e6), PerLocation::new(10.0, 100.0), 1e9);
        p.set_frame_bits(0, 1e5);
        p.set_frame_bits(1, 4e5);
        for loc in Location::ALL {
            for n in 0..2 {
                for k in 0..2 {
                    p.set_accuracy(n, 0, k, loc, 0.5 + 0.2 * n as f64 + 0.1 * k as f64);
                    p.set_compute_delay(n, k, loc, 0.1 * (1 + n + 2 * k) as f64);
                }
            }
        }
        RobustInstance::new(
            vec![TaskSpec::new(0, req, 10)],
            space,
            p,
            UncertaintySet::certain(),
            0.1,
            vec![],
            vec![Location::Edge],
        )
        .unwrap()
    }

    #[test]
    fn four_point_scan() {
        // Edge, beta 0.1, power 10: cost = 2 * compute; transmit = 10 * bits / 50e6.
        // Requirement 0.55 rules out (360, a) only.
        let r = brute_force_nominal(&tiny(0.55)).unwrap();
        let candidates = [
            (0.6, 0.0, 10.0 * 1e5 / 50e6 + 2.0 * 0.3),
            (0.7, 1.0, 10.0 * 4e5 / 50e6 + 2.0 * 0.2),
            (0.8, 1.0, 10.0 * 4e5 / 50e6 + 2.0 * 0.4),
        ];
        let best = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
        assert!((r.upper - best).abs() < 1e-12);
        assert_eq!(r.y_star.0[0].resolution, 1);
        assert_eq!(r.v_star.0, vec![0]);
    }

    #[test]
    fn dominant_cloud_is_chosen_everywhere() {
        let (space, mut profile) = crate::sim::default_profile();
        // Cloud faster and more accurate than any edge entry.
        for n in 0..space.resolutions.len() {
            for k in 0..5 {
                profile.set_compute_delay(n, k, Location::Cloud, 1e-4 * (1 + k) as f64);
                for z in 0..space.frame_rates.len() {
                    profile.set_accuracy(n, z, k, Location::Cloud, 0.95 + 0.001 * (n + k + z) as f64 / 20.0);
                }
            }
        }
        profile.power.cloud = 1.0;
        profile.bandwidth.cloud = 1e12;
        let tasks = (0..2).map(|i| TaskSpec::new(i, 0.6, 50)).collect();
        let inst = build_robust_instance(tasks, space, profile, UncertaintySet::certain(), 0.06).unwrap();
        let r = brute_force_nominal(&inst).unwrap();
        assert!(r.y_star.iter().all(|c| c.location == Location::Cloud));
    }

    #[test]
    fn guard_rejects_large_instances() {
        let (space, profile) = crate::sim::default_profile();
        let tasks = (0..6).map(|i| TaskSpec::new(i, 0.5, 50)).collect();
        let inst = build_robust_instance(tasks, space, profile, UncertaintySet::certain(), 0.06).unwrap();
        assert!(matches!(brute_force_nominal(&inst), Err(Error::Capacity(_))));
    }

    #[test]
    fn recursive_poles_cover_the_budget_polytope() {
        let poles = oracle_poles(4, 2);
        assert_eq!(poles.len(), 1 + 4 + 6);
        assert!(poles.windows(2).all(|w| w[0].g < w[1].g));
        assert!(poles.iter().all(|p| p.g.iter().sum::<f64>() <= 2.0));
    }

    #[test]
    fn unreachable_requirement_names_the_task() {
        assert!(matches!(brute_force_nominal(&tiny(0.99)), Err(Error::InfeasibleTask { task: 0, .. })));
    }
}
