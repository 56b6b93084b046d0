use crate::error::{Error, Result};
use crate::model::{ConfigSpace, FirstStageDecision, Location, Profile, TaskConfig, TaskSpec};

/// Initial configuration from the significance score.
///
/// Per task, at the default frame rate and with the smallest model of the
/// tier, picks the lowest resolution whose accuracy meets the requirement,
/// trying the edge tier first and then the cloud tier. The scan starts at
/// resolution `floor(tau * (N - 1))`. If that start already qualifies it may
/// have overshot, so the scan restarts from the lowest resolution; if nothing
/// at or above it qualifies, the resolutions below it are tried.
pub fn warm_start_config(tasks: &[TaskSpec], tau: f64, space: &ConfigSpace, profile: &Profile) -> Result<FirstStageDecision> {
    let z = space.default_frame_rate_index();
    let n_res = space.resolutions.len();
    let start = ((tau.clamp(0.0, 1.0) * (n_res - 1) as f64).floor() as usize).min(n_res - 1);
    let mut out = Vec::with_capacity(tasks.len());
    for task in tasks {
        let mut chosen = None;
        for loc in [Location::Edge, Location::Cloud] {
            let meets = |n: usize| -> Result<bool> { Ok(profile.accuracy(n, z, 0, loc)? >= task.accuracy_req) };
            let order: Vec<usize> = if meets(start)? {
                (0..=start).collect()
            } else {
                (start + 1..n_res).chain(0..start).collect()
            };
            for n in order {
                if meets(n)? {
                    chosen = Some(TaskConfig { resolution: n, frame_rate: z, location: loc });
                    break;
                }
            }
            if chosen.is_some() {
                break;
            }
        }
        out.push(chosen.ok_or(Error::InfeasibleTask { task: task.id, requirement: task.accuracy_req })?);
    }
    Ok(FirstStageDecision(out))
}

/// Number of location flips allowed between consecutive decisions.
pub fn location_budget(delta_max: usize, tau: f64, tau_prev: f64) -> usize {
    (delta_max as f64 * (tau - tau_prev).abs()).ceil() as usize
}

/// Limits how many tasks change tier between consecutive decisions.
///
/// When more than `location_budget(delta_max, tau, tau_prev)` tasks flip,
/// the flips with the smallest `impact` (absolute cost change, per task) are
/// reverted to the previous tier first, lower task index first on ties.
/// Resolution and frame rate are left as proposed.
pub fn consistency_filter(
    proposed: &FirstStageDecision,
    prev: &FirstStageDecision,
    tau: f64,
    tau_prev: f64,
    delta_max: usize,
    impact: &[f64],
) -> Result<FirstStageDecision> {
    if proposed.len() != prev.len() || impact.len() != proposed.len() {
        return Err(Error::Config(format!(
            "consistency filter needs matching task sets: {} proposed, {} previous, {} impacts",
            proposed.len(),
            prev.len(),
            impact.len()
        )));
    }
    let budget = location_budget(delta_max, tau, tau_prev);
    let mut flips: Vec<usize> =
        (0..proposed.len()).filter(|&i| proposed.0[i].location != prev.0[i].location).collect();
    let mut out = proposed.clone();
    if flips.len() <= budget {
        return Ok(out);
    }
    flips.sort_by(|&a, &b| impact[a].abs().total_cmp(&impact[b].abs()).then(a.cmp(&b)));
    for &i in &flips[..flips.len() - budget] {
        out.0[i].location = prev.0[i].location;
    }
    Ok(out)
}
