use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{default_gating_params, default_profile, generate_trace, segment_workload, bandwidth_process, ScenarioConfig, TraceFamily};
use crate::error::{Error, Result};
use crate::gating::{
    consistency_filter, gate_step, warm_start_config, GateState, GatingParams, MotionFeature, TrainingEpisode,
};
use crate::model::{evaluate_task, group_coupling, ConfigSpace, FirstStageDecision, Location, Profile, RobustInstance, TaskSpec};
use crate::rng::{child_rng, Purpose};
use crate::robust::{ccg_solve, enumerate_poles, second_stage_value, Scenario, SolveResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Gating warm start, consistency filter, robust solve over both tiers.
    GatedRobust,
    CloudOnly,
    EdgeOnly,
    /// Solve against the baseline scenario only.
    NominalGreedy,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::GatedRobust, Policy::CloudOnly, Policy::EdgeOnly, Policy::NominalGreedy];

    pub fn name(self) -> &'static str {
        match self {
            Policy::GatedRobust => "gated_robust",
            Policy::CloudOnly => "cloud_only",
            Policy::EdgeOnly => "edge_only",
            Policy::NominalGreedy => "nominal_greedy",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}; expected one of gated_robust, cloud_only, edge_only, nominal_greedy")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMetrics {
    pub segment: usize,
    /// Significance score of the segment.
    pub tau: f64,
    /// Mean achieved accuracy over tasks.
    pub accuracy: f64,
    /// Summed over tasks.
    pub delay_s: f64,
    pub energy_j: f64,
    /// `delay_s + beta * energy_j`.
    pub cost: f64,
    /// Every task met its requirement.
    pub success: bool,
    /// The policy planned without relaxing any requirement.
    pub feasible: bool,
    /// Tasks whose tier differs from the previous segment.
    pub switches: usize,
    pub iters: usize,
    /// Worst-case objective of the plan; infinite when no plan was found.
    pub planned_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub mean_accuracy: f64,
    pub mean_delay_s: f64,
    pub mean_energy_j: f64,
    pub mean_cost: f64,
    pub success_rate: f64,
    pub switches: usize,
    pub mean_iterations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub seed: u64,
    pub policy: Policy,
    pub fluctuation: f64,
    pub segments: Vec<SegmentMetrics>,
    pub summary: EpisodeSummary,
}

impl EpisodeMetrics {
    fn new(cfg: &ScenarioConfig, policy: Policy, segments: Vec<SegmentMetrics>) -> Self {
        let n = segments.len() as f64;
        let mean = |f: fn(&SegmentMetrics) -> f64| segments.iter().map(f).sum::<f64>() / n;
        let summary = EpisodeSummary {
            mean_accuracy: mean(|s| s.accuracy),
            mean_delay_s: mean(|s| s.delay_s),
            mean_energy_j: mean(|s| s.energy_j),
            mean_cost: mean(|s| s.cost),
            success_rate: mean(|s| if s.success { 1.0 } else { 0.0 }),
            switches: segments.iter().map(|s| s.switches).sum(),
            mean_iterations: mean(|s| s.iters as f64),
        };
        Self { seed: cfg.seed, policy, fluctuation: cfg.bandwidth_fluctuation, segments, summary }
    }
}

/// [`run_episode_with`] using [`default_gating_params`].
pub fn run_episode(cfg: &ScenarioConfig, policy: Policy) -> Result<EpisodeMetrics> {
    run_episode_with(cfg, policy, &default_gating_params(cfg.feature_dim))
}

struct Plan {
    instance: RobustInstance,
    result: SolveResult,
    relaxed: bool,
}

/// One episode: per segment, gate on the trace, plan with `policy`, then
/// replay the plan under a uniformly drawn vertex of the uncertainty set and
/// the segment's bandwidth multiplier.
pub fn run_episode_with(cfg: &ScenarioConfig, policy: Policy, params: &GatingParams) -> Result<EpisodeMetrics> {
    cfg.validate()?;
    params.validate()?;
    if params.input_dim != cfg.feature_dim {
        return Err(Error::Config(format!(
            "gating params take {} features, scenario produces {}",
            params.input_dim, cfg.feature_dim
        )));
    }
    let (space, profile) = default_profile();
    let uset = cfg.uncertainty();
    let poles = enumerate_poles(&uset, cfg.solver.pole_enumeration_limit)?;
    let trace = generate_trace(cfg.seed, cfg.trace_family, cfg.episode_segments, cfg.frames_per_segment);
    let bandwidth = bandwidth_process(cfg.bandwidth_fluctuation, cfg.seed, cfg.episode_segments);

    let mut state = GateState::new(params);
    let mut prev_tau = 0.5;
    let mut out = Vec::with_capacity(cfg.episode_segments);
    for (s, segment) in trace.iter().enumerate() {
        let tasks = segment_workload(cfg.seed, cfg.task_count, cfg.requirement_range(), s as u32, cfg.segment_frames);
        let tau = gate_step(params, &mut state, &segment.gate_input(cfg.feature_dim)?)?.score;

        let plan = plan_segment(cfg, policy, &tasks, tau, prev_tau, state.last_decision.as_ref(), &space, &profile);
        let pole = &poles[child_rng(cfg.seed, Purpose::Realization, s as u32).gen_range(0..poles.len())];
        let metrics = match plan {
            Ok(plan) => {
                let m = replay(cfg, &plan, &tasks, pole, bandwidth[s], s, state.last_decision.as_ref())?;
                state.last_decision = Some(plan.result.y_star);
                m
            }
            Err(e) if e.is_infeasible() => SegmentMetrics {
                segment: s,
                tau,
                accuracy: 0.0,
                delay_s: f64::INFINITY,
                energy_j: f64::INFINITY,
                cost: f64::INFINITY,
                success: false,
                feasible: false,
                switches: 0,
                iters: 0,
                planned_objective: f64::INFINITY,
            },
            Err(e) => return Err(e),
        };
        out.push(SegmentMetrics { tau, ..metrics });
        prev_tau = tau;
    }
    Ok(EpisodeMetrics::new(cfg, policy, out))
}

#[allow(clippy::too_many_arguments)]
fn plan_segment(
    cfg: &ScenarioConfig,
    policy: Policy,
    tasks: &[TaskSpec],
    tau: f64,
    prev_tau: f64,
    prev: Option<&FirstStageDecision>,
    space: &ConfigSpace,
    profile: &Profile,
) -> Result<Plan> {
    let uset = cfg.uncertainty();
    let coupling = group_coupling(tasks.len(), uset.len());
    let build = |tasks: Vec<TaskSpec>, uset, locations: Vec<Location>| {
        RobustInstance::new(tasks, space.clone(), profile.clone(), uset, cfg.beta, coupling.clone(), locations)
    };
    match policy {
        Policy::GatedRobust => {
            let instance = build(tasks.to_vec(), uset, Location::ALL.to_vec())?;
            let mut warm = warm_start_config(tasks, tau, space, profile).ok();
            if let (Some(w), Some(p)) = (warm.as_ref(), prev) {
                let impact: Vec<f64> =
                    (0..tasks.len()).map(|i| change_impact(&instance, i, &w.0[i], &p.0[i])).collect();
                warm = Some(consistency_filter(w, p, tau, prev_tau, cfg.delta_max(), &impact)?);
            }
            let result = ccg_solve(&instance, &cfg.solver, warm.as_ref())?;
            Ok(Plan { instance, result, relaxed: false })
        }
        Policy::NominalGreedy => {
            let instance = build(tasks.to_vec(), uset.with_gamma(0), Location::ALL.to_vec())?;
            let result = ccg_solve(&instance, &cfg.solver, None)?;
            Ok(Plan { instance, result, relaxed: false })
        }
        Policy::CloudOnly | Policy::EdgeOnly => {
            let loc = if policy == Policy::CloudOnly { Location::Cloud } else { Location::Edge };
            let ceiling = tier_ceiling(space, profile, loc)?;
            let mut relaxed = false;
            let tasks = tasks
                .iter()
                .map(|t| {
                    let mut t = t.clone();
                    if t.accuracy_req > ceiling {
                        t.accuracy_req = ceiling;
                        relaxed = true;
                    }
                    t
                })
                .collect();
            let instance = build(tasks, uset, vec![loc])?;
            let result = ccg_solve(&instance, &cfg.solver, None)?;
            Ok(Plan { instance, result, relaxed })
        }
    }
}

/// Highest accuracy any configuration reaches on `loc`.
fn tier_ceiling(space: &ConfigSpace, profile: &Profile, loc: Location) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for n in 0..space.resolutions.len() {
        for z in 0..space.frame_rates.len() {
            for k in 0..space.model_count(loc) {
                best = best.max(profile.accuracy(n, z, k, loc)?);
            }
        }
    }
    Ok(best)
}

/// Nominal cost difference between two configurations of one task.
fn change_impact(inst: &RobustInstance, task: usize, a: &crate::model::TaskConfig, b: &crate::model::TaskConfig) -> f64 {
    let term = |c: &crate::model::TaskConfig| {
        inst.option_index(c)
            .and_then(|o| inst.best_model(task, o).map(|(_, cost)| inst.transmit(task, o) + cost))
            .unwrap_or(f64::INFINITY)
    };
    let (x, y) = (term(a), term(b));
    if x == y {
        0.0
    } else {
        (x - y).abs()
    }
}

fn replay(
    cfg: &ScenarioConfig,
    plan: &Plan,
    tasks: &[TaskSpec],
    pole: &Scenario,
    bandwidth_scale: f64,
    segment: usize,
    prev: Option<&FirstStageDecision>,
) -> Result<SegmentMetrics> {
    let inst = &plan.instance;
    let y = &plan.result.y_star;
    let models = second_stage_value(y, pole, inst)?
        .models
        .ok_or_else(|| Error::Infeasible("planned decision lost its recourse".into()))?;
    let (mut delay, mut energy, mut accuracy) = (0.0, 0.0, 0.0);
    let mut success = true;
    for (i, task) in tasks.iter().enumerate() {
        let c = &y.0[i];
        let b = evaluate_task(
            task,
            c,
            models.0[i],
            &inst.space,
            &inst.profile,
            cfg.beta,
            inst.inflation(i, c.location, &pole.g),
            bandwidth_scale,
        )?;
        delay += b.delay();
        energy += b.energy;
        accuracy += b.achieved_accuracy;
        success &= b.achieved_accuracy >= task.accuracy_req;
    }
    Ok(SegmentMetrics {
        segment,
        tau: 0.0,
        accuracy: accuracy / tasks.len() as f64,
        delay_s: delay,
        energy_j: energy,
        cost: delay + cfg.beta * energy,
        success,
        feasible: !plan.relaxed,
        switches: prev.map_or(0, |p| p.location_distance(y)),
        iters: plan.result.iterations,
        planned_objective: plan.result.upper,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    seed: u64,
    policy: &'a str,
    fluctuation: f64,
    segment: usize,
    accuracy: f64,
    delay_s: f64,
    energy_j: f64,
    cost: f64,
    success: bool,
    switches: usize,
    iters: usize,
}

/// One row per segment, episodes in the order given.
pub fn write_episode_csv<W: Write>(out: W, episodes: &[EpisodeMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for ep in episodes {
        for s in &ep.segments {
            w.serialize(CsvRow {
                seed: ep.seed,
                policy: ep.policy.name(),
                fluctuation: ep.fluctuation,
                segment: s.segment,
                accuracy: s.accuracy,
                delay_s: s.delay_s,
                energy_j: s.energy_j,
                cost: s.cost,
                success: s.success,
                switches: s.switches,
                iters: s.iters,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Gating training data from synthetic traces, cycling through the three
/// families. A segment is labelled as needing the cloud when the mean of its
/// region-motion entries exceeds `motion_threshold`. Latencies are the
/// relative transmit delay of each tier under the default profile.
pub fn training_episodes(seed: u64, count: usize, segments: usize, feature_dim: usize, motion_threshold: f64) -> Result<Vec<TrainingEpisode>> {
    let (_, profile) = default_profile();
    let lat_cloud = profile.bandwidth.edge / profile.bandwidth.cloud;
    let families = [TraceFamily::Static, TraceFamily::Gradual, TraceFamily::Burst];
    (0..count)
        .map(|e| {
            let trace = generate_trace(seed.wrapping_add(e as u64), families[e % 3], segments, 6);
            let features: Vec<MotionFeature> =
                trace.iter().map(|s| s.gate_input(feature_dim)).collect::<Result<_>>()?;
            let half = feature_dim / 2;
            let labels = features.iter().map(|f| f.0[half..].iter().sum::<f64>() / half as f64 > motion_threshold).collect();
            Ok(TrainingEpisode {
                labels,
                latency_edge: vec![1.0; features.len()],
                latency_cloud: vec![lat_cloud; features.len()],
                features,
            })
        })
        .collect()
}
