use serde::{Deserialize, Serialize};

use super::eval::{cost_of, delay_of, energy_of, task_bandwidth};
use super::{ConfigSpace, FirstStageDecision, Location, PerLocation, Profile, ProfileDoc, SecondStageDecision, TaskConfig, TaskSpec};
use crate::error::{Error, Result};

/// Budgeted uncertainty set: `u_k = baseline_k + g_k * deviation_k` with
/// `g_k` in `[0, 1]` and `sum(g) <= gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySet {
    pub baseline: Vec<f64>,
    pub deviation: Vec<f64>,
    pub gamma: usize,
}

impl UncertaintySet {
    pub fn new(baseline: Vec<f64>, deviation: Vec<f64>, gamma: usize) -> Self {
        Self { baseline, deviation, gamma }
    }

    /// An empty set: no uncertainty coordinates at all.
    pub fn certain() -> Self {
        Self { baseline: vec![], deviation: vec![], gamma: 0 }
    }

    pub fn len(&self) -> usize {
        self.baseline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.baseline.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.baseline.len() != self.deviation.len() {
            return Err(Error::Config(format!(
                "uncertainty baseline has {} coordinates but deviation has {}",
                self.baseline.len(),
                self.deviation.len()
            )));
        }
        if self.gamma > self.len() {
            return Err(Error::Config(format!("gamma {} exceeds {} coordinates", self.gamma, self.len())));
        }
        if self.baseline.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::Config("uncertainty baselines must be positive".into()));
        }
        if self.deviation.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Config("uncertainty deviations must be non-negative".into()));
        }
        Ok(())
    }

    /// Realized `u` for a deviation vector `g`.
    pub fn realize(&self, g: &[f64]) -> Vec<f64> {
        self.baseline.iter().zip(&self.deviation).zip(g).map(|((b, d), g)| b + g * d).collect()
    }

    pub fn with_gamma(&self, gamma: usize) -> Self {
        Self { gamma, ..self.clone() }
    }
}

/// One second-stage cost entry: the compute cost of `task` when run on `location`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CostEntry {
    pub task: usize,
    pub location: Location,
}

/// Default coupling: coordinate `k` inflates the cloud compute cost of every
/// task with `index % K == k`. Coordinates left without a cloud task (more
/// coordinates than tasks) take the edge entry of task `(k - M) % M`.
pub fn group_coupling(task_count: usize, coordinates: usize) -> Vec<Vec<CostEntry>> {
    (0..coordinates)
        .map(|k| {
            let cloud: Vec<CostEntry> = (0..task_count)
                .filter(|i| i % coordinates == k)
                .map(|task| CostEntry { task, location: Location::Cloud })
                .collect();
            if cloud.is_empty() && task_count > 0 {
                vec![CostEntry { task: (k - task_count) % task_count, location: Location::Edge }]
            } else {
                cloud
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
struct TaskTable {
    /// First-stage cost per option.
    transmit: Vec<f64>,
    /// Nominal second-stage cost per option and model.
    model_cost: Vec<Vec<f64>>,
    /// Accuracy requirement met, per option and model.
    model_ok: Vec<Vec<bool>>,
    /// Cheapest requirement-meeting model per option, lowest index on ties.
    best: Vec<Option<(usize, f64)>>,
}

/// A fully assembled two-stage instance.
///
/// First-stage options are the `(resolution, frame rate, location)` triples
/// over the allowed tiers, stored in lexicographic order. Per-task costs are
/// precomputed once here so the solver never touches the profile tables.
#[derive(Debug, Clone)]
pub struct RobustInstance {
    pub tasks: Vec<TaskSpec>,
    pub space: ConfigSpace,
    pub profile: Profile,
    pub beta: f64,
    pub uset: UncertaintySet,
    /// Cost entries inflated by each uncertainty coordinate.
    pub coupling: Vec<Vec<CostEntry>>,
    pub allowed_locations: Vec<Location>,
    options: Vec<TaskConfig>,
    option_bandwidth: Vec<f64>,
    tables: Vec<TaskTable>,
    /// Per task and tier: `(coordinate, deviation / baseline)` pairs.
    inflators: Vec<PerLocation<Vec<(usize, f64)>>>,
}

/// Builds an instance with the default group coupling over both tiers.
pub fn build_robust_instance(
    tasks: Vec<TaskSpec>,
    space: ConfigSpace,
    profile: Profile,
    uset: UncertaintySet,
    beta: f64,
) -> Result<RobustInstance> {
    let coupling = group_coupling(tasks.len(), uset.len());
    RobustInstance::new(tasks, space, profile, uset, beta, coupling, Location::ALL.to_vec())
}

impl RobustInstance {
    pub fn new(
        tasks: Vec<TaskSpec>,
        space: ConfigSpace,
        profile: Profile,
        uset: UncertaintySet,
        beta: f64,
        coupling: Vec<Vec<CostEntry>>,
        mut allowed_locations: Vec<Location>,
    ) -> Result<Self> {
        profile.validate(&space)?;
        for t in &tasks {
            t.validate()?;
        }
        let mut ids: Vec<u32> = tasks.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("task ids must be unique".into()));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::Config(format!("beta must be finite and non-negative, got {beta}")));
        }
        uset.validate()?;
        if coupling.len() != uset.len() {
            return Err(Error::Config(format!(
                "coupling lists {} coordinates, uncertainty set has {}",
                coupling.len(),
                uset.len()
            )));
        }
        for (k, entries) in coupling.iter().enumerate() {
            if entries.is_empty() {
                return Err(Error::Config(format!("uncertainty coordinate {k} couples to no cost entry")));
            }
            if let Some(e) = entries.iter().find(|e| e.task >= tasks.len()) {
                return Err(Error::Config(format!("coordinate {k} couples to unknown task index {}", e.task)));
            }
        }
        allowed_locations.sort();
        allowed_locations.dedup();
        if allowed_locations.is_empty() {
            return Err(Error::Config("at least one location must be allowed".into()));
        }

        let mut options = Vec::new();
        for n in 0..space.resolutions.len() {
            for z in 0..space.frame_rates.len() {
                for &location in &allowed_locations {
                    options.push(TaskConfig { resolution: n, frame_rate: z, location });
                }
            }
        }
        let option_bandwidth =
            options.iter().map(|o| task_bandwidth(o, &space, &profile)).collect::<Result<Vec<_>>>()?;

        let mut tables = Vec::with_capacity(tasks.len());
        for task in &tasks {
            let mut table = TaskTable { transmit: vec![], model_cost: vec![], model_ok: vec![], best: vec![] };
            for o in &options {
                let loc = o.location;
                let bandwidth = *profile.bandwidth.get(loc);
                let (transmit, _) = delay_of(task, o.resolution, o.frame_rate, 0, loc, bandwidth, &space, &profile)?;
                let mut costs = Vec::new();
                let mut oks = Vec::new();
                let mut best: Option<(usize, f64)> = None;
                for k in 0..space.model_count(loc) {
                    let compute = profile.compute_delay(o.resolution, k, loc)?;
                    let cost = cost_of(compute, energy_of(compute, loc, &profile), beta);
                    let ok = profile.accuracy(o.resolution, o.frame_rate, k, loc)? >= task.accuracy_req;
                    if ok && best.is_none_or(|(_, c)| cost < c) {
                        best = Some((k, cost));
                    }
                    costs.push(cost);
                    oks.push(ok);
                }
                table.transmit.push(transmit);
                table.model_cost.push(costs);
                table.model_ok.push(oks);
                table.best.push(best);
            }
            tables.push(table);
        }

        let mut inflators: Vec<PerLocation<Vec<(usize, f64)>>> =
            (0..tasks.len()).map(|_| PerLocation::new(vec![], vec![])).collect();
        for (k, entries) in coupling.iter().enumerate() {
            let ratio = uset.deviation[k] / uset.baseline[k];
            let mut entries = entries.clone();
            entries.sort();
            entries.dedup();
            for e in entries {
                let slot = &mut inflators[e.task];
                match e.location {
                    Location::Edge => slot.edge.push((k, ratio)),
                    Location::Cloud => slot.cloud.push((k, ratio)),
                }
            }
        }

        Ok(Self {
            tasks,
            space,
            profile,
            beta,
            uset,
            coupling,
            allowed_locations,
            options,
            option_bandwidth,
            tables,
            inflators,
        })
    }

    /// Same tables and coupling, different budget.
    pub fn with_gamma(&self, gamma: usize) -> Result<Self> {
        let uset = self.uset.with_gamma(gamma);
        uset.validate()?;
        Ok(Self { uset, ..self.clone() })
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn coordinate_count(&self) -> usize {
        self.uset.len()
    }

    /// First-stage options shared by all tasks, in tie-break order.
    pub fn options(&self) -> &[TaskConfig] {
        &self.options
    }

    pub fn option_index(&self, cfg: &TaskConfig) -> Option<usize> {
        self.options.binary_search(cfg).ok()
    }

    pub fn option_bandwidth(&self, option: usize) -> f64 {
        self.option_bandwidth[option]
    }

    pub fn transmit(&self, task: usize, option: usize) -> f64 {
        self.tables[task].transmit[option]
    }

    /// Nominal second-stage cost of running `model` under `option`.
    pub fn model_cost(&self, task: usize, option: usize, model: usize) -> f64 {
        self.tables[task].model_cost[option][model]
    }

    /// Whether `model` under `option` meets the task's accuracy requirement.
    pub fn model_feasible(&self, task: usize, option: usize, model: usize) -> bool {
        self.tables[task].model_ok[option][model]
    }

    pub fn model_count_for(&self, option: usize) -> usize {
        self.space.model_count(self.options[option].location)
    }

    /// Cheapest requirement-meeting model for `option`, if any.
    pub fn best_model(&self, task: usize, option: usize) -> Option<(usize, f64)> {
        self.tables[task].best[option]
    }

    /// Multiplier on the second-stage cost of `task` on `loc` under deviations `g`.
    pub fn inflation(&self, task: usize, loc: Location, g: &[f64]) -> f64 {
        1.0 + self.inflators[task].get(loc).iter().map(|&(k, ratio)| g[k] * ratio).sum::<f64>()
    }

    /// Per-coordinate weights of the inflation of `task` on `loc`.
    pub fn inflators(&self, task: usize, loc: Location) -> &[(usize, f64)] {
        self.inflators[task].get(loc)
    }

    fn option_indices(&self, y: &FirstStageDecision) -> Result<Vec<usize>> {
        if y.len() != self.tasks.len() {
            return Err(Error::Config(format!(
                "decision covers {} tasks, instance has {}",
                y.len(),
                self.tasks.len()
            )));
        }
        y.iter()
            .map(|cfg| {
                self.option_index(cfg)
                    .ok_or_else(|| Error::Config(format!("configuration {cfg:?} is not an allowed option")))
            })
            .collect()
    }

    /// Resolves a decision into option indices.
    pub fn resolve(&self, y: &FirstStageDecision) -> Result<Vec<usize>> {
        self.option_indices(y)
    }

    pub fn first_stage_cost(&self, y: &FirstStageDecision) -> Result<f64> {
        let idx = self.option_indices(y)?;
        Ok(idx.iter().enumerate().map(|(i, &o)| self.transmit(i, o)).sum())
    }

    /// Second-stage cost of an explicit model choice under deviations `g`,
    /// regardless of whether the choice meets the accuracy requirements.
    pub fn second_stage_cost(&self, y: &FirstStageDecision, v: &SecondStageDecision, g: &[f64]) -> Result<f64> {
        let idx = self.option_indices(y)?;
        if v.0.len() != idx.len() {
            return Err(Error::Config("model choice does not cover every task".into()));
        }
        let mut total = 0.0;
        for (i, (&o, &k)) in idx.iter().zip(&v.0).enumerate() {
            if k >= self.model_count_for(o) {
                return Err(Error::Config(format!("model index {k} out of range for task {i}")));
            }
            total += self.model_cost(i, o, k) * self.inflation(i, self.options[o].location, g);
        }
        Ok(total)
    }

    pub fn bandwidth_used(&self, y: &FirstStageDecision) -> Result<f64> {
        Ok(self.option_indices(y)?.iter().map(|&o| self.option_bandwidth[o]).sum())
    }
}

/// On-disk instance document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub tasks: Vec<TaskSpec>,
    pub profile: ProfileDoc,
    pub uncertainty: UncertaintySet,
    pub beta: f64,
    /// Defaults to the group coupling.
    #[serde(default)]
    pub coupling: Option<Vec<Vec<CostEntry>>>,
    /// Defaults to both tiers.
    #[serde(default)]
    pub allowed_locations: Option<Vec<Location>>,
}

impl InstanceDoc {
    pub fn from_instance(inst: &RobustInstance) -> Self {
        InstanceDoc {
            tasks: inst.tasks.clone(),
            profile: ProfileDoc::from_parts(&inst.space, &inst.profile),
            uncertainty: inst.uset.clone(),
            beta: inst.beta,
            coupling: Some(inst.coupling.clone()),
            allowed_locations: Some(inst.allowed_locations.clone()),
        }
    }

    pub fn into_instance(self) -> Result<RobustInstance> {
        let (space, profile) = self.profile.into_parts()?;
        let coupling = self.coupling.unwrap_or_else(|| group_coupling(self.tasks.len(), self.uncertainty.len()));
        let allowed = self.allowed_locations.unwrap_or_else(|| Location::ALL.to_vec());
        RobustInstance::new(self.tasks, space, profile, self.uncertainty, self.beta, coupling, allowed)
    }
}
