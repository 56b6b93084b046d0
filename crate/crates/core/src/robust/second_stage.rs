use rayon::prelude::*;

use super::{enumerate_poles, Scenario, SolverConfig, TIE_TOL};
use crate::error::Result;
use crate::model::{FirstStageDecision, RobustInstance, SecondStageDecision};

/// Optimal model choice for a fixed first stage and scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Recourse {
    /// `None` when some task has no model meeting its requirement.
    pub models: Option<SecondStageDecision>,
    /// Total second-stage cost, `+inf` when infeasible.
    pub value: f64,
}

impl Recourse {
    pub fn is_feasible(&self) -> bool {
        self.models.is_some()
    }
}

/// Per task: the cheapest model on the chosen tier that meets the accuracy
/// requirement, its cost scaled by the coupled uncertainty coordinates.
pub fn second_stage_value(y: &FirstStageDecision, scenario: &Scenario, instance: &RobustInstance) -> Result<Recourse> {
    let idx = instance.resolve(y)?;
    let mut models = Vec::with_capacity(idx.len());
    let mut value = 0.0;
    for (i, &o) in idx.iter().enumerate() {
        match instance.best_model(i, o) {
            Some((k, cost)) => {
                models.push(k);
                value += cost * instance.inflation(i, instance.options()[o].location, &scenario.g);
            }
            None => return Ok(Recourse { models: None, value: f64::INFINITY }),
        }
    }
    Ok(Recourse { models: Some(SecondStageDecision(models)), value })
}

/// First-stage cost plus recourse value, accumulated per task in task order.
/// The master problem sums the same per-task terms in the same order.
pub fn objective(y: &FirstStageDecision, scenario: &Scenario, instance: &RobustInstance) -> Result<f64> {
    let idx = instance.resolve(y)?;
    Ok(objective_at(instance, &idx, &scenario.g))
}

pub(crate) fn task_term(instance: &RobustInstance, task: usize, option: usize, g: &[f64]) -> f64 {
    match instance.best_model(task, option) {
        Some((_, cost)) => {
            instance.transmit(task, option) + cost * instance.inflation(task, instance.options()[option].location, g)
        }
        None => f64::INFINITY,
    }
}

pub(crate) fn objective_at(instance: &RobustInstance, idx: &[usize], g: &[f64]) -> f64 {
    idx.iter().enumerate().map(|(i, &o)| task_term(instance, i, o, g)).sum()
}

fn recourse_at(instance: &RobustInstance, idx: &[usize], g: &[f64]) -> f64 {
    let mut value = 0.0;
    for (i, &o) in idx.iter().enumerate() {
        match instance.best_model(i, o) {
            Some((_, cost)) => value += cost * instance.inflation(i, instance.options()[o].location, g),
            None => return f64::INFINITY,
        }
    }
    value
}

const PARALLEL_POLES: usize = 4096;

/// Adversarial scenario for `y`: evaluates the recourse at every pole and keeps
/// the largest, preferring the lexicographically smallest `g` within [`TIE_TOL`].
pub fn worst_case_u(y: &FirstStageDecision, instance: &RobustInstance, config: &SolverConfig) -> Result<(Scenario, f64)> {
    let idx = instance.resolve(y)?;
    let poles = enumerate_poles(&instance.uset, config.pole_enumeration_limit)?;
    Ok(worst_case_at(instance, &idx, poles))
}

pub(crate) fn worst_case_at(instance: &RobustInstance, idx: &[usize], poles: Vec<Scenario>) -> (Scenario, f64) {
    let values: Vec<f64> = if poles.len() >= PARALLEL_POLES {
        poles.par_iter().map(|p| recourse_at(instance, idx, &p.g)).collect()
    } else {
        poles.iter().map(|p| recourse_at(instance, idx, &p.g)).collect()
    };
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] + TIE_TOL {
            best = j;
        }
    }
    let value = values[best];
    (poles.into_iter().nth(best).expect("at least the nominal pole"), value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostEntry, ConfigSpace, Location, PerLocation, Profile, TaskConfig, TaskSpec, UncertaintySet};

    /// One resolution and frame rate; three edge models at accuracy
    /// {0.6, 0.7, 0.8} and second-stage cost {1, 2, 4} with beta = 0.
    fn three_model_instance(req: f64, uset: UncertaintySet, coupling: Vec<Vec<CostEntry>>) -> RobustInstance {
        let space = ConfigSpace {
            resolutions: vec![720],
            frame_rates: vec![30.0],
            models: PerLocation::new(
                vec!["s".into(), "m".into(), "l".into()],
                vec!["s".into(), "m".into(), "l".into()],
            ),
        };
        let mut p = Profile::new(PerLocation::new(50e6, 100e6), PerLocation::new(15.0, 100.0), 1e9);
        p.set_frame_bits(0, 1e5);
        for loc in Location::ALL {
            for (k, (acc, cost)) in [(0.6, 1.0), (0.7, 2.0), (0.8, 4.0)].into_iter().enumerate() {
                p.set_accuracy(0, 0, k, loc, acc);
                p.set_compute_delay(0, k, loc, cost);
            }
        }
        RobustInstance::new(vec![TaskSpec::new(0, req, 30)], space, p, uset, 0.0, coupling, Location::ALL.to_vec())
            .unwrap()
    }

    fn edge_y() -> FirstStageDecision {
        FirstStageDecision(vec![TaskConfig { resolution: 0, frame_rate: 0, location: Location::Edge }])
    }

    #[test]
    fn cheapest_feasible_model_wins() {
        let inst = three_model_instance(0.65, UncertaintySet::certain(), vec![]);
        let r = second_stage_value(&edge_y(), &Scenario::nominal(0), &inst).unwrap();
        assert_eq!(r.models, Some(SecondStageDecision(vec![1])));
        assert_eq!(r.value, 2.0);
    }

    #[test]
    fn unmet_requirement_is_infinite() {
        let inst = three_model_instance(0.99, UncertaintySet::certain(), vec![]);
        let r = second_stage_value(&edge_y(), &Scenario::nominal(0), &inst).unwrap();
        assert!(!r.is_feasible());
        assert_eq!(r.value, f64::INFINITY);
    }

    #[test]
    fn single_coupled_coordinate_is_activated() {
        let coupling = vec![vec![CostEntry { task: 0, location: Location::Edge }]];
        let inst = three_model_instance(0.65, UncertaintySet::new(vec![1.0], vec![0.5], 1), coupling);
        let (u, v) = worst_case_u(&edge_y(), &inst, &SolverConfig::default()).unwrap();
        assert_eq!(u.g, vec![1.0]);
        assert_eq!(v, 3.0);
    }

    #[test]
    fn zero_budget_worst_case_is_nominal() {
        let coupling = vec![vec![CostEntry { task: 0, location: Location::Edge }]];
        let inst = three_model_instance(0.65, UncertaintySet::new(vec![1.0], vec![0.5], 0), coupling);
        let (u, v) = worst_case_u(&edge_y(), &inst, &SolverConfig::default()).unwrap();
        assert_eq!(u.g, vec![0.0]);
        assert_eq!(v, second_stage_value(&edge_y(), &Scenario::nominal(1), &inst).unwrap().value);
    }

    #[test]
    fn ties_prefer_the_smallest_deviation_vector() {
        // Coordinate 0 couples to the unused cloud tier, so both poles tie.
        let coupling = vec![vec![CostEntry { task: 0, location: Location::Cloud }]];
        let inst = three_model_instance(0.65, UncertaintySet::new(vec![1.0], vec![0.5], 1), coupling);
        let (u, _) = worst_case_u(&edge_y(), &inst, &SolverConfig::default()).unwrap();
        assert_eq!(u.g, vec![0.0]);
    }
}
