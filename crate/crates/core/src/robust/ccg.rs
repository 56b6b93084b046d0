use super::master::master_solve;
use super::second_stage::{objective_at, worst_case_at};
use super::{enumerate_poles, second_stage_value, BoundPoint, Scenario, SolveResult, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{FirstStageDecision, RobustInstance};

/// Column-and-constraint generation.
///
/// Starts from the nominal scenario, or from the worst case of `warm_start`
/// when one is given and has a feasible recourse. A bandwidth-feasible warm
/// start also seeds the upper bound. Each iteration solves the master over the
/// scenarios collected so far, finds the worst case of its decision and adds
/// it. The loop stops once the decision's worst-case objective is within
/// `theta` of the master value, and returns that decision.
pub fn ccg_solve(
    instance: &RobustInstance,
    config: &SolverConfig,
    warm_start: Option<&FirstStageDecision>,
) -> Result<SolveResult> {
    config.validate()?;
    let poles = enumerate_poles(&instance.uset, config.pole_enumeration_limit)?;
    let k = instance.coordinate_count();

    let mut scenarios = vec![Scenario::nominal(k)];
    let mut upper = f64::INFINITY;
    let mut incumbent: Option<(FirstStageDecision, Vec<usize>)> = None;
    if let Some(w) = warm_start {
        let idx = instance.resolve(w)?;
        let (u, value) = worst_case_at(instance, &idx, poles.clone());
        if value.is_finite() {
            scenarios[0] = u.clone();
            if instance.bandwidth_used(w)? <= instance.profile.total_bandwidth_cap {
                upper = objective_at(instance, &idx, &u.g);
                incumbent = Some((w.clone(), idx));
            }
        }
    }

    let mut lower = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut finished: Option<FirstStageDecision> = None;
    while iterations < config.max_iter {
        iterations += 1;
        let master = master_solve(&scenarios, instance, upper)?;
        lower = lower.max(master.value);
        let idx = instance.resolve(&master.y)?;
        let (u, _) = worst_case_at(instance, &idx, poles.clone());
        let f = objective_at(instance, &idx, &u.g);
        if f < upper {
            upper = f;
            incumbent = Some((master.y.clone(), idx));
        }
        trace.push(BoundPoint { lower, upper });
        if f - lower <= config.theta || scenarios.contains(&u) {
            finished = Some(master.y);
            break;
        }
        scenarios.push(u);
    }

    let converged = finished.is_some();
    let y_star = match finished {
        Some(y) => y,
        None => incumbent
            .map(|(y, _)| y)
            .ok_or_else(|| Error::Infeasible("no decision with a feasible recourse was found".into()))?,
    };
    let idx = instance.resolve(&y_star)?;
    let (worst_case, _) = worst_case_at(instance, &idx, poles);
    let objective = objective_at(instance, &idx, &worst_case.g);
    let recourse = second_stage_value(&y_star, &worst_case, instance)?;
    let v_star = recourse.models.ok_or_else(|| Error::Infeasible("returned decision has no feasible recourse".into()))?;
    Ok(SolveResult {
        y_star,
        v_star,
        upper: objective,
        lower,
        iterations,
        converged,
        worst_case,
        scenarios,
        bound_trace: trace,
    })
}
