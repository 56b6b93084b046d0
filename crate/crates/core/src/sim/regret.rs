use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{default_profile, default_uncertainty, segment_workload, ScenarioConfig, FLUCTUATION_LEVELS};
use crate::error::{Error, Result};
use crate::model::{build_robust_instance, FirstStageDecision, RobustInstance};
use crate::robust::{ccg_solve, enumerate_poles, objective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub seed: u64,
    pub fluctuation: f64,
    pub gamma: usize,
    /// Worst cost over the vertices of the budget-`gamma` set.
    pub robust_worst: f64,
    /// Same, for the decision planned against the baseline scenario only.
    pub nominal_worst: f64,
    pub ratio: f64,
    /// The robust plan is cheaper in the worst case by more than 1e-9.
    pub strict: bool,
}

fn worst_over_poles(y: &FirstStageDecision, inst: &RobustInstance, limit: usize) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for p in enumerate_poles(&inst.uset, limit)? {
        worst = worst.max(objective(y, &p, inst)?);
    }
    Ok(worst)
}

/// For every fluctuation level, seed and budget: solve the first segment's
/// workload with that budget and with budget zero, then replay both decisions
/// under every vertex of the budgeted set. Rows are ordered by fluctuation,
/// then seed, then budget.
pub fn regret_experiment(cfg: &ScenarioConfig, seeds: &[u64], gammas: &[usize]) -> Result<Vec<RegretRow>> {
    cfg.validate()?;
    if seeds.len() < 2 {
        return Err(Error::Config("the regret experiment needs at least two seeds".into()));
    }
    let (space, profile) = default_profile();
    let mut jobs = Vec::new();
    for &f in &FLUCTUATION_LEVELS {
        for &seed in seeds {
            for &gamma in gammas {
                jobs.push((f, seed, gamma));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(fluctuation, seed, gamma)| {
            let tasks = segment_workload(seed, cfg.task_count, cfg.requirement_range(), 0, cfg.segment_frames);
            let uset = match &cfg.uset {
                Some(u) => u.with_gamma(gamma),
                None => default_uncertainty(fluctuation, gamma),
            };
            let inst = build_robust_instance(tasks, space.clone(), profile.clone(), uset, cfg.beta)?;
            let robust = ccg_solve(&inst, &cfg.solver, None)?;
            let nominal = ccg_solve(&inst.with_gamma(0)?, &cfg.solver, None)?;
            let limit = cfg.solver.pole_enumeration_limit;
            let robust_worst = worst_over_poles(&robust.y_star, &inst, limit)?;
            let nominal_worst = worst_over_poles(&nominal.y_star, &inst, limit)?;
            Ok(RegretRow {
                seed,
                fluctuation,
                gamma,
                robust_worst,
                nominal_worst,
                ratio: robust_worst / nominal_worst,
                strict: robust_worst < nominal_worst - 1e-9,
            })
        })
        .collect()
}

pub fn write_regret_csv<W: Write>(out: W, rows: &[RegretRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
