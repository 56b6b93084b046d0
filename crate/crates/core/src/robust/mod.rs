//! Two-stage robust solver.
//!
//! The outer loop is column-and-constraint generation: a master problem picks
//! the first-stage configuration against a growing set of scenarios, the
//! adversarial subproblem finds the scenario that hurts that configuration
//! most, and the loop stops once the lower bound from the master meets the
//! cost of the master's own choice under its worst case.
//!
//! The second stage picks one model per task, and every scenario scales all
//! models of a `(task, tier)` pair by the same factor. The cheapest feasible
//! model is therefore scenario-independent, and the recourse value is linear
//! in the deviation vector `g`. That makes the worst case a vertex of the
//! budget polytope and lets [`dual_worst_case`] compute the same number
//! through LP duality without enumerating vertices.

mod ccg;
mod dual;
mod master;
mod poles;
mod second_stage;

use serde::{Deserialize, Serialize};

use crate::model::{FirstStageDecision, RobustInstance, SecondStageDecision, UncertaintySet};

pub use ccg::ccg_solve;
pub use dual::{dual_certificate, dual_worst_case, DualCertificate};
pub use master::{master_solve, MasterSolution};
pub use poles::{enumerate_poles, pole_count};
pub use second_stage::{objective, second_stage_value, worst_case_u, Recourse};

/// Tolerance for treating two objective values as tied. Ties resolve to the
/// lexicographically smallest decision.
pub const TIE_TOL: f64 = 1e-9;

/// A point of the uncertainty set given by its deviation vector `g`.
#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Scenario {
    pub g: Vec<f64>,
}

impl Scenario {
    pub fn nominal(coordinates: usize) -> Self {
        Self { g: vec![0.0; coordinates] }
    }

    /// Realized `u = baseline + g * deviation`.
    pub fn realized(&self, uset: &UncertaintySet) -> Vec<f64> {
        uset.realize(&self.g)
    }

    pub fn is_valid(&self, uset: &UncertaintySet) -> bool {
        self.g.len() == uset.len()
            && self.g.iter().all(|g| (0.0..=1.0).contains(g))
            && self.g.iter().sum::<f64>() <= uset.gamma as f64 + 1e-12
    }
}

/// A value-function cut: for any first-stage `y`, the master must pay at least
/// the recourse value of `y` under `scenario`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub scenario: Scenario,
    /// Dual multipliers that certified the scenario at the decision that generated it.
    pub dual: Option<DualCertificate>,
}

impl Cut {
    /// The cut's right-hand side at `y`, or infinity if `y` has no feasible recourse.
    pub fn value(&self, y: &FirstStageDecision, instance: &RobustInstance) -> crate::Result<f64> {
        Ok(second_stage_value(y, &self.scenario, instance)?.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Absolute gap at which the loop stops.
    pub theta: f64,
    pub max_iter: usize,
    /// Largest number of uncertainty coordinates for which vertices are enumerated.
    pub pole_enumeration_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { theta: 1e-9, max_iter: 5000, pole_enumeration_limit: 20 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.theta > 0.0) || self.max_iter == 0 {
            return Err(crate::Error::Config("theta must be positive and max_iter at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub y_star: FirstStageDecision,
    pub v_star: SecondStageDecision,
    pub upper: f64,
    pub lower: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Worst case of `y_star`.
    pub worst_case: Scenario,
    /// Scenarios in the order they entered the master.
    pub scenarios: Vec<Scenario>,
    pub bound_trace: Vec<BoundPoint>,
}

impl SolveResult {
    /// The robust objective of the returned decision.
    pub fn objective(&self) -> f64 {
        self.upper
    }
}
