use super::second_stage::task_term;
use super::{Scenario, TIE_TOL};
use crate::error::{Error, Result};
use crate::model::{FirstStageDecision, RobustInstance};

#[derive(Debug, Clone)]
pub struct MasterSolution {
    pub y: FirstStageDecision,
    /// Optimal master objective: a lower bound on the robust optimum.
    pub value: f64,
    pub nodes: u64,
}

/// Exact master problem over the discrete first-stage space.
///
/// Minimizes `max_j sum_i term_i(y_i, scenario_j)` subject to the shared
/// bandwidth cap, where `term_i` is the task's transmit cost plus its cheapest
/// feasible recourse under scenario `j`. Options without any model meeting the
/// task's requirement are excluded.
///
/// Solved in two depth-first passes. The first finds the optimal value with
/// cost-ordered branching and dominance filtering. The second walks options in
/// lexicographic order and returns the first decision within [`TIE_TOL`] of
/// that value. Both prune on `max_j (partial_j + sum of per-task minima)` and
/// on the smallest remaining bandwidth.
pub fn master_solve(scenarios: &[Scenario], instance: &RobustInstance, incumbent_bound: f64) -> Result<MasterSolution> {
    if scenarios.is_empty() {
        return Err(Error::Config("master problem needs at least one scenario".into()));
    }
    let m = instance.task_count();
    let mut candidates = Vec::with_capacity(m);
    let mut terms = Vec::with_capacity(m);
    let mut bandwidth = Vec::with_capacity(m);
    for (i, task) in instance.tasks.iter().enumerate() {
        let cand: Vec<usize> = (0..instance.options().len()).filter(|&o| instance.best_model(i, o).is_some()).collect();
        if cand.is_empty() {
            return Err(Error::InfeasibleTask { task: task.id, requirement: task.accuracy_req });
        }
        terms.push(
            cand.iter()
                .map(|&o| scenarios.iter().map(|s| task_term(instance, i, o, &s.g)).collect::<Vec<f64>>())
                .collect::<Vec<_>>(),
        );
        bandwidth.push(cand.iter().map(|&o| instance.option_bandwidth(o)).collect::<Vec<f64>>());
        candidates.push(cand);
    }

    let mut search = Search::new(terms, bandwidth, scenarios.len(), instance.profile.total_bandwidth_cap);

    let bound = if incumbent_bound.is_finite() { incumbent_bound + TIE_TOL } else { f64::INFINITY };
    let mut value = search.best_value(bound);
    if value.is_none() && bound.is_finite() {
        value = search.best_value(f64::INFINITY);
    }
    let value = value.ok_or_else(|| {
        Error::Infeasible(format!(
            "no configuration fits the {} b/s bandwidth cap",
            instance.profile.total_bandwidth_cap
        ))
    })?;
    let choice = search.first_within(value + TIE_TOL).expect("the optimum itself lies within tolerance");

    let y = FirstStageDecision(
        choice.iter().enumerate().map(|(i, &c)| instance.options()[candidates[i][c]]).collect(),
    );
    Ok(MasterSolution { y, value, nodes: search.nodes })
}

struct Search {
    /// `terms[i][c][j]`: task `i`, candidate `c`, scenario `j`.
    terms: Vec<Vec<Vec<f64>>>,
    bandwidth: Vec<Vec<f64>>,
    scenarios: usize,
    cap: f64,
    /// `rest[d][j]`: sum over tasks `>= d` of the smallest term under scenario `j`.
    rest: Vec<Vec<f64>>,
    /// Smallest bandwidth the tasks `>= d` can use.
    rest_bandwidth: Vec<f64>,
    nodes: u64,
}

impl Search {
    fn new(terms: Vec<Vec<Vec<f64>>>, bandwidth: Vec<Vec<f64>>, scenarios: usize, cap: f64) -> Self {
        let m = terms.len();
        let mut rest = vec![vec![0.0; scenarios]; m + 1];
        let mut rest_bandwidth = vec![0.0; m + 1];
        for d in (0..m).rev() {
            for j in 0..scenarios {
                let min = terms[d].iter().map(|t| t[j]).fold(f64::INFINITY, f64::min);
                rest[d][j] = min + rest[d + 1][j];
            }
            rest_bandwidth[d] = bandwidth[d].iter().copied().fold(f64::INFINITY, f64::min) + rest_bandwidth[d + 1];
        }
        Self { terms, bandwidth, scenarios, cap, rest, rest_bandwidth, nodes: 0 }
    }

    fn bandwidth_blocked(&self, depth: usize, used: f64) -> bool {
        // Slack keeps rounding in the lower bound from cutting an exactly-full
        // completion; leaves are checked exactly.
        used + self.rest_bandwidth[depth] > self.cap + 1e-9 * self.cap.abs()
    }

    fn lower_bound(&self, depth: usize, partial: &[f64]) -> f64 {
        partial.iter().zip(&self.rest[depth]).map(|(p, r)| p + r).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest objective strictly below `bound`, if any.
    fn best_value(&mut self, bound: f64) -> Option<f64> {
        let m = self.terms.len();
        // Per task: candidates not dominated by another one, cheapest worst term first.
        let order: Vec<Vec<usize>> = (0..m)
            .map(|i| {
                let t = &self.terms[i];
                let b = &self.bandwidth[i];
                let n = t.len();
                let dominated = |c: usize| {
                    (0..n).any(|d| {
                        d != c
                            && b[d] <= b[c]
                            && (0..self.scenarios).all(|j| t[d][j] <= t[c][j])
                            && (b[d] < b[c] || (0..self.scenarios).any(|j| t[d][j] < t[c][j]) || d < c)
                    })
                };
                let mut keep: Vec<usize> = (0..n).filter(|&c| !dominated(c)).collect();
                let worst = |c: usize| t[c].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                keep.sort_by(|&a, &c| worst(a).total_cmp(&worst(c)).then(a.cmp(&c)));
                keep
            })
            .collect();

        let mut best = bound;
        let mut found = false;
        let mut partial = vec![vec![0.0; self.scenarios]; m + 1];
        self.descend_best(0, 0.0, &order, &mut partial, &mut best, &mut found);
        found.then_some(best)
    }

    fn descend_best(
        &mut self,
        depth: usize,
        used: f64,
        order: &[Vec<usize>],
        partial: &mut [Vec<f64>],
        best: &mut f64,
        found: &mut bool,
    ) {
        self.nodes += 1;
        if depth == self.terms.len() {
            if used <= self.cap {
                let value = partial[depth].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let value = if self.scenarios == 0 { 0.0 } else { value };
                if value < *best {
                    *best = value;
                    *found = true;
                }
            }
            return;
        }
        for &c in &order[depth] {
            let next_used = used + self.bandwidth[depth][c];
            if self.bandwidth_blocked(depth + 1, next_used) {
                continue;
            }
            let (head, tail) = partial.split_at_mut(depth + 1);
            for j in 0..self.scenarios {
                tail[0][j] = head[depth][j] + self.terms[depth][c][j];
            }
            if self.lower_bound(depth + 1, &tail[0]) >= *best {
                continue;
            }
            self.descend_best(depth + 1, next_used, order, partial, best, found);
        }
    }

    /// Lexicographically first candidate vector whose objective is `<= limit`.
    fn first_within(&mut self, limit: f64) -> Option<Vec<usize>> {
        let m = self.terms.len();
        let mut partial = vec![vec![0.0; self.scenarios]; m + 1];
        let mut choice = vec![0; m];
        self.descend_first(0, 0.0, limit, &mut partial, &mut choice).then_some(choice)
    }

    fn descend_first(
        &mut self,
        depth: usize,
        used: f64,
        limit: f64,
        partial: &mut [Vec<f64>],
        choice: &mut [usize],
    ) -> bool {
        self.nodes += 1;
        if depth == self.terms.len() {
            let value = partial[depth].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let value = if self.scenarios == 0 { 0.0 } else { value };
            return used <= self.cap && value <= limit;
        }
        for c in 0..self.terms[depth].len() {
            let next_used = used + self.bandwidth[depth][c];
            if self.bandwidth_blocked(depth + 1, next_used) {
                continue;
            }
            let (head, tail) = partial.split_at_mut(depth + 1);
            for j in 0..self.scenarios {
                tail[0][j] = head[depth][j] + self.terms[depth][c][j];
            }
            if self.lower_bound(depth + 1, &tail[0]) > limit {
                continue;
            }
            choice[depth] = c;
            if self.descend_first(depth + 1, next_used, limit, partial, choice) {
                return true;
            }
        }
        false
    }
}
