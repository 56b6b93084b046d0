//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints its PASS/FAIL line regardless of output capture.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use vidroute::gating::{
    composite_loss, consistency_filter, gate_step, location_budget, loss_and_gradient, warm_start_config, GateState,
    GatingParams, MotionFeature, TrainingEpisode,
};
use vidroute::model::{ConfigSpace, FirstStageDecision, Location, Profile, TaskConfig, TaskSpec};
use vidroute::oracle::{brute_force_nominal, brute_force_solve, oracle_poles};
use vidroute::rng::{child_rng, Purpose};
use vidroute::robust::{ccg_solve, dual_worst_case, pole_count, worst_case_u, SolverConfig};
use vidroute::sim::{random_instance, regret_experiment, run_episode, Policy, RandomInstanceDims, ScenarioConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn oracle_equivalence() -> Outcome {
    let dims = RandomInstanceDims::default();
    let cfg = SolverConfig::default();
    let bad: Vec<String> = (0..200u64)
        .into_par_iter()
        .filter_map(|seed| {
            let inst = random_instance(seed, &dims);
            let poles = oracle_poles(inst.uset.len(), inst.uset.gamma);
            match (ccg_solve(&inst, &cfg, None), brute_force_solve(&inst, &poles)) {
                (Ok(a), Ok(b)) => {
                    let same = (a.objective() - b.objective()).abs() <= 1e-9 && a.y_star == b.y_star;
                    (!same).then(|| format!("seed {seed}: {} vs {}", a.objective(), b.objective()))
                }
                (Err(a), Err(b)) if a.is_infeasible() && b.is_infeasible() => None,
                (a, b) => Some(format!("seed {seed}: {:?} vs {:?}", a.err(), b.err())),
            }
        })
        .collect();
    outcome(bad.is_empty(), format!("200 instances, {} mismatches{}", bad.len(), first(&bad)))
}

fn bound_behavior() -> Outcome {
    let dims = RandomInstanceDims::default();
    let cfg = SolverConfig::default();
    let mut solved = 0;
    for seed in 0..200u64 {
        let inst = random_instance(seed, &dims);
        let Ok(r) = ccg_solve(&inst, &cfg, None) else { continue };
        solved += 1;
        let t = &r.bound_trace;
        for w in t.windows(2) {
            if w[1].lower < w[0].lower || w[1].upper > w[0].upper {
                return outcome(false, format!("seed {seed}: bounds move the wrong way {w:?}"));
            }
        }
        if let Some(p) = t.iter().find(|p| p.upper < p.lower - 1e-12) {
            return outcome(false, format!("seed {seed}: upper below lower {p:?}"));
        }
        if r.iterations as u64 > pole_count(&inst.uset) {
            return outcome(false, format!("seed {seed}: {} iterations", r.iterations));
        }
    }
    outcome(true, format!("{solved} solved instances"))
}

fn random_decision(seed: u64, inst: &vidroute::model::RobustInstance) -> FirstStageDecision {
    let mut rng = child_rng(seed, Purpose::Instance, 7);
    let options = inst.options();
    FirstStageDecision((0..inst.task_count()).map(|_| options[rng.gen_range(0..options.len())]).collect())
}

fn strong_duality() -> Outcome {
    let dims = RandomInstanceDims::default();
    let cfg = SolverConfig::default();
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    let mut seed = 0u64;
    while pairs < 100 {
        let inst = random_instance(10_000 + seed, &dims);
        let y = random_decision(seed, &inst);
        seed += 1;
        let primal = worst_case_u(&y, &inst, &cfg).expect("primal").1;
        let dual = dual_worst_case(&y, &inst).expect("dual");
        if primal.is_infinite() && dual.is_infinite() {
            continue;
        }
        pairs += 1;
        worst = worst.max((primal - dual).abs());
    }
    outcome(worst <= 1e-9, format!("100 finite pairs ({seed} drawn), max gap {worst:.3e}"))
}

fn gamma_monotonicity() -> Outcome {
    let dims = RandomInstanceDims::default();
    let cfg = SolverConfig::default();
    let mut checked = 0;
    for seed in 0..50u64 {
        let base = random_instance(20_000 + seed, &dims);
        let mut prev = f64::NEG_INFINITY;
        for gamma in 0..=base.uset.len() {
            let inst = base.with_gamma(gamma).expect("gamma within range");
            let r = match ccg_solve(&inst, &cfg, None) {
                Ok(r) => r,
                Err(e) if e.is_infeasible() => break,
                Err(e) => return outcome(false, format!("seed {seed}: {e}")),
            };
            if r.objective() < prev {
                return outcome(false, format!("seed {seed}: objective drops at budget {gamma}"));
            }
            if gamma == 0 {
                let nominal = brute_force_nominal(&inst).expect("oracle agrees on feasibility");
                if nominal.objective() != r.objective() || nominal.y_star != r.y_star {
                    return outcome(
                        false,
                        format!("seed {seed}: nominal {} vs {}", nominal.objective(), r.objective()),
                    );
                }
            }
            prev = r.objective();
            checked += 1;
        }
    }
    outcome(true, format!("50 instances, {checked} budgets"))
}

fn training_data(seed: u64, d: usize, len: usize) -> Vec<TrainingEpisode> {
    let mut rng = child_rng(seed, Purpose::Training, 99);
    let features = (0..len).map(|_| MotionFeature((0..d).map(|_| rng.gen_range(0.0..120.0)).collect())).collect();
    let labels = (0..len).map(|_| rng.gen_bool(0.5)).collect();
    let latency_edge = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
    let latency_cloud = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
    vec![TrainingEpisode { features, labels, latency_edge, latency_cloud }]
}

fn gradient_check() -> Outcome {
    let eps = 1e-5;
    let (l1, l2) = (0.3, 0.2);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for seed in 0..20u64 {
        let p = GatingParams::random(seed, 6, 4, 0.7);
        let data = training_data(seed, 6, 3);
        let (_, grad) = loss_and_gradient(&p, &data, l1, l2).expect("gradient");
        let theta = p.flatten();
        for j in 0..theta.len() {
            if grad[j].abs() <= 1e-8 {
                continue;
            }
            let mut hi = theta.clone();
            let mut lo = theta.clone();
            hi[j] += eps;
            lo[j] -= eps;
            let fd = (composite_loss(&p.unflatten(&hi), &data, l1, l2).unwrap()
                - composite_loss(&p.unflatten(&lo), &data, l1, l2).unwrap())
                / (2.0 * eps);
            worst = worst.max((grad[j] - fd).abs() / grad[j].abs());
            compared += 1;
        }
    }
    outcome(worst < 1e-4, format!("{compared} coordinates, max relative error {worst:.3e}"))
}

fn gate_run(seed: u64, steps: usize) -> Result<Vec<(Vec<u64>, Vec<u64>, u64)>, String> {
    let p = GatingParams::random(seed, 8, 6, 3.0);
    let mut state = GateState::new(&p);
    let mut rng = child_rng(seed, Purpose::Trace, 50);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let x = MotionFeature((0..8).map(|_| rng.gen_range(0.0..255.0)).collect());
        let o = gate_step(&p, &mut state, &x).map_err(|e| e.to_string())?;
        if !o.gate.iter().all(|g| 0.0 < *g && *g < 1.0) || !o.hidden.iter().all(|h| -1.0 < *h && *h < 1.0) {
            return Err(format!("seed {seed}: value outside the open interval"));
        }
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        out.push((bits(&o.gate), bits(&o.hidden), o.score.to_bits()));
    }
    Ok(out)
}

fn gate_range() -> Outcome {
    for seed in 0..10u64 {
        let first = match gate_run(seed, 1000) {
            Ok(r) => r,
            Err(e) => return outcome(false, e),
        };
        if gate_run(seed, 1000).ok() != Some(first) {
            return outcome(false, format!("seed {seed}: replay differs"));
        }
    }
    outcome(true, "10 seeds x 1000 steps in range, replays bit-identical")
}

fn success_rate() -> Outcome {
    let stable: Vec<(f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let cfg = ScenarioConfig::new(seed);
            let g = run_episode(&cfg, Policy::GatedRobust).expect("episode").summary.success_rate;
            let e = run_episode(&cfg, Policy::EdgeOnly).expect("episode").summary.success_rate;
            (g, e)
        })
        .collect();
    let gated = stable.iter().map(|s| s.0).sum::<f64>() / 50.0;
    let edge = stable.iter().map(|s| s.1).sum::<f64>() / 50.0;

    // Stable requirements never exceed the edge ceiling; a raised range does.
    let high: Vec<(f64, f64)> = (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let cfg = ScenarioConfig { requirement_range: Some((0.8, 0.95)), ..ScenarioConfig::new(seed) };
            let g = run_episode(&cfg, Policy::GatedRobust).expect("episode").summary.success_rate;
            let e = run_episode(&cfg, Policy::EdgeOnly).expect("episode").summary.success_rate;
            (g, e)
        })
        .collect();
    let high_gated = high.iter().map(|s| s.0).sum::<f64>() / high.len() as f64;
    let high_edge = high.iter().map(|s| s.1).sum::<f64>() / high.len() as f64;
    outcome(
        gated == 1.0 && high_gated == 1.0 && high_edge < high_gated,
        format!(
            "stable: gated {gated:.3}, edge {edge:.3}; requirements 0.8-0.95: gated {high_gated:.3}, edge {high_edge:.3}"
        ),
    )
}

/// Minimum share of rows where the robust plan is strictly better; pinned
/// from the first run on the default profile.
const STRICT_SHARE_TARGET: f64 = 0.10;

fn robustness() -> Outcome {
    let seeds: Vec<u64> = (0..20).collect();
    let rows = match regret_experiment(&ScenarioConfig::new(0), &seeds, &[0, 2]) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    if let Some(r) = rows.iter().find(|r| r.robust_worst > r.nominal_worst) {
        return outcome(false, format!("robust loses: {r:?}"));
    }
    let strict = rows.iter().filter(|r| r.strict).count();
    let share = strict as f64 / rows.len() as f64;
    outcome(share >= STRICT_SHARE_TARGET, format!("{} rows, {strict} strict ({:.1}%)", rows.len(), 100.0 * share))
}

fn dominance() -> Outcome {
    let bad: Vec<String> = (0..20u64)
        .into_par_iter()
        .flat_map_iter(|seed| {
            let mut cfg = ScenarioConfig::new(seed);
            cfg.bandwidth_fluctuation = [0.0, 0.1, 0.2, 0.3][seed as usize % 4];
            if seed % 2 == 1 {
                cfg.requirement_mode = vidroute::sim::RequirementMode::Fluctuating;
            }
            let gated = run_episode(&cfg, Policy::GatedRobust).expect("episode");
            let mut bad = Vec::new();
            for policy in [Policy::CloudOnly, Policy::EdgeOnly] {
                let other = run_episode(&cfg, policy).expect("episode");
                for (a, b) in gated.segments.iter().zip(&other.segments) {
                    if b.feasible && b.planned_objective.is_finite() && a.planned_objective > b.planned_objective + 1e-9 {
                        bad.push(format!("seed {seed} segment {} vs {policy}", a.segment));
                    }
                }
            }
            bad
        })
        .collect();
    outcome(bad.is_empty(), format!("20 episodes, {} violations{}", bad.len(), first(&bad)))
}

/// Straight-line restatement of the warm-start scan: the qualifying set, then
/// the start rule, without any early exits shared with the library.
fn reference_warm_start(tasks: &[TaskSpec], tau: f64, space: &ConfigSpace, profile: &Profile) -> Option<Vec<TaskConfig>> {
    let n = space.resolutions.len();
    let z = space.default_frame_rate_index();
    let start = ((tau * (n - 1) as f64).floor() as usize).min(n - 1);
    let mut out = Vec::new();
    for task in tasks {
        let mut pick = None;
        for loc in [Location::Edge, Location::Cloud] {
            let ok: Vec<usize> =
                (0..n).filter(|&r| profile.accuracy(r, z, 0, loc).unwrap() >= task.accuracy_req).collect();
            let chosen = if ok.contains(&start) {
                ok.first().copied()
            } else {
                ok.iter().copied().find(|&r| r > start).or_else(|| ok.iter().copied().find(|&r| r < start))
            };
            if let Some(r) = chosen {
                pick = Some(TaskConfig { resolution: r, frame_rate: z, location: loc });
                break;
            }
        }
        out.push(pick?);
    }
    Some(out)
}

fn warm_start_conformance() -> Outcome {
    let dims = RandomInstanceDims { tasks: (1, 6), resolutions: (2, 5), frame_rates: (1, 3), ..Default::default() };
    let mut checked_filters = 0;
    for seed in 0..100u64 {
        let inst = random_instance(30_000 + seed, &dims);
        let mut rng = child_rng(seed, Purpose::Instance, 11);
        let tasks: Vec<TaskSpec> =
            inst.tasks.iter().map(|t| TaskSpec { accuracy_req: rng.gen_range(0.3..0.99), ..t.clone() }).collect();
        let tau = rng.gen_range(0.0..=1.0);
        let got = warm_start_config(&tasks, tau, &inst.space, &inst.profile).ok().map(|y| y.0);
        let want = reference_warm_start(&tasks, tau, &inst.space, &inst.profile);
        if got != want {
            return outcome(false, format!("seed {seed}: {got:?} vs {want:?}"));
        }

        let m = tasks.len();
        let options = inst.options();
        let mut draw = || FirstStageDecision((0..m).map(|_| options[rng.gen_range(0..options.len())]).collect());
        let (proposed, prev) = (draw(), draw());
        let tau_prev = rng.gen_range(0.0..=1.0);
        let delta_max = rng.gen_range(0..=m);
        let impact: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..5.0)).collect();
        let out = consistency_filter(&proposed, &prev, tau, tau_prev, delta_max, &impact).expect("filter");
        let budget = location_budget(delta_max, tau, tau_prev);
        if out.location_distance(&prev) > budget {
            return outcome(false, format!("seed {seed}: filter exceeds its budget"));
        }
        checked_filters += 1;
    }
    outcome(true, format!("100 warm starts match, {checked_filters} filters within budget"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 bound behavior", bound_behavior),
        ("3 strong duality", strong_duality),
        ("4 budget monotonicity and nominal recovery", gamma_monotonicity),
        ("5 gating gradient check", gradient_check),
        ("6 gate range and determinism", gate_range),
        ("7 success rate", success_rate),
        ("8 robustness under fluctuation", robustness),
        ("9 dominance over single-tier baselines", dominance),
        ("10 warm start and consistency filter", warm_start_conformance),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {name}: {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn first<T: std::fmt::Debug>(bad: &[T]) -> String {
    bad.first().map(|b| format!(", first {b:?}")).unwrap_or_default()
}
