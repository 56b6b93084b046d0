//! `vidroute` command line: solve, verify, simulate, gate-trace and bench.
//!
//! Exit codes: 0 success, 1 verification mismatch or output failure, 2 usage
//! or configuration error, 3 infeasible instance, 4 solve did not converge.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use vidroute::gating::{gate_step, GateState, GatingParams, MotionFeature};
use vidroute::model::{build_robust_instance, InstanceDoc, RobustInstance};
use vidroute::oracle::{brute_force_solve, oracle_poles};
use vidroute::robust::{ccg_solve, SolveResult, SolverConfig};
use vidroute::sim::{
    default_gating_params, default_profile, default_uncertainty, generate_trace, random_instance, regret_experiment,
    run_episode_with, segment_workload, write_episode_csv, write_regret_csv, EpisodeMetrics, EpisodeSummary, Policy,
    RandomInstanceDims, RequirementMode, ScenarioConfig, TraceFamily,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "vidroute", version, about = "Robust edge-cloud configuration for video analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one instance file and write the result as JSON.
    Solve(SolveArgs),
    /// Compare the robust solver with exhaustive search.
    Verify(VerifyArgs),
    /// Run episodes for a scenario and write per-segment CSV plus a JSON summary.
    Simulate(SimulateArgs),
    /// Replay the gating cell over a feature trace.
    GateTrace(GateTraceArgs),
    /// Time the solver over a sweep of sizes and budgets.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct SolverFlags {
    /// Overrides the instance or scenario budget.
    #[arg(long)]
    gamma: Option<usize>,
    /// Convergence gap.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Directory for `solve.json`; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Verify this instance; otherwise `--count` random small instances.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    count: u64,
    /// Directory for `verify.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Gating weights as JSON; the built-in weights otherwise.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Policies to run; all four when omitted.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<Policy>,
    /// Episodes with consecutive seeds starting at the scenario seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Also run the robust-versus-nominal experiment over the same seeds.
    #[arg(long)]
    regret: bool,
    #[command(flatten)]
    overrides: ScenarioOverrides,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug)]
struct ScenarioOverrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    task_count: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    requirement_mode: Option<RequirementMode>,
    /// `lo,hi`
    #[arg(long, value_parser = parse_range)]
    requirement_range: Option<(f64, f64)>,
    #[arg(long)]
    bandwidth_fluctuation: Option<f64>,
    #[arg(long, value_parser = parse_family)]
    trace_family: Option<TraceFamily>,
    #[arg(long)]
    episode_segments: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    frames_per_segment: Option<usize>,
    #[arg(long)]
    segment_frames: Option<u32>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    delta_max: Option<usize>,
    #[arg(long)]
    motion_threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct GateTraceArgs {
    /// JSON lines, one feature vector per line. A synthetic trace is used when omitted.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Seed of the synthetic trace.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_family, default_value = "burst")]
    trace_family: TraceFamily,
    #[arg(long, default_value_t = 20)]
    segments: usize,
    #[arg(long, default_value_t = 16)]
    feature_dim: usize,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Sweep description as JSON; a small default sweep otherwise.
    #[arg(long)]
    sweep: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
}

fn parse_mode(s: &str) -> Result<RequirementMode, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("expected stable or fluctuating, got {s:?}"))
}

fn parse_family(s: &str) -> Result<TraceFamily, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("expected static, gradual or burst, got {s:?}"))
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

/// Errors that decide the exit code on their own.
#[derive(Debug)]
enum Outcome {
    NotConverged,
    Mismatch(String),
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::NotConverged => f.write_str("solver stopped at the iteration limit before the bounds met"),
            Outcome::Mismatch(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for Outcome {}

/// Marks output-side failures so they do not read as configuration errors.
#[derive(Debug)]
struct OutputError(String);

impl std::fmt::Display for OutputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for OutputError {}

fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(o) = cause.downcast_ref::<Outcome>() {
            return match o {
                Outcome::NotConverged => EXIT_NOT_CONVERGED,
                Outcome::Mismatch(_) => EXIT_FAILURE,
            };
        }
        if cause.downcast_ref::<OutputError>().is_some() {
            return EXIT_FAILURE;
        }
        if let Some(e) = cause.downcast_ref::<vidroute::Error>() {
            if e.is_infeasible() {
                return EXIT_INFEASIBLE;
            }
        }
    }
    EXIT_CONFIG
}

/// Parses `argv` (program name first) and runs one command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Verify(a) => verify(a),
        Command::Simulate(a) => simulate(a),
        Command::GateTrace(a) => gate_trace(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.is_file() {
        bail!("{what} file {} does not exist or is not a file", path.display());
    }
    Ok(())
}

fn prepare_out(dir: &Path) -> anyhow::Result<()> {
    if dir.exists() && !dir.is_dir() {
        bail!("output path {} exists and is not a directory", dir.display());
    }
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

/// Writes `dir/name` through a temporary file in the same directory.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
    let target = dir.join(name);
    let fail = |e: &dyn std::fmt::Display| anyhow!(OutputError(format!("cannot write {}: {e}", target.display())));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    tmp.write_all(bytes).map_err(|e| fail(&e))?;
    tmp.as_file().sync_all().map_err(|e| fail(&e))?;
    tmp.persist(&target).map_err(|e| fail(&e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn solver_config(base: SolverConfig, flags: &SolverFlags) -> anyhow::Result<SolverConfig> {
    let mut cfg = base;
    if let Some(t) = flags.theta {
        cfg.theta = t;
    }
    if let Some(m) = flags.max_iter {
        cfg.max_iter = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_instance(path: &Path, gamma: Option<usize>) -> anyhow::Result<RobustInstance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read instance {}", path.display()))?;
    let doc: InstanceDoc =
        serde_json::from_str(&text).with_context(|| format!("instance {} is not valid", path.display()))?;
    let inst = doc.into_instance().with_context(|| format!("instance {}", path.display()))?;
    Ok(match gamma {
        Some(g) => inst.with_gamma(g)?,
        None => inst,
    })
}

fn solve(a: SolveArgs) -> anyhow::Result<()> {
    require_file(&a.instance, "instance")?;
    if let Some(out) = &a.out {
        prepare_out(out)?;
    }
    let cfg = solver_config(SolverConfig::default(), &a.solver)?;
    let inst = load_instance(&a.instance, a.solver.gamma)?;
    let result = ccg_solve(&inst, &cfg, None)?;
    let bytes = to_json(&result)?;
    match &a.out {
        Some(out) => write_atomic(out, "solve.json", &bytes)?,
        None => std::io::stdout().write_all(&bytes).map_err(|e| anyhow!(OutputError(e.to_string())))?,
    }
    if !result.converged {
        return Err(Outcome::NotConverged.into());
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyCase {
    label: String,
    status: &'static str,
    solver_objective: Option<f64>,
    oracle_objective: Option<f64>,
    detail: String,
}

#[derive(Serialize)]
struct VerifyReport {
    matches: usize,
    total: usize,
    cases: Vec<VerifyCase>,
}

/// Fails outright when the instance is too large for exhaustive search.
fn compare(label: String, inst: &RobustInstance, cfg: &SolverConfig) -> anyhow::Result<VerifyCase> {
    let poles = oracle_poles(inst.uset.len(), inst.uset.gamma);
    let oracle = brute_force_solve(inst, &poles);
    if let Err(e @ vidroute::Error::Capacity(_)) = &oracle {
        bail!("{label}: {e}");
    }
    let case = |status, s: Option<&SolveResult>, o: Option<&SolveResult>, detail: String| VerifyCase {
        label: label.clone(),
        status,
        solver_objective: s.map(SolveResult::objective),
        oracle_objective: o.map(SolveResult::objective),
        detail,
    };
    Ok(match (ccg_solve(inst, cfg, None), oracle) {
        (Ok(s), Ok(o)) => {
            let gap = (s.objective() - o.objective()).abs();
            if gap <= 1e-9 && s.y_star == o.y_star {
                case("match", Some(&s), Some(&o), format!("gap {gap:.3e}"))
            } else {
                case("mismatch", Some(&s), Some(&o), format!("gap {gap:.3e}, same decision: {}", s.y_star == o.y_star))
            }
        }
        (Err(s), Err(o)) if s.is_infeasible() && o.is_infeasible() => {
            case("match", None, None, "both report infeasible".into())
        }
        (s, o) => case(
            "mismatch",
            s.as_ref().ok(),
            o.as_ref().ok(),
            format!("solver: {}; oracle: {}", describe(&s), describe(&o)),
        ),
    })
}

fn describe(r: &vidroute::Result<SolveResult>) -> String {
    match r {
        Ok(s) => format!("objective {}", s.objective()),
        Err(e) => e.to_string(),
    }
}

fn verify(a: VerifyArgs) -> anyhow::Result<()> {
    if let Some(p) = &a.instance {
        require_file(p, "instance")?;
    }
    if let Some(out) = &a.out {
        prepare_out(out)?;
    }
    let cfg = solver_config(SolverConfig::default(), &a.solver)?;
    let cases: Vec<VerifyCase> = match &a.instance {
        Some(p) => vec![compare(p.display().to_string(), &load_instance(p, a.solver.gamma)?, &cfg)?],
        None => {
            if a.count == 0 {
                bail!("--count must be at least 1");
            }
            let dims = RandomInstanceDims::default();
            (a.seed..a.seed + a.count)
                .map(|seed| {
                    let inst = random_instance(seed, &dims);
                    let inst = match a.solver.gamma {
                        Some(g) => inst.with_gamma(g.min(inst.uset.len()))?,
                        None => inst,
                    };
                    compare(format!("seed {seed}"), &inst, &cfg)
                })
                .collect::<anyhow::Result<_>>()?
        }
    };
    let report = VerifyReport { matches: cases.iter().filter(|c| c.status == "match").count(), total: cases.len(), cases };
    if let Some(out) = &a.out {
        write_atomic(out, "verify.json", &to_json(&report)?)?;
    }
    for c in report.cases.iter().filter(|c| c.status != "match") {
        println!("mismatch {}: {}", c.label, c.detail);
    }
    println!("{}/{} matches", report.matches, report.total);
    if report.matches != report.total {
        return Err(Outcome::Mismatch(format!("{} of {} cases differ", report.total - report.matches, report.total)).into());
    }
    Ok(())
}

fn scenario_from(a: &SimulateArgs) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match &a.scenario {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read scenario {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("scenario {} is not valid", p.display()))?
        }
        None => ScenarioConfig::new(0),
    };
    let o = &a.overrides;
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = o.$field { cfg.$field = v; } )* };
    }
    set!(seed, task_count, requirement_mode, bandwidth_fluctuation, trace_family, episode_segments, beta);
    set!(frames_per_segment, segment_frames, feature_dim, motion_threshold);
    if o.requirement_range.is_some() {
        cfg.requirement_range = o.requirement_range;
    }
    if o.delta_max.is_some() {
        cfg.delta_max = o.delta_max;
    }
    if a.solver.gamma.is_some() {
        cfg.gamma = a.solver.gamma;
    }
    cfg.solver = solver_config(cfg.solver.clone(), &a.solver)?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct EpisodeRecord<'a> {
    seed: u64,
    policy: Policy,
    summary: &'a EpisodeSummary,
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    scenario: &'a ScenarioConfig,
    episodes: Vec<EpisodeRecord<'a>>,
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    if let Some(p) = &a.scenario {
        require_file(p, "scenario")?;
    }
    if let Some(p) = &a.params {
        require_file(p, "params")?;
    }
    let cfg = scenario_from(&a)?;
    if a.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    if a.regret && a.seeds < 2 {
        bail!("--regret needs --seeds of at least 2");
    }
    let params = match &a.params {
        Some(p) => GatingParams::load(p)?,
        None => default_gating_params(cfg.feature_dim),
    };
    prepare_out(&a.out)?;
    let policies = if a.policy.is_empty() { Policy::ALL.to_vec() } else { a.policy.clone() };

    let mut episodes: Vec<EpisodeMetrics> = Vec::new();
    for seed in cfg.seed..cfg.seed + a.seeds {
        let c = ScenarioConfig { seed, ..cfg.clone() };
        for &policy in &policies {
            episodes.push(run_episode_with(&c, policy, &params)?);
        }
    }
    let mut csv = Vec::new();
    write_episode_csv(&mut csv, &episodes)?;
    write_atomic(&a.out, "episodes.csv", &csv)?;
    let summary = SimulationSummary {
        scenario: &cfg,
        episodes: episodes.iter().map(|e| EpisodeRecord { seed: e.seed, policy: e.policy, summary: &e.summary }).collect(),
    };
    write_atomic(&a.out, "summary.json", &to_json(&summary)?)?;

    if a.regret {
        let seeds: Vec<u64> = (cfg.seed..cfg.seed + a.seeds).collect();
        let mut gammas = vec![0, cfg.uncertainty().gamma];
        gammas.dedup();
        let rows = regret_experiment(&cfg, &seeds, &gammas)?;
        let mut out = Vec::new();
        write_regret_csv(&mut out, &rows)?;
        write_atomic(&a.out, "regret.csv", &out)?;
    }

    for e in &episodes {
        println!(
            "seed {} {:<14} success {:.3} mean cost {:.4} mean accuracy {:.4}",
            e.seed, e.policy, e.summary.success_rate, e.summary.mean_cost, e.summary.mean_accuracy
        );
    }
    Ok(())
}

fn read_trace(path: &Path) -> anyhow::Result<Vec<MotionFeature>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read trace {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = serde_json::from_str(line)
            .with_context(|| format!("{} line {}: expected a JSON array of numbers", path.display(), n + 1))?;
        out.push(MotionFeature(v));
    }
    if out.is_empty() {
        bail!("trace {} has no feature lines", path.display());
    }
    Ok(out)
}

fn gate_trace(a: GateTraceArgs) -> anyhow::Result<()> {
    if let Some(p) = &a.trace {
        require_file(p, "trace")?;
    }
    if let Some(p) = &a.params {
        require_file(p, "params")?;
    }
    let features = match &a.trace {
        Some(p) => read_trace(p)?,
        None => {
            if a.segments == 0 {
                bail!("--segments must be at least 1");
            }
            generate_trace(a.seed, a.trace_family, a.segments, 6)
                .iter()
                .map(|s| s.gate_input(a.feature_dim))
                .collect::<vidroute::Result<_>>()?
        }
    };
    let params = match &a.params {
        Some(p) => GatingParams::load(p)?,
        None => default_gating_params(features[0].dim()),
    };
    prepare_out(&a.out)?;
    let m = params.hidden_dim;
    let mut text = String::from("step,tau");
    for prefix in ["g", "h"] {
        for j in 0..m {
            write!(text, ",{prefix}_{j}")?;
        }
    }
    text.push('\n');
    let mut state = GateState::new(&params);
    for (t, f) in features.iter().enumerate() {
        let o = gate_step(&params, &mut state, f).with_context(|| format!("trace step {t}"))?;
        write!(text, "{t},{}", o.score)?;
        for v in o.gate.iter().chain(&o.hidden) {
            write!(text, ",{v}")?;
        }
        text.push('\n');
    }
    write_atomic(&a.out, "gate_trace.csv", text.as_bytes())?;
    println!("{} steps written to {}", features.len(), a.out.join("gate_trace.csv").display());
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sweep {
    task_counts: Vec<usize>,
    gammas: Vec<usize>,
    seeds: Vec<u64>,
    #[serde(default = "default_sweep_fluctuation")]
    fluctuation: f64,
}

fn default_sweep_fluctuation() -> f64 {
    0.2
}

impl Default for Sweep {
    fn default() -> Self {
        Self { task_counts: vec![2, 4, 6, 8, 10], gammas: vec![0, 1, 2, 3], seeds: vec![0, 1, 2], fluctuation: 0.2 }
    }
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    let sweep = match &a.sweep {
        Some(p) => {
            require_file(p, "sweep")?;
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read sweep {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("sweep {} is not valid", p.display()))?
        }
        None => Sweep::default(),
    };
    if sweep.task_counts.is_empty() || sweep.gammas.is_empty() || sweep.seeds.is_empty() {
        bail!("sweep needs at least one task count, budget and seed");
    }
    let cfg = solver_config(SolverConfig::default(), &a.solver)?;
    prepare_out(&a.out)?;
    let (space, profile) = default_profile();
    let mut text = String::from("tasks,gamma,seed,iterations,converged,objective,millis\n");
    println!("{:>5} {:>5} {:>5} {:>5} {:>12} {:>10}", "tasks", "gamma", "seed", "iters", "objective", "ms");
    for &m in &sweep.task_counts {
        for &gamma in &sweep.gammas {
            for &seed in &sweep.seeds {
                let tasks = segment_workload(seed, m, RequirementMode::Stable.range(), 0, 50);
                let uset = default_uncertainty(sweep.fluctuation, gamma);
                let inst = build_robust_instance(tasks, space.clone(), profile.clone(), uset, 0.06)?;
                let start = Instant::now();
                let r = ccg_solve(&inst, &cfg, None)?;
                let ms = start.elapsed().as_secs_f64() * 1e3;
                writeln!(text, "{m},{gamma},{seed},{},{},{},{ms:.3}", r.iterations, r.converged, r.objective())?;
                println!("{m:>5} {gamma:>5} {seed:>5} {:>5} {:>12.6} {ms:>10.3}", r.iterations, r.objective());
            }
        }
    }
    write_atomic(&a.out, "bench.csv", text.as_bytes())?;
    Ok(())
}
