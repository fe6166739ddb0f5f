use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gadop_cli::report::{
    load_problem, provenance, write_json, Layout, LShapeTrace, LoadedProblem, Provenance, SolveReport, SolverStats,
};
use gadop_cli::render_svg;
use gadop_core::baselines::{solve_evf, solve_pdstsp, EvfVariant};
use gadop_core::generator::replicated_takeoff;
use gadop_core::lshape::{self, LShapeOptions};
use gadop_core::milp::{BranchAndBound, MilpStatus, SolveLimits};
use gadop_core::model::{solve_monolith, MonolithOptions};
use gadop_core::scenario::two_point_spaces;
use gadop_core::simulate::{compare_methods, simulate, simulate_structural, SimulationSummary};
use gadop_core::solomon::{parse_solomon, to_instance, GadopParams};
use gadop_core::{generate, CostBreakdown, GeneratorConfig, Instance, ProblemFile};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "gadop", version, about = "Truck and drone delivery planning under takeoff and breakdown uncertainty")]
struct Cli {
    /// Worker threads for the solver and sub-problem fan-out (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Solve an instance and write a JSON report.
    Solve(SolveArgs),
    /// Rank GADOP, EVF and PDSTSP by exact and simulated expected payment (CSV).
    Compare(CompareArgs),
    /// Monte Carlo replay of a solved plan.
    Simulate(SimulateArgs),
    /// Turn a Solomon benchmark file into a native instance.
    Convert(ConvertArgs),
    /// Write a seeded random instance.
    Generate(GenerateArgs),
    /// Wall time of the monolith against the decomposition as takeoff scenarios grow (CSV).
    Speedup(SpeedupArgs),
    /// Draw a solved plan as an SVG route map.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Monolith,
    Lshape,
    Evf,
    Pdstsp,
}

#[derive(Debug, Args, Serialize)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "monolith")]
    method: Method,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seconds per MILP solve before settling for the incumbent.
    #[arg(long)]
    time_cap: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct CompareArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    time_cap: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Report written by `solve`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Histogram CSV path.
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Summary JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ConvertArgs {
    #[arg(long)]
    solomon: PathBuf,
    /// Customer numbers such as `1-10,15`; every customer when omitted.
    #[arg(long)]
    customers: Option<String>,
    /// JSON file with fleet and cost parameters.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    drones: Option<usize>,
    /// Kilometres per coordinate unit.
    #[arg(long)]
    scale: Option<f64>,
    /// Probability that each drone is grounded.
    #[arg(long, default_value_t = 0.0)]
    ground_prob: f64,
    /// Probability of the breakdown scenario.
    #[arg(long, default_value_t = 0.0)]
    break_prob: f64,
    /// Share of customers at which a drone breaks in the breakdown scenario.
    #[arg(long, default_value_t = 0.0)]
    break_fraction: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct GenerateArgs {
    #[arg(long, default_value_t = 5)]
    customers: usize,
    #[arg(long, default_value_t = 1)]
    trucks: usize,
    #[arg(long, default_value_t = 2)]
    drones: usize,
    #[arg(long, default_value_t = 3)]
    takeoff_scenarios: usize,
    #[arg(long, default_value_t = 3)]
    breakdown_scenarios: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop the scenarios and write a deterministic instance.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SpeedupArgs {
    #[arg(long, default_value_t = 2)]
    drones: usize,
    /// Comma-separated list of takeoff scenario counts.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    takeoff_scenarios: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    breakdown_scenarios: usize,
    #[arg(long, default_value_t = 6)]
    customers: usize,
    #[arg(long, default_value_t = 3)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    ground_prob: f64,
    /// Each timing is the best of this many runs.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct RenderArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    svg: PathBuf,
    /// Instance to take coordinates from when the report carries none.
    #[arg(long)]
    instance: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("setting up the thread pool")?;
    }
    match &cli.command {
        Command::Solve(a) => solve(cli, a),
        Command::Compare(a) => compare(a).map(|_| ExitCode::SUCCESS),
        Command::Simulate(a) => simulate_cmd(cli, a).map(|_| ExitCode::SUCCESS),
        Command::Convert(a) => convert(a).map(|_| ExitCode::SUCCESS),
        Command::Generate(a) => generate_cmd(a).map(|_| ExitCode::SUCCESS),
        Command::Speedup(a) => speedup(a).map(|_| ExitCode::SUCCESS),
        Command::Render(a) => render(a).map(|_| ExitCode::SUCCESS),
    }
}

fn limits(time_cap: Option<f64>) -> Result<SolveLimits> {
    match time_cap {
        None => Ok(SolveLimits::default()),
        Some(s) if s.is_finite() && s > 0.0 => Ok(SolveLimits::default().with_time_cap(Duration::from_secs_f64(s))),
        Some(s) => bail!("--time-cap must be a positive number of seconds, got {s}"),
    }
}

fn layout(instance: &Instance) -> Option<Layout> {
    instance.coordinates.as_ref().map(|c| Layout {
        coordinates: c.clone(),
        drone_trip_km: instance.drones.iter().map(|d| d.trip_distance_km).collect(),
    })
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Monolith => "monolith",
        Method::Lshape => "lshape",
        Method::Evf => "evf",
        Method::Pdstsp => "pdstsp",
    }
}

fn solve(cli: &Cli, a: &SolveArgs) -> Result<ExitCode> {
    let problem = load_problem(&a.instance)?;
    let lim = limits(a.time_cap)?;
    let inst = &problem.file.instance;
    let scenarios = problem.file.scenario_space();
    let start = Instant::now();
    let (status, plan, cost, solver, model_objective, trace) = match a.method {
        Method::Monolith => {
            let r = solve_monolith(inst, &scenarios, &MonolithOptions::default(), &BranchAndBound, &lim)?;
            let stats = SolverStats {
                objective: r.objective,
                bound: r.bound,
                nodes_explored: r.nodes_explored,
                simplex_iterations: r.simplex_iterations,
                num_vars: r.num_vars,
                num_constraints: r.num_constraints,
                wall_time_s: r.wall_time_s,
            };
            (r.status, r.decoded.plan, r.decoded.cost, Some(stats), None, None)
        }
        Method::Lshape => {
            let opts = LShapeOptions { limits: lim, ..LShapeOptions::default() };
            let r = lshape::run(inst, &scenarios, &opts, &BranchAndBound)?;
            let capped = r.iterations.iter().any(|it| {
                it.master_status == MilpStatus::GapLimit
                    || it.subproblems.iter().any(|s| s.third_stage_status == MilpStatus::GapLimit)
            });
            let status = if capped { MilpStatus::GapLimit } else { MilpStatus::Optimal };
            let trace = LShapeTrace { master_solves: r.master_solves, iterations: r.iterations, final_state: r.state };
            (status, r.plan, r.cost, None, None, Some(trace))
        }
        Method::Evf | Method::Pdstsp => {
            let r = if a.method == Method::Evf {
                solve_evf(inst, &scenarios, EvfVariant::Corrected, &BranchAndBound, &lim)?
            } else {
                solve_pdstsp(inst, &scenarios, &BranchAndBound, &lim)?
            };
(r.status, r.plan, r.cost, None, Some(r.model_objective), None)
        }
    };
    let report = SolveReport {
        provenance: provenance("solve", cli, &problem),
        method: method_name(a.method).to_string(),
        status,
        plan,
        cost,
        solver,
        model_objective,
        lshape: trace,
        layout: layout(inst),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_json(a.out.as_deref(), &report)?;
    if a.out.is_some() {
        println!("{} {:?}: {}", report.method, report.status, money_summary(&report.cost));
    }
    Ok(match status {
        MilpStatus::Optimal => ExitCode::SUCCESS,
        MilpStatus::GapLimit => ExitCode::from(2),
        other => bail!("solver finished with status {other:?}"),
    })
}

/// Two decimals, without a sign on values that round to zero.
fn money(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" { "0.00".into() } else { s }
}

fn money_summary(c: &CostBreakdown) -> String {
    format!(
        "total {} (trucks {}, drones {}, truck travel {}, drone travel {}, penalty {}, repair {})",
        money(c.total),
        money(c.truck_initial),
        money(c.drone_initial),
        money(c.truck_travel),
        money(c.expected_drone_travel),
        money(c.expected_penalty),
        money(c.expected_repair)
    )
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn compare(a: &CompareArgs) -> Result<()> {
    if a.samples == 0 {
        bail!("--samples must be at least 1");
    }
    let problem = load_problem(&a.instance)?;
    let inst = &problem.file.instance;
    let scenarios = problem.file.scenario_space();
    let report = compare_methods(inst, &scenarios, &BranchAndBound, &limits(a.time_cap)?)?;
    let name = a.instance.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut csv = String::from(
        "instance,method,rank,exact_total,gap_to_best,first_stage,exact_drone_travel,exact_penalty,exact_repair,\
         sim_mean,sim_stddev,sim_drone_travel,sim_penalty,sim_repair,samples,seed\n",
    );
    for (rank, method) in report.ranking.iter().enumerate() {
        let m = report.methods.iter().find(|m| &m.method == method).expect("ranked methods exist");
        let gap = report.gaps.iter().find(|(g, _)| g == method).map_or(0.0, |(_, v)| *v);
        let sim = if m.method == "pdstsp" {
            simulate_structural(&m.plan, inst, &scenarios, a.samples, a.seed)?
        } else {
            simulate(&m.plan, inst, &scenarios, a.samples, a.seed)?
        };
        let e = &m.expected;
        let c = &sim.category_means;
        writeln!(
            csv,
            "{name},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            m.method,
            rank + 1,
            money(e.total),
            money(gap),
            money(e.first_stage()),
            money(e.expected_drone_travel),
            money(e.expected_penalty),
            money(e.expected_repair),
            money(sim.mean),
            money(sim.stddev),
            money(c.drone_travel),
            money(c.penalty),
            money(c.repair),
            a.samples,
            a.seed
        )
        .unwrap();
    }
    write_text(a.out.as_deref(), &csv)
}

#[derive(Serialize)]
struct SimulationReport {
    provenance: Provenance,
    method: String,
    exact: CostBreakdown,
    simulation: SimulationSummary,
}

fn simulate_cmd(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    if a.samples == 0 {
        bail!("--samples must be at least 1");
    }
    let problem = load_problem(&a.instance)?;
    let text = std::fs::read_to_string(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let solved: SolveReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.report.display()))?;
    check_same_instance(&solved, &problem)?;
    let inst = &problem.file.instance;
    let scenarios = problem.file.scenario_space();
    let summary = if solved.method == "pdstsp" {
        simulate_structural(&solved.plan, inst, &scenarios, a.samples, a.seed)?
    } else {
        simulate(&solved.plan, inst, &scenarios, a.samples, a.seed)?
    };
    if let Some(h) = &a.histogram {
        std::fs::write(h, summary.histogram_csv()).with_context(|| format!("writing {}", h.display()))?;
    }
    let out = SimulationReport {
        provenance: provenance("simulate", cli, &problem),
        method: solved.method.clone(),
        exact: solved.cost,
        simulation: summary,
    };
    write_json(a.out.as_deref(), &out)?;
    if a.out.is_some() {
        println!(
            "exact {}, simulated {} (stddev {}, {} draws)",
            money(out.exact.total),
            money(out.simulation.mean),
            money(out.simulation.stddev),
            out.simulation.draws
        );
    }
    Ok(())
}

fn check_same_instance(report: &SolveReport, problem: &LoadedProblem) -> Result<()> {
    if report.provenance.instance_sha256 != problem.sha256 {
        bail!(
            "report was produced for {} (sha256 {}), not {}",
            report.provenance.instance_path,
            report.provenance.instance_sha256,
            problem.path
        );
    }
    Ok(())
}

/// Parses `1-10,15` style lists.
fn parse_customer_list(spec: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: usize = lo.trim().parse().with_context(|| format!("bad customer range {part:?}"))?;
                let hi: usize = hi.trim().parse().with_context(|| format!("bad customer range {part:?}"))?;
                if lo > hi {
                    bail!("empty customer range {part:?}");
                }
                out.extend(lo..=hi);
            }
            None => out.push(part.parse().with_context(|| format!("bad customer number {part:?}"))?),
        }
    }
    Ok(out)
}

fn convert(a: &ConvertArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.solomon).with_context(|| format!("reading {}", a.solomon.display()))?;
    let parsed = parse_solomon(&text).with_context(|| format!("parsing {}", a.solomon.display()))?;
    let mut params = match &a.params {
        Some(p) => {
            let t = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<GadopParams>(&t).with_context(|| format!("parsing {}", p.display()))?
        }
        None => GadopParams::default(),
    };
    if let Some(d) = a.drones {
        params.drones = d;
    }
    if let Some(s) = a.scale {
        params.coordinate_scale_km = s;
    }
    let subset = match &a.customers {
        Some(spec) => parse_customer_list(spec)?,
        None => parsed.rows.iter().skip(1).map(|r| r.id).collect(),
    };
    let instance = to_instance(&parsed, &subset, &params)?;
    let scenarios = if a.ground_prob == 0.0 && a.break_prob == 0.0 {
        None
    } else {
        Some(two_point_spaces(a.ground_prob, a.break_prob, a.break_fraction, &instance)?)
    };
    let file = ProblemFile { instance, scenarios };
    write_text(a.out.as_deref(), &(file.to_json() + "\n"))
}

fn generate_cmd(a: &GenerateArgs) -> Result<()> {
    if a.customers == 0 || a.trucks == 0 {
        bail!("need at least one customer and one truck");
    }
    let cfg = GeneratorConfig {
        customers: a.customers,
        trucks: a.trucks,
        drones: a.drones,
        takeoff_scenarios: a.takeoff_scenarios,
        breakdown_scenarios: a.breakdown_scenarios,
        seed: a.seed,
        ..GeneratorConfig::default()
    };
    let (instance, scenarios) = generate(&cfg);
    let file = if a.deterministic { ProblemFile { instance, scenarios: None } } else { ProblemFile::new(instance, scenarios) };
    write_text(a.out.as_deref(), &(file.to_json() + "\n"))
}

fn best_of<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let mut best = f64::INFINITY;
    let mut last = None;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        let v = f()?;
        best = best.min(t.elapsed().as_secs_f64());
        last = Some(v);
    }
    Ok((best, last.expect("at least one run")))
}

fn speedup(a: &SpeedupArgs) -> Result<()> {
    if a.customers == 0 || a.drones == 0 {
        bail!("need at least one customer and one drone");
    }
    let cfg = GeneratorConfig {
        customers: a.customers,
        drones: a.drones,
        takeoff_scenarios: 1,
        breakdown_scenarios: a.breakdown_scenarios,
        seed: a.seed,
        ..GeneratorConfig::default()
    };
    let (inst, base) = generate(&cfg);
    // Per-scenario blocks, so the monolith grows with the number of takeoff scenarios.
    let opts = MonolithOptions { share_flying_blocks: false, ..MonolithOptions::default() };
    let mut csv = String::from(
        "takeoff_scenarios,breakdown_scenarios,monolith_s,lshape_s,speedup,monolith_total,lshape_total,master_solves\n",
    );
    for &w in &a.takeoff_scenarios {
        let mut sc = base.clone();
        sc.takeoff = replicated_takeoff(a.drones, a.ground_prob, w)?;
        let (tm, mono) = best_of(a.repeats, || {
            Ok(solve_monolith(&inst, &sc, &opts, &BranchAndBound, &SolveLimits::default())?)
        })?;
        let (tl, ls) =
            best_of(a.repeats, || Ok(lshape::run(&inst, &sc, &LShapeOptions::default(), &BranchAndBound)?))?;
        writeln!(
            csv,
            "{},{},{:.4},{:.4},{:.2},{},{},{}",
            sc.takeoff.len(),
            sc.breakdown.len(),
            tm,
            tl,
            tm / tl,
            money(mono.decoded.cost.total),
            money(ls.cost.total),
            ls.master_solves
        )
        .unwrap();
    }
    write_text(a.out.as_deref(), &csv)
}

fn render(a: &RenderArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let report: SolveReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.report.display()))?;
    let layout = match (&report.layout, &a.instance) {
        (Some(l), _) => l.clone(),
        (None, Some(path)) => {
            let problem = load_problem(path)?;
            layout(&problem.file.instance).context("the instance has no coordinates")?
        }
        (None, None) => bail!("the report has no coordinates; pass --instance"),
    };
    let n = report.plan.truck_routes.iter().chain(&report.plan.drone_orders).flatten().copied().max().unwrap_or(0);
    if layout.coordinates.is_empty() || n >= layout.coordinates.len() {
        bail!("the plan visits customer {n} but only {} coordinates are known", layout.coordinates.len().saturating_sub(1));
    }
    if layout.drone_trip_km.len() != report.plan.drone_used.len() {
        bail!("the plan has {} drones but the layout lists {}", report.plan.drone_used.len(), layout.drone_trip_km.len());
    }
    std::fs::write(&a.svg, render_svg(&report.plan, &layout)).with_context(|| format!("writing {}", a.svg.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn money_has_two_decimals() {
        assert_eq!(money(-1e-12), "0.00");
        assert_eq!(money(12.346), "12.35");
        assert_eq!(money(-3.0), "-3.00");
    }

    #[test]
    fn customer_lists() {
        assert_eq!(parse_customer_list("1-3,7").unwrap(), vec![1, 2, 3, 7]);
        assert_eq!(parse_customer_list(" 4 , 2 ").unwrap(), vec![4, 2]);
        assert!(parse_customer_list("3-1").is_err());
        assert!(parse_customer_list("x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
