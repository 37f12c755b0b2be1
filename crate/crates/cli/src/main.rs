use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use tocp_core::benchgen::{generate_suite, list_suite, BenchmarkConfig};
use tocp_core::harness::run_suite;
use tocp_core::instance::{read_instance, Instance};
use tocp_core::milp::ModelStats;
use tocp_core::plan::FleetPlan;
use tocp_core::results::{self, compare, failure_counts, read_rows, write_header, write_row, ResultRow};
use tocp_core::simulator::{run_episode, run_iterations, PlanStatus, PlannerKind};
use tocp_core::stats::{format_p, Variance};
use tocp_core::svg::{cost_curve_svg, graph_svg};

#[derive(Parser)]
#[command(name = "tocp", version, about = "Patrol route planning with coverage-aware team orienteering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark suite as DIR/H{H}/seed{seed}.json.
    Gen(GenArgs),
    /// Replay iterations 1..T-1, then plan iteration T and write the plan as JSON.
    Solve(SolveArgs),
    /// Run one episode and write its results row.
    Simulate(SimulateArgs),
    /// Run every planner on every instance of a suite.
    Bench(BenchArgs),
    /// t-tests between two planners over the instances every planner solved.
    Stats(StatsArgs),
    /// Draw an instance (and optionally a plan), or cost curves from a results table.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    /// Inclusive seed range, e.g. 1..120.
    #[arg(long, default_value = "1..120", value_parser = parse_seeds)]
    seeds: (u64, u64),
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10")]
    horizons: Vec<usize>,
    /// Write into a non-empty directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    planner: PlannerKind,
    /// 1-based iteration to plan.
    #[arg(long, default_value_t = 1)]
    iteration: usize,
    /// Per-iteration limit in seconds.
    #[arg(long, default_value_t = 1000.0)]
    time_limit: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    planner: PlannerKind,
    #[arg(long, default_value_t = 1000.0)]
    time_limit: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    suite: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "tocp,top,greedy")]
    planners: Vec<PlannerKind>,
    #[arg(long, default_value_t = 1000.0)]
    time_limit: f64,
    /// Worker threads; 0 means one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    results: PathBuf,
    /// Two planners, e.g. top,tocp.
    #[arg(long, value_delimiter = ',', num_args = 1, required = true)]
    pair: Vec<PlannerKind>,
    /// Use Welch's unequal-variance test instead of the pooled one.
    #[arg(long)]
    welch: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, conflicts_with = "results", required_unless_present = "results")]
    instance: Option<PathBuf>,
    /// Plan file written by `solve`.
    #[arg(long, requires = "instance")]
    plan: Option<PathBuf>,
    #[arg(long)]
    results: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Output of `solve`. Vertex ids are 1-based.
#[derive(Debug, Serialize, Deserialize)]
struct PlanFile {
    instance_id: String,
    planner: PlannerKind,
    iteration: usize,
    status: PlanStatus,
    objective: Option<f64>,
    bound: Option<f64>,
    nodes: usize,
    seconds: f64,
    model: Option<ModelStats>,
    c_hat: Vec<f64>,
    routes: Vec<Vec<usize>>,
    lengths: Vec<f64>,
    audit: Vec<String>,
    message: Option<String>,
}

fn parse_seeds(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got '{s}'"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("bad seed '{a}': {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad seed '{b}': {e}"))?;
    if a > b {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok((a, b))
}

fn time_limit(seconds: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(seconds).with_context(|| format!("bad time limit {seconds}"))
}

fn load(path: &Path) -> Result<Instance> {
    read_instance(path).with_context(|| format!("loading {}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(io::stdout()),
    })
}

fn gen(args: GenArgs) -> Result<()> {
    ensure!(!args.horizons.is_empty() && args.horizons.iter().all(|&h| h > 0), "horizons must be positive");
    let config = BenchmarkConfig { seeds: args.seeds, horizons: args.horizons, ..BenchmarkConfig::default() };
    let paths = generate_suite(&config, &args.out, args.force)?;
    eprintln!("wrote {} instances to {}", paths.len(), args.out.display());
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let inst = load(&args.instance)?;
    ensure!(
        (1..=inst.horizon).contains(&args.iteration),
        "iteration {} outside 1..={}",
        args.iteration,
        inst.horizon
    );
    let episode = run_iterations(&inst, args.planner, Some(time_limit(args.time_limit)?), args.iteration)?;
    let rec = episode.records.last().expect("at least one iteration ran");
    let o = &rec.outcome;
    let plan = o.plan.clone().unwrap_or_else(|| FleetPlan::idle(inst.num_agents));
    let file = PlanFile {
        instance_id: inst.id(),
        planner: args.planner,
        iteration: rec.t,
        status: o.status,
        objective: o.objective,
        bound: o.bound,
        nodes: o.nodes,
        seconds: o.seconds,
        model: o.model_stats,
        c_hat: rec.c_hat.clone(),
        routes: plan.routes.iter().map(|r| r.iter().map(|v| v + 1).collect()).collect(),
        lengths: plan.lengths.clone(),
        audit: o.audit.iter().map(ToString::to_string).collect(),
        message: o.message.clone(),
    };
    let mut w = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &file)?;
    writeln!(w)?;
    if !o.audit.is_empty() {
        bail!("solution failed {} model checks", o.audit.len());
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let inst = load(&args.instance)?;
    let episode = run_episode(&inst, args.planner, Some(time_limit(args.time_limit)?))?;
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    write_header(&mut w)?;
    write_row(&mut w, &ResultRow::from(&episode))?;
    w.flush()?;
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    ensure!(!args.planners.is_empty(), "no planners given");
    let paths = list_suite(&args.suite)?;
    ensure!(!paths.is_empty(), "no instances under {}", args.suite.display());
    let instances = paths.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(output(Some(&args.out))?);
    write_header(&mut w)?;
    let total = instances.len() * args.planners.len();
    let mut done = 0;
    let rows = run_suite(&instances, &args.planners, Some(time_limit(args.time_limit)?), args.jobs, |row| {
        write_row(&mut w, row).and_then(|()| w.flush().map_err(Into::into)).map_err(|e| e.to_string())?;
        done += 1;
        eprintln!("[{done}/{total}] {} {} cost {:.4}{}", row.instance_id, row.planner, row.total_cost, if row.failed { " FAILED" } else { "" });
        Ok(())
    })?;
    eprintln!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn stats(args: StatsArgs) -> Result<()> {
    let [a, b] = args.pair[..] else { bail!("--pair takes exactly two planners") };
    let rows = read_rows(File::open(&args.results).with_context(|| format!("opening {}", args.results.display()))?)?;
    let present = results::planners_in(&rows);
    for p in [a, b] {
        ensure!(present.contains(&p), "no rows for planner {p}");
    }
    let variance = if args.welch { Variance::Welch } else { Variance::Pooled };
    println!("H,n,mean_{a},mean_{b},t,p");
    for row in compare(&rows, a, b, variance) {
        let h = row.horizon.map_or_else(|| "all".to_string(), |h| h.to_string());
        let (t, p) = match &row.test {
            Ok(t) => (format!("{:.4}", t.t), format_p(t.p)),
            Err(_) => ("NA".into(), "NA".into()),
        };
        println!("{h},{},{:.4},{:.4},{t},{p}", row.n, row.mean_a, row.mean_b);
    }
    println!();
    println!("H,planner,failures");
    for ((h, p), n) in failure_counts(&rows) {
        println!("{h},{p},{n}");
    }
    Ok(())
}

fn plot(args: PlotArgs) -> Result<()> {
    let svg = if let Some(path) = &args.results {
        let rows = read_rows(File::open(path).with_context(|| format!("opening {}", path.display()))?)?;
        cost_curve_svg(&rows)
    } else {
        let inst = load(args.instance.as_deref().expect("clap requires one of the two"))?;
        let plan = match &args.plan {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let f: PlanFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                let n = inst.num_vertices();
                ensure!(f.routes.iter().flatten().all(|v| (1..=n).contains(v)), "plan vertex out of range");
                let routes = f.routes.iter().map(|r| r.iter().map(|v| v - 1).collect()).collect();
                Some(FleetPlan::from_routes(&inst.graph, routes))
            }
            None => None,
        };
        graph_svg(&inst.graph, &inst.must_visit, plan.as_ref())
    };
    output(Some(&args.out))?.write_all(svg.as_bytes())?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
        Command::Stats(a) => stats(a),
        Command::Plot(a) => plot(a),
    }
}
