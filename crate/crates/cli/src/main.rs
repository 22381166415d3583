//! `riskplan`: plan, simulate, sweep and render risk maps for a scenario.
//!
//! Exit status is 0 on success, 1 when no path could be found and 2 on bad
//! input or I/O failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use riskaware::experiments::{
    emit_boxplot_data, emit_stats, render_figure, run_sweep_with, trials_csv, Scenario,
};
use riskaware::planner::{plan, PlannerConfig};
use riskaware::simulation::{refresh_risk, run_episode, Outcome, SimConfig};
use riskaware::smoothing::smooth_path;

#[derive(Parser)]
#[command(
    name = "riskplan",
    version,
    about = "Risk-aware RRT* planning for surface vessels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one path and export the tree lookup table, path and trajectory.
    Plan(PlanArgs),
    /// Run a replanning episode with moving obstacles (bundled crossing
    /// scenario by default).
    Simulate(SimulateArgs),
    /// Monte Carlo sweep over alpha values.
    Sweep(SweepArgs),
    /// Export the hazard field of the scenario.
    Riskmap(RiskmapArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file; the bundled reference scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seconds between periodic replans.
    #[arg(long)]
    replan_period: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated alpha values.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5, 0.7, 0.9])]
    alphas: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args)]
struct RiskmapArgs {
    #[command(flatten)]
    common: Common,
    /// Cell size in metres.
    #[arg(long, default_value_t = 1.0)]
    resolution: f64,
}

enum Status {
    Done,
    NoPath,
}

fn load(path: Option<&Path>) -> Result<Scenario> {
    load_or(path, Scenario::reference)
}

fn load_or(path: Option<&Path>, bundled: fn() -> Scenario) -> Result<Scenario> {
    match path {
        None => Ok(bundled()),
        Some(p) => Scenario::load(p).with_context(|| format!("loading scenario {}", p.display())),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn planner_config(
    base: &PlannerConfig<f64>,
    alpha: Option<f64>,
    iterations: Option<usize>,
    seed: Option<u64>,
) -> Result<PlannerConfig<f64>> {
    let cfg = PlannerConfig {
        alpha: alpha.unwrap_or(base.alpha),
        iterations: iterations.unwrap_or(base.iterations),
        seed: seed.unwrap_or(base.seed),
        ..base.clone()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_plan(args: &PlanArgs) -> Result<Status> {
    let s = load(args.common.scenario.as_deref())?;
    let cfg = planner_config(&s.planner, args.alpha, args.iterations, args.seed)?;
    let report = plan(&s.env, &s.model, &cfg, s.start, s.goal)?;
    let out = &args.common.out;
    let traj = match &report.path {
        Some(p) => Some(smooth_path(
            &p.waypoints,
            &s.env,
            s.sim.smoothing_resolution,
        )?),
        None => None,
    };
    match args.common.format {
        Format::Csv => {
            write(out, "tree.csv", &report.tree.to_csv())?;
            if let (Some(p), Some(t)) = (&report.path, &traj) {
                write(out, "path.csv", &p.to_csv())?;
                let mut csv = String::from("s,north,east\n");
                let mut acc = 0.0;
                for (i, q) in t.points.iter().enumerate() {
                    if i > 0 {
                        acc += q.distance(t.points[i - 1]);
                    }
                    csv.push_str(&format!("{:.6},{:.6},{:.6}\n", acc, q.north, q.east));
                }
                write(out, "trajectory.csv", &csv)?;
            }
        }
        Format::Svg => {
            let mut paths = Vec::new();
            if let Some(t) = &traj {
                paths.push((format!("alpha = {}", cfg.alpha), t.points.clone()));
            }
            write(
                out,
                "plan.svg",
                &render_figure(&s, None, Some(&report.tree), &paths),
            )?;
        }
    }
    let st = &report.stats;
    println!(
        "nodes {} goal_nodes {} rewires {} blocked {}",
        st.nodes, st.goal_nodes, st.rewires, st.steer_blocked
    );
    match (&report.path, &traj) {
        (Some(p), Some(t)) => {
            println!(
                "path: {} waypoints, D = {:.3} m (smoothed {:.3} m), H = {:.6e}, J = {:.6}",
                p.waypoints.len(),
                p.dist,
                t.length,
                p.hazard,
                p.cost
            );
            Ok(Status::Done)
        }
        _ => {
            println!("no path reached the goal region");
            Ok(Status::NoPath)
        }
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Status> {
    let s = load_or(args.common.scenario.as_deref(), Scenario::crossing)?;
    let cfg = planner_config(&s.planner, args.alpha, args.iterations, args.seed)?;
    let sim = SimConfig {
        replan_period: args.replan_period.unwrap_or(s.sim.replan_period),
        record_frames: args.common.format == Format::Svg,
        ..s.sim.clone()
    };
    let trace = run_episode(&s.env, &s.model, &cfg, &sim, s.start, s.goal)?;
    let out = &args.common.out;
    match args.common.format {
        Format::Csv => {
            write(out, "trace.csv", &trace.to_csv())?;
            write(out, "replans.csv", &trace.replans_csv())?;
        }
        Format::Svg => {
            for f in &trace.frames {
                write(out, &format!("frame_{:03}.svg", f.epoch), &f.svg)?;
            }
        }
    }
    println!(
        "outcome {:?} after {:.1} s, {} replans, max hazard {:.6e}, collision {}",
        trace.outcome,
        trace.duration(),
        trace.replans.len(),
        trace.max_hazard(),
        trace.any_collision()
    );
    Ok(if trace.outcome == Outcome::PlanFailed {
        Status::NoPath
    } else {
        Status::Done
    })
}

fn cmd_sweep(args: &SweepArgs) -> Result<Status> {
    let s = load(args.common.scenario.as_deref())?;
    if args.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        bail!("alpha values must lie in [0, 1]");
    }
    let cfg = planner_config(&s.planner, None, args.iterations, None)?;
    let res = run_sweep_with(&s, &cfg, &args.alphas, args.trials, args.seed)?;
    let out = &args.common.out;
    match args.common.format {
        Format::Csv => {
            write(out, "stats.csv", &emit_stats(&res.stats))?;
            write(out, "trials.csv", &trials_csv(&res.records))?;
            let (long, summary) = emit_boxplot_data(&res.records);
            write(out, "boxplot.csv", &long)?;
            write(out, "quartiles.csv", &summary)?;
        }
        Format::Svg => {
            let mut paths = Vec::new();
            for (k, &alpha) in args.alphas.iter().enumerate() {
                if let Some(r) = res.records.iter().find(|r| r.alpha_index == k && r.success) {
                    let t = smooth_path(&r.waypoints, &s.env, s.sim.smoothing_resolution)?;
                    paths.push((format!("alpha = {alpha}"), t.points));
                }
            }
            let map = refresh_risk(&s.env, &s.model, 2.0)?;
            write(
                out,
                "sweep.svg",
                &render_figure(&s, Some(&map), None, &paths),
            )?;
        }
    }
    for st in &res.stats {
        println!(
            "alpha {:.2}: D {:.3} +- {:.3}, H {:.4e} +- {:.4e}, failures {}",
            st.alpha, st.d_mean, st.d_std, st.h_mean, st.h_std, st.failures
        );
    }
    Ok(if res.stats.iter().all(|st| st.successes == 0) {
        Status::NoPath
    } else {
        Status::Done
    })
}

fn cmd_riskmap(args: &RiskmapArgs) -> Result<Status> {
    let s = load(args.common.scenario.as_deref())?;
    if !(args.resolution > 0.0) {
        bail!("resolution must be positive");
    }
    let map = refresh_risk(&s.env, &s.model, args.resolution)?;
    match args.common.format {
        Format::Csv => write(&args.common.out, "riskmap.csv", &map.to_csv())?,
        Format::Svg => write(
            &args.common.out,
            "riskmap.svg",
            &render_figure(&s, Some(&map), None, &[]),
        )?,
    }
    println!("max hazard {:.6e}", map.max_value());
    Ok(Status::Done)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Riskmap(a) => cmd_riskmap(a),
    };
    match result {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NoPath) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
