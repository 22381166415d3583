//! Scenario files, alpha sweeps and their tables and figures.
//!
//! A scenario is a JSON document:
//!
//! ```json
//! {
//!   "name": "harbour",
//!   "workspace": {"min": {"north": 0, "east": 0}, "max": {"north": 120, "east": 120}},
//!   "shoreline": [[{"north": 0, "east": 0}, {"north": 120, "east": 0}]],
//!   "depth": {"shoals": {"background": 30, "resolution": 2,
//!             "shoals": [{"center": {"north": 60, "east": 74}, "radius": 6, "min_depth": 1, "margin": 6}]}},
//!   "obstacles": [{"shape": {"type": "circle", "center": {"north": 60, "east": 52}, "radius": 12}}],
//!   "start": {"north": 10, "east": 60},
//!   "goal": {"north": 110, "east": 60},
//!   "network": "builtin",
//!   "planner": {"iterations": 3000},
//!   "sim": {"replan_period": 10}
//! }
//! ```
//!
//! `depth` is `{"uniform": d}`, `{"grid": DepthGrid}` or `{"shoals": ...}`.
//! `network` is `"builtin"` or a path to a network file, resolved relative
//! to the scenario file. `mapper`, `consequences` and `own_speed` are
//! optional.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbn::{load_network, reference_network, BbnError};
use crate::geometry::{Obstacle, Point2, Workspace};
use crate::planner::{plan, PlanError, PlannerConfig, Tree};
use crate::risk_field::{
    DepthGrid, EnvironmentState, EvidenceMapper, RiskError, RiskMap, RiskModel,
};
use crate::simulation::SimConfig;
use crate::smoothing::{smooth_path, SmoothError};
use crate::svg::{Figure, PALETTE};

/// Stride between the seed blocks of successive alphas.
pub const ALPHA_SEED_STRIDE: u64 = 1_000_003;

const REFERENCE_SCENARIO: &str = include_str!("../data/reference_scenario.json");
const CROSSING_SCENARIO: &str = include_str!("../data/crossing_scenario.json");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("network: {0}")]
    Network(#[from] BbnError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Smooth(#[from] SmoothError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error("malformed stats table at line {0}: {1}")]
    Table(usize, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shoal {
    pub center: Point2<f64>,
    /// Flat shallow core.
    pub radius: f64,
    pub min_depth: f64,
    /// Width of the smooth rise to background depth.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthSpec {
    Uniform(f64),
    Grid(DepthGrid<f64>),
    /// Deep background with smooth bowl-shaped shoals.
    Shoals {
        background: f64,
        resolution: f64,
        shoals: Vec<Shoal>,
    },
}

impl DepthSpec {
    pub fn build(&self, ws: &Workspace<f64>) -> Result<DepthGrid<f64>, ScenarioError> {
        match self {
            DepthSpec::Uniform(d) => Ok(DepthGrid::uniform(ws, *d)),
            DepthSpec::Grid(g) => Ok(g.clone()),
            DepthSpec::Shoals {
                background,
                resolution,
                shoals,
            } => {
                if !(*resolution > 0.0) {
                    return Err(ScenarioError::Invalid(
                        "depth resolution must be positive".into(),
                    ));
                }
                Ok(DepthGrid::from_fn(ws, *resolution, |q| {
                    shoals.iter().fold(*background, |acc, s| {
                        let x = ((q.distance(s.center) - s.radius).max(0.0)
                            / s.margin.max(f64::MIN_POSITIVE))
                        .min(1.0);
                        let smooth = x * x * (3.0 - 2.0 * x);
                        acc.min(s.min_depth + (background - s.min_depth) * smooth)
                    })
                }))
            }
        }
    }
}

fn default_speed() -> f64 {
    2.0
}

fn default_network() -> String {
    "builtin".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    pub workspace: Workspace<f64>,
    #[serde(default)]
    pub shoreline: Vec<Vec<Point2<f64>>>,
    pub depth: DepthSpec,
    #[serde(default)]
    pub obstacles: Vec<Obstacle<f64>>,
    pub start: Point2<f64>,
    pub goal: Point2<f64>,
    #[serde(default = "default_network")]
    pub network: String,
    #[serde(default)]
    pub mapper: Option<EvidenceMapper<f64>>,
    #[serde(default)]
    pub consequences: Option<Vec<f64>>,
    #[serde(default = "default_speed")]
    pub own_speed: f64,
    #[serde(default)]
    pub planner: PlannerConfig<f64>,
    #[serde(default)]
    pub sim: SimConfig<f64>,
}

/// A resolved, validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub env: EnvironmentState<f64>,
    pub start: Point2<f64>,
    pub goal: Point2<f64>,
    pub model: RiskModel<f64>,
    pub planner: PlannerConfig<f64>,
    pub sim: SimConfig<f64>,
}

impl Scenario {
    pub fn from_spec(spec: &ScenarioSpec, base_dir: Option<&Path>) -> Result<Self, ScenarioError> {
        spec.workspace
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let env = EnvironmentState {
            workspace: spec.workspace,
            shoreline: spec.shoreline.clone(),
            depth: spec.depth.build(&spec.workspace)?,
            obstacles: spec.obstacles.clone(),
            own_speed: spec.own_speed,
            destination: spec.goal,
        };
        env.validate()?;
        for (label, p) in [("start", spec.start), ("goal", spec.goal)] {
            if !env.in_free_space(p) {
                return Err(ScenarioError::Invalid(format!(
                    "{label} is not in free space"
                )));
            }
        }
        let net = if spec.network == "builtin" {
            reference_network()
        } else {
            let path = match base_dir {
                Some(dir) => dir.join(&spec.network),
                None => PathBuf::from(&spec.network),
            };
            let text =
                fs::read_to_string(&path).map_err(|source| ScenarioError::Io { path, source })?;
            load_network(&text)?
        };
        let mut model = RiskModel::new(net, spec.mapper.clone().unwrap_or_default())?;
        if let Some(c) = &spec.consequences {
            model.set_consequences(c)?;
        }
        spec.planner
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        spec.sim
            .validate(model.n_events())
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        Ok(Self {
            name: spec.name.clone(),
            env,
            start: spec.start,
            goal: spec.goal,
            model,
            planner: spec.planner.clone(),
            sim: spec.sim.clone(),
        })
    }

    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Self, ScenarioError> {
        let spec: ScenarioSpec = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_spec(&spec, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path.parent())
    }

    /// The bundled scenario: an island on the direct route with a shoal on
    /// its short side, a coastline to the west and one crossing vessel.
    pub fn reference() -> Self {
        Self::from_json(REFERENCE_SCENARIO, None).expect("bundled scenario is valid")
    }

    pub fn reference_spec() -> ScenarioSpec {
        serde_json::from_str(REFERENCE_SCENARIO).expect("bundled scenario is valid")
    }

    /// Open water with a vessel crossing the direct route; used for
    /// replanning episodes.
    pub fn crossing() -> Self {
        Self::from_json(CROSSING_SCENARIO, None).expect("bundled scenario is valid")
    }
}

pub fn trial_seed(base_seed: u64, trial: usize, alpha_index: usize) -> u64 {
    base_seed
        .wrapping_add(trial as u64)
        .wrapping_add(ALPHA_SEED_STRIDE.wrapping_mul(alpha_index as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub alpha: f64,
    pub alpha_index: usize,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    /// Smoothed length (raw length if the spline had to be rejected).
    pub dist: f64,
    pub dist_raw: f64,
    /// Path-wise sum of edge hazards.
    pub hazard: f64,
    /// Edge hazards averaged over the path's edges.
    pub hazard_avg: f64,
    pub cost: f64,
    pub smoothed: bool,
    pub waypoints: Vec<Point2<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub alpha: f64,
    pub n_trials: usize,
    pub successes: usize,
    pub failures: usize,
    pub d_mean: f64,
    pub d_std: f64,
    pub h_mean: f64,
    pub h_std: f64,
    pub h_max: f64,
}

/// One row of the stats table as emitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsRow {
    pub alpha: f64,
    pub d_mean: f64,
    pub d_std: f64,
    pub h_mean: f64,
    pub h_std: f64,
    pub h_max: f64,
    pub failures: usize,
}

impl TrialStats {
    pub fn row(&self) -> StatsRow {
        StatsRow {
            alpha: self.alpha,
            d_mean: self.d_mean,
            d_std: self.d_std,
            h_mean: self.h_mean,
            h_std: self.h_std,
            h_max: self.h_max,
            failures: self.failures,
        }
    }

    /// Standard errors of the two means.
    pub fn standard_errors(&self) -> (f64, f64) {
        let n = self.successes.max(1) as f64;
        (self.d_std / n.sqrt(), self.h_std / n.sqrt())
    }
}

/// Mean and sample standard deviation (`n - 1`); a single value has zero
/// deviation and an empty slice gives NaN. Values are summed in sorted order
/// so the result does not depend on the order they arrive in.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Statistics over the successful records of one alpha.
pub fn aggregate(alpha: f64, records: &[TrialRecord]) -> TrialStats {
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.success).collect();
    let d: Vec<f64> = ok.iter().map(|r| r.dist).collect();
    let h: Vec<f64> = ok.iter().map(|r| r.hazard).collect();
    let (d_mean, d_std) = mean_std(&d);
    let (h_mean, h_std) = mean_std(&h);
    TrialStats {
        alpha,
        n_trials: records.len(),
        successes: ok.len(),
        failures: records.len() - ok.len(),
        d_mean,
        d_std,
        h_mean,
        h_std,
        h_max: h.iter().copied().fold(f64::NAN, f64::max),
    }
}

/// Plans once at `alpha` and smooths the result.
pub fn run_trial(
    scenario: &Scenario,
    config: &PlannerConfig<f64>,
    alpha: f64,
    alpha_index: usize,
    trial: usize,
    base_seed: u64,
) -> Result<TrialRecord, ExperimentError> {
    let seed = trial_seed(base_seed, trial, alpha_index);
    let cfg = PlannerConfig {
        alpha,
        seed,
        ..config.clone()
    };
    let report = plan(
        &scenario.env,
        &scenario.model,
        &cfg,
        scenario.start,
        scenario.goal,
    )?;
    let mut rec = TrialRecord {
        alpha,
        alpha_index,
        trial,
        seed,
        success: false,
        dist: f64::NAN,
        dist_raw: f64::NAN,
        hazard: f64::NAN,
        hazard_avg: f64::NAN,
        cost: f64::NAN,
        smoothed: false,
        waypoints: Vec::new(),
    };
    let Some(path) = report.path else {
        return Ok(rec);
    };
    let traj = smooth_path(
        &path.waypoints,
        &scenario.env,
        scenario.sim.smoothing_resolution,
    )?;
    rec.success = true;
    rec.dist = traj.length;
    rec.dist_raw = path.dist;
    rec.hazard = path.hazard;
    rec.hazard_avg = path.hazard_average();
    rec.cost = path.cost;
    rec.smoothed = traj.is_smoothed();
    rec.waypoints = path.waypoints;
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Ordered by alpha index, then trial.
    pub records: Vec<TrialRecord>,
    pub stats: Vec<TrialStats>,
}

/// Runs `trials` seeded plans per alpha in parallel with the scenario's
/// planner settings.
pub fn run_sweep(
    scenario: &Scenario,
    alphas: &[f64],
    trials: usize,
    base_seed: u64,
) -> Result<SweepResult, ExperimentError> {
    run_sweep_with(scenario, &scenario.planner, alphas, trials, base_seed)
}

pub fn run_sweep_with(
    scenario: &Scenario,
    config: &PlannerConfig<f64>,
    alphas: &[f64],
    trials: usize,
    base_seed: u64,
) -> Result<SweepResult, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::Invalid("trials must be at least 1".into()));
    }
    if alphas.is_empty() {
        return Err(ExperimentError::Invalid("no alpha values".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|a| (0..trials).map(move |t| (a, t)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(a, t)| run_trial(scenario, config, alphas[a], a, t, base_seed))
        .collect::<Result<Vec<_>, _>>()?;
    let stats = alphas
        .iter()
        .enumerate()
        .map(|(a, &alpha)| aggregate(alpha, &records[a * trials..(a + 1) * trials]))
        .collect();
    Ok(SweepResult { records, stats })
}

fn sci(x: f64) -> String {
    format!("{x:e}")
}

pub const STATS_HEADER: &str = "alpha,D_mean,D_std,H_mean,H_std,H_max,failures";

/// Stats table in fixed scientific notation.
pub fn emit_stats(stats: &[TrialStats]) -> String {
    let mut out = format!("{STATS_HEADER}\n");
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            sci(s.alpha),
            sci(s.d_mean),
            sci(s.d_std),
            sci(s.h_mean),
            sci(s.h_std),
            sci(s.h_max),
            s.failures
        ));
    }
    out
}

pub fn parse_stats(text: &str) -> Result<Vec<StatsRow>, ExperimentError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == STATS_HEADER => {}
        _ => return Err(ExperimentError::Table(1, "unexpected header".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(ExperimentError::Table(
                i + 1,
                format!("expected 7 fields, got {}", f.len()),
            ));
        }
        let num = |k: usize| {
            f[k].parse::<f64>()
                .map_err(|e| ExperimentError::Table(i + 1, e.to_string()))
        };
        rows.push(StatsRow {
            alpha: num(0)?,
            d_mean: num(1)?,
            d_std: num(2)?,
            h_mean: num(3)?,
            h_std: num(4)?,
            h_max: num(5)?,
            failures: f[6].parse().map_err(|e: std::num::ParseIntError| {
                ExperimentError::Table(i + 1, e.to_string())
            })?,
        });
    }
    Ok(rows)
}

/// Every trial, failures included: `alpha,trial,seed,success,D,D_raw,H,H_avg,J`.
pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("alpha,trial,seed,success,D,D_raw,H,H_avg,J\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            sci(r.alpha),
            r.trial,
            r.seed,
            u8::from(r.success),
            sci(r.dist),
            sci(r.dist_raw),
            sci(r.hazard),
            sci(r.hazard_avg),
            sci(r.cost)
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data (position `q * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn quartiles(values: &[f64]) -> Quartiles {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Quartiles {
        min: quantile_sorted(&v, 0.0),
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: quantile_sorted(&v, 1.0),
    }
}

/// Long-format box-plot rows `alpha,trial,D,H,H_avg` over successful
/// trials, and quartiles `alpha,metric,min,q1,median,q3,max` per alpha.
type Metric = (&'static str, fn(&TrialRecord) -> f64);

pub fn emit_boxplot_data(records: &[TrialRecord]) -> (String, String) {
    let mut long = String::from("alpha,trial,D,H,H_avg\n");
    let mut alphas: Vec<f64> = Vec::new();
    for r in records.iter().filter(|r| r.success) {
        long.push_str(&format!(
            "{},{},{},{},{}\n",
            sci(r.alpha),
            r.trial,
            sci(r.dist),
            sci(r.hazard),
            sci(r.hazard_avg)
        ));
        if !alphas.contains(&r.alpha) {
            alphas.push(r.alpha);
        }
    }
    let mut summary = String::from("alpha,metric,min,q1,median,q3,max\n");
    for a in alphas {
        let group: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.success && r.alpha == a)
            .collect();
        let metrics: [Metric; 3] = [
            ("D", |r| r.dist),
            ("H", |r| r.hazard),
            ("H_avg", |r| r.hazard_avg),
        ];
        for (name, get) in metrics {
            let vals: Vec<f64> = group.iter().map(|r| get(r)).collect();
            let q = quartiles(&vals);
            summary.push_str(&format!(
                "{},{name},{},{},{},{},{}\n",
                sci(a),
                sci(q.min),
                sci(q.q1),
                sci(q.median),
                sci(q.q3),
                sci(q.max)
            ));
        }
    }
    (long, summary)
}

/// Overlay of the scenario, an optional risk map and tree, and labelled
/// paths in palette order.
pub fn render_figure(
    scenario: &Scenario,
    risk_map: Option<&RiskMap<f64>>,
    tree: Option<&Tree<f64>>,
    paths: &[(String, Vec<Point2<f64>>)],
) -> String {
    let mut fig = Figure::new(&scenario.env.workspace, 5.0);
    if let Some(m) = risk_map {
        fig.risk_map(m);
    }
    fig.shoreline(&scenario.env.shoreline);
    if let Some(t) = tree {
        fig.tree(t);
    }
    fig.obstacles(&scenario.env.obstacles);
    for (i, (label, pts)) in paths.iter().enumerate() {
        fig.path(pts, PALETTE[i % PALETTE.len()], label);
    }
    fig.marker(scenario.start, "#000000")
        .marker(scenario.goal, "#2ca02c");
    if !scenario.name.is_empty() {
        fig.title(&scenario.name);
    }
    fig.finish()
}
