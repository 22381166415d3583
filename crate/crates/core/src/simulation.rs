//! Episode loop with moving obstacles and periodic replanning.
//!
//! Each step advances dynamic obstacles at constant velocity, moves the
//! vessel along its smoothed path and records the hazard at the vessel.
//! The active plan's tree is re-checked against the moved obstacles every
//! step; if an edge still ahead of the vessel is pruned, or the path ahead
//! collides, a replan happens at once. Otherwise a fresh plan is made
//! every `replan_period` seconds. Epoch `k` plans with seed `base + k`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{segment_clear, Obstacle, Point2, Segment};
use crate::planner::{plan, PlanContext, PlanError, PlannerConfig, Tree};
use crate::risk_field::{EnvironmentState, RiskError, RiskMap, RiskModel};
use crate::smoothing::{smooth_path, SmoothError};
use crate::svg::Figure;
use crate::Real;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Smooth(#[from] SmoothError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SimConfig<T> {
    pub dt: T,
    pub replan_period: T,
    pub horizon: T,
    pub vessel_speed: T,
    /// Edges whose hazard exceeds this are invalidated.
    pub hazard_threshold: T,
    pub smoothing_resolution: T,
    /// Risk map resolution for frames.
    pub risk_map_resolution: T,
    pub record_frames: bool,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::one(),
            replan_period: T::lit(10.0),
            horizon: T::lit(300.0),
            vessel_speed: T::lit(2.0),
            hazard_threshold: T::lit(0.5),
            smoothing_resolution: T::lit(0.5),
            risk_map_resolution: T::lit(2.0),
            record_frames: false,
        }
    }
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self, n_events: usize) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.dt > T::zero()) {
            return bad("dt must be positive");
        }
        if !(self.replan_period >= self.dt) {
            return bad("replan period must be at least dt");
        }
        if !(self.horizon > T::zero()) {
            return bad("horizon must be positive");
        }
        if !(self.vessel_speed > T::zero()) {
            return bad("vessel speed must be positive");
        }
        let ceiling = T::from_usize_lossy(n_events);
        if !(self.hazard_threshold > T::zero() && self.hazard_threshold <= ceiling) {
            return bad("hazard threshold must lie in (0, n_R]");
        }
        if !(self.smoothing_resolution > T::zero()) || !(self.risk_map_resolution > T::zero()) {
            return bad("resolutions must be positive");
        }
        Ok(())
    }

    fn period_steps(&self) -> usize {
        (self.replan_period / self.dt)
            .round()
            .to_usize()
            .unwrap_or(1)
            .max(1)
    }
}

/// Advances dynamic obstacles by `velocity * dt`. An obstacle whose centre
/// would leave the workspace is clamped to the boundary and stopped.
pub fn step_obstacles<T: Real>(env: &mut EnvironmentState<T>, dt: T) {
    let ws = env.workspace;
    for ob in env.obstacles.iter_mut().filter(|o| o.is_dynamic()) {
        let offset = ob.velocity * dt;
        let target = ob.center() + offset;
        if ws.contains(target) {
            ob.translate(offset);
        } else {
            let clamped = ws.clamp(target);
            let shift = clamped - ob.center();
            ob.translate(shift);
            ob.velocity = Point2::origin();
        }
    }
}

/// Hazard snapshot of the current environment.
pub fn refresh_risk<T: Real>(
    env: &EnvironmentState<T>,
    model: &RiskModel<T>,
    resolution: T,
) -> Result<RiskMap<T>, RiskError> {
    let ceiling = T::from_usize_lossy(model.n_events());
    RiskMap::from_field(&env.workspace, resolution, ceiling, |p| {
        model.hazard_at(p, env)
    })
}

/// Result of pruning a tree against a changed environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Invalidation {
    /// Old id to new id; `None` for removed nodes.
    pub remap: Vec<Option<usize>>,
    pub removed: usize,
}

/// Removes edges that now collide or whose refreshed hazard exceeds
/// `threshold`, with their subtrees. Surviving edges take refreshed
/// hazards and all accumulations are recomputed.
pub fn invalidate_edges<T: Real>(
    tree: &mut Tree<T>,
    env: &EnvironmentState<T>,
    model: &RiskModel<T>,
    config: &PlannerConfig<T>,
    threshold: T,
) -> Result<Invalidation, PlanError> {
    let ctx = PlanContext::new(env, model, config);
    let before = tree.len();
    let remap = tree.prune(|a, b| -> Result<_, PlanError> {
        if !ctx.clear(a, b)? {
            return Ok(None);
        }
        let h = ctx.hazard(a, b)?;
        if h > threshold {
            return Ok(None);
        }
        Ok(Some((a.distance(b), h)))
    })?;
    Ok(Invalidation {
        removed: before - tree.len(),
        remap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanCause {
    Initial,
    Periodic,
    Invalidated,
}

impl ReplanCause {
    pub fn label(&self) -> &'static str {
        match self {
            ReplanCause::Initial => "initial",
            ReplanCause::Periodic => "periodic",
            ReplanCause::Invalidated => "invalidated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ReachedGoal,
    Horizon,
    PlanFailed,
    Collision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T> {
    pub step: usize,
    pub time: T,
    pub vessel: Point2<T>,
    pub obstacles: Vec<Point2<T>>,
    pub hazard: T,
    pub epoch: usize,
    pub in_collision: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplanRecord<T> {
    pub step: usize,
    pub time: T,
    pub epoch: usize,
    pub cause: ReplanCause,
    pub seed: u64,
    pub iterations: usize,
    pub retried: bool,
    pub success: bool,
    pub waypoints: Vec<Point2<T>>,
    pub trajectory: Vec<Point2<T>>,
    pub smoothed: bool,
    pub dist: T,
    pub hazard: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T> {
    pub time: T,
    pub epoch: usize,
    pub svg: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace<T> {
    pub steps: Vec<StepRecord<T>>,
    pub replans: Vec<ReplanRecord<T>>,
    pub frames: Vec<Frame<T>>,
    pub outcome: Outcome,
    /// Edges removed by per-step invalidation, summed.
    pub pruned_edges: usize,
}

impl<T: Real> SimTrace<T> {
    pub fn max_hazard(&self) -> T {
        self.steps
            .iter()
            .map(|s| s.hazard)
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn any_collision(&self) -> bool {
        self.steps.iter().any(|s| s.in_collision)
    }

    pub fn duration(&self) -> T {
        self.steps.last().map(|s| s.time).unwrap_or_else(T::zero)
    }

    /// Per-step CSV; obstacle centres follow as `obsK_north,obsK_east`.
    pub fn to_csv(&self) -> String {
        let n_obs = self.steps.first().map(|s| s.obstacles.len()).unwrap_or(0);
        let mut out = String::from("step,time,north,east,hazard,epoch,in_collision");
        for k in 0..n_obs {
            out.push_str(&format!(",obs{k}_north,obs{k}_east"));
        }
        out.push('\n');
        for s in &self.steps {
            out.push_str(&format!(
                "{},{:.3},{:.6},{:.6},{:.6e},{},{}",
                s.step,
                s.time.as_f64(),
                s.vessel.north.as_f64(),
                s.vessel.east.as_f64(),
                s.hazard.as_f64(),
                s.epoch,
                u8::from(s.in_collision)
            ));
            for o in &s.obstacles {
                out.push_str(&format!(",{:.6},{:.6}", o.north.as_f64(), o.east.as_f64()));
            }
            out.push('\n');
        }
        out
    }

    /// Replan CSV `time,epoch,cause,seed,iterations,retried,success,waypoints,D,H`.
    pub fn replans_csv(&self) -> String {
        let mut out =
            String::from("time,epoch,cause,seed,iterations,retried,success,waypoints,D,H\n");
        for r in &self.replans {
            out.push_str(&format!(
                "{:.3},{},{},{},{},{},{},{},{:.6e},{:.6e}\n",
                r.time.as_f64(),
                r.epoch,
                r.cause.label(),
                r.seed,
                r.iterations,
                u8::from(r.retried),
                u8::from(r.success),
                r.waypoints.len(),
                r.dist.as_f64(),
                r.hazard.as_f64()
            ));
        }
        out
    }
}

/// Constant-speed motion along a polyline.
struct Follower<T> {
    points: Vec<Point2<T>>,
    leg: usize,
    along: T,
}

impl<T: Real> Follower<T> {
    fn new(points: Vec<Point2<T>>) -> Self {
        Self {
            points,
            leg: 0,
            along: T::zero(),
        }
    }

    fn position(&self) -> Point2<T> {
        if self.leg + 1 >= self.points.len() {
            return *self.points.last().expect("non-empty trajectory");
        }
        let s = Segment::new(self.points[self.leg], self.points[self.leg + 1]);
        let len = s.length();
        if len > T::zero() {
            s.point_at(self.along / len)
        } else {
            s.a
        }
    }

    fn advance(&mut self, mut ds: T) -> Point2<T> {
        while self.leg + 1 < self.points.len() {
            let len = self.points[self.leg].distance(self.points[self.leg + 1]);
            let rest = len - self.along;
            if ds < rest {
                self.along = self.along + ds;
                break;
            }
            ds = ds - rest;
            self.leg += 1;
            self.along = T::zero();
        }
        self.position()
    }

    /// Remaining geometry from the current position on.
    fn ahead(&self) -> Vec<Point2<T>> {
        let mut pts = vec![self.position()];
        pts.extend(self.points.iter().skip(self.leg + 1).copied());
        pts
    }
}

struct ActivePlan<T> {
    tree: Tree<T>,
    node_ids: Vec<usize>,
    waypoints: Vec<Point2<T>>,
    follower: Follower<T>,
}

impl<T: Real> ActivePlan<T> {
    /// First waypoint index not yet passed, judged by the nearest waypoint.
    fn next_waypoint(&self, vessel: Point2<T>) -> usize {
        let mut best = 0;
        let mut bd = T::infinity();
        for (i, w) in self.waypoints.iter().enumerate() {
            let d = w.distance(vessel);
            if d < bd {
                bd = d;
                best = i;
            }
        }
        best + 1
    }
}

fn in_collision<T: Real>(p: Point2<T>, obstacles: &[Obstacle<T>]) -> bool {
    obstacles.iter().any(|o| o.contains(p))
}

struct Episode<'a, T> {
    env: EnvironmentState<T>,
    model: &'a RiskModel<T>,
    planner: &'a PlannerConfig<T>,
    sim: &'a SimConfig<T>,
    goal: Point2<T>,
    trace: SimTrace<T>,
    epoch: usize,
}

impl<'a, T: Real> Episode<'a, T> {
    fn replan(
        &mut self,
        step: usize,
        from: Point2<T>,
        cause: ReplanCause,
    ) -> Result<Option<ActivePlan<T>>, SimError> {
        let epoch = self.epoch;
        self.epoch += 1;
        let seed = self.planner.seed.wrapping_add(epoch as u64);
        let mut config = PlannerConfig {
            seed,
            ..self.planner.clone()
        };
        let time = T::from_usize_lossy(step) * self.sim.dt;
        let mut record = ReplanRecord {
            step,
            time,
            epoch,
            cause,
            seed,
            iterations: config.iterations,
            retried: false,
            success: false,
            waypoints: Vec::new(),
            trajectory: Vec::new(),
            smoothed: false,
            dist: T::zero(),
            hazard: T::zero(),
        };
        let mut report = match plan(&self.env, self.model, &config, from, self.goal) {
            Ok(r) => r,
            Err(PlanError::StartBlocked(..)) | Err(PlanError::GoalBlocked(..)) => {
                self.trace.replans.push(record);
                return Ok(None);
            }
            Err(e) => return Err(e.into()),
        };
        if report.path.is_none() {
            config.iterations *= 2;
            record.retried = true;
            record.iterations = config.iterations;
            report = plan(&self.env, self.model, &config, from, self.goal)?;
        }
        let Some(path) = report.path else {
            self.trace.replans.push(record);
            return Ok(None);
        };
        let traj = smooth_path(&path.waypoints, &self.env, self.sim.smoothing_resolution)?;
        record.success = true;
        record.waypoints = path.waypoints.clone();
        record.trajectory = traj.points.clone();
        record.smoothed = traj.is_smoothed();
        record.dist = path.dist;
        record.hazard = path.hazard;
        if self.sim.record_frames {
            let map = refresh_risk(&self.env, self.model, self.sim.risk_map_resolution)?;
            let mut fig = Figure::new(&self.env.workspace, 4.0);
            fig.risk_map(&map)
                .shoreline(&self.env.shoreline)
                .obstacles(&self.env.obstacles)
                .tree(&report.tree)
                .path(
                    &traj.points,
                    "#1f77b4",
                    &format!("epoch {epoch} ({})", cause.label()),
                )
                .marker(from, "#000000")
                .marker(self.goal, "#2ca02c")
                .title(&format!("t = {:.1} s", time.as_f64()));
            self.trace.frames.push(Frame {
                time,
                epoch,
                svg: fig.finish(),
            });
        }
        self.trace.replans.push(record);
        let points = if traj.points.len() >= 2 {
            traj.points
        } else {
            path.waypoints.clone()
        };
        Ok(Some(ActivePlan {
            tree: report.tree,
            node_ids: path.node_ids,
            waypoints: path.waypoints,
            follower: Follower::new(points),
        }))
    }

    fn record(&mut self, step: usize, vessel: Point2<T>) -> Result<bool, SimError> {
        let hazard = self.model.hazard_at(vessel, &self.env)?;
        let hit = in_collision(vessel, &self.env.obstacles);
        self.trace.steps.push(StepRecord {
            step,
            time: T::from_usize_lossy(step) * self.sim.dt,
            vessel,
            obstacles: self.env.obstacles.iter().map(|o| o.center()).collect(),
            hazard,
            epoch: self.epoch.saturating_sub(1),
            in_collision: hit,
        });
        Ok(hit)
    }

    /// Whether the active plan must be replaced now.
    fn invalidated(
        &mut self,
        active: &mut ActivePlan<T>,
        vessel: Point2<T>,
    ) -> Result<bool, SimError> {
        let next = active.next_waypoint(vessel);
        let inv = invalidate_edges(
            &mut active.tree,
            &self.env,
            self.model,
            self.planner,
            self.sim.hazard_threshold,
        )?;
        self.trace.pruned_edges += inv.removed;
        let mut broken = false;
        for (k, id) in active.node_ids.iter_mut().enumerate() {
            match inv.remap[*id] {
                Some(new) => *id = new,
                None => broken |= k >= next,
            }
        }
        if broken {
            return Ok(true);
        }
        let ahead = active.follower.ahead();
        for w in ahead.windows(2) {
            if !segment_clear(
                &Segment::new(w[0], w[1]),
                &self.env.obstacles,
                self.planner.collision_resolution,
            )
            .map_err(PlanError::from)?
            {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Runs one episode from `start` towards `goal`.
pub fn run_episode<T: Real>(
    env: &EnvironmentState<T>,
    model: &RiskModel<T>,
    planner: &PlannerConfig<T>,
    sim: &SimConfig<T>,
    start: Point2<T>,
    goal: Point2<T>,
) -> Result<SimTrace<T>, SimError> {
    sim.validate(model.n_events())?;
    planner.validate()?;
    let mut env = env.clone();
    env.destination = goal;
    env.own_speed = sim.vessel_speed;
    let mut ep = Episode {
        env,
        model,
        planner,
        sim,
        goal,
        trace: SimTrace {
            steps: Vec::new(),
            replans: Vec::new(),
            frames: Vec::new(),
            outcome: Outcome::Horizon,
            pruned_edges: 0,
        },
        epoch: 0,
    };
    let mut vessel = start;
    let Some(mut active) = ep.replan(0, vessel, ReplanCause::Initial)? else {
        ep.record(0, vessel)?;
        ep.trace.outcome = Outcome::PlanFailed;
        return Ok(ep.trace);
    };
    if ep.record(0, vessel)? {
        ep.trace.outcome = Outcome::Collision;
        return Ok(ep.trace);
    }
    if vessel.distance(goal) <= planner.goal_radius {
        ep.trace.outcome = Outcome::ReachedGoal;
        return Ok(ep.trace);
    }
    let period = sim.period_steps();
    let max_steps = (sim.horizon / sim.dt).floor().to_usize().unwrap_or(0);
    for step in 1..=max_steps {
        step_obstacles(&mut ep.env, sim.dt);
        vessel = active.follower.advance(sim.vessel_speed * sim.dt);
        if ep.record(step, vessel)? {
            ep.trace.outcome = Outcome::Collision;
            return Ok(ep.trace);
        }
        if vessel.distance(goal) <= planner.goal_radius {
            ep.trace.outcome = Outcome::ReachedGoal;
            return Ok(ep.trace);
        }
        let cause = if ep.invalidated(&mut active, vessel)? {
            Some(ReplanCause::Invalidated)
        } else if step % period == 0 {
            Some(ReplanCause::Periodic)
        } else {
            None
        };
        if let Some(cause) = cause {
            match ep.replan(step, vessel, cause)? {
                Some(a) => active = a,
                None => {
                    ep.trace.outcome = Outcome::PlanFailed;
                    return Ok(ep.trace);
                }
            }
        }
    }
    ep.trace.outcome = Outcome::Horizon;
    Ok(ep.trace)
}

#[cfg(test)]
mod tests;
