//! Risk-aware RRT*.
//!
//! Each node carries its accumulated path length `D`, accumulated edge
//! hazard `B` and the blended cost `J = alpha * D + (1 - alpha) * beta * B`.
//! Parent choice and rewiring minimize `J`; the returned path is the
//! minimum-`J` node inside the goal disk. With `alpha = 1` the hazard never
//! enters a comparison and risk-biased sampling is off, so the run is the
//! same as a distance-only RRT* with the same seed.

mod tree;


pub use tree::{AuditError, CostWeights, EdgeCost, Tree, TreeNode};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{segment_clear, GeometryError, Point2, Segment, Workspace};
use crate::risk_field::{EnvironmentState, RiskError, RiskMap, RiskModel};
use crate::Real;

/// Upper bound on draws for one risk-biased sample; the last draw is used
/// if none is accepted.
pub const MAX_REJECTION_ATTEMPTS: usize = 64;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid planner configuration: {0}")]
    Config(String),
    #[error("start ({0}, {1}) is not in free space")]
    StartBlocked(f64, f64),
    #[error("goal ({0}, {1}) is not in free space")]
    GoalBlocked(f64, f64),
    #[error("steer called with coincident points")]
    DegenerateSteer,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Risk(#[from] RiskError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborRadius<T> {
    /// `min(gamma * sqrt(ln n / n), 4 * step)`; `gamma` defaults to
    /// `2 * sqrt(1.5) * sqrt(area / pi)`.
    Adaptive {
        gamma: Option<T>,
    },
    Fixed(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskEvaluation {
    #[default]
    Enabled,
    /// Edge hazards are never computed and stored as zero.
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct PlannerConfig<T> {
    pub alpha: T,
    /// `None` selects `workspace diagonal / n_R`.
    pub beta: Option<T>,
    pub step: T,
    pub neighbor_radius: NeighborRadius<T>,
    pub goal_bias: T,
    pub risk_bias: T,
    pub iterations: usize,
    pub goal_radius: T,
    pub seed: u64,
    pub collision_resolution: T,
    pub hazard_spacing: T,
    pub risk_map_resolution: T,
    pub risk: RiskEvaluation,
}

impl<T: Real> Default for PlannerConfig<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(0.5),
            beta: None,
            step: T::lit(5.0),
            neighbor_radius: NeighborRadius::Adaptive { gamma: None },
            goal_bias: T::lit(0.05),
            risk_bias: T::lit(0.3),
            iterations: 3000,
            goal_radius: T::lit(3.0),
            seed: 0,
            collision_resolution: T::lit(0.25),
            hazard_spacing: T::lit(1.0),
            risk_map_resolution: T::lit(2.0),
            risk: RiskEvaluation::Enabled,
        }
    }
}

impl<T: Real> PlannerConfig<T> {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::Config(m.to_string()));
        let unit = |x: T| x >= T::zero() && x <= T::one();
        if !unit(self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if let Some(b) = self.beta {
            if !(b > T::zero()) || !b.is_finite() {
                return bad("beta must be positive");
            }
        }
        if !(self.step > T::zero()) || !self.step.is_finite() {
            return bad("step must be positive");
        }
        match self.neighbor_radius {
            NeighborRadius::Fixed(r) if !(r > T::zero()) => {
                return bad("neighbor radius must be positive")
            }
            NeighborRadius::Adaptive { gamma: Some(g) } if !(g > T::zero()) => {
                return bad("gamma must be positive")
            }
            _ => {}
        }
        if !unit(self.goal_bias) || !unit(self.risk_bias) || !unit(self.goal_bias + self.risk_bias)
        {
            return bad("goal_bias, risk_bias and their sum must lie in [0, 1]");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(self.goal_radius > T::zero()) {
            return bad("goal radius must be positive");
        }
        if !(self.collision_resolution > T::zero()) {
            return bad("collision resolution must be positive");
        }
        if !(self.hazard_spacing > T::zero()) {
            return bad("hazard spacing must be positive");
        }
        if !(self.risk_map_resolution > T::zero()) {
            return bad("risk map resolution must be positive");
        }
        Ok(())
    }

    pub fn resolved_beta(&self, ws: &Workspace<T>, n_events: usize) -> T {
        self.beta
            .unwrap_or_else(|| ws.diagonal() / T::from_usize_lossy(n_events.max(1)))
    }

    /// Whether hazard enters costs or sampling at all.
    pub fn risk_active(&self) -> bool {
        self.risk == RiskEvaluation::Enabled && self.alpha < T::one()
    }

    /// Neighbor radius for a tree about to hold `n` nodes.
    pub fn radius(&self, ws: &Workspace<T>, n: usize) -> T {
        match self.neighbor_radius {
            NeighborRadius::Fixed(r) => r,
            NeighborRadius::Adaptive { gamma } => {
                let gamma = gamma.unwrap_or_else(|| {
                    T::lit(2.0)
                        * T::lit(1.5).sqrt()
                        * (ws.area() / T::lit(std::f64::consts::PI)).sqrt()
                });
                let n = T::from_usize_lossy(n.max(2));
                let r = gamma * (n.ln() / n).sqrt();
                r.min(T::lit(4.0) * self.step)
            }
        }
    }
}

/// Source of planner samples.
#[derive(Debug, Clone, Copy)]
pub struct Sampler<'a, T> {
    pub workspace: Workspace<T>,
    pub goal: Point2<T>,
    pub goal_radius: T,
    pub goal_bias: T,
    /// Map and probability for risk-biased rejection sampling.
    pub risk: Option<(&'a RiskMap<T>, T)>,
}

impl<'a, T: Real> Sampler<'a, T> {
    pub fn new(
        config: &PlannerConfig<T>,
        workspace: Workspace<T>,
        goal: Point2<T>,
        risk_map: Option<&'a RiskMap<T>>,
    ) -> Self {
        Self {
            workspace,
            goal,
            goal_radius: config.goal_radius,
            goal_bias: config.goal_bias,
            risk: risk_map
                .filter(|_| config.risk_bias > T::zero())
                .map(|m| (m, config.risk_bias)),
        }
    }

    fn unit<R: Rng>(rng: &mut R) -> T {
        T::lit(rng.gen::<f64>())
    }

    fn uniform<R: Rng>(&self, rng: &mut R) -> Point2<T> {
        let ext = self.workspace.extent();
        Point2::new(
            self.workspace.min.north + ext.north * Self::unit(rng),
            self.workspace.min.east + ext.east * Self::unit(rng),
        )
    }

    fn in_goal<R: Rng>(&self, rng: &mut R) -> Point2<T> {
        let r = self.goal_radius * Self::unit(rng).sqrt();
        let theta = T::lit(std::f64::consts::TAU) * Self::unit(rng);
        let p = self.goal + Point2::new(r * theta.cos(), r * theta.sin());
        self.workspace.clamp(p)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Point2<T> {
        let u = Self::unit(rng);
        if u < self.goal_bias {
            return self.in_goal(rng);
        }
        if let Some((map, bias)) = self.risk {
            if u < self.goal_bias + bias {
                let mut p = self.uniform(rng);
                for _ in 0..MAX_REJECTION_ATTEMPTS {
                    let accept = T::one() - map.value_at(p) / map.ceiling;
                    if Self::unit(rng) < accept {
                        return p;
                    }
                    p = self.uniform(rng);
                }
                return p;
            }
        }
        self.uniform(rng)
    }
}

/// Sample from `config`'s goal, risk and uniform mixture.
pub fn sample<T: Real, R: Rng>(
    config: &PlannerConfig<T>,
    workspace: &Workspace<T>,
    goal: Point2<T>,
    risk_map: Option<&RiskMap<T>>,
    rng: &mut R,
) -> Point2<T> {
    Sampler::new(config, *workspace, goal, risk_map).sample(rng)
}

pub fn steer<T: Real>(from: Point2<T>, to: Point2<T>, step: T) -> Result<Point2<T>, PlanError> {
    let d = from.distance(to);
    if d == T::zero() {
        return Err(PlanError::DegenerateSteer);
    }
    if d <= step {
        Ok(to)
    } else {
        Ok(from + (to - from) * (step / d))
    }
}

/// Read-only planning context shared by all steps of one run.
pub struct PlanContext<'a, T> {
    pub env: &'a EnvironmentState<T>,
    pub model: &'a RiskModel<T>,
    pub config: &'a PlannerConfig<T>,
    pub weights: CostWeights<T>,
}

impl<'a, T: Real> PlanContext<'a, T> {
    pub fn new(
        env: &'a EnvironmentState<T>,
        model: &'a RiskModel<T>,
        config: &'a PlannerConfig<T>,
    ) -> Self {
        let beta = config.resolved_beta(&env.workspace, model.n_events());
        Self {
            env,
            model,
            config,
            weights: CostWeights {
                alpha: config.alpha,
                beta,
            },
        }
    }

    pub fn clear(&self, from: Point2<T>, to: Point2<T>) -> Result<bool, PlanError> {
        Ok(segment_clear(
            &Segment::new(from, to),
            &self.env.obstacles,
            self.config.collision_resolution,
        )?)
    }

    pub fn hazard(&self, from: Point2<T>, to: Point2<T>) -> Result<T, PlanError> {
        match self.config.risk {
            RiskEvaluation::Disabled => Ok(T::zero()),
            RiskEvaluation::Enabled => Ok(self.model.edge_hazard(
                &Segment::new(from, to),
                self.env,
                self.config.hazard_spacing,
            )?),
        }
    }

    pub fn edge(&self, from: Point2<T>, to: Point2<T>) -> Result<EdgeCost<T>, PlanError> {
        Ok(self.weights.edge(from.distance(to), self.hazard(from, to)?))
    }
}

/// `(dD, dB, dJ)` for connecting `child` below `parent`.
pub fn edge_cost<T: Real>(
    parent: &TreeNode<T>,
    child: Point2<T>,
    ctx: &PlanContext<'_, T>,
) -> Result<EdgeCost<T>, PlanError> {
    ctx.edge(parent.state, child)
}

enum Candidate<T> {
    Blocked,
    /// Collision-free with `(dist, hazard if evaluated)`.
    Clear(T, Option<T>),
}

/// Per-neighbor edge evaluations for one new node, shared by parent
/// selection and rewiring.
pub struct Neighborhood<T> {
    pub ids: Vec<usize>,
    candidates: Vec<Candidate<T>>,
}

impl<T: Real> Neighborhood<T> {
    pub fn evaluate(
        tree: &Tree<T>,
        x_new: Point2<T>,
        ids: Vec<usize>,
        ctx: &PlanContext<'_, T>,
    ) -> Result<Self, PlanError> {
        let eager = ctx.weights.uses_hazard() && ctx.config.risk == RiskEvaluation::Enabled;
        let mut candidates = Vec::with_capacity(ids.len());
        for &i in &ids {
            let s = tree.node(i).state;
            if !ctx.clear(s, x_new)? {
                candidates.push(Candidate::Blocked);
                continue;
            }
            let h = if eager {
                Some(ctx.hazard(s, x_new)?)
            } else {
                None
            };
            candidates.push(Candidate::Clear(s.distance(x_new), h));
        }
        Ok(Self { ids, candidates })
    }

    /// Edge cost with hazard evaluated now if it was deferred.
    fn edge_at(
        &mut self,
        k: usize,
        tree: &Tree<T>,
        x_new: Point2<T>,
        ctx: &PlanContext<'_, T>,
    ) -> Result<Option<EdgeCost<T>>, PlanError> {
        match &mut self.candidates[k] {
            Candidate::Blocked => Ok(None),
            Candidate::Clear(d, h) => {
                let hazard = match h {
                    Some(v) => *v,
                    None => {
                        let v = ctx.hazard(tree.node(self.ids[k]).state, x_new)?;
                        *h = Some(v);
                        v
                    }
                };
                Ok(Some(ctx.weights.edge(*d, hazard)))
            }
        }
    }

    /// Cost used for comparisons; hazard is ignored when it cannot matter.
    fn cheap_edge(&self, k: usize, weights: &CostWeights<T>) -> Option<EdgeCost<T>> {
        match &self.candidates[k] {
            Candidate::Blocked => None,
            Candidate::Clear(d, h) => Some(weights.edge(*d, h.unwrap_or_else(T::zero))),
        }
    }
}

/// Lowest cost-to-come parent among collision-free neighbors (ties to the
/// lowest id). `None` means no neighbor can connect.
pub fn choose_parent<T: Real>(
    tree: &Tree<T>,
    x_new: Point2<T>,
    hood: &mut Neighborhood<T>,
    ctx: &PlanContext<'_, T>,
) -> Result<Option<(usize, EdgeCost<T>)>, PlanError> {
    let mut best: Option<(usize, usize, T)> = None;
    for k in 0..hood.ids.len() {
        let Some(e) = hood.cheap_edge(k, &ctx.weights) else {
            continue;
        };
        let id = hood.ids[k];
        let j = tree.cost_through(id, &e);
        let better = match best {
            None => true,
            Some((_, bid, bj)) => j < bj || (j == bj && id < bid),
        };
        if better {
            best = Some((k, id, j));
        }
    }
    match best {
        None => Ok(None),
        Some((k, id, _)) => Ok(hood.edge_at(k, tree, x_new, ctx)?.map(|e| (id, e))),
    }
}

/// Reparents every neighbor whose cost strictly drops when routed through
/// `new_id`. Returns the number of rewired nodes.
pub fn rewire<T: Real>(
    tree: &mut Tree<T>,
    new_id: usize,
    hood: &mut Neighborhood<T>,
    ctx: &PlanContext<'_, T>,
) -> Result<usize, PlanError> {
    let x_new = tree.node(new_id).state;
    let mut count = 0;
    for k in 0..hood.ids.len() {
        let id = hood.ids[k];
        if id == new_id || tree.node(new_id).parent == Some(id) {
            continue;
        }
        let Some(cheap) = hood.cheap_edge(k, &ctx.weights) else {
            continue;
        };
        if tree.cost_through(new_id, &cheap) >= tree.node(id).cost_to_come {
            continue;
        }
        if tree.is_ancestor(id, new_id) {
            continue;
        }
        let e = hood.edge_at(k, tree, x_new, ctx)?.expect("clear candidate");
        tree.reparent(id, new_id, e);
        count += 1;
    }
    Ok(count)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path<T> {
    pub node_ids: Vec<usize>,
    /// Start first, goal-region node last.
    pub waypoints: Vec<Point2<T>>,
    pub dist: T,
    pub hazard: T,
    pub cost: T,
}

impl<T: Real> Path<T> {
    pub fn from_tree(tree: &Tree<T>, id: usize) -> Self {
        let node_ids = tree.path_to(id);
        let waypoints = node_ids.iter().map(|&i| tree.node(i).state).collect();
        let n = tree.node(id);
        Self {
            node_ids,
            waypoints,
            dist: n.dist_to_come,
            hazard: n.hazard_to_come,
            cost: n.cost_to_come,
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment<T>> + '_ {
        self.waypoints.windows(2).map(|w| Segment::new(w[0], w[1]))
    }

    pub fn edge_count(&self) -> usize {
        self.waypoints.len().saturating_sub(1)
    }

    /// Hazard averaged over edges; zero for a zero-edge path.
    pub fn hazard_average(&self) -> T {
        match self.edge_count() {
            0 => T::zero(),
            n => self.hazard / T::from_usize_lossy(n),
        }
    }

    /// Waypoint list `index,north,east`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,north,east\n");
        for (i, p) in self.waypoints.iter().enumerate() {
            out.push_str(&format!(
                "{},{:.6},{:.6}\n",
                i,
                p.north.as_f64(),
                p.east.as_f64()
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PlanStats {
    pub iterations: usize,
    pub nodes: usize,
    pub steer_blocked: usize,
    pub no_parent: usize,
    pub duplicates: usize,
    pub rewires: usize,
    pub goal_nodes: usize,
}

#[derive(Debug, Clone)]
pub struct PlanReport<T> {
    pub tree: Tree<T>,
    /// `None` when no node reached the goal region.
    pub path: Option<Path<T>>,
    pub stats: PlanStats,
    /// `(iteration, best J)` each time the best goal-region cost changes.
    pub best_cost_trace: Vec<(usize, T)>,
    pub beta: T,
}

/// Runs RA-RRT* from `start` towards the goal disk around `goal`.
pub fn plan<T: Real>(
    env: &EnvironmentState<T>,
    model: &RiskModel<T>,
    config: &PlannerConfig<T>,
    start: Point2<T>,
    goal: Point2<T>,
) -> Result<PlanReport<T>, PlanError> {
    plan_observed(env, model, config, start, goal, |_, _| {})
}

/// [`plan`] with a callback invoked with the tree after every iteration.
pub fn plan_observed<T: Real>(
    env: &EnvironmentState<T>,
    model: &RiskModel<T>,
    config: &PlannerConfig<T>,
    start: Point2<T>,
    goal: Point2<T>,
    mut observe: impl FnMut(usize, &Tree<T>),
) -> Result<PlanReport<T>, PlanError> {
    config.validate()?;
    if !env.in_free_space(start) {
        return Err(PlanError::StartBlocked(
            start.north.as_f64(),
            start.east.as_f64(),
        ));
    }
    if !env.in_free_space(goal) {
        return Err(PlanError::GoalBlocked(
            goal.north.as_f64(),
            goal.east.as_f64(),
        ));
    }
    let ctx = PlanContext::new(env, model, config);
    let mut tree = Tree::new(start, config.step, ctx.weights);
    let mut stats = PlanStats::default();
    if start.distance(goal) <= config.goal_radius {
        stats.nodes = 1;
        stats.goal_nodes = 1;
        return Ok(PlanReport {
            path: Some(Path::from_tree(&tree, 0)),
            best_cost_trace: vec![(0, T::zero())],
            tree,
            stats,
            beta: ctx.weights.beta,
        });
    }

    let risk_map = if config.risk_active() && config.risk_bias > T::zero() {
        let ceiling = T::from_usize_lossy(model.n_events());
        Some(RiskMap::from_field(
            &env.workspace,
            config.risk_map_resolution,
            ceiling,
            |p| model.hazard_at(p, env),
        )?)
    } else {
        None
    };
    let sampler = Sampler::new(config, env.workspace, goal, risk_map.as_ref());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut goal_ids: Vec<usize> = Vec::new();
    let mut best: Option<(usize, T)> = None;
    let mut trace = Vec::new();

    for iter in 0..config.iterations {
        stats.iterations += 1;
        let x_rand = sampler.sample(&mut rng);
        let nearest = tree.nearest(x_rand);
        let Ok(x_new) = steer(tree.node(nearest).state, x_rand, config.step) else {
            stats.duplicates += 1;
            observe(iter, &tree);
            continue;
        };
        if !ctx.clear(tree.node(nearest).state, x_new)? {
            stats.steer_blocked += 1;
            observe(iter, &tree);
            continue;
        }
        let radius = config.radius(&env.workspace, tree.len() + 1);
        let mut ids = tree.near(x_new, radius);
        if ids.iter().any(|&i| tree.node(i).state == x_new) {
            stats.duplicates += 1;
            observe(iter, &tree);
            continue;
        }
        if let Err(pos) = ids.binary_search(&nearest) {
            ids.insert(pos, nearest);
        }
        let mut hood = Neighborhood::evaluate(&tree, x_new, ids, &ctx)?;
        let Some((parent, edge)) = choose_parent(&tree, x_new, &mut hood, &ctx)? else {
            stats.no_parent += 1;
            observe(iter, &tree);
            continue;
        };
        let new_id = tree.add_node(x_new, parent, edge);
        stats.rewires += rewire(&mut tree, new_id, &mut hood, &ctx)?;
        if x_new.distance(goal) <= config.goal_radius {
            goal_ids.push(new_id);
        }
        let current = goal_ids
            .iter()
            .map(|&i| (i, tree.node(i).cost_to_come))
            .fold(None::<(usize, T)>, |acc, (i, j)| match acc {
                Some((bi, bj)) if bj < j || (bj == j && bi < i) => Some((bi, bj)),
                _ => Some((i, j)),
            });
        if let Some((bi, bj)) = current {
            if best.is_none_or(|(_, j)| bj != j) {
                trace.push((iter, bj));
            }
            best = Some((bi, bj));
        }
        observe(iter, &tree);
    }
    stats.nodes = tree.len();
    stats.goal_nodes = goal_ids.len();
    Ok(PlanReport {
        path: best.map(|(i, _)| Path::from_tree(&tree, i)),
        tree,
        stats,
        best_cost_trace: trace,
        beta: ctx.weights.beta,
    })
}

/// Audits `tree` against fresh geometry and hazard evaluations.
pub fn audit_tree<T: Real>(
    tree: &Tree<T>,
    env: &EnvironmentState<T>,
    model: &RiskModel<T>,
    config: &PlannerConfig<T>,
    tolerance: T,
) -> Result<(), AuditError> {
    let ctx = PlanContext::new(env, model, config);
    tree.audit(
        |s| ctx.hazard(s.a, s.b).unwrap_or_else(|_| T::nan()),
        tolerance,
    )
}
