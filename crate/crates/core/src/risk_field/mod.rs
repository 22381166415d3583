//! Environment-to-hazard mapping.
//!
//! [`EvidenceMapper`] turns a position in an [`EnvironmentState`] into
//! observations for the network's evidence nodes (shore distance, depth,
//! DCPA and the two course flags). [`RiskModel`] memoizes the event
//! posteriors for every combination of evidence states, so a hazard query
//! costs a few geometric evaluations and a table blend.
//!
//! Continuous quantities are binned with a smooth transition band of
//! configurable half-width around each bin edge. Inside the band the
//! observation is split between the two neighbouring states and the event
//! probability is the membership-weighted mix of the hard-evidence
//! posteriors. A zero half-width gives plain hard binning, which is exactly
//! what [`evidence_at`] reports.

mod map;

pub use map::{build_risk_map, Interpolation, RiskMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbn::{BayesNet, BbnError, Evidence};
use crate::geometry::{distance_to_polylines, intervals_for, Obstacle, Point2, Segment, Workspace};
use crate::Real;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("point ({north}, {east}) lies outside the workspace")]
    OutsideWorkspace { north: f64, east: f64 },
    #[error("degenerate zero-length segment")]
    DegenerateSegment,
    #[error("integration spacing must be positive")]
    NonPositiveSpacing,
    #[error("inference failed: {0}")]
    Bbn(#[from] BbnError),
    #[error("invalid risk configuration: {0}")]
    Config(String),
    #[error("invalid environment: {0}")]
    Environment(String),
}

/// Water depth sampled on a regular grid, positive down. Values sit on grid
/// nodes `origin + (row, col) * resolution`; queries interpolate bilinearly
/// and clamp outside the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthGrid<T> {
    pub origin: Point2<T>,
    pub resolution: T,
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows` along north.
    pub values: Vec<T>,
}

impl<T: Real> DepthGrid<T> {
    pub fn uniform(ws: &Workspace<T>, depth: T) -> Self {
        let ext = ws.extent();
        Self {
            origin: ws.min,
            resolution: ext.north.max(ext.east),
            rows: 2,
            cols: 2,
            values: vec![depth; 4],
        }
    }

    /// Samples `f` at grid nodes spaced `resolution` apart over `ws`.
    pub fn from_fn(ws: &Workspace<T>, resolution: T, f: impl Fn(Point2<T>) -> T) -> Self {
        let ext = ws.extent();
        let rows = (ext.north / resolution).ceil().to_usize().unwrap_or(1) + 1;
        let cols = (ext.east / resolution).ceil().to_usize().unwrap_or(1) + 1;
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let p = ws.min
                    + Point2::new(
                        T::from_usize_lossy(r) * resolution,
                        T::from_usize_lossy(c) * resolution,
                    );
                values.push(f(p));
            }
        }
        Self {
            origin: ws.min,
            resolution,
            rows,
            cols,
            values,
        }
    }

    pub fn validate(&self, ws: &Workspace<T>) -> Result<(), RiskError> {
        let bad = |m: &str| Err(RiskError::Environment(m.to_string()));
        if self.rows < 2 || self.cols < 2 || self.values.len() != self.rows * self.cols {
            return bad("depth grid needs at least 2x2 nodes and rows*cols values");
        }
        if !(self.resolution > T::zero()) {
            return bad("depth grid resolution must be positive");
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return bad("depth grid holds non-finite values");
        }
        let far = self.origin
            + Point2::new(
                T::from_usize_lossy(self.rows - 1) * self.resolution,
                T::from_usize_lossy(self.cols - 1) * self.resolution,
            );
        if self.origin.north > ws.min.north
            || self.origin.east > ws.min.east
            || far.north < ws.max.north
            || far.east < ws.max.east
        {
            return bad("depth grid does not cover the workspace");
        }
        Ok(())
    }

    pub fn depth_at(&self, p: Point2<T>) -> T {
        let max_r = T::from_usize_lossy(self.rows - 1);
        let max_c = T::from_usize_lossy(self.cols - 1);
        let fr = ((p.north - self.origin.north) / self.resolution)
            .max(T::zero())
            .min(max_r);
        let fc = ((p.east - self.origin.east) / self.resolution)
            .max(T::zero())
            .min(max_c);
        let r0 = fr.floor().to_usize().unwrap_or(0).min(self.rows - 2);
        let c0 = fc.floor().to_usize().unwrap_or(0).min(self.cols - 2);
        let tr = fr - T::from_usize_lossy(r0);
        let tc = fc - T::from_usize_lossy(c0);
        let at = |r: usize, c: usize| self.values[r * self.cols + c];
        let top = at(r0, c0) * (T::one() - tc) + at(r0, c0 + 1) * tc;
        let bot = at(r0 + 1, c0) * (T::one() - tc) + at(r0 + 1, c0 + 1) * tc;
        top * (T::one() - tr) + bot * tr
    }
}

/// Ground-truth snapshot of the world for one planning epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de> + Default"))]
pub struct EnvironmentState<T> {
    pub workspace: Workspace<T>,
    #[serde(default)]
    pub shoreline: Vec<Vec<Point2<T>>>,
    pub depth: DepthGrid<T>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle<T>>,
    /// Cruise speed used for own-ship velocity in encounter geometry.
    pub own_speed: T,
    /// Own ship is assumed to head here; normally the planning goal.
    pub destination: Point2<T>,
}

impl<T: Real> EnvironmentState<T> {
    pub fn open_water(workspace: Workspace<T>, depth: T, destination: Point2<T>) -> Self {
        Self {
            workspace,
            shoreline: Vec::new(),
            depth: DepthGrid::uniform(&workspace, depth),
            obstacles: Vec::new(),
            own_speed: T::lit(2.0),
            destination,
        }
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        self.workspace
            .validate()
            .map_err(|e| RiskError::Environment(e.to_string()))?;
        self.depth.validate(&self.workspace)?;
        for line in &self.shoreline {
            if line.is_empty() {
                return Err(RiskError::Environment("empty shoreline polyline".into()));
            }
            if line.iter().any(|p| !self.workspace.contains(*p)) {
                return Err(RiskError::Environment(
                    "shoreline vertex outside the workspace".into(),
                ));
            }
        }
        for ob in &self.obstacles {
            ob.validate()
                .map_err(|e| RiskError::Environment(e.to_string()))?;
        }
        if !(self.own_speed >= T::zero()) {
            return Err(RiskError::Environment(
                "own speed must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn in_free_space(&self, p: Point2<T>) -> bool {
        self.workspace.contains(p) && crate::geometry::point_in_free_space(p, &self.obstacles)
    }

    fn own_velocity(&self, p: Point2<T>) -> Point2<T> {
        let to = self.destination - p;
        let d = to.norm();
        if d > T::zero() {
            to * (self.own_speed / d)
        } else {
            Point2::origin()
        }
    }
}

/// Closest point of approach for relative position `r` (other minus own)
/// and relative velocity `v` (other minus own). Returns `(dcpa, tcpa)` with
/// `tcpa = max(0, -r.v / |v|^2)`; zero relative velocity yields `tcpa = 0`.
pub fn closest_approach<T: Real>(r: Point2<T>, v: Point2<T>) -> (T, T) {
    let vv = v.dot(v);
    let t = if vv > T::zero() {
        (-r.dot(v) / vv).max(T::zero())
    } else {
        T::zero()
    };
    ((r + v * t).norm(), t)
}

/// A network node fed by a continuous quantity through ordered bin edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de> + Default"))]
pub struct BinnedNode<T> {
    pub node: String,
    /// Strictly increasing; one fewer than the node's state count. Bin `i`
    /// maps to state `i`.
    pub edges: Vec<T>,
    /// Half-width of the smooth transition band around each edge.
    #[serde(default)]
    pub softness: T,
}

impl<T: Real> BinnedNode<T> {
    pub fn new(node: &str, edges: &[f64], softness: f64) -> Self {
        Self {
            node: node.to_string(),
            edges: edges.iter().map(|e| T::lit(*e)).collect(),
            softness: T::lit(softness),
        }
    }

    /// Hard bin: values at or above an edge fall into the upper bin.
    pub fn bin(&self, x: T) -> usize {
        self.edges.iter().take_while(|e| x >= **e).count()
    }

    /// Soft membership over bins; sums to one, at most two non-zero
    /// entries when edges are at least `2 * softness` apart.
    pub fn membership(&self, x: T) -> Vec<T> {
        let above: Vec<T> = self
            .edges
            .iter()
            .map(|e| ramp(x, *e, self.softness))
            .collect();
        let n = self.edges.len() + 1;
        let mut m = Vec::with_capacity(n);
        for i in 0..n {
            let lo = if i == 0 { T::one() } else { above[i - 1] };
            let hi = if i + 1 == n { T::zero() } else { above[i] };
            m.push((lo - hi).max(T::zero()));
        }
        m
    }
}

/// Degree to which `x` is above `edge`: 0 below the band, 1 above it, with a
/// smoothstep across the band so the degree has a continuous slope.
fn ramp<T: Real>(x: T, edge: T, half_width: T) -> T {
    if half_width > T::zero() {
        let u = ((x - edge + half_width) / (half_width + half_width))
            .max(T::zero())
            .min(T::one());
        u * u * (T::lit(3.0) - u - u)
    } else if x >= edge {
        T::one()
    } else {
        T::zero()
    }
}

/// A binary network node driven by a derived condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagNode {
    pub node: String,
    /// State label meaning the condition holds.
    pub true_state: String,
}

/// Thresholds and node bindings turning geometry into evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct EvidenceMapper<T> {
    pub shore_distance: BinnedNode<T>,
    pub depth: BinnedNode<T>,
    pub dcpa: BinnedNode<T>,
    pub collision_course: FlagNode,
    pub grounding_course: FlagNode,
    /// DCPA below this (metres) flags a collision course.
    pub collision_dcpa: T,
    /// Encounters further out than this (seconds) are not on a collision course.
    pub tcpa_horizon: T,
    /// Depth below this (metres) on the forward projection flags a grounding course.
    pub draft: T,
    /// Forward projection length (metres) for the grounding check.
    pub lookahead: T,
    /// Transition half-width for the collision-course DCPA test (metres).
    pub course_softness: T,
    /// Transition half-width for the grounding draft test (metres of depth).
    pub draft_softness: T,
}

impl<T: Real> Default for EvidenceMapper<T> {
    fn default() -> Self {
        Self {
            shore_distance: BinnedNode::new("shore_distance", &[20.0, 60.0], 8.0),
            depth: BinnedNode::new("depth", &[3.0, 10.0], 2.0),
            dcpa: BinnedNode::new("dcpa", &[10.0, 30.0], 8.0),
            collision_course: FlagNode {
                node: "collision_course".into(),
                true_state: "yes".into(),
            },
            grounding_course: FlagNode {
                node: "grounding_course".into(),
                true_state: "yes".into(),
            },
            collision_dcpa: T::lit(10.0),
            tcpa_horizon: T::lit(120.0),
            draft: T::lit(3.0),
            lookahead: T::lit(20.0),
            course_softness: T::lit(4.0),
            draft_softness: T::lit(1.5),
        }
    }
}

impl<T: Real> EvidenceMapper<T> {
    /// Same thresholds with every transition band collapsed to hard bins.
    pub fn hard(mut self) -> Self {
        self.shore_distance.softness = T::zero();
        self.depth.softness = T::zero();
        self.dcpa.softness = T::zero();
        self.course_softness = T::zero();
        self.draft_softness = T::zero();
        self
    }

    fn binned(&self) -> [&BinnedNode<T>; 3] {
        [&self.shore_distance, &self.depth, &self.dcpa]
    }

    fn validate(&self) -> Result<(), RiskError> {
        for b in self.binned() {
            if b.edges.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(RiskError::Config(format!(
                    "bin edges for `{}` must be strictly increasing",
                    b.node
                )));
            }
            if !(b.softness >= T::zero()) {
                return Err(RiskError::Config(format!(
                    "softness for `{}` must be non-negative",
                    b.node
                )));
            }
        }
        let nonneg = [
            self.collision_dcpa,
            self.tcpa_horizon,
            self.draft,
            self.lookahead,
            self.course_softness,
            self.draft_softness,
        ];
        if nonneg.iter().any(|v| !(*v >= T::zero())) {
            return Err(RiskError::Config(
                "mapper thresholds must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Raw continuous observations at a point, before binning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<T> {
    /// Infinite when there is no shoreline.
    pub shore_distance: T,
    pub depth: T,
    /// Infinite when there are no dynamic obstacles.
    pub dcpa: T,
    /// Degree in [0, 1] to which the collision-course condition holds.
    pub collision_course: T,
    /// Minimum depth along the forward projection.
    pub forward_min_depth: T,
    pub grounding_course: T,
}

impl<T: Real> EvidenceMapper<T> {
    pub fn observe(
        &self,
        p: Point2<T>,
        env: &EnvironmentState<T>,
    ) -> Result<Observation<T>, RiskError> {
        if !env.workspace.contains(p) {
            return Err(RiskError::OutsideWorkspace {
                north: p.north.as_f64(),
                east: p.east.as_f64(),
            });
        }
        let shore_distance = distance_to_polylines(p, &env.shoreline).unwrap_or(T::infinity());
        let depth = env.depth.depth_at(p);
        let own_v = env.own_velocity(p);

        let mut dcpa = T::infinity();
        let mut course = T::zero();
        for ob in env.obstacles.iter().filter(|o| o.is_dynamic()) {
            let r = ob.center() - p;
            let v = ob.velocity - own_v;
            let (d, t) = closest_approach(r, v);
            dcpa = dcpa.min(d);
            course = course.max(self.course_degree(d, t, v.norm()));
        }

        let speed = own_v.norm();
        let mut forward_min_depth = depth;
        if speed > T::zero() && self.lookahead > T::zero() {
            let dir = own_v * (T::one() / speed);
            let steps = 4;
            for k in 1..=steps {
                let q = env.workspace.clamp(
                    p + dir
                        * (self.lookahead * T::from_usize_lossy(k) / T::from_usize_lossy(steps)),
                );
                forward_min_depth = forward_min_depth.min(env.depth.depth_at(q));
            }
        }
        let grounding_course = T::one() - ramp(forward_min_depth, self.draft, self.draft_softness);
        Ok(Observation {
            shore_distance,
            depth,
            dcpa,
            collision_course: course,
            forward_min_depth,
            grounding_course,
        })
    }

    /// Collision-course degree: DCPA under threshold with the encounter
    /// strictly ahead and within the horizon.
    fn course_degree(&self, dcpa: T, tcpa: T, rel_speed: T) -> T {
        let close = T::one() - ramp(dcpa, self.collision_dcpa, self.course_softness);
        if self.course_softness > T::zero() && rel_speed > T::zero() {
            // time for the relative motion to cross the transition band
            let tau = self.course_softness / rel_speed;
            let ahead = (tcpa / tau).min(T::one());
            let within = T::one() - ramp(tcpa, self.tcpa_horizon, tau);
            close * ahead * within
        } else if tcpa > T::zero() && tcpa <= self.tcpa_horizon {
            close
        } else {
            T::zero()
        }
    }
}

/// A hazardous event `E_i` with its consequence weight `C_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEvent<T> {
    pub node: String,
    pub consequence: T,
}

/// Hazard model: event list, network and evidence mapping, with the event
/// posteriors memoized for every evidence-state combination.
#[derive(Debug, Clone)]
pub struct RiskModel<T> {
    events: Vec<RiskEvent<T>>,
    net: BayesNet<T>,
    mapper: EvidenceMapper<T>,
    /// Network node index for shore, depth, dcpa, collision course, grounding course.
    evidence_nodes: [usize; 5],
    cards: [usize; 5],
    /// Flag state indices `(true, false)` for the two course nodes.
    flag_states: [(usize, usize); 2],
    /// Per combination: event probabilities, or `None` when inconsistent.
    table: Vec<Option<Vec<T>>>,
}

impl<T: Real> RiskModel<T> {
    /// Model over every event node of `net` with unit consequence weights.
    pub fn new(net: BayesNet<T>, mapper: EvidenceMapper<T>) -> Result<Self, RiskError> {
        let events = net
            .event_names()
            .map(|n| RiskEvent {
                node: n.to_string(),
                consequence: T::one(),
            })
            .collect();
        Self::with_events(net, mapper, events)
    }

    pub fn with_events(
        net: BayesNet<T>,
        mapper: EvidenceMapper<T>,
        events: Vec<RiskEvent<T>>,
    ) -> Result<Self, RiskError> {
        mapper.validate()?;
        let lookup = |name: &str| {
            net.node_index(name)
                .ok_or_else(|| RiskError::Config(format!("network has no node `{name}`")))
        };
        let names = [
            mapper.shore_distance.node.as_str(),
            mapper.depth.node.as_str(),
            mapper.dcpa.node.as_str(),
            mapper.collision_course.node.as_str(),
            mapper.grounding_course.node.as_str(),
        ];
        let mut evidence_nodes = [0; 5];
        let mut cards = [0; 5];
        for (k, name) in names.iter().enumerate() {
            evidence_nodes[k] = lookup(name)?;
            cards[k] = net.cardinality(evidence_nodes[k]);
        }
        for (k, b) in mapper.binned().iter().enumerate() {
            if b.edges.len() + 1 != cards[k] {
                return Err(RiskError::Config(format!(
                    "`{}` has {} states but {} bin edges",
                    b.node,
                    cards[k],
                    b.edges.len()
                )));
            }
        }
        let mut flag_states = [(0, 0); 2];
        for (k, flag) in [&mapper.collision_course, &mapper.grounding_course]
            .into_iter()
            .enumerate()
        {
            let ni = evidence_nodes[3 + k];
            if cards[3 + k] != 2 {
                return Err(RiskError::Config(format!("`{}` must be binary", flag.node)));
            }
            let t = net.state_index(ni, &flag.true_state).ok_or_else(|| {
                RiskError::Config(format!(
                    "`{}` has no state `{}`",
                    flag.node, flag.true_state
                ))
            })?;
            flag_states[k] = (t, 1 - t);
        }

        let event_idx: Vec<(usize, usize)> = events
            .iter()
            .map(|e| {
                let ni = lookup(&e.node)?;
                net.event_nodes()
                    .iter()
                    .copied()
                    .find(|(n, _)| *n == ni)
                    .ok_or_else(|| RiskError::Config(format!("`{}` is not an event node", e.node)))
            })
            .collect::<Result<_, _>>()?;
        if events.is_empty() {
            return Err(RiskError::Config(
                "at least one hazardous event required".into(),
            ));
        }
        if events.iter().any(|e| !(e.consequence >= T::zero())) {
            return Err(RiskError::Config(
                "consequence weights must be non-negative".into(),
            ));
        }

        let combos: usize = cards.iter().product();
        let mut table = Vec::with_capacity(combos);
        let mut observed = vec![None; net.len()];
        for flat in 0..combos {
            let digits = decode(flat, &cards);
            for k in 0..5 {
                observed[evidence_nodes[k]] = Some(digits[k]);
            }
            let row = event_idx
                .iter()
                .map(|&(ni, si)| net.posterior_indexed(&observed, ni).map(|d| d[si]))
                .collect::<Result<Vec<T>, BbnError>>();
            match row {
                Ok(r) => table.push(Some(r)),
                Err(BbnError::InconsistentEvidence) => table.push(None),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(Self {
            events,
            net,
            mapper,
            evidence_nodes,
            cards,
            flag_states,
            table,
        })
    }

    pub fn net(&self) -> &BayesNet<T> {
        &self.net
    }

    pub fn mapper(&self) -> &EvidenceMapper<T> {
        &self.mapper
    }

    pub fn events(&self) -> &[RiskEvent<T>] {
        &self.events
    }

    /// Number of hazardous events, the upper bound of any hazard value.
    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn set_consequences(&mut self, weights: &[T]) -> Result<(), RiskError> {
        if weights.len() != self.events.len() || weights.iter().any(|w| !(*w >= T::zero())) {
            return Err(RiskError::Config(
                "one non-negative consequence weight per event required".into(),
            ));
        }
        for (e, w) in self.events.iter_mut().zip(weights) {
            e.consequence = *w;
        }
        Ok(())
    }

    fn hard_states(&self, obs: &Observation<T>) -> [usize; 5] {
        let m = &self.mapper;
        let flag = |k: usize, on: bool| {
            if on {
                self.flag_states[k].0
            } else {
                self.flag_states[k].1
            }
        };
        [
            m.shore_distance.bin(obs.shore_distance),
            m.depth.bin(obs.depth),
            m.dcpa.bin(obs.dcpa),
            flag(0, obs.collision_course >= T::lit(0.5)),
            flag(1, obs.grounding_course >= T::lit(0.5)),
        ]
    }

    /// Hard-binned evidence at `p`.
    pub fn evidence_at(
        &self,
        p: Point2<T>,
        env: &EnvironmentState<T>,
    ) -> Result<Evidence, RiskError> {
        let obs = self.mapper.observe(p, env)?;
        let states = self.hard_states(&obs);
        let mut ev = Evidence::new();
        for (&ni, &state) in self.evidence_nodes.iter().zip(&states) {
            ev.set(
                self.net.node(ni).name.clone(),
                self.net.node(ni).states[state].clone(),
            );
        }
        Ok(ev)
    }

    /// Soft membership for each of the five evidence nodes.
    fn memberships(&self, obs: &Observation<T>) -> [Vec<T>; 5] {
        let m = &self.mapper;
        let flag = |k: usize, degree: T| {
            let mut v = vec![T::zero(); 2];
            v[self.flag_states[k].0] = degree;
            v[self.flag_states[k].1] = T::one() - degree;
            v
        };
        [
            m.shore_distance.membership(obs.shore_distance),
            m.depth.membership(obs.depth),
            m.dcpa.membership(obs.dcpa),
            flag(0, obs.collision_course),
            flag(1, obs.grounding_course),
        ]
    }

    /// `P(E_i occurs)` at `p` for every event, membership-weighted.
    pub fn event_probabilities_at(
        &self,
        p: Point2<T>,
        env: &EnvironmentState<T>,
    ) -> Result<Vec<T>, RiskError> {
        let obs = self.mapper.observe(p, env)?;
        let mem = self.memberships(&obs);
        let mut out = vec![T::zero(); self.events.len()];
        let active: Vec<Vec<(usize, T)>> = mem
            .iter()
            .map(|v| {
                v.iter()
                    .copied()
                    .enumerate()
                    .filter(|(_, w)| *w > T::zero())
                    .collect()
            })
            .collect();
        let mut pick = [0usize; 5];
        loop {
            let mut weight = T::one();
            let mut flat = 0;
            for k in 0..5 {
                let (state, w) = active[k][pick[k]];
                weight = weight * w;
                flat = flat * self.cards[k] + state;
            }
            let row = self.table[flat]
                .as_ref()
                .ok_or(RiskError::Bbn(BbnError::InconsistentEvidence))?;
            for (o, r) in out.iter_mut().zip(row) {
                *o = *o + weight * *r;
            }
            let mut k = 5;
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                pick[k] += 1;
                if pick[k] < active[k].len() {
                    break;
                }
                pick[k] = 0;
            }
        }
    }

    /// Point-wise hazard: sum of event probabilities, in `[0, n_events]`.
    pub fn hazard_at(&self, p: Point2<T>, env: &EnvironmentState<T>) -> Result<T, RiskError> {
        let probs = self.event_probabilities_at(p, env)?;
        Ok(probs
            .into_iter()
            .sum::<T>()
            .min(T::from_usize_lossy(self.n_events())))
    }

    /// Consequence-weighted point-wise cost `sum_i C_i P(E_i)`.
    pub fn consequence_at(&self, p: Point2<T>, env: &EnvironmentState<T>) -> Result<T, RiskError> {
        let probs = self.event_probabilities_at(p, env)?;
        Ok(probs
            .iter()
            .zip(&self.events)
            .map(|(p, e)| *p * e.consequence)
            .sum())
    }

    /// Edge hazard: mean point hazard over the midpoints of `ceil(len / spacing)`
    /// equal sub-intervals.
    pub fn edge_hazard(
        &self,
        s: &Segment<T>,
        env: &EnvironmentState<T>,
        spacing: T,
    ) -> Result<T, RiskError> {
        self.edge_mean(s, spacing, |p| self.hazard_at(p, env))
    }

    pub fn consequence_cost(
        &self,
        s: &Segment<T>,
        env: &EnvironmentState<T>,
        spacing: T,
    ) -> Result<T, RiskError> {
        self.edge_mean(s, spacing, |p| self.consequence_at(p, env))
    }

    fn edge_mean(
        &self,
        s: &Segment<T>,
        spacing: T,
        f: impl Fn(Point2<T>) -> Result<T, RiskError>,
    ) -> Result<T, RiskError> {
        if !(spacing > T::zero()) {
            return Err(RiskError::NonPositiveSpacing);
        }
        if s.is_degenerate() {
            return Err(RiskError::DegenerateSegment);
        }
        let n = intervals_for(s.length(), spacing);
        let nf = T::from_usize_lossy(n);
        let half = T::lit(0.5);
        let mut acc = T::zero();
        for i in 0..n {
            let t = (T::from_usize_lossy(i) + half) / nf;
            acc = acc + f(s.point_at(t))?;
        }
        Ok(acc / nf)
    }
}

fn decode(mut flat: usize, cards: &[usize; 5]) -> [usize; 5] {
    let mut out = [0; 5];
    for k in (0..5).rev() {
        out[k] = flat % cards[k];
        flat /= cards[k];
    }
    out
}
