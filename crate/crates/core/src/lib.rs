//! Risk-aware sampling-based path planning for surface vessels.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: points, obstacles, collision predicates and a grid index.
//! * [`bbn`]: discrete Bayesian belief networks with exact inference.
//! * [`risk_field`]: maps the environment to network evidence and hazard.
//! * [`planner`]: RRT* whose cost blends path length with integrated hazard.
//! * [`smoothing`]: clamped B-spline trajectories.
//! * [`simulation`]: dynamic-obstacle episodes with periodic replanning.
//! * [`experiments`]: scenarios, Monte Carlo sweeps, CSV and SVG output.
//! * [`svg`]: deterministic figure writer.
//!
//! All numeric code is generic over [`Real`]; the aliases below fix the
//! scalar to `f64`, which is what the experiment harness and CLI use.

// comparisons are written negated on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bbn;
pub mod experiments;
pub mod geometry;
pub mod planner;
pub mod risk_field;
pub mod scalar;
pub mod simulation;
pub mod smoothing;
pub mod svg;

pub use scalar::Real;

pub type Point = geometry::Point2<f64>;
pub type Segment = geometry::Segment<f64>;
pub type Obstacle = geometry::Obstacle<f64>;
pub type Workspace = geometry::Workspace<f64>;
pub type BayesNet = bbn::BayesNet<f64>;
pub type Environment = risk_field::EnvironmentState<f64>;
pub type RiskModel = risk_field::RiskModel<f64>;
pub type RiskMap = risk_field::RiskMap<f64>;
pub type PlannerConfig = planner::PlannerConfig<f64>;
pub type Tree = planner::Tree<f64>;
pub type Path = planner::Path<f64>;
pub type BSplineCurve = smoothing::BSplineCurve<f64>;
pub type SimConfig = simulation::SimConfig<f64>;
pub type SimTrace = simulation::SimTrace<f64>;
