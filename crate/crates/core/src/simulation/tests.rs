use super::*;
use crate::bbn::reference_network;
use crate::geometry::Workspace;
use crate::planner::{audit_tree, RiskEvaluation};
use crate::risk_field::EvidenceMapper;

fn p(n: f64, e: f64) -> Point2<f64> {
    Point2::new(n, e)
}

fn model() -> RiskModel<f64> {
    RiskModel::new(reference_network(), EvidenceMapper::default()).unwrap()
}

fn open_env(goal: Point2<f64>) -> EnvironmentState<f64> {
    let ws = Workspace::new(p(0.0, 0.0), p(100.0, 100.0)).unwrap();
    EnvironmentState::open_water(ws, 30.0, goal)
}

fn fast_planner(seed: u64) -> PlannerConfig<f64> {
    PlannerConfig {
        alpha: 0.2,
        iterations: 800,
        seed,
        ..PlannerConfig::default()
    }
}

#[test]
fn obstacle_motion() {
    let mut env = open_env(p(90.0, 90.0));
    env.obstacles = vec![
        Obstacle::circle(p(10.0, 10.0), 2.0).unwrap(),
        Obstacle::circle(p(50.0, 50.0), 2.0)
            .unwrap()
            .moving(p(0.0, 0.0)),
        Obstacle::circle(p(20.0, 20.0), 2.0)
            .unwrap()
            .moving(p(1.0, 0.0)),
        Obstacle::circle(p(99.0, 20.0), 2.0)
            .unwrap()
            .moving(p(1.0, -0.5)),
    ];
    step_obstacles(&mut env, 2.0);
    assert_eq!(env.obstacles[0].center(), p(10.0, 10.0));
    assert_eq!(env.obstacles[1].center(), p(50.0, 50.0));
    assert_eq!(env.obstacles[2].center(), p(22.0, 20.0));
    assert_eq!(env.obstacles[2].velocity, p(1.0, 0.0));
    assert_eq!(env.obstacles[3].center(), p(100.0, 19.0));
    assert_eq!(env.obstacles[3].velocity, p(0.0, 0.0));
}

#[test]
fn polygon_obstacles_move_rigidly() {
    let mut env = open_env(p(90.0, 90.0));
    let square = Obstacle::polygon(vec![p(0.0, 0.0), p(4.0, 0.0), p(4.0, 4.0), p(0.0, 4.0)])
        .unwrap()
        .moving(p(0.5, 1.0));
    let mut shifted = square.clone();
    shifted.translate(p(5.0, 10.0));
    env.obstacles = vec![square];
    for _ in 0..10 {
        step_obstacles(&mut env, 1.0);
    }
    assert_eq!(env.obstacles[0].shape, shifted.shape);
}

#[test]
fn static_world_map_is_stable() {
    let mut env = open_env(p(90.0, 90.0));
    env.obstacles = vec![Obstacle::circle(p(40.0, 40.0), 5.0).unwrap()];
    let m = model();
    let before = refresh_risk(&env, &m, 5.0).unwrap();
    step_obstacles(&mut env, 1.0);
    assert_eq!(before, refresh_risk(&env, &m, 5.0).unwrap());
}

#[test]
fn approaching_obstacle_raises_hazard() {
    let m = model();
    let ws = Workspace::new(p(0.0, 0.0), p(1000.0, 1000.0)).unwrap();
    let probe = p(500.0, 100.0);
    let mut env = EnvironmentState::open_water(ws, 30.0, p(500.0, 1000.0));
    // head-on, starting beyond the time-to-closest-approach horizon
    env.obstacles = vec![Obstacle::circle(p(500.0, 850.0), 2.0)
        .unwrap()
        .moving(p(0.0, -3.0))];
    let mut last = m.hazard_at(probe, &env).unwrap();
    let first = last;
    for _ in 0..80 {
        step_obstacles(&mut env, 1.0);
        let h = m.hazard_at(probe, &env).unwrap();
        assert!(h >= last, "{h} < {last}");
        last = h;
    }
    assert!(last > 5.0 * first, "{first} -> {last}");
    env.obstacles.clear();
    let baseline = m
        .hazard_at(
            probe,
            &EnvironmentState::open_water(ws, 30.0, p(500.0, 1000.0)),
        )
        .unwrap();
    assert_eq!(m.hazard_at(probe, &env).unwrap(), baseline);
}

fn grown_tree(env: &EnvironmentState<f64>, cfg: &PlannerConfig<f64>) -> Tree<f64> {
    plan(env, &model(), cfg, p(10.0, 10.0), p(90.0, 90.0))
        .unwrap()
        .tree
}

#[test]
fn invalidation_without_change() {
    let env = open_env(p(90.0, 90.0));
    let cfg = fast_planner(4);
    let mut tree = grown_tree(&env, &cfg);
    let before = tree.to_csv();
    let inv = invalidate_edges(&mut tree, &env, &model(), &cfg, 2.0).unwrap();
    assert_eq!(inv.removed, 0);
    assert_eq!(tree.to_csv(), before);
    assert!(inv.remap.iter().enumerate().all(|(i, r)| *r == Some(i)));
}

#[test]
fn invalidation_after_parking_on_edge() {
    let env = open_env(p(90.0, 90.0));
    let cfg = fast_planner(6);
    let m = model();
    let mut tree = grown_tree(&env, &cfg);
    // park an obstacle on the midpoint of some edge a few levels deep
    let victim = tree
        .nodes()
        .iter()
        .find(|n| tree.path_to(n.id).len() == 4)
        .unwrap()
        .id;
    let parent = tree.node(victim).parent.unwrap();
    let mid = Segment::new(tree.node(parent).state, tree.node(victim).state).point_at(0.5);
    let subtree: Vec<Point2<f64>> = tree
        .nodes()
        .iter()
        .filter(|n| tree.is_ancestor(victim, n.id))
        .map(|n| n.state)
        .collect();
    let mut moved = env.clone();
    moved.obstacles.push(Obstacle::circle(mid, 0.5).unwrap());
    let before = tree.len();
    let inv = invalidate_edges(&mut tree, &moved, &m, &cfg, 2.0).unwrap();
    assert!(inv.removed >= subtree.len());
    assert_eq!(tree.len() + inv.removed, before);
    assert!(inv.remap[victim].is_none());
    for s in &subtree {
        assert!(tree.nodes().iter().all(|n| n.state != *s));
    }
    audit_tree(&tree, &moved, &m, &cfg, 1e-9).unwrap();
    for n in tree.nodes().iter().skip(1) {
        let e = Segment::new(tree.node(n.parent.unwrap()).state, n.state);
        assert!(segment_clear(&e, &moved.obstacles, cfg.collision_resolution).unwrap());
    }
}

#[test]
fn threshold_controls_hazard_pruning() {
    let mut env = open_env(p(90.0, 90.0));
    env.obstacles = vec![Obstacle::circle(p(60.0, 80.0), 2.0)
        .unwrap()
        .moving(p(-0.5, -1.0))];
    let cfg = fast_planner(8);
    let m = model();
    let base = grown_tree(&env, &cfg);
    let mut full = base.clone();
    step_obstacles(&mut env, 1.0);
    let inv = invalidate_edges(&mut full, &env, &m, &cfg, 2.0).unwrap();
    let collide = base
        .nodes()
        .iter()
        .skip(1)
        .filter(|n| {
            !segment_clear(
                &Segment::new(base.node(n.parent.unwrap()).state, n.state),
                &env.obstacles,
                0.25,
            )
            .unwrap()
        })
        .count();
    if collide == 0 {
        assert_eq!(inv.removed, 0);
    }
    let mut tight = base.clone();
    let inv_tight = invalidate_edges(&mut tight, &env, &m, &cfg, 1e-3).unwrap();
    assert!(inv_tight.removed > inv.removed);
    audit_tree(&tight, &env, &m, &cfg, 1e-9).unwrap();
    audit_tree(&full, &env, &m, &cfg, 1e-9).unwrap();
}

#[test]
fn follower_moves_at_constant_speed() {
    let mut f = Follower::new(vec![p(0.0, 0.0), p(3.0, 0.0), p(3.0, 4.0)]);
    assert_eq!(f.advance(2.0), p(2.0, 0.0));
    assert_eq!(f.advance(2.0), p(3.0, 1.0));
    assert_eq!(f.ahead(), vec![p(3.0, 1.0), p(3.0, 4.0)]);
    assert_eq!(f.advance(10.0), p(3.0, 4.0));
}

#[test]
fn static_world_episode() {
    let env = open_env(p(90.0, 90.0));
    let m = model();
    let sim = SimConfig::default();
    let cfg = fast_planner(100);
    let trace = run_episode(&env, &m, &cfg, &sim, p(10.0, 10.0), p(90.0, 90.0)).unwrap();
    assert_eq!(trace.outcome, Outcome::ReachedGoal);
    let duration = trace.duration();
    assert_eq!(
        trace.replans.len(),
        (duration / sim.replan_period).ceil() as usize
    );
    assert_eq!(trace.replans[0].cause, ReplanCause::Initial);
    for (k, r) in trace.replans.iter().enumerate() {
        assert_eq!(r.time, 10.0 * k as f64);
        assert_eq!(r.seed, 100 + k as u64);
        assert!(r.success);
        if k > 0 {
            assert_eq!(r.cause, ReplanCause::Periodic);
        }
    }
    for (k, s) in trace.steps.iter().enumerate() {
        assert_eq!(s.step, k);
        assert_eq!(s.time, k as f64);
        assert!(!s.in_collision);
    }
    // every replan lands close to the remaining straight line
    for r in &trace.replans {
        let straight = r.waypoints[0].distance(p(90.0, 90.0));
        assert!(r.dist < 1.2 * straight + 5.0);
    }
    assert_eq!(trace.pruned_edges, 0);
    let again = run_episode(&env, &m, &cfg, &sim, p(10.0, 10.0), p(90.0, 90.0)).unwrap();
    assert_eq!(again, trace);
}

#[test]
fn goal_next_to_start() {
    let env = open_env(p(11.0, 11.0));
    let trace = run_episode(
        &env,
        &model(),
        &fast_planner(0),
        &SimConfig::default(),
        p(10.0, 10.0),
        p(11.0, 11.0),
    )
    .unwrap();
    assert_eq!(trace.outcome, Outcome::ReachedGoal);
    assert_eq!(trace.replans.len(), 1);
    assert_eq!(trace.steps.len(), 1);
}

#[test]
fn crossing_obstacle_episode() {
    let ws = Workspace::new(p(0.0, 0.0), p(100.0, 100.0)).unwrap();
    let mut env = EnvironmentState::open_water(ws, 30.0, p(50.0, 95.0));
    env.obstacles = vec![Obstacle::circle(p(90.0, 55.0), 3.0)
        .unwrap()
        .moving(p(-1.0, 0.0))
        .with_inflation(2.0)];
    let m = model();
    let sim = SimConfig {
        record_frames: true,
        ..SimConfig::default()
    };
    let trace = run_episode(
        &env,
        &m,
        &fast_planner(3),
        &sim,
        p(50.0, 5.0),
        p(50.0, 95.0),
    )
    .unwrap();
    assert_eq!(trace.outcome, Outcome::ReachedGoal);
    assert!(!trace.any_collision());
    assert!(trace.max_hazard() < sim.hazard_threshold);
    assert_eq!(trace.frames.len(), trace.replans.len());
    assert!(trace.frames[0].svg.starts_with("<svg"));
    for w in trace.steps.windows(2) {
        assert_eq!(w[1].time - w[0].time, 1.0);
    }
    for r in &trace.replans {
        if r.cause == ReplanCause::Periodic {
            assert_eq!(r.time % 10.0, 0.0);
        }
    }
}

#[test]
fn risk_disabled_episode_runs() {
    let env = open_env(p(90.0, 90.0));
    let cfg = PlannerConfig {
        risk: RiskEvaluation::Disabled,
        ..fast_planner(1)
    };
    let trace = run_episode(
        &env,
        &model(),
        &cfg,
        &SimConfig::default(),
        p(10.0, 10.0),
        p(90.0, 90.0),
    )
    .unwrap();
    assert_eq!(trace.outcome, Outcome::ReachedGoal);
}

#[test]
fn csv_layouts() {
    let mut env = open_env(p(90.0, 90.0));
    env.obstacles = vec![Obstacle::circle(p(30.0, 70.0), 2.0).unwrap()];
    let trace = run_episode(
        &env,
        &model(),
        &fast_planner(2),
        &SimConfig::default(),
        p(10.0, 10.0),
        p(90.0, 90.0),
    )
    .unwrap();
    let csv = trace.to_csv();
    assert_eq!(
        csv.lines().next().unwrap(),
        "step,time,north,east,hazard,epoch,in_collision,obs0_north,obs0_east"
    );
    assert_eq!(csv.lines().count(), trace.steps.len() + 1);
    let rp = trace.replans_csv();
    assert!(rp.lines().nth(1).unwrap().starts_with("0.000,0,initial,2,"));
}

#[test]
fn config_checks() {
    let ok = SimConfig::<f64>::default();
    ok.validate(2).unwrap();
    assert!(SimConfig {
        dt: 0.0,
        ..ok.clone()
    }
    .validate(2)
    .is_err());
    assert!(SimConfig {
        replan_period: 0.5,
        ..ok.clone()
    }
    .validate(2)
    .is_err());
    assert!(SimConfig {
        hazard_threshold: 2.5,
        ..ok.clone()
    }
    .validate(2)
    .is_err());
    assert!(SimConfig {
        hazard_threshold: 0.0,
        ..ok.clone()
    }
    .validate(2)
    .is_err());
    SimConfig {
        hazard_threshold: 2.0,
        ..ok
    }
    .validate(2)
    .unwrap();
}
