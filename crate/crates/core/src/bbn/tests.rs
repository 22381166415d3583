use super::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REFERENCE: &str = include_str!("../../data/reference_network.json");

fn node(name: &str, parents: &[&str], cpt: Vec<Vec<f64>>) -> NetNode<f64> {
    NetNode {
        name: name.into(),
        states: vec!["t".into(), "f".into()],
        parents: parents.iter().map(|s| s.to_string()).collect(),
        cpt,
    }
}

fn chain() -> NetworkDef<f64> {
    NetworkDef {
        nodes: vec![
            node("a", &[], vec![vec![0.3, 0.7]]),
            node("b", &["a"], vec![vec![0.9, 0.1], vec![0.2, 0.8]]),
        ],
        events: vec![EventSpec {
            node: "b".into(),
            occurs: "t".into(),
        }],
    }
}

fn random_net(rng: &mut ChaCha8Rng, n: usize) -> NetworkDef<f64> {
    let mut nodes = Vec::new();
    for i in 0..n {
        let mut parents: Vec<String> = (0..i)
            .filter(|_| rng.gen_bool(0.35))
            .map(|j| format!("n{j}"))
            .collect();
        parents.truncate(3);
        let rows = 1 << parents.len();
        let cpt = (0..rows)
            .map(|_| {
                let p: f64 = rng.gen_range(0.02..0.98);
                vec![p, 1.0 - p]
            })
            .collect();
        nodes.push(NetNode {
            name: format!("n{i}"),
            states: vec!["t".into(), "f".into()],
            parents,
            cpt,
        });
    }
    NetworkDef {
        nodes,
        events: vec![],
    }
}

fn random_evidence(rng: &mut ChaCha8Rng, n: usize, target: usize) -> Evidence {
    let mut ev = Evidence::new();
    for i in 0..n {
        if i != target && rng.gen_bool(0.3) {
            ev.set(format!("n{i}"), if rng.gen_bool(0.5) { "t" } else { "f" });
        }
    }
    ev
}

#[test]
fn validate_accepts_chain() {
    assert_eq!(validate(&chain()), Ok(()));
}

#[test]
fn validate_reports_bad_row_sum() {
    let mut def = chain();
    def.nodes[1].cpt[1] = vec![0.2, 0.7];
    let v = validate(&def).unwrap_err();
    assert_eq!(v.node, "b");
    assert!(matches!(v.kind, ViolationKind::RowSum { row: 1, .. }));
    assert!(v.to_string().contains("`b`"));
}

#[test]
fn validate_reports_cycle() {
    let mut def = chain();
    def.nodes[0].parents = vec!["b".into()];
    def.nodes[0].cpt = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
    let v = validate(&def).unwrap_err();
    assert_eq!(v.kind, ViolationKind::Cycle);
}

#[test]
fn validate_other_violations() {
    let mut def = chain();
    def.nodes[1].parents = vec!["zzz".into()];
    assert_eq!(
        validate(&def).unwrap_err().kind,
        ViolationKind::UnknownParent("zzz".into())
    );

    let mut def = chain();
    def.nodes[0].cpt[0] = vec![1.2, -0.2];
    assert!(matches!(
        validate(&def).unwrap_err().kind,
        ViolationKind::ProbabilityOutOfRange { .. }
    ));

    let mut def = chain();
    def.events[0].occurs = "maybe".into();
    assert_eq!(
        validate(&def).unwrap_err().kind,
        ViolationKind::UnknownEventState("maybe".into())
    );

    let mut def = chain();
    def.nodes[1].states.pop();
    assert_eq!(
        validate(&def).unwrap_err().kind,
        ViolationKind::TooFewStates(1)
    );
}

#[test]
fn root_prior_without_evidence() {
    let net = BayesNet::new(chain()).unwrap();
    let p = net.posterior(&Evidence::new(), "a").unwrap();
    assert_eq!(p, vec![0.3, 0.7]);
}

#[test]
fn two_node_diagnostic_query() {
    let net = BayesNet::new(chain()).unwrap();
    let ev = Evidence::new().with("b", "t");
    // joint: (t,t)=0.27 (t,f)=0.03 (f,t)=0.14 (f,f)=0.56
    let expect_t = 0.27 / (0.27 + 0.14);
    let p = net.posterior(&ev, "a").unwrap();
    let q = net.enumerate_joint(&ev, "a").unwrap();
    assert!((p[0] - expect_t).abs() < 1e-12);
    assert!((q[0] - expect_t).abs() < 1e-12);
    assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
}

#[test]
fn observed_target_is_point_mass() {
    let net = BayesNet::new(chain()).unwrap();
    let p = net.posterior(&Evidence::new().with("a", "f"), "a").unwrap();
    assert_eq!(p, vec![0.0, 1.0]);
}

#[test]
fn inconsistent_evidence_is_an_error() {
    let mut def = chain();
    def.nodes[1].cpt = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
    let net = BayesNet::new(def).unwrap();
    let ev = Evidence::new().with("b", "f");
    assert!(matches!(
        net.posterior(&ev, "a"),
        Err(BbnError::InconsistentEvidence)
    ));
    assert!(matches!(
        net.enumerate_joint(&ev, "a"),
        Err(BbnError::InconsistentEvidence)
    ));
}

#[test]
fn deterministic_cpts_give_point_mass() {
    let def = NetworkDef {
        nodes: vec![
            node("a", &[], vec![vec![1.0, 0.0]]),
            node("b", &["a"], vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
        ],
        events: vec![],
    };
    let net = BayesNet::new(def).unwrap();
    assert_eq!(
        net.enumerate_joint(&Evidence::new(), "b").unwrap(),
        vec![0.0, 1.0]
    );
    assert_eq!(
        net.posterior(&Evidence::new(), "b").unwrap(),
        vec![0.0, 1.0]
    );
}

#[test]
fn unknown_names_rejected() {
    let net = BayesNet::new(chain()).unwrap();
    assert!(matches!(
        net.posterior(&Evidence::new(), "nope"),
        Err(BbnError::UnknownNode(_))
    ));
    assert!(matches!(
        net.posterior(&Evidence::new().with("a", "x"), "b"),
        Err(BbnError::UnknownState { .. })
    ));
}

#[test]
fn enumeration_refuses_huge_networks() {
    let nodes = (0..21)
        .map(|i| node(&format!("n{i}"), &[], vec![vec![0.5, 0.5]]))
        .collect();
    let net = BayesNet::new(NetworkDef {
        nodes,
        events: vec![],
    })
    .unwrap();
    assert!(matches!(
        net.enumerate_joint(&Evidence::new(), "n0"),
        Err(BbnError::StateSpaceTooLarge(_))
    ));
    // variable elimination has no such limit
    assert_eq!(
        net.posterior(&Evidence::new(), "n20").unwrap(),
        vec![0.5, 0.5]
    );
}

#[test]
fn random_networks_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let n = rng.gen_range(2..=10);
        let net = BayesNet::new(random_net(&mut rng, n)).unwrap();
        let target = rng.gen_range(0..n);
        let ev = random_evidence(&mut rng, n, target);
        let name = format!("n{target}");
        let p = net.posterior(&ev, &name).unwrap();
        let q = net.enumerate_joint(&ev, &name).unwrap();
        for (x, y) in p.iter().zip(&q) {
            assert!((x - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn elimination_order_and_declaration_order_do_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let n = rng.gen_range(3..=9);
        let def = random_net(&mut rng, n);
        let target = format!("n{}", rng.gen_range(0..n));
        let ev = random_evidence(&mut rng, n, usize::MAX);
        let ev = {
            let mut e = ev;
            e.assignments.remove(&target);
            e
        };
        let net = BayesNet::new(def.clone()).unwrap();
        let base = net.posterior(&ev, &target).unwrap();

        let mut hidden = net.hidden_variables(&ev, &target).unwrap();
        hidden.shuffle(&mut rng);
        let alt = net.posterior_with_order(&ev, &target, &hidden).unwrap();

        let mut shuffled = def;
        shuffled.nodes.shuffle(&mut rng);
        let other = BayesNet::new(shuffled)
            .unwrap()
            .posterior(&ev, &target)
            .unwrap();
        for i in 0..2 {
            assert!((base[i] - alt[i]).abs() < 1e-12);
            assert!((base[i] - other[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn bad_elimination_order_rejected() {
    let net = BayesNet::new(chain()).unwrap();
    assert!(matches!(
        net.posterior_with_order(&Evidence::new(), "b", &[]),
        Err(BbnError::BadEliminationOrder)
    ));
}

#[test]
fn evidence_matching_point_mass_changes_nothing() {
    // c is a deterministic copy of a, so observing b pins nothing but
    // learning c=t after P(a=t | c=t) = 1 leaves a unchanged.
    let def = NetworkDef {
        nodes: vec![
            node("a", &[], vec![vec![0.4, 0.6]]),
            node("c", &["a"], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            node("b", &["a"], vec![vec![0.7, 0.3], vec![0.1, 0.9]]),
        ],
        events: vec![],
    };
    let net = BayesNet::new(def).unwrap();
    let ev = Evidence::new().with("c", "t");
    let before = net.posterior(&ev, "a").unwrap();
    assert_eq!(before, vec![1.0, 0.0]);
    let after = net.posterior(&ev.clone().with("b", "f"), "a").unwrap();
    assert_eq!(after, before);
    let via_other = net.posterior(&Evidence::new().with("a", "t"), "c").unwrap();
    assert_eq!(via_other, vec![1.0, 0.0]);
}

#[test]
fn reference_network_loads() {
    let net: BayesNet<f64> = load_network(REFERENCE).unwrap();
    for name in [
        "shore_distance",
        "depth",
        "dcpa",
        "collision_course",
        "grounding_course",
    ] {
        assert!(net.node_index(name).is_some(), "{name}");
    }
    let events: Vec<&str> = net.event_names().collect();
    assert_eq!(events, vec!["collision", "grounding"]);
    let f32_net: BayesNet<f32> = load_network(REFERENCE).unwrap();
    assert_eq!(f32_net.len(), net.len());
}

#[test]
fn reference_posteriors_match_enumeration() {
    let net: BayesNet<f64> = load_network(REFERENCE).unwrap();
    let ev = Evidence::new()
        .with("shore_distance", "near")
        .with("depth", "medium")
        .with("dcpa", "small")
        .with("collision_course", "yes")
        .with("grounding_course", "no");
    for target in ["collision", "grounding"] {
        let p = net.posterior(&ev, target).unwrap();
        let q = net.enumerate_joint(&ev, target).unwrap();
        assert!((p[0] - q[0]).abs() < 1e-12);
    }
    // hand evaluation of the collision chain under this evidence:
    // encounter row (small, yes) = [0.858149, 0.130864, 0.010987]
    let enc = [0.858149, 0.130864, 0.010987];
    let occurs = [[0.8, 0.5], [0.15, 0.05], [2e-5, 2e-6]];
    let man = [0.05, 0.95];
    let mut expect = 0.0;
    for e in 0..3 {
        for m in 0..2 {
            expect += enc[e] * man[m] * occurs[e][m];
        }
    }
    let p = net.posterior(&ev, "collision").unwrap();
    assert!((p[0] - expect).abs() < 1e-12, "{} vs {}", p[0], expect);
}

#[test]
fn load_errors_carry_context() {
    match load_network::<f64>("{\n  \"nodes\": [ \n  oops ]}") {
        Err(BbnError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let mut def = chain();
    def.nodes[1].cpt.pop();
    let text = serde_json::to_string(&def).unwrap();
    match load_network::<f64>(&text) {
        Err(BbnError::Invalid(v)) => {
            assert_eq!(v.node, "b");
            assert_eq!(
                v.kind,
                ViolationKind::RowCount {
                    expected: 2,
                    found: 1
                }
            );
            assert!(v.to_string().contains("cpt"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn save_load_round_trip() {
    let net: BayesNet<f64> = load_network(REFERENCE).unwrap();
    let again: BayesNet<f64> = load_network(&net.to_json()).unwrap();
    assert_eq!(net.definition(), again.definition());
}
