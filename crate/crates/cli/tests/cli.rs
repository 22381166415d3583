use std::path::Path;
use std::process::Command;

fn riskplan(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_riskplan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_dir(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn plan_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = riskplan(&[
        "plan",
        "--iterations",
        "1500",
        "--alpha",
        "0.5",
        "--seed",
        "3",
        "--out",
        out_dir(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let tree = std::fs::read_to_string(dir.path().join("tree.csv")).unwrap();
    assert!(tree.starts_with("id,north,east,parent,D,B,J\n"));
    assert!(dir.path().join("path.csv").exists());
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("s,north,east\n"));
}

#[test]
fn plan_svg() {
    let dir = tempfile::tempdir().unwrap();
    let o = riskplan(&[
        "plan",
        "--iterations",
        "800",
        "--format",
        "svg",
        "--out",
        out_dir(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("plan.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn no_path_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = r#"{
        "workspace": {"min": {"north": 0, "east": 0}, "max": {"north": 50, "east": 50}},
        "depth": {"uniform": 30},
        "obstacles": [{"shape": {"type": "polygon", "vertices": [
            {"north": 24, "east": 0}, {"north": 26, "east": 0}, {"north": 26, "east": 50}, {"north": 24, "east": 50}]}}],
        "start": {"north": 5, "east": 25},
        "goal": {"north": 45, "east": 25}
    }"#;
    let path = dir.path().join("walled.json");
    std::fs::write(&path, scenario).unwrap();
    let o = riskplan(&[
        "plan",
        "--scenario",
        path.to_str().unwrap(),
        "--iterations",
        "200",
        "--out",
        out_dir(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    let o = riskplan(&["plan", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    let o = riskplan(&["plan", "--alpha", "1.5", "--out", out_dir(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = riskplan(&["plan", "--format", "png"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_and_riskmap() {
    let dir = tempfile::tempdir().unwrap();
    let o = riskplan(&[
        "sweep",
        "--alphas",
        "0.2,0.8",
        "--trials",
        "2",
        "--iterations",
        "600",
        "--out",
        out_dir(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let stats = std::fs::read_to_string(dir.path().join("stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 3);
    assert!(stats.starts_with("alpha,D_mean,D_std,H_mean,H_std,H_max,failures\n"));
    assert!(dir.path().join("boxplot.csv").exists() && dir.path().join("quartiles.csv").exists());
    let o = riskplan(&[
        "riskmap",
        "--resolution",
        "4",
        "--format",
        "svg",
        "--out",
        out_dir(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("riskmap.svg").exists());
}

#[test]
fn simulate_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = riskplan(&[
        "simulate",
        "--iterations",
        "800",
        "--alpha",
        "0.2",
        "--replan-period",
        "10",
        "--out",
        out_dir(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("step,time,north,east,hazard,epoch,in_collision"));
    let replans = std::fs::read_to_string(dir.path().join("replans.csv")).unwrap();
    assert!(replans.lines().nth(1).unwrap().contains(",initial,"));
}
