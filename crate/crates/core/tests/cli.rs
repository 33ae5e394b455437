mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::domains_dir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_xadd-sdp"))
}

fn domain(name: &str) -> String {
    domains_dir().join(format!("{name}.dcmdp")).display().to_string()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn node_counts(stats: &Path) -> Vec<usize> {
    fs::read_to_string(stats)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn solve_writes_stats_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.csv");
    let o = run(&[
        "solve", "--domain", &domain("knapsack"), "--iterations", "3",
        "--stats", stats.to_str().unwrap(),
        "--dot", dir.path().join("dot").to_str().unwrap(),
        "--case", dir.path().join("case").to_str().unwrap(),
    ]);
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("iter ")).count(), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("converged at iteration 3"));
    let text = fs::read_to_string(&stats).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,nodes,leaves,decisions,time_ms"));
    let iters: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(iters, ["1", "2", "3"]);
    for h in 0..=3 {
        let dot = fs::read_to_string(dir.path().join(format!("dot/V_{h}.dot"))).unwrap();
        assert!(dot.starts_with("digraph"));
        let case = fs::read_to_string(dir.path().join(format!("case/V_{h}.case"))).unwrap();
        assert!(!case.trim().is_empty());
    }
    assert_eq!(fs::read_to_string(dir.path().join("case/V_0.case")).unwrap().trim(), "true : 0");
}

#[test]
fn zero_iterations_report_the_initial_value() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("s.csv");
    stdout(&run(&["solve", &domain("knapsack"), "--iterations", "0", "--stats", stats.to_str().unwrap()]));
    let text = fs::read_to_string(&stats).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("0,1,1,0,"), "{}", rows[0]);
}

#[test]
fn eval_prints_value_and_action() {
    let out = stdout(&run(&["eval", "--domain", &domain("knapsack"), "--state", "k=0,x1=30,x2=40", "--horizon", "2"]));
    assert_eq!(out, "horizon: 2\nvalue: 70\ndecimal: 70\naction: move_1\n");
    let out = stdout(&run(&["eval", "--domain", &domain("knapsack"), "--state", "k=0,x1=60,x2=70", "--horizon", "2"]));
    assert!(out.contains("value: 70\n") && out.contains("action: move_2\n"), "{out}");
    let out = stdout(&run(&["eval", "--domain", &domain("knapsack"), "--state", "k=0,x1=1/3,x2=0", "--horizon", "0"]));
    assert!(out.contains("value: 0\n") && out.contains("action: -\n"), "{out}");
}

#[test]
fn eval_reports_errors() {
    for state in ["k=0,x1=30", "k=0,x1=30,x2=400", "k=0,x1=30,x2=4,q=1", "k=zero,x1=1,x2=2"] {
        let o = run(&["eval", "--domain", &domain("knapsack"), "--state", state, "--horizon", "2"]);
        assert!(!o.status.success(), "{state}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "), "{state}");
    }
    let o = run(&["eval", "--domain", "/nonexistent.dcmdp", "--state", "k=0"]);
    assert!(!o.status.success());
}

#[test]
fn parse_errors_name_the_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.dcmdp");
    fs::write(&path, "domain d\ncvar x [0, 1]\naction a {\n  reward = y\n}\ndiscount 1\n").unwrap();
    let o = run(&["solve", "--domain", path.to_str().unwrap(), "--iterations", "1"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.dcmdp:4:12"), "{err}");
}

#[test]
fn grid_has_res_squared_rows() {
    let out = stdout(&run(&[
        "grid", "--domain", &domain("knapsack"), "--vars", "x1,x2", "--fix", "k=0", "--res", "2", "--horizon", "1",
    ]));
    assert_eq!(out, "x1,x2,value\n0,0,0\n0,100,100\n100,0,100\n100,100,100\n");
}

#[test]
fn grid_rejects_bad_requests() {
    let knapsack = domain("knapsack");
    for extra in [
        vec!["--vars", "x1", "--fix", "k=0"],
        vec!["--vars", "x1,x2"],
        vec!["--vars", "x1,x2", "--fix", "k=0", "--res", "1"],
        vec!["--vars", "x1,x1", "--fix", "k=0,x2=0"],
    ] {
        let mut args = vec!["grid", "--domain", knapsack.as_str(), "--horizon", "1"];
        args.extend(extra.iter().copied());
        let o = run(&args);
        assert!(!o.status.success(), "{extra:?}");
    }
}

#[test]
fn rover_grid_peaks_at_the_picture_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    stdout(&run(&[
        "grid", "--domain", &domain("rover_nonlinear_k1"), "--vars", "x,y", "--fix", "h=false",
        "--horizon", "1", "--out", out.to_str().unwrap(),
    ]));
    let text = fs::read_to_string(&out).unwrap();
    let row = text.lines().find(|l| l.starts_with("1,1,")).expect("grid point (1, 1)");
    assert_eq!(row, "1,1,2");
    let origin_free = text.lines().skip(1).filter(|l| l.ends_with(",0")).count();
    assert!(origin_free > 0);
}

#[test]
fn output_is_deterministic() {
    let args = ["grid", "--domain", &domain("rover_nonlinear_k1"), "--vars", "x,y", "--fix", "h=false", "--horizon", "2", "--res", "20"];
    let a = stdout(&run(&args));
    let b = stdout(&run(&args));
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    let mut cases = Vec::new();
    for i in 0..2 {
        let d = dir.path().join(format!("run{i}"));
        stdout(&run(&["solve", &domain("rover_linear_k2"), "--iterations", "3", "--case", d.to_str().unwrap()]));
        cases.push(fs::read_to_string(d.join("V_3.case")).unwrap());
    }
    assert_eq!(cases[0], cases[1]);
}

#[test]
fn pruned_diagrams_are_no_larger() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("plain.csv"), dir.path().join("pruned.csv"));
    stdout(&run(&["solve", &domain("rover_linear_k2"), "--iterations", "4", "--stats", a.to_str().unwrap()]));
    stdout(&run(&["solve", &domain("rover_linear_k2"), "--iterations", "4", "--prune", "--stats", b.to_str().unwrap()]));
    let (plain, pruned) = (node_counts(&a), node_counts(&b));
    assert_eq!(plain.len(), 4);
    for (p, q) in plain.iter().zip(&pruned) {
        assert!(q <= p, "{plain:?} vs {pruned:?}");
    }
}

#[test]
fn discount_override_is_checked() {
    let o = run(&["eval", &domain("knapsack"), "--state", "k=0,x1=30,x2=40", "--horizon", "2", "--discount", "1/2"]);
    assert!(stdout(&o).contains("value: 55\n"));
    let o = run(&["eval", &domain("knapsack"), "--state", "k=0,x1=30,x2=40", "--discount", "3/2"]);
    assert!(!o.status.success());
}
