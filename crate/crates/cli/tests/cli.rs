use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_surfdeform"));
    c.env_remove("SURFDEFORM_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn build(dir: &TempDir, d: usize) -> PathBuf {
    let path = dir.path().join(format!("pristine-d{d}.json"));
    let o = run(&["build", "--d", &d.to_string(), "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn distance_of_a_pristine_patch() {
    let dir = TempDir::new().unwrap();
    let p = build(&dir, 5);
    let o = run(&["distance", s(&p)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "dX=5, dZ=5");
}

#[test]
fn layout_worked_example() {
    let o = run(&["layout", "--d", "27", "--rho", "3.846e-3", "--T", "0.025", "--D", "4", "--alpha-block", "0.01"]);
    assert_eq!(code(&o), 0);
    let line = stdout(&o);
    assert!(line.starts_with("delta_d=4, p_block=0.0089"), "{line}");
}

#[test]
fn center_defect_removal_and_baseline() {
    let dir = TempDir::new().unwrap();
    let p = build(&dir, 5);
    let out = dir.path().join("deformed.json");
    let o = run(&["deform", s(&p), "--defects", "5,5", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "dX=3, dZ=5");
    let o = run(&["distance", s(&out)]);
    assert_eq!(stdout(&o).trim(), "dX=3, dZ=5");
    let o = run(&["deform", s(&p), "--defects", "5,5", "--baseline"]);
    assert_eq!(stdout(&o).trim(), "dX=3, dZ=3");
    let o = run(&["deform", s(&p), "--defects", "5,5", "--target", "5"]);
    assert_eq!(stdout(&o).trim(), "dX=5, dZ=5");
}

#[test]
fn render_is_byte_stable() {
    let dir = TempDir::new().unwrap();
    let p = build(&dir, 3);
    let a = dir.path().join("a.svg");
    let b = dir.path().join("b.svg");
    for f in [&a, &b] {
        assert_eq!(code(&run(&["render", s(&p), "--svg", s(f)])), 0);
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    assert!(String::from_utf8(x).unwrap().starts_with("<svg"));
}

#[test]
fn verify_passes_on_a_removal() {
    let dir = TempDir::new().unwrap();
    let p = build(&dir, 3);
    let o = run(&["verify", s(&p), "--instruction", "DataQ_RM Q(2,2)"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("PASS"));
}

#[test]
fn malformed_input_exits_1() {
    let dir = TempDir::new().unwrap();
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{\"format\": 1}").unwrap();
    assert_eq!(code(&run(&["distance", s(&junk)])), 1);
    let p = build(&dir, 3);
    assert_eq!(code(&run(&["deform", s(&p), "--defects", "1;2"])), 1);
}

#[test]
fn infeasible_budget_exits_2() {
    let o = run(&["layout", "--d", "27", "--alpha-block", "0.01", "--max-delta-d", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn broken_invariants_exit_3() {
    let dir = TempDir::new().unwrap();
    let p = build(&dir, 3);
    let mut j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    j["stab_set"].as_array_mut().unwrap().remove(0);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, j.to_string()).unwrap();
    assert_eq!(code(&run(&["distance", s(&bad)])), 3);
}

#[test]
fn seeds_reproduce() {
    let dir = TempDir::new().unwrap();
    let p = build(&dir, 3);
    let args = ["mc", "--patch", s(&p), "--p", "0.05", "--trials", "3000"];
    let with_flag = |seed: &str| {
        let mut a = args.to_vec();
        a.extend(["--seed", seed]);
        stdout(&run(&a))
    };
    let first = with_flag("7");
    assert_eq!(first, with_flag("7"));
    let from_env = bin().args(args).env("SURFDEFORM_SEED", "7").output().unwrap();
    assert_eq!(stdout(&from_env), first);
    assert!(first.starts_with("trials,failures,rate,lo,hi\n3000,"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let p = build(&dir, 3);
    let args = ["mc", "--patch", s(&p), "--p", "0.05", "--trials", "5000", "--seed", "3"];
    let one = stdout(&bin().args(args).arg("--jobs").arg("1").output().unwrap());
    let four = stdout(&bin().args(args).arg("--jobs").arg("4").output().unwrap());
    assert_eq!(one, four);
}
