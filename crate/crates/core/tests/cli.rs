use std::path::Path;
use std::process::{Command, Output};

fn bandit_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandit-lab"))
        .args(args)
        .output()
        .expect("spawn bandit-lab")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn run_writes_traces_summary_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = bandit_lab(&[
        "run", "--algo", "linucb", "--env", "synthetic-linear", "--rounds", "50", "--seeds", "1,2",
        "--out", out.to_str().unwrap(), "--set", "alpha=0.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["trace_linucb_1.csv", "trace_linucb_2.csv", "summary.csv", "curves.csv", "plot_curves.py"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert_eq!(rows(&out.join("trace_linucb_1.csv")), 50);
    assert_eq!(rows(&out.join("summary.csv")), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("linucb: mean_final_regret="));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cfg");
    let conf = dir.path().join("exp.conf");
    std::fs::write(
        &conf,
        format!(
            "# experiment\nalgo = random\nenv = synthetic-cosine\nrounds = 40\nseeds = 3\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = bandit_lab(&["run", "--config", conf.to_str().unwrap(), "--rounds", "25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(rows(&out.join("trace_random_3.csv")), 25);
}

#[test]
fn grid_reports_best_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid");
    let o = bandit_lab(&[
        "grid", "--algo", "linucb", "--env", "synthetic-linear", "--rounds", "60", "--seeds", "0,1",
        "--grid", "alpha=0.1,1", "--grid", "lambda=0.5,1", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(rows(&out.join("grid.csv")), 4);
    let best = std::fs::read_to_string(out.join("best.conf")).unwrap();
    assert!(best.contains("alpha = ") && best.contains("lambda = "));
    assert!(String::from_utf8_lossy(&o.stdout).contains("runs=8"));
}

#[test]
fn unknown_hyperparameter_is_rejected_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad");
    let o = bandit_lab(&[
        "run", "--algo", "eenet", "--env", "synthetic-linear", "--rounds", "10",
        "--out", out.to_str().unwrap(), "--set", "gamma=1",
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: unknown-hyperparameter"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unreadable_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "a,b,label\n1,2,0\n1,x,1\n").unwrap();
    let env = format!("csv:{}", data.display());
    let out = dir.path().join("o");
    let o = bandit_lab(&["run", "--algo", "random", "--env", &env, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_leaves_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    let o = bandit_lab(&[
        "run", "--algo", "random", "--env", "synthetic-linear", "--rounds", "5", "--seeds", "0",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: "));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}
