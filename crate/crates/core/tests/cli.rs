use std::path::Path;
use std::process::{Command, Output};

use irl_core::baselines::{max_margin_train, policy_feature_expectation, BaselineConfig};
use irl_core::expert::read_trajectories_csv;
use irl_core::harness::expert_target;
use irl_core::io::load_environment;

fn irl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irl")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = irl(dir, args);
    assert!(out.status.success(), "irl {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn gridworld(dir: &Path) {
    ok(dir, &["gen-gridworld", "--size", "10", "--seed", "7", "--out", "grid.json"]);
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn generated_model_has_truth_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    gridworld(dir.path());
    let env = load_environment(&dir.path().join("grid.json")).unwrap();
    assert_eq!(env.mdp.n_states(), 100);
    assert_eq!(env.features.dim(), 5);
}

#[test]
fn natural_training_lowers_the_loss() {
    let dir = tempfile::tempdir().unwrap();
    gridworld(dir.path());
    let out = ok(dir.path(), &["train", "--model", "grid.json", "--method", "natural", "--iters", "20", "--out", "trace.csv"]);
    let rows = csv_rows(&dir.path().join("trace.csv"));
    assert_eq!(rows.len(), 21);
    let loss = |i: usize| rows[i][1].parse::<f64>().unwrap();
    assert!(loss(20) < loss(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("loss_greedy"));
}

#[test]
fn evaluate_at_the_true_reward() {
    let dir = tempfile::tempdir().unwrap();
    gridworld(dir.path());
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("grid.truth.json")).unwrap()).unwrap();
    std::fs::write(dir.path().join("theta.json"), truth["theta_star"].to_string()).unwrap();
    let out = ok(dir.path(), &["evaluate", "--model", "grid.json", "--theta-file", "theta.json"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("loss_greedy,loss_boltzmann,disagreement"));
    let values: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(values[0], 0.0);
    assert_eq!(values[2], 0.0);
    assert!(values[1] > 0.0);
}

#[test]
fn max_margin_choice_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    gridworld(dir.path());
    let out = ok(dir.path(), &["train", "--model", "grid.json", "--method", "maxmargin", "--out", "mm.csv"]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let reported: usize = stderr
        .lines()
        .find_map(|l| l.strip_prefix("best candidate "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();

    let env = load_environment(&dir.path().join("grid.json")).unwrap();
    let mu_e = policy_feature_expectation(&env.mdp, &env.features, &env.truth.optimal_policy).unwrap();
    let mut res = max_margin_train(&env.mdp, &env.features, &mu_e, &BaselineConfig::default()).unwrap();
    let best = res.select_best(&expert_target(&env).unwrap()).unwrap();
    assert_eq!(reported, best);
    assert_eq!(csv_rows(&dir.path().join("mm.csv")).len(), res.candidates.len());
}

#[test]
fn simulated_demonstrations_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    gridworld(dir.path());
    ok(dir.path(), &["simulate-expert", "--model", "grid.json", "--episodes", "6", "--horizon", "40", "--out", "d.csv"]);
    let trajs = read_trajectories_csv(std::fs::File::open(dir.path().join("d.csv")).unwrap()).unwrap();
    assert_eq!(trajs.len(), 6);
    assert!(trajs.iter().all(|t| t.len() == 41));
}

#[test]
fn sailing_episodes_stop_at_the_goal() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-sailing", "--out", "lake.json"]);
    ok(dir.path(), &["simulate-expert", "--model", "lake.json", "--episodes", "8", "--horizon", "100", "--out", "d.csv"]);
    let env = load_environment(&dir.path().join("lake.json")).unwrap();
    let trajs = read_trajectories_csv(std::fs::File::open(dir.path().join("d.csv")).unwrap()).unwrap();
    assert!(trajs.iter().all(|t| t.len() < 100 && t.steps.iter().all(|&(x, _)| !env.terminal[x])));
}

#[test]
fn sweep_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["sweep", "--repetitions", "2", "--iters", "5", "--grid", "1,2", "--method", "natural,projection", "--out", "s.csv"],
    );
    assert_eq!(csv_rows(&dir.path().join("s.csv")).len(), 8);
    assert_eq!(csv_rows(&dir.path().join("s.summary.csv")).len(), 4);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    gridworld(dir.path());
    for args in [
        &["evaluate", "--model", "grid.json", "--theta", "1,2"][..],
        &["train", "--model", "missing.json", "--out", "t.csv"],
        &["train", "--model", "grid.json", "--method", "newton", "--out", "t.csv"],
        &["gen-gridworld", "--size", "1", "--out", "bad.json"],
    ] {
        let out = irl(dir.path(), args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty(), "{args:?} printed nothing");
    }
}
