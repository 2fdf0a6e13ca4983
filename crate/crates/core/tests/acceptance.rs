//! Acceptance criteria. Runs as a plain binary so that every criterion prints
//! its own PASS/FAIL line. Pass criterion numbers as arguments to run a subset:
//! `cargo test --test acceptance -- 3 7`.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use irl_core::baselines::{max_margin_direction, projection_train, scaling_sensitivity_demo, BaselineConfig};
use irl_core::env::{make_gridworld, GridworldSpec};
use irl_core::gradient::{loss_gradient_with, q_star_gradient};
use irl_core::harness::{
    derive_seed, prepare_run, run_experiment, sweep_samples, EvalRecord, ExperimentConfig,
    ExpertMode, MethodName, Treatment, TAG_ENV,
};
use irl_core::mdp::{greedy_policy, policy_backup_vec, value_iteration};
use irl_core::policy_map::boltzmann;
use irl_core::{
    train_irl, FeatureMap, LinearRewardModel, LossTarget, Method, OptimizerConfig, SolverConfig, TabularMdp, VectorQTable,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

type Criterion = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(usize, &str, Duration, Criterion); 10] = [
        (1, "gradient matches central differences", secs(10), gradient_oracle),
        (2, "gradient fixed-point residual", secs(60), gradient_residual),
        (3, "natural gradient is invariant to feature transforms", secs(120), transform_covariance),
        (4, "gridworld recovery", secs(300), gridworld_recovery),
        (5, "loss falls with more demonstrations", secs(900), sample_size_trend),
        (6, "perturbed features: natural beats max-margin", secs(1200), perturbation_ordering),
        (7, "feature scaling breaks the performance ratio", secs(60), scaling_demo),
        (8, "sailing", secs(1800), sailing),
        (9, "baseline sanity", secs(300), baseline_sanity),
        (10, "cli determinism", secs(600), cli_determinism),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let mut out = run();
        let took = start.elapsed();
        if took > budget {
            out.pass = false;
            out.detail += &format!("; over the {}s budget", budget.as_secs());
        }
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict}  {name}: {} ({:.1}s)", out.detail, took.as_secs_f64());
        failed += usize::from(!out.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn tight() -> SolverConfig {
    SolverConfig::new(1e-13, 1_000_000).unwrap()
}

struct Instance {
    mdp: TabularMdp,
    features: FeatureMap,
    theta: Vec<f64>,
    target: LossTarget,
    beta: f64,
}

fn random_instance(i: u64) -> Instance {
    let ns = 4 + (i % 3) as usize;
    let na = 2 + ((i / 3) % 2) as usize;
    let beta = if i % 2 == 0 { 1.0 } else { 10.0 };
    let mdp = TabularMdp::random(ns, na, 0.8, 100 + i).unwrap();
    let features = VectorQTable::random(ns, na, 3, 200 + i);
    let mut rng = ChaCha8Rng::seed_from_u64(300 + i);
    let mut draw = || (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect::<Vec<_>>();
    let theta = draw();
    let theta_e = draw();
    let q_e = value_iteration(&mdp, &features.dot(&theta_e), 1e-13, 1_000_000).unwrap().value;
    let expert = boltzmann(&q_e, beta).unwrap();
    let target = LossTarget::exact(&mdp, expert).unwrap();
    Instance { mdp, features, theta, target, beta }
}

/// Loss computed from dense arrays with no library solver involved: value
/// iteration run to its floating-point fixed point, softmax, weighted squares.
fn oracle_loss(inst: &Instance, theta: &[f64]) -> f64 {
    let p = inst.mdp.dense_transitions();
    let phi = inst.features.to_nested();
    let (ns, na, g) = (inst.mdp.n_states(), inst.mdp.n_actions(), inst.mdp.gamma());
    let r: Vec<Vec<f64>> =
        (0..ns).map(|x| (0..na).map(|a| phi[x][a].iter().zip(theta).map(|(f, t)| f * t).sum()).collect()).collect();
    let mut q = vec![vec![0.0; na]; ns];
    for _ in 0..5000 {
        let v: Vec<f64> = q.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        let next: Vec<Vec<f64>> = (0..ns)
            .map(|x| (0..na).map(|a| r[x][a] + g * p[x][a].iter().zip(&v).map(|(pp, vv)| pp * vv).sum::<f64>()).collect())
            .collect();
        let done = next == q;
        q = next;
        if done {
            break;
        }
    }
    let mut total = 0.0;
    for x in 0..ns {
        let m = q[x].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = q[x].iter().map(|v| (inst.beta * (v - m)).exp()).collect();
        let z: f64 = e.iter().sum();
        let sq: f64 = (0..na).map(|a| (e[a] / z - inst.target.expert_policy().prob(x, a)).powi(2)).sum();
        total += inst.target.weights().as_slice()[x] * sq;
    }
    total
}

fn gradient_oracle() -> Outcome {
    let delta = 1e-6;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for i in 0..20 {
        let inst = random_instance(i);
        let model = LinearRewardModel::new(inst.features.clone(), inst.theta.clone()).unwrap();
        let report = loss_gradient_with(&inst.mdp, &model, &inst.target, inst.beta, &tight()).unwrap();
        for k in 0..3 {
            let g = report.euclid_grad[k];
            if g.abs() <= 1e-8 {
                continue;
            }
            let (mut up, mut down) = (inst.theta.clone(), inst.theta.clone());
            up[k] += delta;
            down[k] -= delta;
            let fd = (oracle_loss(&inst, &up) - oracle_loss(&inst, &down)) / (2.0 * delta);
            worst = worst.max((fd - g).abs() / g.abs());
            checked += 1;
        }
    }
    Outcome::new(worst <= 1e-4, format!("worst relative error {worst:.2e} over {checked} components"))
}

fn gradient_residual() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let inst = random_instance(i);
        let model = LinearRewardModel::new(inst.features.clone(), inst.theta.clone()).unwrap();
        let q = value_iteration(&inst.mdp, &model.reward(), 1e-13, 1_000_000).unwrap().value;
        let grad = q_star_gradient(&inst.mdp, &model, &q).unwrap();
        let applied = policy_backup_vec(&inst.mdp, &inst.features, &greedy_policy(&q), &grad);
        worst = worst.max(applied.sup_distance(&grad));
    }
    Outcome::new(worst <= 1e-8, format!("worst residual {worst:.2e} over 20 instances"))
}

fn exact_gridworld() -> ExperimentConfig {
    ExperimentConfig { expert: ExpertMode::Exact, step_size: 10.0, ..Default::default() }
}

fn transform_covariance() -> Outcome {
    let base = exact_gridworld();
    let transformed = ExperimentConfig { treatment: Treatment::Transform { seed: None }, ..base.clone() };
    let (a, b) = (prepare_run(&base, 0).unwrap(), prepare_run(&transformed, 0).unwrap());
    let run = |ctx: &irl_core::harness::RunContext, method: Method| {
        let opt = OptimizerConfig::new(method, base.step_size, base.iters, ctx.learner_features.dim());
        train_irl(&ctx.env.mdp, &ctx.learner_features, &ctx.train_target, base.beta, &opt).unwrap().losses()
    };
    let max_gap = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let natural = max_gap(&run(&a, Method::Natural), &run(&b, Method::Natural));
    let plain = max_gap(&run(&a, Method::Plain), &run(&b, Method::Plain));
    Outcome::new(
        natural <= 1e-6 && plain > 1e-6,
        format!("natural max gap {natural:.2e}, plain max gap {plain:.2e}"),
    )
}

fn losses(records: &[EvalRecord], method: MethodName) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.method == method)
        .map(|r| r.loss_greedy.unwrap_or_else(|| panic!("run {} failed: {}", r.run, r.error)))
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn gridworld_recovery() -> Outcome {
    let mut best = (0, 0.0);
    let mut report = Vec::new();
    for step in [0.1, 1.0, 10.0, 100.0] {
        let cfg = ExperimentConfig { step_size: step, ..exact_gridworld() };
        let hits = losses(&run_experiment(&cfg).unwrap(), MethodName::Natural).iter().filter(|&&l| l <= 0.02).count();
        report.push(format!("step {step}: {hits}/10"));
        if hits > best.0 {
            best = (hits, step);
        }
    }
    Outcome::new(best.0 >= 8, format!("{} (best step {})", report.join(", "), best.1))
}

fn sample_size_trend() -> Outcome {
    let cfg = ExperimentConfig { step_size: 10.0, ..Default::default() };
    let (_, summary) = sweep_samples(&cfg, &[1, 2, 5, 10]).unwrap();
    let means: Vec<f64> = summary.iter().map(|r| r.mean_loss).collect();
    let inversions = means.windows(2).filter(|w| w[1] > w[0]).count();
    let shown: Vec<String> = summary.iter().map(|r| format!("m={}: {:.4}", r.samples, r.mean_loss)).collect();
    Outcome::new(means.len() == 4 && inversions <= 1, format!("{}; {inversions} inversions", shown.join(", ")))
}

fn perturbation_ordering() -> Outcome {
    let cfg = ExperimentConfig {
        methods: vec![MethodName::Natural, MethodName::MaxMargin],
        treatment: Treatment::Perturb { seed: None },
        step_size: 10.0,
        ..Default::default()
    };
    let records = run_experiment(&cfg).unwrap();
    let nat = median(losses(&records, MethodName::Natural));
    let mm = median(losses(&records, MethodName::MaxMargin));
    Outcome::new(nat < mm, format!("median natural {nat:.4}, median max-margin {mm:.4}"))
}

fn scaling_demo() -> Outcome {
    let (epsilon, phi_e2) = (0.1, 1.0);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scaling.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_irl"))
        .args(["demo-scaling", "--epsilon", "0.1", "--phi-e2", "1", "--ratios", "0.1,1,5,9.9,10.1,20,100"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    if !status.success() {
        return Outcome::new(false, "demo-scaling exited with an error");
    }
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (l1, l2, ratio) = (col("lambda1"), col("lambda2"), col("ratio"));
    let mut worst: f64 = 0.0;
    let mut sign_ok = true;
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let get = |i: usize| rec[i].parse::<f64>().unwrap();
        let r = get(l1) / get(l2);
        let expected = 1.0 - r * epsilon / phi_e2;
        worst = worst.max((get(ratio) - expected).abs() / expected.abs().max(1.0));
        if r > phi_e2 / epsilon {
            sign_ok &= get(ratio) < 0.0;
        }
        rows += 1;
    }
    let lib = scaling_sensitivity_demo(epsilon, phi_e2, &[(50.0, 1.0)]).unwrap();
    sign_ok &= lib[0].ratio < 0.0;
    Outcome::new(
        rows == 7 && worst <= 1e-14 && sign_ok,
        format!("{rows} rows, worst deviation from 1 - (l1/l2) eps/phi {worst:.1e}, negative past phi/eps: {sign_ok}"),
    )
}

fn sailing_disagreements(episodes: usize) -> Vec<f64> {
    let cfg = ExperimentConfig {
        expert: ExpertMode::Sampled { episodes, horizon: 100 },
        step_size: 1.0,
        ..ExperimentConfig::sailing()
    };
    run_experiment(&cfg)
        .unwrap()
        .iter()
        .map(|r| r.disagreement.unwrap_or_else(|| panic!("run {} failed: {}", r.run, r.error)))
        .collect()
}

fn sailing() -> Outcome {
    let many = sailing_disagreements(32);
    let few = sailing_disagreements(2);
    let hits = many.iter().filter(|&&d| d <= 0.25).count();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m32, m2) = (mean(&many), mean(&few));
    Outcome::new(
        many.len() == 5 && hits >= 3 && m32 < m2,
        format!("32 episodes: {hits}/5 within 0.25, mean {m32:.3}; 2 episodes: mean {m2:.3}"),
    )
}

/// Best value of `min_j θᵀ(μ_E − μ_j)` over `n` unit directions, or zero.
fn grid_margin(mu_e: &[f64], mus: &[Vec<f64>], n: usize) -> f64 {
    let mut best: f64 = 0.0;
    for k in 0..n {
        let a = std::f64::consts::TAU * k as f64 / n as f64;
        let (c, s) = (a.cos(), a.sin());
        let v = mus.iter().map(|m| c * (mu_e[0] - m[0]) + s * (mu_e[1] - m[1])).fold(f64::INFINITY, f64::min);
        best = best.max(v);
    }
    best
}

fn baseline_sanity() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let spec = GridworldSpec { seed: derive_seed(0, 0, TAG_ENV), ..Default::default() };
    let env = make_gridworld(&spec).unwrap();
    let mu_e = irl_core::baselines::policy_feature_expectation(&env.mdp, &env.features, &env.truth.optimal_policy)
        .unwrap();
    let res = projection_train(&env.mdp, &env.features, &mu_e, &BaselineConfig::default()).unwrap();
    let monotone = res.margins.windows(2).all(|w| w[1] <= w[0]);
    let last = *res.margins.last().unwrap();
    pass &= monotone && last <= 1e-3;
    notes.push(format!("projection: {} iterations, final distance {last:.2e}, monotone {monotone}", res.margins.len()));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let mut pt = || vec![4.0 * rng.random::<f64>() - 2.0, 4.0 * rng.random::<f64>() - 2.0];
        let mu_e = pt();
        let mus: Vec<Vec<f64>> = (0..1 + trial % 5).map(|_| pt()).collect();
        let (theta, margin) = max_margin_direction(&mu_e, &mus).unwrap();
        let oracle = grid_margin(&mu_e, &mus, 1_000_000);
        let achieved =
            mus.iter().map(|m| theta[0] * (mu_e[0] - m[0]) + theta[1] * (mu_e[1] - m[1])).fold(f64::INFINITY, f64::min);
        worst = worst.max((margin - oracle).abs()).max((achieved - margin).abs());
    }
    pass &= worst <= 1e-3;
    notes.push(format!("max-margin inner solver vs grid search: worst gap {worst:.2e} over 20 instances"));
    Outcome::new(pass, notes.join("; "))
}

fn irl(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_irl")).current_dir(dir).args(args).output().unwrap();
    assert!(out.status.success(), "irl {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

/// Every regular file in `dir`, sorted by name, with its contents.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn cli_session(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let config = r#"{
  "environment": {"kind": "file", "path": "grid.json"},
  "expert": {"kind": "sampled", "episodes": 3, "horizon": 30},
  "methods": ["natural", "plain", "rprop", "maxmargin", "projection"],
  "iters": 15,
  "repetitions": 3,
  "seed": 11
}
"#;
    std::fs::write(dir.join("experiment.json"), config).unwrap();
    let mut stdout = Vec::new();
    let steps: &[&[&str]] = &[
        &["gen-gridworld", "--size", "5", "--features", "3", "--seed", "7", "--out", "grid.json"],
        &["gen-sailing", "--size", "3", "--out", "lake.json"],
        &["simulate-expert", "--model", "grid.json", "--episodes", "4", "--horizon", "25", "--seed", "3", "--out", "demos.csv"],
        &["train", "--model", "grid.json", "--trajectories", "demos.csv", "--iters", "20", "--out", "trace.csv", "--theta-out", "theta.json"],
        &["train", "--model", "grid.json", "--episodes", "3", "--method", "rprop", "--treatment", "perturb", "--iters", "20", "--out", "rprop.csv"],
        &["train", "--model", "grid.json", "--method", "projection", "--out", "projection.csv"],
        &["train", "--model", "lake.json", "--episodes", "4", "--iters", "10", "--out", "lake_trace.csv"],
        &["evaluate", "--model", "grid.json", "--theta-file", "theta.json", "--out", "eval.csv"],
        &["evaluate", "--model", "grid.json", "--theta", "0.5,-0.25,1"],
        &["run", "--config", "experiment.json", "--out", "run.csv"],
        &["run", "--config", "experiment.json", "--treatment", "transform", "--method", "natural"],
        &["sweep", "--config", "experiment.json", "--grid", "1,3", "--out", "sweep.csv"],
        &["demo-scaling", "--out", "scaling.csv"],
        &["demo-scaling", "--epsilon", "0.3", "--ratios", "1,2"],
    ];
    for args in steps {
        stdout.extend(irl(dir, args));
    }
    let mut files = snapshot(dir);
    files.push(("<stdout>".into(), stdout));
    files
}

fn cli_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (first, second) = (cli_session(a.path()), cli_session(b.path()));
    let differing: Vec<&str> =
        first.iter().zip(&second).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    let same_set = first.len() == second.len() && first.iter().zip(&second).all(|(x, y)| x.0 == y.0);
    Outcome::new(
        same_set && differing.is_empty(),
        format!("{} outputs compared, differing: {:?}", first.len(), differing),
    )
}
