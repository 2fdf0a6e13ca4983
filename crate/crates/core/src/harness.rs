//! Experiment configuration, the per-repetition pipeline and CSV reporting.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{expert_feature_expectation, max_margin_train, policy_feature_expectation, projection_train, BaselineConfig, BaselineResult};
use crate::env::{make_gridworld, make_sailing, perturb_features, random_transform, transform_features, Environment, GridworldSpec, SailingSpec};
use crate::error::{Error, Result};
use crate::expert::{policy_disagreement, sample_episodes, ExpertDataset};
use crate::gradient::{loss, LossTarget};
use crate::io::load_environment;
use crate::mdp::{greedy_policy, occupancy_weights, value_iteration, FeatureMap, SolverConfig, StateWeights, StochasticPolicy};
use crate::optimizers::{train_irl, Method, OptimizerConfig, TrainTrace};
use crate::policy_map::boltzmann;

/// Any method the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Plain,
    Natural,
    Rprop,
    MaxMargin,
    Projection,
}

impl MethodName {
    pub const ALL: [MethodName; 5] =
        [MethodName::Plain, MethodName::Natural, MethodName::Rprop, MethodName::MaxMargin, MethodName::Projection];

    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::Plain => "plain",
            MethodName::Natural => "natural",
            MethodName::Rprop => "rprop",
            MethodName::MaxMargin => "maxmargin",
            MethodName::Projection => "projection",
        }
    }

    pub fn gradient_method(&self) -> Option<Method> {
        match self {
            MethodName::Plain => Some(Method::Plain),
            MethodName::Natural => Some(Method::Natural),
            MethodName::Rprop => Some(Method::Rprop),
            _ => None,
        }
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnvironmentSource {
    Gridworld(GridworldSpec),
    Sailing(SailingSpec),
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExpertMode {
    /// The expert's exact policy weighted by its exact occupancy over
    /// non-terminal states.
    Exact,
    Sampled { episodes: usize, horizon: usize },
}

/// What the learner sees in place of the true features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Treatment {
    #[default]
    None,
    Transform {
        #[serde(default)]
        seed: Option<u64>,
    },
    Perturb {
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl FromStr for Treatment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Treatment::None),
            "transform" => Ok(Treatment::Transform { seed: None }),
            "perturb" => Ok(Treatment::Perturb { seed: None }),
            _ => Err(Error::Config(format!("unknown treatment '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSource,
    pub expert: ExpertMode,
    pub methods: Vec<MethodName>,
    pub step_size: f64,
    /// Per-method overrides of `step_size`.
    pub method_step_sizes: BTreeMap<MethodName, f64>,
    pub iters: usize,
    pub beta: f64,
    pub baseline: BaselineConfig,
    pub treatment: Treatment,
    pub repetitions: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Record wall-clock seconds. Off by default so reruns are byte-identical.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            environment: EnvironmentSource::Gridworld(GridworldSpec::default()),
            expert: ExpertMode::Sampled { episodes: 10, horizon: 100 },
            methods: vec![MethodName::Natural],
            step_size: 1.0,
            method_step_sizes: BTreeMap::new(),
            iters: 100,
            beta: 10.0,
            baseline: BaselineConfig::default(),
            treatment: Treatment::None,
            repetitions: 10,
            seed: 0,
            output: None,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    /// Sailing defaults: 4x4 lake, 1000 iterations, episodes end at the goal.
    pub fn sailing() -> Self {
        ExperimentConfig {
            environment: EnvironmentSource::Sailing(SailingSpec::default()),
            expert: ExpertMode::Sampled { episodes: 32, horizon: 100 },
            iters: 1000,
            repetitions: 5,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be finite and nonnegative, got {}", self.beta)));
        }
        if let ExpertMode::Sampled { episodes: 0, .. } = self.expert {
            return Err(Error::Config("sampled expert needs at least one episode".into()));
        }
        for m in &self.methods {
            if m.gradient_method().is_some() {
                self.optimizer_config(*m, 1)?.validate()?;
            }
        }
        Ok(())
    }

    pub fn step_size_for(&self, method: MethodName) -> f64 {
        self.method_step_sizes.get(&method).copied().unwrap_or(self.step_size)
    }

    pub fn optimizer_config(&self, method: MethodName, dim: usize) -> Result<OptimizerConfig> {
        let m = method.gradient_method().ok_or_else(|| Error::Config(format!("{method} is not a gradient method")))?;
        Ok(OptimizerConfig::new(m, self.step_size_for(method), self.iters, dim))
    }

    pub fn samples(&self) -> usize {
        match self.expert {
            ExpertMode::Exact => 0,
            ExpertMode::Sampled { episodes, .. } => episodes,
        }
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub const TAG_ENV: u64 = 1;
pub const TAG_EXPERT: u64 = 2;
pub const TAG_TREATMENT: u64 = 3;

/// Seed for one purpose within one repetition. Independent of the method and
/// of the sample count, so runs that differ only in those are paired.
pub fn derive_seed(master: u64, rep: usize, tag: u64) -> u64 {
    mix(mix(mix(master) ^ rep as u64) ^ tag)
}

/// The expert's exact policy weighted by its discounted occupancy over
/// non-terminal states. Demonstrations end at terminal states, so they carry
/// no weight.
pub fn expert_target(env: &Environment) -> Result<LossTarget> {
    let occ = occupancy_weights(&env.mdp, &env.truth.optimal_policy)?;
    if !env.terminal.iter().any(|&t| t) {
        return LossTarget::new(env.truth.optimal_policy.clone(), occ);
    }
    let mut w: Vec<f64> = occ.as_slice().iter().zip(&env.terminal).map(|(&p, &t)| if t { 0.0 } else { p }).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::model("the expert never visits a non-terminal state"));
    }
    w.iter_mut().for_each(|v| *v /= total);
    LossTarget::new(env.truth.optimal_policy.clone(), StateWeights::new(w)?)
}

/// Everything one repetition shares across methods.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub env: Environment,
    pub learner_features: FeatureMap,
    pub train_target: LossTarget,
    /// Exact expert policy and occupancy, used for every reported loss.
    pub eval_target: LossTarget,
    /// Expert feature expectation under the learner's features.
    pub mu_e: Vec<f64>,
    pub dataset: Option<ExpertDataset>,
}

pub fn prepare_run(config: &ExperimentConfig, rep: usize) -> Result<RunContext> {
    let env = match &config.environment {
        EnvironmentSource::Gridworld(spec) => {
            make_gridworld(&GridworldSpec { seed: derive_seed(config.seed, rep, TAG_ENV), ..spec.clone() })?
        }
        EnvironmentSource::Sailing(spec) => make_sailing(spec)?,
        EnvironmentSource::File { path } => load_environment(path)?,
    };
    let treatment_seed = |s: Option<u64>| s.unwrap_or_else(|| derive_seed(config.seed, rep, TAG_TREATMENT));
    let learner_features = match config.treatment {
        Treatment::None => env.features.clone(),
        Treatment::Transform { seed } => {
            transform_features(&env.features, &random_transform(env.features.dim(), treatment_seed(seed)))?
        }
        Treatment::Perturb { seed } => perturb_features(&env.features, treatment_seed(seed)),
    };
    let expert = env.truth.optimal_policy.clone();
    let eval_target = expert_target(&env)?;
    let (train_target, mu_e, dataset) = match config.expert {
        ExpertMode::Exact => {
            let mu_e = policy_feature_expectation(&env.mdp, &learner_features, &expert)?;
            (eval_target.clone(), mu_e, None)
        }
        ExpertMode::Sampled { episodes, horizon } => {
            let seed = derive_seed(config.seed, rep, TAG_EXPERT);
            let trajs = sample_episodes(&env.mdp, &expert, episodes, horizon, seed, Some(&env.terminal))?;
            let mu_e = expert_feature_expectation(&trajs, &learner_features, env.mdp.gamma())?;
            let data = ExpertDataset::new(trajs, env.mdp.n_states(), env.mdp.n_actions())?;
            (data.target()?, mu_e, Some(data))
        }
    };
    Ok(RunContext { env, learner_features, train_target, eval_target, mu_e, dataset })
}

/// Result of training one method in one repetition.
#[derive(Debug, Clone)]
pub enum Fitted {
    Gradient(TrainTrace),
    Baseline(BaselineResult),
}

impl Fitted {
    /// Final iterate for gradient methods, the selected candidate for
    /// baselines.
    pub fn theta(&self) -> &[f64] {
        match self {
            Fitted::Gradient(t) => &t.final_theta,
            Fitted::Baseline(b) => &b.best().expect("best candidate is selected after training").theta,
        }
    }
}

pub fn fit(ctx: &RunContext, config: &ExperimentConfig, method: MethodName) -> Result<Fitted> {
    let mdp = &ctx.env.mdp;
    match method {
        MethodName::MaxMargin | MethodName::Projection => {
            let mut res = if method == MethodName::MaxMargin {
                max_margin_train(mdp, &ctx.learner_features, &ctx.mu_e, &config.baseline)?
            } else {
                projection_train(mdp, &ctx.learner_features, &ctx.mu_e, &config.baseline)?
            };
            res.select_best(&ctx.eval_target)?;
            Ok(Fitted::Baseline(res))
        }
        _ => {
            let opt = config.optimizer_config(method, ctx.learner_features.dim())?;
            Ok(Fitted::Gradient(train_irl(mdp, &ctx.learner_features, &ctx.train_target, config.beta, &opt)?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss_greedy: f64,
    pub loss_boltzmann: f64,
    pub disagreement: f64,
}

/// Scores the reward `θᵀφ` by the policies it induces.
pub fn evaluate_theta(
    env: &Environment,
    features: &FeatureMap,
    theta: &[f64],
    target: &LossTarget,
    beta: f64,
) -> Result<(Evaluation, StochasticPolicy)> {
    if theta.len() != features.dim() {
        return Err(Error::dims(format!("theta has length {}, features have dimension {}", theta.len(), features.dim())));
    }
    let solver = SolverConfig::default();
    let q = value_iteration(&env.mdp, &features.dot(theta), solver.tol, solver.max_iter)?.value;
    let greedy = greedy_policy(&q);
    let soft = boltzmann(&q, beta)?;
    let eval = Evaluation {
        loss_greedy: loss(&greedy, target)?,
        loss_boltzmann: loss(&soft, target)?,
        disagreement: policy_disagreement(&greedy, &env.truth.optimal_policy)?,
    };
    Ok((eval, greedy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub run: usize,
    pub method: MethodName,
    pub samples: usize,
    pub loss_greedy: Option<f64>,
    pub loss_boltzmann: Option<f64>,
    pub disagreement: Option<f64>,
    pub seconds: f64,
    pub error: String,
}

fn run_one(ctx: &Result<RunContext>, config: &ExperimentConfig, rep: usize, method: MethodName) -> EvalRecord {
    let start = Instant::now();
    let outcome = ctx.as_ref().map_err(|e| e.to_string()).and_then(|ctx| {
        fit(ctx, config, method)
            .and_then(|f| evaluate_theta(&ctx.env, &ctx.learner_features, f.theta(), &ctx.eval_target, config.beta))
            .map_err(|e| e.to_string())
    });
    let seconds = if config.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let mut rec = EvalRecord {
        run: rep,
        method,
        samples: config.samples(),
        loss_greedy: None,
        loss_boltzmann: None,
        disagreement: None,
        seconds,
        error: String::new(),
    };
    match outcome {
        Ok((e, _)) => {
            rec.loss_greedy = Some(e.loss_greedy);
            rec.loss_boltzmann = Some(e.loss_boltzmann);
            rec.disagreement = Some(e.disagreement);
        }
        Err(msg) => rec.error = msg,
    }
    rec
}

/// One record per (repetition, method). A failing run is reported in the
/// `error` column and the others continue.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<EvalRecord>> {
    config.validate()?;
    let mut records: Vec<EvalRecord> = (0..config.repetitions)
        .into_par_iter()
        .flat_map_iter(|rep| {
            let ctx = prepare_run(config, rep);
            config.methods.iter().map(move |&m| run_one(&ctx, config, rep, m)).collect::<Vec<_>>()
        })
        .collect();
    let order = |m: MethodName| config.methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    records.sort_by_key(|r| (r.run, order(r.method)));
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub samples: usize,
    pub method: MethodName,
    pub mean_loss: f64,
    pub stderr_loss: f64,
    pub n: usize,
}

/// Mean and standard error (sample standard deviation over `√n`) of the greedy
/// loss per (samples, method), in first-seen order. Failed runs are skipped.
pub fn summarize(records: &[EvalRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, MethodName)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.samples, r.method)) {
            keys.push((r.samples, r.method));
        }
    }
    keys.into_iter()
        .map(|(samples, method)| {
            let vals: Vec<f64> =
                records.iter().filter(|r| r.samples == samples && r.method == method).filter_map(|r| r.loss_greedy).collect();
            let n = vals.len();
            let mean = if n == 0 { f64::NAN } else { vals.iter().sum::<f64>() / n as f64 };
            let stderr = if n < 2 {
                0.0
            } else {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            };
            SummaryRow { samples, method, mean_loss: mean, stderr_loss: stderr, n }
        })
        .collect()
}

/// Runs the experiment once per episode count. Environment, expert seeds and
/// trajectory streams depend only on the repetition, so smaller sample sizes
/// see a prefix of the larger ones' demonstrations.
pub fn sweep_samples(config: &ExperimentConfig, grid: &[usize]) -> Result<(Vec<EvalRecord>, Vec<SummaryRow>)> {
    if grid.is_empty() {
        return Err(Error::Config("sample grid is empty".into()));
    }
    let horizon = match config.expert {
        ExpertMode::Sampled { horizon, .. } => horizon,
        ExpertMode::Exact => 100,
    };
    let mut records = Vec::new();
    for &episodes in grid {
        let cfg = ExperimentConfig { expert: ExpertMode::Sampled { episodes, horizon }, ..config.clone() };
        records.extend(run_experiment(&cfg)?);
    }
    let summary = summarize(&records);
    Ok((records, summary))
}

pub fn write_records_csv<W: Write>(records: &[EvalRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(["run", "method", "samples", "loss_greedy", "loss_boltzmann", "disagreement", "seconds", "error"])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["samples", "method", "mean_loss", "stderr_loss", "n"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
