//! Fixed-budget update loops over a differentiable objective: plain gradient
//! descent, natural gradient descent and iRprop⁻.

use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::{loss_gradient_with, LinearRewardModel, LossTarget};
use crate::mdp::{FeatureMap, SolverConfig, TabularMdp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Plain,
    Natural,
    Rprop,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Plain => "plain",
            Method::Natural => "natural",
            Method::Rprop => "rprop",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Method::Plain),
            "natural" => Ok(Method::Natural),
            "rprop" => Ok(Method::Rprop),
            other => Err(Error::Config(format!("unknown optimizer method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RpropParams {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta0: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl Default for RpropParams {
    fn default() -> Self {
        RpropParams { eta_plus: 1.2, eta_minus: 0.5, delta0: 0.1, delta_min: 1e-6, delta_max: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    pub step_size: f64,
    #[serde(default)]
    pub rprop: RpropParams,
    pub max_iters: usize,
    pub theta0: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl OptimizerConfig {
    /// Zero start, which maps to the uniform Boltzmann policy.
    pub fn new(method: Method, step_size: f64, max_iters: usize, dim: usize) -> Self {
        OptimizerConfig {
            method,
            step_size,
            rprop: RpropParams::default(),
            max_iters,
            theta0: vec![0.0; dim],
            seed: 0,
        }
    }

    /// Replaces `theta0` with i.i.d. uniform draws from `[-scale, scale]`.
    pub fn with_random_start(mut self, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.seed = seed;
        for t in &mut self.theta0 {
            *t = scale * (2.0 * rng.random::<f64>() - 1.0);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rprop;
        match self.method {
            Method::Plain | Method::Natural => {
                if !(self.step_size > 0.0) || !self.step_size.is_finite() {
                    return Err(Error::Config(format!("step size must be positive, got {}", self.step_size)));
                }
            }
            Method::Rprop => {
                if !(0.0 < r.eta_minus && r.eta_minus < 1.0 && 1.0 < r.eta_plus) {
                    return Err(Error::Config("rprop needs 0 < eta_minus < 1 < eta_plus".into()));
                }
                if !(0.0 < r.delta_min && r.delta_min <= r.delta0 && r.delta0 <= r.delta_max) {
                    return Err(Error::Config("rprop needs 0 < delta_min <= delta0 <= delta_max".into()));
                }
            }
        }
        if self.theta0.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("theta0 must be finite".into()));
        }
        Ok(())
    }
}

/// Loss and search directions at a point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub gradient: Vec<f64>,
    pub natural_gradient: Vec<f64>,
}

pub trait Objective {
    fn dim(&self) -> usize;
    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation>;
}

/// The policy-matching loss of a linear reward model.
pub struct IrlObjective<'a> {
    pub mdp: &'a TabularMdp,
    pub features: &'a FeatureMap,
    pub target: &'a LossTarget,
    pub beta: f64,
    pub solver: SolverConfig,
}

impl<'a> IrlObjective<'a> {
    pub fn new(mdp: &'a TabularMdp, features: &'a FeatureMap, target: &'a LossTarget, beta: f64) -> Self {
        IrlObjective { mdp, features, target, beta, solver: SolverConfig::default() }
    }
}

impl Objective for IrlObjective<'_> {
    fn dim(&self) -> usize {
        self.features.dim()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        let model = LinearRewardModel::new(self.features.clone(), theta.to_vec())?;
        let report = loss_gradient_with(self.mdp, &model, self.target, self.beta, &self.solver)?;
        Ok(Evaluation { loss: report.loss, gradient: report.euclid_grad, natural_gradient: report.natural_grad })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub theta: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    pub final_theta: Vec<f64>,
    /// RPROP per-component step sizes after each update; empty otherwise.
    pub rprop_steps: Vec<Vec<f64>>,
}

impl TrainTrace {
    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// CSV with columns `iter, loss, grad_norm, theta_0 .. theta_{d-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.final_theta.len();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iter".to_string(), "loss".to_string(), "grad_norm".to_string()];
        header.extend((0..d).map(|k| format!("theta_{k}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.iter.to_string(), r.loss.to_string(), r.grad_norm.to_string()];
            row.extend(r.theta.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs exactly `max_iters` updates from `theta0`, recording the state before
/// each update and after the last one.
pub fn train<O: Objective + ?Sized>(objective: &O, config: &OptimizerConfig) -> Result<TrainTrace> {
    config.validate()?;
    let d = objective.dim();
    if config.theta0.len() != d {
        return Err(Error::dims(format!("theta0 has length {}, objective has dimension {d}", config.theta0.len())));
    }
    let mut theta = config.theta0.clone();
    let mut records = Vec::with_capacity(config.max_iters + 1);
    let rp = config.rprop;
    let mut steps = vec![rp.delta0; d];
    let mut prev_grad = vec![0.0; d];
    let mut rprop_steps = Vec::new();

    for iter in 0..=config.max_iters {
        let eval = objective.evaluate(&theta)?;
        let finite = eval.loss.is_finite() && eval.gradient.iter().all(|g| g.is_finite());
        records.push(TraceRecord { iter, theta: theta.clone(), loss: eval.loss, grad_norm: norm(&eval.gradient) });
        if iter == config.max_iters || !finite {
            continue;
        }
        match config.method {
            Method::Plain => {
                for (t, g) in theta.iter_mut().zip(&eval.gradient) {
                    *t -= config.step_size * g;
                }
            }
            Method::Natural => {
                if eval.natural_gradient.iter().all(|g| g.is_finite()) {
                    for (t, g) in theta.iter_mut().zip(&eval.natural_gradient) {
                        *t -= config.step_size * g;
                    }
                }
            }
            Method::Rprop => {
                for k in 0..d {
                    let mut g = eval.gradient[k];
                    let agreement = prev_grad[k] * g;
                    if agreement > 0.0 {
                        steps[k] = (steps[k] * rp.eta_plus).min(rp.delta_max);
                    } else if agreement < 0.0 {
                        steps[k] = (steps[k] * rp.eta_minus).max(rp.delta_min);
                        g = 0.0;
                    }
                    if g > 0.0 {
                        theta[k] -= steps[k];
                    } else if g < 0.0 {
                        theta[k] += steps[k];
                    }
                    prev_grad[k] = g;
                }
                rprop_steps.push(steps.clone());
            }
        }
    }
    Ok(TrainTrace { records, final_theta: theta, rprop_steps })
}

/// Trains a linear reward model against `target` with the policy-matching loss.
pub fn train_irl(
    mdp: &TabularMdp,
    features: &FeatureMap,
    target: &LossTarget,
    beta: f64,
    config: &OptimizerConfig,
) -> Result<TrainTrace> {
    train(&IrlObjective::new(mdp, features, target, beta), config)
}
