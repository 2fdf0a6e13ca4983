//! Feature-expectation matching baselines: max-margin and projection.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expert::Trajectory;
use crate::gradient::{loss, LossTarget};
use crate::mdp::{feature_expectations, greedy_policy, value_iteration, FeatureMap, SolverConfig, StochasticPolicy, TabularMdp};

/// Iterations of the inner max-min solver.
pub const INNER_ITERS: usize = 5000;
/// Step scale `c` of the inner solver's `c/√t` schedule.
pub const INNER_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub epsilon: f64,
    /// Maximum number of candidate policies, the initial one included.
    pub max_iters: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { epsilon: 1e-6, max_iters: 100 }
    }
}

impl BaselineConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub theta: Vec<f64>,
    pub policy: StochasticPolicy,
    pub feat_exp: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub candidates: Vec<Candidate>,
    /// Max-margin: the inner optimum once candidate `i` is known.
    /// Projection: `‖μ_E − μ̄‖` after candidate `i` is folded in.
    pub margins: Vec<f64>,
    pub converged: bool,
    /// Loss of each candidate policy, filled by [`BaselineResult::select_best`].
    pub candidate_losses: Vec<f64>,
    pub best_index: Option<usize>,
}

impl BaselineResult {
    fn new() -> Self {
        BaselineResult { candidates: Vec::new(), margins: Vec::new(), converged: false, candidate_losses: Vec::new(), best_index: None }
    }

    /// Evaluates every candidate against `target` and picks the lowest loss,
    /// earliest on ties.
    pub fn select_best(&mut self, target: &LossTarget) -> Result<usize> {
        self.candidate_losses = self.candidates.iter().map(|c| loss(&c.policy, target)).collect::<Result<_>>()?;
        let mut best = 0;
        for (i, &l) in self.candidate_losses.iter().enumerate() {
            if l < self.candidate_losses[best] {
                best = i;
            }
        }
        self.best_index = Some(best);
        Ok(best)
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.best_index.map(|i| &self.candidates[i])
    }

    /// CSV with columns `iteration, margin, loss`; the loss column is empty
    /// until [`BaselineResult::select_best`] has run.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "margin", "loss"])?;
        for (i, m) in self.margins.iter().enumerate() {
            let l = self.candidate_losses.get(i).map(f64::to_string).unwrap_or_default();
            w.write_record([i.to_string(), m.to_string(), l])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `(1/m) Σ_i Σ_t γ^t φ(x_t^i, a_t^i)`.
pub fn expert_feature_expectation(trajectories: &[Trajectory], features: &FeatureMap, gamma: f64) -> Result<Vec<f64>> {
    if trajectories.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = features.dim();
    let mut mu = vec![0.0; d];
    for traj in trajectories {
        let mut discount = 1.0;
        for &(x, a) in &traj.steps {
            if x >= features.n_states() || a >= features.n_actions() {
                return Err(Error::arg(format!("record ({x}, {a}) out of range")));
            }
            for (m, f) in mu.iter_mut().zip(features.get(x, a)) {
                *m += discount * f;
            }
            discount *= gamma;
        }
    }
    let m = trajectories.len() as f64;
    Ok(mu.into_iter().map(|v| v / m).collect())
}

/// Exact feature expectation of a policy.
pub fn policy_feature_expectation(mdp: &TabularMdp, features: &FeatureMap, policy: &StochasticPolicy) -> Result<Vec<f64>> {
    feature_expectations(mdp, features, policy)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_ball(theta: &mut [f64]) {
    let n = norm(theta);
    if n > 1.0 {
        theta.iter_mut().for_each(|t| *t /= n);
    }
}

/// `min_j θᵀ(μ_E − μ_j)`, the constraint index attaining it.
fn worst_margin(theta: &[f64], diffs: &[Vec<f64>]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (j, d) in diffs.iter().enumerate() {
        let v = dot(theta, d);
        if v < best.0 {
            best = (v, j);
        }
    }
    best
}

/// Solves `max_{‖θ‖₂ ≤ 1} min_j θᵀ(μ_E − μ_j)` by projected subgradient ascent
/// and returns the best iterate with its value.
pub fn max_margin_direction(mu_e: &[f64], mus: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    if mus.is_empty() {
        return Err(Error::arg("need at least one candidate feature expectation"));
    }
    let d = mu_e.len();
    if mus.iter().any(|m| m.len() != d) {
        return Err(Error::dims("feature expectations have different lengths"));
    }
    let diffs: Vec<Vec<f64>> = mus.iter().map(|m| mu_e.iter().zip(m).map(|(e, v)| e - v).collect()).collect();

    // θ = 0 attains 0, which is optimal once μ_E is inside the hull.
    let mut best_theta = vec![0.0; d];
    let mut best_val = 0.0;
    let n0 = norm(&diffs[0]);
    if n0 == 0.0 {
        return Ok((best_theta, best_val));
    }
    let mut theta: Vec<f64> = diffs[0].iter().map(|v| v / n0).collect();
    for t in 1..=INNER_ITERS {
        let (val, j) = worst_margin(&theta, &diffs);
        if val > best_val {
            best_val = val;
            best_theta.clone_from(&theta);
        }
        let g = &diffs[j];
        let gn = norm(g);
        if gn == 0.0 {
            break;
        }
        let step = INNER_STEP / (t as f64).sqrt() / gn;
        for (th, gk) in theta.iter_mut().zip(g) {
            *th += step * gk;
        }
        project_ball(&mut theta);
    }
    let (val, _) = worst_margin(&theta, &diffs);
    if val > best_val {
        best_val = val;
        best_theta = theta;
    }
    Ok((best_theta, best_val))
}

fn optimal_candidate(mdp: &TabularMdp, features: &FeatureMap, theta: Vec<f64>, solver: &SolverConfig) -> Result<Candidate> {
    let q = value_iteration(mdp, &features.dot(&theta), solver.tol, solver.max_iter)?.value;
    let policy = greedy_policy(&q);
    let feat_exp = feature_expectations(mdp, features, &policy)?;
    Ok(Candidate { theta, policy, feat_exp })
}

fn check_inputs(features: &FeatureMap, mdp: &TabularMdp, mu_e: &[f64], config: &BaselineConfig) -> Result<()> {
    config.validate()?;
    if features.n_states() != mdp.n_states() || features.n_actions() != mdp.n_actions() {
        return Err(Error::dims("features do not match the model"));
    }
    if mu_e.len() != features.dim() {
        return Err(Error::dims(format!("expert feature expectation has length {}, features have {}", mu_e.len(), features.dim())));
    }
    Ok(())
}

/// The first candidate is the optimal policy for the zero reward.
pub fn max_margin_train(mdp: &TabularMdp, features: &FeatureMap, mu_e: &[f64], config: &BaselineConfig) -> Result<BaselineResult> {
    check_inputs(features, mdp, mu_e, config)?;
    let solver = SolverConfig::default();
    let mut result = BaselineResult::new();
    let mut theta = vec![0.0; features.dim()];
    loop {
        let cand = optimal_candidate(mdp, features, theta, &solver)?;
        result.candidates.push(cand);
        let mus: Vec<Vec<f64>> = result.candidates.iter().map(|c| c.feat_exp.clone()).collect();
        let (next, margin) = max_margin_direction(mu_e, &mus)?;
        result.margins.push(margin);
        if margin <= config.epsilon {
            result.converged = true;
            break;
        }
        if result.candidates.len() >= config.max_iters {
            break;
        }
        theta = next;
    }
    Ok(result)
}

/// Coefficient of the point on segment `[a, b]` closest to `target`.
pub fn segment_coefficient(a: &[f64], b: &[f64], target: &[f64]) -> f64 {
    let ab: Vec<f64> = b.iter().zip(a).map(|(u, v)| u - v).collect();
    let at: Vec<f64> = target.iter().zip(a).map(|(u, v)| u - v).collect();
    let len2 = dot(&ab, &ab);
    if len2 == 0.0 {
        return 0.0;
    }
    (dot(&ab, &at) / len2).clamp(0.0, 1.0)
}

pub fn projection_train(mdp: &TabularMdp, features: &FeatureMap, mu_e: &[f64], config: &BaselineConfig) -> Result<BaselineResult> {
    check_inputs(features, mdp, mu_e, config)?;
    let solver = SolverConfig::default();
    let mut result = BaselineResult::new();
    let first = optimal_candidate(mdp, features, vec![0.0; features.dim()], &solver)?;
    let mut mu_bar = first.feat_exp.clone();
    result.candidates.push(first);
    loop {
        let w: Vec<f64> = mu_e.iter().zip(&mu_bar).map(|(e, b)| e - b).collect();
        let dist = norm(&w);
        result.margins.push(dist);
        if dist <= config.epsilon {
            result.converged = true;
            break;
        }
        if result.candidates.len() >= config.max_iters {
            break;
        }
        let theta: Vec<f64> = w.iter().map(|v| v / dist).collect();
        let cand = optimal_candidate(mdp, features, theta, &solver)?;
        let c = segment_coefficient(&mu_bar, &cand.feat_exp, mu_e);
        for (b, m) in mu_bar.iter_mut().zip(&cand.feat_exp) {
            *b += c * (m - *b);
        }
        result.candidates.push(cand);
    }
    Ok(result)
}

/// One row of the feature-scaling sensitivity example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub epsilon: f64,
    pub phi_e2: f64,
    pub rho_expert: f64,
    pub rho_policy: f64,
    pub ratio: f64,
    pub closed_form: f64,
}

/// Two features, `θ* = (√2/2, √2/2)`, expert feature expectation `(0, φ_E2)`
/// and a policy at distance `ε` from it, `(−ε, φ_E2)`. Rescaling the features
/// by `λ` changes the performance ratio to `1 − (λ₁/λ₂)ε/φ_E2`, which is
/// unbounded below.
pub fn scaling_sensitivity_demo(epsilon: f64, phi_e2: f64, lambdas: &[(f64, f64)]) -> Result<Vec<ScalingRow>> {
    if !(phi_e2 > 0.0) || !(epsilon >= 0.0) {
        return Err(Error::arg("need φ_E2 > 0 and ε ≥ 0"));
    }
    let w = std::f64::consts::FRAC_1_SQRT_2;
    let phi_e = [0.0, phi_e2];
    let phi_pi = [-epsilon, phi_e2];
    lambdas
        .iter()
        .map(|&(lambda1, lambda2)| {
            if !(lambda1 > 0.0 && lambda2 > 0.0) {
                return Err(Error::arg("scalings must be positive"));
            }
            let rho_expert = w * (lambda1 * phi_e[0] + lambda2 * phi_e[1]);
            let rho_policy = w * (lambda1 * phi_pi[0] + lambda2 * phi_pi[1]);
            Ok(ScalingRow {
                lambda1,
                lambda2,
                epsilon,
                phi_e2,
                rho_expert,
                rho_policy,
                ratio: rho_policy / rho_expert,
                closed_form: 1.0 - (lambda1 / lambda2) * epsilon / phi_e2,
            })
        })
        .collect()
}

/// Scalings `λ = (r, 1)` swept over a range of ratios `r`.
pub fn default_scaling_grid() -> Vec<(f64, f64)> {
    [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0].iter().map(|&r| (r, 1.0)).collect()
}

pub fn write_scaling_csv<W: Write>(rows: &[ScalingRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
