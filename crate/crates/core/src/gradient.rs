//! Policy-matching loss over linear rewards, its Euclidean gradient and the
//! natural gradient under the metric the policy map induces on parameters.
//!
//! The pipeline for a parameter vector `θ`:
//!
//! 1. solve for `Q*_θ` by value iteration on `r_θ = θᵀφ`;
//! 2. map to the Boltzmann policy `π_θ`;
//! 3. differentiate `Q*_θ` by evaluating the feature table under the greedy
//!    policy of `Q*_θ` (a vector-valued fixed point, one component per
//!    feature);
//! 4. push that through the Boltzmann derivative and the squared loss.
//!
//! The induced metric is `Σ_{x,a} g(x,a) g(x,a)ᵀ` with `g` the policy
//! Jacobian entries, and the natural gradient applies its pseudo-inverse.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::mdp::{
    greedy_policy, occupancy_weights, policy_evaluation_vec, value_iteration, FeatureMap, QTable,
    RewardTable, SolverConfig, StateWeights, StochasticPolicy, TabularMdp, VectorQTable,
};
use crate::policy_map::{boltzmann, boltzmann_jacobian, PolicyJacobian};

/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const PINV_RTOL: f64 = 1e-10;

/// Rewards `r_θ(x, a) = θᵀφ(x, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRewardModel {
    pub features: FeatureMap,
    pub theta: Vec<f64>,
}

impl LinearRewardModel {
    pub fn new(features: FeatureMap, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != features.dim() {
            return Err(Error::dims(format!(
                "theta has length {}, features have dimension {}",
                theta.len(),
                features.dim()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::arg("theta must be finite"));
        }
        Ok(LinearRewardModel { features, theta })
    }

    pub fn reward(&self) -> RewardTable {
        self.features.dot(&self.theta)
    }
}

/// Expert policy and the state weights of the squared policy loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTarget {
    expert_policy: StochasticPolicy,
    weights: StateWeights,
}

impl LossTarget {
    pub fn new(expert_policy: StochasticPolicy, weights: StateWeights) -> Result<Self> {
        if weights.len() != expert_policy.n_states() {
            return Err(Error::dims("weights and expert policy cover different state counts"));
        }
        for (x, &w) in weights.as_slice().iter().enumerate() {
            if w > 0.0 && !expert_policy.is_defined(x) {
                return Err(Error::arg(format!("positive weight at state {x} where the expert policy is undefined")));
            }
        }
        Ok(LossTarget { expert_policy, weights })
    }

    /// Weights are the expert's own discounted occupancy.
    pub fn exact(mdp: &TabularMdp, expert_policy: StochasticPolicy) -> Result<Self> {
        let weights = occupancy_weights(mdp, &expert_policy)?;
        Self::new(expert_policy, weights)
    }

    pub fn expert_policy(&self) -> &StochasticPolicy {
        &self.expert_policy
    }

    pub fn weights(&self) -> &StateWeights {
        &self.weights
    }
}

#[derive(Debug, Clone)]
pub struct GradientReport {
    pub loss: f64,
    pub euclid_grad: Vec<f64>,
    pub metric: DMatrix<f64>,
    pub natural_grad: Vec<f64>,
    pub q_star: QTable,
    pub policy: StochasticPolicy,
}

/// `Σ_x w(x) Σ_a (π(a|x) − π_E(a|x))²`, skipping zero-weight states.
pub fn loss(policy: &StochasticPolicy, target: &LossTarget) -> Result<f64> {
    let expert = &target.expert_policy;
    if policy.n_states() != expert.n_states() || policy.n_actions() != expert.n_actions() {
        return Err(Error::dims("policy and target shapes differ"));
    }
    if !policy.is_fully_defined() {
        return Err(Error::arg("loss needs a policy defined at every state"));
    }
    let mut total = 0.0;
    for (x, &w) in target.weights.as_slice().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let sq: f64 = policy.row(x).iter().zip(expert.row(x)).map(|(p, e)| (p - e).powi(2)).sum();
        total += w * sq;
    }
    Ok(total)
}

/// Gradient of `Q*_θ` with respect to `θ`: the fixed point of the feature
/// table evaluated under the greedy policy of `q_star`.
pub fn q_star_gradient(mdp: &TabularMdp, model: &LinearRewardModel, q_star: &QTable) -> Result<VectorQTable> {
    q_star_gradient_with(mdp, model, q_star, &SolverConfig::default())
}

pub fn q_star_gradient_with(
    mdp: &TabularMdp,
    model: &LinearRewardModel,
    q_star: &QTable,
    solver: &SolverConfig,
) -> Result<VectorQTable> {
    let greedy = greedy_policy(q_star);
    Ok(policy_evaluation_vec(mdp, &model.features, &greedy, solver.tol, solver.max_iter)?.value)
}

pub fn loss_gradient(
    mdp: &TabularMdp,
    model: &LinearRewardModel,
    target: &LossTarget,
    beta: f64,
) -> Result<GradientReport> {
    loss_gradient_with(mdp, model, target, beta, &SolverConfig::default())
}

pub fn loss_gradient_with(
    mdp: &TabularMdp,
    model: &LinearRewardModel,
    target: &LossTarget,
    beta: f64,
    solver: &SolverConfig,
) -> Result<GradientReport> {
    if model.features.n_states() != mdp.n_states() || model.features.n_actions() != mdp.n_actions() {
        return Err(Error::dims("feature table does not match the model"));
    }
    let q_star = value_iteration(mdp, &model.reward(), solver.tol, solver.max_iter)?.value;
    let policy = boltzmann(&q_star, beta)?;
    let q_grad = q_star_gradient_with(mdp, model, &q_star, solver)?;
    let jac = boltzmann_jacobian(&policy, &q_grad, beta)?;

    let d = model.theta.len();
    let expert = target.expert_policy();
    let mut euclid_grad = vec![0.0; d];
    for (x, &w) in target.weights().as_slice().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for a in 0..mdp.n_actions() {
            let coef = 2.0 * w * (policy.prob(x, a) - expert.prob(x, a));
            for (g, j) in euclid_grad.iter_mut().zip(jac.entry(x, a)) {
                *g += coef * j;
            }
        }
    }
    let metric = induced_metric(&jac);
    let natural_grad = pseudo_inverse_apply(&metric, &euclid_grad)?;
    let loss = loss(&policy, target)?;
    Ok(GradientReport { loss, euclid_grad, metric, natural_grad, q_star, policy })
}

/// `Σ_{x,a} g(x,a) g(x,a)ᵀ`, unweighted over all state-action pairs.
pub fn induced_metric(jacobian: &PolicyJacobian) -> DMatrix<f64> {
    let d = jacobian.dim();
    let mut g = DMatrix::<f64>::zeros(d, d);
    for x in 0..jacobian.n_states() {
        for a in 0..jacobian.n_actions() {
            let e = jacobian.entry(x, a);
            for i in 0..d {
                if e[i] == 0.0 {
                    continue;
                }
                for j in i..d {
                    g[(i, j)] += e[i] * e[j];
                }
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    g
}

/// `G†v` through a symmetric eigendecomposition. Falls back to `v` itself
/// when every eigenvalue is cut.
pub fn pseudo_inverse_apply(metric: &DMatrix<f64>, v: &[f64]) -> Result<Vec<f64>> {
    let d = v.len();
    if metric.nrows() != d || metric.ncols() != d {
        return Err(Error::dims(format!("metric is {}x{}, vector has length {d}", metric.nrows(), metric.ncols())));
    }
    if d == 0 {
        return Ok(Vec::new());
    }
    let eig = SymmetricEigen::new(metric.clone());
    let lambda_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cutoff = PINV_RTOL * lambda_max;
    let rhs = DVector::from_column_slice(v);
    let coords = eig.eigenvectors.transpose() * &rhs;
    let mut out = DVector::<f64>::zeros(d);
    let mut kept = 0;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda_max > 0.0 && lambda > cutoff {
            out += eig.eigenvectors.column(i) * (coords[i] / lambda);
            kept += 1;
        }
    }
    if kept == 0 {
        return Ok(v.to_vec());
    }
    Ok(out.iter().copied().collect())
}
