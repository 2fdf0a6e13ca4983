//! Smooth map from action values to near-greedy policies, and its derivative.

use crate::error::{Error, Result};
use crate::mdp::{QTable, StochasticPolicy, VectorQTable};

/// `∂π(a|x)/∂θ` for every state-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyJacobian(VectorQTable);

impl PolicyJacobian {
    pub fn from_table(table: VectorQTable) -> Self {
        PolicyJacobian(table)
    }

    pub fn entry(&self, x: usize, a: usize) -> &[f64] {
        self.0.get(x, a)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn n_states(&self) -> usize {
        self.0.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.0.n_actions()
    }

    pub fn table(&self) -> &VectorQTable {
        &self.0
    }
}

/// Boltzmann (softmax) policy `exp(βQ(x,a)) / Σ_b exp(βQ(x,b))`, with the
/// per-state maximum subtracted before exponentiation.
pub fn boltzmann(q: &QTable, beta: f64) -> Result<StochasticPolicy> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::arg(format!("beta must be finite and nonnegative, got {beta}")));
    }
    let (ns, na) = (q.n_states(), q.n_actions());
    let mut probs = Vec::with_capacity(ns * na);
    for x in 0..ns {
        let row = q.row(x);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = probs.len();
        let mut total = 0.0;
        for &v in row {
            let e = (beta * (v - max)).exp();
            total += e;
            probs.push(e);
        }
        for p in &mut probs[start..] {
            *p /= total;
        }
    }
    Ok(StochasticPolicy::from_raw(ns, na, probs))
}

/// Derivative of the Boltzmann policy through the action values:
/// `π(a|x) β (∇Q(x,a) − Σ_b π(b|x) ∇Q(x,b))`.
pub fn boltzmann_jacobian(
    policy: &StochasticPolicy,
    q_grad: &VectorQTable,
    beta: f64,
) -> Result<PolicyJacobian> {
    if policy.n_states() != q_grad.n_states() || policy.n_actions() != q_grad.n_actions() {
        return Err(Error::dims("policy and action-value gradient shapes differ"));
    }
    let (ns, na, d) = (q_grad.n_states(), q_grad.n_actions(), q_grad.dim());
    let mut out = VectorQTable::zeros(ns, na, d);
    let mut mean = vec![0.0; d];
    for x in 0..ns {
        mean.iter_mut().for_each(|m| *m = 0.0);
        for b in 0..na {
            let p = policy.prob(x, b);
            for (m, g) in mean.iter_mut().zip(q_grad.get(x, b)) {
                *m += p * g;
            }
        }
        for a in 0..na {
            let scale = policy.prob(x, a) * beta;
            let g = q_grad.get(x, a);
            for ((o, gk), mk) in out.get_mut(x, a).iter_mut().zip(g).zip(&mean) {
                *o = scale * (gk - mk);
            }
        }
    }
    Ok(PolicyJacobian(out))
}
