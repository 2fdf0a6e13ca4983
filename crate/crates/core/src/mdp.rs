//! Finite discounted MDPs and exact dynamic programming over them.
//!
//! All tables are stored flat in state-major order: entry `(x, a)` lives at
//! `x * n_actions + a`, and vector-valued tables append a trailing feature
//! axis. Transition rows are kept sparse since the benchmark domains only
//! reach a handful of successors from any state-action pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Sum tolerance for probability vectors.
pub const PROB_TOL: f64 = 1e-12;

/// Fixed-point solvers stop once the residual falls below `tol`, or below this
/// many ulps of the iterate's magnitude when `tol` is finer than `f64` can
/// resolve at that scale.
const RESOLUTION_ULPS: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-10, max_iter: 100_000 }
    }
}

impl SolverConfig {
    pub fn new(tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::arg(format!("solver tolerance must be positive, got {tol}")));
        }
        if max_iter == 0 {
            return Err(Error::arg("solver max_iter must be at least 1"));
        }
        Ok(SolverConfig { tol, max_iter })
    }

    fn effective_tol(&self, magnitude: f64) -> f64 {
        self.tol.max(RESOLUTION_ULPS * f64::EPSILON * magnitude)
    }
}

/// Output of an iterative solve, together with how it got there.
#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub value: T,
    pub iterations: usize,
    /// Sup-norm distance between the last two iterates.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    rows: Vec<Vec<(usize, f64)>>,
    initial_dist: Vec<f64>,
}

impl TabularMdp {
    /// Builds a model from sparse transition rows, one per `(x, a)` in
    /// state-major order. Duplicate successors are merged and zero entries
    /// dropped.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        rows: Vec<Vec<(usize, f64)>>,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::model("need at least one state and one action"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::model(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if rows.len() != n_states * n_actions {
            return Err(Error::model(format!(
                "expected {} transition rows, got {}",
                n_states * n_actions,
                rows.len()
            )));
        }
        let mut clean = Vec::with_capacity(rows.len());
        for (idx, mut row) in rows.into_iter().enumerate() {
            let (x, a) = (idx / n_actions, idx % n_actions);
            row.sort_by_key(|&(y, _)| y);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (y, p) in row {
                if y >= n_states {
                    return Err(Error::model(format!("successor {y} out of range at ({x}, {a})")));
                }
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::model(format!("bad probability {p} at ({x}, {a}, {y})")));
                }
                match merged.last_mut() {
                    Some(last) if last.0 == y => last.1 += p,
                    _ => merged.push((y, p)),
                }
            }
            merged.retain(|&(_, p)| p > 0.0);
            let total: f64 = merged.iter().map(|&(_, p)| p).sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::model(format!(
                    "transition row ({x}, {a}) sums to {total}"
                )));
            }
            clean.push(merged);
        }
        check_distribution(&initial_dist, n_states, "initial_dist")?;
        Ok(TabularMdp { n_states, n_actions, gamma, rows: clean, initial_dist })
    }

    /// Builds a model from a dense `(x, a, x')` table.
    pub fn from_dense(
        gamma: f64,
        transitions: &[Vec<Vec<f64>>],
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        let n_states = transitions.len();
        let n_actions = transitions.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(n_states * n_actions);
        for (x, per_action) in transitions.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(Error::model(format!("state {x} has {} actions", per_action.len())));
            }
            for (a, dense) in per_action.iter().enumerate() {
                if dense.len() != n_states {
                    return Err(Error::model(format!(
                        "row ({x}, {a}) has {} entries, expected {n_states}",
                        dense.len()
                    )));
                }
                rows.push(dense.iter().copied().enumerate().filter(|&(_, p)| p != 0.0).collect());
            }
        }
        Self::new(n_states, n_actions, gamma, rows, initial_dist)
    }

    /// A random model with dense transition rows, for tests and benchmarks.
    pub fn random(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n_states * n_actions);
        for _ in 0..n_states * n_actions {
            let raw: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            rows.push(raw.into_iter().map(|p| p / total).enumerate().collect());
        }
        let init = vec![1.0 / n_states as f64; n_states];
        Self::new(n_states, n_actions, gamma, rows, init)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn successors(&self, x: usize, a: usize) -> &[(usize, f64)] {
        &self.rows[x * self.n_actions + a]
    }

    pub fn with_initial_dist(mut self, initial_dist: Vec<f64>) -> Result<Self> {
        check_distribution(&initial_dist, self.n_states, "initial_dist")?;
        self.initial_dist = initial_dist;
        Ok(self)
    }

    pub fn dense_transitions(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_states)
            .map(|x| {
                (0..self.n_actions)
                    .map(|a| {
                        let mut dense = vec![0.0; self.n_states];
                        for &(y, p) in self.successors(x, a) {
                            dense[y] = p;
                        }
                        dense
                    })
                    .collect()
            })
            .collect()
    }

    /// Expected value of `v` over the successors of `(x, a)`.
    #[inline]
    pub fn expect(&self, x: usize, a: usize, v: &[f64]) -> f64 {
        self.successors(x, a).iter().map(|&(y, p)| p * v[y]).sum()
    }
}

fn check_distribution(p: &[f64], n: usize, what: &str) -> Result<()> {
    if p.len() != n {
        return Err(Error::model(format!("{what} has length {}, expected {n}", p.len())));
    }
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::model(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::model(format!("{what} sums to {total}")));
    }
    Ok(())
}

/// A real-valued table over state-action pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

pub type RewardTable = ActionTable;
pub type QTable = ActionTable;

impl ActionTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        ActionTable { n_states, n_actions, values: vec![0.0; n_states * n_actions] }
    }

    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::dims(format!(
                "table of {} values for {n_states} states x {n_actions} actions",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("table entries must be finite"));
        }
        Ok(ActionTable { n_states, n_actions, values })
    }

    pub fn from_fn(n_states: usize, n_actions: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_states * n_actions);
        for x in 0..n_states {
            for a in 0..n_actions {
                values.push(f(x, a));
            }
        }
        ActionTable { n_states, n_actions, values }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, x: usize, a: usize) -> f64 {
        self.values[x * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, x: usize, a: usize, v: f64) {
        self.values[x * self.n_actions + a] = v;
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &ActionTable) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Row maxima, i.e. the state values of a greedy policy.
    pub fn max_per_state(&self) -> Vec<f64> {
        (0..self.n_states)
            .map(|x| self.row(x).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// A table of `dim`-vectors over state-action pairs. Houses feature maps and
/// parameter gradients of action-value functions.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorQTable {
    n_states: usize,
    n_actions: usize,
    dim: usize,
    values: Vec<f64>,
}

pub type FeatureMap = VectorQTable;

impl VectorQTable {
    pub fn zeros(n_states: usize, n_actions: usize, dim: usize) -> Self {
        VectorQTable { n_states, n_actions, dim, values: vec![0.0; n_states * n_actions * dim] }
    }

    pub fn from_values(n_states: usize, n_actions: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions * dim {
            return Err(Error::dims(format!(
                "vector table of {} values for {n_states}x{n_actions}x{dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("vector table entries must be finite"));
        }
        Ok(VectorQTable { n_states, n_actions, dim, values })
    }

    /// Nested `(x, a, k)` form, as used by the model file.
    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let n_states = nested.len();
        let n_actions = nested.first().map_or(0, Vec::len);
        let dim = nested.first().and_then(|r| r.first()).map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n_states * n_actions * dim);
        for (x, per_action) in nested.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(Error::dims(format!("state {x} has {} feature rows", per_action.len())));
            }
            for (a, v) in per_action.iter().enumerate() {
                if v.len() != dim {
                    return Err(Error::dims(format!("feature vector ({x}, {a}) has length {}", v.len())));
                }
                values.extend_from_slice(v);
            }
        }
        Self::from_values(n_states, n_actions, dim, values)
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_states)
            .map(|x| (0..self.n_actions).map(|a| self.get(x, a).to_vec()).collect())
            .collect()
    }

    /// I.i.d. uniform `[0, 1)` entries.
    pub fn random(n_states: usize, n_actions: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n_states * n_actions * dim).map(|_| rng.random::<f64>()).collect();
        VectorQTable { n_states, n_actions, dim, values }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, x: usize, a: usize) -> &[f64] {
        let start = (x * self.n_actions + a) * self.dim;
        &self.values[start..start + self.dim]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, a: usize) -> &mut [f64] {
        let start = (x * self.n_actions + a) * self.dim;
        &mut self.values[start..start + self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &VectorQTable) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Scalar table of inner products `θᵀv(x, a)`.
    pub fn dot(&self, theta: &[f64]) -> ActionTable {
        debug_assert_eq!(theta.len(), self.dim);
        ActionTable::from_fn(self.n_states, self.n_actions, |x, a| {
            self.get(x, a).iter().zip(theta).map(|(f, t)| f * t).sum()
        })
    }

    /// Component `k` as a scalar table.
    pub fn component(&self, k: usize) -> ActionTable {
        ActionTable::from_fn(self.n_states, self.n_actions, |x, a| self.get(x, a)[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
    defined: Vec<bool>,
}

impl StochasticPolicy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        StochasticPolicy {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
            defined: vec![true; n_states],
        }
    }

    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let n_states = actions.len();
        let mut probs = vec![0.0; n_states * n_actions];
        for (x, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::arg(format!("action {a} out of range at state {x}")));
            }
            probs[x * n_actions + a] = 1.0;
        }
        Ok(StochasticPolicy { n_states, n_actions, probs, defined: vec![true; n_states] })
    }

    /// Validates that every defined row is a probability vector. Rows of
    /// undefined states are zeroed.
    pub fn from_probs(
        n_states: usize,
        n_actions: usize,
        mut probs: Vec<f64>,
        defined: Vec<bool>,
    ) -> Result<Self> {
        if probs.len() != n_states * n_actions || defined.len() != n_states {
            return Err(Error::dims("policy table does not match its shape"));
        }
        for x in 0..n_states {
            let row = &mut probs[x * n_actions..(x + 1) * n_actions];
            if !defined[x] {
                row.iter_mut().for_each(|p| *p = 0.0);
                continue;
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::arg(format!("policy row {x} has a negative or non-finite entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::arg(format!("policy row {x} sums to {total}")));
            }
        }
        Ok(StochasticPolicy { n_states, n_actions, probs, defined })
    }

    pub(crate) fn from_raw(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Self {
        StochasticPolicy { n_states, n_actions, probs, defined: vec![true; n_states] }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, x: usize, a: usize) -> f64 {
        self.probs[x * self.n_actions + a]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.probs[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn is_defined(&self, x: usize) -> bool {
        self.defined[x]
    }

    pub fn defined_mask(&self) -> &[bool] {
        &self.defined
    }

    pub fn is_fully_defined(&self) -> bool {
        self.defined.iter().all(|&d| d)
    }

    /// Most probable action, lowest index on ties.
    pub fn argmax(&self, x: usize) -> usize {
        argmax_lowest(self.row(x))
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.n_states).map(|x| self.row(x).to_vec()).collect()
    }

    fn require_defined(&self) -> Result<()> {
        if self.is_fully_defined() {
            Ok(())
        } else {
            Err(Error::arg("policy must be defined at every state"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateWeights(Vec<f64>);

impl StateWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::arg("state weights must be finite and nonnegative"));
        }
        Ok(StateWeights(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

pub(crate) fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = a;
        }
    }
    best
}

fn check_shape(mdp: &TabularMdp, n_states: usize, n_actions: usize, what: &str) -> Result<()> {
    if n_states != mdp.n_states || n_actions != mdp.n_actions {
        return Err(Error::dims(format!(
            "{what} is {n_states}x{n_actions}, model is {}x{}",
            mdp.n_states, mdp.n_actions
        )));
    }
    Ok(())
}

/// One application of the Bellman optimality operator.
pub fn bellman_backup(mdp: &TabularMdp, reward: &RewardTable, q: &QTable) -> QTable {
    let v = q.max_per_state();
    ActionTable::from_fn(mdp.n_states, mdp.n_actions, |x, a| {
        reward.get(x, a) + mdp.gamma * mdp.expect(x, a, &v)
    })
}

/// Iterates the Bellman optimality operator from `Q₀ = 0` until successive
/// iterates are within `tol` in sup norm.
pub fn value_iteration(
    mdp: &TabularMdp,
    reward: &RewardTable,
    tol: f64,
    max_iter: usize,
) -> Result<Solution<QTable>> {
    let cfg = SolverConfig::new(tol, max_iter)?;
    check_shape(mdp, reward.n_states, reward.n_actions, "reward")?;
    if reward.values.iter().any(|r| !r.is_finite()) {
        return Err(Error::arg("reward table has non-finite entries"));
    }
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let mut q = vec![0.0; ns * na];
    let mut next = vec![0.0; ns * na];
    let mut v = vec![0.0; ns];
    let mut residual = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        for (x, vx) in v.iter_mut().enumerate() {
            *vx = q[x * na..(x + 1) * na].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        residual = 0.0;
        let mut magnitude: f64 = 0.0;
        for x in 0..ns {
            for a in 0..na {
                let i = x * na + a;
                let val = reward.values[i] + mdp.gamma * mdp.expect(x, a, &v);
                residual = residual.max((val - q[i]).abs());
                magnitude = magnitude.max(val.abs());
                next[i] = val;
            }
        }
        std::mem::swap(&mut q, &mut next);
        if residual <= cfg.effective_tol(magnitude) {
            return Ok(Solution {
                value: ActionTable { n_states: ns, n_actions: na, values: q },
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NotConverged { residual, iterations: cfg.max_iter })
}

/// One application of the policy-evaluation operator, componentwise over the
/// `d` entries of each vector.
pub fn policy_backup_vec(
    mdp: &TabularMdp,
    reward_vec: &VectorQTable,
    policy: &StochasticPolicy,
    phi: &VectorQTable,
) -> VectorQTable {
    let d = reward_vec.dim;
    let v = policy_average(policy, phi);
    let mut out = VectorQTable::zeros(mdp.n_states, mdp.n_actions, d);
    for x in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let dst = out.get_mut(x, a);
            dst.copy_from_slice(reward_vec.get(x, a));
            for &(y, p) in mdp.successors(x, a) {
                let w = mdp.gamma * p;
                for (o, vy) in dst.iter_mut().zip(&v[y * d..(y + 1) * d]) {
                    *o += w * vy;
                }
            }
        }
    }
    out
}

/// `Σ_a π(a|x) φ(x, a)` for every state, flattened `(x, k)`.
fn policy_average(policy: &StochasticPolicy, phi: &VectorQTable) -> Vec<f64> {
    let d = phi.dim;
    let mut v = vec![0.0; phi.n_states * d];
    for x in 0..phi.n_states {
        let vx = &mut v[x * d..(x + 1) * d];
        for a in 0..phi.n_actions {
            let p = policy.prob(x, a);
            if p == 0.0 {
                continue;
            }
            for (o, f) in vx.iter_mut().zip(phi.get(x, a)) {
                *o += p * f;
            }
        }
    }
    v
}

/// Fixed point of the policy-evaluation operator for a vector-valued reward,
/// iterated from zero. With `d = 1` this is the ordinary `Q^π`.
pub fn policy_evaluation_vec(
    mdp: &TabularMdp,
    reward_vec: &VectorQTable,
    policy: &StochasticPolicy,
    tol: f64,
    max_iter: usize,
) -> Result<Solution<VectorQTable>> {
    let cfg = SolverConfig::new(tol, max_iter)?;
    check_shape(mdp, reward_vec.n_states, reward_vec.n_actions, "reward vector table")?;
    check_shape(mdp, policy.n_states, policy.n_actions, "policy")?;
    policy.require_defined()?;
    let d = reward_vec.dim;
    let mut phi = VectorQTable::zeros(mdp.n_states, mdp.n_actions, d);
    let mut next = phi.clone();
    let mut residual = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let v = policy_average(policy, &phi);
        residual = 0.0;
        let mut magnitude: f64 = 0.0;
        for x in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                let i = (x * mdp.n_actions + a) * d;
                let dst = &mut next.values[i..i + d];
                dst.copy_from_slice(reward_vec.get(x, a));
                for &(y, p) in mdp.successors(x, a) {
                    let w = mdp.gamma * p;
                    for (o, vy) in dst.iter_mut().zip(&v[y * d..(y + 1) * d]) {
                        *o += w * vy;
                    }
                }
                for (n, o) in dst.iter().zip(&phi.values[i..i + d]) {
                    residual = residual.max((n - o).abs());
                    magnitude = magnitude.max(n.abs());
                }
            }
        }
        std::mem::swap(&mut phi, &mut next);
        if residual <= cfg.effective_tol(magnitude) {
            return Ok(Solution { value: phi, iterations: it, residual });
        }
    }
    Err(Error::NotConverged { residual, iterations: cfg.max_iter })
}

/// Deterministic greedy policy; ties go to the lowest action index.
pub fn greedy_policy(q: &QTable) -> StochasticPolicy {
    let actions: Vec<usize> = (0..q.n_states).map(|x| argmax_lowest(q.row(x))).collect();
    StochasticPolicy::deterministic(q.n_actions, &actions).expect("argmax is in range")
}

/// Normalized discounted state occupancy `(1-γ) Σ_t γᵗ Pr(X_t = x)` from the
/// model's initial distribution.
pub fn occupancy_weights(mdp: &TabularMdp, policy: &StochasticPolicy) -> Result<StateWeights> {
    check_shape(mdp, policy.n_states, policy.n_actions, "policy")?;
    policy.require_defined()?;
    let ns = mdp.n_states;
    let gamma = mdp.gamma;
    let base: Vec<f64> = mdp.initial_dist.iter().map(|p| (1.0 - gamma) * p).collect();
    let mut w = base.clone();
    if gamma > 0.0 {
        let cfg = SolverConfig::default();
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..cfg.max_iter {
            let mut next = base.clone();
            for x in 0..ns {
                if w[x] == 0.0 {
                    continue;
                }
                for a in 0..mdp.n_actions {
                    let mass = gamma * w[x] * policy.prob(x, a);
                    if mass == 0.0 {
                        continue;
                    }
                    for &(y, p) in mdp.successors(x, a) {
                        next[y] += mass * p;
                    }
                }
            }
            residual = next.iter().zip(&w).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
            w = next;
            if residual <= 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NotConverged { residual, iterations: cfg.max_iter });
        }
    }
    let total: f64 = w.iter().sum();
    StateWeights::new(w.into_iter().map(|v| v / total).collect())
}

/// Exact discounted feature expectation `E[Σ_t γᵗ φ(X_t, A_t)]` from the
/// model's initial distribution.
pub fn feature_expectations(
    mdp: &TabularMdp,
    features: &VectorQTable,
    policy: &StochasticPolicy,
) -> Result<Vec<f64>> {
    feature_expectations_with(mdp, features, policy, &SolverConfig::default())
}

pub fn feature_expectations_with(
    mdp: &TabularMdp,
    features: &VectorQTable,
    policy: &StochasticPolicy,
    solver: &SolverConfig,
) -> Result<Vec<f64>> {
    let phi = policy_evaluation_vec(mdp, features, policy, solver.tol, solver.max_iter)?.value;
    let d = features.dim;
    let per_state = policy_average(policy, &phi);
    let mut out = vec![0.0; d];
    for (x, &rho) in mdp.initial_dist.iter().enumerate() {
        if rho == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(&per_state[x * d..(x + 1) * d]) {
            *o += rho * v;
        }
    }
    Ok(out)
}
