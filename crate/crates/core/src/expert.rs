//! Expert demonstrations and the empirical objects estimated from them.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::LossTarget;
use crate::mdp::{StateWeights, StochasticPolicy, TabularMdp};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn sample_index(rng: &mut ChaCha8Rng, probs: impl IntoIterator<Item = (usize, f64)>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` past the cumulative total.
    last
}

/// `m` trajectories of `horizon` transitions (`horizon + 1` records).
/// Trajectory `i` draws from stream `i` of a generator keyed by `seed`, so it
/// does not depend on `m`.
pub fn sample_trajectories(
    mdp: &TabularMdp,
    policy: &StochasticPolicy,
    m: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    sample_episodes(mdp, policy, m, horizon, seed, None)
}

/// Like [`sample_trajectories`], but an episode stops before recording a
/// state flagged in `terminal`.
pub fn sample_episodes(
    mdp: &TabularMdp,
    policy: &StochasticPolicy,
    m: usize,
    horizon: usize,
    seed: u64,
    terminal: Option<&[bool]>,
) -> Result<Vec<Trajectory>> {
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(Error::dims("policy shape does not match the model"));
    }
    if !policy.is_fully_defined() {
        return Err(Error::arg("the demonstrating policy must be defined everywhere"));
    }
    if let Some(t) = terminal {
        if t.len() != mdp.n_states() {
            return Err(Error::dims("terminal mask length does not match the model"));
        }
    }
    let is_terminal = |x: usize| terminal.is_some_and(|t| t[x]);
    let trajectories = (0..m)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut x = sample_index(&mut rng, mdp.initial_dist().iter().copied().enumerate());
            let mut steps = Vec::with_capacity(horizon + 1);
            for t in 0..=horizon {
                if is_terminal(x) {
                    break;
                }
                let a = sample_index(&mut rng, policy.row(x).iter().copied().enumerate());
                steps.push((x, a));
                if t < horizon {
                    x = sample_index(&mut rng, mdp.successors(x, a).iter().copied());
                }
            }
            Trajectory { steps }
        })
        .collect();
    Ok(trajectories)
}

/// Pooled visit frequencies and the empirical policy at visited states.
pub fn empirical_estimates(
    trajectories: &[Trajectory],
    n_states: usize,
    n_actions: usize,
) -> Result<(StateWeights, StochasticPolicy)> {
    let mut counts = vec![0usize; n_states * n_actions];
    let mut visits = vec![0usize; n_states];
    let mut total = 0usize;
    for (x, a) in trajectories.iter().flat_map(|t| t.steps.iter().copied()) {
        if x >= n_states || a >= n_actions {
            return Err(Error::arg(format!("record ({x}, {a}) out of range")));
        }
        counts[x * n_actions + a] += 1;
        visits[x] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let weights = StateWeights::new(visits.iter().map(|&v| v as f64 / total as f64).collect())?;
    let probs = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let v = visits[i / n_actions];
            if v == 0 {
                0.0
            } else {
                c as f64 / v as f64
            }
        })
        .collect();
    let defined = visits.iter().map(|&v| v > 0).collect();
    let policy = StochasticPolicy::from_probs(n_states, n_actions, probs, defined)?;
    Ok((weights, policy))
}

/// Demonstrations together with their empirical estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertDataset {
    pub trajectories: Vec<Trajectory>,
    pub empirical_weights: StateWeights,
    pub empirical_policy: StochasticPolicy,
}

impl ExpertDataset {
    pub fn new(trajectories: Vec<Trajectory>, n_states: usize, n_actions: usize) -> Result<Self> {
        let (empirical_weights, empirical_policy) = empirical_estimates(&trajectories, n_states, n_actions)?;
        Ok(ExpertDataset { trajectories, empirical_weights, empirical_policy })
    }

    pub fn n_records(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn target(&self) -> Result<LossTarget> {
        LossTarget::new(self.empirical_policy.clone(), self.empirical_weights.clone())
    }
}

/// Fraction of states whose most probable actions differ.
pub fn policy_disagreement(p: &StochasticPolicy, q: &StochasticPolicy) -> Result<f64> {
    if p.n_states() != q.n_states() || p.n_actions() != q.n_actions() {
        return Err(Error::dims("policies have different shapes"));
    }
    if !p.is_fully_defined() || !q.is_fully_defined() {
        return Err(Error::arg("both policies must be defined everywhere"));
    }
    let n = p.n_states();
    if n == 0 {
        return Ok(0.0);
    }
    let differing = (0..n).filter(|&x| p.argmax(x) != q.argmax(x)).count();
    Ok(differing as f64 / n as f64)
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    traj_id: usize,
    t: usize,
    state: usize,
    action: usize,
}

/// CSV with columns `traj_id, t, state, action`.
pub fn write_trajectories_csv<W: Write>(trajectories: &[Trajectory], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (traj_id, traj) in trajectories.iter().enumerate() {
        for (t, &(state, action)) in traj.steps.iter().enumerate() {
            w.serialize(Row { traj_id, t, state, action })?;
        }
    }
    if trajectories.iter().all(Trajectory::is_empty) {
        w.write_record(["traj_id", "t", "state", "action"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectories_csv<R: Read>(input: R) -> Result<Vec<Trajectory>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out: Vec<Trajectory> = Vec::new();
    for row in r.deserialize() {
        let row: Row = row?;
        if row.traj_id >= out.len() {
            out.resize_with(row.traj_id + 1, Trajectory::default);
        }
        let traj = &mut out[row.traj_id];
        if row.t != traj.steps.len() {
            return Err(Error::arg(format!("trajectory {} has a gap or reordering at t = {}", row.traj_id, row.t)));
        }
        traj.steps.push((row.state, row.action));
    }
    Ok(out)
}
