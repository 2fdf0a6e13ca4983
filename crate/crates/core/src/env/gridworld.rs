use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, GroundTruth};
use crate::error::{Error, Result};
use crate::mdp::{SolverConfig, TabularMdp, VectorQTable};

/// `n x n` grid, four compass moves that succeed with `success_prob` and
/// otherwise slip uniformly into one of the other three directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridworldSpec {
    pub size: usize,
    pub n_features: usize,
    pub success_prob: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for GridworldSpec {
    fn default() -> Self {
        GridworldSpec { size: 10, n_features: 5, success_prob: 0.7, gamma: 0.9, seed: 0 }
    }
}

/// Row/column offsets for north, east, south, west.
const MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

impl GridworldSpec {
    fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(Error::Config(format!("grid size must be at least 2, got {}", self.size)));
        }
        if !(self.success_prob > 0.0 && self.success_prob <= 1.0) {
            return Err(Error::Config(format!("success probability must lie in (0, 1], got {}", self.success_prob)));
        }
        if self.n_features == 0 {
            return Err(Error::Config("need at least one feature".into()));
        }
        Ok(())
    }

    fn step(&self, state: usize, dir: usize) -> usize {
        let n = self.size as isize;
        let (r, c) = ((state / self.size) as isize, (state % self.size) as isize);
        let (dr, dc) = MOVES[dir];
        let (nr, nc) = (r + dr, c + dc);
        if nr < 0 || nr >= n || nc < 0 || nc >= n {
            state
        } else {
            (nr * n + nc) as usize
        }
    }
}

pub fn make_gridworld(spec: &GridworldSpec) -> Result<Environment> {
    spec.validate()?;
    let ns = spec.size * spec.size;
    let slip = (1.0 - spec.success_prob) / 3.0;
    let mut rows = Vec::with_capacity(ns * 4);
    for x in 0..ns {
        for a in 0..4 {
            let mut row = vec![(spec.step(x, a), spec.success_prob)];
            if slip > 0.0 {
                row.extend((0..4).filter(|&b| b != a).map(|b| (spec.step(x, b), slip)));
            }
            rows.push(row);
        }
    }
    let mdp = TabularMdp::new(ns, 4, spec.gamma, rows, vec![1.0 / ns as f64; ns])?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.n_features;
    let per_state: Vec<f64> = (0..ns * d).map(|_| rng.random::<f64>()).collect();
    let theta_star: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    let mut features = VectorQTable::zeros(ns, 4, d);
    for x in 0..ns {
        for a in 0..4 {
            features.get_mut(x, a).copy_from_slice(&per_state[x * d..(x + 1) * d]);
        }
    }
    let truth = GroundTruth::solve(&mdp, &features, theta_star, &SolverConfig::default())?;
    Ok(Environment { mdp, features, truth, terminal: vec![false; ns] })
}
