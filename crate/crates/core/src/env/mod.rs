//! Benchmark domains with known ground-truth rewards.

mod features;
mod gridworld;
mod sailing;

pub use features::{perturb_features, random_transform, transform_features};
pub use gridworld::{make_gridworld, GridworldSpec};
pub use sailing::{classify_leg, leg_features, make_sailing, AngleClass, SailingSpec, Tack, SAILING_THETA_STAR};

use crate::error::Result;
use crate::mdp::{greedy_policy, value_iteration, FeatureMap, SolverConfig, StochasticPolicy, TabularMdp};

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub theta_star: Vec<f64>,
    pub optimal_policy: StochasticPolicy,
}

impl GroundTruth {
    /// Greedy policy of the optimal action values under `θ*`.
    pub fn solve(mdp: &TabularMdp, features: &FeatureMap, theta_star: Vec<f64>, solver: &SolverConfig) -> Result<Self> {
        let q = value_iteration(mdp, &features.dot(&theta_star), solver.tol, solver.max_iter)?.value;
        Ok(GroundTruth { theta_star, optimal_policy: greedy_policy(&q) })
    }
}

/// A generated benchmark instance.
#[derive(Debug, Clone)]
pub struct Environment {
    pub mdp: TabularMdp,
    pub features: FeatureMap,
    pub truth: GroundTruth,
    /// States after which expert episodes end.
    pub terminal: Vec<bool>,
}
