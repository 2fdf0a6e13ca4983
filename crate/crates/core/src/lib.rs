//! Tabular inverse reinforcement learning.
//!
//! A linear reward `θᵀφ` is fitted so that the Boltzmann policy of its
//! optimal action values matches an expert. Plain, natural and RPROP gradient
//! descent are provided, alongside the max-margin and projection
//! feature-matching baselines, two benchmark domains and a seeded experiment
//! harness.

pub mod baselines;
pub mod env;
pub mod error;
pub mod expert;
pub mod gradient;
pub mod harness;
pub mod io;
pub mod mdp;
pub mod optimizers;
pub mod policy_map;

pub use error::{Error, Result};
pub use gradient::{loss, loss_gradient, LinearRewardModel, LossTarget};
pub use mdp::{FeatureMap, QTable, RewardTable, SolverConfig, StateWeights, StochasticPolicy, TabularMdp, VectorQTable};
pub use optimizers::{train_irl, Method, OptimizerConfig, TrainTrace};
