use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::PolyUnion;

use super::Mlp;

/// A control task with a time-indexed observation (state plus any reference).
pub trait Env: Sync {
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    /// Componentwise input bounds `(lo, hi)`.
    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn observe(&self, x: &[f64], t: usize) -> Vec<f64>;
    fn step(&self, x: &[f64], u: &[f64], rng: &mut ChaCha8Rng) -> Result<EnvStep>;
    /// Reward for applying `u` in `x` and landing in `x_next`.
    fn reward(&self, x: &[f64], u: &[f64], x_next: &[f64], t: usize) -> f64;
    fn violates(&self, x: &[f64]) -> bool;
    /// Default region for random initial states.
    fn constraint_set(&self) -> &PolyUnion<f64>;
    /// Typical center and spread of each observation coordinate, used to
    /// normalize network inputs.
    fn obs_normalization(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.obs_dim()], vec![1.0; self.obs_dim()])
    }
}

/// One transition and the disturbance that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub next: Vec<f64>,
    pub mode: usize,
    pub wp: Vec<f64>,
    pub wa: Vec<f64>,
}

/// Observation → input map.
pub trait Policy: Sync {
    fn act(&self, obs: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantPolicy(pub Vec<f64>);

impl Policy for ConstantPolicy {
    fn act(&self, _obs: &[f64]) -> Vec<f64> {
        self.0.clone()
    }
}

/// Greedy over a finite action grid: `argmax_u Q(obs, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyQPolicy {
    pub net: Mlp<f64>,
    pub action_grid: Vec<Vec<f64>>,
}

impl Policy for GreedyQPolicy {
    fn act(&self, obs: &[f64]) -> Vec<f64> {
        let i = super::qlearn::greedy_index(&self.net, obs, &self.action_grid);
        self.action_grid[i].clone()
    }
}

/// Direct regression policy clipped to the input bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitPolicy {
    pub net: Mlp<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Policy for ExplicitPolicy {
    fn act(&self, obs: &[f64]) -> Vec<f64> {
        self.net
            .forward(obs)
            .into_iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(u, (&l, &h))| u.clamp(l, h))
            .collect()
    }
}
