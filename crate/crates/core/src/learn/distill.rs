use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PolyUnion;
use crate::governor::Governor;

use super::{fit_mlp, random_initial_state, Env, ExplicitPolicy, FitConfig, Mlp, Policy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillConfig {
    /// Number of (observation, governed input) pairs collected.
    pub dataset_size: usize,
    pub holdout_fraction: f64,
    /// Length of each expert rollout.
    pub rollout_steps: usize,
    pub phase_span: usize,
    pub hidden: Vec<usize>,
    pub fit: FitConfig,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            dataset_size: 20_000,
            holdout_fraction: 0.2,
            rollout_steps: 120,
            phase_span: 120,
            hidden: vec![64, 64],
            fit: FitConfig {
                epochs: 60,
                batch_size: 128,
                lr: 1e-2,
                momentum: 0.9,
                seed: 0,
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillReport {
    pub train_samples: usize,
    pub holdout_samples: usize,
    /// Mean squared error of the clipped policy output, in input units.
    pub train_mse: f64,
    pub holdout_mse: f64,
    pub epoch_losses: Vec<f64>,
}

/// Behavioral cloning of the governed expert `shield ∘ expert` from rollouts
/// started at random points of `init_region`.
pub fn distill(
    env: &dyn Env,
    expert: &dyn Policy,
    shield: &Governor<f64>,
    init_region: Option<&PolyUnion<f64>>,
    config: &DistillConfig,
) -> Result<(ExplicitPolicy, DistillReport)> {
    if config.dataset_size < 2 {
        return Err(Error::InvalidArgument("dataset_size must be at least 2".into()));
    }
    if !(0.0..1.0).contains(&config.holdout_fraction) {
        return Err(Error::InvalidArgument("holdout_fraction must lie in [0, 1)".into()));
    }
    let region = init_region.unwrap_or(&shield.safe_set().set);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut obs_data = Vec::with_capacity(config.dataset_size);
    let mut u_data = Vec::with_capacity(config.dataset_size);
    'collect: loop {
        let mut x = random_initial_state(region, &mut rng)?;
        let t0 = if config.phase_span > 0 {
            rng.random_range(0..config.phase_span)
        } else {
            0
        };
        for t in t0..t0 + config.rollout_steps.max(1) {
            let obs = env.observe(&x, t);
            let u = shield.govern(&x, &expert.act(&obs))?.u_safe;
            x = env.step(&x, &u, &mut rng)?.next;
            obs_data.push(obs);
            u_data.push(u);
            if obs_data.len() == config.dataset_size {
                break 'collect;
            }
        }
    }

    let mut order: Vec<usize> = (0..obs_data.len()).collect();
    order.shuffle(&mut rng);
    let n_hold = ((obs_data.len() as f64) * config.holdout_fraction).round() as usize;
    let (hold_idx, train_idx) = order.split_at(n_hold);
    let pick = |idx: &[usize], src: &[Vec<f64>]| -> Vec<Vec<f64>> {
        idx.iter().map(|&i| src[i].clone()).collect()
    };
    let (train_x, train_y) = (pick(train_idx, &obs_data), pick(train_idx, &u_data));
    let (hold_x, hold_y) = (pick(hold_idx, &obs_data), pick(hold_idx, &u_data));

    let (lo, hi) = env.action_bounds();
    let mut sizes = vec![env.obs_dim()];
    sizes.extend_from_slice(&config.hidden);
    sizes.push(lo.len());
    let (shift, scale) = env.obs_normalization();
    let mid: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let half: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| (0.5 * (h - l)).max(f64::EPSILON))
        .collect();
    let mut net = Mlp::new(&sizes, config.seed ^ 0xd15)?
        .with_input_normalization(shift, scale)?
        .with_output_normalization(mid, half)?;
    let epoch_losses = fit_mlp(&mut net, &train_x, &train_y, &config.fit)?;
    let policy = ExplicitPolicy { net, lo, hi };
    let report = DistillReport {
        train_samples: train_x.len(),
        holdout_samples: hold_x.len(),
        train_mse: mse(&policy, &train_x, &train_y),
        holdout_mse: mse(&policy, &hold_x, &hold_y),
        epoch_losses,
    };
    Ok((policy, report))
}

fn mse(policy: &ExplicitPolicy, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    let mut count = 0;
    for (x, y) in xs.iter().zip(ys) {
        for (p, t) in policy.act(x).iter().zip(y) {
            total += (p - t).powi(2);
            count += 1;
        }
    }
    total / count as f64
}
