use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_in, PolyUnion};
use crate::governor::Governor;

use super::{fit_mlp, Env, FitConfig, Mlp};

/// `λ · q_old + (1 − λ) · (reward + γ · v_next)`.
pub fn q_target(lambda: f64, gamma: f64, q_old: f64, reward: f64, v_next: f64) -> f64 {
    lambda * q_old + (1.0 - lambda) * (reward + gamma * v_next)
}

fn q_input(obs: &[f64], u: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(obs.len() + u.len());
    z.extend_from_slice(obs);
    z.extend_from_slice(u);
    z
}

/// `Q(obs, ·)` on every grid action.
pub fn q_values(net: &Mlp<f64>, obs: &[f64], grid: &[Vec<f64>]) -> Vec<f64> {
    grid.iter().map(|u| net.forward(&q_input(obs, u))[0]).collect()
}

/// Index of the first grid action with the largest Q value.
pub fn greedy_index(net: &Mlp<f64>, obs: &[f64], grid: &[Vec<f64>]) -> usize {
    let qs = q_values(net, obs, grid);
    let mut best = 0;
    for (i, &q) in qs.iter().enumerate() {
        if q > qs[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy grid index: uniform with probability `epsilon`, else greedy.
pub fn select_action(
    net: &Mlp<f64>,
    obs: &[f64],
    grid: &[Vec<f64>],
    epsilon: f64,
    rng: &mut impl Rng,
) -> usize {
    assert!(!grid.is_empty(), "action grid is empty");
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..grid.len())
    } else {
        greedy_index(net, obs, grid)
    }
}

/// `n` evenly spaced points per coordinate of the box `[lo, hi]`.
pub fn uniform_grid(lo: &[f64], hi: &[f64], n: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = lo
        .iter()
        .zip(hi)
        .map(|(&l, &h)| {
            if n <= 1 {
                vec![l]
            } else {
                (0..n).map(|k| l + (h - l) * k as f64 / (n - 1) as f64).collect()
            }
        })
        .collect();
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// The agent's own action, before any shielding.
    pub u_nominal: Vec<f64>,
    pub q_target: f64,
    pub reward: f64,
    pub obs_next: Vec<f64>,
}

/// FIFO buffer of Q-learning targets.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            entries: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.entries.iter()
    }

    /// `n` entries drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<&Transition> {
        if self.entries.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.entries[rng.random_range(0..self.entries.len())])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QLearnerConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Points per input coordinate in the action grid.
    pub grid_points: usize,
    pub episodes: usize,
    /// Trajectories per episode.
    pub trajectories: usize,
    /// Steps per trajectory.
    pub steps: usize,
    pub buffer_capacity: usize,
    /// Buffer samples drawn for each refit.
    pub fit_samples: usize,
    pub fit: FitConfig,
    pub hidden: Vec<usize>,
    /// Q outputs are learned as `(Q − q_shift) / q_scale`.
    pub q_shift: f64,
    pub q_scale: f64,
    /// Reference phases are drawn from `[0, phase_span)`.
    pub phase_span: usize,
    /// Recompute the targets of sampled transitions with the current network
    /// before each refit instead of using the values stored at collection.
    pub refresh_targets: bool,
    pub seed: u64,
}

impl Default for QLearnerConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            gamma: 0.95,
            epsilon_start: 0.5,
            epsilon_end: 0.05,
            grid_points: 21,
            episodes: 200,
            trajectories: 10,
            steps: 150,
            buffer_capacity: 50_000,
            fit_samples: 4096,
            fit: FitConfig {
                epochs: 10,
                batch_size: 256,
                lr: 1e-2,
                momentum: 0.9,
                seed: 0,
            },
            hidden: vec![64, 64],
            q_shift: -100.0,
            q_scale: 100.0,
            phase_span: 120,
            refresh_targets: true,
            seed: 0,
        }
    }
}

impl QLearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        unit("lambda", self.lambda)?;
        unit("gamma", self.gamma)?;
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.grid_points == 0 {
            return Err(Error::InvalidArgument("grid_points must be positive".into()));
        }
        if self.q_scale == 0.0 || !self.q_scale.is_finite() {
            return Err(Error::InvalidArgument("q_scale must be finite and nonzero".into()));
        }
        Ok(())
    }

    /// Linear anneal from `epsilon_start` to `epsilon_end` over the episodes.
    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.episodes <= 1 {
            return self.epsilon_start;
        }
        let frac = episode as f64 / (self.episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_reward: f64,
    pub violation_rate: f64,
    /// Fraction of steps where the shield changed the action.
    pub modified_rate: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub q_net: Mlp<f64>,
    pub action_grid: Vec<Vec<f64>>,
    pub history: Vec<EpisodeStats>,
}

/// A fresh Q network sized for `env`, with inputs normalized to the
/// observation and action ranges.
pub fn new_q_net(env: &dyn Env, config: &QLearnerConfig) -> Result<Mlp<f64>> {
    let (lo, hi) = env.action_bounds();
    let mut sizes = vec![env.obs_dim() + lo.len()];
    sizes.extend_from_slice(&config.hidden);
    sizes.push(1);
    let (mut shift, mut scale) = env.obs_normalization();
    for (&l, &h) in lo.iter().zip(&hi) {
        shift.push(0.5 * (l + h));
        scale.push((0.5 * (h - l)).max(f64::EPSILON));
    }
    Mlp::new(&sizes, config.seed ^ 0x5eed)?
        .with_input_normalization(shift, scale)?
        .with_output_normalization(vec![config.q_shift], vec![config.q_scale])
}

/// Uniform initial state from `region` by rejection sampling.
pub fn random_initial_state(region: &PolyUnion<f64>, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let (lo, hi) = region.bounding_box()?;
    let mut pts = sample_in(&lo, &hi, 1, rng, |x| region.satisfies(x, 0.0))?;
    Ok(pts.pop().expect("one sample"))
}

/// Neural-fitted Q-learning with optional shielding. The agent chooses a
/// nominal action ε-greedily; with a shield, the governed action is applied
/// and rewarded, while the buffer stores the nominal action.
pub fn train(
    env: &dyn Env,
    config: &QLearnerConfig,
    shield: Option<&Governor<f64>>,
    init_region: Option<&PolyUnion<f64>>,
    initial_net: Option<Mlp<f64>>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let (lo, hi) = env.action_bounds();
    let grid = uniform_grid(&lo, &hi, config.grid_points);
    let mut net = match initial_net {
        Some(n) => n,
        None => new_q_net(env, config)?,
    };
    let region = init_region
        .or(shield.map(|g| &g.safe_set().set))
        .unwrap_or(env.constraint_set());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut history = Vec::with_capacity(config.episodes);

    for episode in 0..config.episodes {
        let eps = config.epsilon(episode);
        let (mut reward_sum, mut violations, mut modified, mut steps) = (0.0, 0usize, 0usize, 0usize);
        for _ in 0..config.trajectories {
            let mut x = random_initial_state(region, &mut rng)?;
            let t0 = if config.phase_span > 0 {
                rng.random_range(0..config.phase_span)
            } else {
                0
            };
            for t in t0..t0 + config.steps {
                let obs = env.observe(&x, t);
                let a = select_action(&net, &obs, &grid, eps, &mut rng);
                let u_nominal = grid[a].clone();
                let u_applied = match shield {
                    Some(g) => {
                        let r = g.govern(&x, &u_nominal)?;
                        modified += usize::from(r.modified);
                        r.u_safe
                    }
                    None => u_nominal.clone(),
                };
                let x_next = env.step(&x, &u_applied, &mut rng)?.next;
                if env.violates(&x_next) {
                    if shield.is_some() {
                        return Err(Error::ShieldedViolation(format!(
                            "episode {episode}: state {x_next:?} violates the constraints"
                        )));
                    }
                    violations += 1;
                }
                let reward = env.reward(&x, &u_applied, &x_next, t);
                let obs_next = env.observe(&x_next, t + 1);
                let target = td_target(&net, config, &grid, &obs, &u_nominal, reward, &obs_next);
                buffer.push(Transition {
                    obs,
                    u_nominal,
                    q_target: target,
                    reward,
                    obs_next,
                });
                reward_sum += reward;
                steps += 1;
                x = x_next;
            }
        }
        let batch = buffer.sample(config.fit_samples, &mut rng);
        if !batch.is_empty() {
            let xs: Vec<Vec<f64>> = batch.iter().map(|t| q_input(&t.obs, &t.u_nominal)).collect();
            let ys: Vec<Vec<f64>> = batch
                .iter()
                .map(|t| {
                    if config.refresh_targets {
                        vec![td_target(&net, config, &grid, &t.obs, &t.u_nominal, t.reward, &t.obs_next)]
                    } else {
                        vec![t.q_target]
                    }
                })
                .collect();
            let fit = FitConfig {
                seed: config.fit.seed ^ episode as u64,
                ..config.fit.clone()
            };
            fit_mlp(&mut net, &xs, &ys, &fit)?;
        }
        let denom = steps.max(1) as f64;
        history.push(EpisodeStats {
            episode,
            mean_reward: reward_sum / denom,
            violation_rate: violations as f64 / denom,
            modified_rate: modified as f64 / denom,
            epsilon: eps,
        });
    }
    Ok(TrainOutcome {
        q_net: net,
        action_grid: grid,
        history,
    })
}

fn td_target(
    net: &Mlp<f64>,
    config: &QLearnerConfig,
    grid: &[Vec<f64>],
    obs: &[f64],
    u: &[f64],
    reward: f64,
    obs_next: &[f64],
) -> f64 {
    let v_next = q_values(net, obs_next, grid)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let q_old = net.forward(&q_input(obs, u))[0];
    q_target(config.lambda, config.gamma, q_old, reward, v_next)
}

/// `episode, mean_reward, violation_rate, modified_rate, epsilon` as CSV text.
pub fn history_csv(history: &[EpisodeStats]) -> String {
    let mut out = String::from("episode,mean_reward,violation_rate,modified_rate,epsilon\n");
    for h in history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            h.episode, h.mean_reward, h.violation_rate, h.modified_rate, h.epsilon
        ));
    }
    out
}
