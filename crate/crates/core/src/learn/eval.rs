use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::PolyUnion;
use crate::governor::Governor;

use super::{random_initial_state, Env, Policy};

#[derive(Debug, Clone, PartialEq)]
pub enum InitialStates {
    Fixed(Vec<f64>),
    Sampled(PolyUnion<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub rollouts: usize,
    pub steps: usize,
    pub seed: u64,
    /// Keep per-step traces of every rollout.
    pub record: bool,
}

/// One row of a governed trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub t: usize,
    pub x: Vec<f64>,
    pub u_phi: Vec<f64>,
    pub u_safe: Vec<f64>,
    pub mode: usize,
    pub wp: Vec<f64>,
    pub wa: Vec<f64>,
    pub modified: bool,
    pub objective: f64,
    pub reward: f64,
    /// The successor violates the constraints.
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub total_reward: f64,
    pub violations: usize,
    pub steps: usize,
    pub elapsed_ns: u128,
    pub trace: Vec<TraceStep>,
    pub final_state: Vec<f64>,
}

/// Deterministic summary; wall-clock figures live in [`EvalTiming`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rollouts: usize,
    pub steps: usize,
    /// Steps whose successor violated the constraints.
    pub violations: usize,
    pub rollouts_with_violation: usize,
    /// `violations / steps`.
    pub violation_rate: f64,
    /// Mean reward per step.
    pub mean_reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalTiming {
    /// Policy plus shield time per step, microseconds.
    pub timing_us_per_step: f64,
}

/// RNG of rollout `index`: the master seed with its own stream.
pub fn rollout_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs one rollout from `x0`, starting the reference clock at `t0`.
#[allow(clippy::too_many_arguments)]
pub fn rollout(
    env: &dyn Env,
    policy: &dyn Policy,
    shield: Option<&Governor<f64>>,
    x0: Vec<f64>,
    t0: usize,
    steps: usize,
    record: bool,
    rng: &mut ChaCha8Rng,
) -> Result<RolloutResult> {
    let mut x = x0;
    let mut out = RolloutResult {
        total_reward: 0.0,
        violations: 0,
        steps: 0,
        elapsed_ns: 0,
        trace: Vec::new(),
        final_state: Vec::new(),
    };
    for t in t0..t0 + steps {
        let started = Instant::now();
        let obs = env.observe(&x, t);
        let u_phi = policy.act(&obs);
        let (u_safe, modified, objective) = match shield {
            Some(g) => {
                let r = g.govern(&x, &u_phi)?;
                (r.u_safe, r.modified, r.objective)
            }
            None => (u_phi.clone(), false, 0.0),
        };
        out.elapsed_ns += started.elapsed().as_nanos();
        let step = env.step(&x, &u_safe, rng)?;
        let violation = env.violates(&step.next);
        let reward = env.reward(&x, &u_safe, &step.next, t);
        out.total_reward += reward;
        out.violations += usize::from(violation);
        out.steps += 1;
        if record {
            out.trace.push(TraceStep {
                t,
                x: x.clone(),
                u_phi,
                u_safe,
                mode: step.mode,
                wp: step.wp,
                wa: step.wa,
                modified,
                objective,
                reward,
                violation,
            });
        }
        x = step.next;
    }
    out.final_state = x;
    Ok(out)
}

/// Independent rollouts with per-rollout RNG streams, run in parallel and
/// reduced in rollout order.
pub fn evaluate(
    env: &dyn Env,
    policy: &dyn Policy,
    shield: Option<&Governor<f64>>,
    initial: &InitialStates,
    config: &EvalConfig,
) -> Result<(EvalReport, EvalTiming, Vec<RolloutResult>)> {
    let results: Vec<RolloutResult> = (0..config.rollouts)
        .into_par_iter()
        .map(|i| {
            let mut rng = rollout_rng(config.seed, i);
            let x0 = match initial {
                InitialStates::Fixed(x) => x.clone(),
                InitialStates::Sampled(region) => random_initial_state(region, &mut rng)?,
            };
            rollout(env, policy, shield, x0, 0, config.steps, config.record, &mut rng)
        })
        .collect::<Result<_>>()?;
    let steps: usize = results.iter().map(|r| r.steps).sum();
    let violations: usize = results.iter().map(|r| r.violations).sum();
    let reward: f64 = results.iter().map(|r| r.total_reward).sum();
    let elapsed: u128 = results.iter().map(|r| r.elapsed_ns).sum();
    let denom = steps.max(1) as f64;
    let report = EvalReport {
        rollouts: config.rollouts,
        steps,
        violations,
        rollouts_with_violation: results.iter().filter(|r| r.violations > 0).count(),
        violation_rate: violations as f64 / denom,
        mean_reward: reward / denom,
    };
    let timing = EvalTiming {
        timing_us_per_step: elapsed as f64 / 1e3 / denom,
    };
    Ok((report, timing, results))
}

/// Header of the trajectory CSV for the given dimensions.
pub fn trace_header(n: usize, m: usize, n_p: usize, n_a: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n).map(|i| format!("x{i}")));
    cols.extend((0..m).map(|i| format!("u_phi{i}")));
    cols.extend((0..m).map(|i| format!("u_safe{i}")));
    cols.push("mode".into());
    cols.extend((0..n_p).map(|i| format!("wp{i}")));
    cols.extend((0..n_a).map(|i| format!("wa{i}")));
    cols.push("modified".into());
    cols.push("objective".into());
    cols.join(",")
}

/// Trajectory as CSV text: `t, x..., u_phi..., u_safe..., mode, wp..., wa..., modified, objective`.
pub fn trace_csv(trace: &[TraceStep]) -> String {
    let Some(first) = trace.first() else {
        return String::new();
    };
    let mut out = trace_header(first.x.len(), first.u_phi.len(), first.wp.len(), first.wa.len());
    out.push('\n');
    for s in trace {
        let mut row = vec![s.t.to_string()];
        row.extend(s.x.iter().map(f64::to_string));
        row.extend(s.u_phi.iter().map(f64::to_string));
        row.extend(s.u_safe.iter().map(f64::to_string));
        row.push(s.mode.to_string());
        row.extend(s.wp.iter().map(f64::to_string));
        row.extend(s.wa.iter().map(f64::to_string));
        row.push(u8::from(s.modified).to_string());
        row.push(s.objective.to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
