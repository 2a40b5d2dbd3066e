use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::governor::{Governor, GovernorConfig};
use crate::learn::{
    distill, evaluate, history_csv, rollout, rollout_rng, trace_csv, train, DistillConfig,
    EpisodeStats, EvalConfig, EvalReport, GreedyQPolicy, InitialStates, QLearnerConfig,
};
use crate::linalg::Matrix;
use crate::pwa::PwaModel;
use crate::safe_set::{self, SafeSetConfig, SafeSetIterate};

use super::env::{DisturbanceMode, MsdEnv};
use super::model::{build_constraint_polygon, build_model, MsdParams, MsdVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    GovernedVsNominal,
    MonteCarlo500,
    SafeRlTrain,
    DistillCompare,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::GovernedVsNominal,
        Experiment::MonteCarlo500,
        Experiment::SafeRlTrain,
        Experiment::DistillCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GovernedVsNominal => "governed_vs_nominal",
            Experiment::MonteCarlo500 => "monte_carlo_500",
            Experiment::SafeRlTrain => "safe_rl_train",
            Experiment::DistillCompare => "distill_compare",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub params: MsdParams,
    pub variant: MsdVariant,
    pub k_max: usize,
    /// Samples per monotonicity check during safe-set computation.
    pub convergence_samples: usize,
    pub reference_period: usize,
    pub w1: f64,
    pub w2: f64,
    /// Length of evaluation rollouts.
    pub steps: usize,
    pub monte_carlo_rollouts: usize,
    /// Monte-Carlo rollouts whose trajectories are written out.
    pub traj_rollouts: usize,
    /// Training of the unshielded nominal policy.
    pub nominal: QLearnerConfig,
    /// Shielded and unshielded training on the variant.
    pub adaptation: QLearnerConfig,
    /// Start adaptation from the nominal Q-network.
    pub warm_start: bool,
    pub distill: DistillConfig,
    /// Closed-loop rollouts of the distilled and governed policies.
    pub distill_rollouts: usize,
    /// Directory holding reusable safe sets and the nominal network. Defaults
    /// to the output directory.
    pub cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: MsdParams::default(),
            variant: MsdVariant::default(),
            k_max: 60,
            convergence_samples: 10_000,
            reference_period: 60,
            w1: 1.0,
            w2: 1.0,
            steps: 240,
            monte_carlo_rollouts: 500,
            traj_rollouts: 3,
            nominal: QLearnerConfig::default(),
            adaptation: QLearnerConfig::default(),
            warm_start: true,
            distill: DistillConfig::default(),
            distill_rollouts: 100,
            cache_dir: None,
        }
    }
}

/// Shared inputs of the experiments: environments, safe sets, governors and
/// the nominal policy.
pub struct Setup {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub cache: PathBuf,
}

impl Setup {
    pub fn new(config: ExperimentConfig, seed: u64, out_dir: &Path) -> Result<Self> {
        config.params.validate()?;
        config.variant.apply(&config.params)?;
        let cache = config.cache_dir.clone().unwrap_or_else(|| out_dir.to_path_buf());
        fs::create_dir_all(&cache)?;
        Ok(Self { config, seed, cache })
    }

    pub fn variant_params(&self) -> MsdParams {
        self.config.variant.apply(&self.config.params).expect("validated")
    }

    pub fn env(&self, params: &MsdParams, disturbance: DisturbanceMode) -> Result<MsdEnv> {
        Ok(MsdEnv::new(params.clone(), disturbance)?
            .with_reference_period(self.config.reference_period)
            .with_weights(self.config.w1, self.config.w2))
    }

    /// The k-step safe set of `params`, read from the cache when a file for
    /// the same model and horizon exists.
    pub fn safe_set(&self, params: &MsdParams, file: &str) -> Result<SafeSetIterate<f64>> {
        let model = build_model(params)?;
        let hash = model.content_hash();
        let path = self.cache.join(file);
        if path.exists() {
            let (it, stored) = safe_set::from_json::<f64>(&fs::read_to_string(&path)?)?;
            if stored == hash && it.k == self.config.k_max {
                return Ok(it);
            }
        }
        let cfg = SafeSetConfig {
            k_max: self.config.k_max,
            convergence_samples: self.config.convergence_samples,
            seed: self.seed,
            ..SafeSetConfig::default()
        };
        let it = safe_set::compute(&model, &build_constraint_polygon(params)?, &cfg)?;
        fs::write(&path, safe_set::to_json(&it, &hash)?)?;
        Ok(it)
    }

    pub fn governor(&self, model: PwaModel<f64>, set: SafeSetIterate<f64>) -> Result<Governor<f64>> {
        let s = Matrix::identity(model.input_dim());
        Governor::new(GovernorConfig::new(s, model, set)?)
    }

    /// Unshielded Q-network trained on the nominal plant, cached as JSON.
    pub fn nominal_policy(&self) -> Result<GreedyQPolicy> {
        let key = json!({
            "params": self.config.params,
            "training": self.config.nominal,
            "seed": self.seed,
            "weights": [self.config.w1, self.config.w2],
            "reference_period": self.config.reference_period,
        });
        let digest = Sha256::digest(key.to_string().as_bytes());
        let tag = hex::encode(&digest[..6]);
        let path = self.cache.join(format!("nominal_policy_{tag}.json"));
        if path.exists() {
            return Ok(serde_json::from_str(&fs::read_to_string(&path)?)?);
        }
        let env = self.env(&self.config.params, DisturbanceMode::Random)?;
        let cfg = QLearnerConfig {
            seed: self.seed,
            ..self.config.nominal.clone()
        };
        let out = train(&env, &cfg, None, None, None)?;
        let policy = GreedyQPolicy {
            net: out.q_net,
            action_grid: out.action_grid,
        };
        fs::write(&path, serde_json::to_string(&policy)?)?;
        fs::write(self.cache.join(format!("nominal_history_{tag}.csv")), history_csv(&out.history))?;
        Ok(policy)
    }
}

/// Deterministic results plus wall-clock figures kept apart so that reruns
/// reproduce `metrics.json` byte for byte.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub metrics: Value,
    pub timing: Value,
    pub files: Vec<PathBuf>,
}

/// Runs one experiment and writes its files into `out_dir`.
pub fn run_experiment(
    which: Experiment,
    seed: u64,
    out_dir: &Path,
    config: &ExperimentConfig,
) -> Result<ExperimentOutput> {
    fs::create_dir_all(out_dir)?;
    let setup = Setup::new(config.clone(), seed, out_dir)?;
    let mut files = Vec::new();
    let (metrics, timing) = match which {
        Experiment::GovernedVsNominal => governed_vs_nominal(&setup, out_dir, &mut files)?,
        Experiment::MonteCarlo500 => monte_carlo(&setup, out_dir, &mut files)?,
        Experiment::SafeRlTrain => safe_rl_train(&setup, out_dir, &mut files)?,
        Experiment::DistillCompare => distill_compare(&setup, out_dir, &mut files)?,
    };
    let metrics_path = out_dir.join("metrics.json");
    fs::write(&metrics_path, serde_json::to_string_pretty(&metrics)?)?;
    let timing_path = out_dir.join("timing.json");
    fs::write(&timing_path, serde_json::to_string_pretty(&timing)?)?;
    files.push(metrics_path);
    files.push(timing_path);
    Ok(ExperimentOutput {
        metrics,
        timing,
        files,
    })
}

fn write(path: PathBuf, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, text)?;
    files.push(path);
    Ok(())
}

fn report_json(r: &EvalReport) -> Value {
    json!({
        "rollouts": r.rollouts,
        "steps": r.steps,
        "violations": r.violations,
        "rollouts_with_violation": r.rollouts_with_violation,
        "violation_rate": r.violation_rate,
        "mean_reward": r.mean_reward,
    })
}

/// Violating steps in each reference period of a trace.
fn violations_per_period(trace: &[crate::learn::TraceStep], period: usize) -> Vec<usize> {
    let mut counts = vec![0; trace.len().div_ceil(period.max(1))];
    for (i, s) in trace.iter().enumerate() {
        counts[i / period.max(1)] += usize::from(s.violation);
    }
    counts
}

fn governed_vs_nominal(
    setup: &Setup,
    out_dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<(Value, Value)> {
    let p = &setup.config.params;
    let env = setup.env(p, DisturbanceMode::Adversarial)?;
    let policy = setup.nominal_policy()?;
    let shield = setup.governor(env.model.clone(), setup.safe_set(p, "safe_set.json")?)?;
    let steps = setup.config.steps;
    let x0 = vec![0.0, 0.0];
    let mut runs = serde_json::Map::new();
    let mut timing = serde_json::Map::new();
    for (name, g) in [("nominal", None), ("governed", Some(&shield))] {
        let mut rng = rollout_rng(setup.seed, 0);
        let r = rollout(&env, &policy, g, x0.clone(), 0, steps, true, &mut rng)?;
        let per_period = violations_per_period(&r.trace, setup.config.reference_period);
        let periods_with_violation = per_period.iter().filter(|&&c| c > 0).count();
        runs.insert(
            name.into(),
            json!({
                "steps": r.steps,
                "violations": r.violations,
                "violations_per_period": per_period,
                "periods": per_period.len(),
                "periods_with_violation": periods_with_violation,
                "mean_reward": r.total_reward / r.steps.max(1) as f64,
                "modified_steps": r.trace.iter().filter(|s| s.modified).count(),
            }),
        );
        timing.insert(
            name.into(),
            json!({ "timing_us_per_step": r.elapsed_ns as f64 / 1e3 / r.steps.max(1) as f64 }),
        );
        write(out_dir.join(format!("traj_{name}.csv")), &trace_csv(&r.trace), files)?;
    }
    Ok((Value::Object(runs), Value::Object(timing)))
}

fn monte_carlo(setup: &Setup, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<(Value, Value)> {
    let p = &setup.config.params;
    let env = setup.env(p, DisturbanceMode::Random)?;
    let policy = setup.nominal_policy()?;
    let shield = setup.governor(env.model.clone(), setup.safe_set(p, "safe_set.json")?)?;
    let cfg = EvalConfig {
        rollouts: setup.config.monte_carlo_rollouts,
        steps: setup.config.steps,
        seed: setup.seed,
        record: true,
    };
    let initial = InitialStates::Fixed(vec![0.0, 0.0]);
    let (report, timing, results) = evaluate(&env, &policy, Some(&shield), &initial, &cfg)?;
    for (i, r) in results.iter().take(setup.config.traj_rollouts).enumerate() {
        write(out_dir.join(format!("traj_{i:03}.csv")), &trace_csv(&r.trace), files)?;
    }
    let modified: usize = results
        .iter()
        .map(|r| r.trace.iter().filter(|s| s.modified).count())
        .sum();
    let mut metrics = report_json(&report);
    metrics["modified_steps"] = json!(modified);
    Ok((metrics, json!({ "timing_us_per_step": timing.timing_us_per_step })))
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn history_summary(h: &[EpisodeStats], window: usize) -> Value {
    let w = window.min(h.len());
    let total_violations: f64 = h.iter().map(|e| e.violation_rate).sum();
    json!({
        "episodes": h.len(),
        "first_mean_reward": mean(h[..w].iter().map(|e| e.mean_reward)),
        "final_mean_reward": mean(h[h.len() - w..].iter().map(|e| e.mean_reward)),
        "first_violation_rate": mean(h[..w].iter().map(|e| e.violation_rate)),
        "final_violation_rate": mean(h[h.len() - w..].iter().map(|e| e.violation_rate)),
        "episodes_with_violation": h.iter().filter(|e| e.violation_rate > 0.0).count(),
        "any_violation": total_violations > 0.0,
        "window": w,
    })
}

fn safe_rl_train(
    setup: &Setup,
    out_dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<(Value, Value)> {
    let vp = setup.variant_params();
    let env = setup
        .env(&vp, DisturbanceMode::Random)?
        .with_plant_mass(setup.config.variant.m);
    let shield = setup.governor(env.model.clone(), setup.safe_set(&vp, "safe_set_variant.json")?)?;
    let initial = if setup.config.warm_start {
        Some(setup.nominal_policy()?.net)
    } else {
        None
    };
    let cfg = QLearnerConfig {
        seed: setup.seed,
        ..setup.config.adaptation.clone()
    };
    let mut metrics = serde_json::Map::new();
    let mut timing = serde_json::Map::new();
    for (name, g) in [("shielded", Some(&shield)), ("unshielded", None)] {
        let started = std::time::Instant::now();
        let out = train(&env, &cfg, g, Some(&shield.safe_set().set), initial.clone())?;
        timing.insert(name.into(), json!({ "seconds": started.elapsed().as_secs_f64() }));
        write(out_dir.join(format!("history_{name}.csv")), &history_csv(&out.history), files)?;
        let policy = GreedyQPolicy {
            net: out.q_net,
            action_grid: out.action_grid,
        };
        write(out_dir.join(format!("qnet_{name}.json")), &serde_json::to_string(&policy)?, files)?;
        metrics.insert(name.into(), history_summary(&out.history, 20));
    }
    Ok((Value::Object(metrics), Value::Object(timing)))
}

fn distill_compare(
    setup: &Setup,
    out_dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<(Value, Value)> {
    let p = &setup.config.params;
    let env = setup.env(p, DisturbanceMode::Random)?;
    let expert = setup.nominal_policy()?;
    let shield = setup.governor(env.model.clone(), setup.safe_set(p, "safe_set.json")?)?;
    let cfg = DistillConfig {
        seed: setup.seed,
        ..setup.config.distill.clone()
    };
    let (explicit, report) = distill(&env, &expert, &shield, None, &cfg)?;
    write(out_dir.join("policy_explicit.json"), &serde_json::to_string(&explicit)?, files)?;

    let eval_cfg = EvalConfig {
        rollouts: setup.config.distill_rollouts,
        steps: setup.config.steps,
        seed: setup.seed,
        record: false,
    };
    let initial = InitialStates::Fixed(vec![0.0, 0.0]);
    let (r_explicit, t_explicit, _) = evaluate(&env, &explicit, None, &initial, &eval_cfg)?;
    let (r_governed, t_governed, _) = evaluate(&env, &expert, Some(&shield), &initial, &eval_cfg)?;
    let (t_e, t_g) = (t_explicit.timing_us_per_step, t_governed.timing_us_per_step);
    let metrics = json!({
        "train_samples": report.train_samples,
        "holdout_samples": report.holdout_samples,
        "train_mse": report.train_mse,
        "holdout_mse": report.holdout_mse,
        "explicit": report_json(&r_explicit),
        "governed": report_json(&r_governed),
    });
    let timing = json!({
        "explicit_us_per_step": t_e,
        "governed_us_per_step": t_g,
        "time_reduction": if t_g > 0.0 { 1.0 - t_e / t_g } else { 0.0 },
    });
    Ok((metrics, timing))
}
