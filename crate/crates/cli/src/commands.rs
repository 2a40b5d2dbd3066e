use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use ragkit::geometry::{PolyUnion, UnionDoc};
use ragkit::governor::GovernorConfig;
use ragkit::learn::{
    self, ConstantPolicy, DistillConfig, EvalConfig, ExplicitPolicy, GreedyQPolicy, InitialStates,
    Policy, QLearnerConfig,
};
use ragkit::linalg::Matrix;
use ragkit::msd::{
    build_model, run_experiment, DisturbanceMode, Experiment, ExperimentConfig, MsdEnv, MsdParams,
    MsdVariant,
};
use ragkit::{ActionGovernor, Model, QNetwork, SafeSet};
use ragkit::safe_set::{self, SafeSetConfig};

use crate::manifest::{beside, RunManifest};
use crate::{
    DisturbanceArg, DistillArgs, EvaluateArgs, ExperimentArgs, ExportArgs, PlantArgs,
    SafesetArgs, SimulateArgs, TrainArgs,
};

/// Bad input files or arguments; reported with exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_err(path: &Path, e: impl fmt::Display) -> anyhow::Error {
    InputError(format!("{}: {e}", path.display())).into()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| input_err(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| input_err(path, e))
}

fn read_model(path: &Path) -> Result<Model> {
    Model::from_json(&read_text(path)?).map_err(|e| input_err(path, e))
}

fn read_union(path: &Path) -> Result<PolyUnion<f64>> {
    let doc: UnionDoc<f64> = read_json(path)?;
    doc.to_union().map_err(|e| input_err(path, e))
}

fn read_safe_set(path: &Path) -> Result<(SafeSet, String)> {
    safe_set::from_json(&read_text(path)?).map_err(|e| input_err(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Governor over `model` and the safe set at `path`, refusing sets computed
/// for a different model.
fn governor(model: Model, path: &Path) -> Result<ActionGovernor> {
    let (set, hash) = read_safe_set(path)?;
    if !hash.is_empty() && hash != model.content_hash() {
        return Err(input_err(path, "safe set was computed for a different model"));
    }
    let s = Matrix::identity(model.input_dim());
    Ok(ActionGovernor::new(GovernorConfig::new(s, model, set)?)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PlantSpec {
    params: MsdParams,
    plant_mass: Option<f64>,
    period: usize,
}

fn plant_spec(args: &PlantArgs) -> Result<PlantSpec> {
    let base: MsdParams = match &args.params {
        Some(p) => read_json(p)?,
        None => MsdParams::default(),
    };
    base.validate().map_err(|e| InputError(format!("params: {e}")))?;
    let (params, plant_mass) = if args.variant {
        let v = MsdVariant::default();
        (v.apply(&base)?, Some(v.m))
    } else {
        (base, None)
    };
    Ok(PlantSpec {
        params,
        plant_mass,
        period: args.period,
    })
}

fn plant_env(spec: &PlantSpec, disturbance: DisturbanceMode) -> Result<MsdEnv> {
    let mut env = MsdEnv::new(spec.params.clone(), disturbance)?.with_reference_period(spec.period);
    if let Some(m) = spec.plant_mass {
        env = env.with_plant_mass(m);
    }
    Ok(env)
}

fn disturbance(d: DisturbanceArg) -> DisturbanceMode {
    match d {
        DisturbanceArg::Random => DisturbanceMode::Random,
        DisturbanceArg::Adversarial => DisturbanceMode::Adversarial,
        DisturbanceArg::None => DisturbanceMode::None,
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PolicyDoc {
    Greedy(GreedyQPolicy),
    Explicit(ExplicitPolicy),
}

/// `constant:<u1>,<u2>,...` or a greedy/explicit policy JSON file.
fn read_policy(spec: &str) -> Result<Box<dyn Policy>> {
    if let Some(values) = spec.strip_prefix("constant:") {
        let u = values
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| InputError(format!("policy {spec:?}: {e}")))?;
        return Ok(Box::new(ConstantPolicy(u)));
    }
    let path = Path::new(spec);
    Ok(match read_json::<PolicyDoc>(path)? {
        PolicyDoc::Greedy(p) => Box::new(p),
        PolicyDoc::Explicit(p) => Box::new(p),
    })
}

fn policy_input(spec: &str) -> Option<PathBuf> {
    (!spec.starts_with("constant:")).then(|| PathBuf::from(spec))
}

fn check_state(x0: &[f64]) -> Result<()> {
    if x0.len() != 2 {
        bail!(InputError(format!("x0 must have 2 entries, got {}", x0.len())));
    }
    Ok(())
}

pub fn safeset_compute(a: SafesetArgs) -> Result<()> {
    let mut manifest = RunManifest::start();
    manifest.inputs([&Some(a.model.clone()), &Some(a.constraints.clone())])?;
    manifest.seed(a.seed);
    let model = read_model(&a.model)?;
    let x = read_union(&a.constraints)?;
    let cfg = SafeSetConfig {
        k_max: a.k,
        convergence_samples: a.samples,
        early_stop: a.early_stop,
        seed: a.seed,
        ..SafeSetConfig::default()
    };
    let it = safe_set::compute_with(&model, &x, &cfg, |it| {
        eprintln!("k={} pieces={}", it.k, it.set.len());
    })?;
    write_file(&a.out, &safe_set::to_json(&it, &model.content_hash())?)?;
    manifest.finish(std::slice::from_ref(&a.out), &beside(&a.out))
}

pub fn govern_simulate(a: SimulateArgs) -> Result<()> {
    check_state(&a.x0)?;
    let mut manifest = RunManifest::start();
    manifest.inputs([&a.model, &Some(a.safe.clone()), &a.plant.params, &policy_input(&a.policy)])?;
    manifest.seed(a.seed);
    let spec = plant_spec(&a.plant)?;
    let env = plant_env(&spec, disturbance(a.disturbance))?;
    let model = match &a.model {
        Some(p) => read_model(p)?,
        None => build_model(&spec.params)?,
    };
    let shield = governor(model, &a.safe)?;
    let policy = read_policy(&a.policy)?;
    let mut rng = learn::rollout_rng(a.seed, 0);
    let g = (!a.unshielded).then_some(&shield);
    let r = learn::rollout(&env, policy.as_ref(), g, a.x0.clone(), 0, a.steps, true, &mut rng)?;
    write_file(&a.out, &learn::trace_csv(&r.trace))?;
    let summary = json!({
        "steps": r.steps,
        "violations": r.violations,
        "modified_steps": r.trace.iter().filter(|s| s.modified).count(),
        "mean_reward": r.total_reward / r.steps.max(1) as f64,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    manifest.finish(std::slice::from_ref(&a.out), &beside(&a.out))
}

const RUN_FILE: &str = "run.json";
const QNET_FILE: &str = "qnet.json";

#[derive(Debug, Serialize, Deserialize)]
struct RunInfo {
    env: String,
    plant: PlantSpec,
    shield: Option<PathBuf>,
    seed: u64,
}

pub fn rl_train(a: TrainArgs) -> Result<()> {
    let mut manifest = RunManifest::start();
    manifest.inputs([&a.config, &a.shield, &a.init, &a.plant.params])?;
    manifest.seed(a.seed);
    let mut cfg: QLearnerConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => QLearnerConfig::default(),
    };
    cfg.seed = a.seed;
    cfg.validate().map_err(|e| InputError(format!("config: {e}")))?;
    let spec = plant_spec(&a.plant)?;
    let env = plant_env(&spec, DisturbanceMode::Random)?;
    let shield = match &a.shield {
        Some(p) => Some(governor(env.model.clone(), p)?),
        None => None,
    };
    let init: Option<QNetwork> = match &a.init {
        Some(p) => Some(match read_json::<PolicyDoc>(p)? {
            PolicyDoc::Greedy(g) => g.net,
            PolicyDoc::Explicit(_) => bail!(input_err(p, "expected a Q-network policy")),
        }),
        None => None,
    };
    let out = learn::train(&env, &cfg, shield.as_ref(), None, init)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let history = a.out.join("history.csv");
    let qnet = a.out.join(QNET_FILE);
    let run = a.out.join(RUN_FILE);
    let config = a.out.join("config.json");
    write_file(&history, &learn::history_csv(&out.history))?;
    let policy = GreedyQPolicy {
        net: out.q_net,
        action_grid: out.action_grid,
    };
    write_file(&qnet, &serde_json::to_string(&policy)?)?;
    let shield_path = a
        .shield
        .as_ref()
        .map(|p| fs::canonicalize(p).unwrap_or_else(|_| p.clone()));
    let info = RunInfo {
        env: "msd".into(),
        plant: spec,
        shield: shield_path,
        seed: a.seed,
    };
    write_file(&run, &serde_json::to_string_pretty(&info)?)?;
    write_file(&config, &serde_json::to_string_pretty(&cfg)?)?;
    manifest.finish(&[history, qnet, run, config], &a.out.join("manifest.json"))
}

pub fn distill(a: DistillArgs) -> Result<()> {
    let run_path = a.expert.join(RUN_FILE);
    let qnet_path = a.expert.join(QNET_FILE);
    let mut manifest = RunManifest::start();
    manifest.inputs([&Some(run_path.clone()), &Some(qnet_path.clone()), &a.shield, &a.config])?;
    manifest.seed(a.seed);
    let info: RunInfo = read_json(&run_path)?;
    let expert: GreedyQPolicy = read_json(&qnet_path)?;
    let shield_path = a
        .shield
        .clone()
        .or(info.shield.clone())
        .ok_or_else(|| InputError("no shield: pass --shield or train with one".into()))?;
    let env = plant_env(&info.plant, DisturbanceMode::Random)?;
    let shield = governor(env.model.clone(), &shield_path)?;
    let mut cfg: DistillConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => DistillConfig::default(),
    };
    cfg.seed = a.seed;
    let (policy, report) = learn::distill(&env, &expert, &shield, None, &cfg)?;
    write_file(&a.out, &serde_json::to_string(&policy)?)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    manifest.finish(std::slice::from_ref(&a.out), &beside(&a.out))
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    check_state(&a.x0)?;
    let mut manifest = RunManifest::start();
    manifest.inputs([&policy_input(&a.policy), &a.shield, &a.plant.params])?;
    manifest.seed(a.seed);
    let spec = plant_spec(&a.plant)?;
    let env = plant_env(&spec, disturbance(a.disturbance))?;
    let shield = match &a.shield {
        Some(p) => Some(governor(env.model.clone(), p)?),
        None => None,
    };
    let policy = read_policy(&a.policy)?;
    let cfg = EvalConfig {
        rollouts: a.rollouts,
        steps: a.steps,
        seed: a.seed,
        record: false,
    };
    let initial = InitialStates::Fixed(a.x0.clone());
    let (report, timing, _) = learn::evaluate(&env, policy.as_ref(), shield.as_ref(), &initial, &cfg)?;
    let metrics = json!({
        "rollouts": report.rollouts,
        "steps": report.steps,
        "violations": report.violations,
        "rollouts_with_violation": report.rollouts_with_violation,
        "violation_rate": report.violation_rate,
        "mean_reward": report.mean_reward,
    });
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    eprintln!("timing_us_per_step: {:.2}", timing.timing_us_per_step);
    if let Some(out) = &a.out {
        write_file(out, &serde_json::to_string_pretty(&metrics)?)?;
        let timing_path = out.with_extension("timing.json");
        write_file(&timing_path, &serde_json::to_string_pretty(&timing)?)?;
        manifest.finish(&[out.clone(), timing_path], &beside(out))?;
    }
    Ok(())
}

pub fn msd_export(a: ExportArgs) -> Result<()> {
    let mut manifest = RunManifest::start();
    manifest.inputs([&a.plant.params])?;
    let spec = plant_spec(&a.plant)?;
    let model = build_model(&spec.params)?;
    let x = ragkit::msd::build_constraint_polygon(&spec.params)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let files = [
        (a.out.join("model.json"), model.to_json()?),
        (
            a.out.join("constraints.json"),
            serde_json::to_string_pretty(&UnionDoc::from_union(&x))?,
        ),
        (a.out.join("params.json"), serde_json::to_string_pretty(&spec.params)?),
    ];
    for (p, text) in &files {
        write_file(p, text)?;
    }
    let outputs: Vec<PathBuf> = files.into_iter().map(|(p, _)| p).collect();
    manifest.finish(&outputs, &a.out.join("manifest.json"))
}

pub fn msd_experiment(which: Experiment, a: ExperimentArgs) -> Result<()> {
    let mut manifest = RunManifest::start();
    manifest.inputs([&a.config])?;
    manifest.seed(a.seed);
    let mut cfg: ExperimentConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(c) = &a.cache {
        cfg.cache_dir = Some(c.clone());
    }
    let out = run_experiment(which, a.seed, &a.out, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&out.metrics)?);
    manifest.finish(&out.files, &a.out.join("manifest.json"))
}
