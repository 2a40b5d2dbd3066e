use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::PolyUnion;
use crate::learn::{Env, EnvStep};
use crate::pwa::{sample_simplex, Disturbance, PwaModel};

use super::model::{
    adversarial_disturbance, build_constraint_polygon, build_model, reward, weights_for_mass,
    MsdParams,
};

/// Slack allowed on the constraints before a state counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceMode {
    #[default]
    Random,
    Adversarial,
    None,
}

/// Square-wave reference: `d` for `period` steps, then `0`, repeating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub period: usize,
    pub high: f64,
    pub low: f64,
}

impl Reference {
    pub fn at(&self, t: usize) -> f64 {
        if (t / self.period.max(1)).is_multiple_of(2) {
            self.high
        } else {
            self.low
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsdEnv {
    pub params: MsdParams,
    pub model: PwaModel<f64>,
    pub constraints: PolyUnion<f64>,
    pub disturbance: DisturbanceMode,
    /// True plant mass; `None` draws the mass weights at random every step.
    pub plant_mass: Option<f64>,
    pub reference: Reference,
    pub w1: f64,
    pub w2: f64,
}

impl MsdEnv {
    pub fn new(params: MsdParams, disturbance: DisturbanceMode) -> Result<Self> {
        let model = build_model(&params)?;
        let constraints = build_constraint_polygon(&params)?;
        let reference = Reference {
            period: 60,
            high: params.d,
            low: 0.0,
        };
        Ok(Self {
            params,
            model,
            constraints,
            disturbance,
            plant_mass: None,
            reference,
            w1: 1.0,
            w2: 1.0,
        })
    }

    pub fn with_plant_mass(mut self, m: f64) -> Self {
        self.plant_mass = Some(m);
        self
    }

    pub fn with_reference_period(mut self, period: usize) -> Self {
        self.reference.period = period;
        self
    }

    pub fn with_weights(mut self, w1: f64, w2: f64) -> Self {
        self.w1 = w1;
        self.w2 = w2;
        self
    }

    fn disturbance_at(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Disturbance<f64> {
        let b = self.params.wa_bound;
        let wp = match self.plant_mass {
            Some(m) => weights_for_mass(&self.params, m),
            None if self.disturbance == DisturbanceMode::Adversarial => vec![1.0, 0.0],
            None => sample_simplex(2, rng),
        };
        let wa = match self.disturbance {
            DisturbanceMode::Random => vec![rng.random_range(-b..=b)],
            DisturbanceMode::Adversarial => adversarial_disturbance(&self.params, x).wa,
            DisturbanceMode::None => vec![0.0],
        };
        Disturbance { wp, wa }
    }

    /// Largest amount by which `x` exceeds the position and soft-landing
    /// constraints (non-positive when admissible).
    pub fn constraint_excess(&self, x: &[f64]) -> f64 {
        let p = &self.params;
        let (pos, v) = (x[0], x[1]);
        let position = (-pos).max(pos - p.d);
        let a = (v.abs() - p.v_max).max(pos - p.x_c);
        let b = (v.abs() - p.funnel_bound(pos)).max(p.x_c - pos);
        position.max(a.min(b))
    }
}

impl Env for MsdEnv {
    fn state_dim(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        3
    }

    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0], vec![self.params.f_max])
    }

    /// `(x, v, x_ref)`.
    fn observe(&self, x: &[f64], t: usize) -> Vec<f64> {
        vec![x[0], x[1], self.reference.at(t)]
    }

    /// Inputs are saturated to `[0, F_max]` before integration.
    fn step(&self, x: &[f64], u: &[f64], rng: &mut ChaCha8Rng) -> Result<EnvStep> {
        let mode = self.model.mode_of(x)?;
        let u = [u[0].clamp(0.0, self.params.f_max)];
        let w = self.disturbance_at(x, rng);
        let next = self.model.step(x, &u, &w)?;
        Ok(EnvStep {
            next,
            mode,
            wp: w.wp,
            wa: w.wa,
        })
    }

    fn reward(&self, _x: &[f64], _u: &[f64], x_next: &[f64], t: usize) -> f64 {
        reward(&self.params, self.w1, self.w2, x_next, self.reference.at(t))
    }

    fn violates(&self, x: &[f64]) -> bool {
        self.constraint_excess(x) > VIOLATION_TOL
    }

    fn constraint_set(&self) -> &PolyUnion<f64> {
        &self.constraints
    }

    fn obs_normalization(&self) -> (Vec<f64>, Vec<f64>) {
        let h = 0.5 * self.params.d;
        (vec![h, 0.0, h], vec![h + 1.0, self.params.v_max, h])
    }
}
