use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HPolyhedron, PolyUnion};
use crate::linalg::Matrix;
use crate::pwa::{Disturbance, ModeDef, PwaModel, VertexSystem};

/// Mass-spring-damper constants. `beta` is the funnel slope magnitude, so
/// the funnel widens away from the wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsdParams {
    pub c: f64,
    pub x_m: f64,
    pub k1: f64,
    pub k2: f64,
    pub ts: f64,
    pub d: f64,
    pub v_max: f64,
    pub f_max: f64,
    pub x_c: f64,
    pub eps_land: f64,
    pub beta: f64,
    pub m_min: f64,
    pub m_max: f64,
    pub wa_bound: f64,
    /// Working box `[lo, hi]` per state coordinate.
    pub working_box: [[f64; 2]; 2],
}

impl Default for MsdParams {
    fn default() -> Self {
        Self {
            c: 0.8,
            x_m: 1.75,
            k1: 1.0,
            k2: 0.8,
            ts: 0.1,
            d: 5.0,
            v_max: 5.0,
            f_max: 10.0,
            x_c: 3.3,
            eps_land: 0.5,
            beta: 2.95,
            m_min: 0.5,
            m_max: 1.5,
            wa_bound: 1.0,
            working_box: [[-1.0, 7.0], [-8.0, 8.0]],
        }
    }
}

/// Plant overrides for the adaptation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsdVariant {
    pub m: f64,
    pub d: f64,
}

impl Default for MsdVariant {
    fn default() -> Self {
        Self { m: 1.3, d: 5.5 }
    }
}

impl MsdVariant {
    /// Params with `d` replaced. The mass stays uncertain in `[m_min, m_max]`.
    pub fn apply(&self, params: &MsdParams) -> Result<MsdParams> {
        let mut p = params.clone();
        p.d = self.d;
        p.validate()?;
        if !(p.m_min..=p.m_max).contains(&self.m) {
            return Err(Error::InvalidArgument(format!(
                "variant mass {} outside [{}, {}]",
                self.m, p.m_min, p.m_max
            )));
        }
        Ok(p)
    }
}

impl MsdParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c", self.c),
            ("x_m", self.x_m),
            ("k1", self.k1),
            ("k2", self.k2),
            ("ts", self.ts),
            ("d", self.d),
            ("v_max", self.v_max),
            ("f_max", self.f_max),
            ("x_c", self.x_c),
            ("eps_land", self.eps_land),
            ("beta", self.beta),
            ("m_min", self.m_min),
            ("m_max", self.m_max),
            ("wa_bound", self.wa_bound),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.x_c >= self.d {
            return Err(Error::InvalidArgument("x_c must be below d".into()));
        }
        if self.eps_land >= self.v_max {
            return Err(Error::InvalidArgument("eps_land must be below v_max".into()));
        }
        if self.m_min > self.m_max {
            return Err(Error::InvalidArgument("m_min exceeds m_max".into()));
        }
        for [lo, hi] in self.working_box {
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(lo < hi) {
                return Err(Error::InvalidArgument("empty working box".into()));
            }
        }
        Ok(())
    }

    /// Euler-discretised dynamics of mode `q` for mass `m`.
    pub fn vertex_system(&self, q: usize, m: f64) -> VertexSystem<f64> {
        let ts = self.ts;
        let k = if q == 0 { self.k1 } else { self.k2 };
        let offset = match q {
            0 => 0.0,
            1 => -ts * (self.k1 - self.k2) * self.x_m / m,
            _ => ts * (self.k1 - self.k2) * self.x_m / m,
        };
        VertexSystem {
            a: Matrix::from_vec(2, 2, vec![1.0, ts, -k * ts / m, 1.0 - self.c * ts / m]).expect("2x2"),
            b: Matrix::from_vec(2, 1, vec![0.0, ts / m]).expect("2x1"),
            f: vec![0.0, offset],
            e: Matrix::from_vec(2, 1, vec![0.0, ts / m]).expect("2x1"),
        }
    }

    pub fn working_box_poly(&self) -> HPolyhedron<f64> {
        let [[x0, x1], [v0, v1]] = self.working_box;
        HPolyhedron::from_box(&[x0, v0], &[x1, v1]).expect("box bounds are ordered")
    }

    /// Funnel half-width at position `x`.
    pub fn funnel_bound(&self, x: f64) -> f64 {
        self.eps_land + self.beta * (self.d - x)
    }

    /// Direct evaluation of the position and soft-landing constraints.
    pub fn is_admissible(&self, x: f64, v: f64) -> bool {
        if !(0.0..=self.d).contains(&x) {
            return false;
        }
        if x <= self.x_c {
            v.abs() <= self.v_max
        } else {
            v.abs() <= self.funnel_bound(x)
        }
    }
}

/// Three modes (|x| ≤ x_m, x > x_m, x < −x_m), each with the `m_min` and
/// `m_max` vertex systems.
pub fn build_model(params: &MsdParams) -> Result<PwaModel<f64>> {
    params.validate()?;
    let xm = params.x_m;
    let x_rows = |lo: Option<f64>, hi: Option<f64>| {
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        if let Some(hi) = hi {
            rows.push(vec![1.0, 0.0]);
            rhs.push(hi);
        }
        if let Some(lo) = lo {
            rows.push(vec![-1.0, 0.0]);
            rhs.push(-lo);
        }
        HPolyhedron::from_rows(2, &rows, &rhs).expect("two columns")
    };
    let regions = [
        x_rows(Some(-xm), Some(xm)),
        x_rows(Some(xm), None),
        x_rows(None, Some(-xm)),
    ];
    let modes = regions
        .into_iter()
        .enumerate()
        .map(|(q, region)| ModeDef {
            region,
            vertices: vec![
                params.vertex_system(q, params.m_min),
                params.vertex_system(q, params.m_max),
            ],
            input_set: HPolyhedron::from_box(&[0.0], &[params.f_max]).expect("ordered"),
            disturbance_set: HPolyhedron::from_box(&[-params.wa_bound], &[params.wa_bound])
                .expect("ordered"),
        })
        .collect();
    PwaModel::new(modes, 2, 1, params.working_box_poly())
}

/// Simplex weights that reproduce mass `m` exactly: `1/m` is affine in the
/// weights over `1/m_min` and `1/m_max`.
pub fn weights_for_mass(params: &MsdParams, m: f64) -> Vec<f64> {
    let (a, b) = (1.0 / params.m_min, 1.0 / params.m_max);
    if (a - b).abs() < f64::EPSILON {
        return vec![1.0, 0.0];
    }
    let w1 = ((1.0 / m - b) / (a - b)).clamp(0.0, 1.0);
    vec![w1, 1.0 - w1]
}

/// Two pieces: the box `0 ≤ x ≤ x_c, |v| ≤ v_max` and the soft-landing
/// funnel on `x_c ≤ x ≤ d`.
pub fn build_constraint_polygon(params: &MsdParams) -> Result<PolyUnion<f64>> {
    params.validate()?;
    let p = params;
    let piece_a = HPolyhedron::from_box(&[0.0, -p.v_max], &[p.x_c, p.v_max])?;
    // v ≤ eps + beta (d − x)  ⇔  beta x + v ≤ eps + beta d
    let piece_b = HPolyhedron::from_rows(
        2,
        &[
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![p.beta, 1.0],
            vec![p.beta, -1.0],
        ],
        &[
            p.d,
            -p.x_c,
            p.eps_land + p.beta * p.d,
            p.eps_land + p.beta * p.d,
        ],
    )?;
    PolyUnion::new(2, vec![piece_a, piece_b])
}

/// Velocity bound the state is closest to.
pub fn boundary_velocity(params: &MsdParams, x: f64, v: f64) -> f64 {
    let bound = if x >= params.x_c && x <= params.d {
        params.funnel_bound(x)
    } else {
        params.v_max
    };
    if v > 0.0 {
        bound
    } else {
        -bound
    }
}

/// `w1 · (−(x − x_ref)²) + w2 · R2`, with `R2 = −(v − v_b)²` when the
/// soft-landing constraint is violated.
pub fn reward(params: &MsdParams, w1: f64, w2: f64, state: &[f64], x_ref: f64) -> f64 {
    let (x, v) = (state[0], state[1]);
    let r1 = -(x - x_ref).powi(2);
    let soft_ok = if x >= params.x_c && x <= params.d {
        v.abs() <= params.funnel_bound(x)
    } else {
        v.abs() <= params.v_max
    };
    let r2 = if soft_ok {
        0.0
    } else {
        -(v - boundary_velocity(params, x, v)).powi(2)
    };
    w1 * r1 + w2 * r2
}

/// Maximum additive push along the current motion, lightest mass.
pub fn adversarial_disturbance(params: &MsdParams, state: &[f64]) -> Disturbance<f64> {
    let wa = if state[1] >= 0.0 {
        params.wa_bound
    } else {
        -params.wa_bound
    };
    Disturbance::vertex(2, 0, vec![wa])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_one_matrices() {
        let p = MsdParams::default();
        let model = build_model(&p).unwrap();
        let v = &model.vertex_systems(0)[0];
        let want = [1.0, 0.1, -0.2, 0.84];
        for (got, want) in v.a.as_slice().iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(model.num_modes(), 3);
        assert!(model.modes().iter().all(|m| m.num_vertices() == 2));
        let off = model.vertex_systems(1)[0].f[1];
        assert!((off + 0.07).abs() < 1e-15);
    }

    #[test]
    fn mode_lookup_and_step() {
        let model = build_model(&MsdParams::default()).unwrap();
        assert_eq!(model.mode_of(&[0.0, 0.0]).unwrap(), 0);
        assert_eq!(model.mode_of(&[1.75, 0.0]).unwrap(), 0);
        assert_eq!(model.mode_of(&[2.0, 0.0]).unwrap(), 1);
        let w = Disturbance::vertex(2, 0, vec![0.0]);
        let next = model.step(&[1.0, 0.0], &[0.0], &w).unwrap();
        assert!((next[0] - 1.0).abs() < 1e-15 && (next[1] + 0.2).abs() < 1e-15);
        let rest = model.step(&[0.0, 0.0], &[0.0], &Disturbance { wp: vec![0.3, 0.7], wa: vec![0.0] });
        assert_eq!(rest.unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn constraint_polygon_points() {
        let p = MsdParams::default();
        let x = build_constraint_polygon(&p).unwrap();
        assert!(x.contains(&[5.0, 0.5]).unwrap());
        assert!(!x.contains(&[-0.1, 0.0]).unwrap());
        assert!(x.contains(&[3.3, 5.0]).unwrap());
        assert!(!x.contains(&[5.0, 2.0]).unwrap());
    }

    #[test]
    fn reward_values() {
        let p = MsdParams::default();
        assert_eq!(reward(&p, 1.0, 1.0, &[5.0, 0.0], 5.0), 0.0);
        // Inside the funnel (bound 3.45 at x = 4) the landing term vanishes.
        assert_eq!(reward(&p, 0.0, 1.0, &[4.0, 3.0], 0.0), 0.0);
        let r = reward(&p, 0.0, 1.0, &[4.0, 4.0], 0.0);
        assert!((r + 0.3025).abs() < 1e-12);
        let r = reward(&p, 0.0, 1.0, &[4.0, -4.0], 0.0);
        assert!((r + 0.3025).abs() < 1e-12);
        assert_eq!(reward(&p, 0.0, 1.0, &[1.0, -4.9], 0.0), 0.0);
    }

    #[test]
    fn adversary_follows_motion() {
        let p = MsdParams::default();
        assert_eq!(adversarial_disturbance(&p, &[0.0, 2.0]).wa, vec![1.0]);
        assert_eq!(adversarial_disturbance(&p, &[0.0, -2.0]).wa, vec![-1.0]);
        assert_eq!(adversarial_disturbance(&p, &[0.0, 0.0]).wa, vec![1.0]);
        assert_eq!(adversarial_disturbance(&p, &[0.0, 0.0]).wp, vec![1.0, 0.0]);
    }

    #[test]
    fn mass_weights_reproduce_mass() {
        let p = MsdParams::default();
        let w = weights_for_mass(&p, 1.3);
        let inv = w[0] / p.m_min + w[1] / p.m_max;
        assert!((inv - 1.0 / 1.3).abs() < 1e-12);
    }
}
