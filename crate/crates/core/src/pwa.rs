//! Uncertain piecewise-affine systems.
//!
//! In mode `q` the successor is
//! `x⁺ = Σ_j wp_j (A_{q,j} x + B_{q,j} u + f_{q,j} + E_{q,j} wa)`
//! with `wp` on the unit simplex and `wa ∈ Wa_q`. Mode indices are 0-based.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{sample_in, HPolyhedron};
use crate::linalg::{axpy, Matrix};
use crate::scalar::Real;

/// Number of working-box samples used to check that the regions cover it.
const COVERAGE_SAMPLES: usize = 2_000;

/// One vertex of the parametric-uncertainty simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct VertexSystem<T> {
    #[serde(rename = "A")]
    pub a: Matrix<T>,
    #[serde(rename = "B")]
    pub b: Matrix<T>,
    pub f: Vec<T>,
    #[serde(rename = "E")]
    pub e: Matrix<T>,
}

impl<T: Real> VertexSystem<T> {
    /// `A x + B u + f + E wa`.
    pub fn apply(&self, x: &[T], u: &[T], wa: &[T]) -> Vec<T> {
        let mut out = self.a.matvec(x);
        axpy(T::one(), &self.b.matvec(u), &mut out);
        axpy(T::one(), &self.f, &mut out);
        axpy(T::one(), &self.e.matvec(wa), &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ModeDef<T> {
    /// Partition cell `P_q`.
    pub region: HPolyhedron<T>,
    pub vertices: Vec<VertexSystem<T>>,
    /// Admissible inputs `U_q`.
    #[serde(rename = "U")]
    pub input_set: HPolyhedron<T>,
    /// Additive disturbance set `Wa_q`; must be bounded.
    #[serde(rename = "Wa")]
    pub disturbance_set: HPolyhedron<T>,
}

impl<T: Real> ModeDef<T> {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn disturbance_dim(&self) -> usize {
        self.disturbance_set.dim()
    }
}

/// One disturbance realization `w = (wp, wa)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance<T> {
    pub wp: Vec<T>,
    pub wa: Vec<T>,
}

impl<T: Real> Disturbance<T> {
    /// Simplex vertex `e_j` with additive part `wa`.
    pub fn vertex(n_p: usize, j: usize, wa: Vec<T>) -> Self {
        let mut wp = vec![T::zero(); n_p];
        wp[j] = T::one();
        Self { wp, wa }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct ModelDoc<T> {
    format: String,
    state_dim: usize,
    input_dim: usize,
    working_box: HPolyhedron<T>,
    modes: Vec<ModeDef<T>>,
}

pub const MODEL_FORMAT: &str = "pwa-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct PwaModel<T> {
    modes: Vec<ModeDef<T>>,
    state_dim: usize,
    input_dim: usize,
    working_box: HPolyhedron<T>,
}

impl<T: Real> PwaModel<T> {
    /// Validates shapes, bounded disturbance sets and coverage of the working box.
    pub fn new(
        modes: Vec<ModeDef<T>>,
        state_dim: usize,
        input_dim: usize,
        working_box: HPolyhedron<T>,
    ) -> Result<Self> {
        let (n, m) = (state_dim, input_dim);
        if modes.is_empty() {
            return Err(Error::InvalidArgument("model has no modes".into()));
        }
        if working_box.dim() != n {
            return Err(Error::Dimension("working box dimension differs from state".into()));
        }
        for (q, mode) in modes.iter().enumerate() {
            let ctx = |what: &str| Error::Dimension(format!("mode {q}: {what}"));
            if mode.region.dim() != n {
                return Err(ctx("region dimension"));
            }
            if mode.input_set.dim() != m {
                return Err(ctx("input set dimension"));
            }
            if mode.vertices.is_empty() {
                return Err(ctx("no vertex systems"));
            }
            let nw = mode.disturbance_dim();
            for (j, v) in mode.vertices.iter().enumerate() {
                let ok = v.a.rows() == n
                    && v.a.cols() == n
                    && v.b.rows() == n
                    && v.b.cols() == m
                    && v.f.len() == n
                    && v.e.rows() == n
                    && v.e.cols() == nw;
                if !ok {
                    return Err(ctx(&format!("vertex system {j} has inconsistent shapes")));
                }
            }
            mode.disturbance_set.bounding_box().map_err(|_| {
                Error::InvalidArgument(format!("mode {q}: disturbance set is empty or unbounded"))
            })?;
        }
        let model = Self {
            modes,
            state_dim,
            input_dim,
            working_box,
        };
        model.check_coverage()?;
        Ok(model)
    }

    fn check_coverage(&self) -> Result<()> {
        let (lo, hi) = self.working_box.bounding_box()?;
        // Low-discrepancy sweep: deterministic and independent of any RNG.
        let n = self.state_dim;
        for s in 0..COVERAGE_SAMPLES {
            let x: Vec<T> = (0..n)
                .map(|i| {
                    let frac = halton(s + 1, PRIMES[i % PRIMES.len()]);
                    lo[i] + (hi[i] - lo[i]) * T::of(frac)
                })
                .collect();
            if !self.working_box.satisfies(&x, T::feas_tol()) {
                continue;
            }
            if self.mode_of(&x).is_err() {
                return Err(Error::InvalidArgument(format!(
                    "regions do not cover the working box: {:?} is in no region",
                    x.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()
                )));
            }
        }
        Ok(())
    }

    pub fn modes(&self) -> &[ModeDef<T>] {
        &self.modes
    }

    pub fn mode(&self, q: usize) -> &ModeDef<T> {
        &self.modes[q]
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn working_box(&self) -> &HPolyhedron<T> {
        &self.working_box
    }

    /// Lowest-index mode whose (closed) region contains `x`.
    pub fn mode_of(&self, x: &[T]) -> Result<usize> {
        if x.len() != self.state_dim {
            return Err(Error::Dimension("state dimension".into()));
        }
        self.modes
            .iter()
            .position(|m| m.region.satisfies(x, T::feas_tol()))
            .ok_or_else(|| Error::OutsidePartition {
                state: x.iter().map(|v| v.to_f64_lossy()).collect(),
            })
    }

    /// Vertex systems of mode `q`, in index order.
    pub fn vertex_systems(&self, q: usize) -> &[VertexSystem<T>] {
        &self.modes[q].vertices
    }

    /// One step of the uncertain dynamics. Checks `u ∈ U_q`, `wp` on the
    /// simplex and `wa ∈ Wa_q` for the mode of `x`.
    pub fn step(&self, x: &[T], u: &[T], w: &Disturbance<T>) -> Result<Vec<T>> {
        let q = self.mode_of(x)?;
        let mode = &self.modes[q];
        if u.len() != self.input_dim || !mode.input_set.satisfies(u, T::feas_tol()) {
            return Err(Error::InvalidArgument(format!(
                "input {:?} outside U of mode {q}",
                u.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()
            )));
        }
        self.check_disturbance(q, w)?;
        Ok(self.step_in_mode(q, x, u, w))
    }

    /// Step with an explicit mode and no validation.
    pub fn step_in_mode(&self, q: usize, x: &[T], u: &[T], w: &Disturbance<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.state_dim];
        for (v, &p) in self.modes[q].vertices.iter().zip(&w.wp) {
            if p != T::zero() {
                axpy(p, &v.apply(x, u, &w.wa), &mut out);
            }
        }
        out
    }

    pub fn check_disturbance(&self, q: usize, w: &Disturbance<T>) -> Result<()> {
        let mode = &self.modes[q];
        if w.wp.len() != mode.num_vertices() {
            return Err(Error::Dimension(format!(
                "wp has {} weights, mode {q} has {} vertex systems",
                w.wp.len(),
                mode.num_vertices()
            )));
        }
        let sum: T = w.wp.iter().copied().sum();
        let simplex_tol = T::of(1e-12).max(T::epsilon() * T::of(16.0));
        if w.wp.iter().any(|&p| p < -simplex_tol) || (sum - T::one()).abs() > simplex_tol {
            return Err(Error::InvalidArgument("wp is not on the unit simplex".into()));
        }
        if w.wa.len() != mode.disturbance_dim()
            || !mode.disturbance_set.satisfies(&w.wa, T::feas_tol())
        {
            return Err(Error::InvalidArgument(format!("wa outside Wa of mode {q}")));
        }
        Ok(())
    }

    /// Uniform sample of `Wa_q` (rejection from its bounding box) and of the
    /// simplex (spacings of sorted uniforms).
    pub fn sample_disturbance(&self, q: usize, rng: &mut impl Rng) -> Result<Disturbance<T>> {
        let mode = &self.modes[q];
        let (lo, hi) = mode.disturbance_set.bounding_box()?;
        let wa = sample_in(&lo, &hi, 1, rng, |w| {
            mode.disturbance_set.satisfies(w, T::feas_tol())
        })?
        .pop()
        .expect("one sample");
        Ok(Disturbance {
            wp: sample_simplex(mode.num_vertices(), rng),
            wa,
        })
    }

    /// Corners of the bounding box of `Wa_q`. Errors unless every corner
    /// lies in `Wa_q`, i.e. unless the set is a box.
    pub fn disturbance_vertices(&self, q: usize) -> Result<Vec<Vec<T>>> {
        let set = &self.modes[q].disturbance_set;
        let (lo, hi) = set.bounding_box()?;
        let d = lo.len();
        let mut out = Vec::with_capacity(1 << d);
        for mask in 0..(1usize << d) {
            let v: Vec<T> = (0..d)
                .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                .collect();
            if !set.satisfies(&v, T::redundancy_tol()) {
                return Err(Error::InvalidArgument(format!(
                    "Wa of mode {q} is not a box; vertex enumeration unsupported"
                )));
            }
            if !out.contains(&v) {
                out.push(v);
            }
        }
        Ok(out)
    }

    /// Every (simplex vertex, Wa vertex) successor of `(x, u)` in mode `q`.
    pub fn vertex_successors(&self, q: usize, x: &[T], u: &[T]) -> Result<Vec<Vec<T>>> {
        let was = self.disturbance_vertices(q)?;
        let mut out = Vec::new();
        for v in &self.modes[q].vertices {
            for wa in &was {
                out.push(v.apply(x, u, wa));
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.doc())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDoc<T> = serde_json::from_str(s)?;
        if doc.format != MODEL_FORMAT {
            return Err(Error::Format(format!(
                "format tag is {:?}, expected {MODEL_FORMAT:?}",
                doc.format
            )));
        }
        Self::new(doc.modes, doc.state_dim, doc.input_dim, doc.working_box)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.doc()).expect("model serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn doc(&self) -> ModelDoc<T> {
        ModelDoc {
            format: MODEL_FORMAT.to_string(),
            state_dim: self.state_dim,
            input_dim: self.input_dim,
            working_box: self.working_box.clone(),
            modes: self.modes.clone(),
        }
    }
}

/// Uniform point on the unit simplex with `n` vertices.
pub fn sample_simplex<T: Real>(n: usize, rng: &mut impl Rng) -> Vec<T> {
    let mut cuts: Vec<f64> = (0..n.saturating_sub(1)).map(|_| rng.random::<f64>()).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut out = Vec::with_capacity(n);
    let mut prev = 0.0;
    for c in cuts {
        out.push(T::of(c - prev));
        prev = c;
    }
    out.push(T::of(1.0 - prev));
    out
}

const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}
