//! Robust action governor: the minimal modification of a nominal input that
//! keeps every uncertain successor inside one piece of the safe set.
//!
//! The selector variables of the mixed-integer formulation are handled by
//! enumeration: one QP per safe-set piece, best objective wins, ties go to
//! the lowest piece index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HPolyhedron;
use crate::linalg::Matrix;
use crate::optim::{solve_lp, solve_qp, LinearProgram, QuadraticProgram, Status};
use crate::pwa::PwaModel;
use crate::safe_set::{target, SafeSetIterate};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InfeasiblePolicy {
    #[default]
    HardError,
    /// Minimize the largest constraint violation over the pieces instead.
    BestEffortSlack,
}

#[derive(Debug, Clone)]
pub struct GovernorConfig<T> {
    pub s: Matrix<T>,
    pub model: PwaModel<T>,
    pub safe_set: SafeSetIterate<T>,
    pub infeasible_policy: InfeasiblePolicy,
}

impl<T: Real> GovernorConfig<T> {
    pub fn new(s: Matrix<T>, model: PwaModel<T>, safe_set: SafeSetIterate<T>) -> Result<Self> {
        let m = model.input_dim();
        if s.rows() != m || s.cols() != m {
            return Err(Error::Dimension(format!("S must be {m}x{m}")));
        }
        // Reuses the QP constructor's symmetry and definiteness checks.
        QuadraticProgram::new(s.clone(), vec![T::zero(); m], Matrix::zeros(0, m), vec![])?;
        if safe_set.set.is_empty() {
            return Err(Error::InvalidArgument("safe set is empty".into()));
        }
        if safe_set.set.dim() != model.state_dim() {
            return Err(Error::Dimension("safe set dimension differs from state".into()));
        }
        Ok(Self {
            s,
            model,
            safe_set,
            infeasible_policy: InfeasiblePolicy::HardError,
        })
    }

    pub fn with_policy(mut self, policy: InfeasiblePolicy) -> Self {
        self.infeasible_policy = policy;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PieceStatus<T> {
    Optimal(T),
    Infeasible,
    /// Not solved: an earlier piece already accepted the nominal input.
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GovernorResult<T> {
    pub u_safe: Vec<T>,
    pub modified: bool,
    pub mode: usize,
    /// Selected piece; `None` only for a best-effort fallback with no piece.
    pub piece_index: Option<usize>,
    pub objective: T,
    pub per_piece_status: Vec<PieceStatus<T>>,
    /// Largest remaining violation when the best-effort fallback was used.
    pub fallback_violation: Option<T>,
}

/// Constraint system of one (mode, piece) pair:
/// `hb u ≤ h − ha x` stacked over the vertex systems, then `U_q`.
#[derive(Debug, Clone, PartialEq)]
struct PieceSystem<T> {
    hb: Matrix<T>,
    ha: Matrix<T>,
    h: Vec<T>,
}

impl<T: Real> PieceSystem<T> {
    fn build(model: &PwaModel<T>, q: usize, targets: &[HPolyhedron<T>]) -> Result<Self> {
        let (n, m) = (model.state_dim(), model.input_dim());
        let mode = model.mode(q);
        let mut hb_rows = Vec::new();
        let mut ha_rows = Vec::new();
        let mut h = Vec::new();
        for (t, v) in targets.iter().zip(&mode.vertices) {
            if t.num_rows() == 0 {
                continue;
            }
            let hb = t.h_mat().matmul(&v.b)?;
            let ha = t.h_mat().matmul(&v.a)?;
            hb_rows.extend(hb.to_rows());
            ha_rows.extend(ha.to_rows());
            h.extend_from_slice(t.h_vec());
        }
        let u = &mode.input_set;
        hb_rows.extend(u.h_mat().to_rows());
        ha_rows.extend(std::iter::repeat_n(vec![T::zero(); n], u.num_rows()));
        h.extend_from_slice(u.h_vec());
        Ok(Self {
            hb: Matrix::from_rows(&hb_rows, m)?,
            ha: Matrix::from_rows(&ha_rows, n)?,
            h,
        })
    }

    fn rhs(&self, x: &[T]) -> Vec<T> {
        let ax = self.ha.matvec(x);
        self.h.iter().zip(ax).map(|(&h, a)| h - a).collect()
    }

    fn violation(&self, rhs: &[T], u: &[T]) -> T {
        self.hb
            .matvec(u)
            .into_iter()
            .zip(rhs)
            .map(|(l, &r)| l - r)
            .fold(T::neg_infinity(), T::max)
    }
}

/// Per-(piece, mode, vertex) targets `(χ^i ∼ E_j Wa) − f_j` and the assembled
/// per-(mode, piece) constraint systems.
#[derive(Debug, Clone)]
pub struct TargetCache<T> {
    /// `targets[q][i][j]`.
    targets: Vec<Vec<Vec<HPolyhedron<T>>>>,
    systems: Vec<Vec<PieceSystem<T>>>,
}

impl<T: Real> TargetCache<T> {
    /// Number of cached target polyhedra.
    pub fn len(&self) -> usize {
        self.targets.iter().flatten().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn target(&self, q: usize, piece: usize, j: usize) -> &HPolyhedron<T> {
        &self.targets[q][piece][j]
    }
}

fn piece_targets<T: Real>(
    model: &PwaModel<T>,
    q: usize,
    piece: &HPolyhedron<T>,
) -> Result<Vec<HPolyhedron<T>>> {
    (0..model.mode(q).num_vertices())
        .map(|j| target(model, q, j, piece))
        .collect()
}

pub fn precompute_targets<T: Real>(config: &GovernorConfig<T>) -> Result<TargetCache<T>> {
    let model = &config.model;
    let mut targets = Vec::with_capacity(model.num_modes());
    let mut systems = Vec::with_capacity(model.num_modes());
    for q in 0..model.num_modes() {
        let tq: Vec<Vec<HPolyhedron<T>>> = config
            .safe_set
            .set
            .pieces()
            .iter()
            .map(|p| piece_targets(model, q, p))
            .collect::<Result<_>>()?;
        let sq = tq
            .iter()
            .map(|t| PieceSystem::build(model, q, t))
            .collect::<Result<_>>()?;
        targets.push(tq);
        systems.push(sq);
    }
    Ok(TargetCache { targets, systems })
}

/// Strict improvement beyond round-off; near-ties keep the earlier piece.
fn beats<T: Real>(candidate: T, incumbent: T) -> bool {
    candidate < incumbent - T::of(1e-12) * incumbent.abs().max(T::one())
}

/// Tolerance on piece constraints.
fn piece_tol<T: Real>() -> T {
    T::of(1e-8).max(T::feas_tol())
}

/// A governor with its target cache built once.
#[derive(Debug, Clone)]
pub struct Governor<T> {
    config: GovernorConfig<T>,
    cache: TargetCache<T>,
}

impl<T: Real> Governor<T> {
    pub fn new(config: GovernorConfig<T>) -> Result<Self> {
        let cache = precompute_targets(&config)?;
        Ok(Self { config, cache })
    }

    pub fn config(&self) -> &GovernorConfig<T> {
        &self.config
    }

    pub fn cache(&self) -> &TargetCache<T> {
        &self.cache
    }

    pub fn model(&self) -> &PwaModel<T> {
        &self.config.model
    }

    pub fn safe_set(&self) -> &SafeSetIterate<T> {
        &self.config.safe_set
    }

    pub fn govern(&self, x: &[T], u_phi: &[T]) -> Result<GovernorResult<T>> {
        govern(&self.config, Some(&self.cache), x, u_phi)
    }

    pub fn is_action_safe(&self, x: &[T], u: &[T]) -> Result<ActionCheck> {
        is_action_safe(&self.config, Some(&self.cache), x, u)
    }
}

fn systems_for<'a, T: Real>(
    config: &GovernorConfig<T>,
    cache: Option<&'a TargetCache<T>>,
    q: usize,
) -> Result<std::borrow::Cow<'a, [PieceSystem<T>]>> {
    Ok(match cache {
        Some(c) => std::borrow::Cow::Borrowed(&c.systems[q][..]),
        None => std::borrow::Cow::Owned(
            config
                .safe_set
                .set
                .pieces()
                .iter()
                .map(|p| PieceSystem::build(&config.model, q, &piece_targets(&config.model, q, p)?))
                .collect::<Result<_>>()?,
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionCheck {
    pub safe: bool,
    pub witness_piece: Option<usize>,
}

/// True iff some piece's constraint system accepts `(x, u)`.
pub fn is_action_safe<T: Real>(
    config: &GovernorConfig<T>,
    cache: Option<&TargetCache<T>>,
    x: &[T],
    u: &[T],
) -> Result<ActionCheck> {
    let unsafe_ = ActionCheck {
        safe: false,
        witness_piece: None,
    };
    if u.len() != config.model.input_dim() {
        return Ok(unsafe_);
    }
    let Ok(q) = config.model.mode_of(x) else {
        return Ok(unsafe_);
    };
    let systems = systems_for(config, cache, q)?;
    for (i, sys) in systems.iter().enumerate() {
        if sys.violation(&sys.rhs(x), u) <= piece_tol() {
            return Ok(ActionCheck {
                safe: true,
                witness_piece: Some(i),
            });
        }
    }
    Ok(unsafe_)
}

/// Minimal `‖u − u_phi‖²_S` over inputs whose every vertex successor lands in
/// a single eroded safe-set piece.
pub fn govern<T: Real>(
    config: &GovernorConfig<T>,
    cache: Option<&TargetCache<T>>,
    x: &[T],
    u_phi: &[T],
) -> Result<GovernorResult<T>> {
    let model = &config.model;
    if u_phi.len() != model.input_dim() {
        return Err(Error::Dimension("nominal input dimension".into()));
    }
    if u_phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("nominal input is not finite".into()));
    }
    let q = model.mode_of(x)?;
    let systems = systems_for(config, cache, q)?;
    let r = systems.len();
    let rhs: Vec<Vec<T>> = systems.iter().map(|s| s.rhs(x)).collect();

    // The first piece that already accepts u_phi is optimal with objective 0.
    if let Some(i) = (0..r).find(|&i| systems[i].violation(&rhs[i], u_phi) <= piece_tol()) {
        let mut status = vec![PieceStatus::Skipped; r];
        status[..i].fill(PieceStatus::Infeasible);
        status[i] = PieceStatus::Optimal(T::zero());
        return Ok(GovernorResult {
            u_safe: u_phi.to_vec(),
            modified: false,
            mode: q,
            piece_index: Some(i),
            objective: T::zero(),
            per_piece_status: status,
            fallback_violation: None,
        });
    }

    let mut status = Vec::with_capacity(r);
    let mut best: Option<(usize, T, Vec<T>)> = None;
    for (i, sys) in systems.iter().enumerate() {
        let qp = QuadraticProgram::new(config.s.clone(), u_phi.to_vec(), sys.hb.clone(), rhs[i].clone())?;
        let out = solve_qp(&qp)?;
        match (out.status, out.solution) {
            (Status::Optimal, Some(u)) => {
                let obj = qp.objective(&u);
                status.push(PieceStatus::Optimal(obj));
                if best.as_ref().is_none_or(|(_, b, _)| beats(obj, *b)) {
                    best = Some((i, obj, u));
                }
            }
            _ => status.push(PieceStatus::Infeasible),
        }
    }
    if let Some((i, obj, u)) = best {
        return Ok(GovernorResult {
            u_safe: u,
            modified: obj > T::of(1e-12),
            mode: q,
            piece_index: Some(i),
            objective: obj,
            per_piece_status: status,
            fallback_violation: None,
        });
    }
    match config.infeasible_policy {
        InfeasiblePolicy::HardError => Err(Error::GovernorInfeasible {
            state: x.iter().map(|v| v.to_f64_lossy()).collect(),
            detail: format!("all {r} safe-set pieces infeasible in mode {q}"),
        }),
        InfeasiblePolicy::BestEffortSlack => {
            best_effort(config, &systems, &rhs, q, u_phi, status)
        }
    }
}

/// Per piece: `min s` subject to `hb u − s ≤ rhs` on the safe-set rows and
/// `u ∈ U_q` exactly. Picks the smallest `s`.
fn best_effort<T: Real>(
    config: &GovernorConfig<T>,
    systems: &[PieceSystem<T>],
    rhs: &[Vec<T>],
    q: usize,
    u_phi: &[T],
    status: Vec<PieceStatus<T>>,
) -> Result<GovernorResult<T>> {
    let m = config.model.input_dim();
    let n_u = config.model.mode(q).input_set.num_rows();
    let mut best: Option<(usize, T, Vec<T>)> = None;
    for (i, sys) in systems.iter().enumerate() {
        let rows = sys.hb.rows();
        let mut a = Matrix::zeros(rows, m + 1);
        for k in 0..rows {
            a.row_mut(k)[..m].copy_from_slice(sys.hb.row(k));
            if k < rows - n_u {
                a.row_mut(k)[m] = -T::one();
            }
        }
        let mut c = vec![T::zero(); m + 1];
        c[m] = T::one();
        let mut bounds = vec![(None, None); m + 1];
        bounds[m] = (Some(T::zero()), None);
        let lp = LinearProgram::new(c, a, rhs[i].clone())?.with_bounds(bounds)?;
        let out = solve_lp(&lp)?;
        if let (Status::Optimal, Some(mut sol)) = (out.status, out.solution) {
            let s = sol.pop().expect("slack variable");
            if best.as_ref().is_none_or(|(_, b, _)| beats(s, *b)) {
                best = Some((i, s, sol));
            }
        }
    }
    let (i, s, u) = best.ok_or_else(|| Error::GovernorInfeasible {
        state: vec![],
        detail: format!("input set of mode {q} is empty"),
    })?;
    let diff: Vec<T> = u.iter().zip(u_phi).map(|(&a, &b)| a - b).collect();
    let objective = crate::linalg::dot(&diff, &config.s.matvec(&diff));
    Ok(GovernorResult {
        u_safe: u,
        modified: objective > T::of(1e-12),
        mode: q,
        piece_index: Some(i),
        objective,
        per_piece_status: status,
        fallback_violation: Some(s),
    })
}
