//! Robust safe-set iterates `χ_k` over unions of polyhedra.
//!
//! `χ_0 = X` and `χ_k = Proj_x ∪_{q,i} {(x,u) : x ∈ χ_{k-1} ∩ P̃_q, u ∈ U_q,
//! A_j x + B_j u ∈ (χ^i_{k-1} ∼ E_j Wa) − f_j ∀j}` where `P̃_q = P_q ∩ 𝒳`.

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sampled_subset, HPolyhedron, PolyUnion, UnionDoc};
use crate::linalg::Matrix;
use crate::pwa::PwaModel;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SafeSetConfig<T> {
    pub k_max: usize,
    /// Overrides the model's working box when set.
    pub working_box: Option<HPolyhedron<T>>,
    /// Pieces whose inscribed ball radius is at most this are dropped.
    pub prune_tol: T,
    /// Drop pieces contained in a single other piece.
    pub drop_subsumed: bool,
    /// Samples per monotonicity check; 0 disables the check.
    pub convergence_samples: usize,
    /// Stop once two-sided sampling finds `χ_k` and `χ_{k-1}` mutually included.
    pub early_stop: bool,
    pub seed: u64,
    pub restrict: Restrict,
}

/// Which union the pre-images are intersected with. Both give the same point
/// set because the iterates are nested; `Constraints` yields fewer pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Restrict {
    PreviousIterate,
    #[default]
    Constraints,
}

impl<T: Real> Default for SafeSetConfig<T> {
    fn default() -> Self {
        Self {
            k_max: 60,
            working_box: None,
            prune_tol: T::of(1e-6),
            drop_subsumed: true,
            convergence_samples: 10_000,
            early_stop: false,
            seed: 0,
            restrict: Restrict::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeSetIterate<T> {
    pub k: usize,
    pub set: PolyUnion<T>,
    /// `r_0, …, r_k`.
    pub piece_counts: Vec<usize>,
    /// Set when an iteration produced the empty set.
    pub empty: bool,
}

impl<T: Real> SafeSetIterate<T> {
    pub fn initial(x: PolyUnion<T>) -> Self {
        let r = x.len();
        let empty = x.is_empty();
        Self {
            k: 0,
            set: x,
            piece_counts: vec![r],
            empty,
        }
    }

    /// True iff some piece contains `x`; false on dimension mismatch.
    pub fn membership(&self, x: &[T]) -> bool {
        x.len() == self.set.dim() && self.set.satisfies(x, T::feas_tol())
    }
}

/// `(χ^i ∼ E_j Wa_q) − f_j`: where the nominal successor of vertex system `j`
/// must land so every additive disturbance keeps it in `χ^i`.
pub fn target<T: Real>(
    model: &PwaModel<T>,
    q: usize,
    j: usize,
    piece: &HPolyhedron<T>,
) -> Result<HPolyhedron<T>> {
    let mode = model.mode(q);
    let v = &mode.vertices[j];
    let neg_f: Vec<T> = v.f.iter().map(|&x| -x).collect();
    piece
        .erode_by_image(&mode.disturbance_set, &v.e)?
        .translate(&neg_f)?
        .remove_redundant()
}

/// `{(x,u) : x ∈ region, u ∈ U_q, A_j x + B_j u ∈ target_j ∀j}`.
pub fn pre_piece<T: Real>(
    model: &PwaModel<T>,
    q: usize,
    region: &HPolyhedron<T>,
    piece: &HPolyhedron<T>,
) -> Result<HPolyhedron<T>> {
    let (n, m) = (model.state_dim(), model.input_dim());
    let mode = model.mode(q);
    let mut targets = Vec::with_capacity(mode.num_vertices());
    for j in 0..mode.num_vertices() {
        let t = target(model, q, j, piece)?;
        if t.is_empty()? {
            return Ok(HPolyhedron::empty(n + m));
        }
        targets.push(t);
    }
    let stacked_rows: Vec<Vec<T>> = mode
        .vertices
        .iter()
        .flat_map(|v| {
            (0..n).map(move |r| {
                let mut row = v.a.row(r).to_vec();
                row.extend_from_slice(v.b.row(r));
                row
            })
        })
        .collect();
    let stacked = Matrix::from_rows(&stacked_rows, n + m)?;
    let lifted = HPolyhedron::cartesian_product(&targets)?.affine_preimage(&stacked)?;
    let domain = HPolyhedron::cartesian_product(&[region.clone(), mode.input_set.clone()])?;
    domain.intersect_raw(&lifted)?.remove_redundant()
}

/// `P̃_q = P_q ∩ 𝒳` for every mode.
pub fn restricted_regions<T: Real>(
    model: &PwaModel<T>,
    working_box: &HPolyhedron<T>,
) -> Result<Vec<HPolyhedron<T>>> {
    model
        .modes()
        .iter()
        .map(|m| m.region.intersect(working_box))
        .collect()
}

/// One step of the recursion.
pub fn iterate<T: Real>(
    model: &PwaModel<T>,
    regions: &[HPolyhedron<T>],
    constraints: &PolyUnion<T>,
    current: &SafeSetIterate<T>,
    config: &SafeSetConfig<T>,
) -> Result<SafeSetIterate<T>> {
    let n = model.state_dim();
    let pieces = current.set.pieces();
    let restrict_to = match config.restrict {
        Restrict::PreviousIterate => pieces,
        Restrict::Constraints => constraints.pieces(),
    };
    let keep: Vec<usize> = (0..n).collect();
    let tasks: Vec<(usize, usize)> = (0..model.num_modes())
        .filter(|&q| !regions[q].is_empty().unwrap_or(true))
        .flat_map(|q| (0..pieces.len()).map(move |i| (q, i)))
        .collect();

    let candidates: Vec<Vec<HPolyhedron<T>>> = tasks
        .par_iter()
        .map(|&(q, i)| -> Result<Vec<HPolyhedron<T>>> {
            let lifted = pre_piece(model, q, &regions[q], &pieces[i])?;
            if lifted.is_empty()? {
                return Ok(Vec::new());
            }
            let pre = lifted.project(&keep)?;
            let mut out = Vec::new();
            for l in restrict_to {
                let c = pre.intersect(l)?;
                if is_substantial(&c, config.prune_tol)? {
                    out.push(c);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut next: Vec<HPolyhedron<T>> = candidates.into_iter().flatten().collect();
    if config.drop_subsumed {
        next = drop_subsumed(next)?;
    }

    let set = PolyUnion::new(n, next)?;
    let mut piece_counts = current.piece_counts.clone();
    piece_counts.push(set.len());
    let empty = set.is_empty();
    if empty {
        warn!("safe set became empty at k = {}", current.k + 1);
    }
    Ok(SafeSetIterate {
        k: current.k + 1,
        set,
        piece_counts,
        empty,
    })
}

fn is_substantial<T: Real>(p: &HPolyhedron<T>, prune_tol: T) -> Result<bool> {
    Ok(match p.chebyshev_ball(T::one())? {
        Some((_, r)) => r > prune_tol,
        None => false,
    })
}

/// `a ⊆ b` for single polyhedra: every row of `b` bounds `a`.
pub fn poly_subset<T: Real>(a: &HPolyhedron<T>, b: &HPolyhedron<T>) -> Result<bool> {
    for (row, &h) in b.h_mat().row_iter().zip(b.h_vec()) {
        match a.support(row)? {
            Some(s) if s <= h + T::redundancy_tol() => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

/// Removes pieces contained in another single piece. Among equal pieces the
/// first survives, so the result is order-deterministic.
fn drop_subsumed<T: Real>(pieces: Vec<HPolyhedron<T>>) -> Result<Vec<HPolyhedron<T>>> {
    let boxes: Vec<(Vec<T>, Vec<T>)> = pieces
        .iter()
        .map(|p| p.bounding_box())
        .collect::<Result<_>>()?;
    let tol = T::redundancy_tol();
    let box_inside = |a: usize, b: usize| {
        let ((alo, ahi), (blo, bhi)) = (&boxes[a], &boxes[b]);
        (0..alo.len()).all(|d| alo[d] >= blo[d] - tol && ahi[d] <= bhi[d] + tol)
    };
    let removed: Vec<bool> = (0..pieces.len())
        .into_par_iter()
        .map(|a| -> Result<bool> {
            for b in 0..pieces.len() {
                if a == b || !box_inside(a, b) {
                    continue;
                }
                if poly_subset(&pieces[a], &pieces[b])? {
                    // Mutual containment: keep the lower index.
                    if b > a && poly_subset(&pieces[b], &pieces[a])? {
                        continue;
                    }
                    return Ok(true);
                }
            }
            Ok(false)
        })
        .collect::<Result<_>>()?;
    Ok(pieces
        .into_iter()
        .zip(removed)
        .filter_map(|(p, r)| (!r).then_some(p))
        .collect())
}

/// Runs the recursion `k_max` times from `x`, checking monotone inclusion by
/// sampling after every step.
pub fn compute<T: Real>(
    model: &PwaModel<T>,
    x: &PolyUnion<T>,
    config: &SafeSetConfig<T>,
) -> Result<SafeSetIterate<T>> {
    compute_with(model, x, config, |_| {})
}

/// [`compute`] with a callback invoked on every iterate, including `χ_0`.
pub fn compute_with<T: Real>(
    model: &PwaModel<T>,
    x: &PolyUnion<T>,
    config: &SafeSetConfig<T>,
    mut on_iterate: impl FnMut(&SafeSetIterate<T>),
) -> Result<SafeSetIterate<T>> {
    if x.dim() != model.state_dim() {
        return Err(Error::Dimension("constraint set dimension differs from state".into()));
    }
    if x.is_empty() {
        return Err(Error::InvalidArgument("constraint set is empty".into()));
    }
    let working_box = config.working_box.as_ref().unwrap_or(model.working_box());
    let regions = restricted_regions(model, working_box)?;
    let mut current = SafeSetIterate::initial(x.clone());
    on_iterate(&current);
    while current.k < config.k_max {
        let next = iterate(model, &regions, x, &current, config)?;
        debug!("k = {}: {} pieces", next.k, next.set.len());
        on_iterate(&next);
        if next.empty {
            return Ok(next);
        }
        if config.convergence_samples > 0 {
            let seed = config.seed.wrapping_add(next.k as u64);
            let ev = sampled_subset(&next.set, &current.set, config.convergence_samples, seed)?;
            if let Some(point) = ev.counterexample {
                return Err(Error::Monotonicity {
                    k: next.k,
                    point: point.iter().map(|v| v.to_f64_lossy()).collect(),
                });
            }
            if config.early_stop {
                let back = sampled_subset(&current.set, &next.set, config.convergence_samples, seed)?;
                if back.is_subset_evidence {
                    return Ok(next);
                }
            }
        }
        current = next;
    }
    Ok(current)
}

pub const SAFE_SET_FORMAT: &str = "safeset-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct SafeSetDoc<T> {
    format: String,
    k: usize,
    piece_counts: Vec<usize>,
    model_hash: String,
    #[serde(flatten)]
    set: UnionDoc<T>,
}

/// Safe-set file: the union format plus `k`, `piece_counts` and the hash of
/// the model it was computed for.
pub fn to_json<T: Real>(iterate: &SafeSetIterate<T>, model_hash: &str) -> Result<String> {
    let doc = SafeSetDoc {
        format: SAFE_SET_FORMAT.into(),
        k: iterate.k,
        piece_counts: iterate.piece_counts.clone(),
        model_hash: model_hash.into(),
        set: UnionDoc::from_union(&iterate.set),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Parses a safe-set file and returns it with its recorded model hash.
/// A bare union document is accepted as `χ_0` with an empty hash.
pub fn from_json<T: Real>(s: &str) -> Result<(SafeSetIterate<T>, String)> {
    let value: serde_json::Value = serde_json::from_str(s)?;
    if value.get("format").is_none() {
        let doc: UnionDoc<T> = serde_json::from_value(value)?;
        return Ok((SafeSetIterate::initial(doc.to_union()?), String::new()));
    }
    let doc: SafeSetDoc<T> = serde_json::from_value(value)?;
    if doc.format != SAFE_SET_FORMAT {
        return Err(Error::Format(format!(
            "format tag is {:?}, expected {SAFE_SET_FORMAT:?}",
            doc.format
        )));
    }
    let set = doc.set.to_union()?;
    let empty = set.is_empty();
    Ok((
        SafeSetIterate {
            k: doc.k,
            set,
            piece_counts: doc.piece_counts,
            empty,
        },
        doc.model_hash,
    ))
}
