use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::HPolyhedron;

/// Finite union of polyhedra sharing one ambient dimension. Piece order is
/// construction order and is significant: callers break ties by index.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyUnion<T> {
    dim: usize,
    pieces: Vec<HPolyhedron<T>>,
}

/// Outcome of [`sampled_subset`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetEvidence<T> {
    /// `true` when no sampled point of the first union fell outside the second.
    pub is_subset_evidence: bool,
    pub counterexample: Option<Vec<T>>,
    /// Number of accepted samples that were checked.
    pub checked: usize,
}

impl<T: Real> PolyUnion<T> {
    /// Builds a union, dropping empty pieces.
    pub fn new(dim: usize, pieces: Vec<HPolyhedron<T>>) -> Result<Self> {
        let mut kept = Vec::with_capacity(pieces.len());
        for p in pieces {
            if p.dim() != dim {
                return Err(Error::Dimension(format!(
                    "piece of dimension {} in a union of dimension {dim}",
                    p.dim()
                )));
            }
            if !p.is_empty()? {
                kept.push(p);
            }
        }
        Ok(Self { dim, pieces: kept })
    }

    pub fn single(p: HPolyhedron<T>) -> Result<Self> {
        Self::new(p.dim(), vec![p])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[HPolyhedron<T>] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn contains(&self, x: &[T]) -> Result<bool> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!(
                "point has dimension {}, union has {}",
                x.len(),
                self.dim
            )));
        }
        Ok(self.satisfies(x, T::feas_tol()))
    }

    #[inline]
    pub fn satisfies(&self, x: &[T], tol: T) -> bool {
        self.pieces.iter().any(|p| p.satisfies(x, tol))
    }

    /// Index of the first piece containing `x`.
    pub fn containing_piece(&self, x: &[T]) -> Option<usize> {
        self.pieces.iter().position(|p| p.satisfies(x, T::feas_tol()))
    }

    /// Intersection of every piece with `p`, empties dropped.
    pub fn intersect_each(&self, p: &HPolyhedron<T>) -> Result<Self> {
        let pieces = self
            .pieces
            .iter()
            .map(|q| q.intersect(p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.dim, pieces)
    }

    /// Bounding box of the whole union.
    pub fn bounding_box(&self) -> Result<(Vec<T>, Vec<T>)> {
        let mut lo = vec![T::infinity(); self.dim];
        let mut hi = vec![T::neg_infinity(); self.dim];
        for p in &self.pieces {
            let (l, h) = p.bounding_box()?;
            for i in 0..self.dim {
                lo[i] = lo[i].min(l[i]);
                hi[i] = hi[i].max(h[i]);
            }
        }
        if self.pieces.is_empty() {
            return Err(Error::EmptySampleRegion);
        }
        Ok((lo, hi))
    }

    /// Rejection-samples `n` points of the union uniformly over its bounding box.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<Vec<T>>> {
        let (lo, hi) = self.bounding_box()?;
        sample_in(&lo, &hi, n, rng, |x| self.satisfies(x, T::feas_tol()))
    }

    pub fn cast<U: Real>(&self) -> PolyUnion<U> {
        PolyUnion {
            dim: self.dim,
            pieces: self.pieces.iter().map(|p| p.cast()).collect(),
        }
    }
}

/// Rejection sampling helper shared by the union and callers with their own
/// membership predicates. Gives up after `1000·n` draws.
pub fn sample_in<T: Real>(
    lo: &[T],
    hi: &[T],
    n: usize,
    rng: &mut impl Rng,
    accept: impl Fn(&[T]) -> bool,
) -> Result<Vec<Vec<T>>> {
    let mut out = Vec::with_capacity(n);
    let max_draws = 1000usize.saturating_mul(n.max(1));
    let mut draws = 0;
    while out.len() < n {
        if draws >= max_draws {
            if out.is_empty() {
                return Err(Error::EmptySampleRegion);
            }
            break;
        }
        draws += 1;
        let x: Vec<T> = lo
            .iter()
            .zip(hi)
            .map(|(&l, &h)| l + (h - l) * T::of(rng.random::<f64>()))
            .collect();
        if accept(&x) {
            out.push(x);
        }
    }
    Ok(out)
}

/// Sample-based evidence for `u1 ⊆ u2`: draws points of `u1` and reports the
/// first one that `u2` does not contain.
pub fn sampled_subset<T: Real>(
    u1: &PolyUnion<T>,
    u2: &PolyUnion<T>,
    n_samples: usize,
    rng_seed: u64,
) -> Result<SubsetEvidence<T>> {
    if u1.dim() != u2.dim() {
        return Err(Error::Dimension("unions differ in dimension".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (lo, hi) = u1.bounding_box()?;
    let max_draws = 1000usize.saturating_mul(n_samples);
    let mut checked = 0;
    let mut draws = 0;
    while checked < n_samples && draws < max_draws {
        draws += 1;
        let x: Vec<T> = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| l + (h - l) * T::of(rng.random::<f64>()))
            .collect();
        if !u1.satisfies(&x, T::zero()) {
            continue;
        }
        checked += 1;
        if !u2.satisfies(&x, T::feas_tol()) {
            return Ok(SubsetEvidence {
                is_subset_evidence: false,
                counterexample: Some(x),
                checked,
            });
        }
    }
    if checked == 0 {
        return Err(Error::EmptySampleRegion);
    }
    Ok(SubsetEvidence {
        is_subset_evidence: true,
        counterexample: None,
        checked,
    })
}
