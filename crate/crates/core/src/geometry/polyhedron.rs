use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Matrix};
use crate::optim::{solve_lp, LinearProgram, Status};
use crate::scalar::Real;

/// Closed polyhedron `{x : H x ≤ h}`.
///
/// A polyhedron with zero rows is the whole space. The canonical empty set is
/// the single row `0ᵀx ≤ -1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolyhedron<T> {
    dim: usize,
    h_mat: Matrix<T>,
    h_vec: Vec<T>,
}

impl<T: Real> HPolyhedron<T> {
    pub fn new(h_mat: Matrix<T>, h_vec: Vec<T>) -> Result<Self> {
        if h_mat.rows() != h_vec.len() {
            return Err(Error::Dimension(format!(
                "H has {} rows but h has {} entries",
                h_mat.rows(),
                h_vec.len()
            )));
        }
        if !h_mat.is_finite() || h_vec.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("non-finite halfspace data".into()));
        }
        Ok(Self {
            dim: h_mat.cols(),
            h_mat,
            h_vec,
        })
    }

    /// Builds from explicit rows; `dim` is required so an empty row list is valid.
    pub fn from_rows(dim: usize, rows: &[Vec<T>], rhs: &[T]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows, dim)?, rhs.to_vec())
    }

    pub fn universe(dim: usize) -> Self {
        Self {
            dim,
            h_mat: Matrix::zeros(0, dim),
            h_vec: Vec::new(),
        }
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            h_mat: Matrix::zeros(1, dim),
            h_vec: vec![-T::one()],
        }
    }

    /// Axis-aligned box `lo ≤ x ≤ hi`.
    pub fn from_box(lo: &[T], hi: &[T]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension("box bounds differ in length".into()));
        }
        let n = lo.len();
        let mut rows = Vec::with_capacity(2 * n);
        let mut rhs = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut r = vec![T::zero(); n];
            r[i] = T::one();
            rows.push(r);
            rhs.push(hi[i]);
            let mut r = vec![T::zero(); n];
            r[i] = -T::one();
            rows.push(r);
            rhs.push(-lo[i]);
        }
        Self::from_rows(n, &rows, &rhs)
    }

    /// The single point `{p}`.
    pub fn point(p: &[T]) -> Result<Self> {
        Self::from_box(p, p)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn num_rows(&self) -> usize {
        self.h_vec.len()
    }

    pub fn h_mat(&self) -> &Matrix<T> {
        &self.h_mat
    }

    pub fn h_vec(&self) -> &[T] {
        &self.h_vec
    }

    fn check_dim(&self, n: usize, what: &str) -> Result<()> {
        if n != self.dim {
            return Err(Error::Dimension(format!(
                "{what} has dimension {n}, polyhedron has {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// `H x ≤ h + tol` componentwise.
    pub fn contains(&self, x: &[T]) -> Result<bool> {
        self.check_dim(x.len(), "point")?;
        Ok(self.satisfies(x, T::feas_tol()))
    }

    /// Unchecked membership with an explicit tolerance.
    #[inline]
    pub fn satisfies(&self, x: &[T], tol: T) -> bool {
        self.h_mat
            .row_iter()
            .zip(&self.h_vec)
            .all(|(r, &hi)| dot(r, x) <= hi + tol)
    }

    /// Largest constraint violation `max_i (H_i x − h_i)`; negative inside.
    pub fn max_violation(&self, x: &[T]) -> T {
        self.h_mat
            .row_iter()
            .zip(&self.h_vec)
            .map(|(r, &hi)| dot(r, x) - hi)
            .fold(T::neg_infinity(), T::max)
    }

    fn feasibility_lp(&self, cost: Vec<T>) -> Result<LinearProgram<T>> {
        LinearProgram::new(cost, self.h_mat.clone(), self.h_vec.clone())
    }

    pub fn is_empty(&self) -> Result<bool> {
        if self.num_rows() == 0 {
            return Ok(false);
        }
        let out = solve_lp(&self.feasibility_lp(vec![T::zero(); self.dim])?)?;
        Ok(out.status == Status::Infeasible)
    }

    /// Some point of the set, if nonempty.
    pub fn interior_point(&self) -> Result<Option<Vec<T>>> {
        Ok(self.chebyshev_ball(T::of(1e3))?.map(|(c, _)| c))
    }

    /// Center and radius of the largest inscribed ball, with the radius
    /// capped at `cap` so unbounded sets still yield a finite answer.
    pub fn chebyshev_ball(&self, cap: T) -> Result<Option<(Vec<T>, T)>> {
        let n = self.dim;
        let mut rows = Vec::with_capacity(self.num_rows());
        for r in self.h_mat.row_iter() {
            let mut row = r.to_vec();
            row.push(norm2(r));
            rows.push(row);
        }
        let mut cost = vec![T::zero(); n + 1];
        cost[n] = -T::one();
        let mut bounds = vec![(None, None); n + 1];
        bounds[n] = (Some(T::zero()), Some(cap));
        let lp = LinearProgram::new(cost, Matrix::from_rows(&rows, n + 1)?, self.h_vec.clone())?
            .with_bounds(bounds)?;
        let out = solve_lp(&lp)?;
        Ok(match out.status {
            Status::Optimal => {
                let mut sol = out.solution.expect("optimal");
                let r = sol.pop().expect("radius variable");
                Some((sol, r))
            }
            _ => None,
        })
    }

    /// Support function `max_{x∈P} dᵀx`. `Ok(None)` when unbounded; an empty
    /// set yields negative infinity.
    pub fn support(&self, d: &[T]) -> Result<Option<T>> {
        self.check_dim(d.len(), "direction")?;
        let cost: Vec<T> = d.iter().map(|&v| -v).collect();
        let out = solve_lp(&self.feasibility_lp(cost)?)?;
        Ok(match out.status {
            Status::Optimal => Some(-out.objective.expect("optimal")),
            Status::Unbounded => None,
            Status::Infeasible => Some(T::neg_infinity()),
        })
    }

    /// Row-stacked intersection with redundant rows removed.
    pub fn intersect(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim, "intersected set")?;
        self.intersect_raw(other)?.remove_redundant()
    }

    /// Row-stacked intersection without any simplification.
    pub fn intersect_raw(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim, "intersected set")?;
        let h_mat = Matrix::vstack(&[&self.h_mat, &other.h_mat])?;
        let mut h_vec = self.h_vec.clone();
        h_vec.extend_from_slice(&other.h_vec);
        Ok(Self {
            dim: self.dim,
            h_mat,
            h_vec,
        })
    }

    /// Pontryagin difference `{x : x + B ⊆ P}` using one support-function LP
    /// per row of `P`.
    pub fn pontryagin_diff(&self, b: &Self) -> Result<Self> {
        self.check_dim(b.dim, "eroding set")?;
        if b.is_empty()? {
            return Err(Error::InvalidArgument(
                "Pontryagin difference by an empty set".into(),
            ));
        }
        let mut h_vec = Vec::with_capacity(self.num_rows());
        for (r, &hi) in self.h_mat.row_iter().zip(&self.h_vec) {
            let s = b.support(r)?.ok_or_else(|| Error::UnboundedErosion {
                direction: r.iter().map(|v| v.to_f64_lossy()).collect(),
            })?;
            h_vec.push(hi - s);
        }
        Ok(Self {
            dim: self.dim,
            h_mat: self.h_mat.clone(),
            h_vec,
        })
    }

    /// Pontryagin difference by the linear image `E·W` of a set `W`, using
    /// `σ_{EW}(d) = σ_W(Eᵀd)` so `E·W` never has to be represented.
    pub fn erode_by_image(&self, w: &Self, e: &Matrix<T>) -> Result<Self> {
        if e.rows() != self.dim || e.cols() != w.dim {
            return Err(Error::Dimension(format!(
                "E is {}x{}, expected {}x{}",
                e.rows(),
                e.cols(),
                self.dim,
                w.dim
            )));
        }
        if w.is_empty()? {
            return Err(Error::InvalidArgument(
                "Pontryagin difference by an empty set".into(),
            ));
        }
        let et = e.transpose();
        let mut h_vec = Vec::with_capacity(self.num_rows());
        for (r, &hi) in self.h_mat.row_iter().zip(&self.h_vec) {
            let dir = et.matvec(r);
            let s = if dir.iter().all(|v| *v == T::zero()) {
                T::zero()
            } else {
                w.support(&dir)?.ok_or_else(|| Error::UnboundedErosion {
                    direction: dir.iter().map(|v| v.to_f64_lossy()).collect(),
                })?
            };
            h_vec.push(hi - s);
        }
        Ok(Self {
            dim: self.dim,
            h_mat: self.h_mat.clone(),
            h_vec,
        })
    }

    /// `P + t = {x : H x ≤ h + H t}`.
    pub fn translate(&self, t: &[T]) -> Result<Self> {
        self.check_dim(t.len(), "translation")?;
        let shift = self.h_mat.matvec(t);
        Ok(Self {
            dim: self.dim,
            h_mat: self.h_mat.clone(),
            h_vec: self.h_vec.iter().zip(shift).map(|(&h, s)| h + s).collect(),
        })
    }

    /// Preimage `{z : M z ∈ P} = {z : (H M) z ≤ h}`.
    pub fn affine_preimage(&self, m: &Matrix<T>) -> Result<Self> {
        if m.rows() != self.dim {
            return Err(Error::Dimension(format!(
                "map has {} output rows, polyhedron has dimension {}",
                m.rows(),
                self.dim
            )));
        }
        let h_mat = if self.num_rows() == 0 {
            Matrix::zeros(0, m.cols())
        } else {
            self.h_mat.matmul(m)?
        };
        Ok(Self {
            dim: m.cols(),
            h_mat,
            h_vec: self.h_vec.clone(),
        })
    }

    /// Preimage under the affine map `z ↦ M z + c`.
    pub fn affine_preimage_offset(&self, m: &Matrix<T>, c: &[T]) -> Result<Self> {
        self.translate(&c.iter().map(|&v| -v).collect::<Vec<_>>())?
            .affine_preimage(m)
    }

    /// Block-diagonal stacking: `parts[0] × parts[1] × …`.
    pub fn cartesian_product(parts: &[Self]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument(
                "Cartesian product of an empty list".into(),
            ));
        }
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let rows: usize = parts.iter().map(|p| p.num_rows()).sum();
        let mut h_mat = Matrix::zeros(rows, dim);
        let mut h_vec = Vec::with_capacity(rows);
        let (mut r0, mut c0) = (0, 0);
        for p in parts {
            for (i, row) in p.h_mat.row_iter().enumerate() {
                h_mat.row_mut(r0 + i)[c0..c0 + p.dim].copy_from_slice(row);
            }
            h_vec.extend_from_slice(&p.h_vec);
            r0 += p.num_rows();
            c0 += p.dim;
        }
        Ok(Self { dim, h_mat, h_vec })
    }

    /// Projection onto the coordinates in `keep_dims` (in that order) by
    /// Fourier–Motzkin elimination, one variable at a time, with redundancy
    /// removal after every elimination.
    pub fn project(&self, keep_dims: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.dim];
        for &k in keep_dims {
            if k >= self.dim || seen[k] {
                return Err(Error::Dimension(format!(
                    "invalid projection index {k} for dimension {}",
                    self.dim
                )));
            }
            seen[k] = true;
        }
        // Current coordinate order: original indices still present.
        let mut coords: Vec<usize> = (0..self.dim).collect();
        let mut cur = self.remove_redundant()?;
        for drop in (0..self.dim).rev().filter(|d| !seen[*d]) {
            let pos = coords.iter().position(|&c| c == drop).expect("coordinate present");
            cur = cur.eliminate(pos)?.remove_redundant()?;
            coords.remove(pos);
        }
        // Reorder remaining coordinates to match keep_dims.
        let perm: Vec<usize> = keep_dims
            .iter()
            .map(|k| coords.iter().position(|c| c == k).expect("kept coordinate"))
            .collect();
        let mut h_mat = Matrix::zeros(cur.num_rows(), keep_dims.len());
        for (i, row) in cur.h_mat.row_iter().enumerate() {
            for (j, &p) in perm.iter().enumerate() {
                h_mat[(i, j)] = row[p];
            }
        }
        Ok(Self {
            dim: keep_dims.len(),
            h_mat,
            h_vec: cur.h_vec,
        })
    }

    /// One Fourier–Motzkin step removing coordinate `k`.
    fn eliminate(&self, k: usize) -> Result<Self> {
        let n = self.dim;
        let tol = T::pivot_tol();
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut rows: Vec<Vec<T>> = Vec::new();
        let mut rhs: Vec<T> = Vec::new();
        let strip = |r: &[T]| -> Vec<T> {
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, &v)| v)
                .collect()
        };
        for (i, r) in self.h_mat.row_iter().enumerate() {
            let a = r[k];
            if a > tol {
                pos.push(i);
            } else if a < -tol {
                neg.push(i);
            } else {
                rows.push(strip(r));
                rhs.push(self.h_vec[i]);
            }
        }
        for &p in &pos {
            let rp = self.h_mat.row(p);
            let ap = rp[k];
            for &q in &neg {
                let rq = self.h_mat.row(q);
                let aq = -rq[k];
                let combined: Vec<T> = rp.iter().zip(rq).map(|(&x, &y)| x / ap + y / aq).collect();
                rows.push(strip(&combined));
                rhs.push(self.h_vec[p] / ap + self.h_vec[q] / aq);
            }
        }
        Self::from_rows(n - 1, &rows, &rhs)
    }

    /// Drops every row whose removal does not enlarge the set (up to the
    /// redundancy tolerance). Rows are normalized to unit length first.
    /// Returns the canonical empty set when the system is infeasible.
    pub fn remove_redundant(&self) -> Result<Self> {
        let n = self.dim;
        let zero_tol = T::pivot_tol();
        let mut rows: Vec<Vec<T>> = Vec::with_capacity(self.num_rows());
        let mut rhs: Vec<T> = Vec::with_capacity(self.num_rows());
        for (r, &hi) in self.h_mat.row_iter().zip(&self.h_vec) {
            let nr = norm2(r);
            if nr <= zero_tol {
                if hi < -T::feas_tol() {
                    return Ok(Self::empty(n));
                }
                continue;
            }
            if hi == T::infinity() {
                continue;
            }
            let unit: Vec<T> = r.iter().map(|&v| v / nr).collect();
            let b = hi / nr;
            // Parallel duplicates keep the tighter bound.
            if let Some(j) = rows.iter().position(|q| {
                q.iter().zip(&unit).all(|(&x, &y)| (x - y).abs() <= T::opt_tol())
            }) {
                if b < rhs[j] {
                    rhs[j] = b;
                }
                continue;
            }
            rows.push(unit);
            rhs.push(b);
        }
        let cand = Self::from_rows(n, &rows, &rhs)?;
        if cand.is_empty()? {
            return Ok(Self::empty(n));
        }

        let keep = match cand.chebyshev_ball(T::one())? {
            Some((center, r)) if r > T::redundancy_tol() => clarkson(&rows, &rhs, &center)?,
            _ => sequential_filter(&rows, &rhs)?,
        };
        let rows: Vec<Vec<T>> = rows
            .into_iter()
            .zip(&keep)
            .filter_map(|(r, &k)| k.then_some(r))
            .collect();
        let rhs: Vec<T> = rhs
            .into_iter()
            .zip(&keep)
            .filter_map(|(b, &k)| k.then_some(b))
            .collect();
        Self::from_rows(n, &rows, &rhs)
    }

    /// Coordinate-wise bounds of the set. Errors if unbounded or empty.
    pub fn bounding_box(&self) -> Result<(Vec<T>, Vec<T>)> {
        let n = self.dim;
        let mut lo = vec![T::zero(); n];
        let mut hi = vec![T::zero(); n];
        for i in 0..n {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            let up = self.support(&e)?;
            e[i] = -T::one();
            let down = self.support(&e)?;
            match (up, down) {
                (Some(u), Some(d)) if u.is_finite() && d.is_finite() => {
                    hi[i] = u;
                    lo[i] = -d;
                }
                (Some(u), _) if u == T::neg_infinity() => return Err(Error::EmptySampleRegion),
                _ => {
                    let mut dir = vec![0.0; n];
                    dir[i] = if up.is_none() { 1.0 } else { -1.0 };
                    return Err(Error::Unbounded { direction: dir });
                }
            }
        }
        Ok((lo, hi))
    }

    pub fn cast<U: Real>(&self) -> HPolyhedron<U> {
        HPolyhedron {
            dim: self.dim,
            h_mat: self.h_mat.cast(),
            h_vec: self.h_vec.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
        }
    }
}

/// `max rows[i]·x` over the rows in `active` plus row `i` relaxed by one.
/// `None` when the LP is not optimal.
fn max_over<T: Real>(
    rows: &[Vec<T>],
    rhs: &[T],
    i: usize,
    active: impl Iterator<Item = usize>,
) -> Result<Option<(T, Vec<T>)>> {
    let n = rows[i].len();
    let mut sub_rows = Vec::new();
    let mut sub_rhs = Vec::new();
    for j in active {
        if j != i {
            sub_rows.push(rows[j].clone());
            sub_rhs.push(rhs[j]);
        }
    }
    sub_rows.push(rows[i].clone());
    sub_rhs.push(rhs[i] + T::one());
    let cost: Vec<T> = rows[i].iter().map(|&v| -v).collect();
    let lp = LinearProgram::new(cost, Matrix::from_rows(&sub_rows, n)?, sub_rhs)?;
    let out = solve_lp(&lp)?;
    Ok(match out.status {
        Status::Optimal => Some((-out.objective.expect("optimal"), out.solution.expect("optimal"))),
        _ => None,
    })
}

/// One LP per row against every row still kept.
fn sequential_filter<T: Real>(rows: &[Vec<T>], rhs: &[T]) -> Result<Vec<bool>> {
    let mut keep = vec![true; rows.len()];
    for i in 0..rows.len() {
        let active: Vec<usize> = (0..rows.len()).filter(|&j| keep[j]).collect();
        if let Some((best, _)) = max_over(rows, rhs, i, active.into_iter())? {
            if best <= rhs[i] + T::redundancy_tol() {
                keep[i] = false;
            }
        }
    }
    Ok(keep)
}

/// Clarkson's method: LPs only involve rows already known to be facets. A
/// row that beats the known facets is resolved by shooting a ray from the
/// interior point `center` towards the LP maximizer; the first row hit is a
/// facet. Ties on the ray fall back to a full LP for that row.
fn clarkson<T: Real>(rows: &[Vec<T>], rhs: &[T], center: &[T]) -> Result<Vec<bool>> {
    let m = rows.len();
    let mut facet = vec![false; m];
    let mut redundant = vec![false; m];
    let slack: Vec<T> = (0..m).map(|j| rhs[j] - dot(&rows[j], center)).collect();
    for i in 0..m {
        while !facet[i] && !redundant[i] {
            let known = (0..m).filter(|&j| facet[j]);
            let Some((best, x)) = max_over(rows, rhs, i, known)? else {
                facet[i] = true;
                break;
            };
            if best <= rhs[i] + T::redundancy_tol() {
                redundant[i] = true;
                break;
            }
            let dir: Vec<T> = x.iter().zip(center).map(|(&a, &c)| a - c).collect();
            let mut hit: Option<(usize, T)> = None;
            let mut tie = false;
            for j in (0..m).filter(|&j| !redundant[j]) {
                let rate = dot(&rows[j], &dir);
                if rate <= T::zero() {
                    continue;
                }
                let t = slack[j] / rate;
                match hit {
                    None => hit = Some((j, t)),
                    Some((_, tb)) => {
                        let gap = T::of(1e-9) * tb.abs().max(T::one());
                        if t < tb - gap {
                            hit = Some((j, t));
                            tie = false;
                        } else if (t - tb).abs() <= gap {
                            tie = true;
                        }
                    }
                }
            }
            match hit {
                Some((j, _)) if !tie && !facet[j] => facet[j] = true,
                _ => {
                    let others = (0..m).filter(|&j| !redundant[j]);
                    match max_over(rows, rhs, i, others)? {
                        Some((best, _)) if best <= rhs[i] + T::redundancy_tol() => {
                            redundant[i] = true
                        }
                        _ => facet[i] = true,
                    }
                }
            }
        }
    }
    Ok(facet)
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = HPolyhedron<f64>;

    fn interval(lo: f64, hi: f64) -> HPolyhedron<f64> {
        P::from_box(&[lo], &[hi]).unwrap()
    }

    fn upper(b: f64) -> HPolyhedron<f64> {
        P::from_rows(1, &[vec![1.0]], &[b]).unwrap()
    }

    #[test]
    fn contains_closed_boundary() {
        let p = upper(1.0);
        assert!(p.contains(&[0.0]).unwrap());
        assert!(p.contains(&[1.0]).unwrap());
        assert!(!p.contains(&[1.0 + 1e-6]).unwrap());
        let e = P::from_rows(1, &[vec![1.0], vec![-1.0]], &[1.0, -2.0]).unwrap();
        assert!(!e.contains(&[1.5]).unwrap());
        assert!(p.contains(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn emptiness() {
        assert!(!upper(1.0).is_empty().unwrap());
        let e = P::from_rows(1, &[vec![1.0], vec![-1.0]], &[0.0, -1.0]).unwrap();
        assert!(e.is_empty().unwrap());
        assert!(!HPolyhedron::<f64>::universe(3).is_empty().unwrap());
        assert!(HPolyhedron::<f64>::empty(2).is_empty().unwrap());
        assert!(!P::point(&[1.0, 2.0]).unwrap().is_empty().unwrap());
    }

    #[test]
    fn interval_intersection() {
        let r = interval(0.0, 2.0).intersect(&interval(1.0, 3.0)).unwrap();
        let (lo, hi) = r.bounding_box().unwrap();
        assert!((lo[0] - 1.0).abs() < 1e-12 && (hi[0] - 2.0).abs() < 1e-12);
        assert_eq!(r.num_rows(), 2);
    }

    #[test]
    fn self_intersection_is_idempotent() {
        let p = P::from_box(&[0.0, -1.0], &[2.0, 1.0]).unwrap();
        let q = p.intersect(&p).unwrap();
        assert_eq!(q.num_rows(), 4);
        for x in [[1.0, 0.0], [2.0, 1.0], [2.1, 0.0], [0.0, -1.01]] {
            assert_eq!(p.contains(&x).unwrap(), q.contains(&x).unwrap());
        }
    }

    #[test]
    fn erosion_by_point_is_identity() {
        let p = P::from_box(&[0.0, 0.0], &[1.0, 2.0]).unwrap();
        let z = P::point(&[0.0, 0.0]).unwrap();
        let d = p.pontryagin_diff(&z).unwrap();
        assert_eq!(d.h_vec(), p.h_vec());
    }

    #[test]
    fn box_erosion_is_per_axis() {
        let p = P::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let b = P::from_box(&[-0.1, -0.1], &[0.1, 0.1]).unwrap();
        let d = p.pontryagin_diff(&b).unwrap();
        let (lo, hi) = d.bounding_box().unwrap();
        for i in 0..2 {
            assert!((lo[i] - 0.1).abs() < 1e-12);
            assert!((hi[i] - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn erosion_by_unbounded_set_errors() {
        let p = P::from_box(&[0.0], &[1.0]).unwrap();
        let b = upper(0.0);
        assert!(matches!(p.pontryagin_diff(&b), Err(Error::UnboundedErosion { .. })));
    }

    #[test]
    fn erode_by_image_matches_explicit_segment() {
        // E·[-1,1] with E = (0, 0.2)ᵀ is the vertical segment of half-length 0.2.
        let p = P::from_rows(
            2,
            &[vec![1.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            &[1.0, 0.0, 0.0],
        )
        .unwrap();
        let w = interval(-1.0, 1.0);
        let e = Matrix::from_rows(&[vec![0.0], vec![0.2]], 1).unwrap();
        let via_image = p.erode_by_image(&w, &e).unwrap();
        let seg = P::from_box(&[0.0, -0.2], &[0.0, 0.2]).unwrap();
        let direct = p.pontryagin_diff(&seg).unwrap();
        for (a, b) in via_image.h_vec().iter().zip(direct.h_vec()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn translate_interval() {
        let t = interval(0.0, 1.0).translate(&[1.0]).unwrap();
        let (lo, hi) = t.bounding_box().unwrap();
        assert!((lo[0] - 1.0).abs() < 1e-12 && (hi[0] - 2.0).abs() < 1e-12);
        let same = interval(0.0, 1.0).translate(&[0.0]).unwrap();
        assert_eq!(same, interval(0.0, 1.0));
    }

    #[test]
    fn scalar_preimage() {
        let m = Matrix::from_rows(&[vec![2.0]], 1).unwrap();
        let pre = upper(1.0).affine_preimage(&m).unwrap();
        assert!(pre.contains(&[0.5]).unwrap());
        assert!(!pre.contains(&[0.5 + 1e-6]).unwrap());
        let id = upper(1.0).affine_preimage(&Matrix::identity(1)).unwrap();
        assert_eq!(id, upper(1.0));
    }

    #[test]
    fn product_of_unit_intervals() {
        let sq = P::cartesian_product(&[interval(0.0, 1.0), interval(0.0, 1.0)]).unwrap();
        assert_eq!(sq.dim(), 2);
        assert!(sq.contains(&[0.5, 1.0]).unwrap());
        assert!(!sq.contains(&[0.5, 1.1]).unwrap());
        let one = P::cartesian_product(&[interval(0.0, 1.0)]).unwrap();
        assert_eq!(one, interval(0.0, 1.0));
        assert!(HPolyhedron::<f64>::cartesian_product(&[]).is_err());
    }

    #[test]
    fn projection_of_simplex_corner() {
        // {x + u ≤ 1, x ≥ 0, u ≥ 0} → x ∈ [0, 1]
        let p = P::from_rows(
            2,
            &[vec![1.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            &[1.0, 0.0, 0.0],
        )
        .unwrap();
        let r = p.project(&[0]).unwrap();
        let (lo, hi) = r.bounding_box().unwrap();
        assert!(lo[0].abs() < 1e-12 && (hi[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_of_independent_set_keeps_constraints() {
        let p = P::from_box(&[0.0, -5.0, 1.0], &[1.0, 5.0, 2.0]).unwrap();
        let r = p.project(&[2, 0]).unwrap();
        assert_eq!(r.num_rows(), 4);
        assert!(r.contains(&[1.5, 0.5]).unwrap());
        assert!(!r.contains(&[0.5, 1.5]).unwrap());
    }

    #[test]
    fn projection_of_empty_set_is_empty() {
        let p = P::from_rows(2, &[vec![1.0, 0.0], vec![-1.0, 0.0]], &[0.0, -1.0]).unwrap();
        assert!(p.project(&[1]).unwrap().is_empty().unwrap());
    }

    #[test]
    fn redundancy_removal() {
        let p = P::from_rows(1, &[vec![1.0], vec![1.0]], &[1.0, 2.0]).unwrap();
        let r = p.remove_redundant().unwrap();
        assert_eq!(r.num_rows(), 1);
        assert!((r.h_vec()[0] - 1.0).abs() < 1e-12);
        let sq = P::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(sq.remove_redundant().unwrap().num_rows(), 4);
        let with_cut = sq
            .intersect_raw(&P::from_rows(2, &[vec![1.0, 1.0]], &[5.0]).unwrap())
            .unwrap();
        assert_eq!(with_cut.remove_redundant().unwrap().num_rows(), 4);
    }

    #[test]
    fn chebyshev_radius_of_square() {
        let sq = P::from_box(&[0.0, 0.0], &[2.0, 2.0]).unwrap();
        let (c, r) = sq.chebyshev_ball(1e3).unwrap().unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] - 1.0).abs() < 1e-12);
        assert!(HPolyhedron::<f64>::empty(2).chebyshev_ball(1e3).unwrap().is_none());
    }

    #[test]
    fn works_in_single_precision() {
        let p = HPolyhedron::<f32>::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let b = HPolyhedron::<f32>::from_box(&[-0.25, -0.25], &[0.25, 0.25]).unwrap();
        let d = p.pontryagin_diff(&b).unwrap();
        assert!(d.contains(&[0.5, 0.5]).unwrap());
        assert!(!d.contains(&[0.2, 0.5]).unwrap());
        assert_eq!(d.project(&[0]).unwrap().num_rows(), 2);
    }
}
