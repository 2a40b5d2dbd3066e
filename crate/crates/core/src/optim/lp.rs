use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

use super::{SolveOutcome, Status, MAX_ITERATIONS};

/// `min cᵀx  s.t.  A x ≤ b,  lo ≤ x ≤ hi` with free variables by default.
#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    pub c: Vec<T>,
    pub a: Matrix<T>,
    pub b: Vec<T>,
    /// Optional per-variable `(lower, upper)` bounds.
    pub bounds: Option<Vec<(Option<T>, Option<T>)>>,
}

impl<T: Real> LinearProgram<T> {
    pub fn new(c: Vec<T>, a: Matrix<T>, b: Vec<T>) -> Result<Self> {
        let lp = Self {
            c,
            a,
            b,
            bounds: None,
        };
        lp.check()?;
        Ok(lp)
    }

    pub fn with_bounds(mut self, bounds: Vec<(Option<T>, Option<T>)>) -> Result<Self> {
        self.bounds = Some(bounds);
        self.check()?;
        Ok(self)
    }

    fn check(&self) -> Result<()> {
        let n = self.c.len();
        if self.a.cols() != n && !(self.a.rows() == 0) {
            return Err(Error::Dimension(format!(
                "LP has {n} costs but {} constraint columns",
                self.a.cols()
            )));
        }
        if self.a.rows() != self.b.len() {
            return Err(Error::Dimension(format!(
                "LP has {} constraint rows but {} right-hand sides",
                self.a.rows(),
                self.b.len()
            )));
        }
        if let Some(bd) = &self.bounds {
            if bd.len() != n {
                return Err(Error::Dimension("bounds length differs from variable count".into()));
            }
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    /// Inequality rows `(A_aug, b_aug)` the solver actually works with: the
    /// rows of `A` followed by one row per finite bound (lower bounds as
    /// `-x_j ≤ -lo_j`, then upper bounds as `x_j ≤ hi_j`, in variable order).
    /// Duals are reported against these rows.
    pub fn constraint_rows(&self) -> (Matrix<T>, Vec<T>) {
        let n = self.num_vars();
        let mut rows: Vec<Vec<T>> = self.a.to_rows();
        let mut rhs = self.b.clone();
        if let Some(bd) = &self.bounds {
            for (j, (lo, _)) in bd.iter().enumerate() {
                if let Some(lo) = lo {
                    let mut r = vec![T::zero(); n];
                    r[j] = -T::one();
                    rows.push(r);
                    rhs.push(-*lo);
                }
            }
            for (j, (_, hi)) in bd.iter().enumerate() {
                if let Some(hi) = hi {
                    let mut r = vec![T::zero(); n];
                    r[j] = T::one();
                    rows.push(r);
                    rhs.push(*hi);
                }
            }
        }
        let a = Matrix::from_rows(&rows, n).expect("rows built with n columns");
        (a, rhs)
    }
}

/// Two-phase dense tableau simplex with Bland's rule.
///
/// Variables are split as `x = x⁺ − x⁻`; each inequality row gets a slack,
/// and rows with a negative right-hand side get an artificial.
pub fn solve_lp<T: Real>(lp: &LinearProgram<T>) -> Result<SolveOutcome<T>> {
    lp.check()?;
    let (a, b) = lp.constraint_rows();
    let n = lp.num_vars();
    let m = a.rows();

    // Column layout: [x⁺ (n) | x⁻ (n) | slack (m) | artificial (n_art)] | rhs
    let neg_rows: Vec<usize> = (0..m).filter(|&i| b[i] < T::zero()).collect();
    let n_art = neg_rows.len();
    let art_start = 2 * n + m;
    let ncols = art_start + n_art;
    let width = ncols + 1;

    let mut tab = Matrix::zeros(m, width);
    let mut basis = vec![0usize; m];
    let mut art_of_row = vec![usize::MAX; m];
    for (k, &i) in neg_rows.iter().enumerate() {
        art_of_row[i] = art_start + k;
    }
    for i in 0..m {
        let sign = if b[i] < T::zero() { -T::one() } else { T::one() };
        let row = tab.row_mut(i);
        for j in 0..n {
            row[j] = sign * a[(i, j)];
            row[n + j] = -sign * a[(i, j)];
        }
        row[2 * n + i] = sign;
        row[ncols] = sign * b[i];
        if art_of_row[i] != usize::MAX {
            row[art_of_row[i]] = T::one();
            basis[i] = art_of_row[i];
        } else {
            basis[i] = 2 * n + i;
        }
    }

    let mut iterations = 0usize;

    // Phase one: minimize the sum of artificials.
    if n_art > 0 {
        let mut cost = vec![T::zero(); width];
        cost[art_start..ncols].fill(T::one());
        let mut obj = reduced_costs(&tab, &basis, &cost);
        match run_simplex(&mut tab, &mut basis, &mut obj, ncols, &mut iterations)? {
            Pivoting::Optimal => {}
            // Phase one is bounded below by zero.
            Pivoting::Unbounded => unreachable!("phase-one objective is bounded"),
        }
        let residual = -obj[ncols];
        let scale = b.iter().fold(T::one(), |m, v| m.max(v.abs()));
        if residual > T::feas_tol() * scale {
            return Ok(SolveOutcome::infeasible(iterations, residual));
        }
        // Drive zero-level artificials out of the basis.
        for i in 0..m {
            if basis[i] >= art_start {
                let entering = (0..art_start).find(|&j| tab[(i, j)].abs() > T::pivot_tol());
                if let Some(j) = entering {
                    pivot(&mut tab, &mut obj, i, j);
                    basis[i] = j;
                }
                // Otherwise the row is linearly dependent; the artificial stays
                // basic at zero and is never allowed to re-enter.
            }
        }
    }

    // Phase two.
    let mut cost = vec![T::zero(); width];
    for j in 0..n {
        cost[j] = lp.c[j];
        cost[n + j] = -lp.c[j];
    }
    let mut obj = reduced_costs(&tab, &basis, &cost);
    match run_simplex(&mut tab, &mut basis, &mut obj, art_start, &mut iterations)? {
        Pivoting::Unbounded => return Ok(SolveOutcome::unbounded(iterations)),
        Pivoting::Optimal => {}
    }

    let mut split = vec![T::zero(); ncols];
    for (i, &bv) in basis.iter().enumerate() {
        split[bv] = tab[(i, ncols)].max(T::zero());
    }
    let x: Vec<T> = (0..n).map(|j| split[j] - split[n + j]).collect();
    let objective = lp.c.iter().zip(&x).fold(T::zero(), |acc, (&c, &v)| acc + c * v);
    // Multiplier of row i equals the reduced cost of its slack column.
    let duals: Vec<T> = (0..m).map(|i| obj[2 * n + i]).collect();

    Ok(SolveOutcome {
        status: Status::Optimal,
        solution: Some(x),
        objective: Some(objective),
        iterations,
        duals: Some(duals),
        phase_one_residual: None,
    })
}

enum Pivoting {
    Optimal,
    Unbounded,
}

fn reduced_costs<T: Real>(tab: &Matrix<T>, basis: &[usize], cost: &[T]) -> Vec<T> {
    let width = tab.cols();
    let mut obj = cost.to_vec();
    for (i, &bv) in basis.iter().enumerate() {
        let cb = cost[bv];
        if cb == T::zero() {
            continue;
        }
        for j in 0..width {
            obj[j] = obj[j] - cb * tab[(i, j)];
        }
    }
    obj
}

/// Runs Bland-rule pivots on columns `< eligible` until optimality.
fn run_simplex<T: Real>(
    tab: &mut Matrix<T>,
    basis: &mut [usize],
    obj: &mut [T],
    eligible: usize,
    iterations: &mut usize,
) -> Result<Pivoting> {
    let rhs = tab.cols() - 1;
    let m = tab.rows();
    let cost_scale = obj[..eligible]
        .iter()
        .fold(T::one(), |acc, v| acc.max(v.abs()));
    let dj_tol = T::opt_tol() * cost_scale;
    loop {
        // Bland: lowest-index column with a negative reduced cost.
        let Some(e) = (0..eligible).find(|&j| obj[j] < -dj_tol) else {
            return Ok(Pivoting::Optimal);
        };
        let mut leave: Option<(usize, T)> = None;
        for i in 0..m {
            let aie = tab[(i, e)];
            if aie > T::pivot_tol() {
                let ratio = tab[(i, rhs)].max(T::zero()) / aie;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        let tie = (ratio - lr).abs() <= T::pivot_tol() * (T::one() + lr.abs());
                        if ratio < lr && !tie || tie && basis[i] < basis[li] {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((r, _)) = leave else {
            return Ok(Pivoting::Unbounded);
        };
        pivot(tab, obj, r, e);
        basis[r] = e;
        *iterations += 1;
        if *iterations > MAX_ITERATIONS {
            return Err(Error::Stalled {
                iterations: *iterations,
            });
        }
    }
}

fn pivot<T: Real>(tab: &mut Matrix<T>, obj: &mut [T], r: usize, e: usize) {
    let width = tab.cols();
    let p = tab[(r, e)];
    for v in tab.row_mut(r) {
        *v = *v / p;
    }
    let prow: Vec<T> = tab.row(r).to_vec();
    for i in 0..tab.rows() {
        if i == r {
            continue;
        }
        let f = tab[(i, e)];
        if f == T::zero() {
            continue;
        }
        let row = tab.row_mut(i);
        for j in 0..width {
            row[j] = row[j] - f * prow[j];
        }
        row[e] = T::zero();
    }
    let f = obj[e];
    if f != T::zero() {
        for j in 0..width {
            obj[j] = obj[j] - f * prow[j];
        }
        obj[e] = T::zero();
    }
}
