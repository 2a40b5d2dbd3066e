use crate::error::{Error, Result};
use crate::linalg::{cholesky, dot, solve, Matrix};
use crate::scalar::Real;

use super::{solve_lp, LinearProgram, SolveOutcome, Status, MAX_ITERATIONS};

/// `min (u − target)ᵀ S (u − target)  s.t.  A u ≤ b`, with `S` positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticProgram<T> {
    s: Matrix<T>,
    target: Vec<T>,
    a: Matrix<T>,
    b: Vec<T>,
}

impl<T: Real> QuadraticProgram<T> {
    /// Validates shapes, symmetry and positive definiteness of `s`.
    pub fn new(s: Matrix<T>, target: Vec<T>, a: Matrix<T>, b: Vec<T>) -> Result<Self> {
        let n = target.len();
        if s.rows() != n || s.cols() != n {
            return Err(Error::Dimension(format!(
                "penalty matrix is {}x{}, target has length {n}",
                s.rows(),
                s.cols()
            )));
        }
        if a.rows() != b.len() || (a.rows() > 0 && a.cols() != n) {
            return Err(Error::Dimension("QP constraint shape mismatch".into()));
        }
        let scale = s.as_slice().iter().fold(T::one(), |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (s[(i, j)] - s[(j, i)]).abs() > T::opt_tol() * scale {
                    return Err(Error::InvalidArgument("penalty matrix is not symmetric".into()));
                }
            }
        }
        if cholesky(&s).is_none() {
            return Err(Error::InvalidArgument(
                "penalty matrix is not positive definite".into(),
            ));
        }
        let a = if a.rows() == 0 { Matrix::zeros(0, n) } else { a };
        Ok(Self { s, target, a, b })
    }

    pub fn penalty(&self) -> &Matrix<T> {
        &self.s
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }

    pub fn constraints(&self) -> (&Matrix<T>, &[T]) {
        (&self.a, &self.b)
    }

    pub fn objective(&self, u: &[T]) -> T {
        let d: Vec<T> = u.iter().zip(&self.target).map(|(&x, &t)| x - t).collect();
        dot(&d, &self.s.matvec(&d))
    }

    fn is_feasible(&self, u: &[T]) -> bool {
        self.a
            .row_iter()
            .zip(&self.b)
            .all(|(r, &bi)| dot(r, u) <= bi + T::feas_tol() * (T::one() + bi.abs()))
    }
}

/// Primal active-set method started from a phase-one LP point. Each
/// equality-constrained subproblem is solved through its dense KKT system.
pub fn solve_qp<T: Real>(qp: &QuadraticProgram<T>) -> Result<SolveOutcome<T>> {
    let n = qp.target.len();
    let m = qp.a.rows();
    let two = T::one() + T::one();

    // The unconstrained minimizer is the target itself.
    if qp.is_feasible(&qp.target) {
        return Ok(SolveOutcome {
            status: Status::Optimal,
            solution: Some(qp.target.clone()),
            objective: Some(T::zero()),
            iterations: 0,
            duals: Some(vec![T::zero(); m]),
            phase_one_residual: None,
        });
    }

    let phase_one = solve_lp(&LinearProgram::new(vec![T::zero(); n], qp.a.clone(), qp.b.clone())?)?;
    let mut iterations = phase_one.iterations;
    let mut u = match phase_one.status {
        Status::Optimal => phase_one.solution.expect("optimal LP has a solution"),
        _ => {
            return Ok(SolveOutcome::infeasible(
                iterations,
                phase_one.phase_one_residual.unwrap_or_else(T::one),
            ))
        }
    };

    let g_mat = qp.s.scale(two);
    let g_lin: Vec<T> = qp.s.matvec(&qp.target).into_iter().map(|v| -two * v).collect();
    let mut working: Vec<usize> = Vec::new();
    let u_scale = |u: &[T]| u.iter().fold(T::one(), |acc, v| acc.max(v.abs()));

    loop {
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            return Err(Error::Stalled { iterations });
        }
        let grad: Vec<T> = g_mat
            .matvec(&u)
            .into_iter()
            .zip(&g_lin)
            .map(|(a, &b)| a + b)
            .collect();
        let k = working.len();
        let dim = n + k;
        let mut kkt = Matrix::zeros(dim, dim);
        let mut rhs = vec![T::zero(); dim];
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = g_mat[(i, j)];
            }
            rhs[i] = -grad[i];
        }
        for (w, &ci) in working.iter().enumerate() {
            for j in 0..n {
                kkt[(n + w, j)] = qp.a[(ci, j)];
                kkt[(j, n + w)] = qp.a[(ci, j)];
            }
        }
        let Some(sol) = solve(&kkt, &rhs) else {
            // Numerically dependent working set: release the newest member.
            working.pop();
            continue;
        };
        let p = &sol[..n];
        let lambda = &sol[n..];
        let p_norm = p.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));

        if p_norm <= T::opt_tol() * u_scale(&u) {
            // Stationary on the working set; check multiplier signs.
            let worst = lambda
                .iter()
                .enumerate()
                .filter(|(_, &l)| l < -T::opt_tol())
                .fold(None::<(usize, T)>, |best, (w, &l)| match best {
                    Some((_, bl)) if bl <= l => best,
                    _ => Some((w, l)),
                });
            match worst {
                None => {
                    let mut duals = vec![T::zero(); m];
                    for (w, &ci) in working.iter().enumerate() {
                        duals[ci] = lambda[w].max(T::zero());
                    }
                    let objective = qp.objective(&u);
                    return Ok(SolveOutcome {
                        status: Status::Optimal,
                        solution: Some(u),
                        objective: Some(objective),
                        iterations,
                        duals: Some(duals),
                        phase_one_residual: None,
                    });
                }
                Some((w, _)) => {
                    working.remove(w);
                }
            }
            continue;
        }

        // Step toward the subproblem minimizer, stopping at the first blocking row.
        let mut alpha = T::one();
        let mut blocking = None;
        for ci in 0..m {
            if working.contains(&ci) {
                continue;
            }
            let ap = dot(qp.a.row(ci), p);
            if ap > T::pivot_tol() {
                let slack = (qp.b[ci] - dot(qp.a.row(ci), &u)).max(T::zero());
                let step = slack / ap;
                if step < alpha {
                    alpha = step;
                    blocking = Some(ci);
                }
            }
        }
        for (ui, &pi) in u.iter_mut().zip(p) {
            *ui = *ui + alpha * pi;
        }
        if let Some(ci) = blocking {
            working.push(ci);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp1(target: f64, rows: &[Vec<f64>], b: Vec<f64>) -> QuadraticProgram<f64> {
        QuadraticProgram::new(
            Matrix::identity(1),
            vec![target],
            Matrix::from_rows(rows, 1).unwrap(),
            b,
        )
        .unwrap()
    }

    #[test]
    fn clamps_to_upper_bound() {
        let out = solve_qp(&qp1(2.0, &[vec![1.0], vec![-1.0]], vec![1.0, 0.0])).unwrap();
        assert_eq!(out.status, Status::Optimal);
        assert!((out.solution.unwrap()[0] - 1.0).abs() < 1e-12);
        assert!((out.objective.unwrap() - 1.0).abs() < 1e-12);
        let duals = out.duals.unwrap();
        assert!((duals[0] - 2.0).abs() < 1e-10);
        assert_eq!(duals[1], 0.0);
    }

    #[test]
    fn feasible_target_is_returned_unchanged() {
        let out = solve_qp(&qp1(0.5, &[vec![1.0], vec![-1.0]], vec![1.0, 0.0])).unwrap();
        assert_eq!(out.solution.unwrap(), vec![0.5]);
        assert_eq!(out.objective.unwrap(), 0.0);
    }

    #[test]
    fn infeasible_constraints() {
        let out = solve_qp(&qp1(0.0, &[vec![1.0], vec![-1.0]], vec![0.0, -1.0])).unwrap();
        assert_eq!(out.status, Status::Infeasible);
        assert!(out.phase_one_residual.unwrap() > 1e-9);
    }

    #[test]
    fn rejects_indefinite_penalty() {
        let s = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]], 2).unwrap();
        assert!(QuadraticProgram::new(s, vec![0.0, 0.0], Matrix::zeros(0, 2), vec![]).is_err());
        let asym = Matrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]], 2).unwrap();
        assert!(QuadraticProgram::new(asym, vec![0.0, 0.0], Matrix::zeros(0, 2), vec![]).is_err());
    }

    #[test]
    fn weighted_projection_onto_halfplane() {
        // min (u1-1)² + 4(u2-1)² s.t. u1 + u2 ≤ 0
        let s = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 4.0]], 2).unwrap();
        let a = Matrix::from_rows(&[vec![1.0, 1.0]], 2).unwrap();
        let qp = QuadraticProgram::new(s, vec![1.0, 1.0], a, vec![0.0]).unwrap();
        let out = solve_qp(&qp).unwrap();
        let u: Vec<f64> = out.solution.unwrap();
        // Stationarity: 2(u1-1) + λ = 0, 8(u2-1) + λ = 0, u1 + u2 = 0.
        assert!((u[0] + u[1]).abs() < 1e-12);
        assert!((2.0 * (u[0] - 1.0) - 8.0 * (u[1] - 1.0)).abs() < 1e-10);
    }
}
