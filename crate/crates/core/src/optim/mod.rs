//! Dense LP and strictly convex QP solvers.
//!
//! Both are sized for the problems this toolkit generates: tens of
//! constraints and a handful of variables. Pivoting is deterministic, so two
//! calls with identical inputs return bit-identical outcomes.

mod lp;
mod qp;

pub use lp::{solve_lp, LinearProgram};
pub use qp::{solve_qp, QuadraticProgram};

/// Iteration cap shared by both solvers.
pub const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome<T> {
    pub status: Status,
    /// Present iff `status == Optimal`.
    pub solution: Option<Vec<T>>,
    pub objective: Option<T>,
    pub iterations: usize,
    /// Lagrange multipliers of the inequality rows (in the order reported by
    /// the problem's `constraint_rows`), present iff `Optimal`.
    pub duals: Option<Vec<T>>,
    /// Phase-one objective at termination; strictly positive when
    /// `status == Infeasible`.
    pub phase_one_residual: Option<T>,
}

impl<T> SolveOutcome<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub(crate) fn infeasible(iterations: usize, residual: T) -> Self {
        Self {
            status: Status::Infeasible,
            solution: None,
            objective: None,
            iterations,
            duals: None,
            phase_one_residual: Some(residual),
        }
    }

    pub(crate) fn unbounded(iterations: usize) -> Self {
        Self {
            status: Status::Unbounded,
            solution: None,
            objective: None,
            iterations,
            duals: None,
            phase_one_residual: None,
        }
    }
}
