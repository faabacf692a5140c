//! Dense log-barrier interior-point solver for small convex programs with
//! linear, second-order-cone, Hermitian LMI and smooth convex constraints.
//!
//! Problems are described by [`SdpInstance`] and handed to any [`ConicSolver`].
//! [`BarrierSolver`] is the bundled backend.

mod barrier;
mod instance;
mod linalg;

pub use barrier::{BarrierSettings, BarrierSolver};
pub use instance::{Constraint, HermitianBlock, SdpInstance, SmoothConvex, VarBlock};
pub use linalg::{cholesky_inverse, hermitian_cholesky};

/// Complex scalar used for LMI data.
pub type C64 = num_complex::Complex<f64>;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("objective unbounded below")]
    Unbounded,
}

/// A primal solution.
#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Barrier duality-gap bound at termination.
    pub gap: f64,
    /// Total Newton steps over both phases.
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Solved(Solution),
    /// No strictly feasible point. `bound` is a lower bound on the smallest
    /// uniform constraint relaxation that admits one.
    Infeasible {
        bound: f64,
    },
}

impl Outcome {
    pub fn solution(&self) -> Option<&Solution> {
        match self {
            Outcome::Solved(s) => Some(s),
            Outcome::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Outcome::Solved(_))
    }
}

/// Backend contract: minimize the instance objective or certify infeasibility.
pub trait ConicSolver {
    /// Solve, optionally starting from a hint (it need not be feasible).
    fn solve_from(&self, inst: &SdpInstance, start: Option<&[f64]>)
        -> Result<Outcome, SolverError>;

    fn solve(&self, inst: &SdpInstance) -> Result<Outcome, SolverError> {
        self.solve_from(inst, None)
    }
}
