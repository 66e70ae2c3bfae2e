//! Per-step inverse tracking: a box-constrained quadratic program over muscle
//! excitations, reduced to a linear complementarity problem and solved by
//! principal pivoting.

mod lcp;
mod qp;
mod track;


use thiserror::Error;

use crate::dynamics::DynamicsError;

pub use lcp::{lcp_ppm, LcpProblem, LcpSolution, PpmOptions};
pub use qp::{assemble_qp, qp_to_lcp, BoxedQP, CostWeights, Recovery};
pub use track::{align_target, solve_fdat_step, track_trajectory, ActivationSolution, FdatSolver, Tracking};


#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdatError {
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),
    #[error("quadratic term is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid box: lower bound above upper bound at {0}")]
    InvalidBounds(usize),
    #[error("pivot limit {limit} reached")]
    PivotLimit { limit: usize, best: Vec<f64> },
    #[error("degenerate pivot after {pivots} pivots")]
    Degenerate { pivots: usize },
    #[error("complementarity problem has no solution (unblocked driving variable)")]
    Infeasible,
    #[error("solution certificate failed: residual {residual:e}")]
    Certificate { residual: f64 },
    #[error("nSteps must be at least 1")]
    NoSteps,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
