//! Optimal transport solvers: dense baselines and the linear-time
//! representation-based ones.

mod cost;
mod fs1;
mod fs2;
mod ipot;
mod problem;
mod trace;

pub use cost::{row_cost_sums, w1_block, w1_colt, w1_dense};
pub use fs1::{fs1_1d, fs1_2d, Fs1Output};
pub use fs2::{fs2_1d, fs2_2d, Fs2Output, Fs2Output2D, Fs2Solver, Fs2Solver2D, Fs2State, Fs2State2D};
pub use ipot::{ipot_dense, sinkhorn_dense, IpotDense};
pub use problem::{
    proximal_schedule, DeltaSchedule, IterConfig, OtProblem, Problem1D, Problem2D, DEFAULT_INNER, DEFAULT_OUTER,
    DEFAULT_TOL,
};
pub use trace::{ConvergenceTrace, TraceRecord};

use crate::block::BlockColtRepr;
use crate::colt::ColtRepr;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::Scalar;

/// The 1D kernel `K_ij = λ^{|i−j|}` as a CoLT representation.
pub fn kernel_1d<T: Scalar>(n: usize, lambda: T) -> Result<ColtRepr<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("kernel needs n >= 2, got {n}")));
    }
    if !(lambda > T::zero() && lambda < T::one()) {
        return Err(Error::InvalidArgument(format!("kernel ratio must lie in (0, 1), got {lambda}")));
    }
    ColtRepr::from_parts(vec![T::one(); n], vec![lambda; n - 1], vec![lambda; n - 1], vec![lambda; n - 2])
}

/// A transport plan in whichever form the solver produced it.
#[derive(Debug, Clone, PartialEq)]
pub enum TransportPlan<T> {
    Dense(DenseMatrix<T>),
    Colt(ColtRepr<T>),
    Block(BlockColtRepr<T>),
}

impl<T: Scalar> TransportPlan<T> {
    pub fn len(&self) -> usize {
        match self {
            TransportPlan::Dense(d) => d.rows(),
            TransportPlan::Colt(c) => c.n(),
            TransportPlan::Block(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Densified plan; refused above [`crate::dense::DENSE_LIMIT`] for the
    /// implicit forms.
    pub fn to_dense(&self) -> Result<DenseMatrix<T>> {
        match self {
            TransportPlan::Dense(d) => Ok(d.clone()),
            TransportPlan::Colt(c) => c.to_dense(),
            TransportPlan::Block(b) => b.to_dense(),
        }
    }

    pub fn row_sums(&self) -> Vec<T> {
        match self {
            TransportPlan::Dense(d) => d.row_sums(),
            TransportPlan::Colt(c) => c.row_sums(),
            TransportPlan::Block(b) => b.row_sums(),
        }
    }

    pub fn col_sums(&self) -> Result<Vec<T>> {
        match self {
            TransportPlan::Dense(d) => Ok(d.col_sums()),
            TransportPlan::Colt(c) => c.matvec_transpose(&vec![T::one(); c.n()]),
            TransportPlan::Block(b) => b.matvec_transpose(&vec![T::one(); b.len()]),
        }
    }
}

/// Result of a dense solver.
#[derive(Debug, Clone)]
pub struct DenseOutput<T> {
    pub w1: T,
    pub plan: DenseMatrix<T>,
    pub trace: ConvergenceTrace<T>,
}
