//! Linear-time Wasserstein-1 solvers on uniform grids.
//!
//! The kernel `e^{-C/δ}` of an ℓ1 ground cost on a uniform grid, and every
//! iterate of the proximal-point (IPOT) scheme built on it, is the sum of a
//! lower and an upper *collinear triangular* (CoLT) matrix. Such matrices are
//! stored as four vectors and multiplied against vectors in O(N), which turns
//! each IPOT iteration into O(N) work ([`solvers::fs2_1d`], [`solvers::fs2_2d`]).
//!
//! Core math is generic over the scalar type ([`Scalar`]); the aliases below
//! fix it to `f64`, which is what the solvers, oracles and CLI use.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod block;
pub mod colt;
pub mod data;
pub mod dense;
pub mod error;
pub mod instrument;
pub mod oracles;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type LColt = colt::LColtRepr<f64>;
pub type UColt = colt::UColtRepr<f64>;
pub type Colt = colt::ColtRepr<f64>;
pub type ColtF32 = colt::ColtRepr<f32>;
pub type BlockColt = block::BlockColtRepr<f64>;
pub type BlockColtF32 = block::BlockColtRepr<f32>;
pub type Dense = dense::DenseMatrix<f64>;
pub type Problem1D = solvers::Problem1D<f64>;
pub type Problem2D = solvers::Problem2D<f64>;
pub type Plan = solvers::TransportPlan<f64>;
pub type Trace = solvers::ConvergenceTrace<f64>;
