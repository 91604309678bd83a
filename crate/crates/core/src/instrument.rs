//! Lightweight instrumentation: operation tallies for the linear-time kernels
//! and a per-thread counter of dense (O(N²)) evaluations.

use std::cell::Cell;

/// Receives one event per arithmetic step of a CoLT recursion.
pub trait Tally {
    /// One `ratio * running + term` update.
    fn ratio_step(&mut self);
    /// One diagonal (or superdiagonal) multiply.
    fn diag_mul(&mut self);
    /// One elementwise vector operation outside the two kinds above.
    fn vec_op(&mut self, n: usize);
}

impl Tally for () {
    #[inline(always)]
    fn ratio_step(&mut self) {}
    #[inline(always)]
    fn diag_mul(&mut self) {}
    #[inline(always)]
    fn vec_op(&mut self, _n: usize) {}
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    pub ratio_steps: u64,
    pub diag_muls: u64,
    pub vec_ops: u64,
}

impl OpCount {
    pub fn total(&self) -> u64 {
        self.ratio_steps + self.diag_muls + self.vec_ops
    }
}

impl Tally for OpCount {
    #[inline]
    fn ratio_step(&mut self) {
        self.ratio_steps += 1;
    }
    #[inline]
    fn diag_mul(&mut self) {
        self.diag_muls += 1;
    }
    #[inline]
    fn vec_op(&mut self, n: usize) {
        self.vec_ops += n as u64;
    }
}

thread_local! {
    static DENSE_EVALS: Cell<u64> = const { Cell::new(0) };
}

pub(crate) fn note_dense_eval() {
    DENSE_EVALS.with(|c| c.set(c.get() + 1));
}

/// Number of dense evaluations (reconstructions, dense matvecs, dense
/// solvers) performed so far on the current thread.
pub fn dense_evals() -> u64 {
    DENSE_EVALS.with(|c| c.get())
}
