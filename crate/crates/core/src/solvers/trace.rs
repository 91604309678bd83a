use std::time::{Duration, Instant};

use crate::Scalar;

/// One trace row, recorded after each outer step (or each block of `L`
/// scaling sweeps for the plain Sinkhorn solvers).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<T> {
    /// 1-based outer step.
    pub outer: usize,
    /// Total scaling sweeps performed so far (`outer × L`).
    pub iterations: usize,
    pub w1: T,
    /// `‖Γ1 − u‖₁`.
    pub row_residual: T,
    /// `‖Γᵀ1 − v‖₁`.
    pub col_residual: T,
    /// Cumulative wall time since the solver started.
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace<T> {
    pub records: Vec<TraceRecord<T>>,
}

impl<T: Scalar> ConvergenceTrace<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord<T>> {
        self.records.last()
    }

    pub fn w1_series(&self) -> Vec<T> {
        self.records.iter().map(|r| r.w1).collect()
    }
}

pub(crate) struct Recorder<T> {
    start: Instant,
    trace: ConvergenceTrace<T>,
}

impl<T: Scalar> Recorder<T> {
    pub fn start() -> Self {
        Self { start: Instant::now(), trace: ConvergenceTrace::default() }
    }

    pub fn push(&mut self, outer: usize, iterations: usize, w1: T, row_residual: T, col_residual: T) {
        let elapsed = self.start.elapsed();
        self.trace.records.push(TraceRecord { outer, iterations, w1, row_residual, col_residual, elapsed });
    }

    pub fn finish(self) -> ConvergenceTrace<T> {
        self.trace
    }
}

pub(crate) fn l1_residual<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + (x - y).abs())
}
