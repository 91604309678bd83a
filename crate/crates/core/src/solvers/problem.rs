use crate::dense::DenseMatrix;
use crate::error::{check_len, Error, Result};
use crate::oracles::{dense_cost_matrix, Grid};
use crate::Scalar;

/// Proximal regularization `δ⁽ᵗ⁾` as a function of the 1-based outer index.
#[derive(Debug, Clone, Copy)]
pub enum DeltaSchedule<T> {
    Constant(T),
    /// `δ / t`.
    Harmonic(T),
    Custom(fn(usize) -> T),
}

impl<T: Scalar> DeltaSchedule<T> {
    pub fn delta(&self, t: usize) -> T {
        debug_assert!(t >= 1);
        match *self {
            DeltaSchedule::Constant(d) => d,
            DeltaSchedule::Harmonic(d) => d / T::lit(t.max(1) as f64),
            DeltaSchedule::Custom(f) => f(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, DeltaSchedule::Constant(_))
    }
}

impl<T: Scalar> Default for DeltaSchedule<T> {
    fn default() -> Self {
        DeltaSchedule::Constant(T::one())
    }
}

/// Default proximal schedule: `δ⁽ᵗ⁾ = 1` for every outer step.
pub fn proximal_schedule<T: Scalar>(t: usize) -> T {
    DeltaSchedule::<T>::default().delta(t)
}

pub const DEFAULT_INNER: usize = 20;
pub const DEFAULT_OUTER: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-9;

/// Iteration budget shared by all iterative solvers.
#[derive(Debug, Clone, Copy)]
pub struct IterConfig<T> {
    pub schedule: DeltaSchedule<T>,
    /// Inner scaling sweeps per outer step (`L`).
    pub inner: usize,
    /// Outer steps (`itr_max`).
    pub outer: usize,
    /// Stop early once `‖Γᵀ1 − v‖₁ <= tol`, checked once per outer step.
    pub tol: Option<T>,
}

impl<T: Scalar> Default for IterConfig<T> {
    fn default() -> Self {
        Self { schedule: DeltaSchedule::default(), inner: DEFAULT_INNER, outer: DEFAULT_OUTER, tol: None }
    }
}

impl<T: Scalar> IterConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.inner == 0 || self.outer == 0 {
            return Err(Error::InvalidArgument("inner and outer iteration counts must be >= 1".into()));
        }
        let d = self.schedule.delta(1);
        if !(d > T::zero() && d.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {d}")));
        }
        Ok(())
    }
}

fn check_marginal<T: Scalar>(x: &[T], what: &str) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} is empty")));
    }
    if let Some(i) = x.iter().position(|v| !(v.is_finite() && *v >= T::zero())) {
        return Err(Error::InvalidArgument(format!("{what}[{i}] is negative or non-finite")));
    }
    let sum: T = x.iter().copied().sum();
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(4.0 * x.len() as f64));
    if (sum - T::one()).abs() > tol {
        return Err(Error::InvalidArgument(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

pub(crate) fn require_positive<T: Scalar>(x: &[T], what: &'static str) -> Result<()> {
    match x.iter().position(|v| *v <= T::zero()) {
        Some(index) => Err(Error::ZeroEntry { what, index }),
        None => Ok(()),
    }
}

/// Transport between two probability vectors on a uniform 1D grid.
#[derive(Debug, Clone)]
pub struct Problem1D<T> {
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub h: T,
    pub config: IterConfig<T>,
}

impl<T: Scalar> Problem1D<T> {
    pub fn new(u: Vec<T>, v: Vec<T>, h: T) -> Result<Self> {
        let p = Self { u, v, h, config: IterConfig::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_config(mut self, config: IterConfig<T>) -> Result<Self> {
        config.validate()?;
        self.config = config;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: T) -> Self {
        self.config.schedule = DeltaSchedule::Constant(delta);
        self
    }

    pub fn with_iterations(mut self, inner: usize, outer: usize) -> Self {
        self.config.inner = inner;
        self.config.outer = outer;
        self
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_marginal(&self.u, "u")?;
        check_marginal(&self.v, "v")?;
        check_len(self.u.len(), self.v.len())?;
        if self.u.len() < 2 {
            return Err(Error::InvalidArgument("need at least 2 grid points".into()));
        }
        if !(self.h > T::zero() && self.h.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {}", self.h)));
        }
        self.config.validate()
    }

    pub fn grid(&self) -> Grid<T> {
        Grid::OneD { n: self.n(), h: self.h }
    }

    pub fn cost_matrix(&self) -> Result<DenseMatrix<T>> {
        dense_cost_matrix(&self.grid())
    }
}

/// Transport on a uniform `n × m` grid; marginals are ordered with the
/// `n`-direction (spacing `h1`) varying fastest.
#[derive(Debug, Clone)]
pub struct Problem2D<T> {
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub n: usize,
    pub m: usize,
    pub h1: T,
    pub h2: T,
    pub config: IterConfig<T>,
}

impl<T: Scalar> Problem2D<T> {
    pub fn new(u: Vec<T>, v: Vec<T>, n: usize, m: usize, h1: T, h2: T) -> Result<Self> {
        let p = Self { u, v, n, m, h1, h2, config: IterConfig::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_config(mut self, config: IterConfig<T>) -> Result<Self> {
        config.validate()?;
        self.config = config;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: T) -> Self {
        self.config.schedule = DeltaSchedule::Constant(delta);
        self
    }

    pub fn with_iterations(mut self, inner: usize, outer: usize) -> Self {
        self.config.inner = inner;
        self.config.outer = outer;
        self
    }

    pub fn len(&self) -> usize {
        self.n * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        check_marginal(&self.u, "u")?;
        check_marginal(&self.v, "v")?;
        check_len(self.n * self.m, self.u.len())?;
        check_len(self.n * self.m, self.v.len())?;
        if self.n < 2 {
            return Err(Error::InvalidArgument("inner grid size must be >= 2".into()));
        }
        for h in [self.h1, self.h2] {
            if !(h > T::zero() && h.is_finite()) {
                return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {h}")));
            }
        }
        self.config.validate()
    }

    pub fn grid(&self) -> Grid<T> {
        Grid::TwoD { n: self.n, m: self.m, h1: self.h1, h2: self.h2 }
    }

    pub fn cost_matrix(&self) -> Result<DenseMatrix<T>> {
        dense_cost_matrix(&self.grid())
    }
}

/// Anything the dense solvers can run on.
pub trait OtProblem<T: Scalar> {
    fn source(&self) -> &[T];
    fn target(&self) -> &[T];
    fn config(&self) -> &IterConfig<T>;
    fn grid(&self) -> Grid<T>;
}

impl<T: Scalar> OtProblem<T> for Problem1D<T> {
    fn source(&self) -> &[T] {
        &self.u
    }
    fn target(&self) -> &[T] {
        &self.v
    }
    fn config(&self) -> &IterConfig<T> {
        &self.config
    }
    fn grid(&self) -> Grid<T> {
        Problem1D::grid(self)
    }
}

impl<T: Scalar> OtProblem<T> for Problem2D<T> {
    fn source(&self) -> &[T] {
        &self.u
    }
    fn target(&self) -> &[T] {
        &self.v
    }
    fn config(&self) -> &IterConfig<T> {
        &self.config
    }
    fn grid(&self) -> Grid<T> {
        Problem2D::grid(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        assert_eq!(proximal_schedule::<f64>(1), 1.0);
        assert_eq!(proximal_schedule::<f64>(100), 1.0);
        let h = DeltaSchedule::Harmonic(1.0f64);
        let vals: Vec<f64> = (1..10).map(|t| h.delta(t)).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        fn custom(t: usize) -> f64 {
            0.5 + 1.0 / t as f64
        }
        assert_eq!(DeltaSchedule::Custom(custom).delta(2), 1.0);
    }

    #[test]
    fn validation() {
        assert!(Problem1D::new(vec![0.5, 0.5], vec![0.5, 0.5], 1.0).is_ok());
        assert!(Problem1D::new(vec![0.5, 0.6], vec![0.5, 0.5], 1.0).is_err());
        assert!(Problem1D::new(vec![1.5, -0.5], vec![0.5, 0.5], 1.0).is_err());
        assert!(Problem1D::new(vec![0.5, 0.5], vec![0.5, 0.5], 0.0).is_err());
        assert!(Problem1D::new(vec![1.0], vec![1.0], 1.0).is_err());
        let p = Problem1D::new(vec![0.5, 0.5], vec![0.5, 0.5], 1.0).unwrap();
        assert!(p.clone().with_config(IterConfig { inner: 0, ..Default::default() }).is_err());
        assert!(Problem2D::new(vec![0.25; 4], vec![0.25; 4], 2, 2, 1.0, 1.0).is_ok());
        assert!(Problem2D::new(vec![0.25; 4], vec![0.25; 4], 2, 3, 1.0, 1.0).is_err());
    }
}
