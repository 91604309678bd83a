//! Linear-time proximal-point solvers (FS-2).
//!
//! FS-2 runs the dense IPOT iteration on representations. `Q = K ⊙ Γ` is
//! held as a [`ColtRepr`] and so is its transpose; the outer update
//! `Q ← K ⊙ (diag(φ) Q diag(ψ))` touches only the coefficient vectors:
//!
//! ```text
//! αᴸ_i ← λ αᴸ_i φ_{i+1}/φ_i     βᴸ_i ← λ βᴸ_i ψ_{i+1}/ψ_i
//! αᵁ_i ← λ αᵁ_i φ_i/φ_{i+1}     βᵁ_i ← λ βᵁ_i ψ_i/ψ_{i+1}
//! γ'_i ← λ γ'_i φ_i ψ_{i+1}     γ''_i ← λ γ''_i φ_{i+1} ψ_i
//! γ_i  ← γ_i φ_i ψ_i
//! ```
//!
//! `γ''` is the subdiagonal of `Q`, i.e. the superdiagonal of `Qᵀ`; it
//! coincides with `γ'` only while `Q` is symmetric.

use crate::block::{block_matvec_kernel, BlockColtRepr, Side};
use crate::colt::{cmv_kernel, scale_hadamard_kernel_in_place, ColtRepr};
use crate::error::{Error, Result};
use crate::instrument::Tally;
use crate::solvers::cost::{w1_block, w1_colt};
use crate::solvers::ipot::{check_positive_marginals, divide_checked};
use crate::solvers::problem::{DeltaSchedule, Problem1D, Problem2D};
use crate::solvers::trace::{l1_residual, ConvergenceTrace, Recorder};
use crate::solvers::kernel_1d;
use crate::Scalar;

fn lambda_for<T: Scalar>(h: T, schedule: &DeltaSchedule<T>, t: usize) -> Result<T> {
    let lambda = (-h / schedule.delta(t)).exp();
    if !(lambda > T::zero() && lambda < T::one()) {
        return Err(Error::Numerical(format!("kernel ratio e^(-h/δ) = {lambda} outside (0, 1) at step {t}")));
    }
    Ok(lambda)
}

fn mul_into<T: Scalar>(a: &[T], b: &[T], out: &mut [T]) {
    out.iter_mut().zip(a.iter().zip(b)).for_each(|(o, (&x, &y))| *o = x * y);
}

/// Implicit state of the 1D iteration: scalings and the representations of
/// `Q` and `Qᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fs2State<T> {
    pub(crate) phi: Vec<T>,
    pub(crate) psi: Vec<T>,
    pub(crate) q: ColtRepr<T>,
    pub(crate) qt: ColtRepr<T>,
    pub(crate) lambda: T,
}

impl<T: Scalar> Fs2State<T> {
    pub fn phi(&self) -> &[T] {
        &self.phi
    }

    pub fn psi(&self) -> &[T] {
        &self.psi
    }

    /// `Q`: diagonal `γ`, ratios `αᴸ`, superdiagonal `γ'`, ratios `αᵁ`.
    pub fn q_repr(&self) -> &ColtRepr<T> {
        &self.q
    }

    /// `Qᵀ`: diagonal `γ`, ratios `βᴸ`, superdiagonal `γ''`, ratios `βᵁ`.
    pub fn qt_repr(&self) -> &ColtRepr<T> {
        &self.qt
    }

    /// Kernel ratio used for the most recent update of `Q`.
    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn is_positive(&self) -> bool {
        let pos = |v: &[T]| v.iter().all(|x| *x > T::zero() && x.is_finite());
        pos(&self.phi)
            && pos(&self.psi)
            && [&self.q, &self.qt].iter().all(|m| {
                pos(m.gamma()) && pos(m.lower_ratios()) && pos(m.gamma_sup()) && pos(m.upper_ratios())
            })
    }
}

/// Stepwise 1D FS-2 solver.
#[derive(Debug, Clone)]
pub struct Fs2Solver<T> {
    u: Vec<T>,
    v: Vec<T>,
    h: T,
    schedule: DeltaSchedule<T>,
    inner: usize,
    state: Fs2State<T>,
    plan: Option<ColtRepr<T>>,
    residuals: (T, T),
    buf: Vec<T>,
    outer_done: usize,
}

impl<T: Scalar> Fs2Solver<T> {
    pub fn new(p: &Problem1D<T>) -> Result<Self> {
        p.validate()?;
        check_positive_marginals(&p.u, &p.v)?;
        let n = p.n();
        let lambda = lambda_for(p.h, &p.config.schedule, 1)?;
        let q = kernel_1d(n, lambda)?;
        let init = T::one() / T::lit(n as f64);
        Ok(Self {
            u: p.u.clone(),
            v: p.v.clone(),
            h: p.h,
            schedule: p.config.schedule,
            inner: p.config.inner,
            state: Fs2State { phi: vec![init; n], psi: vec![init; n], qt: q.clone(), q, lambda },
            plan: None,
            residuals: (T::zero(), T::zero()),
            buf: vec![T::zero(); n],
            outer_done: 0,
        })
    }

    /// One scaling sweep `ψ ← v ⊘ Qᵀφ`, `φ ← u ⊘ Qψ`.
    pub fn inner_sweep(&mut self, tally: &mut impl Tally) -> Result<()> {
        let Fs2State { phi, psi, q, qt, .. } = &mut self.state;
        cmv_kernel(qt.gamma(), qt.lower_ratios(), qt.gamma_sup(), qt.upper_ratios(), phi, &mut self.buf, tally);
        divide_checked(&self.v, &self.buf, psi, "column sum")?;
        cmv_kernel(q.gamma(), q.lower_ratios(), q.gamma_sup(), q.upper_ratios(), psi, &mut self.buf, tally);
        divide_checked(&self.u, &self.buf, phi, "row sum")?;
        tally.vec_op(2 * self.u.len());
        Ok(())
    }

    pub fn outer_step(&mut self) -> Result<()> {
        self.outer_step_tally(&mut ())
    }

    /// `L` sweeps, then `Γ ← diag(φ) Q diag(ψ)` and `Q ← K ⊙ Γ`, all O(N).
    pub fn outer_step_tally(&mut self, tally: &mut impl Tally) -> Result<()> {
        for _ in 0..self.inner {
            self.inner_sweep(tally)?;
        }
        let n = self.u.len();
        let st = &mut self.state;

        // residuals of Γ = diag(φ) Q diag(ψ) before Q moves on
        let mut rows = vec![T::zero(); n];
        cmv_kernel(st.q.gamma(), st.q.lower_ratios(), st.q.gamma_sup(), st.q.upper_ratios(), &st.psi, &mut rows, tally);
        let rows_prod = rows.clone();
        mul_into(&st.phi, &rows_prod, &mut rows);
        let mut cols = vec![T::zero(); n];
        cmv_kernel(st.qt.gamma(), st.qt.lower_ratios(), st.qt.gamma_sup(), st.qt.upper_ratios(), &st.phi, &mut cols, tally);
        let cols_prod = cols.clone();
        mul_into(&st.psi, &cols_prod, &mut cols);
        self.residuals = (l1_residual(&rows, &self.u), l1_residual(&cols, &self.v));
        self.plan = Some(st.q.scale(&st.phi, &st.psi)?);

        let lambda = lambda_for(self.h, &self.schedule, self.outer_done + 2)?;
        scale_hadamard_kernel_in_place(&mut st.q, &st.phi, &st.psi, lambda);
        scale_hadamard_kernel_in_place(&mut st.qt, &st.psi, &st.phi, lambda);
        st.lambda = lambda;
        tally.vec_op(12 * n);
        if !(st.q.is_finite() && st.qt.is_finite()) {
            return Err(Error::Numerical(format!("non-finite coefficient after outer step {}", self.outer_done + 1)));
        }
        self.outer_done += 1;
        Ok(())
    }

    pub fn state(&self) -> &Fs2State<T> {
        &self.state
    }

    pub fn into_state(self) -> Fs2State<T> {
        self.state
    }

    /// `Γ` after the latest outer step, in `𝒞ᴺ`.
    pub fn plan(&self) -> Option<&ColtRepr<T>> {
        self.plan.as_ref()
    }

    pub fn w1(&self) -> Option<T> {
        self.plan.as_ref().map(|p| w1_colt(p, self.h))
    }

    /// `(‖Γ1 − u‖₁, ‖Γᵀ1 − v‖₁)` after the latest outer step.
    pub fn residuals(&self) -> (T, T) {
        self.residuals
    }

    pub fn outer_done(&self) -> usize {
        self.outer_done
    }
}

#[derive(Debug, Clone)]
pub struct Fs2Output<T> {
    pub w1: T,
    pub state: Fs2State<T>,
    pub plan: ColtRepr<T>,
    pub trace: ConvergenceTrace<T>,
}

/// 1D FS-2 with the problem's iteration budget.
pub fn fs2_1d<T: Scalar>(p: &Problem1D<T>) -> Result<Fs2Output<T>> {
    let mut solver = Fs2Solver::new(p)?;
    let cfg = p.config;
    let mut rec = Recorder::start();
    for t in 1..=cfg.outer {
        solver.outer_step()?;
        let (rr, cr) = solver.residuals();
        rec.push(t, t * cfg.inner, solver.w1().expect("plan after step"), rr, cr);
        if cfg.tol.is_some_and(|tol| cr <= tol) {
            break;
        }
    }
    let plan = solver.plan.take().expect("at least one outer step");
    Ok(Fs2Output { w1: w1_colt(&plan, p.h), state: solver.state, plan, trace: rec.finish() })
}

// ---------------------------------------------------------------------------

/// Implicit state of the 2D iteration: per-block representations of `Q`
/// and `Qᵀ` plus the block ratio vectors of both.
#[derive(Debug, Clone, PartialEq)]
pub struct Fs2State2D<T> {
    pub(crate) n: usize,
    pub(crate) phi: Vec<T>,
    pub(crate) psi: Vec<T>,
    pub(crate) q_diag: Vec<ColtRepr<T>>,
    pub(crate) qt_diag: Vec<ColtRepr<T>>,
    pub(crate) q_lower: Vec<Vec<T>>,
    pub(crate) q_upper: Vec<Vec<T>>,
    pub(crate) qt_lower: Vec<Vec<T>>,
    pub(crate) qt_upper: Vec<Vec<T>>,
    pub(crate) lambda1: T,
    pub(crate) lambda2: T,
}

impl<T: Scalar> Fs2State2D<T> {
    pub fn phi(&self) -> &[T] {
        &self.phi
    }

    pub fn psi(&self) -> &[T] {
        &self.psi
    }

    pub fn q_block(&self) -> BlockColtRepr<T> {
        BlockColtRepr::new_unchecked(self.q_diag.clone(), self.q_lower.clone(), self.q_upper.clone())
    }

    pub fn qt_block(&self) -> BlockColtRepr<T> {
        BlockColtRepr::new_unchecked(self.qt_diag.clone(), self.qt_lower.clone(), self.qt_upper.clone())
    }

    pub fn lambdas(&self) -> (T, T) {
        (self.lambda1, self.lambda2)
    }

    fn apply_q(&self, x: &[T], scratch: &mut [T], out: &mut [T], tally: &mut impl Tally) {
        block_matvec_kernel(self.n, &self.q_diag, &self.q_lower, &self.q_upper, x, scratch, out, tally);
    }

    fn apply_qt(&self, x: &[T], scratch: &mut [T], out: &mut [T], tally: &mut impl Tally) {
        block_matvec_kernel(self.n, &self.qt_diag, &self.qt_lower, &self.qt_upper, x, scratch, out, tally);
    }
}

/// Stepwise 2D FS-2 solver on an `n × m` grid.
#[derive(Debug, Clone)]
pub struct Fs2Solver2D<T> {
    u: Vec<T>,
    v: Vec<T>,
    h1: T,
    h2: T,
    schedule: DeltaSchedule<T>,
    inner: usize,
    state: Fs2State2D<T>,
    plan: Option<BlockColtRepr<T>>,
    residuals: (T, T),
    scratch: Vec<T>,
    buf: Vec<T>,
    outer_done: usize,
}

impl<T: Scalar> Fs2Solver2D<T> {
    pub fn new(p: &Problem2D<T>) -> Result<Self> {
        p.validate()?;
        check_positive_marginals(&p.u, &p.v)?;
        let (n, m) = (p.n, p.m);
        let lambda1 = lambda_for(p.h1, &p.config.schedule, 1)?;
        let lambda2 = lambda_for(p.h2, &p.config.schedule, 1)?;
        let k0 = kernel_1d(n, lambda1)?;
        let ratios = vec![vec![lambda2; n]; m - 1];
        let init = T::one() / T::lit((n * m) as f64);
        Ok(Self {
            u: p.u.clone(),
            v: p.v.clone(),
            h1: p.h1,
            h2: p.h2,
            schedule: p.config.schedule,
            inner: p.config.inner,
            state: Fs2State2D {
                n,
                phi: vec![init; n * m],
                psi: vec![init; n * m],
                q_diag: vec![k0.clone(); m],
                qt_diag: vec![k0; m],
                q_lower: ratios.clone(),
                q_upper: ratios.clone(),
                qt_lower: ratios.clone(),
                qt_upper: ratios,
                lambda1,
                lambda2,
            },
            plan: None,
            residuals: (T::zero(), T::zero()),
            scratch: vec![T::zero(); n * m],
            buf: vec![T::zero(); n * m],
            outer_done: 0,
        })
    }

    pub fn inner_sweep(&mut self, tally: &mut impl Tally) -> Result<()> {
        self.state.apply_qt(&self.state.phi, &mut self.scratch, &mut self.buf, tally);
        divide_checked(&self.v, &self.buf, &mut self.state.psi, "column sum")?;
        self.state.apply_q(&self.state.psi, &mut self.scratch, &mut self.buf, tally);
        divide_checked(&self.u, &self.buf, &mut self.state.phi, "row sum")?;
        tally.vec_op(2 * self.u.len());
        Ok(())
    }

    pub fn outer_step(&mut self) -> Result<()> {
        self.outer_step_tally(&mut ())
    }

    pub fn outer_step_tally(&mut self, tally: &mut impl Tally) -> Result<()> {
        for _ in 0..self.inner {
            self.inner_sweep(tally)?;
        }
        let len = self.u.len();
        let mut rows = vec![T::zero(); len];
        self.state.apply_q(&self.state.psi, &mut self.scratch, &mut rows, tally);
        let rows_prod = rows.clone();
        mul_into(&self.state.phi, &rows_prod, &mut rows);
        let mut cols = vec![T::zero(); len];
        self.state.apply_qt(&self.state.phi, &mut self.scratch, &mut cols, tally);
        let cols_prod = cols.clone();
        mul_into(&self.state.psi, &cols_prod, &mut cols);
        self.residuals = (l1_residual(&rows, &self.u), l1_residual(&cols, &self.v));
        self.plan = Some(self.state.q_block().scale(&self.state.phi, Side::Row)?.scale(&self.state.psi, Side::Col)?);

        let t_next = self.outer_done + 2;
        let lambda1 = lambda_for(self.h1, &self.schedule, t_next)?;
        let lambda2 = lambda_for(self.h2, &self.schedule, t_next)?;
        let st = &mut self.state;
        let n = st.n;
        let m = st.q_diag.len();
        for k in 0..m {
            let r = k * n..(k + 1) * n;
            scale_hadamard_kernel_in_place(&mut st.q_diag[k], &st.phi[r.clone()], &st.psi[r.clone()], lambda1);
            scale_hadamard_kernel_in_place(&mut st.qt_diag[k], &st.psi[r.clone()], &st.phi[r], lambda1);
        }
        for k in 0..m.saturating_sub(1) {
            for c in 0..n {
                let (a, b) = (k * n + c, (k + 1) * n + c);
                st.q_lower[k][c] = lambda2 * st.q_lower[k][c] * (st.phi[b] / st.phi[a]);
                st.q_upper[k][c] = lambda2 * st.q_upper[k][c] * (st.phi[a] / st.phi[b]);
                st.qt_lower[k][c] = lambda2 * st.qt_lower[k][c] * (st.psi[b] / st.psi[a]);
                st.qt_upper[k][c] = lambda2 * st.qt_upper[k][c] * (st.psi[a] / st.psi[b]);
            }
        }
        st.lambda1 = lambda1;
        st.lambda2 = lambda2;
        tally.vec_op(16 * len);
        let finite = st.q_diag.iter().chain(&st.qt_diag).all(ColtRepr::is_finite)
            && [&st.q_lower, &st.q_upper, &st.qt_lower, &st.qt_upper]
                .iter()
                .all(|v| v.iter().all(|r| r.iter().all(|x| x.is_finite())));
        if !finite {
            return Err(Error::Numerical(format!("non-finite coefficient after outer step {}", self.outer_done + 1)));
        }
        self.outer_done += 1;
        Ok(())
    }

    pub fn state(&self) -> &Fs2State2D<T> {
        &self.state
    }

    pub fn plan(&self) -> Option<&BlockColtRepr<T>> {
        self.plan.as_ref()
    }

    pub fn w1(&self) -> Option<T> {
        self.plan.as_ref().map(|p| w1_block(p, self.h1, self.h2))
    }

    pub fn residuals(&self) -> (T, T) {
        self.residuals
    }

    pub fn outer_done(&self) -> usize {
        self.outer_done
    }
}

#[derive(Debug, Clone)]
pub struct Fs2Output2D<T> {
    pub w1: T,
    pub state: Fs2State2D<T>,
    pub plan: BlockColtRepr<T>,
    pub trace: ConvergenceTrace<T>,
}

/// 2D FS-2 with the problem's iteration budget; O(NM) per sweep.
pub fn fs2_2d<T: Scalar>(p: &Problem2D<T>) -> Result<Fs2Output2D<T>> {
    let mut solver = Fs2Solver2D::new(p)?;
    let cfg = p.config;
    let mut rec = Recorder::start();
    for t in 1..=cfg.outer {
        solver.outer_step()?;
        let (rr, cr) = solver.residuals();
        rec.push(t, t * cfg.inner, solver.w1().expect("plan after step"), rr, cr);
        if cfg.tol.is_some_and(|tol| cr <= tol) {
            break;
        }
    }
    let plan = solver.plan.take().expect("at least one outer step");
    Ok(Fs2Output2D { w1: w1_block(&plan, p.h1, p.h2), state: solver.state, plan, trace: rec.finish() })
}
