//! Dense baselines: entropic Sinkhorn and the proximal-point method, both
//! O(N²) per scaling sweep.

use crate::dense::DenseMatrix;
use crate::error::{check_len, Error, Result};
use crate::instrument::note_dense_eval;
use crate::solvers::cost::w1_dense;
use crate::solvers::problem::{require_positive, DeltaSchedule, OtProblem};
use crate::solvers::trace::{l1_residual, Recorder};
use crate::solvers::DenseOutput;
use crate::Scalar;

pub(crate) fn divide_checked<T: Scalar>(num: &[T], den: &[T], out: &mut [T], what: &str) -> Result<()> {
    for (i, ((o, &a), &b)) in out.iter_mut().zip(num).zip(den).enumerate() {
        if b == T::zero() {
            return Err(Error::Numerical(format!("zero {what} at {i}: marginal mass cannot be reached")));
        }
        let x = a / b;
        if !x.is_finite() {
            return Err(Error::Numerical(format!("non-finite {what} scaling at {i}")));
        }
        *o = x;
    }
    Ok(())
}

/// Dense IPOT as a stepwise state machine: `Γ ← 1 1ᵀ`; each outer step
/// forms `Q = K ⊙ Γ`, runs `L` sweeps of `ψ ← v ⊘ Qᵀφ`, `φ ← u ⊘ Qψ`, then
/// sets `Γ ← diag(φ) Q diag(ψ)`.
#[derive(Debug, Clone)]
pub struct IpotDense<T> {
    u: Vec<T>,
    v: Vec<T>,
    cost: DenseMatrix<T>,
    schedule: DeltaSchedule<T>,
    inner: usize,
    phi: Vec<T>,
    psi: Vec<T>,
    plan: DenseMatrix<T>,
    kernel: Option<(T, DenseMatrix<T>)>,
    outer_done: usize,
}

impl<T: Scalar> IpotDense<T> {
    pub fn new<P: OtProblem<T>>(p: &P, cost: &DenseMatrix<T>) -> Result<Self> {
        let n = p.source().len();
        check_len(n, cost.rows())?;
        check_len(n, cost.cols())?;
        let init = T::one() / T::lit(n as f64);
        Ok(Self {
            u: p.source().to_vec(),
            v: p.target().to_vec(),
            cost: cost.clone(),
            schedule: p.config().schedule,
            inner: p.config().inner,
            phi: vec![init; n],
            psi: vec![init; n],
            plan: DenseMatrix::from_fn(n, n, |_, _| T::one()),
            kernel: None,
            outer_done: 0,
        })
    }

    fn refresh_kernel(&mut self, delta: T) {
        let stale = !matches!(&self.kernel, Some((d, _)) if *d == delta);
        if stale {
            self.kernel = Some((delta, self.cost.map(|c| (-c / delta).exp())));
        }
    }

    pub fn outer_step(&mut self) -> Result<()> {
        note_dense_eval();
        let delta = self.schedule.delta(self.outer_done + 1);
        self.refresh_kernel(delta);
        let q = self.kernel.as_ref().expect("kernel just set").1.hadamard(&self.plan)?;
        let mut buf;
        for _ in 0..self.inner {
            buf = q.matvec_transpose(&self.phi)?;
            divide_checked(&self.v, &buf, &mut self.psi, "column sum")?;
            buf = q.matvec(&self.psi)?;
            divide_checked(&self.u, &buf, &mut self.phi, "row sum")?;
        }
        self.plan = q.scale(&self.phi, &self.psi)?;
        self.outer_done += 1;
        Ok(())
    }

    pub fn plan(&self) -> &DenseMatrix<T> {
        &self.plan
    }

    pub fn outer_done(&self) -> usize {
        self.outer_done
    }

    pub fn w1(&self) -> Result<T> {
        w1_dense(&self.cost, &self.plan)
    }

    pub fn residuals(&self) -> (T, T) {
        (l1_residual(&self.plan.row_sums(), &self.u), l1_residual(&self.plan.col_sums(), &self.v))
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }

    pub fn psi(&self) -> &[T] {
        &self.psi
    }
}

/// Dense IPOT with the problem's iteration budget.
pub fn ipot_dense<T: Scalar, P: OtProblem<T>>(p: &P, cost: &DenseMatrix<T>) -> Result<DenseOutput<T>> {
    let mut solver = IpotDense::new(p, cost)?;
    let cfg = *p.config();
    let mut rec = Recorder::start();
    for t in 1..=cfg.outer {
        solver.outer_step()?;
        let (rr, cr) = solver.residuals();
        rec.push(t, t * cfg.inner, solver.w1()?, rr, cr);
        if cfg.tol.is_some_and(|tol| cr <= tol) {
            break;
        }
    }
    let w1 = solver.w1()?;
    Ok(DenseOutput { w1, plan: solver.plan, trace: rec.finish() })
}

/// Entropic Sinkhorn with the dense kernel `e^{-C/ε}`; `iters` scaling
/// sweeps, one trace row per `p.config().inner` sweeps.
pub fn sinkhorn_dense<T: Scalar, P: OtProblem<T>>(
    p: &P,
    cost: &DenseMatrix<T>,
    epsilon: T,
    iters: usize,
) -> Result<DenseOutput<T>> {
    let (u, v) = (p.source(), p.target());
    let n = u.len();
    check_len(n, cost.rows())?;
    check_len(n, cost.cols())?;
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    note_dense_eval();
    let k = cost.map(|c| (-c / epsilon).exp());
    let init = T::one() / T::lit(n as f64);
    let (mut phi, mut psi) = (vec![init; n], vec![init; n]);
    let every = p.config().inner.max(1);
    let mut rec = Recorder::start();
    for it in 1..=iters {
        let kt_phi = k.matvec_transpose(&phi)?;
        divide_checked(v, &kt_phi, &mut psi, "column sum")?;
        let k_psi = k.matvec(&psi)?;
        divide_checked(u, &k_psi, &mut phi, "row sum")?;
        if it % every == 0 || it == iters {
            let plan = k.scale(&phi, &psi)?;
            let (rr, cr) = (l1_residual(&plan.row_sums(), u), l1_residual(&plan.col_sums(), v));
            rec.push(it.div_ceil(every), it, w1_dense(cost, &plan)?, rr, cr);
        }
    }
    let plan = k.scale(&phi, &psi)?;
    let w1 = w1_dense(cost, &plan)?;
    Ok(DenseOutput { w1, plan, trace: rec.finish() })
}

pub(crate) fn check_positive_marginals<T: Scalar>(u: &[T], v: &[T]) -> Result<()> {
    require_positive(u, "source marginal (rescale zero-mass inputs first)")?;
    require_positive(v, "target marginal (rescale zero-mass inputs first)")
}
