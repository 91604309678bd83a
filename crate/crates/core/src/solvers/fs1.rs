//! Linear-time entropic Sinkhorn (FS-1).
//!
//! The scalings of entropic OT at small `ε` span far more than the `f64`
//! range, so the iteration runs on `log φ`, `log ψ`. The kernel product
//! `log Σ_j λ^{|i−j|} e^{x_j}` keeps the O(N) CoLT recursion, with
//! multiply-add replaced by log-sum-exp:
//!
//! ```text
//! p_i = lse(log λ + p_{i−1}, x_i)          (lower part, with diagonal)
//! q_i = log λ + lse(q_{i+1}, x_{i+1})      (upper part)
//! ```

use crate::block::BlockColtRepr;
use crate::colt::ColtRepr;
use crate::error::{Error, Result};
use crate::solvers::cost::{w1_block, w1_colt};
use crate::solvers::ipot::check_positive_marginals;
use crate::solvers::problem::{Problem1D, Problem2D};
use crate::solvers::trace::{l1_residual, ConvergenceTrace, Recorder};
use crate::solvers::TransportPlan;
use crate::Scalar;

#[derive(Debug, Clone)]
pub struct Fs1Output<T> {
    pub w1: T,
    /// `log φ`; the plan is `diag(φ) K diag(ψ)`.
    pub log_phi: Vec<T>,
    pub log_psi: Vec<T>,
    pub plan: TransportPlan<T>,
    pub trace: ConvergenceTrace<T>,
}

#[inline]
fn lse<T: Scalar>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `out_i = log Σ_j λ^{|i−j|} e^{x_j}` on a slice.
fn log_kernel_apply<T: Scalar>(log_l: T, x: &[T], out: &mut [T]) {
    let n = x.len();
    let mut p = T::neg_infinity();
    for i in 0..n {
        p = lse(log_l + p, x[i]);
        out[i] = p;
    }
    let mut q = T::neg_infinity();
    for i in (0..n.saturating_sub(1)).rev() {
        q = log_l + lse(q, x[i + 1]);
        out[i] = lse(out[i], q);
    }
}

/// Block version: `λ1` inside blocks of length `n`, `λ2` across blocks.
fn log_block_apply<T: Scalar>(n: usize, log_l1: T, log_l2: T, x: &[T], t: &mut [T], out: &mut [T]) {
    let m = x.len() / n;
    for k in 0..m {
        let r = k * n..(k + 1) * n;
        log_kernel_apply(log_l1, &x[r.clone()], &mut t[r]);
    }
    out[..n].copy_from_slice(&t[..n]);
    for k in 1..m {
        for c in 0..n {
            out[k * n + c] = lse(log_l2 + out[(k - 1) * n + c], t[k * n + c]);
        }
    }
    let mut q = vec![T::neg_infinity(); n];
    for k in (1..m).rev() {
        for c in 0..n {
            q[c] = log_l2 + lse(q[c], t[k * n + c]);
            out[(k - 1) * n + c] = lse(out[(k - 1) * n + c], q[c]);
        }
    }
}

/// `diag(φ) K diag(ψ)` for the 1D kernel, built from logs so that no
/// scaling is ever exponentiated on its own.
fn scaled_kernel_1d<T: Scalar>(log_l: T, lphi: &[T], lpsi: &[T]) -> ColtRepr<T> {
    let n = lphi.len();
    let gamma = (0..n).map(|i| (lphi[i] + lpsi[i]).exp()).collect();
    let lr = (0..n - 1).map(|i| (log_l + lphi[i + 1] - lphi[i]).exp()).collect();
    let gs = (0..n - 1).map(|i| (lphi[i] + log_l + lpsi[i + 1]).exp()).collect();
    let ur = (0..n.saturating_sub(2)).map(|i| (log_l + lphi[i] - lphi[i + 1]).exp()).collect();
    ColtRepr::from_parts_unchecked(gamma, lr, gs, ur)
}

fn scaled_kernel_2d<T: Scalar>(n: usize, log_l1: T, log_l2: T, lphi: &[T], lpsi: &[T]) -> BlockColtRepr<T> {
    let m = lphi.len() / n;
    let diag = (0..m)
        .map(|k| {
            let r = k * n..(k + 1) * n;
            scaled_kernel_1d(log_l1, &lphi[r.clone()], &lpsi[r])
        })
        .collect();
    let ratio = |k: usize, sign: T| -> Vec<T> {
        (0..n).map(|c| (log_l2 + sign * (lphi[(k + 1) * n + c] - lphi[k * n + c])).exp()).collect()
    };
    let lower = (0..m - 1).map(|k| ratio(k, T::one())).collect();
    let upper = (0..m - 1).map(|k| ratio(k, -T::one())).collect();
    BlockColtRepr::new_unchecked(diag, lower, upper)
}

fn check_epsilon<T: Scalar>(epsilon: T, iters: usize) -> Result<()> {
    if !(epsilon > T::zero() && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if iters == 0 {
        return Err(Error::InvalidArgument("iteration count must be >= 1".into()));
    }
    Ok(())
}

type Potentials<T> = (Vec<T>, Vec<T>, ConvergenceTrace<T>);

/// Log-domain Sinkhorn sweeps with a symmetric kernel; `w1_of` maps the
/// current potentials to the plan cost for the trace.
fn log_sinkhorn<T: Scalar>(
    u: &[T],
    v: &[T],
    iters: usize,
    every: usize,
    mut apply: impl FnMut(&[T], &mut [T]),
    mut w1_of: impl FnMut(&[T], &[T]) -> T,
) -> Result<Potentials<T>> {
    let n = u.len();
    let (lu, lv): (Vec<T>, Vec<T>) = (u.iter().map(|x| x.ln()).collect(), v.iter().map(|x| x.ln()).collect());
    let init = -T::lit(n as f64).ln();
    let (mut lphi, mut lpsi, mut buf) = (vec![init; n], vec![init; n], vec![T::zero(); n]);
    let mut rec = Recorder::start();
    let mut sums = vec![T::zero(); n];
    for it in 1..=iters {
        apply(&lphi, &mut buf);
        for i in 0..n {
            lpsi[i] = lv[i] - buf[i];
        }
        apply(&lpsi, &mut buf);
        for i in 0..n {
            lphi[i] = lu[i] - buf[i];
        }
        if lphi.iter().chain(&lpsi).any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite log-scaling after sweep {it}")));
        }
        if it % every == 0 || it == iters {
            // Γ1 = φ ⊙ Kψ and Γᵀ1 = ψ ⊙ Kφ, evaluated in logs
            sums.iter_mut().zip(lphi.iter().zip(&buf)).for_each(|(s, (&a, &b))| *s = (a + b).exp());
            let rr = l1_residual(&sums, u);
            apply(&lphi, &mut buf);
            sums.iter_mut().zip(lpsi.iter().zip(&buf)).for_each(|(s, (&a, &b))| *s = (a + b).exp());
            let cr = l1_residual(&sums, v);
            rec.push(it.div_ceil(every), it, w1_of(&lphi, &lpsi), rr, cr);
        }
    }
    Ok((lphi, lpsi, rec.finish()))
}

/// Entropic Sinkhorn on the 1D kernel `λ^{|i−j|}`, `λ = e^{−h/ε}`, with
/// O(N) products; `iters` sweeps, one trace row per `p.config.inner`.
pub fn fs1_1d<T: Scalar>(p: &Problem1D<T>, epsilon: T, iters: usize) -> Result<Fs1Output<T>> {
    p.validate()?;
    check_epsilon(epsilon, iters)?;
    check_positive_marginals(&p.u, &p.v)?;
    let log_l = -p.h / epsilon;
    let (lphi, lpsi, trace) = log_sinkhorn(
        &p.u,
        &p.v,
        iters,
        p.config.inner,
        |x, out| log_kernel_apply(log_l, x, out),
        |a, b| w1_colt(&scaled_kernel_1d(log_l, a, b), p.h),
    )?;
    let plan = scaled_kernel_1d(log_l, &lphi, &lpsi);
    Ok(Fs1Output { w1: w1_colt(&plan, p.h), log_phi: lphi, log_psi: lpsi, plan: TransportPlan::Colt(plan), trace })
}

/// Entropic Sinkhorn on the 2D block kernel with O(NM) products.
pub fn fs1_2d<T: Scalar>(p: &Problem2D<T>, epsilon: T, iters: usize) -> Result<Fs1Output<T>> {
    p.validate()?;
    check_epsilon(epsilon, iters)?;
    check_positive_marginals(&p.u, &p.v)?;
    let n = p.n;
    let (l1, l2) = (-p.h1 / epsilon, -p.h2 / epsilon);
    let mut scratch = vec![T::zero(); p.len()];
    let (lphi, lpsi, trace) = log_sinkhorn(
        &p.u,
        &p.v,
        iters,
        p.config.inner,
        |x, out| log_block_apply(n, l1, l2, x, &mut scratch, out),
        |a, b| w1_block(&scaled_kernel_2d(n, l1, l2, a, b), p.h1, p.h2),
    )?;
    let plan = scaled_kernel_2d(n, l1, l2, &lphi, &lpsi);
    Ok(Fs1Output {
        w1: w1_block(&plan, p.h1, p.h2),
        log_phi: lphi,
        log_psi: lpsi,
        plan: TransportPlan::Block(plan),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::kernel_2d;
    use crate::solvers::{kernel_1d, sinkhorn_dense};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_products_match_kernel_matvec() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..12).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ex: Vec<f64> = x.iter().map(|a| a.exp()).collect();
        let mut out = vec![0.0; 12];
        log_kernel_apply(0.7f64.ln(), &x, &mut out);
        let want = kernel_1d(12, 0.7).unwrap().matvec(&ex).unwrap();
        for (a, b) in out.iter().zip(&want) {
            assert!((a.exp() - b).abs() < 1e-13 * b);
        }
        let mut t = vec![0.0; 12];
        log_block_apply(4, 0.7f64.ln(), 0.4f64.ln(), &x, &mut t, &mut out);
        let want = kernel_2d(4, 3, 0.7, 0.4).unwrap().matvec(&ex).unwrap();
        for (a, b) in out.iter().zip(&want) {
            assert!((a.exp() - b).abs() < 1e-13 * b);
        }
    }

    #[test]
    fn scaled_kernel_matches_dense_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lphi: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lpsi: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ex = |v: &[f64]| v.iter().map(|a| a.exp()).collect::<Vec<_>>();
        let k = kernel_1d(6, 0.3f64).unwrap();
        let want = k.to_dense().unwrap().scale(&ex(&lphi), &ex(&lpsi)).unwrap();
        let got = scaled_kernel_1d(0.3f64.ln(), &lphi, &lpsi).to_dense().unwrap();
        assert!(got.frobenius_dist(&want).unwrap() < 1e-12 * want.max_abs());
    }

    #[test]
    fn agrees_with_dense_sinkhorn_where_that_is_stable() {
        let u = vec![0.1f64, 0.2, 0.3, 0.15, 0.25];
        let v = vec![0.3, 0.1, 0.1, 0.3, 0.2];
        let p = Problem1D::new(u, v, 1.0).unwrap();
        let fast = fs1_1d(&p, 0.5, 300).unwrap();
        let slow = sinkhorn_dense(&p, &p.cost_matrix().unwrap(), 0.5, 300).unwrap();
        assert!((fast.w1 - slow.w1).abs() < 1e-12);
        let d = fast.plan.to_dense().unwrap().frobenius_dist(&slow.plan).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn small_epsilon_stays_finite() {
        let u = vec![0.5f64, 0.3, 0.1, 0.05, 0.05];
        let v = vec![0.05, 0.05, 0.1, 0.3, 0.5];
        let p = Problem1D::new(u, v, 1.0).unwrap();
        let out = fs1_1d(&p, 1.0 / 200.0, 500).unwrap();
        assert!(out.w1.is_finite());
        let exact = crate::oracles::w1_1d_exact(&p.u, &p.v, 1.0).unwrap();
        assert!((out.w1 - exact).abs() < 1e-6);
    }
}
