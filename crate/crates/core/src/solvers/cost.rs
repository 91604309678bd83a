//! Evaluation of `⟨C, Γ⟩` for ℓ1 grid costs.

use crate::block::BlockColtRepr;
use crate::colt::ColtRepr;
use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::Scalar;

/// `Σ_ij c_ij γ_ij`.
pub fn w1_dense<T: Scalar>(cost: &DenseMatrix<T>, plan: &DenseMatrix<T>) -> Result<T> {
    cost.frobenius_dot(plan)
}

/// Per-row weighted sums `Σ_j h·|i−j|·m[i][j]` in O(N).
///
/// Lower part, with `s_i` the plain row sum of the lower triangle:
/// `s_{i+1} = r_i s_i + γ_{i+1}`, `t_{i+1} = r_i (t_i + s_i)`.
/// Upper part, from the bottom: `s'_i = γ'_i + r'_i s'_{i+1}`,
/// `t'_i = γ'_i + r'_i (t'_{i+1} + s'_{i+1})`.
pub fn row_cost_sums<T: Scalar>(m: &ColtRepr<T>, h: T) -> Vec<T> {
    let n = m.n();
    let (g, lr, gs, ur) = (m.gamma(), m.lower_ratios(), m.gamma_sup(), m.upper_ratios());
    let mut out = vec![T::zero(); n];

    let (mut s, mut t) = (g[0], T::zero());
    for i in 1..n {
        t = lr[i - 1] * (t + s);
        s = lr[i - 1] * s + g[i];
        out[i] = t;
    }

    if n >= 2 {
        let (mut s, mut t) = (gs[n - 2], gs[n - 2]);
        out[n - 2] = out[n - 2] + t;
        for i in (0..n.saturating_sub(2)).rev() {
            t = gs[i] + ur[i] * (t + s);
            s = gs[i] + ur[i] * s;
            out[i] = out[i] + t;
        }
    }

    out.iter_mut().for_each(|x| *x = *x * h);
    out
}

/// `⟨C, Γ⟩` for a plan in `𝒞ᴺ` on a 1D grid with spacing `h`, in O(N).
pub fn w1_colt<T: Scalar>(plan: &ColtRepr<T>, h: T) -> T {
    row_cost_sums(plan, h).into_iter().sum()
}

/// `⟨C, Γ⟩` for a plan in `𝒞^{N,M}` with inner spacing `h1` and block
/// spacing `h2`, in O(NM).
///
/// Block `(a, b)` of the plan is `diag(ρ_ab) Γ_bb`, so its contribution
/// reduces to dot products of `ρ_ab` with the row sums `w_b` and row cost
/// sums `c_b` of the diagonal blocks; the `ρ_ab` sums are accumulated by
/// the same recursions as the block matvec.
pub fn w1_block<T: Scalar>(plan: &BlockColtRepr<T>, h1: T, h2: T) -> T {
    let (n, m) = (plan.inner_size(), plan.block_count());
    let diag = plan.diag_blocks();
    let w: Vec<Vec<T>> = diag.iter().map(ColtRepr::row_sums).collect();
    let c: Vec<Vec<T>> = diag.iter().map(|d| row_cost_sums(d, h1)).collect();
    let sum = |v: &[T]| v.iter().copied().sum::<T>();

    let mut within = sum(&c.iter().map(|x| sum(x)).collect::<Vec<_>>());
    let mut across = T::zero();

    let rl = plan.lower_block_ratios();
    let (mut p, mut t, mut cc) = (w[0].clone(), vec![T::zero(); n], c[0].clone());
    for a in 1..m {
        for i in 0..n {
            t[i] = rl[a - 1][i] * (t[i] + p[i]);
            p[i] = rl[a - 1][i] * p[i] + w[a][i];
            cc[i] = rl[a - 1][i] * cc[i] + c[a][i];
        }
        across = across + sum(&t);
        within = within + sum(&cc) - sum(&c[a]);
    }

    let ru = plan.upper_block_ratios();
    let (mut q, mut tq, mut qc) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    for a in (0..m.saturating_sub(1)).rev() {
        for i in 0..n {
            tq[i] = ru[a][i] * (tq[i] + q[i] + w[a + 1][i]);
            q[i] = ru[a][i] * (q[i] + w[a + 1][i]);
            qc[i] = ru[a][i] * (qc[i] + c[a + 1][i]);
        }
        across = across + sum(&tq);
        within = within + sum(&qc);
    }

    within + h2 * across
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{dense_cost_matrix, Grid};

    #[test]
    fn w1_dense_examples() {
        let c2 = dense_cost_matrix(&Grid::OneD { n: 2, h: 1.0 }).unwrap();
        let p2 = DenseMatrix::from_fn(2, 2, |_, _| 0.25);
        assert_eq!(w1_dense(&c2, &p2).unwrap(), 0.5);
        let c3 = dense_cost_matrix(&Grid::OneD { n: 3, h: 1.0f64 }).unwrap();
        let p3 = DenseMatrix::from_fn(3, 3, |_, _| 1.0 / 9.0);
        assert!((w1_dense(&c3, &p3).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        let d = DenseMatrix::from_fn(3, 3, |i, j| if i == j { [0.2, 0.3, 0.5][i] } else { 0.0 });
        assert_eq!(w1_dense(&c3, &d).unwrap(), 0.0);
        assert!(w1_dense(&c2, &p3).is_err());
    }

    #[test]
    fn w1_colt_lower_ones() {
        let m = ColtRepr::from_parts(vec![1.0; 3], vec![1.0; 2], vec![0.0; 2], vec![1.0]).unwrap();
        assert_eq!(w1_colt(&m, 1.0), 4.0);
    }

    #[test]
    fn w1_colt_diagonal_plan_is_zero() {
        let m = ColtRepr::from_parts(vec![0.2, 0.3, 0.5], vec![1e-300, 1e-300], vec![0.0; 2], vec![2.0]).unwrap();
        assert!(w1_colt(&m, 1.0) < 1e-299);
    }

    #[test]
    fn w1_colt_three_by_three_upper() {
        // [[0,1,6],[0,0,2],[0,0,0]]: cost 1·1 + 2·6 + 1·2 = 15
        let m = ColtRepr::from_parts(vec![0.0; 3], vec![1.0; 2], vec![1.0, 2.0], vec![3.0]).unwrap();
        assert_eq!(w1_colt(&m, 1.0), 15.0);
        assert_eq!(w1_colt(&m, 0.5), 7.5);
    }
}
