//! Block CoLT matrices `𝒞^{N,M}` for problems on an `N × M` grid.
//!
//! The `NM × NM` matrix is split into `M × M` blocks of size `N × N`. Only
//! the diagonal blocks `A[k][k]` (members of `𝒞ᴺ`) and two families of
//! block ratio vectors are stored; every other block follows from
//!
//! ```text
//! A[i+1][j] = diag(rL[i]) · A[i][j]     (j <= i)
//! A[i][j]   = diag(rU[i]) · A[i+1][j]   (i <  j)
//! ```
//!
//! Vectors of length `NM` are laid out as `M` contiguous blocks of length
//! `N`: grid point `(i, j)` (inner index `i`, block index `j`) lives at
//! `i + j·N`.

use crate::colt::{cmv_kernel, ColtRepr};
use crate::dense::{guard, DenseMatrix, DENSE_LIMIT};
use crate::error::{check_len, Error, Result};
use crate::instrument::{note_dense_eval, Tally};
use crate::Scalar;

/// A length `N·M` vector viewed as `M` blocks of length `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector<T> {
    n: usize,
    m: usize,
    data: Vec<T>,
}

impl<T: Scalar> BlockVector<T> {
    pub fn new(n: usize, m: usize, data: Vec<T>) -> Result<Self> {
        check_len(n * m, data.len())?;
        Ok(Self { n, m, data })
    }

    pub fn block(&self, k: usize) -> &[T] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Row,
    Col,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockColtRepr<T> {
    n: usize,
    m: usize,
    diag: Vec<ColtRepr<T>>,
    lower: Vec<Vec<T>>,
    upper: Vec<Vec<T>>,
}

fn check_block_ratios<T: Scalar>(v: &[Vec<T>], n: usize, m: usize, what: &'static str) -> Result<()> {
    check_len(m.saturating_sub(1), v.len())?;
    for (k, r) in v.iter().enumerate() {
        check_len(n, r.len())?;
        if let Some(i) = r.iter().position(|x| *x == T::zero() || !x.is_finite()) {
            return Err(Error::ZeroEntry { what, index: k * n + i });
        }
    }
    Ok(())
}

fn vec_rel_eq<T: Scalar>(a: &[T], b: &[T], tol: T) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(&x, &y)| (x - y).abs() <= tol * x.abs().max(y.abs()))
}

fn repr_rel_eq<T: Scalar>(a: &ColtRepr<T>, b: &ColtRepr<T>, tol: T) -> bool {
    vec_rel_eq(a.gamma(), b.gamma(), tol)
        && vec_rel_eq(a.lower_ratios(), b.lower_ratios(), tol)
        && vec_rel_eq(a.gamma_sup(), b.gamma_sup(), tol)
        && vec_rel_eq(a.upper_ratios(), b.upper_ratios(), tol)
}

impl<T: Scalar> BlockColtRepr<T> {
    pub fn new(diag: Vec<ColtRepr<T>>, lower: Vec<Vec<T>>, upper: Vec<Vec<T>>) -> Result<Self> {
        let m = diag.len();
        if m == 0 {
            return Err(Error::InvalidArgument("block CoLT needs at least one block".into()));
        }
        let n = diag[0].n();
        for d in &diag {
            check_len(n, d.n())?;
        }
        check_block_ratios(&lower, n, m, "lower block ratios")?;
        check_block_ratios(&upper, n, m, "upper block ratios")?;
        Ok(Self { n, m, diag, lower, upper })
    }

    pub(crate) fn new_unchecked(diag: Vec<ColtRepr<T>>, lower: Vec<Vec<T>>, upper: Vec<Vec<T>>) -> Self {
        let m = diag.len();
        let n = diag[0].n();
        Self { n, m, diag, lower, upper }
    }

    /// All-ones `NM × NM` matrix.
    pub fn identity(n: usize, m: usize) -> Result<Self> {
        let d = ColtRepr::identity(n)?;
        let ones = vec![vec![T::one(); n]; m.saturating_sub(1)];
        Self::new(vec![d; m], ones.clone(), ones)
    }

    pub fn inner_size(&self) -> usize {
        self.n
    }

    pub fn block_count(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.n * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn diag_blocks(&self) -> &[ColtRepr<T>] {
        &self.diag
    }

    pub fn lower_block_ratios(&self) -> &[Vec<T>] {
        &self.lower
    }

    pub fn upper_block_ratios(&self) -> &[Vec<T>] {
        &self.upper
    }

    /// Dense block `(a, b)`.
    pub fn block_dense(&self, a: usize, b: usize) -> Result<DenseMatrix<T>> {
        let base = self.diag[b].to_dense()?;
        let mut rho = vec![T::one(); self.n];
        if b <= a {
            for r in &self.lower[b..a] {
                rho.iter_mut().zip(r).for_each(|(x, &y)| *x = *x * y);
            }
        } else {
            for r in &self.upper[a..b] {
                rho.iter_mut().zip(r).for_each(|(x, &y)| *x = *x * y);
            }
        }
        base.scale(&rho, &vec![T::one(); self.n])
    }

    pub fn to_dense(&self) -> Result<DenseMatrix<T>> {
        let (n, m) = (self.n, self.m);
        guard(n * m, DENSE_LIMIT)?;
        note_dense_eval();
        let mut d = DenseMatrix::zeros(n * m, n * m);
        for a in 0..m {
            for b in 0..m {
                let blk = self.block_dense(a, b)?;
                for i in 0..n {
                    for j in 0..n {
                        d.set(a * n + i, b * n + j, blk.get(i, j));
                    }
                }
            }
        }
        Ok(d)
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        self.matvec_tally(x, &mut ())
    }

    /// Block recursion: with `t_k = A[k][k] x_k`,
    /// `p_k = rL[k-1] ⊙ p_{k-1} + t_k` and
    /// `q_{k-1} = rU[k-1] ⊙ (q_k + t_k)`, `q_{M-1} = 0`; result `p + q`.
    pub fn matvec_tally(&self, x: &[T], tally: &mut impl Tally) -> Result<Vec<T>> {
        check_len(self.len(), x.len())?;
        let mut t = vec![T::zero(); self.len()];
        let mut out = vec![T::zero(); self.len()];
        block_matvec_kernel(self.n, &self.diag, &self.lower, &self.upper, x, &mut t, &mut out, tally);
        Ok(out)
    }

    /// Representation of the transpose, if it lies in `𝒞^{N,M}`.
    ///
    /// Besides cross-compatible diagonal blocks this needs, for each block
    /// step `k`, vectors `ρL, ρU` with
    /// `diag(rU[k]) A[k+1][k+1] = A[k][k] diag(ρL)` and
    /// `diag(rL[k]) A[k][k] = A[k+1][k+1] diag(ρU)`.
    pub fn transpose(&self) -> Result<Self> {
        let diag_t = self.diag.iter().map(ColtRepr::transpose).collect::<Result<Vec<_>>>()?;
        let tol = T::epsilon() * T::lit(4096.0);
        let mut lower_t = Vec::with_capacity(self.m.saturating_sub(1));
        let mut upper_t = Vec::with_capacity(self.m.saturating_sub(1));
        for k in 0..self.m.saturating_sub(1) {
            let (a, b) = (&self.diag[k], &self.diag[k + 1]);
            if a.gamma().iter().chain(b.gamma()).any(|g| *g == T::zero()) {
                return Err(Error::NotCrossCompatible);
            }
            let rho_l: Vec<T> = (0..self.n).map(|c| self.upper[k][c] * b.gamma()[c] / a.gamma()[c]).collect();
            let rho_u: Vec<T> = (0..self.n).map(|c| self.lower[k][c] * a.gamma()[c] / b.gamma()[c]).collect();
            if !repr_rel_eq(&b.scale_rows(&self.upper[k])?, &a.scale_cols(&rho_l)?, tol)
                || !repr_rel_eq(&a.scale_rows(&self.lower[k])?, &b.scale_cols(&rho_u)?, tol)
            {
                return Err(Error::NotCrossCompatible);
            }
            lower_t.push(rho_l);
            upper_t.push(rho_u);
        }
        Ok(Self::new_unchecked(diag_t, lower_t, upper_t))
    }

    pub fn matvec_transpose(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.len(), x.len())?;
        self.transpose()?.matvec(x)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if (self.n, self.m) != (other.n, other.m) {
            return Err(Error::InvalidArgument(format!(
                "block shape mismatch: {:?} vs {:?}",
                (self.n, self.m),
                (other.n, other.m)
            )));
        }
        let diag = self.diag.iter().zip(&other.diag).map(|(a, b)| a.hadamard(b)).collect::<Result<Vec<_>>>()?;
        let mul = |a: &[Vec<T>], b: &[Vec<T>]| -> Vec<Vec<T>> {
            a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| p * q).collect()).collect()
        };
        Ok(Self::new_unchecked(diag, mul(&self.lower, &other.lower), mul(&self.upper, &other.upper)))
    }

    /// `diag(x) · A` (`Side::Row`) or `A · diag(x)` (`Side::Col`).
    pub fn scale(&self, x: &[T], side: Side) -> Result<Self> {
        check_len(self.len(), x.len())?;
        if let Some(index) = x.iter().position(|v| *v == T::zero()) {
            return Err(Error::ZeroEntry { what: "block scaling", index });
        }
        let n = self.n;
        let xb = |k: usize| &x[k * n..(k + 1) * n];
        match side {
            Side::Row => {
                let diag = (0..self.m).map(|k| self.diag[k].scale_rows(xb(k))).collect::<Result<Vec<_>>>()?;
                let lower = (0..self.m - 1)
                    .map(|k| (0..n).map(|c| self.lower[k][c] * xb(k + 1)[c] / xb(k)[c]).collect())
                    .collect();
                let upper = (0..self.m - 1)
                    .map(|k| (0..n).map(|c| self.upper[k][c] * xb(k)[c] / xb(k + 1)[c]).collect())
                    .collect();
                Ok(Self::new_unchecked(diag, lower, upper))
            }
            Side::Col => {
                let diag = (0..self.m).map(|k| self.diag[k].scale_cols(xb(k))).collect::<Result<Vec<_>>>()?;
                Ok(Self::new_unchecked(diag, self.lower.clone(), self.upper.clone()))
            }
        }
    }

    pub fn row_sums(&self) -> Vec<T> {
        let ones = vec![T::one(); self.len()];
        self.matvec(&ones).expect("length matches")
    }

    pub fn is_finite(&self) -> bool {
        self.diag.iter().all(ColtRepr::is_finite)
            && self.lower.iter().chain(&self.upper).all(|r| r.iter().all(|x| x.is_finite()))
    }
}

/// Shared block recursion; `t` is scratch of length `N·M`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn block_matvec_kernel<T: Scalar>(
    n: usize,
    diag: &[ColtRepr<T>],
    lower: &[Vec<T>],
    upper: &[Vec<T>],
    x: &[T],
    t: &mut [T],
    out: &mut [T],
    tally: &mut impl Tally,
) {
    let m = diag.len();
    for (k, d) in diag.iter().enumerate() {
        let r = k * n..(k + 1) * n;
        cmv_kernel(d.gamma(), d.lower_ratios(), d.gamma_sup(), d.upper_ratios(), &x[r.clone()], &mut t[r], tally);
    }
    out[..n].copy_from_slice(&t[..n]);
    for k in 1..m {
        let (prev, cur) = out.split_at_mut(k * n);
        let prev = &prev[(k - 1) * n..];
        for c in 0..n {
            cur[c] = lower[k - 1][c] * prev[c] + t[k * n + c];
        }
        tally.vec_op(2 * n);
    }
    let mut q = vec![T::zero(); n];
    for k in (1..m).rev() {
        for c in 0..n {
            q[c] = upper[k - 1][c] * (q[c] + t[k * n + c]);
            out[(k - 1) * n + c] = out[(k - 1) * n + c] + q[c];
        }
        tally.vec_op(3 * n);
    }
}

/// The 2D kernel `e^{-C/δ}` for ℓ1 cost on an `n × m` grid:
/// diagonal blocks are the 1D kernel with ratio `lambda1`, block ratios are
/// `lambda2`.
pub fn kernel_2d<T: Scalar>(n: usize, m: usize, lambda1: T, lambda2: T) -> Result<BlockColtRepr<T>> {
    if n < 2 || m < 2 {
        return Err(Error::InvalidArgument(format!("kernel_2d needs n, m >= 2, got {n} x {m}")));
    }
    if !(lambda2 > T::zero() && lambda2 < T::one()) {
        return Err(Error::InvalidArgument(format!("lambda2 must lie in (0, 1), got {lambda2}")));
    }
    let k0 = crate::solvers::kernel_1d(n, lambda1)?;
    let r = vec![vec![lambda2; n]; m - 1];
    BlockColtRepr::new(vec![k0; m], r.clone(), r)
}

pub fn block_cmv<T: Scalar>(a: &BlockColtRepr<T>, x: &BlockVector<T>) -> Result<BlockVector<T>> {
    check_len(a.inner_size(), x.n)?;
    BlockVector::new(x.n, x.m, a.matvec(x.as_slice())?)
}

pub fn block_cmv_transpose<T: Scalar>(a: &BlockColtRepr<T>, x: &BlockVector<T>) -> Result<BlockVector<T>> {
    check_len(a.inner_size(), x.n)?;
    BlockVector::new(x.n, x.m, a.matvec_transpose(x.as_slice())?)
}

pub fn block_hadamard<T: Scalar>(a: &BlockColtRepr<T>, b: &BlockColtRepr<T>) -> Result<BlockColtRepr<T>> {
    a.hadamard(b)
}

pub fn block_scale<T: Scalar>(x: &BlockVector<T>, a: &BlockColtRepr<T>, side: Side) -> Result<BlockColtRepr<T>> {
    a.scale(x.as_slice(), side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block(n: usize, m: usize, rng: &mut ChaCha8Rng) -> BlockColtRepr<f64> {
        let diag = (0..m).map(|_| ColtRepr::random_log_uniform(n, 0.5, 2.0, rng)).collect();
        let mut ratios = || -> Vec<Vec<f64>> {
            (0..m - 1).map(|_| (0..n).map(|_| rng.random_range(0.5..2.0)).collect()).collect()
        };
        let lower = ratios();
        let upper = ratios();
        BlockColtRepr::new(diag, lower, upper).unwrap()
    }

    fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
    }

    #[test]
    fn single_block_is_plain_cmv() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = ColtRepr::random_log_uniform(7, 0.5, 2.0, &mut rng);
        let b = BlockColtRepr::new(vec![d.clone()], vec![], vec![]).unwrap();
        let x: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        assert_eq!(b.matvec(&x).unwrap(), d.matvec(&x).unwrap());
    }

    #[test]
    fn kernel_2d_first_column() {
        let k = kernel_2d(3, 2, 0.5, 0.5).unwrap();
        let mut e1 = vec![0.0; 6];
        e1[0] = 1.0;
        assert_eq!(k.matvec(&e1).unwrap(), vec![1.0, 0.5, 0.25, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn kernel_2d_small_dense() {
        let k = kernel_2d(2, 2, 0.5, 0.5).unwrap().to_dense().unwrap().to_rows();
        assert_eq!(
            k,
            vec![
                vec![1.0, 0.5, 0.5, 0.25],
                vec![0.5, 1.0, 0.25, 0.5],
                vec![0.5, 0.25, 1.0, 0.5],
                vec![0.25, 0.5, 0.5, 1.0]
            ]
        );
        assert!(kernel_2d(1, 2, 0.5, 0.5).is_err());
        assert!(kernel_2d(2, 2, 0.5, 1.5).is_err());
    }

    #[test]
    fn kernel_2d_matches_exponentiated_cost() {
        let (n, m, h1, h2, delta) = (4usize, 4usize, 0.3f64, 0.7f64, 0.9f64);
        let k = kernel_2d(n, m, (-h1 / delta).exp(), (-h2 / delta).exp()).unwrap().to_dense().unwrap();
        for p in 0..n * m {
            for q in 0..n * m {
                let (i1, j1, i2, j2) = ((p % n) as f64, (p / n) as f64, (q % n) as f64, (q / n) as f64);
                let c = (i1 - i2).abs() * h1 + (j1 - j2).abs() * h2;
                let want = (-c / delta).exp();
                assert!((k.get(p, q) - want).abs() <= 1e-14 * want, "{p},{q}");
            }
        }
        assert_eq!(k, k.transpose());
    }

    #[test]
    fn random_matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_block(8, 8, &mut rng);
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = a.matvec(&x).unwrap();
        let slow = a.to_dense().unwrap().matvec(&x).unwrap();
        assert!(rel_close(&fast, &slow, 1e-12));
    }

    #[test]
    fn dense_blocks_follow_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_block(3, 4, &mut rng);
        let d = a.to_dense().unwrap();
        let blk = |i: usize, j: usize| DenseMatrix::from_fn(3, 3, |p, q| d.get(i * 3 + p, j * 3 + q));
        for i in 0..3 {
            for j in 0..=i {
                let want = blk(i, j).scale(&a.lower_block_ratios()[i], &[1.0; 3]).unwrap();
                assert!(blk(i + 1, j).frobenius_dist(&want).unwrap() < 1e-13);
            }
        }
        for i in 1..4 {
            for j in i..4 {
                let want = blk(i, j).scale(&a.upper_block_ratios()[i - 1], &[1.0; 3]).unwrap();
                assert!(blk(i - 1, j).frobenius_dist(&want).unwrap() < 1e-13);
            }
        }
    }

    #[test]
    fn transpose_of_scaled_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, m) = (4, 4);
        let phi: Vec<f64> = (0..n * m).map(|_| rng.random_range(0.2..2.0)).collect();
        let psi: Vec<f64> = (0..n * m).map(|_| rng.random_range(0.2..2.0)).collect();
        let k = kernel_2d(n, m, 0.6, 0.4).unwrap();
        let a = k.scale(&phi, Side::Row).unwrap().scale(&psi, Side::Col).unwrap();
        let x: Vec<f64> = (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = a.matvec_transpose(&x).unwrap();
        let slow = a.to_dense().unwrap().matvec_transpose(&x).unwrap();
        assert!(rel_close(&fast, &slow, 1e-12));
        assert_eq!(a.matvec_transpose(&vec![0.0; n * m]).unwrap(), vec![0.0; n * m]);
        // symmetric kernel
        let y = k.matvec_transpose(&x).unwrap();
        assert!(rel_close(&y, &k.matvec(&x).unwrap(), 1e-14));
    }

    #[test]
    fn random_blocks_are_not_transposable() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_block(4, 3, &mut rng);
        assert!(a.transpose().is_err());
    }

    #[test]
    fn hadamard_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_block(2, 2, &mut rng);
        let b = random_block(2, 2, &mut rng);
        let h = a.hadamard(&b).unwrap().to_dense().unwrap();
        let want = a.to_dense().unwrap().hadamard(&b.to_dense().unwrap()).unwrap();
        assert!(h.frobenius_dist(&want).unwrap() <= 1e-14 * want.max_abs());
        assert_eq!(a.hadamard(&BlockColtRepr::identity(2, 2).unwrap()).unwrap(), a);

        let k = kernel_2d(3, 3, 0.5, 0.25).unwrap();
        let kk = k.hadamard(&k).unwrap().to_dense().unwrap();
        assert_eq!(kk, k.to_dense().unwrap().map(|x| x * x));

        let x = [1.0, 2.0, 3.0, 4.0];
        let s = a.scale(&x, Side::Row).unwrap().to_dense().unwrap();
        let want = a.to_dense().unwrap().scale(&x, &[1.0; 4]).unwrap();
        assert!(s.frobenius_dist(&want).unwrap() <= 1e-14 * want.max_abs());
        let back = a.scale(&x, Side::Row).unwrap().scale(&x.map(|v| 1.0 / v), Side::Row).unwrap();
        assert!(back.to_dense().unwrap().frobenius_dist(&a.to_dense().unwrap()).unwrap() < 1e-14);
        assert_eq!(a.scale(&[1.0; 4], Side::Col).unwrap(), a);
        assert!(a.scale(&[1.0, 0.0, 1.0, 1.0], Side::Row).is_err());
    }
}
