//! Collinear triangular (CoLT) matrices.
//!
//! An L-CoLT matrix is lower triangular and every row below the diagonal is
//! a fixed multiple of the row above it on the shared columns:
//! `m[i+1][j] = r[i] · m[i][j]` for `j <= i`. It is stored as its diagonal
//! `γ` (length N) and ratio vector `r` (length N-1):
//!
//! ```text
//! m[i][j] = γ[j] · r[j] · r[j+1] ⋯ r[i-1]      (j <= i)
//! ```
//!
//! A U-CoLT matrix is strictly upper triangular with
//! `m[i-1][j] = r'[i-1] · m[i][j]` for `i < j`, stored as its first
//! superdiagonal `γ'` (length N-1) and ratios `r'` (length N-2):
//!
//! ```text
//! m[i][j] = γ'[j-1] · r'[i] · r'[i+1] ⋯ r'[j-2]   (i < j)
//! ```
//!
//! [`ColtRepr`] is the sum of one of each. Matrix-vector products, Hadamard
//! products and diagonal scalings all act on the four vectors in O(N).
//! Indices are 0-based throughout.

use rand::Rng;

use crate::dense::{guard, DenseMatrix, DENSE_LIMIT};
use crate::error::{check_len, Error, Result};
use crate::instrument::{note_dense_eval, Tally};
use crate::Scalar;

fn check_ratios<T: Scalar>(ratios: &[T], what: &'static str) -> Result<()> {
    for (index, r) in ratios.iter().enumerate() {
        if *r == T::zero() {
            return Err(Error::ZeroEntry { what, index });
        }
        if !r.is_finite() {
            return Err(Error::InvalidRepresentation(format!("non-finite {what} at {index}")));
        }
    }
    Ok(())
}

fn check_finite<T: Scalar>(v: &[T], what: &str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::InvalidRepresentation(format!("non-finite {what} at {i}"))),
        None => Ok(()),
    }
}

fn nonzero<T: Scalar>(v: &[T], what: &'static str) -> Result<()> {
    match v.iter().position(|x| *x == T::zero()) {
        Some(index) => Err(Error::ZeroEntry { what, index }),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// Slice kernels shared by the typed representations and the solvers.

/// `out = L y` for `L = L-CoLT(gamma, ratios)`.
#[inline]
pub(crate) fn lcmv_kernel<T: Scalar>(
    gamma: &[T],
    ratios: &[T],
    y: &[T],
    out: &mut [T],
    tally: &mut impl Tally,
) {
    let n = gamma.len();
    if n == 0 {
        return;
    }
    let mut p = gamma[0] * y[0];
    tally.diag_mul();
    out[0] = p;
    for i in 1..n {
        p = ratios[i - 1] * p + gamma[i] * y[i];
        tally.ratio_step();
        tally.diag_mul();
        out[i] = p;
    }
}

/// `out += U y` for `U = U-CoLT(gamma_sup, ratios)` of size `n`.
#[inline]
pub(crate) fn ucmv_add_kernel<T: Scalar>(
    gamma_sup: &[T],
    ratios: &[T],
    y: &[T],
    out: &mut [T],
    tally: &mut impl Tally,
) {
    let m = gamma_sup.len();
    if m == 0 {
        return;
    }
    let mut q = gamma_sup[m - 1] * y[m];
    tally.diag_mul();
    out[m - 1] = out[m - 1] + q;
    for i in (0..m - 1).rev() {
        q = ratios[i] * q + gamma_sup[i] * y[i + 1];
        tally.ratio_step();
        tally.diag_mul();
        out[i] = out[i] + q;
    }
}

/// `out = (L + U) y`.
#[inline]
pub(crate) fn cmv_kernel<T: Scalar>(
    gamma: &[T],
    lower_ratios: &[T],
    gamma_sup: &[T],
    upper_ratios: &[T],
    y: &[T],
    out: &mut [T],
    tally: &mut impl Tally,
) {
    lcmv_kernel(gamma, lower_ratios, y, out, tally);
    ucmv_add_kernel(gamma_sup, upper_ratios, y, out, tally);
}

// ---------------------------------------------------------------------------

/// Lower collinear triangular matrix, `L-CoLT(γ, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LColtRepr<T> {
    gamma: Vec<T>,
    ratios: Vec<T>,
}

impl<T: Scalar> LColtRepr<T> {
    pub fn new(gamma: Vec<T>, ratios: Vec<T>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::InvalidArgument("empty L-CoLT".into()));
        }
        check_len(gamma.len() - 1, ratios.len())?;
        check_finite(&gamma, "diagonal")?;
        check_ratios(&ratios, "lower ratios")?;
        Ok(Self { gamma, ratios })
    }

    /// The all-ones lower triangle, identity of the Hadamard group.
    pub fn ones(n: usize) -> Self {
        Self { gamma: vec![T::one(); n], ratios: vec![T::one(); n.saturating_sub(1)] }
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }

    pub fn ratios(&self) -> &[T] {
        &self.ratios
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        if j > i {
            return T::zero();
        }
        self.ratios[j..i].iter().fold(self.gamma[j], |acc, &r| acc * r)
    }

    pub fn to_dense(&self) -> Result<DenseMatrix<T>> {
        let n = self.n();
        guard(n, DENSE_LIMIT)?;
        note_dense_eval();
        let mut d = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut val = self.gamma[j];
            d.set(j, j, val);
            for i in j + 1..n {
                val = val * self.ratios[i - 1];
                d.set(i, j, val);
            }
        }
        Ok(d)
    }

    pub fn matvec(&self, y: &[T]) -> Result<Vec<T>> {
        self.matvec_tally(y, &mut ())
    }

    pub fn matvec_tally(&self, y: &[T], tally: &mut impl Tally) -> Result<Vec<T>> {
        check_len(self.n(), y.len())?;
        let mut out = vec![T::zero(); self.n()];
        lcmv_kernel(&self.gamma, &self.ratios, y, &mut out, tally);
        Ok(out)
    }
}

/// Strictly upper collinear triangular matrix, `U-CoLT(γ', r')`.
#[derive(Debug, Clone, PartialEq)]
pub struct UColtRepr<T> {
    n: usize,
    gamma_sup: Vec<T>,
    ratios: Vec<T>,
}

impl<T: Scalar> UColtRepr<T> {
    pub fn new(n: usize, gamma_sup: Vec<T>, ratios: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("empty U-CoLT".into()));
        }
        check_len(n - 1, gamma_sup.len())?;
        check_len(n.saturating_sub(2), ratios.len())?;
        check_finite(&gamma_sup, "superdiagonal")?;
        check_ratios(&ratios, "upper ratios")?;
        Ok(Self { n, gamma_sup, ratios })
    }

    /// The all-ones strict upper triangle.
    pub fn ones(n: usize) -> Self {
        Self { n, gamma_sup: vec![T::one(); n.saturating_sub(1)], ratios: vec![T::one(); n.saturating_sub(2)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma_sup(&self) -> &[T] {
        &self.gamma_sup
    }

    pub fn ratios(&self) -> &[T] {
        &self.ratios
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        if i >= j {
            return T::zero();
        }
        self.ratios[i..j - 1].iter().fold(self.gamma_sup[j - 1], |acc, &r| acc * r)
    }

    pub fn to_dense(&self) -> Result<DenseMatrix<T>> {
        let n = self.n;
        guard(n, DENSE_LIMIT)?;
        note_dense_eval();
        let mut d = DenseMatrix::zeros(n, n);
        for j in 1..n {
            let mut val = self.gamma_sup[j - 1];
            d.set(j - 1, j, val);
            for i in (0..j - 1).rev() {
                val = val * self.ratios[i];
                d.set(i, j, val);
            }
        }
        Ok(d)
    }

    pub fn matvec(&self, y: &[T]) -> Result<Vec<T>> {
        self.matvec_tally(y, &mut ())
    }

    pub fn matvec_tally(&self, y: &[T], tally: &mut impl Tally) -> Result<Vec<T>> {
        check_len(self.n, y.len())?;
        let mut out = vec![T::zero(); self.n];
        ucmv_add_kernel(&self.gamma_sup, &self.ratios, y, &mut out, tally);
        Ok(out)
    }
}

/// A member of `𝒞ᴺ`: lower CoLT part (carrying the diagonal) plus strictly
/// upper CoLT part.
#[derive(Debug, Clone, PartialEq)]
pub struct ColtRepr<T> {
    lower: LColtRepr<T>,
    upper: UColtRepr<T>,
}

impl<T: Scalar> ColtRepr<T> {
    pub fn new(lower: LColtRepr<T>, upper: UColtRepr<T>) -> Result<Self> {
        check_len(lower.n(), upper.n())?;
        Ok(Self { lower, upper })
    }

    /// Build from the four vectors `(γ, r, γ', r')`.
    pub fn from_parts(gamma: Vec<T>, lower_ratios: Vec<T>, gamma_sup: Vec<T>, upper_ratios: Vec<T>) -> Result<Self> {
        let n = gamma.len();
        Self::new(LColtRepr::new(gamma, lower_ratios)?, UColtRepr::new(n, gamma_sup, upper_ratios)?)
    }

    /// Unchecked construction for internal hot paths whose inputs are valid
    /// by construction.
    pub(crate) fn from_parts_unchecked(gamma: Vec<T>, lower_ratios: Vec<T>, gamma_sup: Vec<T>, upper_ratios: Vec<T>) -> Self {
        let n = gamma.len();
        debug_assert_eq!(lower_ratios.len(), n.saturating_sub(1));
        debug_assert_eq!(gamma_sup.len(), n.saturating_sub(1));
        debug_assert_eq!(upper_ratios.len(), n.saturating_sub(2));
        Self {
            lower: LColtRepr { gamma, ratios: lower_ratios },
            upper: UColtRepr { n, gamma_sup, ratios: upper_ratios },
        }
    }

    /// `1 1ᵀ`, the identity of the Hadamard group.
    pub fn identity(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("identity needs n >= 2, got {n}")));
        }
        Ok(Self { lower: LColtRepr::ones(n), upper: UColtRepr::ones(n) })
    }

    /// Random member with every vector entry drawn log-uniformly from `[lo, hi]`.
    pub fn random_log_uniform<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Self {
        assert!(n >= 1 && lo > 0.0 && hi >= lo);
        let (a, b) = (lo.ln(), hi.ln());
        let mut draw = |k: usize| -> Vec<T> { (0..k).map(|_| T::lit(rng.random_range(a..=b).exp())).collect() };
        let gamma = draw(n);
        let lr = draw(n - 1);
        let gs = draw(n - 1);
        let ur = draw(n.saturating_sub(2));
        Self::from_parts_unchecked(gamma, lr, gs, ur)
    }

    /// Like [`Self::random_log_uniform`], with the upper ratios then fixed
    /// by `r'[i-1] = γ'[i-1]/γ[i]` so the result is cross-compatible.
    pub fn random_cross_compatible<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Self {
        let mut m = Self::random_log_uniform(n, lo, hi, rng);
        for i in 1..n.saturating_sub(1) {
            m.upper.ratios[i - 1] = m.upper.gamma_sup[i - 1] / m.lower.gamma[i];
        }
        m
    }

    pub fn n(&self) -> usize {
        self.lower.n()
    }

    pub fn lower(&self) -> &LColtRepr<T> {
        &self.lower
    }

    pub fn upper(&self) -> &UColtRepr<T> {
        &self.upper
    }

    pub fn gamma(&self) -> &[T] {
        &self.lower.gamma
    }

    pub fn lower_ratios(&self) -> &[T] {
        &self.lower.ratios
    }

    pub fn gamma_sup(&self) -> &[T] {
        &self.upper.gamma_sup
    }

    pub fn upper_ratios(&self) -> &[T] {
        &self.upper.ratios
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        if j <= i {
            self.lower.entry(i, j)
        } else {
            self.upper.entry(i, j)
        }
    }

    pub fn to_dense(&self) -> Result<DenseMatrix<T>> {
        let n = self.n();
        guard(n, DENSE_LIMIT)?;
        let mut d = self.lower.to_dense()?;
        let u = self.upper.to_dense()?;
        for i in 0..n {
            for j in i + 1..n {
                d.set(i, j, u.get(i, j));
            }
        }
        Ok(d)
    }

    pub fn matvec(&self, y: &[T]) -> Result<Vec<T>> {
        self.matvec_tally(y, &mut ())
    }

    pub fn matvec_tally(&self, y: &[T], tally: &mut impl Tally) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.n()];
        self.matvec_into(y, &mut out, tally)?;
        Ok(out)
    }

    pub fn matvec_into(&self, y: &[T], out: &mut [T], tally: &mut impl Tally) -> Result<()> {
        check_len(self.n(), y.len())?;
        check_len(self.n(), out.len())?;
        cmv_kernel(
            &self.lower.gamma,
            &self.lower.ratios,
            &self.upper.gamma_sup,
            &self.upper.ratios,
            y,
            out,
            tally,
        );
        Ok(())
    }

    /// Whether the transpose is again a member of `𝒞ᴺ`.
    ///
    /// The lower part of `Mᵀ` has row ratios `γ'[i]/γ[i]` on the diagonal
    /// column and `γ'[i]·r'[i-1]/γ'[i-1]` above it; they agree for every
    /// column iff `γ'[i-1] = γ[i]·r'[i-1]` for `1 <= i <= N-2`. The upper
    /// part of `Mᵀ` is always collinear. Diagonal and superdiagonal must be
    /// nonzero so the transpose ratios exist. Equality is tested to a
    /// relative tolerance of `1024·ε`.
    pub fn is_cross_compatible(&self) -> bool {
        let n = self.n();
        let (g, gs, ur) = (self.gamma(), self.gamma_sup(), self.upper_ratios());
        if n >= 2 && (g[..n - 1].iter().any(|x| *x == T::zero()) || gs.iter().any(|x| *x == T::zero())) {
            return false;
        }
        let tol = T::epsilon() * T::lit(1024.0);
        (1..n.saturating_sub(1)).all(|i| {
            let lhs = gs[i - 1];
            let rhs = g[i] * ur[i - 1];
            (lhs - rhs).abs() <= tol * lhs.abs().max(rhs.abs())
        })
    }

    /// Representation of `Mᵀ`. Requires [`Self::is_cross_compatible`].
    ///
    /// Lower part: diagonal `γ`, ratios `γ'[i]/γ[i]`. Upper part:
    /// superdiagonal `γ[i]·r[i]`, ratios `γ[i]·r[i]/γ[i+1]`.
    pub fn transpose(&self) -> Result<Self> {
        if !self.is_cross_compatible() {
            return Err(Error::NotCrossCompatible);
        }
        let n = self.n();
        let (g, lr, gs) = (self.gamma(), self.lower_ratios(), self.gamma_sup());
        let t_lr: Vec<T> = (0..n.saturating_sub(1)).map(|i| gs[i] / g[i]).collect();
        let t_gs: Vec<T> = (0..n.saturating_sub(1)).map(|i| g[i] * lr[i]).collect();
        let t_ur: Vec<T> = (0..n.saturating_sub(2)).map(|k| g[k] * lr[k] / g[k + 1]).collect();
        Ok(Self::from_parts_unchecked(g.to_vec(), t_lr, t_gs, t_ur))
    }

    /// `Mᵀ y` in O(N).
    pub fn matvec_transpose(&self, y: &[T]) -> Result<Vec<T>> {
        self.transpose()?.matvec(y)
    }

    /// Elementwise (Hadamard) product; acts vector-wise on the representation.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        check_len(self.n(), other.n())?;
        let mul = |a: &[T], b: &[T]| -> Vec<T> { a.iter().zip(b).map(|(&x, &y)| x * y).collect() };
        Ok(Self::from_parts_unchecked(
            mul(self.gamma(), other.gamma()),
            mul(self.lower_ratios(), other.lower_ratios()),
            mul(self.gamma_sup(), other.gamma_sup()),
            mul(self.upper_ratios(), other.upper_ratios()),
        ))
    }

    /// Hadamard inverse: elementwise reciprocal of all four vectors.
    pub fn hadamard_inverse(&self) -> Result<Self> {
        nonzero(self.gamma(), "diagonal")?;
        nonzero(self.gamma_sup(), "superdiagonal")?;
        let inv = |a: &[T]| -> Vec<T> { a.iter().map(|&x| x.recip()).collect() };
        Ok(Self::from_parts_unchecked(
            inv(self.gamma()),
            inv(self.lower_ratios()),
            inv(self.gamma_sup()),
            inv(self.upper_ratios()),
        ))
    }

    /// `diag(x) · M`.
    pub fn scale_rows(&self, x: &[T]) -> Result<Self> {
        check_len(self.n(), x.len())?;
        nonzero(x, "row scaling")?;
        let n = self.n();
        let gamma = self.gamma().iter().zip(x).map(|(&g, &xi)| g * xi).collect();
        let lr = (0..n.saturating_sub(1)).map(|i| self.lower_ratios()[i] * x[i + 1] / x[i]).collect();
        let gs = (0..n.saturating_sub(1)).map(|i| self.gamma_sup()[i] * x[i]).collect();
        let ur = (0..n.saturating_sub(2)).map(|i| self.upper_ratios()[i] * x[i] / x[i + 1]).collect();
        Ok(Self::from_parts_unchecked(gamma, lr, gs, ur))
    }

    /// `M · diag(x)`.
    pub fn scale_cols(&self, x: &[T]) -> Result<Self> {
        check_len(self.n(), x.len())?;
        nonzero(x, "column scaling")?;
        let n = self.n();
        let gamma = self.gamma().iter().zip(x).map(|(&g, &xi)| g * xi).collect();
        let gs = (0..n.saturating_sub(1)).map(|j| self.gamma_sup()[j] * x[j + 1]).collect();
        Ok(Self::from_parts_unchecked(gamma, self.lower_ratios().to_vec(), gs, self.upper_ratios().to_vec()))
    }

    /// `diag(x) · M · diag(z)`.
    pub fn scale(&self, x: &[T], z: &[T]) -> Result<Self> {
        self.scale_rows(x)?.scale_cols(z)
    }

    /// Row sums `M 1`.
    pub fn row_sums(&self) -> Vec<T> {
        let ones = vec![T::one(); self.n()];
        let mut out = vec![T::zero(); self.n()];
        cmv_kernel(self.gamma(), self.lower_ratios(), self.gamma_sup(), self.upper_ratios(), &ones, &mut out, &mut ());
        out
    }

    pub fn is_finite(&self) -> bool {
        [self.gamma(), self.lower_ratios(), self.gamma_sup(), self.upper_ratios()]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// In-place `M ← K_λ ⊙ (diag(x) · M · diag(z))` where `K_λ[i][j] = λ^{|i-j|}`.
///
/// One outer step of the proximal iteration on a single representation.
pub(crate) fn scale_hadamard_kernel_in_place<T: Scalar>(m: &mut ColtRepr<T>, x: &[T], z: &[T], lambda: T) {
    let n = m.n();
    let ColtRepr { lower, upper } = m;
    for i in 0..n.saturating_sub(1) {
        lower.ratios[i] = lambda * lower.ratios[i] * (x[i + 1] / x[i]);
        upper.gamma_sup[i] = lambda * upper.gamma_sup[i] * x[i] * z[i + 1];
    }
    for i in 0..n.saturating_sub(2) {
        upper.ratios[i] = lambda * upper.ratios[i] * (x[i] / x[i + 1]);
    }
    for i in 0..n {
        lower.gamma[i] = lower.gamma[i] * x[i] * z[i];
    }
}

pub fn lcolt_to_dense<T: Scalar>(m: &LColtRepr<T>) -> Result<DenseMatrix<T>> {
    m.to_dense()
}

pub fn lcmv<T: Scalar>(m: &LColtRepr<T>, y: &[T]) -> Result<Vec<T>> {
    m.matvec(y)
}

pub fn ucmv<T: Scalar>(m: &UColtRepr<T>, y: &[T]) -> Result<Vec<T>> {
    m.matvec(y)
}

pub fn cmv<T: Scalar>(m: &ColtRepr<T>, y: &[T]) -> Result<Vec<T>> {
    m.matvec(y)
}

pub fn cmv_transpose<T: Scalar>(m: &ColtRepr<T>, y: &[T]) -> Result<Vec<T>> {
    m.matvec_transpose(y)
}

pub fn hadamard<T: Scalar>(a: &ColtRepr<T>, b: &ColtRepr<T>) -> Result<ColtRepr<T>> {
    a.hadamard(b)
}

pub fn hadamard_inverse<T: Scalar>(a: &ColtRepr<T>) -> Result<ColtRepr<T>> {
    a.hadamard_inverse()
}

pub fn scale_rows<T: Scalar>(x: &[T], m: &ColtRepr<T>) -> Result<ColtRepr<T>> {
    m.scale_rows(x)
}

pub fn scale_cols<T: Scalar>(m: &ColtRepr<T>, x: &[T]) -> Result<ColtRepr<T>> {
    m.scale_cols(x)
}

pub fn is_cross_compatible<T: Scalar>(m: &ColtRepr<T>) -> bool {
    m.is_cross_compatible()
}

pub fn identity<T: Scalar>(n: usize) -> Result<ColtRepr<T>> {
    ColtRepr::identity(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::OpCount;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn colt(g: &[f64], r: &[f64], gs: &[f64], ur: &[f64]) -> ColtRepr<f64> {
        ColtRepr::from_parts(g.to_vec(), r.to_vec(), gs.to_vec(), ur.to_vec()).unwrap()
    }

    fn kernel(n: usize, lambda: f64) -> ColtRepr<f64> {
        let v = |k: usize| vec![lambda; k];
        ColtRepr::from_parts(vec![1.0; n], v(n - 1), v(n - 1), v(n - 2)).unwrap()
    }

    /// Oracle: dense lower-triangular matrix built from the row-ratio rule
    /// `m[i+1][j] = r[i] m[i][j]`, independent of `LColtRepr::entry`.
    fn lower_by_ratio_rule(g: &[f64], r: &[f64]) -> Vec<Vec<f64>> {
        let n = g.len();
        let mut m = vec![vec![0.0; n]; n];
        for (i, &gi) in g.iter().enumerate() {
            m[i][i] = gi;
        }
        for i in 0..n.saturating_sub(1) {
            let (head, tail) = m.split_at_mut(i + 1);
            for (next, &prev) in tail[0].iter_mut().zip(&head[i][..=i]) {
                *next = r[i] * prev;
            }
        }
        m
    }

    #[test]
    fn lcolt_to_dense_examples() {
        let m = LColtRepr::new(vec![1.0, 2.0, 3.0], vec![2.0, 3.0]).unwrap();
        let d = m.to_dense().unwrap().to_rows();
        assert_eq!(d, vec![vec![1.0, 0.0, 0.0], vec![2.0, 2.0, 0.0], vec![6.0, 6.0, 3.0]]);
        assert_eq!(d, lower_by_ratio_rule(&[1.0, 2.0, 3.0], &[2.0, 3.0]));

        let e = LColtRepr::<f64>::ones(3).to_dense().unwrap().to_rows();
        assert_eq!(e, vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 1.0]]);

        let one = LColtRepr::new(vec![5.0], vec![]).unwrap();
        assert_eq!(one.to_dense().unwrap().to_rows(), vec![vec![5.0]]);
    }

    #[test]
    fn zero_ratio_rejected() {
        assert!(matches!(LColtRepr::new(vec![1.0, 1.0], vec![0.0]), Err(Error::ZeroEntry { .. })));
        assert!(UColtRepr::new(3, vec![1.0, 1.0], vec![0.0]).is_err());
        assert!(LColtRepr::new(vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
        // zero diagonal data is allowed
        assert!(LColtRepr::new(vec![0.0, 1.0], vec![2.0]).is_ok());
    }

    #[test]
    fn lcmv_examples() {
        let m = LColtRepr::new(vec![1.0, 2.0, 3.0], vec![2.0, 3.0]).unwrap();
        assert_eq!(lcmv(&m, &[1.0, 1.0, 1.0]).unwrap(), vec![1.0, 4.0, 15.0]);
        assert_eq!(lcmv(&LColtRepr::ones(3), &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 3.0, 6.0]);
        assert_eq!(lcmv(&m, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(lcmv(&m, &[1.0; 2]).is_err());
    }

    #[test]
    fn ucmv_examples() {
        let m = UColtRepr::new(3, vec![1.0, 2.0], vec![3.0]).unwrap();
        assert_eq!(
            m.to_dense().unwrap().to_rows(),
            vec![vec![0.0, 1.0, 6.0], vec![0.0, 0.0, 2.0], vec![0.0, 0.0, 0.0]]
        );
        assert_eq!(ucmv(&m, &[1.0, 1.0, 1.0]).unwrap(), vec![7.0, 2.0, 0.0]);
        assert_eq!(ucmv(&m, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        let m2 = UColtRepr::new(2, vec![4.0], vec![]).unwrap();
        assert_eq!(ucmv(&m2, &[0.0, 1.0]).unwrap(), vec![4.0, 0.0]);
    }

    #[test]
    fn cmv_examples() {
        let k = kernel(3, 0.5);
        assert_eq!(cmv(&k, &[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.5, 0.25]);

        let lower_only = colt(&[1.0; 3], &[1.0; 2], &[0.0, 0.0], &[1.0]);
        let y = [1.0, 2.0, 3.0];
        assert_eq!(cmv(&lower_only, &y).unwrap(), lcmv(lower_only.lower(), &y).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = ColtRepr::<f64>::random_log_uniform(64, 0.5, 2.0, &mut rng);
        let y: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = cmv(&m, &y).unwrap();
        let slow = m.to_dense().unwrap().matvec(&y).unwrap();
        let scale = slow.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn op_counts_are_exact() {
        for n in [1usize, 2, 3, 10, 100] {
            let m = ColtRepr::<f64>::identity(n.max(2)).unwrap();
            let n = m.n();
            let y = vec![1.0; n];
            let mut c = OpCount::default();
            m.lower().matvec_tally(&y, &mut c).unwrap();
            assert_eq!((c.ratio_steps, c.diag_muls), ((n - 1) as u64, n as u64));
            let mut c = OpCount::default();
            m.upper().matvec_tally(&y, &mut c).unwrap();
            assert_eq!((c.ratio_steps, c.diag_muls), ((n - 2) as u64, (n - 1) as u64));
        }
    }

    #[test]
    fn transpose_of_kernel_is_itself() {
        let k = kernel(6, 0.3);
        assert!(k.is_cross_compatible());
        let y = [1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        let a = cmv_transpose(&k, &y).unwrap();
        let b = cmv(&k, &y).unwrap();
        for (x, z) in a.iter().zip(&b) {
            assert!((x - z).abs() < 1e-15);
        }
    }

    #[test]
    fn transpose_of_scaled_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 8;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let m = scale_rows(&x, &scale_cols(&kernel(n, 0.7), &z).unwrap()).unwrap();
        assert!(m.is_cross_compatible());
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = cmv_transpose(&m, &y).unwrap();
        let slow = m.to_dense().unwrap().matvec_transpose(&y).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        // the transpose representation densifies to the dense transpose
        let t = m.transpose().unwrap().to_dense().unwrap();
        assert!(t.frobenius_dist(&m.to_dense().unwrap().transpose()).unwrap() < 1e-13);
    }

    /// Dense test of "transpose lies in 𝒞ᴺ": lower part of `Mᵀ` has
    /// column-independent row ratios on its nonzero pattern.
    fn dense_transpose_is_colt(m: &ColtRepr<f64>) -> bool {
        let t = m.to_dense().unwrap().transpose();
        let n = t.rows();
        for i in 0..n - 1 {
            let base = t.get(i + 1, i) / t.get(i, i);
            for j in 0..i {
                let ratio = t.get(i + 1, j) / t.get(i, j);
                if (ratio - base).abs() > 1e-10 * base.abs() {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn cross_compatibility_incompatible_example() {
        // Mᵀ rows 1 and 2 are not proportional on their shared columns.
        let m = colt(&[1.0, 1.0, 1.0], &[2.0, 2.0], &[5.0, 1.0], &[1.0]);
        assert!(!dense_transpose_is_colt(&m));
        assert!(!m.is_cross_compatible());
        assert!(matches!(cmv_transpose(&m, &[1.0; 3]), Err(Error::NotCrossCompatible)));
    }

    #[test]
    fn every_two_by_two_transpose_is_representable() {
        // [[1,5],[2,1]]ᵀ = [[1,2],[5,1]] = L-CoLT((1,1),(5)) + U-CoLT((2)).
        let m = colt(&[1.0, 1.0], &[2.0], &[5.0], &[]);
        assert!(m.is_cross_compatible());
        assert_eq!(cmv_transpose(&m, &[1.0, 1.0]).unwrap(), vec![3.0, 6.0]);
    }

    #[test]
    fn cross_compat_predicate_matches_dense_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..200 {
            let n = 3 + trial % 6;
            let mut m = ColtRepr::<f64>::random_log_uniform(n, 0.5, 2.0, &mut rng);
            if trial % 2 == 0 {
                // force compatibility: γ'[i-1] = γ[i] r'[i-1]
                let g = m.gamma().to_vec();
                let ur = m.upper_ratios().to_vec();
                let mut gs = m.gamma_sup().to_vec();
                for i in 1..n - 1 {
                    gs[i - 1] = g[i] * ur[i - 1];
                }
                m = ColtRepr::from_parts(g, m.lower_ratios().to_vec(), gs, ur).unwrap();
            }
            assert_eq!(m.is_cross_compatible(), dense_transpose_is_colt(&m), "trial {trial}");
        }
    }

    #[test]
    fn hadamard_examples() {
        let a = colt(&[1.0, 2.0], &[3.0], &[1.0], &[]);
        let b = colt(&[2.0, 1.0], &[0.5], &[1.0], &[]);
        let d = hadamard(&a, &b).unwrap();
        assert_eq!(d.gamma(), &[2.0, 2.0]);
        assert_eq!(d.lower_ratios(), &[1.5]);
        assert_eq!(d.lower().to_dense().unwrap().to_rows(), vec![vec![2.0, 0.0], vec![3.0, 2.0]]);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = ColtRepr::<f64>::random_log_uniform(32, 0.5, 2.0, &mut rng);
        assert_eq!(hadamard(&m, &identity(32).unwrap()).unwrap(), m);
        let back = hadamard(&m, &hadamard_inverse(&m).unwrap()).unwrap();
        let e = identity::<f64>(32).unwrap().to_dense().unwrap();
        assert!(back.to_dense().unwrap().frobenius_dist(&e).unwrap() < 1e-13);
        assert!(hadamard(&m, &identity(4).unwrap()).is_err());
    }

    #[test]
    fn hadamard_inverse_examples() {
        let a = colt(&[2.0, 4.0], &[2.0], &[8.0], &[]);
        let inv = hadamard_inverse(&a).unwrap();
        assert_eq!(inv.gamma(), &[0.5, 0.25]);
        assert_eq!(inv.lower_ratios(), &[0.5]);
        assert_eq!(inv.gamma_sup(), &[0.125]);
        let id = identity::<f64>(5).unwrap();
        assert_eq!(hadamard_inverse(&id).unwrap(), id);
        let z = colt(&[0.0, 1.0], &[2.0], &[1.0], &[]);
        assert!(matches!(hadamard_inverse(&z), Err(Error::ZeroEntry { .. })));
    }

    #[test]
    fn scaling_examples() {
        let e = colt(&[1.0, 1.0], &[1.0], &[1.0], &[]);
        let r = scale_rows(&[2.0, 3.0], &e).unwrap();
        assert_eq!(r.gamma(), &[2.0, 3.0]);
        assert_eq!(r.lower_ratios(), &[1.5]);
        assert_eq!(r.lower().to_dense().unwrap().to_rows(), vec![vec![2.0, 0.0], vec![3.0, 3.0]]);
        let c = scale_cols(&e, &[2.0, 3.0]).unwrap();
        assert_eq!(c.gamma(), &[2.0, 3.0]);
        assert_eq!(c.lower_ratios(), &[1.0]);
        assert_eq!(c.lower().to_dense().unwrap().to_rows(), vec![vec![2.0, 0.0], vec![2.0, 3.0]]);
        assert_eq!(scale_rows(&[1.0, 1.0], &e).unwrap(), e);
        assert!(scale_rows(&[1.0, 0.0], &e).is_err());
    }

    #[test]
    fn identity_examples() {
        assert_eq!(identity::<f64>(2).unwrap().to_dense().unwrap().to_rows(), vec![vec![1.0; 2]; 2]);
        assert_eq!(identity::<f64>(3).unwrap().to_dense().unwrap().to_rows(), vec![vec![1.0; 3]; 3]);
        assert!(identity::<f64>(1).is_err());
    }

    #[test]
    fn dense_guard() {
        let big = LColtRepr::<f64>::ones(DENSE_LIMIT + 1);
        assert!(matches!(big.to_dense(), Err(Error::DenseGuard { .. })));
    }

    #[test]
    fn works_in_single_precision() {
        let m = ColtRepr::<f32>::from_parts(vec![1.0, 2.0, 3.0], vec![2.0, 3.0], vec![1.0, 2.0], vec![3.0]).unwrap();
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]).unwrap(), vec![8.0, 6.0, 15.0]);
    }
}
