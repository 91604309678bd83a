//! Independent ground truth: closed-form 1D W₁, an exact transportation LP
//! and dense cost matrices. Everything here is dense and desk-scale only.

use std::collections::VecDeque;

use crate::dense::{guard, DenseMatrix, DENSE_LIMIT};
use crate::error::{check_len, Error, Result};
use crate::Scalar;

/// Largest side the LP oracle accepts.
pub const LP_LIMIT: usize = 64;

/// A uniform grid with ℓ1 ground cost. 2D nodes are numbered with the
/// inner (`n`, spacing `h1`) index varying fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grid<T> {
    OneD { n: usize, h: T },
    TwoD { n: usize, m: usize, h1: T, h2: T },
}

impl<T: Scalar> Grid<T> {
    pub fn len(&self) -> usize {
        match *self {
            Grid::OneD { n, .. } => n,
            Grid::TwoD { n, m, .. } => n * m,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// ℓ1 distance between nodes `a` and `b`.
    pub fn distance(&self, a: usize, b: usize) -> T {
        let d = |x: usize, y: usize| T::lit(x.abs_diff(y) as f64);
        match *self {
            Grid::OneD { h, .. } => d(a, b) * h,
            Grid::TwoD { n, h1, h2, .. } => d(a % n, b % n) * h1 + d(a / n, b / n) * h2,
        }
    }
}

/// `C_ij = ‖x_i − x_j‖₁` on the grid.
pub fn dense_cost_matrix<T: Scalar>(grid: &Grid<T>) -> Result<DenseMatrix<T>> {
    let len = grid.len();
    guard(len, DENSE_LIMIT)?;
    Ok(DenseMatrix::from_fn(len, len, |i, j| grid.distance(i, j)))
}

fn check_mass<T: Scalar>(u: &[T], v: &[T]) -> Result<()> {
    let (su, sv): (T, T) = (u.iter().copied().sum(), v.iter().copied().sum());
    let tol = T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
    if (su - sv).abs() > tol * su.abs().max(T::one()) {
        return Err(Error::InvalidArgument(format!("unequal mass: {su} vs {sv}")));
    }
    if u.iter().chain(v).any(|x| !(x.is_finite() && *x >= T::zero())) {
        return Err(Error::InvalidArgument("marginals must be nonnegative and finite".into()));
    }
    Ok(())
}

/// `h · Σ_k |U_k − V_k|` with `U`, `V` the cumulative sums.
pub fn w1_1d_exact<T: Scalar>(u: &[T], v: &[T], h: T) -> Result<T> {
    check_len(u.len(), v.len())?;
    check_mass(u, v)?;
    let (mut cu, mut cv, mut acc) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in u.iter().zip(v) {
        cu = cu + a;
        cv = cv + b;
        acc = acc + (cu - cv).abs();
    }
    Ok(acc * h)
}

/// Exact optimum of a balanced transportation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub plan: DenseMatrix<f64>,
    /// Row potentials; `row_duals[i] + col_duals[j] = C_ij` on the basis.
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
    /// Basic cells `(i, j)`, `n + m − 1` of them.
    pub basis: Vec<(usize, usize)>,
    pub iterations: usize,
    /// Whether the Bland fallback was engaged.
    pub used_bland: bool,
}

impl LpSolution {
    /// Smallest reduced cost `C_ij − f_i − g_j` over all cells; nonnegative
    /// (up to rounding) certifies optimality.
    pub fn min_reduced_cost(&self, cost: &DenseMatrix<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for (i, f) in self.row_duals.iter().enumerate() {
            for (j, g) in self.col_duals.iter().enumerate() {
                best = best.min(cost.get(i, j) - f - g);
            }
        }
        best
    }
}

struct Tree {
    n: usize,
    adj: Vec<Vec<usize>>,
}

impl Tree {
    // rows are nodes 0..n, columns n..n+m
    fn build(n: usize, m: usize, basis: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n + m];
        for &(i, j) in basis {
            adj[i].push(n + j);
            adj[n + j].push(i);
        }
        Self { n, adj }
    }

    fn duals(&self, cost: &DenseMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let total = self.adj.len();
        let mut pot = vec![f64::NAN; total];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(a) = queue.pop_front() {
            for &b in &self.adj[a] {
                if pot[b].is_nan() {
                    let c = if a < self.n { cost.get(a, b - self.n) } else { cost.get(b, a - self.n) };
                    pot[b] = c - pot[a];
                    queue.push_back(b);
                }
            }
        }
        if pot.iter().any(|p| p.is_nan()) {
            return Err(Error::Numerical("transportation basis is not a spanning tree".into()));
        }
        let cols = pot.split_off(self.n);
        Ok((pot, cols))
    }

    /// Node sequence of the tree path from `from` to `to`.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let mut parent = vec![usize::MAX; self.adj.len()];
        parent[from] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(a) = queue.pop_front() {
            if a == to {
                break;
            }
            for &b in &self.adj[a] {
                if parent[b] == usize::MAX {
                    parent[b] = a;
                    queue.push_back(b);
                }
            }
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = parent[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }
}

/// Exact W₁ by the transportation simplex: northwest-corner start, u–v
/// dual pricing (Dantzig), pivoting around the unique basis cycle. Ties
/// are broken by lowest `(i, j)`. After a run of degenerate pivots pricing
/// switches to Bland's rule, which cannot cycle.
pub fn lp_transport_exact(u: &[f64], v: &[f64], cost: &DenseMatrix<f64>) -> Result<LpSolution> {
    let (n, m) = (u.len(), v.len());
    check_len(n, cost.rows())?;
    check_len(m, cost.cols())?;
    guard(n, LP_LIMIT)?;
    guard(m, LP_LIMIT)?;
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("empty marginal".into()));
    }
    check_mass(u, v)?;

    let mut x = DenseMatrix::<f64>::zeros(n, m);
    let mut in_basis = vec![false; n * m];
    let mut basis = Vec::with_capacity(n + m - 1);
    {
        let (mut s, mut d) = (u.to_vec(), v.to_vec());
        let (mut i, mut j) = (0, 0);
        while basis.len() < n + m - 1 {
            let q = s[i].min(d[j]);
            x.set(i, j, q);
            basis.push((i, j));
            in_basis[i * m + j] = true;
            s[i] -= q;
            d[j] -= q;
            if i == n - 1 {
                j += 1;
            } else if j == m - 1 || s[i] <= d[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let scale = cost.max_abs().max(1.0);
    let tol = 1e-12 * scale;
    let max_iter = 50 * (n + m) * (n + m) + 1000;
    let mut degenerate_run = 0usize;
    let mut used_bland = false;
    let mut iterations = 0;

    loop {
        let tree = Tree::build(n, m, &basis);
        let (f, g) = tree.duals(cost)?;

        let bland = degenerate_run > n + m;
        used_bland |= bland;
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -tol;
        'scan: for i in 0..n {
            for j in 0..m {
                if in_basis[i * m + j] {
                    continue;
                }
                let rc = cost.get(i, j) - f[i] - g[j];
                if rc < best {
                    entering = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = rc;
                }
            }
        }
        let Some((p, q)) = entering else {
            let objective = cost.frobenius_dot(&x)?;
            return Ok(LpSolution {
                objective,
                plan: x,
                row_duals: f,
                col_duals: g,
                basis,
                iterations,
                used_bland,
            });
        };
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::Numerical(format!("transportation simplex did not terminate in {max_iter} pivots")));
        }

        // cycle: (p,q) then the tree path from column q back to row p
        let nodes = tree.path(n + q, p);
        let cells: Vec<(usize, usize)> = nodes
            .windows(2)
            .map(|w| if w[0] < n { (w[0], w[1] - n) } else { (w[1], w[0] - n) })
            .collect();
        let mut leave = usize::MAX;
        let mut theta = f64::INFINITY;
        for (k, &(i, j)) in cells.iter().enumerate().step_by(2) {
            let val = x.get(i, j);
            let better = val < theta || (val == theta && (i, j) < cells[leave]);
            if better {
                theta = val;
                leave = k;
            }
        }
        for (k, &(i, j)) in cells.iter().enumerate() {
            let val = if k % 2 == 0 { x.get(i, j) - theta } else { x.get(i, j) + theta };
            x.set(i, j, if k == leave { 0.0 } else { val.max(0.0) });
        }
        x.set(p, q, theta);
        degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };

        let out = cells[leave];
        let pos = basis.iter().position(|&c| c == out).expect("leaving cell is basic");
        basis[pos] = (p, q);
        in_basis[out.0 * m + out.1] = false;
        in_basis[p * m + q] = true;
    }
}
