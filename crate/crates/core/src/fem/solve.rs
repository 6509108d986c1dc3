//! Sparse linear solvers: Jacobi-preconditioned CG for the symmetric positive
//! definite chemical systems, and for general systems a banded LU on a
//! reverse Cuthill-McKee ordering or BiCGStab with ILU(0).

use std::collections::VecDeque;

use super::sparse::CsrMatrix;
use crate::scalar::{dot, norm2, Real};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("singular system (zero pivot at row {0})")]
    Singular(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in linear solve")]
    NonFinite,
}

/// Stopping rule `||A x - b|| <= tol ||b||` with an iteration cap
/// (`None` means `10 n`).
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    pub tol: T,
    pub max_iter: Option<usize>,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iter: None,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    fn cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n.max(1))
    }
}

/// Unknown count above which general systems are not factorised directly.
pub const DIRECT_SOLVE_LIMIT: usize = 20_000;
const BAND_STORAGE_LIMIT: usize = 40_000_000;

fn relative_residual<T: Real>(a: &CsrMatrix<T>, x: &[T], b: &[T]) -> T {
    let ax = a.mul_vec(x);
    let r: Vec<T> = ax.iter().zip(b).map(|(p, q)| *q - *p).collect();
    let nb = norm2(b);
    if nb == T::zero() {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

fn check_square<T: Real>(a: &CsrMatrix<T>, b: &[T]) -> Result<(), SolveError> {
    if a.n_rows() != a.n_cols() || a.n_rows() != b.len() {
        return Err(SolveError::Dimension(format!(
            "matrix {}x{}, rhs {}",
            a.n_rows(),
            a.n_cols(),
            b.len()
        )));
    }
    Ok(())
}

/// Jacobi-preconditioned conjugate gradients. `x` holds the initial guess on
/// entry and the solution on exit. Returns the iteration count.
pub fn pcg<T: Real>(a: &CsrMatrix<T>, b: &[T], x: &mut [T], opts: &SolverOptions<T>) -> Result<usize, SolveError> {
    check_square(a, b)?;
    let n = b.len();
    let nb = norm2(b);
    if nb == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(0);
    }
    let inv_diag: Vec<T> = a
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d > T::zero() {
                Ok(T::one() / d)
            } else {
                Err(SolveError::Singular(i))
            }
        })
        .collect::<Result<_, _>>()?;
    let mut r: Vec<T> = a.mul_vec(x).iter().zip(b).map(|(ax, bi)| *bi - *ax).collect();
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(ri, di)| *ri * *di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let target = opts.tol * nb;
    let cap = opts.cap(n);
    for it in 0..=cap {
        let rn = norm2(&r);
        if !rn.is_finite() {
            return Err(SolveError::NonFinite);
        }
        if rn <= target {
            return Ok(it);
        }
        if it == cap {
            return Err(SolveError::NotConverged {
                iterations: it,
                residual: (rn / nb).to_f64_lossy(),
            });
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(SolveError::Singular(0));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    unreachable!()
}

/// Incomplete LU factorisation with the sparsity of the matrix itself.
#[derive(Debug, Clone)]
pub struct Ilu0<T> {
    lu: CsrMatrix<T>,
    diag_pos: Vec<usize>,
}

impl<T: Real> Ilu0<T> {
    pub fn new(a: &CsrMatrix<T>) -> Result<Self, SolveError> {
        let n = a.n_rows();
        let mut lu = a.clone();
        let row_ptr = lu.row_ptr().to_vec();
        let cols = lu.col_idx().to_vec();
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            for p in row_ptr[i]..row_ptr[i + 1] {
                if cols[p] == i {
                    diag_pos[i] = p;
                }
            }
            if diag_pos[i] == usize::MAX {
                return Err(SolveError::Singular(i));
            }
        }
        let mut work = vec![usize::MAX; n];
        let vals = lu.values_mut();
        for i in 0..n {
            for p in row_ptr[i]..row_ptr[i + 1] {
                work[cols[p]] = p;
            }
            for p in row_ptr[i]..row_ptr[i + 1] {
                let k = cols[p];
                if k >= i {
                    break;
                }
                let pivot = vals[diag_pos[k]];
                if pivot == T::zero() {
                    return Err(SolveError::Singular(k));
                }
                let m = vals[p] / pivot;
                vals[p] = m;
                for q in diag_pos[k] + 1..row_ptr[k + 1] {
                    let w = work[cols[q]];
                    if w != usize::MAX {
                        let u = vals[q];
                        vals[w] -= m * u;
                    }
                }
            }
            for p in row_ptr[i]..row_ptr[i + 1] {
                work[cols[p]] = usize::MAX;
            }
            if vals[diag_pos[i]] == T::zero() {
                return Err(SolveError::Singular(i));
            }
        }
        Ok(Self { lu, diag_pos })
    }

    pub fn apply(&self, r: &[T], z: &mut [T]) {
        let n = r.len();
        let vals = self.lu.values();
        let cols = self.lu.col_idx();
        let rp = self.lu.row_ptr();
        for i in 0..n {
            let mut s = r[i];
            for p in rp[i]..self.diag_pos[i] {
                s -= vals[p] * z[cols[p]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for p in self.diag_pos[i] + 1..rp[i + 1] {
                s -= vals[p] * z[cols[p]];
            }
            z[i] = s / vals[self.diag_pos[i]];
        }
    }
}

/// Right-preconditioned BiCGStab with ILU(0).
pub fn bicgstab<T: Real>(
    a: &CsrMatrix<T>,
    precond: &Ilu0<T>,
    b: &[T],
    x: &mut [T],
    opts: &SolverOptions<T>,
) -> Result<usize, SolveError> {
    check_square(a, b)?;
    let n = b.len();
    let nb = norm2(b);
    if nb == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(0);
    }
    let target = opts.tol * nb;
    let cap = opts.cap(n);
    let mut r: Vec<T> = a.mul_vec(x).iter().zip(b).map(|(ax, bi)| *bi - *ax).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut y = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut zz = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    for it in 0..cap {
        let rn = norm2(&r);
        if !rn.is_finite() {
            return Err(SolveError::NonFinite);
        }
        if rn <= target {
            return Ok(it);
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == T::zero() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond.apply(&p, &mut y);
        a.mul_vec_into(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == T::zero() {
            break;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= target {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(it + 1);
        }
        precond.apply(&s, &mut zz);
        a.mul_vec_into(&zz, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > T::zero() { dot(&t, &s) / tt } else { T::zero() };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zz[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega == T::zero() {
            break;
        }
    }
    let res = relative_residual(a, x, b);
    if res <= opts.tol {
        return Ok(cap);
    }
    Err(SolveError::NotConverged {
        iterations: cap,
        residual: res.to_f64_lossy(),
    })
}

/// Reverse Cuthill-McKee ordering of the symmetrised sparsity graph.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee<T: Real>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.n_rows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // Returns (eccentricity, a last-level node of minimum degree).
        let mut dist = vec![usize::MAX; n];
        let mut q = VecDeque::from([start]);
        dist[start] = 0;
        let mut far = (0, start);
        while let Some(u) = q.pop_front() {
            let d = dist[u];
            if d > far.0 || (d == far.0 && degree[u] < degree[far.1]) {
                far = (d, u);
            }
            for &w in &adj[u] {
                if !visited[w] && dist[w] == usize::MAX {
                    dist[w] = d + 1;
                    q.push_back(w);
                }
            }
        }
        far
    };

    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .unwrap();
        // Pseudo-peripheral start node.
        let mut start = seed;
        let mut ecc = bfs_levels(start, &visited).0;
        loop {
            let (e, cand) = bfs_levels(start, &visited);
            let (e2, _) = bfs_levels(cand, &visited);
            if e2 > ecc.max(e) {
                ecc = e2;
                start = cand;
            } else {
                if e2 >= e {
                    start = cand;
                }
                break;
            }
        }
        let mut q = VecDeque::from([start]);
        visited[start] = true;
        while let Some(u) = q.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| degree[w]);
            for w in next {
                visited[w] = true;
                q.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Banded LU factorisation with partial pivoting of a permuted sparse matrix.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row `i` stores columns `i - kl ..= i + kl + ku` of the factor `U`.
    band: Vec<T>,
    lower: Vec<T>,
    pivots: Vec<usize>,
    perm: Vec<usize>,
}

impl<T: Real> BandedLu<T> {
    /// Band storage needed for `a` under RCM ordering, in scalars.
    pub fn storage_estimate(a: &CsrMatrix<T>) -> (Vec<usize>, usize, usize) {
        let perm = reverse_cuthill_mckee(a);
        let bw = Self::bandwidth(a, &perm);
        let n = a.n_rows();
        (perm, bw, n * (3 * bw + 1) + n * bw)
    }

    fn bandwidth(a: &CsrMatrix<T>, perm: &[usize]) -> usize {
        let n = a.n_rows();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut bw = 0;
        for i in 0..n {
            for &j in a.row(i).0 {
                bw = bw.max(inv[i].abs_diff(inv[j]));
            }
        }
        bw
    }

    pub fn factor(a: &CsrMatrix<T>) -> Result<Self, SolveError> {
        let (perm, bw, _) = Self::storage_estimate(a);
        Self::factor_with(a, perm, bw)
    }

    fn factor_with(a: &CsrMatrix<T>, perm: Vec<usize>, bw: usize) -> Result<Self, SolveError> {
        let n = a.n_rows();
        if a.n_cols() != n {
            return Err(SolveError::Dimension("matrix not square".into()));
        }
        let (kl, ku) = (bw, bw);
        let width = 2 * kl + ku + 1;
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut band = vec![T::zero(); n * width];
        for (new_i, &old_i) in perm.iter().enumerate() {
            let (cols, vals) = a.row(old_i);
            for (&old_j, &v) in cols.iter().zip(vals) {
                let j = inv[old_j];
                band[new_i * width + (j + kl - new_i)] += v;
            }
        }
        let mut lower = vec![T::zero(); n * kl.max(1)];
        let mut pivots = vec![0; n];
        let at = |i: usize, j: usize| i * width + (j + kl - i);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = band[at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = band[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(SolveError::Singular(perm[k]));
            }
            pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    band.swap(at(k, j), at(p, j));
                }
            }
            let pivot = band[at(k, k)];
            for i in k + 1..=last_row {
                let m = band[at(i, k)] / pivot;
                lower[k * kl + (i - k - 1)] = m;
                if m != T::zero() {
                    band[at(i, k)] = T::zero();
                    for j in k + 1..=last_col {
                        let u = band[at(k, j)];
                        band[at(i, j)] -= m * u;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            band,
            lower,
            pivots,
            perm,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, SolveError> {
        let n = self.n;
        if b.len() != n {
            return Err(SolveError::Dimension(format!("rhs {} for {n} unknowns", b.len())));
        }
        let (kl, ku) = (self.kl, self.ku);
        let width = 2 * kl + ku + 1;
        let mut y: Vec<T> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk != T::zero() {
                for i in k + 1..=(k + kl).min(n - 1) {
                    y[i] -= self.lower[k * kl + (i - k - 1)] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let row = &self.band[k * width..(k + 1) * width];
            let mut s = y[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= row[j + kl - k] * y[j];
            }
            y[k] = s / row[kl];
        }
        let mut x = vec![T::zero(); n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::NonFinite);
        }
        Ok(x)
    }
}

/// Reusable solver for a fixed general (possibly nonsymmetric) matrix.
#[derive(Debug, Clone)]
pub enum FactoredSystem<T> {
    Direct { matrix: CsrMatrix<T>, lu: BandedLu<T> },
    Iterative { matrix: CsrMatrix<T>, ilu: Ilu0<T> },
}

impl<T: Real> FactoredSystem<T> {
    /// Direct banded factorisation for up to [`DIRECT_SOLVE_LIMIT`] unknowns
    /// (memory permitting), ILU(0)-preconditioned BiCGStab otherwise.
    pub fn new(matrix: CsrMatrix<T>) -> Result<Self, SolveError> {
        let n = matrix.n_rows();
        if n <= DIRECT_SOLVE_LIMIT {
            let (perm, bw, storage) = BandedLu::storage_estimate(&matrix);
            if storage <= BAND_STORAGE_LIMIT {
                let lu = BandedLu::factor_with(&matrix, perm, bw)?;
                return Ok(Self::Direct { matrix, lu });
            }
        }
        let ilu = Ilu0::new(&matrix)?;
        Ok(Self::Iterative { matrix, ilu })
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        match self {
            Self::Direct { matrix, .. } | Self::Iterative { matrix, .. } => matrix,
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, Self::Direct { .. })
    }

    /// Solves to relative residual `tol`; `guess` seeds the iterative path.
    pub fn solve(&self, b: &[T], guess: Option<&[T]>, tol: T) -> Result<Vec<T>, SolveError> {
        match self {
            Self::Direct { matrix, lu } => {
                let mut x = lu.solve(b)?;
                // One step of iterative refinement.
                let ax = matrix.mul_vec(&x);
                let r: Vec<T> = b.iter().zip(&ax).map(|(bi, axi)| *bi - *axi).collect();
                if norm2(&r) > tol * norm2(b) {
                    let dx = lu.solve(&r)?;
                    x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += *d);
                }
                Ok(x)
            }
            Self::Iterative { matrix, ilu } => {
                let mut x = guess.map_or_else(|| vec![T::zero(); b.len()], <[T]>::to_vec);
                let opts = SolverOptions { tol, max_iter: None };
                bicgstab(matrix, ilu, b, &mut x, &opts)?;
                Ok(x)
            }
        }
    }
}

/// Solves `A x = rhs` to relative residual `tol`. Symmetric positive definite
/// systems use preconditioned CG; others are factorised or solved by BiCGStab.
pub fn solve_linear<T: Real>(a: &CsrMatrix<T>, rhs: &[T], tol: T, symmetric_pd: bool) -> Result<Vec<T>, SolveError> {
    check_square(a, rhs)?;
    if symmetric_pd {
        let mut x = vec![T::zero(); rhs.len()];
        pcg(a, rhs, &mut x, &SolverOptions { tol, max_iter: None })?;
        Ok(x)
    } else {
        FactoredSystem::new(a.clone())?.solve(rhs, None, tol)
    }
}
