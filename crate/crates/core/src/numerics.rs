//! Dense symmetric eigendecomposition, continuous Lyapunov equations and the
//! Laplacian pseudoinverse.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Matrix, Result};

/// Relative symmetry tolerance accepted by [`eig_sym`].
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Off-diagonal Frobenius tolerance, relative to `‖M‖_F`.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Eigenvalues with `|λ| < ZERO_EIG_TOL * max(1, λ_max)` count as zero.
pub const ZERO_EIG_TOL: f64 = 1e-9;
/// Largest state dimension handled by the dense vectorized Lyapunov solve.
pub const LYAPUNOV_DIM_CAP: usize = 60;

/// `M = U diag(λ) Uᵀ` with eigenvalues ascending; column `k` of `U` pairs with `λ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> Matrix {
        let u = &self.eigenvectors;
        let n = u.rows();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = (0..n).map(|k| u[(i, k)] * self.eigenvalues[k] * u[(j, k)]).sum();
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSolution {
    /// Symmetric solution of `AᵀP + PA = -Q`.
    pub p: Matrix,
    /// `‖AᵀP + PA + Q‖_F`.
    pub residual: f64,
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    if !m.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::NotSymmetric(m.max_asymmetry()));
    }
    Ok(())
}

/// Eigenvalues and orthonormal eigenvectors of a symmetric matrix.
pub fn eig_sym(m: &Matrix) -> Result<SpectralDecomposition> {
    check_symmetric(m)?;
    let (eigenvalues, eigenvectors) = jacobi(m.symmetrized(), true)?;
    Ok(SpectralDecomposition { eigenvalues, eigenvectors: eigenvectors.unwrap() })
}

/// Ascending eigenvalues only; skips eigenvector accumulation.
pub fn eigvals_sym(m: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    Ok(jacobi(m.symmetrized(), false)?.0)
}

/// Round-robin pairing for the parallel-order cyclic Jacobi method: every
/// round is a set of disjoint index pairs and the `m - 1` rounds together
/// cover all pairs once.
fn round_robin(n: usize) -> Vec<Vec<(usize, usize)>> {
    let m = n + n % 2;
    let mut players: Vec<usize> = (0..m).collect();
    let mut rounds = Vec::with_capacity(m.saturating_sub(1));
    for _ in 0..m.saturating_sub(1) {
        let mut pairs = Vec::with_capacity(m / 2);
        for k in 0..m / 2 {
            let (a, b) = (players[k], players[m - 1 - k]);
            if a < n && b < n {
                pairs.push((a.min(b), a.max(b)));
            }
        }
        rounds.push(pairs);
        players[1..].rotate_right(1);
    }
    rounds
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for (j, v) in a.row(i).iter().enumerate() {
            if i != j {
                s += v * v;
            }
        }
    }
    libm::sqrt(s)
}

/// Cyclic Jacobi with a parallel (round-robin) ordering. Each round applies a
/// block of disjoint rotations `A <- Jᵀ A J` as one row pass and one column
/// pass, so all memory access runs along rows.
fn jacobi(mut a: Matrix, vectors: bool) -> Result<(Vec<f64>, Option<Matrix>)> {
    let n = a.rows();
    let mut v = vectors.then(|| Matrix::identity(n));
    let scale = a.frobenius_norm();
    let rounds = round_robin(n);
    let mut converged = scale == 0.0 || n < 2;
    let mut rot: Vec<(usize, usize, f64, f64)> = Vec::with_capacity(n / 2 + 1);

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if converged || off_diagonal_norm(&a) <= JACOBI_TOL * scale {
            converged = true;
            break;
        }
        for pairs in &rounds {
            rot.clear();
            for &(p, q) in pairs {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                let g = 100.0 * apq.abs();
                if g + app.abs() == app.abs() && g + aqq.abs() == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let t = 1.0 / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                rot.push((p, q, c, t * c));
            }
            if rot.is_empty() {
                continue;
            }
            // rows: A <- Jᵀ A
            for &(p, q, c, s) in &rot {
                let (lo, hi) = a.as_mut_slice().split_at_mut(q * n);
                let row_p = &mut lo[p * n..(p + 1) * n];
                let row_q = &mut hi[..n];
                for (x, y) in row_p.iter_mut().zip(row_q.iter_mut()) {
                    let (ap, aq) = (*x, *y);
                    *x = c * ap - s * aq;
                    *y = s * ap + c * aq;
                }
            }
            // columns: A <- A J, V <- V J
            let apply_cols = |m: &mut Matrix| {
                for k in 0..m.rows() {
                    let row = m.row_mut(k);
                    for &(p, q, c, s) in &rot {
                        let (bp, bq) = (row[p], row[q]);
                        row[p] = c * bp - s * bq;
                        row[q] = s * bp + c * bq;
                    }
                }
            };
            apply_cols(&mut a);
            if let Some(v) = v.as_mut() {
                apply_cols(v);
            }
            for &(p, q, _, _) in &rot {
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > JACOBI_TOL * scale {
        return Err(Error::NoConvergence { sweeps: JACOBI_MAX_SWEEPS });
    }

    let diag = a.diagonal();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let eigenvectors = v.map(|v| {
        let mut sorted = Matrix::zeros(n, n);
        for r in 0..n {
            for (new, &old) in order.iter().enumerate() {
                sorted[(r, new)] = v[(r, old)];
            }
        }
        sorted
    });
    Ok((eigenvalues, eigenvectors))
}

/// LU factorization with partial pivoting, stored compactly.
pub(crate) struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub(crate) fn factor(mut a: Matrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
        }
        let n = a.rows();
        let tiny = 1e-14 * a.max_abs().max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, val) = (k..n).map(|i| (i, a[(i, k)].abs())).fold((k, -1.0), |b, x| if x.1 > b.1 { x } else { b });
            if val <= tiny {
                return Err(Error::SingularSystem);
            }
            if piv != k {
                perm.swap(piv, k);
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(piv, j)];
                    a[(piv, j)] = tmp;
                }
            }
            let pivot = a[(k, k)];
            let (upper, lower) = a.as_mut_slice().split_at_mut((k + 1) * n);
            let row_k = &upper[k * n..];
            for row_i in lower.chunks_exact_mut(n) {
                let f = row_i[k] / pivot;
                if f == 0.0 {
                    continue;
                }
                row_i[k] = f;
                for (x, &y) in row_i[k + 1..].iter_mut().zip(&row_k[k + 1..]) {
                    *x -= f * y;
                }
            }
        }
        Ok(Lu { lu: a, perm })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: f64 = (0..i).map(|j| row[j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = (i + 1..n).map(|j| row[j] * x[j]).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch("right-hand side length"));
    }
    Ok(Lu::factor(a.clone())?.solve(b))
}

/// True when the symmetric matrix `m` admits a Cholesky factorization.
pub fn is_positive_definite(m: &Matrix) -> bool {
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let d = m[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if !(d > 0.0) {
            return false;
        }
        let d = libm::sqrt(d);
        l[(j, j)] = d;
        for i in j + 1..n {
            l[(i, j)] = (m[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>()) / d;
        }
    }
    true
}

fn lyapunov_residual(a: &Matrix, p: &Matrix, q: &Matrix) -> f64 {
    let atp = a.tr_matmul(p).expect("square");
    let n = a.rows();
    let mut r = 0.0;
    for i in 0..n {
        for j in 0..n {
            // (PA)_ij = (AᵀP)_ji since P is symmetric
            let v = atp[(i, j)] + atp[(j, i)] + q[(i, j)];
            r += v * v;
        }
    }
    libm::sqrt(r)
}

#[inline]
fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// Solves `AᵀP + PA = -Q` for symmetric `P`.
///
/// Symmetric `A` is handled in its eigenbasis. Otherwise the equation is
/// vectorized over the `n(n+1)/2` independent entries of `P` and solved
/// densely, which limits `n` to [`LYAPUNOV_DIM_CAP`]. A non-symmetric `A`
/// whose symmetric part is not negative definite is checked for stability by
/// also solving with `Q = I` and testing that solution for definiteness.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<LyapunovSolution> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    check_symmetric(q)?;
    let n = a.rows();
    if q.rows() != n {
        return Err(Error::DimensionMismatch("Q must match A"));
    }
    let q = q.symmetrized();

    if a.is_symmetric(SYMMETRY_TOL) {
        let eig = eig_sym(a)?;
        if eig.eigenvalues.iter().any(|&l| l >= 0.0) {
            return Err(Error::NotHurwitz);
        }
        let u = &eig.eigenvectors;
        let mut qh = u.tr_matmul(&q)?.matmul(u)?;
        for i in 0..n {
            for j in 0..n {
                qh[(i, j)] /= -(eig.eigenvalues[i] + eig.eigenvalues[j]);
            }
        }
        let p = u.matmul(&qh)?.matmul(&u.transpose())?.symmetrized();
        let residual = lyapunov_residual(a, &p, &q);
        return Ok(LyapunovSolution { p, residual });
    }

    if n > LYAPUNOV_DIM_CAP {
        return Err(Error::DimensionCap { dim: n, cap: LYAPUNOV_DIM_CAP });
    }
    let sym_part_stable = eigvals_sym(&a.symmetrized())?.last().is_some_and(|&l| l < 0.0);

    let m = n * (n + 1) / 2;
    let mut k = Matrix::zeros(m, m);
    for i in 0..n {
        for j in i..n {
            let row = sym_index(n, i, j);
            for l in 0..n {
                // (AᵀP)_ij = Σ_l A_li P_lj,  (PA)_ij = Σ_l P_il A_lj
                k[(row, sym_index(n, l, j))] += a[(l, i)];
                k[(row, sym_index(n, i, l))] += a[(l, j)];
            }
        }
    }
    let lu = match Lu::factor(k) {
        Ok(lu) => lu,
        // λ_i + λ_j = 0 for some pair: not asymptotically stable
        Err(Error::SingularSystem) if !sym_part_stable => return Err(Error::NotHurwitz),
        Err(e) => return Err(e),
    };
    let unpack = |x: &[f64]| {
        let mut p = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = x[sym_index(n, i, j)];
                p[(i, j)] = v;
                p[(j, i)] = v;
            }
        }
        p
    };
    if !sym_part_stable {
        let mut rhs = vec![0.0; m];
        for i in 0..n {
            rhs[sym_index(n, i, i)] = -1.0;
        }
        if !is_positive_definite(&unpack(&lu.solve(&rhs))) {
            return Err(Error::NotHurwitz);
        }
    }
    let mut rhs = vec![0.0; m];
    for i in 0..n {
        for j in i..n {
            rhs[sym_index(n, i, j)] = -q[(i, j)];
        }
    }
    let p = unpack(&lu.solve(&rhs));
    let residual = lyapunov_residual(a, &p, &q);
    Ok(LyapunovSolution { p, residual })
}

/// Moore–Penrose pseudoinverse of a connected graph's Laplacian.
pub fn pinv_laplacian(l: &Matrix) -> Result<Matrix> {
    check_symmetric(l)?;
    let n = l.rows();
    let row_sum_tol = 1e-9 * l.inf_norm().max(f64::MIN_POSITIVE);
    if (0..n).any(|i| l.row(i).iter().sum::<f64>().abs() > row_sum_tol) {
        return Err(Error::NotLaplacian("row sums are not zero"));
    }
    let eig = eig_sym(l)?;
    let lmax = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let thr = ZERO_EIG_TOL * lmax.max(1.0);
    let zero_modes = eig.eigenvalues.iter().filter(|v| v.abs() < thr).count();
    if zero_modes != 1 {
        return Err(Error::Disconnected { zero_modes });
    }
    let u = &eig.eigenvectors;
    let mut out = Matrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() < thr {
            continue;
        }
        let inv = 1.0 / lambda;
        for i in 0..n {
            let ui = u[(i, k)] * inv;
            if ui == 0.0 {
                continue;
            }
            let row = out.row_mut(i);
            for (j, o) in row.iter_mut().enumerate() {
                *o += ui * u[(j, k)];
            }
        }
    }
    Ok(out.symmetrized())
}
