//! One-sided (Hestenes) Jacobi SVD.
//!
//! Used for every SVD the pipeline needs: the bordered matrix of the rank-one
//! update, the per-mode temporal snapshot matrices, and batch oracles at test
//! scale. Jacobi keeps small singular values to high relative accuracy, which
//! the truncation test of the incremental SVD relies on.

use super::{vec_ops, DenseMatrix, LinalgError};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `M = U diag(sigma) Vᵀ` with `U: m x l`, `V: n x l`, `l = min(m, n)`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, &s) in self.sigma.iter().enumerate() {
            vec_ops::scale(s, us.col_mut(j));
        }
        us.matmul(&self.v.transpose())
    }
}

/// Thin SVD with singular values sorted non-increasing.
///
/// Sign convention: in every left singular vector the entry of largest
/// magnitude (first one on ties) is non-negative; the matching right vector
/// is flipped with it.
pub fn thin_svd(m: &DenseMatrix) -> Result<Svd, LinalgError> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(LinalgError::Shape {
            op: "thin_svd",
            detail: format!("empty {}x{} input", m.rows(), m.cols()),
        });
    }
    if !m.is_finite() {
        let pos = m.as_slice().iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(LinalgError::NonFinite {
            row: pos % m.rows(),
            col: pos / m.rows(),
        });
    }
    let mut svd = if m.rows() >= m.cols() {
        jacobi_tall(m.clone())?
    } else {
        let t = jacobi_tall(m.transpose())?;
        Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        }
    };
    normalize_signs(&mut svd);
    Ok(svd)
}

fn jacobi_tall(mut a: DenseMatrix) -> Result<Svd, LinalgError> {
    let (m, n) = a.shape();
    let mut v = DenseMatrix::identity(n);
    let tol = (m as f64).sqrt() * f64::EPSILON;

    let mut converged = false;
    let mut worst = 0.0f64;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        worst = 0.0;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (a.col(p), a.col(q));
                    let mut al = 0.0;
                    let mut be = 0.0;
                    let mut ga = 0.0;
                    for (x, y) in cp.iter().zip(cq) {
                        al += x * x;
                        be += y * y;
                        ga += x * y;
                    }
                    (al, be, ga)
                };
                if gamma == 0.0 {
                    continue;
                }
                let scale = alpha.sqrt() * beta.sqrt();
                let off = gamma.abs() / scale;
                if scale == 0.0 || off <= tol {
                    continue;
                }
                worst = worst.max(off);
                rotated = true;
                let (c, s) = rotation(alpha, beta, gamma);
                rotate_cols(&mut a, p, q, c, s);
                rotate_cols(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            method: "one-sided Jacobi SVD",
            iterations: MAX_SWEEPS,
            residual: worst,
        });
    }

    let norms: Vec<f64> = (0..n).map(|j| vec_ops::norm2(a.col(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

    let mut u = DenseMatrix::zeros(m, n);
    let mut vs = DenseMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        vs.col_mut(k).copy_from_slice(v.col(j));
        if s > f64::MIN_POSITIVE * 1e3 {
            let dst = u.col_mut(k);
            dst.copy_from_slice(a.col(j));
            vec_ops::scale(1.0 / s, dst);
        } else {
            missing.push(k);
        }
    }
    complete_orthonormal(&mut u, &missing);
    Ok(Svd { u, sigma, v: vs })
}

/// Jacobi rotation `(c, s)` that orthogonalizes two columns with Gram entries
/// `alpha = |p|²`, `beta = |q|²`, `gamma = p·q`.
fn rotation(alpha: f64, beta: f64, gamma: f64) -> (f64, f64) {
    let zeta = (beta - alpha) / (2.0 * gamma);
    let t = if zeta.abs() > 1e150 {
        0.5 / zeta
    } else if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, c * t)
}

fn rotate_cols(a: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let rows = a.rows();
    let data = a.as_mut_slice();
    let (lo, hi) = data.split_at_mut(q * rows);
    let cp = &mut lo[p * rows..(p + 1) * rows];
    let cq = &mut hi[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to all others.
fn complete_orthonormal(u: &mut DenseMatrix, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let m = u.rows();
    let mut filled: Vec<usize> = (0..u.cols()).filter(|k| !missing.contains(k)).collect();
    let mut candidate = 0usize;
    for &k in missing {
        loop {
            assert!(candidate < m, "cannot complete an orthonormal basis");
            let mut w = vec![0.0; m];
            w[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &f in &filled {
                    let c = vec_ops::dot(u.col(f), &w);
                    vec_ops::axpy(-c, u.col(f), &mut w);
                }
            }
            let nw = vec_ops::norm2(&w);
            if nw > 0.5 {
                vec_ops::scale(1.0 / nw, &mut w);
                u.col_mut(k).copy_from_slice(&w);
                filled.push(k);
                break;
            }
        }
    }
}

fn normalize_signs(svd: &mut Svd) {
    for j in 0..svd.sigma.len() {
        let col = svd.u.col(j);
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            vec_ops::scale(-1.0, svd.u.col_mut(j));
            vec_ops::scale(-1.0, svd.v.col_mut(j));
        }
    }
}

/// Smallest and largest eigenvalues of a symmetric matrix.
///
/// Shifts by a Gershgorin bound so the matrix is positive semidefinite, at
/// which point its singular values are its eigenvalues.
pub fn symmetric_extreme_eigenvalues(s: &DenseMatrix) -> Result<(f64, f64), LinalgError> {
    let n = s.rows();
    if n != s.cols() {
        return Err(LinalgError::Shape {
            op: "symmetric_extreme_eigenvalues",
            detail: format!("{}x{} is not square", s.rows(), s.cols()),
        });
    }
    let shift = (0..n)
        .map(|i| (0..n).map(|j| s[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut shifted = s.clone();
    for i in 0..n {
        shifted[(i, i)] += shift;
    }
    let svd = thin_svd(&shifted)?;
    let hi = svd.sigma[0] - shift;
    let lo = svd.sigma[n - 1] - shift;
    Ok((lo, hi))
}
