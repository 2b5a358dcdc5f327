use super::{vec_ops, DenseMatrix, LinalgError};

/// Relative pivot threshold below which a matrix is declared singular.
pub(crate) const SINGULAR_PIVOT_RTOL: f64 = 1e-14;

/// Dense LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct LuFactorization {
    lu: DenseMatrix,
    piv: Vec<usize>,
}

impl LuFactorization {
    pub fn new(a: &DenseMatrix) -> Result<Self, LinalgError> {
        let n = a.rows();
        if n != a.cols() {
            return Err(LinalgError::Shape {
                op: "lu",
                detail: format!("{}x{} is not square", a.rows(), a.cols()),
            });
        }
        let thresh = SINGULAR_PIVOT_RTOL * a.frobenius_norm();
        let mut lu = a.clone();
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let col = lu.col(k);
            let mut p = k;
            for i in k + 1..n {
                if col[i].abs() > col[p].abs() {
                    p = i;
                }
            }
            let pivot = col[p];
            if pivot.abs() <= thresh || pivot == 0.0 {
                return Err(LinalgError::Singular {
                    pivot: k,
                    magnitude: pivot.abs(),
                });
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    let c = lu.col_mut(j);
                    c.swap(k, p);
                }
            }
            let inv = 1.0 / pivot;
            for v in &mut lu.col_mut(k)[k + 1..] {
                *v *= inv;
            }
            let (left, right) = lu.as_mut_slice().split_at_mut((k + 1) * n);
            let l = &left[k * n + k + 1..(k + 1) * n];
            for j in 0..n - k - 1 {
                let cj = &mut right[j * n..(j + 1) * n];
                let u = cj[k];
                if u != 0.0 {
                    vec_ops::axpy(-u, l, &mut cj[k + 1..]);
                }
            }
        }
        Ok(Self { lu, piv })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "lu solve: length mismatch");
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        for k in 0..n {
            let xk = x[k];
            if xk != 0.0 {
                let l = &self.lu.col(k)[k + 1..];
                vec_ops::axpy(-xk, l, &mut x[k + 1..]);
            }
        }
        for k in (0..n).rev() {
            let col = self.lu.col(k);
            x[k] /= col[k];
            let xk = x[k];
            if xk != 0.0 {
                vec_ops::axpy(-xk, &col[..k], &mut x[..k]);
            }
        }
        x
    }
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn solve_dense(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if a.rows() != b.len() {
        return Err(LinalgError::Shape {
            op: "solve_dense",
            detail: format!("{}x{} system with rhs of length {}", a.rows(), a.cols(), b.len()),
        });
    }
    Ok(LuFactorization::new(a)?.solve(b))
}
