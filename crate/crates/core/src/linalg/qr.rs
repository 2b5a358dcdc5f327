use super::{vec_ops, DenseMatrix, LinalgError};

/// Thin Householder QR of a tall matrix: `M = Q R` with `Q: m x n`
/// orthonormal and `R: n x n` upper triangular with non-negative diagonal.
///
/// Rank-deficient input still factors; `R` then carries zero diagonal entries.
pub fn qr(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix), LinalgError> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(LinalgError::Shape {
            op: "qr",
            detail: format!("needs rows >= cols, got {rows}x{cols}"),
        });
    }
    let mut a = m.clone();
    let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(cols);

    for k in 0..cols {
        let x = &a.col(k)[k..];
        let alpha = vec_ops::norm2(x);
        if alpha == 0.0 {
            reflectors.push(None);
            continue;
        }
        let mut v = x.to_vec();
        v[0] += if x[0] >= 0.0 { alpha } else { -alpha };
        let beta = vec_ops::dot(&v, &v);
        for j in k..cols {
            let col = &mut a.col_mut(j)[k..];
            let f = 2.0 * vec_ops::dot(&v, col) / beta;
            vec_ops::axpy(-f, &v, col);
        }
        reflectors.push(Some(v));
    }

    let mut r = DenseMatrix::from_fn(cols, cols, |i, j| if i <= j { a[(i, j)] } else { 0.0 });

    let mut q = DenseMatrix::zeros(rows, cols);
    for j in 0..cols {
        q[(j, j)] = 1.0;
    }
    for k in (0..cols).rev() {
        if let Some(v) = &reflectors[k] {
            let beta = vec_ops::dot(v, v);
            for j in 0..cols {
                let col = &mut q.col_mut(j)[k..];
                let f = 2.0 * vec_ops::dot(v, col) / beta;
                vec_ops::axpy(-f, v, col);
            }
        }
    }

    for i in 0..cols {
        if r[(i, i)] < 0.0 {
            for j in i..cols {
                r[(i, j)] = -r[(i, j)];
            }
            vec_ops::scale(-1.0, q.col_mut(i));
        }
    }
    Ok((q, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity() {
        let (q, r) = qr(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(q, DenseMatrix::identity(3));
        assert_eq!(r, DenseMatrix::identity(3));
    }

    #[test]
    fn single_column_3_4() {
        let (q, r) = qr(&DenseMatrix::from_rows(&[&[3.0], &[4.0]])).unwrap();
        assert!((q[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((q[(1, 0)] - 0.8).abs() < 1e-15);
        assert!((r[(0, 0)] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn random_8x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DenseMatrix::from_fn(8, 3, |_, _| rng.gen_range(-1.0..1.0));
        let (q, r) = qr(&m).unwrap();
        assert!(q.orthonormality_error() < 1e-12);
        assert!(q.matmul(&r).add_scaled(-1.0, &m).frobenius_norm() < 1e-12 * m.frobenius_norm());
        for j in 0..3 {
            for i in j + 1..3 {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn rank_deficient_still_factors() {
        let m = DenseMatrix::from_rows(&[&[1.0, 2.0, 0.0], &[1.0, 2.0, 0.0], &[0.0, 0.0, 0.0], &[1.0, 2.0, 0.0]]);
        let (q, r) = qr(&m).unwrap();
        assert!(q.orthonormality_error() < 1e-12);
        assert!(q.matmul(&r).max_abs_diff(&m) < 1e-14);
        assert!(r[(2, 2)].abs() < 1e-15);
    }

    #[test]
    fn wide_rejected() {
        assert!(qr(&DenseMatrix::zeros(2, 3)).is_err());
    }
}
