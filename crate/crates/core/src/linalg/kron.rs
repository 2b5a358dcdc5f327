use super::DenseMatrix;

/// Kronecker product: the `mk x nl` matrix whose block `(i, j)` is `a_ij * B`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (m, n) = a.shape();
    let (k, l) = b.shape();
    let mut out = DenseMatrix::zeros(m * k, n * l);
    for j in 0..n {
        for q in 0..l {
            let bcol = b.col(q);
            let dst = out.col_mut(j * l + q);
            for i in 0..m {
                let aij = a[(i, j)];
                for (d, &bv) in dst[i * k..(i + 1) * k].iter_mut().zip(bcol) {
                    *d = aij * bv;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_blocks() {
        assert_eq!(
            kron(&DenseMatrix::identity(2), &DenseMatrix::identity(3)),
            DenseMatrix::identity(6)
        );
    }

    #[test]
    fn scalar_b() {
        let a = DenseMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let b = DenseMatrix::from_rows(&[&[2.0]]);
        assert_eq!(kron(&a, &b), DenseMatrix::from_rows(&[&[0.0, 2.0], &[2.0, 0.0]]));
    }

    #[test]
    fn block_layout() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0]]);
        let b = DenseMatrix::from_rows(&[&[1.0], &[10.0]]);
        assert_eq!(kron(&a, &b), DenseMatrix::from_rows(&[&[1.0, 2.0], &[10.0, 20.0]]));
    }
}
