use crate::par;

use super::{DenseMatrix, LinalgError};

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, LinalgError> {
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(LinalgError::SparseStructure(format!(
                    "entry ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(LinalgError::NonFinite { row: i, col: j });
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds from raw CSR arrays, validating the structure.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        let bad = |msg: String| Err(LinalgError::SparseStructure(msg));
        if row_ptr.len() != rows + 1 || row_ptr[0] != 0 {
            return bad(format!("row_ptr has length {} for {rows} rows", row_ptr.len()));
        }
        if col_idx.len() != values.len() || row_ptr[rows] != values.len() {
            return bad("row_ptr, col_idx and values disagree on nnz".into());
        }
        for i in 0..rows {
            if row_ptr[i + 1] < row_ptr[i] {
                return bad(format!("row_ptr decreases at row {i}"));
            }
            let cols_i = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for (k, &j) in cols_i.iter().enumerate() {
                if j >= cols {
                    return bad(format!("column {j} out of range in row {i}"));
                }
                if k > 0 && cols_i[k - 1] >= j {
                    return bad(format!("row {i} has unsorted or repeated columns"));
                }
            }
            for (k, v) in values[row_ptr[i]..row_ptr[i + 1]].iter().enumerate() {
                if !v.is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: cols_i[k] });
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(d: &DenseMatrix) -> Self {
        let mut t = Vec::new();
        for j in 0..d.cols() {
            for (i, &v) in d.col(j).iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(d.rows(), d.cols(), &t).expect("dense entries are in range")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|k| v[k]).unwrap_or(0.0)
    }

    /// Iterates over stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "sparse matvec: length mismatch");
        par::map_collect(self.rows, 2 * self.nnz(), |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
        })
    }

    pub fn tr_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "sparse tr_matvec: length mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                let (c, v) = self.row(i);
                for (&j, &a) in c.iter().zip(v) {
                    out[j] += a * yi;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.cols, self.rows, &t).expect("transpose keeps entries in range")
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// `alpha * I + beta * self` for a square matrix.
    pub fn shifted(&self, alpha: f64, beta: f64) -> Self {
        assert_eq!(self.rows, self.cols, "shifted: matrix is not square");
        let mut t: Vec<_> = self.triplets().map(|(i, j, v)| (i, j, beta * v)).collect();
        t.extend((0..self.rows).map(|i| (i, i, alpha)));
        Self::from_triplets(self.rows, self.cols, &t).expect("entries in range")
    }

    /// `self * X` for a dense `X`, parallel over the columns of `X`.
    pub fn mul_dense(&self, x: &DenseMatrix) -> DenseMatrix {
        assert_eq!(x.rows(), self.cols, "sparse mul_dense: inner dimensions differ");
        let m = self.rows;
        let mut out = DenseMatrix::zeros(m, x.cols());
        if m == 0 {
            return out;
        }
        par::for_each_chunk_mut(out.as_mut_slice(), m, 2 * self.nnz() * x.cols(), |j, dst| {
            let xc = x.col(j);
            for (i, o) in dst.iter_mut().enumerate() {
                let (c, v) = self.row(i);
                *o = c.iter().zip(v).map(|(&k, &a)| a * xc[k]).sum();
            }
        });
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        super::vec_ops::norm2(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        super::vec_ops::max_abs(&self.values)
    }

    /// `(lower, upper)` bandwidths of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut lo = 0;
        let mut hi = 0;
        for (i, j, _) in self.triplets() {
            if i > j {
                lo = lo.max(i - j);
            } else {
                hi = hi.max(j - i);
            }
        }
        (lo, hi)
    }

    /// `B(i, j) = A(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(self.rows, self.cols);
        assert_eq!(perm.len(), self.rows);
        let mut inv = vec![0usize; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (inv[i], inv[j], v)).collect();
        Self::from_triplets(self.rows, self.cols, &t).expect("permutation keeps entries in range")
    }

    /// `max |A - Aᵀ|` over the stored pattern.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseMatrix {
        SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (1, 0, -1.0), (2, 2, 4.0), (0, 2, 1.0), (1, 0, -1.0)],
        )
        .unwrap()
    }

    #[test]
    fn duplicates_sum() {
        let a = sample();
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.get(1, 0), -2.0);
    }

    #[test]
    fn matvec_matches_dense() {
        let a = sample();
        let x = [1.0, 2.0, 3.0];
        assert_eq!(a.matvec(&x), a.to_dense().matvec(&x));
        assert_eq!(a.tr_matvec(&x), a.to_dense().tr_matvec(&x));
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
    }

    #[test]
    fn rejects_bad_structure() {
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, &[(0, 0, f64::NAN)]).is_err());
        assert!(SparseMatrix::from_csr(2, 2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_csr(2, 2, vec![0, 1, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn shift_and_bandwidth() {
        let a = sample();
        let s = a.shifted(1.0, -2.0);
        assert_eq!(s.get(0, 0), -3.0);
        assert_eq!(s.get(1, 1), 1.0);
        assert_eq!(a.bandwidths(), (1, 2));
    }

    #[test]
    fn permutation_round_trip() {
        let a = sample();
        let p = [2, 0, 1];
        let b = a.permuted(&p);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(b.get(i, j), a.get(p[i], p[j]));
            }
        }
    }

    #[test]
    fn mul_dense_matches() {
        let a = sample();
        let x = DenseMatrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64);
        assert_eq!(a.mul_dense(&x), a.to_dense().matmul(&x));
    }
}
