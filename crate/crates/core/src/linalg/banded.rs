//! Banded LU with partial pivoting for sparse step operators.
//!
//! The factor is stored in the LAPACK general-band layout: entry `A(i, j)`
//! lives at `ab[kv + i - j + j * ldab]` with `kv = kl + ku` and
//! `ldab = 2 kl + ku + 1`; the extra `kl` rows hold pivoting fill-in. A
//! reverse Cuthill-McKee reordering is applied first when it shrinks the band.

use std::collections::VecDeque;

use super::lu::SINGULAR_PIVOT_RTOL;
use super::{LinalgError, SparseMatrix};

#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    /// `perm[new] = old`, when a reordering was applied.
    perm: Option<Vec<usize>>,
}

impl BandedLu {
    pub fn new(a: &SparseMatrix) -> Result<Self, LinalgError> {
        let n = a.rows();
        if n != a.cols() {
            return Err(LinalgError::Shape {
                op: "banded lu",
                detail: format!("{}x{} is not square", a.rows(), a.cols()),
            });
        }
        let (kl0, ku0) = a.bandwidths();
        let rcm = reverse_cuthill_mckee(a);
        let permuted = a.permuted(&rcm);
        let (kl1, ku1) = permuted.bandwidths();
        let (mat, perm) = if kl1 + ku1 < kl0 + ku0 {
            (permuted, Some(rcm))
        } else {
            (a.clone(), None)
        };
        let (kl, ku) = mat.bandwidths();
        let mut lu = Self::factor(&mat, kl, ku)?;
        lu.perm = perm;
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `(lower, upper)` bandwidth of the factored (possibly reordered) matrix.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn is_reordered(&self) -> bool {
        self.perm.is_some()
    }

    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn factor(a: &SparseMatrix, kl: usize, ku: usize) -> Result<Self, LinalgError> {
        let n = a.rows();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for (i, j, v) in a.triplets() {
            ab[kv + i - j + j * ldab] = v;
        }
        let thresh = SINGULAR_PIVOT_RTOL * a.max_abs();
        let mut ipiv = vec![0usize; n];
        let idx = |i: usize, j: usize| kv + i - j + j * ldab;

        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0usize;
            for t in 1..=km {
                if ab[kv + t + j * ldab].abs() > ab[kv + jp + j * ldab].abs() {
                    jp = t;
                }
            }
            ipiv[j] = j + jp;
            let piv = ab[kv + jp + j * ldab];
            if piv == 0.0 || piv.abs() <= thresh {
                return Err(LinalgError::Singular {
                    pivot: j,
                    magnitude: piv.abs(),
                });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    ab.swap(idx(j, c), idx(j + jp, c));
                }
            }
            let inv = 1.0 / piv;
            for t in 1..=km {
                ab[kv + t + j * ldab] *= inv;
            }
            for c in j + 1..=ju {
                let u = ab[idx(j, c)];
                if u != 0.0 {
                    for t in 1..=km {
                        let l = ab[kv + t + j * ldab];
                        ab[idx(j + t, c)] -= l * u;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            ab,
            ipiv,
            perm: None,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_impl(b, false)
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        self.solve_impl(b, true)
    }

    fn solve_impl(&self, b: &[f64], transpose: bool) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "banded solve: length mismatch");
        let mut x: Vec<f64> = match &self.perm {
            Some(p) => p.iter().map(|&old| b[old]).collect(),
            None => b.to_vec(),
        };
        if transpose {
            self.solve_t_in_place(&mut x);
        } else {
            self.solve_n_in_place(&mut x);
        }
        match &self.perm {
            Some(p) => {
                let mut out = vec![0.0; self.n];
                for (new, &old) in p.iter().enumerate() {
                    out[old] = x[new];
                }
                out
            }
            None => x,
        }
    }

    fn solve_n_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let kv = self.kl + self.ku;
        let ldab = self.ldab();
        let ab = &self.ab;
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            if bj != 0.0 {
                for t in 1..=km {
                    b[j + t] -= ab[kv + t + j * ldab] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= ab[kv + j * ldab];
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= ab[kv + i - j + j * ldab] * bj;
                }
            }
        }
    }

    fn solve_t_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let kv = self.kl + self.ku;
        let ldab = self.ldab();
        let ab = &self.ab;
        for j in 0..n {
            let mut s = b[j];
            for i in j.saturating_sub(kv)..j {
                s -= ab[kv + i - j + j * ldab] * b[i];
            }
            b[j] = s / ab[kv + j * ldab];
        }
        for j in (0..n).rev() {
            let km = self.kl.min(n - 1 - j);
            let mut s = b[j];
            for t in 1..=km {
                s -= ab[kv + t + j * ldab] * b[j + t];
            }
            b[j] = s;
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
        }
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern; `perm[new] = old`.
pub(crate) fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.rows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for nb in &mut adj {
        nb.sort_unstable();
        nb.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));

    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        let root = peripheral_node(start, &adj, &degree);
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Approximate pseudo-peripheral node of the component containing `start`.
fn peripheral_node(start: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut root = start;
    let mut ecc = 0usize;
    for _ in 0..8 {
        let (last_level, depth) = bfs_last_level(root, adj);
        if depth <= ecc {
            break;
        }
        ecc = depth;
        root = *last_level
            .iter()
            .min_by_key(|&&v| (degree[v], v))
            .expect("bfs level is non-empty");
    }
    root
}

fn bfs_last_level(root: usize, adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let mut seen = std::collections::HashSet::from([root]);
    let mut level = vec![root];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &level {
            for &w in &adj[v] {
                if seen.insert(w) {
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return (level, depth);
        }
        level = next;
        depth += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{solve_dense, vec_ops};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> SparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                t.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn matches_dense_solve_with_pivoting() {
        let a = random_banded(30, 2, 3, 4);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let lu = BandedLu::new(&a).unwrap();
        let x = lu.solve(&b);
        let xd = solve_dense(&a.to_dense(), &b).unwrap();
        assert!(vec_ops::max_abs_diff(&x, &xd) < 1e-9 * vec_ops::max_abs(&xd).max(1.0));
    }

    #[test]
    fn transpose_solve() {
        let a = random_banded(25, 3, 1, 9);
        let b: Vec<f64> = (0..25).map(|i| 1.0 + i as f64).collect();
        let x = BandedLu::new(&a).unwrap().solve_transpose(&b);
        let xd = solve_dense(&a.to_dense().transpose(), &b).unwrap();
        assert!(vec_ops::max_abs_diff(&x, &xd) < 1e-9 * vec_ops::max_abs(&xd).max(1.0));
    }

    #[test]
    fn reorders_scrambled_tridiagonal() {
        let n = 40;
        let scramble: Vec<usize> = (0..n).map(|i| (i * 17) % n).collect();
        let mut t = Vec::new();
        for i in 0..n {
            t.push((scramble[i], scramble[i], 4.0));
            if i + 1 < n {
                t.push((scramble[i], scramble[i + 1], -1.0));
                t.push((scramble[i + 1], scramble[i], -1.5));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let lu = BandedLu::new(&a).unwrap();
        assert!(lu.is_reordered());
        assert_eq!(lu.bandwidths(), (1, 1));
        let b = vec![1.0; n];
        let x = lu.solve(&b);
        let r = vec_ops::sub(&a.matvec(&x), &b);
        assert!(vec_ops::norm2(&r) < 1e-12);
        let xt = lu.solve_transpose(&b);
        let rt = vec_ops::sub(&a.tr_matvec(&xt), &b);
        assert!(vec_ops::norm2(&rt) < 1e-12);
    }

    #[test]
    fn singular_detected() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(BandedLu::new(&a), Err(LinalgError::Singular { .. })));
    }
}
