//! Streaming incremental SVD and extraction of spatial and temporal bases.
//!
//! Snapshots arrive one column at a time, sample by sample and step by step.
//! The running factorization `U ≈ Φ diag(σ) Vᵀ` is updated through the SVD
//! of a small bordered matrix, so the full snapshot matrix is never stored.
//! Afterwards the leading columns of `Φ` form the spatial basis, and for each
//! spatial mode `i` the rows of `V(:, i)` are cut into one length-`N_t` slice
//! per sample; the leading left singular vectors of those slices form the
//! temporal basis of that mode.

use thiserror::Error;

use crate::linalg::{qr, thin_svd, vec_ops, DenseMatrix, LinalgError};

#[derive(Debug, Error)]
pub enum BasisError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("requested {what} = {requested} but only {available} is achievable")]
    RankTooSmall {
        what: &'static str,
        requested: usize,
        available: usize,
    },

    #[error("snapshot column {column} has non-finite entries")]
    NonFinite { column: usize },
}

/// What to do once the rank reaches `max_rank`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankCapPolicy {
    /// Restart from the incoming column, discarding the accumulated basis.
    Reinitialize,
    /// Keep updating but drop the smallest singular triple after each update.
    Truncate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsvdConfig {
    /// Linear-dependence threshold on the residual norm `p`, and the norm
    /// threshold for accepting a first column.
    pub tol_svd: f64,
    /// Trailing singular values below this are dropped.
    pub tol_sv: f64,
    pub max_rank: usize,
    pub on_rank_cap: RankCapPolicy,
}

impl Default for IsvdConfig {
    fn default() -> Self {
        Self {
            tol_svd: 2e-8,
            tol_sv: 1e-14,
            max_rank: usize::MAX,
            on_rank_cap: RankCapPolicy::Reinitialize,
        }
    }
}

impl IsvdConfig {
    pub fn exact() -> Self {
        Self {
            tol_svd: 0.0,
            tol_sv: 0.0,
            ..Self::default()
        }
    }
}

/// Per-column bookkeeping of the streaming factorization.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IsvdHistory {
    /// Rank after each ingested column.
    pub ranks: Vec<usize>,
    /// Columns rejected by the norm test of a (re)initialization.
    pub rejected: Vec<usize>,
    /// Columns found linearly dependent on the current basis.
    pub dependent: Vec<usize>,
    /// Columns whose update dropped a trailing singular value.
    pub truncations: Vec<usize>,
    pub reorthogonalizations: Vec<usize>,
    pub reinitializations: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SvdState {
    n_rows: usize,
    phi: DenseMatrix,
    sigma: Vec<f64>,
    /// One row per ingested column, including rejected ones.
    v: DenseMatrix,
    config: IsvdConfig,
    history: IsvdHistory,
}

impl SvdState {
    /// Empty state for vectors of length `n_rows`.
    pub fn new(n_rows: usize, config: IsvdConfig) -> Self {
        Self {
            n_rows,
            phi: DenseMatrix::zeros(n_rows, 0),
            sigma: Vec::new(),
            v: DenseMatrix::zeros(0, 0),
            config,
            history: IsvdHistory::default(),
        }
    }

    pub fn phi(&self) -> &DenseMatrix {
        &self.phi
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn columns(&self) -> usize {
        self.v.rows()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn config(&self) -> &IsvdConfig {
        &self.config
    }

    pub fn history(&self) -> &IsvdHistory {
        &self.history
    }

    /// Starts the factorization from `x`, which is column number `k` (0-based)
    /// of the stream; earlier columns get zero rows in `V`.
    fn initialize(&mut self, x: &[f64], k: usize) {
        let norm = vec_ops::norm2(x);
        if norm > self.config.tol_svd {
            let mut phi = x.to_vec();
            vec_ops::scale(1.0 / norm, &mut phi);
            self.phi = DenseMatrix::from_col_major(self.n_rows, 1, phi).expect("finite column");
            self.sigma = vec![norm];
            let mut v = DenseMatrix::zeros(k + 1, 1);
            v[(k, 0)] = 1.0;
            self.v = v;
        } else {
            self.phi = DenseMatrix::zeros(self.n_rows, 0);
            self.sigma.clear();
            self.v = DenseMatrix::zeros(k + 1, 0);
            self.history.rejected.push(k);
        }
    }

    /// Folds one column into the factorization.
    pub fn update(&mut self, x: &[f64]) -> Result<(), BasisError> {
        let k = self.columns();
        if x.len() != self.n_rows {
            return Err(BasisError::Dimension {
                what: "snapshot length",
                expected: self.n_rows,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BasisError::NonFinite { column: k });
        }
        let r = self.rank();
        let at_cap = r >= self.config.max_rank;
        if r == 0 || (at_cap && self.config.on_rank_cap == RankCapPolicy::Reinitialize) {
            if r > 0 {
                log::warn!(
                    "incremental SVD reached rank cap {r} at column {k}; re-initializing and discarding the basis"
                );
                self.history.reinitializations.push(k);
            }
            self.initialize(x, k);
            self.history.ranks.push(self.rank());
            return Ok(());
        }

        // Projection with one re-orthogonalization pass when cancellation is
        // large; p is the norm of the explicit residual.
        let mut ell = self.phi.tr_matvec(x);
        let mut res = x.to_vec();
        vec_ops::axpy(-1.0, &self.phi.matvec(&ell), &mut res);
        if vec_ops::norm2(&res) < vec_ops::norm2(x) / std::f64::consts::SQRT_2 {
            let ell2 = self.phi.tr_matvec(&res);
            vec_ops::axpy(-1.0, &self.phi.matvec(&ell2), &mut res);
            vec_ops::axpy(1.0, &ell2, &mut ell);
        }
        let p = vec_ops::norm2(&res);
        let dependent = p < self.config.tol_svd || r >= self.n_rows;
        if dependent {
            self.history.dependent.push(k);
        }

        let mut q = DenseMatrix::zeros(r + 1, r + 1);
        for i in 0..r {
            q[(i, i)] = self.sigma[i];
            q[(i, r)] = ell[i];
        }
        q[(r, r)] = if dependent { 0.0 } else { p };
        let svd = thin_svd(&q)?;

        let mut v_ext = DenseMatrix::zeros(k + 1, r + 1);
        v_ext.set_block(0, 0, &self.v);
        v_ext[(k, r)] = 1.0;

        if dependent {
            self.phi = self.phi.matmul(&svd.u.block(0, 0, r, r));
            self.sigma = svd.sigma[..r].to_vec();
            self.v = v_ext.matmul(&svd.v.leading_columns(r));
        } else {
            let mut ext = self.phi.clone();
            vec_ops::scale(1.0 / p, &mut res);
            ext.push_column(&res);
            self.phi = ext.matmul(&svd.u);
            self.sigma = svd.sigma;
            self.v = v_ext.matmul(&svd.v);
        }

        let mut truncated = false;
        if self.sigma.last().is_some_and(|&s| s < self.config.tol_sv) {
            self.drop_last();
            truncated = true;
        }
        if self.config.on_rank_cap == RankCapPolicy::Truncate {
            while self.rank() > self.config.max_rank {
                self.drop_last();
                truncated = true;
            }
        }
        if truncated {
            self.history.truncations.push(k);
        }

        let r = self.rank();
        if r >= 2 {
            let drift = vec_ops::dot(self.phi.col(0), self.phi.col(r - 1)).abs();
            let limit = self.config.tol_svd.min(f64::EPSILON * self.n_rows as f64);
            if drift > limit {
                self.phi = qr(&self.phi)?.0;
                self.history.reorthogonalizations.push(k);
            }
        }
        self.history.ranks.push(r);
        Ok(())
    }

    fn drop_last(&mut self) {
        let r = self.rank() - 1;
        self.sigma.truncate(r);
        self.phi.truncate_columns(r);
        self.v.truncate_columns(r);
    }

    /// Folds the columns of one simulation, left to right.
    pub fn ingest_simulation(&mut self, states: &DenseMatrix) -> Result<(), BasisError> {
        for k in 0..states.cols() {
            self.update(states.col(k))?;
        }
        Ok(())
    }
}

/// A fresh state built from a single column.
pub fn isvd_init(x: &[f64], config: IsvdConfig, k: usize) -> SvdState {
    let mut s = SvdState::new(x.len(), config);
    s.initialize(x, k);
    s.history.ranks.push(s.rank());
    s
}

/// Numerical rank: singular values above `max(m, n) * eps * sigma_1`.
pub fn numerical_rank(sigma: &[f64], rows: usize, cols: usize) -> usize {
    let Some(&s0) = sigma.first() else { return 0 };
    let tol = rows.max(cols) as f64 * f64::EPSILON * s0;
    sigma.iter().take_while(|&&s| s > tol && s > 0.0).count()
}

/// Batch POD: the leading `n_s` left singular vectors of the snapshot matrix
/// together with the full singular values and right vectors.
pub fn batch_pod(u: &DenseMatrix, n_s: usize) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix), BasisError> {
    let svd = thin_svd(u)?;
    let rank = numerical_rank(&svd.sigma, u.rows(), u.cols());
    if n_s == 0 || n_s > rank {
        return Err(BasisError::RankTooSmall {
            what: "n_s",
            requested: n_s,
            available: rank,
        });
    }
    Ok((svd.u.leading_columns(n_s), svd.sigma, svd.v))
}

/// `N_t x n_mu` matrix whose column `s` is rows `s*N_t .. (s+1)*N_t` of `V(:, i)`.
pub fn temporal_snapshots(v: &DenseMatrix, i: usize, n_steps: usize, n_mu: usize) -> Result<DenseMatrix, BasisError> {
    if v.rows() != n_steps * n_mu {
        return Err(BasisError::Dimension {
            what: "right singular vector length",
            expected: n_steps * n_mu,
            got: v.rows(),
        });
    }
    if i >= v.cols() {
        return Err(BasisError::RankTooSmall {
            what: "mode index",
            requested: i + 1,
            available: v.cols(),
        });
    }
    Ok(DenseMatrix::from_col_major(n_steps, n_mu, v.col(i).to_vec())?)
}

/// Spatial basis and per-mode temporal bases.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSet {
    /// `N_s x n_s`, orthonormal columns.
    pub spatial: DenseMatrix,
    /// `n_s` matrices of size `N_t x n_t`, orthonormal columns.
    pub temporal: Vec<DenseMatrix>,
    pub n_mu: usize,
}

impl BasisSet {
    pub fn new(spatial: DenseMatrix, temporal: Vec<DenseMatrix>, n_mu: usize) -> Result<Self, BasisError> {
        if temporal.len() != spatial.cols() {
            return Err(BasisError::Dimension {
                what: "temporal basis count",
                expected: spatial.cols(),
                got: temporal.len(),
            });
        }
        if let Some(first) = temporal.first() {
            for t in &temporal {
                if t.shape() != first.shape() {
                    return Err(BasisError::Dimension {
                        what: "temporal basis shape",
                        expected: first.rows() * first.cols(),
                        got: t.rows() * t.cols(),
                    });
                }
            }
        }
        Ok(Self {
            spatial,
            temporal,
            n_mu,
        })
    }

    pub fn n_states(&self) -> usize {
        self.spatial.rows()
    }

    pub fn n_s(&self) -> usize {
        self.spatial.cols()
    }

    pub fn n_t(&self) -> usize {
        self.temporal.first().map_or(0, DenseMatrix::cols)
    }

    pub fn n_steps(&self) -> usize {
        self.temporal.first().map_or(0, DenseMatrix::rows)
    }

    /// Leading `n_s` spatial modes, each with its leading `n_t` temporal modes.
    pub fn truncated(&self, n_s: usize, n_t: usize) -> Result<Self, BasisError> {
        if n_s == 0 || n_s > self.n_s() {
            return Err(BasisError::RankTooSmall {
                what: "n_s",
                requested: n_s,
                available: self.n_s(),
            });
        }
        if n_t == 0 || n_t > self.n_t() {
            return Err(BasisError::RankTooSmall {
                what: "n_t",
                requested: n_t,
                available: self.n_t(),
            });
        }
        Self::new(
            self.spatial.leading_columns(n_s),
            self.temporal[..n_s].iter().map(|t| t.leading_columns(n_t)).collect(),
            self.n_mu,
        )
    }
}

/// Bases from a left factor `phi` and right factor `v` (`n_mu * N_t` rows).
pub fn basis_from_factors(
    phi: &DenseMatrix,
    v: &DenseMatrix,
    n_s: usize,
    n_t: usize,
    n_steps: usize,
    n_mu: usize,
) -> Result<BasisSet, BasisError> {
    let r = phi.cols().min(v.cols());
    if n_s == 0 || n_s > r {
        return Err(BasisError::RankTooSmall {
            what: "n_s",
            requested: n_s,
            available: r,
        });
    }
    let nt_max = n_steps.min(n_mu);
    if n_t == 0 || n_t > nt_max {
        return Err(BasisError::RankTooSmall {
            what: "n_t",
            requested: n_t,
            available: nt_max,
        });
    }
    let mut temporal = Vec::with_capacity(n_s);
    for i in 0..n_s {
        let t = temporal_snapshots(v, i, n_steps, n_mu)?;
        temporal.push(thin_svd(&t)?.u.leading_columns(n_t));
    }
    BasisSet::new(phi.leading_columns(n_s), temporal, n_mu)
}

/// `Φ_s = Φ(:, 1:n_s)` and `Ψ_i` = leading `n_t` left singular vectors of the
/// `i`-th temporal snapshot matrix.
pub fn build_basis_set(
    state: &SvdState,
    n_s: usize,
    n_t: usize,
    n_steps: usize,
    n_mu: usize,
) -> Result<BasisSet, BasisError> {
    basis_from_factors(state.phi(), state.v(), n_s, n_t, n_steps, n_mu)
}

/// Same pipeline driven by a batch SVD of the full snapshot matrix.
pub fn build_basis_set_batch(
    snapshots: &DenseMatrix,
    n_s: usize,
    n_t: usize,
    n_steps: usize,
    n_mu: usize,
) -> Result<BasisSet, BasisError> {
    let svd = thin_svd(snapshots)?;
    basis_from_factors(&svd.u, &svd.v, n_s, n_t, n_steps, n_mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(i: usize, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn init_accepts_and_rejects() {
        let s = isvd_init(
            &[0.0, 2.0, 0.0],
            IsvdConfig {
                tol_svd: 1e-8,
                ..Default::default()
            },
            0,
        );
        assert_eq!(s.sigma(), &[2.0]);
        assert_eq!(s.phi().col(0), &[0.0, 1.0, 0.0]);
        assert_eq!(s.v().as_slice(), &[1.0]);

        let z = isvd_init(&[0.0; 3], IsvdConfig::default(), 0);
        assert_eq!(z.rank(), 0);
        assert_eq!(z.columns(), 1);

        let edge = isvd_init(
            &[1e-8],
            IsvdConfig {
                tol_svd: 1e-8,
                ..Default::default()
            },
            0,
        );
        assert_eq!(edge.rank(), 0);
    }

    #[test]
    fn orthogonal_columns() {
        let mut s = isvd_init(&e(0, 4), IsvdConfig::default(), 0);
        s.update(&e(1, 4)).unwrap();
        assert_eq!(s.rank(), 2);
        assert!(s.sigma().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(s.phi().orthonormality_error() < 1e-15);
    }

    #[test]
    fn repeated_column_is_dependent() {
        let mut s = isvd_init(&e(0, 3), IsvdConfig::default(), 0);
        s.update(&e(0, 3)).unwrap();
        assert_eq!(s.rank(), 1);
        assert!((s.sigma()[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.history().dependent, vec![1]);
        assert_eq!(s.v().shape(), (2, 1));
    }

    #[test]
    fn matches_batch_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = DenseMatrix::from_fn(200, 50, |_, _| rng.gen_range(-1.0..1.0));
        let mut s = SvdState::new(200, IsvdConfig::exact());
        s.ingest_simulation(&u).unwrap();
        let batch = thin_svd(&u).unwrap();
        assert_eq!(s.rank(), 50);
        for (a, b) in s.sigma().iter().zip(&batch.sigma) {
            assert!(((a - b) / b).abs() < 1e-8);
        }
        let rec = {
            let mut us = s.phi().clone();
            for (j, &sv) in s.sigma().iter().enumerate() {
                vec_ops::scale(sv, us.col_mut(j));
            }
            us.matmul(&s.v().transpose())
        };
        assert!(rec.max_abs_diff(&u) < 1e-10);
    }

    #[test]
    fn zero_simulation_is_rejected() {
        let mut s = SvdState::new(5, IsvdConfig::default());
        s.ingest_simulation(&DenseMatrix::zeros(5, 3)).unwrap();
        assert_eq!(s.rank(), 0);
        assert_eq!(s.history().rejected, vec![0, 1, 2]);
        assert_eq!(s.columns(), 3);
    }

    #[test]
    fn rank_cap_policies() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = DenseMatrix::from_fn(10, 6, |_, _| rng.gen_range(-1.0..1.0));
        let cfg = IsvdConfig {
            max_rank: 3,
            ..IsvdConfig::exact()
        };
        let mut re = SvdState::new(10, cfg);
        re.ingest_simulation(&u).unwrap();
        assert_eq!(re.history().reinitializations, vec![3]);
        assert_eq!(re.rank(), 3);
        assert_eq!(re.columns(), 6);

        let mut tr = SvdState::new(
            10,
            IsvdConfig {
                on_rank_cap: RankCapPolicy::Truncate,
                ..cfg
            },
        );
        tr.ingest_simulation(&u).unwrap();
        assert!(tr.history().ranks.iter().all(|&r| r <= 3));
        assert!(tr.history().reinitializations.is_empty());
        assert!(tr.phi().orthonormality_error() < 1e-12);
    }

    #[test]
    fn batch_pod_orthogonal_columns() {
        let u = DenseMatrix::from_rows(&[&[3.0, 0.0], &[0.0, 2.0], &[0.0, 0.0]]);
        let (phi, sigma, _) = batch_pod(&u, 2).unwrap();
        assert_eq!(sigma, vec![3.0, 2.0]);
        assert_eq!(phi.col(0), &[1.0, 0.0, 0.0]);
        assert_eq!(phi.col(1), &[0.0, 1.0, 0.0]);
        assert!(matches!(batch_pod(&u, 0), Err(BasisError::RankTooSmall { .. })));
        assert!(matches!(
            batch_pod(&u, 3),
            Err(BasisError::RankTooSmall { available: 2, .. })
        ));
    }

    #[test]
    fn temporal_slicing() {
        let v = DenseMatrix::from_col_major(6, 1, (1..=6).map(f64::from).collect()).unwrap();
        let t = temporal_snapshots(&v, 0, 3, 2).unwrap();
        assert_eq!(t, DenseMatrix::from_rows(&[&[1.0, 4.0], &[2.0, 5.0], &[3.0, 6.0]]));
        assert!(temporal_snapshots(&v, 1, 3, 2).is_err());
        assert!(temporal_snapshots(&v, 0, 4, 2).is_err());
    }

    #[test]
    fn single_sample_temporal_basis_is_normalized_slice() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = DenseMatrix::from_fn(8, 5, |_, _| rng.gen_range(-1.0..1.0));
        let mut s = SvdState::new(8, IsvdConfig::exact());
        s.ingest_simulation(&u).unwrap();
        let b = build_basis_set(&s, 3, 1, 5, 1).unwrap();
        for i in 0..3 {
            let vi = s.v().col(i);
            let psi = b.temporal[i].col(0);
            let sign = if vec_ops::dot(vi, psi) < 0.0 { -1.0 } else { 1.0 };
            assert!(vi.iter().zip(psi).all(|(a, b)| (a - sign * b).abs() < 1e-12));
        }
        assert!(matches!(
            build_basis_set(&s, 3, 2, 5, 1),
            Err(BasisError::RankTooSmall { .. })
        ));
    }
}
