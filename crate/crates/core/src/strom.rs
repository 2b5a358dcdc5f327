//! Space-time Galerkin ROM assembled block by block.
//!
//! The space-time basis has columns `ψ_i^j ⊗ φ_i` (temporal mode `j` of
//! spatial mode `i`), global index `i + n_s j`. Its `(k, j)` block is
//! `Φ_s E_k^j` with `E_k^j = diag(ψ_1^j(k), ..., ψ_{n_s}^j(k))`, so every
//! projected quantity reduces to sums over `k` of diagonal products and the
//! `N_s N_t`-row basis is never formed. The reference state is zero on this
//! path.

use crate::basis::BasisSet;
use crate::linalg::{kron, DenseMatrix, LuFactorization};
use crate::par;
use crate::srom::{check_dim, RomError, SpatialRom};
use crate::system::{InputSignal, TimeGrid};

/// `E_k^j` diagonals for all `(k, j)`; the length-`n_s` diagonal of a given
/// `(k, j)` is contiguous.
#[derive(Clone, Debug)]
pub struct TemporalDiag {
    n_s: usize,
    n_t: usize,
    n_steps: usize,
    data: Vec<f64>,
}

impl TemporalDiag {
    pub fn new(basis: &BasisSet) -> Self {
        let (n_s, n_t, n_steps) = (basis.n_s(), basis.n_t(), basis.n_steps());
        let mut data = vec![0.0; n_s * n_t * n_steps];
        for (i, psi) in basis.temporal.iter().enumerate() {
            for j in 0..n_t {
                for (k, &v) in psi.col(j).iter().enumerate() {
                    data[(j * n_steps + k) * n_s + i] = v;
                }
            }
        }
        Self {
            n_s,
            n_t,
            n_steps,
            data,
        }
    }

    /// Diagonal of `E_k^j`.
    pub fn get(&self, k: usize, j: usize) -> &[f64] {
        let o = (j * self.n_steps + k) * self.n_s;
        &self.data[o..o + self.n_s]
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// `N_t x n_s` matrix with rows `E_k^j`, i.e. column `i` is `ψ_i^j`.
    fn mode_matrix(&self, j: usize) -> DenseMatrix {
        DenseMatrix::from_fn(self.n_steps, self.n_s, |k, i| self.get(k, j)[i])
    }
}

/// Diagonal of `E_k^j`, checked.
pub fn temporal_diag(basis: &BasisSet, k: usize, j: usize) -> Result<Vec<f64>, RomError> {
    if k >= basis.n_steps() || j >= basis.n_t() {
        return Err(RomError::Invalid(format!(
            "temporal index (k = {k}, j = {j}) outside {} steps x {} modes",
            basis.n_steps(),
            basis.n_t()
        )));
    }
    Ok(basis.temporal.iter().map(|psi| psi[(k, j)]).collect())
}

fn check_basis(srom: &SpatialRom, basis: &BasisSet, grid: &TimeGrid) -> Result<(), RomError> {
    check_dim("spatial modes", basis.n_s(), srom.n_s())?;
    check_dim("time steps", basis.n_steps(), grid.steps())
}

/// Reduced space-time operator `Φ_stᵀ A_st Φ_st`.
///
/// Block `(j', j)` is
/// `Σ_k (E_k^{j'} E_k^j - dt_k E_k^{j'} Â E_k^j) - Σ_{k < N_t - 1} E_{k+1}^{j'} E_k^j`,
/// evaluated entrywise as `diag(d) - Â ∘ G` with
/// `G(i', i) = Σ_k dt_k ψ_{i'}^{j'}(k) ψ_i^j(k)`.
pub fn build_st_matrix(srom: &SpatialRom, basis: &BasisSet, grid: &TimeGrid) -> Result<DenseMatrix, RomError> {
    check_basis(srom, basis, grid)?;
    let diag = TemporalDiag::new(basis);
    Ok(st_matrix_from_diag(&srom.a_hat, &diag, grid.dts()))
}

pub(crate) fn st_matrix_from_diag(a_hat: &DenseMatrix, diag: &TemporalDiag, dts: &[f64]) -> DenseMatrix {
    let (n_s, n_t, n_steps) = (diag.n_s(), diag.n_t(), diag.n_steps());
    let modes: Vec<DenseMatrix> = (0..n_t).map(|j| diag.mode_matrix(j)).collect();
    let weighted: Vec<DenseMatrix> = modes
        .iter()
        .map(|m| DenseMatrix::from_fn(n_steps, n_s, |k, i| dts[k] * m[(k, i)]))
        .collect();

    let blocks: Vec<DenseMatrix> = par::map_collect(n_t * n_t, n_t * n_t * n_steps * n_s * n_s, |b| {
        let (jp, j) = (b % n_t, b / n_t);
        let g = weighted[jp].tr_matmul(&modes[j]);
        let mut block = DenseMatrix::zeros(n_s, n_s);
        for i in 0..n_s {
            let mut mass = 0.0;
            for k in 0..n_steps {
                mass += diag.get(k, jp)[i] * diag.get(k, j)[i];
            }
            let mut shift = 0.0;
            for k in 0..n_steps.saturating_sub(1) {
                shift += diag.get(k + 1, jp)[i] * diag.get(k, j)[i];
            }
            block[(i, i)] = mass - shift;
        }
        for i in 0..n_s {
            for ip in 0..n_s {
                block[(ip, i)] -= a_hat[(ip, i)] * g[(ip, i)];
            }
        }
        block
    });

    let n = n_s * n_t;
    let mut out = DenseMatrix::zeros(n, n);
    for (b, block) in blocks.iter().enumerate() {
        let (jp, j) = (b % n_t, b / n_t);
        out.set_block(jp * n_s, j * n_s, block);
    }
    out
}

/// Reduced input `Φ_stᵀ f_st`: block `j` is `Σ_k dt_k E_k^j B̂ f_k`. A constant
/// input takes the shortcut `(Σ_k dt_k E_k^j) B̂ f`.
pub fn build_st_input(
    srom: &SpatialRom,
    basis: &BasisSet,
    grid: &TimeGrid,
    input: &InputSignal,
) -> Result<Vec<f64>, RomError> {
    check_basis(srom, basis, grid)?;
    check_dim("input dimension", srom.b_hat.cols(), input.dim())?;
    let diag = TemporalDiag::new(basis);
    if input.is_constant() {
        let bf = srom.b_hat.matvec(input.at(0));
        Ok(st_input_constant(&diag, grid.dts(), &bf))
    } else {
        if let InputSignal::Table(t) = input {
            if t.cols() < grid.steps() {
                return Err(RomError::Invalid(format!(
                    "input table has fewer than {} columns",
                    grid.steps()
                )));
            }
        }
        let bfs: Vec<Vec<f64>> = (0..grid.steps()).map(|k| srom.b_hat.matvec(input.at(k))).collect();
        Ok(st_input_general(&diag, grid.dts(), &bfs))
    }
}

pub(crate) fn st_input_general(diag: &TemporalDiag, dts: &[f64], bfs: &[Vec<f64>]) -> Vec<f64> {
    let (n_s, n_t) = (diag.n_s(), diag.n_t());
    let mut out = vec![0.0; n_s * n_t];
    for j in 0..n_t {
        let blk = &mut out[j * n_s..(j + 1) * n_s];
        for (k, bf) in bfs.iter().enumerate() {
            let e = diag.get(k, j);
            for i in 0..n_s {
                blk[i] += dts[k] * (e[i] * bf[i]);
            }
        }
    }
    out
}

pub(crate) fn st_input_constant(diag: &TemporalDiag, dts: &[f64], bf: &[f64]) -> Vec<f64> {
    let (n_s, n_t) = (diag.n_s(), diag.n_t());
    let mut out = vec![0.0; n_s * n_t];
    for j in 0..n_t {
        let mut s = vec![0.0; n_s];
        for (k, &dt) in dts.iter().enumerate() {
            let e = diag.get(k, j);
            for i in 0..n_s {
                s[i] += dt * e[i];
            }
        }
        for i in 0..n_s {
            out[j * n_s + i] = s[i] * bf[i];
        }
    }
    out
}

/// Reduced initial vector `Φ_stᵀ x0_st`: block `j` is `E_1^j x̂0` with
/// `x̂0 = Φ_sᵀ x0`. Only the first time step carries `x0`, so every temporal
/// mode contributes its first entry.
pub fn build_st_init(basis: &BasisSet, x0_hat: &[f64]) -> Result<Vec<f64>, RomError> {
    check_dim("reduced initial state", basis.n_s(), x0_hat.len())?;
    let (n_s, n_t) = (basis.n_s(), basis.n_t());
    let mut out = vec![0.0; n_s * n_t];
    for j in 0..n_t {
        for i in 0..n_s {
            out[j * n_s + i] = basis.temporal[i][(0, j)] * x0_hat[i];
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SpaceTimeRom {
    pub a_st_hat: DenseMatrix,
    pub f_st_hat: Vec<f64>,
    pub x0_st_hat: Vec<f64>,
    pub n_s: usize,
    pub n_t: usize,
}

/// Assembles the reduced space-time system for the spatial ROM's operators
/// and the initial state `x0`.
pub fn build_space_time_rom(
    srom: &SpatialRom,
    basis: &BasisSet,
    grid: &TimeGrid,
    input: &InputSignal,
    x0: &[f64],
) -> Result<SpaceTimeRom, RomError> {
    check_dim("initial state", srom.phi.rows(), x0.len())?;
    let a_st_hat = build_st_matrix(srom, basis, grid)?;
    let f_st_hat = build_st_input(srom, basis, grid, input)?;
    let x0_st_hat = build_st_init(basis, &srom.phi.tr_matvec(x0))?;
    Ok(SpaceTimeRom {
        a_st_hat,
        f_st_hat,
        x0_st_hat,
        n_s: basis.n_s(),
        n_t: basis.n_t(),
    })
}

/// Solves `Â_st x̂ = f̂_st + x̂0_st`.
pub fn solve_strom(rom: &SpaceTimeRom) -> Result<Vec<f64>, RomError> {
    let rhs: Vec<f64> = rom.f_st_hat.iter().zip(&rom.x0_st_hat).map(|(a, b)| a + b).collect();
    let lu = LuFactorization::new(&rom.a_st_hat).map_err(RomError::Singular)?;
    Ok(lu.solve(&rhs))
}

/// `x̃_k = Φ_s Σ_j E_k^j x̂^(j)`.
pub fn reconstruct(basis: &BasisSet, x_hat: &[f64], k: usize) -> Result<Vec<f64>, RomError> {
    let (n_s, n_t) = (basis.n_s(), basis.n_t());
    check_dim("space-time coefficients", n_s * n_t, x_hat.len())?;
    if k >= basis.n_steps() {
        return Err(RomError::Invalid(format!("step {k} outside {} steps", basis.n_steps())));
    }
    let coef: Vec<f64> = (0..n_s)
        .map(|i| (0..n_t).map(|j| basis.temporal[i][(k, j)] * x_hat[i + n_s * j]).sum())
        .collect();
    Ok(basis.spatial.matvec(&coef))
}

/// All reconstructed states, `N_s x N_t`.
pub fn reconstruct_all(basis: &BasisSet, x_hat: &[f64]) -> Result<DenseMatrix, RomError> {
    let (n_s, n_t) = (basis.n_s(), basis.n_t());
    check_dim("space-time coefficients", n_s * n_t, x_hat.len())?;
    let coef = DenseMatrix::from_fn(n_s, basis.n_steps(), |i, k| {
        (0..n_t).map(|j| basis.temporal[i][(k, j)] * x_hat[i + n_s * j]).sum()
    });
    Ok(basis.spatial.matmul(&coef))
}

/// The explicit `N_s N_t x n_s n_t` basis with columns `ψ_i^j ⊗ φ_i`.
/// Verification only.
pub fn explicit_st_basis(basis: &BasisSet, cap: usize) -> Result<DenseMatrix, RomError> {
    let (n_s, n_t) = (basis.n_s(), basis.n_t());
    let rows = basis.n_states() * basis.n_steps();
    if rows > cap {
        return Err(RomError::Invalid(format!(
            "explicit space-time basis refused: N_s*N_t = {rows} exceeds the cap {cap}"
        )));
    }
    let mut out = DenseMatrix::zeros(rows, n_s * n_t);
    for j in 0..n_t {
        for i in 0..n_s {
            let psi = basis.temporal[i].block(0, j, basis.n_steps(), 1);
            let phi = basis.spatial.block(0, i, basis.n_states(), 1);
            out.col_mut(i + n_s * j).copy_from_slice(kron(&psi, &phi).as_slice());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::qr;
    use crate::srom::RefMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        qr(&DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0)))
            .unwrap()
            .0
    }

    fn random_basis(n_states: usize, n_steps: usize, n_s: usize, n_t: usize, seed: u64) -> BasisSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spatial = orthonormal(n_states, n_s, &mut rng);
        let temporal = (0..n_s).map(|_| orthonormal(n_steps, n_t, &mut rng)).collect();
        BasisSet::new(spatial, temporal, n_t).unwrap()
    }

    fn rom_with(a_hat: DenseMatrix, basis: &BasisSet) -> SpatialRom {
        let n_s = basis.n_s();
        SpatialRom {
            phi: basis.spatial.clone(),
            a_hat,
            b_hat: DenseMatrix::from_fn(n_s, 1, |i, _| 1.0 + i as f64),
            c_hat: DenseMatrix::zeros(n_s, 1),
            x_ref: vec![0.0; basis.n_states()],
            x_ref_hat: vec![0.0; n_s],
            x0_hat: vec![0.0; n_s],
            y_ref: vec![0.0],
            ref_mode: RefMode::Zero,
        }
    }

    #[test]
    fn single_block_collapses() {
        let basis = BasisSet::new(DenseMatrix::identity(2), vec![DenseMatrix::identity(1); 2], 1).unwrap();
        let a_hat = DenseMatrix::from_rows(&[&[-1.0, 0.5], &[0.25, -2.0]]);
        let rom = rom_with(a_hat.clone(), &basis);
        let grid = TimeGrid::uniform(0.1, 1).unwrap();
        let m = build_st_matrix(&rom, &basis, &grid).unwrap();
        let expect = DenseMatrix::identity(2).add_scaled(-0.1, &a_hat);
        assert!(m.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn zero_operator_orthonormal_columns() {
        let basis = random_basis(5, 6, 2, 2, 1);
        let rom = rom_with(DenseMatrix::zeros(2, 2), &basis);
        let grid = TimeGrid::uniform(0.3, 6).unwrap();
        let m = build_st_matrix(&rom, &basis, &grid).unwrap();
        let diag = TemporalDiag::new(&basis);
        for jp in 0..2 {
            for j in 0..2 {
                for i in 0..2 {
                    let shift: f64 = (0..5).map(|k| diag.get(k + 1, jp)[i] * diag.get(k, j)[i]).sum();
                    let delta = if jp == j { 1.0 } else { 0.0 };
                    assert!((m[(jp * 2 + i, j * 2 + i)] - (delta - shift)).abs() < 1e-14);
                }
                assert_eq!(m[(jp * 2, j * 2 + 1)], 0.0);
            }
        }
    }

    #[test]
    fn temporal_diag_matches_basis() {
        let basis = random_basis(4, 5, 3, 2, 2);
        let d = TemporalDiag::new(&basis);
        for k in 0..5 {
            for j in 0..2 {
                assert_eq!(d.get(k, j), temporal_diag(&basis, k, j).unwrap().as_slice());
            }
        }
        assert!(temporal_diag(&basis, 5, 0).is_err());
    }

    #[test]
    fn input_paths_agree() {
        let basis = random_basis(6, 7, 3, 2, 4);
        let rom = rom_with(DenseMatrix::zeros(3, 3), &basis);
        let grid = TimeGrid::new(vec![0.1, 0.2, 0.1, 0.3, 0.1, 0.05, 0.1]).unwrap();
        let f = 0.7;
        let constant = build_st_input(&rom, &basis, &grid, &InputSignal::Constant(vec![f])).unwrap();
        let table = InputSignal::Table(DenseMatrix::from_fn(1, 7, |_, _| f));
        let general = build_st_input(&rom, &basis, &grid, &table).unwrap();
        for (a, b) in constant.iter().zip(&general) {
            assert!((a - b).abs() < 1e-13);
        }
        let zero = build_st_input(&rom, &basis, &grid, &InputSignal::Constant(vec![0.0])).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rank_one_reconstruction() {
        let basis = BasisSet::new(
            DenseMatrix::from_rows(&[&[0.6], &[0.8]]),
            vec![DenseMatrix::from_rows(&[&[0.0], &[1.0]])],
            1,
        )
        .unwrap();
        let x = reconstruct(&basis, &[2.0], 1).unwrap();
        assert!((x[0] - 1.2).abs() < 1e-15 && (x[1] - 1.6).abs() < 1e-15);
        assert_eq!(reconstruct(&basis, &[0.0], 0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn explicit_basis_is_orthonormal() {
        let basis = random_basis(5, 4, 3, 2, 9);
        let phi_st = explicit_st_basis(&basis, 1000).unwrap();
        assert!(phi_st.orthonormality_error() < 1e-13);
        assert!(explicit_st_basis(&basis, 10).is_err());
    }

    #[test]
    fn scalar_solve() {
        let rom = SpaceTimeRom {
            a_st_hat: DenseMatrix::from_rows(&[&[4.0]]),
            f_st_hat: vec![1.0],
            x0_st_hat: vec![1.0],
            n_s: 1,
            n_t: 1,
        };
        assert_eq!(solve_strom(&rom).unwrap(), vec![0.5]);
    }
}
