//! Spatial Galerkin ROM: `x ≈ x_ref + Φ_s x̂`, marched with backward Euler.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::basis::BasisSet;
use crate::linalg::{vec_ops, DenseMatrix, LinalgError, LuFactorization};
use crate::system::{InputSignal, LinearDynamicalSystem, TimeGrid};

#[derive(Debug, Error)]
pub enum RomError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("reduced system is singular ({0}); try a smaller basis or better-conditioned modes")]
    Singular(LinalgError),

    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), RomError> {
    if expected == got {
        Ok(())
    } else {
        Err(RomError::Dimension { what, expected, got })
    }
}

/// Reference state subtracted before projection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RefMode {
    Zero,
    /// `x_ref = x0`, which makes the reduced initial state zero.
    #[default]
    InitialState,
}

impl fmt::Display for RefMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::InitialState => "initial_state",
        })
    }
}

impl FromStr for RefMode {
    type Err = RomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "zero" => Ok(Self::Zero),
            "initial_state" => Ok(Self::InitialState),
            other => Err(RomError::Invalid(format!(
                "unknown ref_mode `{other}` (expected zero or initial_state)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpatialRom {
    pub phi: DenseMatrix,
    /// `Φᵀ A Φ`
    pub a_hat: DenseMatrix,
    /// `Φᵀ B`
    pub b_hat: DenseMatrix,
    /// `Φᵀ C`
    pub c_hat: DenseMatrix,
    pub x_ref: Vec<f64>,
    /// `Φᵀ A x_ref`
    pub x_ref_hat: Vec<f64>,
    /// `Φᵀ (x0 - x_ref)`
    pub x0_hat: Vec<f64>,
    /// `Cᵀ x_ref`
    pub y_ref: Vec<f64>,
    pub ref_mode: RefMode,
}

impl SpatialRom {
    pub fn n_s(&self) -> usize {
        self.phi.cols()
    }
}

pub fn build_spatial_rom(
    sys: &LinearDynamicalSystem,
    basis: &BasisSet,
    ref_mode: RefMode,
) -> Result<SpatialRom, RomError> {
    spatial_rom_from_basis(sys, &basis.spatial, ref_mode)
}

/// Galerkin projection onto the columns of `phi`.
pub fn spatial_rom_from_basis(
    sys: &LinearDynamicalSystem,
    phi: &DenseMatrix,
    ref_mode: RefMode,
) -> Result<SpatialRom, RomError> {
    check_dim("basis rows", sys.n_states(), phi.rows())?;
    let a_hat = phi.tr_matmul(&sys.a.mul_dense(phi));
    let b_hat = phi.tr_matmul(&sys.b.to_dense());
    let c_hat = phi.tr_matmul(&sys.c);
    let x_ref = match ref_mode {
        RefMode::Zero => vec![0.0; sys.n_states()],
        RefMode::InitialState => sys.x0.clone(),
    };
    let x_ref_hat = phi.tr_matvec(&sys.a.matvec(&x_ref));
    let x0_hat = match ref_mode {
        RefMode::Zero => phi.tr_matvec(&sys.x0),
        RefMode::InitialState => vec![0.0; phi.cols()],
    };
    let y_ref = sys.c.tr_matvec(&x_ref);
    Ok(SpatialRom {
        phi: phi.clone(),
        a_hat,
        b_hat,
        c_hat,
        x_ref,
        x_ref_hat,
        x0_hat,
        y_ref,
        ref_mode,
    })
}

/// `(I - dt Â) x̂_k = x̂_{k-1} + dt B̂ f_k + dt x̂_ref`; column `k` is `x̂_k`.
pub fn srom_march(rom: &SpatialRom, grid: &TimeGrid, input: &InputSignal) -> Result<DenseMatrix, RomError> {
    let n = rom.n_s();
    check_dim("input dimension", rom.b_hat.cols(), input.dim())?;
    if let InputSignal::Table(t) = input {
        if t.cols() < grid.steps() {
            return Err(RomError::Invalid(format!(
                "input table has fewer than {} columns",
                grid.steps()
            )));
        }
    }
    let mut factors: Vec<(u64, LuFactorization)> = Vec::new();
    for dt in grid.distinct_dts() {
        let m = DenseMatrix::identity(n).add_scaled(-dt, &rom.a_hat);
        let lu = LuFactorization::new(&m).map_err(RomError::Singular)?;
        factors.push((dt.to_bits(), lu));
    }
    let mut out = DenseMatrix::zeros(n, grid.steps());
    let mut x = rom.x0_hat.clone();
    let mut bf_const: Option<Vec<f64>> = None;
    for k in 0..grid.steps() {
        let dt = grid.dt(k);
        let bf = match (input.is_constant(), &bf_const) {
            (true, Some(v)) => v.clone(),
            _ => {
                let v = rom.b_hat.matvec(input.at(k));
                if input.is_constant() {
                    bf_const = Some(v.clone());
                }
                v
            }
        };
        let mut rhs = x;
        for i in 0..n {
            rhs[i] += dt * (bf[i] + rom.x_ref_hat[i]);
        }
        let lu = &factors.iter().find(|(b, _)| *b == dt.to_bits()).expect("factored").1;
        x = lu.solve(&rhs);
        out.col_mut(k).copy_from_slice(&x);
    }
    Ok(out)
}

/// `y = Ĉᵀ x̂ + Cᵀ x_ref`.
pub fn srom_output(rom: &SpatialRom, x_hat: &[f64]) -> Vec<f64> {
    vec_ops::add(&rom.c_hat.tr_matvec(x_hat), &rom.y_ref)
}

/// Full states `x_ref + Φ x̂_k` for every column of `x_hat`.
pub fn srom_reconstruct(rom: &SpatialRom, x_hat: &DenseMatrix) -> DenseMatrix {
    let mut out = rom.phi.matmul(x_hat);
    if rom.x_ref.iter().any(|&v| v != 0.0) {
        for k in 0..out.cols() {
            vec_ops::axpy(1.0, &rom.x_ref, out.col_mut(k));
        }
    }
    out
}
