//! A-posteriori error bounds for approximate backward-Euler trajectories.
//!
//! Three estimators are provided:
//!
//! * [`bound_theorem1`]: residual based, valid for any approximation with
//!   `x̃_0 = x_0`; `‖e_k‖ ≤ β_k (‖e_{k-1}‖ + ‖r_k‖)` with
//!   `β_k = ‖(I - dt_k A)⁻¹‖₂`.
//! * [`bound_theorem2`]: specific to Galerkin spatial ROMs;
//!   `‖e_k‖ ≤ γ_k (‖e_{k-1}‖ + ‖w_k‖)` with `γ_k = 1 / (1 - dt_k ‖A‖₂)` and
//!   `w_k = dt_k (A x̃_k + B f_k)`.
//! * [`bound_theorem3`]: space-time residual based,
//!   `max_k ‖e_k‖ ≤ √N_t ‖A_st⁻¹‖₂ max_k ‖r_k‖`.
//!
//! Operator norms come from dense SVDs for small systems and from power
//! iteration otherwise.

use std::fmt;

use thiserror::Error;

use crate::linalg::{
    largest_singular_value, thin_svd, vec_ops, DenseMatrix, FnOperator, LinalgError, PowerIterationOptions,
};
use crate::system::{
    operator_norm, step_residual, LinearDynamicalSystem, StInverseOperator, StepSolver, SystemError, TimeGrid,
};

/// Below this many unknowns, norms of step inverses use a dense SVD.
pub const DENSE_NORM_LIMIT: usize = 256;

/// Absolute-plus-relative slack allowed when checking `bound >= error`.
pub const DOMINANCE_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error(transparent)]
    System(#[from] SystemError),

    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), BoundError> {
    if expected == got {
        Ok(())
    } else {
        Err(BoundError::Dimension { what, expected, got })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    Residual,
    SpatialRom,
    SpaceTime,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Residual => "theorem1_residual",
            Self::SpatialRom => "theorem2_spatial_rom",
            Self::SpaceTime => "theorem3_space_time",
        })
    }
}

#[derive(Clone, Debug)]
pub struct BoundReport {
    pub kind: BoundKind,
    /// Bound on `‖x_k - x̃_k‖₂` per step. For the space-time bound every entry
    /// is the same scalar.
    pub bounds: Vec<f64>,
    /// Per-step factors: `β_k`, `γ_k`, or empty for the space-time bound.
    pub constants: Vec<f64>,
    /// `‖r_k‖₂` (residual and space-time bounds) or `‖w_k‖₂`.
    pub residual_norms: Vec<f64>,
    /// `‖x_k - x̃_k‖₂` when a reference trajectory was supplied.
    pub errors: Option<Vec<f64>>,
    /// `‖A_st⁻¹‖₂`, space-time bound only.
    pub inverse_norm: Option<f64>,
}

impl BoundReport {
    /// `Π_k c_k` over all per-step factors.
    pub fn constant_product(&self) -> f64 {
        self.constants.iter().product()
    }

    /// `max_k ‖x_k - x̃_k‖₂`.
    pub fn max_error(&self) -> Option<f64> {
        self.errors.as_ref().map(|e| e.iter().copied().fold(0.0, f64::max))
    }

    pub fn final_bound(&self) -> f64 {
        self.bounds.last().copied().unwrap_or(0.0)
    }

    /// Whether each bound dominates its error, up to [`DOMINANCE_SLACK`].
    /// `None` without reference errors.
    pub fn valid(&self) -> Option<bool> {
        let errors = self.errors.as_ref()?;
        Some(
            errors
                .iter()
                .zip(&self.bounds)
                .all(|(&e, &b)| e <= b + DOMINANCE_SLACK * (1.0 + b)),
        )
    }
}

fn check_states(
    sys: &LinearDynamicalSystem,
    grid: &TimeGrid,
    states: &DenseMatrix,
    what: &'static str,
) -> Result<(), BoundError> {
    sys.check_grid(grid)?;
    check_dim(what, sys.n_states(), states.rows())?;
    check_dim("trajectory length", grid.steps(), states.cols())
}

fn step_errors(
    sys: &LinearDynamicalSystem,
    grid: &TimeGrid,
    approx: &DenseMatrix,
    reference: Option<&DenseMatrix>,
) -> Result<Option<Vec<f64>>, BoundError> {
    let Some(exact) = reference else { return Ok(None) };
    check_states(sys, grid, exact, "reference rows")?;
    Ok(Some(
        (0..grid.steps())
            .map(|k| vec_ops::norm2(&vec_ops::sub(exact.col(k), approx.col(k))))
            .collect(),
    ))
}

/// `b_k = c_k (b_{k-1} + n_k)`, the recursive form of
/// `Σ_{i ≤ k} (Π_{j=i}^k c_j) n_i`.
fn accumulate(constants: &[f64], norms: &[f64]) -> Vec<f64> {
    let mut b = 0.0;
    constants
        .iter()
        .zip(norms)
        .map(|(c, n)| {
            b = c * (b + n);
            b
        })
        .collect()
}

/// `‖(I - dt A)⁻¹‖₂` for each distinct step size, matched back to steps.
pub fn step_inverse_norms(
    sys: &LinearDynamicalSystem,
    grid: &TimeGrid,
    opts: &PowerIterationOptions,
) -> Result<Vec<f64>, BoundError> {
    let distinct = grid.distinct_dts();
    let n = sys.n_states();
    let mut norms = Vec::with_capacity(distinct.len());
    if n < DENSE_NORM_LIMIT {
        for &dt in &distinct {
            let sigma = thin_svd(&sys.step_matrix(dt).to_dense())?.sigma;
            let smin = sigma.last().copied().unwrap_or(0.0);
            if smin <= 0.0 {
                return Err(LinalgError::Singular {
                    pivot: n.saturating_sub(1),
                    magnitude: smin,
                }
                .into());
            }
            norms.push(1.0 / smin);
        }
    } else {
        let solver = StepSolver::new(sys, &distinct)?;
        for &dt in &distinct {
            let op = FnOperator::new(
                n,
                n,
                |x: &[f64]| solver.solve(dt, x, 0),
                |y: &[f64]| solver.solve_transpose(dt, y, 0),
            );
            norms.push(largest_singular_value(&op, opts)?);
        }
    }
    Ok(grid
        .dts()
        .iter()
        .map(|dt| {
            let i = distinct
                .iter()
                .position(|d| d.to_bits() == dt.to_bits())
                .expect("distinct");
            norms[i]
        })
        .collect())
}

/// Residual norms `‖r_k(x̃_k, x̃_{k-1})‖₂` with `x̃_0 = x_0`.
fn residual_norms(sys: &LinearDynamicalSystem, grid: &TimeGrid, approx: &DenseMatrix) -> Result<Vec<f64>, BoundError> {
    (0..grid.steps())
        .map(|k| {
            let prev = if k == 0 { &sys.x0[..] } else { approx.col(k - 1) };
            let r = step_residual(sys, grid.dt(k), approx.col(k), prev, sys.input_at(k))?;
            Ok(vec_ops::norm2(&r))
        })
        .collect()
}

/// Residual-based bound for any approximate trajectory. Column `k` of
/// `approx_states` is `x̃_k`; the initial state is taken to be exact.
pub fn bound_theorem1(
    sys: &LinearDynamicalSystem,
    grid: &TimeGrid,
    approx_states: &DenseMatrix,
    reference: Option<&DenseMatrix>,
    opts: &PowerIterationOptions,
) -> Result<BoundReport, BoundError> {
    check_states(sys, grid, approx_states, "approximate state rows")?;
    let constants = step_inverse_norms(sys, grid, opts)?;
    let residual_norms = residual_norms(sys, grid, approx_states)?;
    Ok(BoundReport {
        kind: BoundKind::Residual,
        bounds: accumulate(&constants, &residual_norms),
        constants,
        residual_norms,
        errors: step_errors(sys, grid, approx_states, reference)?,
        inverse_norm: None,
    })
}

/// Bound for trajectories of a Galerkin spatial ROM whose increments lie in
/// the basis range. Requires `dt_k ‖A‖₂ < 1` for every step.
pub fn bound_theorem2(
    sys: &LinearDynamicalSystem,
    grid: &TimeGrid,
    approx_states: &DenseMatrix,
    reference: Option<&DenseMatrix>,
    opts: &PowerIterationOptions,
) -> Result<BoundReport, BoundError> {
    check_states(sys, grid, approx_states, "approximate state rows")?;
    let a_norm = operator_norm(&sys.a, opts)?;
    let mut constants = Vec::with_capacity(grid.steps());
    for (k, &dt) in grid.dts().iter().enumerate() {
        let q = dt * a_norm;
        if q >= 1.0 {
            return Err(BoundError::Precondition(format!(
                "the spatial-ROM bound assumes dt < 1/‖A‖₂, but step {k} has dt = {dt:e} with ‖A‖₂ = {a_norm:e} (dt ‖A‖₂ = {q:.3})"
            )));
        }
        constants.push(1.0 / (1.0 - q));
    }
    let w_norms: Vec<f64> = (0..grid.steps())
        .map(|k| {
            let dt = grid.dt(k);
            let mut w = sys.a.matvec(approx_states.col(k));
            vec_ops::axpy(1.0, &sys.b.matvec(sys.input_at(k)), &mut w);
            dt * vec_ops::norm2(&w)
        })
        .collect();
    Ok(BoundReport {
        kind: BoundKind::SpatialRom,
        bounds: accumulate(&constants, &w_norms),
        constants,
        residual_norms: w_norms,
        errors: step_errors(sys, grid, approx_states, reference)?,
        inverse_norm: None,
    })
}

/// `‖A_st⁻¹‖₂`, matrix-free by power iteration over block substitutions.
pub fn st_inverse_norm(
    sys: &LinearDynamicalSystem,
    grid: &TimeGrid,
    opts: &PowerIterationOptions,
) -> Result<f64, BoundError> {
    sys.check_grid(grid)?;
    let solver = StepSolver::for_grid(sys, grid)?;
    let op = StInverseOperator { solver: &solver, grid };
    Ok(largest_singular_value(&op, opts)?)
}

/// Space-time residual bound on `max_k ‖x_k - x̃_k‖₂`. `approx_st` stacks
/// `x̃_1, ..., x̃_{N_t}`.
pub fn bound_theorem3(
    sys: &LinearDynamicalSystem,
    grid: &TimeGrid,
    approx_st: &[f64],
    reference: Option<&DenseMatrix>,
    opts: &PowerIterationOptions,
) -> Result<BoundReport, BoundError> {
    sys.check_grid(grid)?;
    let n = sys.n_states();
    check_dim("space-time vector", n * grid.steps(), approx_st.len())?;
    let approx = DenseMatrix::from_col_major(n, grid.steps(), approx_st.to_vec())?;
    let inverse_norm = st_inverse_norm(sys, grid, opts)?;
    let residual_norms = residual_norms(sys, grid, &approx)?;
    let r_max = residual_norms.iter().copied().fold(0.0, f64::max);
    let bound = (grid.steps() as f64).sqrt() * inverse_norm * r_max;
    Ok(BoundReport {
        kind: BoundKind::SpaceTime,
        bounds: vec![bound; grid.steps()],
        constants: Vec::new(),
        residual_norms,
        errors: step_errors(sys, grid, &approx, reference)?,
        inverse_norm: Some(inverse_norm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseMatrix;
    use crate::system::{fom_march, InputSignal, ParamPoint};

    fn scalar(a: f64, b: f64) -> LinearDynamicalSystem {
        LinearDynamicalSystem::new(
            SparseMatrix::from_triplets(1, 1, &[(0, 0, a)]).unwrap(),
            SparseMatrix::from_triplets(1, 1, &[(0, 0, b)]).unwrap(),
            DenseMatrix::identity(1),
            vec![0.0],
            InputSignal::Constant(vec![1.0]),
            ParamPoint::default(),
        )
        .unwrap()
    }

    #[test]
    fn exact_trajectory_has_zero_bound() {
        let sys = scalar(-1.0, 1.0);
        let grid = TimeGrid::uniform(0.1, 5).unwrap();
        let fom = fom_march(&sys, &grid).unwrap();
        let opts = PowerIterationOptions::default();
        let r1 = bound_theorem1(&sys, &grid, &fom.states, Some(&fom.states), &opts).unwrap();
        assert!(r1.bounds.iter().all(|&b| b.abs() < 1e-15));
        assert_eq!(r1.max_error(), Some(0.0));
        let r3 = bound_theorem3(&sys, &grid, fom.states.as_slice(), None, &opts).unwrap();
        assert!(r3.final_bound().abs() < 1e-14);
    }

    #[test]
    fn scalar_single_step() {
        let sys = scalar(-1.0, 1.0);
        let grid = TimeGrid::uniform(1.0, 1).unwrap();
        let approx = DenseMatrix::from_rows(&[&[0.3]]);
        let opts = PowerIterationOptions::default();
        let r = bound_theorem1(&sys, &grid, &approx, None, &opts).unwrap();
        assert!((r.constants[0] - 0.5).abs() < 1e-15);
        let res = (0.3 + 0.3 - 1.0f64).abs();
        assert!((r.final_bound() - res / 2.0).abs() < 1e-15);
        let r3 = bound_theorem3(&sys, &grid, &[0.3], None, &opts).unwrap();
        assert!((r3.final_bound() - res / 2.0).abs() < 1e-8);
    }

    #[test]
    fn zero_operator_collapses() {
        let sys = scalar(0.0, 2.0);
        let grid = TimeGrid::uniform(0.25, 3).unwrap();
        let approx = DenseMatrix::zeros(1, 3);
        let r = bound_theorem2(&sys, &grid, &approx, None, &PowerIterationOptions::default()).unwrap();
        assert!(r.constants.iter().all(|&g| g == 1.0));
        assert_eq!(r.bounds, vec![0.5, 1.0, 1.5]);
    }

    #[test]
    fn large_step_is_refused() {
        let sys = scalar(-4.0, 1.0);
        let grid = TimeGrid::uniform(0.5, 2).unwrap();
        let err = bound_theorem2(
            &sys,
            &grid,
            &DenseMatrix::zeros(1, 2),
            None,
            &PowerIterationOptions::default(),
        );
        assert!(matches!(err, Err(BoundError::Precondition(_))));
    }

    #[test]
    fn accumulate_matches_explicit_sum() {
        let c = [1.5, 0.5, 2.0];
        let n = [1.0, 3.0, 0.25];
        let b = accumulate(&c, &n);
        for k in 0..3 {
            let explicit: f64 = (0..=k).map(|i| c[i..=k].iter().product::<f64>() * n[i]).sum();
            assert!((b[k] - explicit).abs() < 1e-14);
        }
    }

    #[test]
    fn validity_flag() {
        let report = BoundReport {
            kind: BoundKind::Residual,
            bounds: vec![1.0, 2.0],
            constants: vec![],
            residual_norms: vec![],
            errors: Some(vec![0.5, 2.5]),
            inverse_norm: None,
        };
        assert_eq!(report.valid(), Some(false));
    }
}
