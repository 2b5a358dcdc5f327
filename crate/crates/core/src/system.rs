//! Parametric linear dynamical systems `x' = A x + B f`, `y = Cᵀ x`, and their
//! backward-Euler discretization.
//!
//! Time steps are indexed from 0 here: `grid.dt(k)` advances `x_k` (with
//! `x_{-1} = x0`) and `input_at(k)` is the input applied on that step.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::linalg::{
    largest_singular_value, symmetric_extreme_eigenvalues, vec_ops, BandedLu, DenseMatrix, LinalgError, LinearOperator,
    PowerIterationOptions, SparseMatrix,
};

/// Default ceiling on `N_s * N_t` for explicit space-time assembly.
pub const ST_ASSEMBLY_CAP: usize = 20_000;

/// Relative residual accepted from a step solve.
pub const STEP_SOLVE_RTOL: f64 = 1e-10;

/// Largest state dimension for which stability is checked by a dense
/// eigensolve; above it the Gershgorin test is used.
pub const DENSE_STABILITY_LIMIT: usize = 512;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("invalid system: {0}")]
    Invalid(String),

    #[error(
        "explicit space-time assembly refused: N_s*N_t = {size} exceeds the cap {cap}; \
         the assembled operator exists only as a verification oracle"
    )]
    CapExceeded { size: usize, cap: usize },

    #[error("step solve at step {step} left relative residual {residual:.3e}")]
    SolverResidual { step: usize, residual: f64 },
}

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), SystemError> {
    if expected == got {
        Ok(())
    } else {
        Err(SystemError::Dimension { what, expected, got })
    }
}

/// Named parameter values, e.g. `kappa = 0.5`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamPoint {
    names: Vec<String>,
    values: Vec<f64>,
}

impl ParamPoint {
    pub fn new<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Result<Self, SystemError> {
        let mut p = Self::default();
        for (name, value) in pairs {
            let name = name.into();
            if !value.is_finite() {
                return Err(SystemError::Invalid(format!(
                    "parameter {name} = {value} is not finite"
                )));
            }
            if p.names.contains(&name) {
                return Err(SystemError::Invalid(format!("parameter {name} given twice")));
            }
            p.names.push(name);
            p.values.push(value);
        }
        Ok(p)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl std::fmt::Display for ParamPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, (n, v)) in self.names.iter().zip(&self.values).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{n}={v}")?;
        }
        Ok(())
    }
}

/// Step sizes `dt_0, ..., dt_{N_t - 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    dt: Vec<f64>,
}

impl TimeGrid {
    pub fn new(dt: Vec<f64>) -> Result<Self, SystemError> {
        if dt.is_empty() {
            return Err(SystemError::Grid("no time steps".into()));
        }
        if let Some((k, v)) = dt.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(SystemError::Grid(format!("step {k} has size {v}")));
        }
        Ok(Self { dt })
    }

    pub fn uniform(dt: f64, steps: usize) -> Result<Self, SystemError> {
        Self::new(vec![dt; steps])
    }

    pub fn steps(&self) -> usize {
        self.dt.len()
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.dt[k]
    }

    pub fn dts(&self) -> &[f64] {
        &self.dt
    }

    pub fn final_time(&self) -> f64 {
        self.dt.iter().sum()
    }

    pub fn is_uniform(&self) -> bool {
        self.dt.iter().all(|&d| d == self.dt[0])
    }

    /// Distinct step sizes in order of first appearance.
    pub fn distinct_dts(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &d in &self.dt {
            if !out.iter().any(|&e| e.to_bits() == d.to_bits()) {
                out.push(d);
            }
        }
        out
    }
}

/// The input `f_k` as a function of the step index.
#[derive(Clone, Debug, PartialEq)]
pub enum InputSignal {
    Constant(Vec<f64>),
    /// Column `k` is `f_k`.
    Table(DenseMatrix),
}

impl InputSignal {
    pub fn dim(&self) -> usize {
        match self {
            Self::Constant(f) => f.len(),
            Self::Table(t) => t.rows(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }

    pub fn at(&self, k: usize) -> &[f64] {
        match self {
            Self::Constant(f) => f,
            Self::Table(t) => t.col(k),
        }
    }

    fn covers(&self, steps: usize) -> bool {
        match self {
            Self::Constant(_) => true,
            Self::Table(t) => t.cols() >= steps,
        }
    }
}

/// `x' = A x + B f(t)`, `y = Cᵀ x`, `x(0) = x0`.
#[derive(Clone, Debug)]
pub struct LinearDynamicalSystem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    /// `N_s x N_o`; outputs are `Cᵀ x`.
    pub c: DenseMatrix,
    pub x0: Vec<f64>,
    pub input: InputSignal,
    pub param: ParamPoint,
    /// Positive per-unknown weights of the energy inner product in which `A`
    /// is dissipative, when that is not the Euclidean one.
    pub energy_weights: Option<Vec<f64>>,
}

impl LinearDynamicalSystem {
    pub fn new(
        a: SparseMatrix,
        b: SparseMatrix,
        c: DenseMatrix,
        x0: Vec<f64>,
        input: InputSignal,
        param: ParamPoint,
    ) -> Result<Self, SystemError> {
        let n = a.rows();
        check_dim("A columns", n, a.cols())?;
        check_dim("B rows", n, b.rows())?;
        check_dim("C rows", n, c.rows())?;
        check_dim("x0 length", n, x0.len())?;
        check_dim("input dimension", b.cols(), input.dim())?;
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(SystemError::Invalid("x0 has non-finite entries".into()));
        }
        if let InputSignal::Table(t) = &input {
            if !t.is_finite() {
                return Err(SystemError::Invalid("input table has non-finite entries".into()));
            }
        }
        Ok(Self {
            a,
            b,
            c,
            x0,
            input,
            param,
            energy_weights: None,
        })
    }

    pub fn with_energy_weights(mut self, w: Vec<f64>) -> Result<Self, SystemError> {
        check_dim("energy weights", self.n_states(), w.len())?;
        if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SystemError::Invalid("energy weights must be positive".into()));
        }
        self.energy_weights = Some(w);
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.a.rows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.cols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.cols()
    }

    pub fn input_at(&self, k: usize) -> &[f64] {
        self.input.at(k)
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        self.c.tr_matvec(x)
    }

    pub fn check_grid(&self, grid: &TimeGrid) -> Result<(), SystemError> {
        if self.input.covers(grid.steps()) {
            Ok(())
        } else {
            Err(SystemError::Grid(format!(
                "input table has fewer than {} columns",
                grid.steps()
            )))
        }
    }

    /// `I - dt A`.
    pub fn step_matrix(&self, dt: f64) -> SparseMatrix {
        self.a.shifted(1.0, -dt)
    }
}

/// Cached sparse factorizations of `I - dt A` for a fixed set of step sizes.
pub struct StepSolver<'a> {
    sys: &'a LinearDynamicalSystem,
    factors: Vec<(u64, BandedLu)>,
}

impl<'a> StepSolver<'a> {
    pub fn new(sys: &'a LinearDynamicalSystem, dts: &[f64]) -> Result<Self, SystemError> {
        let mut factors: Vec<(u64, BandedLu)> = Vec::new();
        for &dt in dts {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(SystemError::Grid(format!("step size {dt}")));
            }
            if factors.iter().any(|(bits, _)| *bits == dt.to_bits()) {
                continue;
            }
            factors.push((dt.to_bits(), BandedLu::new(&sys.step_matrix(dt))?));
        }
        Ok(Self { sys, factors })
    }

    pub fn for_grid(sys: &'a LinearDynamicalSystem, grid: &TimeGrid) -> Result<Self, SystemError> {
        Self::new(sys, &grid.distinct_dts())
    }

    pub fn system(&self) -> &LinearDynamicalSystem {
        self.sys
    }

    fn factor(&self, dt: f64) -> &BandedLu {
        &self
            .factors
            .iter()
            .find(|(bits, _)| *bits == dt.to_bits())
            .expect("step size was not prefactored")
            .1
    }

    /// Solves `(I - dt A) x = rhs`; `step` only labels errors.
    pub fn solve(&self, dt: f64, rhs: &[f64], step: usize) -> Result<Vec<f64>, SystemError> {
        self.solve_checked(dt, rhs, step, false)
    }

    /// Solves `(I - dt A)ᵀ x = rhs`.
    pub fn solve_transpose(&self, dt: f64, rhs: &[f64], step: usize) -> Result<Vec<f64>, SystemError> {
        self.solve_checked(dt, rhs, step, true)
    }

    fn solve_checked(&self, dt: f64, rhs: &[f64], step: usize, transpose: bool) -> Result<Vec<f64>, SystemError> {
        check_dim("step right-hand side", self.sys.n_states(), rhs.len())?;
        let lu = self.factor(dt);
        let apply = |x: &[f64]| -> Vec<f64> {
            let ax = if transpose {
                self.sys.a.tr_matvec(x)
            } else {
                self.sys.a.matvec(x)
            };
            x.iter().zip(&ax).map(|(xi, ai)| xi - dt * ai).collect()
        };
        let solve = |b: &[f64]| if transpose { lu.solve_transpose(b) } else { lu.solve(b) };

        let mut x = solve(rhs);
        for refinement in 0..2 {
            let r = vec_ops::sub(rhs, &apply(&x));
            let scale = vec_ops::norm2(rhs).max(vec_ops::norm2(&x));
            let rel = if scale == 0.0 { 0.0 } else { vec_ops::norm2(&r) / scale };
            if rel <= STEP_SOLVE_RTOL {
                return Ok(x);
            }
            if refinement == 1 {
                return Err(SystemError::SolverResidual { step, residual: rel });
            }
            let d = solve(&r);
            vec_ops::axpy(1.0, &d, &mut x);
        }
        unreachable!()
    }
}

/// Solves `(I - dt A) x_k = x_prev + dt B f_k`.
pub fn backward_euler_step(
    sys: &LinearDynamicalSystem,
    dt: f64,
    x_prev: &[f64],
    f_k: &[f64],
) -> Result<Vec<f64>, SystemError> {
    check_dim("x_prev", sys.n_states(), x_prev.len())?;
    check_dim("f_k", sys.n_inputs(), f_k.len())?;
    let solver = StepSolver::new(sys, &[dt])?;
    solver.solve(dt, &step_rhs(sys, dt, x_prev, f_k), 0)
}

fn step_rhs(sys: &LinearDynamicalSystem, dt: f64, x_prev: &[f64], f_k: &[f64]) -> Vec<f64> {
    let mut rhs = sys.b.matvec(f_k);
    vec_ops::scale(dt, &mut rhs);
    vec_ops::axpy(1.0, x_prev, &mut rhs);
    rhs
}

#[derive(Clone, Debug)]
pub struct FomSolution {
    /// `N_s x N_t`, column `k` is `x_k`.
    pub states: DenseMatrix,
    /// `N_o x N_t`, column `k` is `Cᵀ x_k`.
    pub outputs: DenseMatrix,
    /// Factorization plus march.
    pub wall_time: Duration,
}

/// Backward-Euler march from `x0` over `grid`.
pub fn fom_march(sys: &LinearDynamicalSystem, grid: &TimeGrid) -> Result<FomSolution, SystemError> {
    sys.check_grid(grid)?;
    let start = Instant::now();
    let solver = StepSolver::for_grid(sys, grid)?;
    let n = sys.n_states();
    let mut states = DenseMatrix::zeros(n, grid.steps());
    let mut x = sys.x0.clone();
    for k in 0..grid.steps() {
        let dt = grid.dt(k);
        x = solver.solve(dt, &step_rhs(sys, dt, &x, sys.input_at(k)), k)?;
        states.col_mut(k).copy_from_slice(&x);
    }
    let wall_time = start.elapsed();
    let outputs = sys.c.tr_matmul(&states);
    Ok(FomSolution {
        states,
        outputs,
        wall_time,
    })
}

/// Concatenates per-sample state matrices into the snapshot matrix, sample-major.
pub fn snapshot_matrix(samples: &[&DenseMatrix]) -> Result<DenseMatrix, SystemError> {
    let Some(first) = samples.first() else {
        return Err(SystemError::Invalid("no samples".into()));
    };
    let mut data = Vec::new();
    for s in samples {
        check_dim("snapshot rows", first.rows(), s.rows())?;
        data.extend_from_slice(s.as_slice());
    }
    let cols = data.len() / first.rows().max(1);
    Ok(DenseMatrix::from_col_major(first.rows(), cols, data)?)
}

/// Explicitly assembled space-time system `A_st x_st = f_st + x0_st`.
#[derive(Clone, Debug)]
pub struct SpaceTimeSystem {
    pub a_st: SparseMatrix,
    pub f_st: Vec<f64>,
    pub x0_st: Vec<f64>,
}

/// Assembles the block lower-bidiagonal space-time operator. Verification only.
pub fn assemble_st(sys: &LinearDynamicalSystem, grid: &TimeGrid, cap: usize) -> Result<SpaceTimeSystem, SystemError> {
    sys.check_grid(grid)?;
    let n = sys.n_states();
    let nt = grid.steps();
    let size = n * nt;
    if size > cap {
        return Err(SystemError::CapExceeded { size, cap });
    }
    let mut t = Vec::with_capacity(nt * (sys.a.nnz() + 2 * n));
    let mut f_st = vec![0.0; size];
    for k in 0..nt {
        let dt = grid.dt(k);
        let off = k * n;
        for (i, j, v) in sys.step_matrix(dt).triplets() {
            t.push((off + i, off + j, v));
        }
        if k > 0 {
            t.extend((0..n).map(|i| (off + i, off - n + i, -1.0)));
        }
        let bf = sys.b.matvec(sys.input_at(k));
        for (dst, v) in f_st[off..off + n].iter_mut().zip(bf) {
            *dst = dt * v;
        }
    }
    let mut x0_st = vec![0.0; size];
    x0_st[..n].copy_from_slice(&sys.x0);
    Ok(SpaceTimeSystem {
        a_st: SparseMatrix::from_triplets(size, size, &t)?,
        f_st,
        x0_st,
    })
}

/// Matrix-free `(A_st)^{-1}` by forward block substitution.
pub fn st_apply_inverse(solver: &StepSolver<'_>, grid: &TimeGrid, v: &[f64]) -> Result<Vec<f64>, SystemError> {
    let n = solver.system().n_states();
    check_dim("space-time vector", n * grid.steps(), v.len())?;
    let mut out = vec![0.0; v.len()];
    let mut prev = vec![0.0; n];
    for k in 0..grid.steps() {
        let mut rhs = v[k * n..(k + 1) * n].to_vec();
        vec_ops::axpy(1.0, &prev, &mut rhs);
        prev = solver.solve(grid.dt(k), &rhs, k)?;
        out[k * n..(k + 1) * n].copy_from_slice(&prev);
    }
    Ok(out)
}

/// Matrix-free `(A_st)^{-T}` by reverse-time substitution with `(I - dt A)ᵀ`.
pub fn st_apply_inverse_adjoint(solver: &StepSolver<'_>, grid: &TimeGrid, w: &[f64]) -> Result<Vec<f64>, SystemError> {
    let n = solver.system().n_states();
    check_dim("space-time vector", n * grid.steps(), w.len())?;
    let mut out = vec![0.0; w.len()];
    let mut next = vec![0.0; n];
    for k in (0..grid.steps()).rev() {
        let mut rhs = w[k * n..(k + 1) * n].to_vec();
        vec_ops::axpy(1.0, &next, &mut rhs);
        next = solver.solve_transpose(grid.dt(k), &rhs, k)?;
        out[k * n..(k + 1) * n].copy_from_slice(&next);
    }
    Ok(out)
}

/// `(A_st)^{-1}` as a [`LinearOperator`].
pub struct StInverseOperator<'s, 'a> {
    pub solver: &'s StepSolver<'a>,
    pub grid: &'s TimeGrid,
}

impl LinearOperator for StInverseOperator<'_, '_> {
    type Error = SystemError;

    fn dim_in(&self) -> usize {
        self.solver.system().n_states() * self.grid.steps()
    }
    fn dim_out(&self) -> usize {
        self.dim_in()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, SystemError> {
        st_apply_inverse(self.solver, self.grid, x)
    }
    fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>, SystemError> {
        st_apply_inverse_adjoint(self.solver, self.grid, y)
    }
}

/// `x_k - x_prev - dt A x_k - dt B f_k`.
pub fn step_residual(
    sys: &LinearDynamicalSystem,
    dt: f64,
    x_k: &[f64],
    x_prev: &[f64],
    f_k: &[f64],
) -> Result<Vec<f64>, SystemError> {
    let n = sys.n_states();
    check_dim("x_k", n, x_k.len())?;
    check_dim("x_prev", n, x_prev.len())?;
    check_dim("f_k", sys.n_inputs(), f_k.len())?;
    let ax = sys.a.matvec(x_k);
    let bf = sys.b.matvec(f_k);
    Ok((0..n).map(|i| x_k[i] - x_prev[i] - dt * ax[i] - dt * bf[i]).collect())
}

/// `A_st x_st - f_st - x0_st`, block by block.
pub fn st_residual(sys: &LinearDynamicalSystem, grid: &TimeGrid, x_st: &[f64]) -> Result<Vec<f64>, SystemError> {
    sys.check_grid(grid)?;
    let n = sys.n_states();
    check_dim("space-time vector", n * grid.steps(), x_st.len())?;
    let mut out = Vec::with_capacity(x_st.len());
    for k in 0..grid.steps() {
        let prev = if k == 0 { &sys.x0[..] } else { &x_st[(k - 1) * n..k * n] };
        out.extend(step_residual(
            sys,
            grid.dt(k),
            &x_st[k * n..(k + 1) * n],
            prev,
            sys.input_at(k),
        )?);
    }
    Ok(out)
}

/// `‖A‖₂`: dense SVD below 256 unknowns, power iteration above.
pub fn operator_norm(a: &SparseMatrix, opts: &PowerIterationOptions) -> Result<f64, LinalgError> {
    if a.rows().max(a.cols()) < 256 {
        return Ok(crate::linalg::thin_svd(&a.to_dense())?.sigma[0]);
    }
    let op = crate::linalg::FnOperator::new(
        a.cols(),
        a.rows(),
        |x: &[f64]| Ok::<_, LinalgError>(a.matvec(x)),
        |y: &[f64]| Ok::<_, LinalgError>(a.tr_matvec(y)),
    );
    largest_singular_value(&op, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilityMethod {
    /// Largest eigenvalue of the (weighted) symmetric part by dense eigensolve.
    DenseEigen,
    /// Weak diagonal dominance with a strictly dominant row in every connected
    /// component of the (weighted) symmetric part.
    Gershgorin,
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub method: StabilityMethod,
    /// Available for the dense method.
    pub max_symmetric_eigenvalue: Option<f64>,
    pub stable: bool,
}

/// Checks that the symmetric part of `W A` is negative definite, `W` being the
/// energy weights (identity when absent). This implies every eigenvalue of `A`
/// has negative real part.
pub fn check_stability(sys: &LinearDynamicalSystem) -> Result<StabilityReport, SystemError> {
    let n = sys.n_states();
    let weighted = match &sys.energy_weights {
        Some(w) => {
            let t: Vec<_> = sys.a.triplets().map(|(i, j, v)| (i, j, w[i] * v)).collect();
            SparseMatrix::from_triplets(n, n, &t)?
        }
        None => sys.a.clone(),
    };
    let wt = weighted.transpose();
    let mut t: Vec<_> = weighted.triplets().map(|(i, j, v)| (i, j, 0.5 * v)).collect();
    t.extend(wt.triplets().map(|(i, j, v)| (i, j, 0.5 * v)));
    let sym = SparseMatrix::from_triplets(n, n, &t)?;

    if n <= DENSE_STABILITY_LIMIT {
        let (_, hi) = symmetric_extreme_eigenvalues(&sym.to_dense())?;
        return Ok(StabilityReport {
            method: StabilityMethod::DenseEigen,
            max_symmetric_eigenvalue: Some(hi),
            stable: hi < 0.0,
        });
    }
    Ok(StabilityReport {
        method: StabilityMethod::Gershgorin,
        max_symmetric_eigenvalue: None,
        stable: gershgorin_negative_definite(&sym),
    })
}

fn gershgorin_negative_definite(s: &SparseMatrix) -> bool {
    let n = s.rows();
    let slack_tol = 1e-12 * s.max_abs();
    let mut strict = vec![false; n];
    for (i, item) in strict.iter_mut().enumerate() {
        let (cols, vals) = s.row(i);
        let mut diag = 0.0;
        let mut off = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag = v;
            } else {
                off += v.abs();
            }
        }
        let slack = -diag - off;
        if slack < -slack_tol {
            return false;
        }
        *item = slack > slack_tol;
    }
    // Each connected component needs one strictly dominant row.
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![root];
        let mut has_strict = false;
        while let Some(v) = stack.pop() {
            has_strict |= strict[v];
            for &w in s.row(v).0 {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if !has_strict {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_dense;

    fn scalar_system(a: f64, b: f64, f: f64, x0: f64) -> LinearDynamicalSystem {
        LinearDynamicalSystem::new(
            SparseMatrix::from_triplets(1, 1, &[(0, 0, a)]).unwrap(),
            SparseMatrix::from_triplets(1, 1, &[(0, 0, b)]).unwrap(),
            DenseMatrix::identity(1),
            vec![x0],
            InputSignal::Constant(vec![f]),
            ParamPoint::default(),
        )
        .unwrap()
    }

    fn heat3() -> LinearDynamicalSystem {
        let t = [
            (0, 0, -32.0),
            (0, 1, 16.0),
            (1, 0, 16.0),
            (1, 1, -32.0),
            (1, 2, 16.0),
            (2, 1, 16.0),
            (2, 2, -32.0),
        ];
        LinearDynamicalSystem::new(
            SparseMatrix::from_triplets(3, 3, &t).unwrap(),
            SparseMatrix::from_triplets(3, 1, &[(1, 0, 1.0)]).unwrap(),
            DenseMatrix::from_fn(3, 1, |_, _| 1.0 / 3.0),
            vec![0.0; 3],
            InputSignal::Constant(vec![2.0]),
            ParamPoint::new([("kappa", 1.0)]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_step() {
        let sys = scalar_system(-1.0, 0.0, 0.0, 2.0);
        let x = backward_euler_step(&sys, 1.0, &[2.0], &[0.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn frozen_dynamics() {
        let sys = scalar_system(0.0, 0.0, 5.0, 3.0);
        let sol = fom_march(&sys, &TimeGrid::uniform(0.1, 4).unwrap()).unwrap();
        assert!(sol.states.as_slice().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn heat_step_matches_dense_lu() {
        let sys = heat3();
        let x_prev = [0.3, -0.7, 1.1];
        let dt = 0.05;
        let x = backward_euler_step(&sys, dt, &x_prev, &[2.0]).unwrap();
        let m = sys.step_matrix(dt).to_dense();
        let rhs = [0.3, -0.7 + dt * 2.0, 1.1];
        let xd = solve_dense(&m, &rhs).unwrap();
        assert!(vec_ops::max_abs_diff(&x, &xd) < 1e-10);
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![]).is_err());
        assert!(TimeGrid::new(vec![0.1, 0.0]).is_err());
        let g = TimeGrid::new(vec![0.1, 0.2, 0.1]).unwrap();
        assert!(!g.is_uniform());
        assert_eq!(g.distinct_dts(), vec![0.1, 0.2]);
        assert!((g.final_time() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn st_assembly_two_blocks_zero_a() {
        let sys = scalar_system(0.0, 1.0, 1.0, 4.0);
        let st = assemble_st(&sys, &TimeGrid::uniform(0.5, 2).unwrap(), ST_ASSEMBLY_CAP).unwrap();
        assert_eq!(st.a_st.to_dense(), DenseMatrix::from_rows(&[&[1.0, 0.0], &[-1.0, 1.0]]));
        assert_eq!(st.f_st, vec![0.5, 0.5]);
        assert_eq!(st.x0_st, vec![4.0, 0.0]);
    }

    #[test]
    fn st_assembly_cap() {
        let sys = heat3();
        let grid = TimeGrid::uniform(0.1, 10).unwrap();
        assert!(matches!(
            assemble_st(&sys, &grid, 29),
            Err(SystemError::CapExceeded { .. })
        ));
    }

    #[test]
    fn st_inverse_bidiagonal_case() {
        let sys = scalar_system(0.0, 0.0, 0.0, 0.0);
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let solver = StepSolver::for_grid(&sys, &grid).unwrap();
        assert_eq!(st_apply_inverse(&solver, &grid, &[2.0, 3.0]).unwrap(), vec![2.0, 5.0]);
        assert_eq!(
            st_apply_inverse_adjoint(&solver, &grid, &[2.0, 3.0]).unwrap(),
            vec![5.0, 3.0]
        );
    }

    #[test]
    fn residuals_vanish_on_fom() {
        let sys = heat3();
        let grid = TimeGrid::new(vec![0.01, 0.02, 0.01, 0.03]).unwrap();
        let sol = fom_march(&sys, &grid).unwrap();
        let r = st_residual(&sys, &grid, sol.states.as_slice()).unwrap();
        assert!(vec_ops::max_abs(&r) < 1e-12);
    }

    #[test]
    fn table_input_must_cover_grid() {
        let mut sys = heat3();
        sys.input = InputSignal::Table(DenseMatrix::zeros(1, 2));
        assert!(fom_march(&sys, &TimeGrid::uniform(0.1, 3).unwrap()).is_err());
    }

    #[test]
    fn stability_checks_agree() {
        let sys = heat3();
        let dense = check_stability(&sys).unwrap();
        assert!(dense.stable);
        assert!(dense.max_symmetric_eigenvalue.unwrap() < 0.0);
        let sym = sys.a.clone();
        assert!(gershgorin_negative_definite(&sym));
        let unstable = scalar_system(0.5, 0.0, 0.0, 0.0);
        assert!(!check_stability(&unstable).unwrap().stable);
    }
}
