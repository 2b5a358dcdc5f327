//! Deterministic generators of stable test systems.
//!
//! * `heat1d`: 1-D heat equation on `[0, 1]`, Dirichlet-zero ends.
//! * `advdiff2d`: 2-D advection-diffusion on `[0, 1]²` with upwind advection.
//! * `transport1d`: mono-energetic discrete-ordinates transport in a slab with
//!   isotropic scattering and vacuum boundaries.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::linalg::{DenseMatrix, LinalgError, SparseMatrix};
use crate::system::{InputSignal, LinearDynamicalSystem, ParamPoint, SystemError};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid problem specification: {0}")]
    Spec(String),

    #[error("parameter `{name}` is not defined for {kind} (known: {known})")]
    UnknownParameter {
        name: String,
        kind: ProblemKind,
        known: String,
    },

    #[error(transparent)]
    System(#[from] SystemError),
}

impl From<LinalgError> for ProblemError {
    fn from(e: LinalgError) -> Self {
        Self::System(e.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Heat1d,
    AdvDiff2d,
    Transport1d,
}

impl ProblemKind {
    /// Names accepted in a [`ParamPoint`] for this generator.
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            Self::Heat1d => &["kappa", "q"],
            Self::AdvDiff2d => &["kappa", "vx", "vy", "q"],
            Self::Transport1d => &["sigma_t", "sigma_s", "nu", "q"],
        }
    }

    /// Parameters a sample list varies by default, in order.
    pub fn default_sample_names(self) -> &'static [&'static str] {
        match self {
            Self::Heat1d => &["kappa"],
            Self::AdvDiff2d => &["kappa", "vx", "vy"],
            Self::Transport1d => &["sigma_t", "sigma_s"],
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Heat1d => "heat1d",
            Self::AdvDiff2d => "advdiff2d",
            Self::Transport1d => "transport1d",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "heat1d" => Ok(Self::Heat1d),
            "advdiff2d" => Ok(Self::AdvDiff2d),
            "transport1d" => Ok(Self::Transport1d),
            other => Err(ProblemError::Spec(format!(
                "unknown problem kind `{other}` (expected heat1d, advdiff2d or transport1d)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Interior nodes in x (heat1d, advdiff2d).
    pub nx: usize,
    /// Interior nodes in y (advdiff2d).
    pub ny: usize,
    /// Spatial zones (transport1d).
    pub nz: usize,
    /// Discrete directions, even (transport1d).
    pub ndir: usize,
    pub kappa: f64,
    pub vx: f64,
    pub vy: f64,
    /// Total cross-section, one value or one per zone.
    pub sigma_t: Vec<f64>,
    /// Scattering cross-section, one value or one per zone.
    pub sigma_s: Vec<f64>,
    /// Particle speed.
    pub nu: f64,
    /// Source strength, the constant input.
    pub q: f64,
    /// Slab width (transport1d).
    pub length: f64,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind) -> Self {
        let base = Self {
            kind,
            nx: 32,
            ny: 32,
            nz: 40,
            ndir: 8,
            kappa: 1.0,
            vx: 0.0,
            vy: 0.0,
            sigma_t: vec![1.0],
            sigma_s: vec![0.5],
            nu: 1.0,
            q: 1.0,
            length: 4.0,
        };
        match kind {
            ProblemKind::Heat1d => base,
            ProblemKind::AdvDiff2d => Self {
                kappa: 0.02,
                vx: 0.5,
                vy: 0.25,
                ..base
            },
            ProblemKind::Transport1d => base,
        }
    }

    pub fn n_states(&self) -> usize {
        match self.kind {
            ProblemKind::Heat1d => self.nx,
            ProblemKind::AdvDiff2d => self.nx * self.ny,
            ProblemKind::Transport1d => self.nz * self.ndir,
        }
    }
}

/// Builds the system for `spec`, with entries of `param` overriding the
/// matching coefficients.
pub fn make_system(spec: &ProblemSpec, param: &ParamPoint) -> Result<LinearDynamicalSystem, ProblemError> {
    match spec.kind {
        ProblemKind::Heat1d => make_heat1d(spec, param),
        ProblemKind::AdvDiff2d => make_advdiff2d(spec, param),
        ProblemKind::Transport1d => make_transport1d(spec, param),
    }
}

fn resolve(spec: &ProblemSpec, param: &ParamPoint) -> Result<ProblemSpec, ProblemError> {
    let known = spec.kind.parameter_names();
    let mut s = spec.clone();
    for (name, &v) in param.names().iter().zip(param.values()) {
        match name.as_str() {
            n if !known.contains(&n) => {
                return Err(ProblemError::UnknownParameter {
                    name: name.clone(),
                    kind: spec.kind,
                    known: known.join(", "),
                })
            }
            "kappa" => s.kappa = v,
            "vx" => s.vx = v,
            "vy" => s.vy = v,
            "q" => s.q = v,
            "nu" => s.nu = v,
            "sigma_t" => s.sigma_t = vec![v],
            "sigma_s" => s.sigma_s = vec![v],
            _ => unreachable!("names are checked against the known list"),
        }
    }
    if !s.q.is_finite() {
        return Err(ProblemError::Spec(format!("source strength q = {}", s.q)));
    }
    Ok(s)
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ProblemError> {
    if cond {
        Ok(())
    } else {
        Err(ProblemError::Spec(msg()))
    }
}

/// `A = (kappa / h²) tridiag(1, -2, 1)` on `nx` interior nodes of `[0, 1]`.
pub fn make_heat1d(spec: &ProblemSpec, param: &ParamPoint) -> Result<LinearDynamicalSystem, ProblemError> {
    let s = resolve(spec, param)?;
    let n = s.nx;
    require(n >= 2, || format!("heat1d needs nx >= 2, got {n}"))?;
    require(s.kappa.is_finite() && s.kappa > 0.0, || {
        format!("kappa must be positive, got {}", s.kappa)
    })?;
    let h = 1.0 / (n as f64 + 1.0);
    let c = s.kappa / (h * h);
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        t.push((i, i, -2.0 * c));
        if i > 0 {
            t.push((i, i - 1, c));
        }
        if i + 1 < n {
            t.push((i, i + 1, c));
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &t)?;

    let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0) * h).collect();
    let mut src: Vec<usize> = (0..n).filter(|&i| (xs[i] - 0.3).abs() <= 0.1).collect();
    if src.is_empty() {
        src.push(nearest(&xs, 0.3));
    }
    let b = SparseMatrix::from_triplets(n, 1, &src.iter().map(|&i| (i, 0, 1.0)).collect::<Vec<_>>())?;
    let cmat = DenseMatrix::from_fn(n, 1, |_, _| 1.0 / n as f64);

    Ok(LinearDynamicalSystem::new(
        a,
        b,
        cmat,
        vec![0.0; n],
        InputSignal::Constant(vec![s.q]),
        param.clone(),
    )?)
}

fn nearest(xs: &[f64], target: f64) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if (x - target).abs() < (xs[best] - target).abs() {
            best = i;
        }
    }
    best
}

/// 5-point diffusion plus first-order upwind advection on an `nx x ny`
/// interior grid of `[0, 1]²`; unknown `(i, j)` has index `j * nx + i`.
pub fn make_advdiff2d(spec: &ProblemSpec, param: &ParamPoint) -> Result<LinearDynamicalSystem, ProblemError> {
    let s = resolve(spec, param)?;
    let (nx, ny) = (s.nx, s.ny);
    require(nx >= 2 && ny >= 2, || {
        format!("advdiff2d needs nx, ny >= 2, got {nx}x{ny}")
    })?;
    require(s.kappa.is_finite() && s.kappa > 0.0, || {
        format!("kappa must be positive, got {}", s.kappa)
    })?;
    require(s.vx.is_finite() && s.vy.is_finite(), || {
        "velocity must be finite".into()
    })?;
    let hx = 1.0 / (nx as f64 + 1.0);
    let hy = 1.0 / (ny as f64 + 1.0);
    let dx = s.kappa / (hx * hx);
    let dy = s.kappa / (hy * hy);
    let ax = s.vx.abs() / hx;
    let ay = s.vy.abs() / hy;
    let n = nx * ny;
    let idx = |i: usize, j: usize| j * nx + i;

    let mut t = Vec::with_capacity(5 * n);
    for j in 0..ny {
        for i in 0..nx {
            let p = idx(i, j);
            t.push((p, p, -2.0 * dx - 2.0 * dy - ax - ay));
            let west = dx + if s.vx > 0.0 { ax } else { 0.0 };
            let east = dx + if s.vx < 0.0 { ax } else { 0.0 };
            let south = dy + if s.vy > 0.0 { ay } else { 0.0 };
            let north = dy + if s.vy < 0.0 { ay } else { 0.0 };
            if i > 0 {
                t.push((p, idx(i - 1, j), west));
            }
            if i + 1 < nx {
                t.push((p, idx(i + 1, j), east));
            }
            if j > 0 {
                t.push((p, idx(i, j - 1), south));
            }
            if j + 1 < ny {
                t.push((p, idx(i, j + 1), north));
            }
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &t)?;

    let width = 0.08;
    let mut bt = Vec::new();
    let mut cmat = DenseMatrix::zeros(n, 1);
    for j in 0..ny {
        for i in 0..nx {
            let x = (i as f64 + 1.0) * hx;
            let y = (j as f64 + 1.0) * hy;
            let r2 = (x - 0.3).powi(2) + (y - 0.3).powi(2);
            let g = (-r2 / (2.0 * width * width)).exp();
            if g > 1e-12 {
                bt.push((idx(i, j), 0, g));
            }
            if x >= 0.5 && y >= 0.5 {
                cmat[(idx(i, j), 0)] = hx * hy;
            }
        }
    }
    let b = SparseMatrix::from_triplets(n, 1, &bt)?;
    Ok(LinearDynamicalSystem::new(
        a,
        b,
        cmat,
        vec![0.0; n],
        InputSignal::Constant(vec![s.q]),
        param.clone(),
    )?)
}

/// Gauss-Legendre nodes on `(-1, 1)` in increasing order with weights
/// normalized to sum to one.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mu = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let dp = legendre(n, x).1;
        let weight = 2.0 / ((1.0 - x * x) * dp * dp);
        mu[i] = -x;
        mu[n - 1 - i] = x;
        w[i] = 0.5 * weight;
        w[n - 1 - i] = 0.5 * weight;
    }
    (mu, w)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Discrete-ordinates slab: `A = nu (-H + L⁺ Σ_s L)`, `H_l = C_l + Σ_t`, with
/// upwind streaming and vacuum inflow. Unknown `(direction l, zone z)` has
/// index `l * nz + z`.
pub fn make_transport1d(spec: &ProblemSpec, param: &ParamPoint) -> Result<LinearDynamicalSystem, ProblemError> {
    let s = resolve(spec, param)?;
    let (nz, nd) = (s.nz, s.ndir);
    require(nz >= 2, || format!("transport1d needs nz >= 2, got {nz}"))?;
    require(nd >= 2 && nd % 2 == 0, || {
        format!("direction count must be even and >= 2, got {nd}")
    })?;
    require(s.nu.is_finite() && s.nu > 0.0, || {
        format!("particle speed must be positive, got {}", s.nu)
    })?;
    require(s.length.is_finite() && s.length > 0.0, || {
        format!("slab length {}", s.length)
    })?;
    let sigma_t = per_zone(&s.sigma_t, nz, "sigma_t")?;
    let sigma_s = per_zone(&s.sigma_s, nz, "sigma_s")?;
    for z in 0..nz {
        require(sigma_s[z] >= 0.0 && sigma_t[z] >= sigma_s[z], || {
            format!(
                "zone {z}: need sigma_t >= sigma_s >= 0, got {} and {}",
                sigma_t[z], sigma_s[z]
            )
        })?;
    }
    let (mu, w) = gauss_legendre(nd);
    let h = s.length / nz as f64;
    let n = nz * nd;
    let idx = |l: usize, z: usize| l * nz + z;

    let mut t = Vec::with_capacity(n * (nd + 2));
    for (l, &mu_l) in mu.iter().enumerate() {
        let m = mu_l.abs() / h;
        for z in 0..nz {
            let p = idx(l, z);
            t.push((p, p, -s.nu * (m + sigma_t[z])));
            if mu_l > 0.0 && z > 0 {
                t.push((p, idx(l, z - 1), s.nu * m));
            }
            if mu_l < 0.0 && z + 1 < nz {
                t.push((p, idx(l, z + 1), s.nu * m));
            }
            if sigma_s[z] > 0.0 {
                for (lp, &wl) in w.iter().enumerate() {
                    t.push((p, idx(lp, z), s.nu * sigma_s[z] * wl));
                }
            }
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &t)?;

    let src_zone = |z: usize| {
        let x = (z as f64 + 0.5) * h;
        x >= 0.4 * s.length && x <= 0.6 * s.length
    };
    let det_zone = |z: usize| (z as f64 + 0.5) * h >= 0.8 * s.length;
    let mut bt = Vec::new();
    let mut cmat = DenseMatrix::zeros(n, 1);
    for l in 0..nd {
        for z in 0..nz {
            if src_zone(z) {
                bt.push((idx(l, z), 0, s.nu));
            }
            if det_zone(z) {
                cmat[(idx(l, z), 0)] = h * w[l];
            }
        }
    }
    if bt.is_empty() {
        bt.extend((0..nd).map(|l| (idx(l, nz / 2), 0, s.nu)));
    }
    let b = SparseMatrix::from_triplets(n, 1, &bt)?;
    let weights: Vec<f64> = (0..n).map(|p| w[p / nz]).collect();
    Ok(LinearDynamicalSystem::new(
        a,
        b,
        cmat,
        vec![0.0; n],
        InputSignal::Constant(vec![s.q]),
        param.clone(),
    )?
    .with_energy_weights(weights)?)
}

fn per_zone(v: &[f64], nz: usize, name: &str) -> Result<Vec<f64>, ProblemError> {
    require(v.iter().all(|x| x.is_finite()), || {
        format!("{name} has non-finite entries")
    })?;
    match v.len() {
        1 => Ok(vec![v[0]; nz]),
        l if l == nz => Ok(v.to_vec()),
        l => Err(ProblemError::Spec(format!("{name} has {l} values for {nz} zones"))),
    }
}
