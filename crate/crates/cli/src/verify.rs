//! Oracle suites run by `strom verify`. Every suite compares a fast path
//! with an independent brute-force construction and reports the measured
//! discrepancy.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strom_core::basis::{build_basis_set, BasisSet, IsvdConfig, SvdState};
use strom_core::bounds::{bound_theorem1, bound_theorem2, bound_theorem3};
use strom_core::linalg::{
    kron, qr, solve_dense, thin_svd, vec_ops, BandedLu, DenseMatrix, PowerIterationOptions, SparseMatrix,
};
use strom_core::persist::{decode, encode, read_matrix, write_matrix, HEADER_LEN};
use strom_core::problems::{make_system, ProblemKind, ProblemSpec};
use strom_core::srom::{build_spatial_rom, srom_march, srom_reconstruct, RefMode};
use strom_core::strom::{
    build_space_time_rom, build_st_init, build_st_input, build_st_matrix, explicit_st_basis, reconstruct_all,
    solve_strom,
};
use strom_core::system::{
    assemble_st, fom_march, operator_norm, InputSignal, LinearDynamicalSystem, ParamPoint, TimeGrid, ST_ASSEMBLY_CAP,
};

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl SuiteResult {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    /// A suite that could not run counts as failed.
    fn from_result(name: &'static str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e:#}")),
        }
    }
}

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Result<DenseMatrix> {
    Ok(qr(&random(rows, cols, rng))?.0)
}

/// Streams a 200 x 40 random matrix through the incremental SVD with zero
/// tolerances and compares singular values with a batch SVD.
pub fn isvd_vs_batch(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = random(200, 40, &mut rng);
    let start = Instant::now();
    let mut state = SvdState::new(200, IsvdConfig::exact());
    state.ingest_simulation(&m)?;
    let elapsed = start.elapsed().as_secs_f64();
    let batch = thin_svd(&m)?;
    let rel = state
        .sigma()
        .iter()
        .zip(&batch.sigma)
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0, f64::max);
    let ok = state.rank() == 40 && rel <= 1e-8 && elapsed < 2.0;
    Ok((
        ok,
        format!("rank {} max rel sigma diff {rel:.2e} in {elapsed:.3} s", state.rank()),
    ))
}

fn random_system(n: usize, inputs: usize, steps: usize, rng: &mut ChaCha8Rng) -> Result<LinearDynamicalSystem> {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, -rng.gen_range(1.0..3.0)));
        for _ in 0..2 {
            t.push((i, rng.gen_range(0..n), rng.gen_range(-0.5..0.5)));
        }
    }
    Ok(LinearDynamicalSystem::new(
        SparseMatrix::from_triplets(n, n, &t)?,
        SparseMatrix::from_dense(&random(n, inputs, rng)),
        random(n, 1, rng),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        InputSignal::Table(random(inputs, steps, rng)),
        ParamPoint::default(),
    )?)
}

/// Block-structured space-time assembly against explicit
/// `Φ_stᵀ (·) Φ_st` products. `perturb` is added to one reduced operator
/// entry before comparison.
pub fn block_assembly(seed: u64, perturb: f64) -> Result<(bool, String)> {
    let (n, steps, n_s, n_t) = (12, 8, 3, 2);
    let mut worst = [0.0f64; 3];
    for trial in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial));
        let sys = random_system(n, 2, steps, &mut rng)?;
        let grid = TimeGrid::new((0..steps).map(|_| rng.gen_range(0.01..0.2)).collect())?;
        let temporal = (0..n_s)
            .map(|_| orthonormal(steps, n_t, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let basis = BasisSet::new(orthonormal(n, n_s, &mut rng)?, temporal, n_t)?;
        let rom = build_spatial_rom(&sys, &basis, RefMode::Zero)?;
        let st = assemble_st(&sys, &grid, ST_ASSEMBLY_CAP)?;
        let phi_st = explicit_st_basis(&basis, ST_ASSEMBLY_CAP)?;

        let mut a = build_st_matrix(&rom, &basis, &grid)?;
        a[(0, 0)] += perturb;
        let f = build_st_input(&rom, &basis, &grid, &sys.input)?;
        let x0 = build_st_init(&basis, &rom.x0_hat)?;
        worst[0] = worst[0].max(a.max_abs_diff(&phi_st.tr_matmul(&st.a_st.mul_dense(&phi_st))));
        worst[1] = worst[1].max(vec_ops::max_abs_diff(&f, &phi_st.tr_matvec(&st.f_st)));
        worst[2] = worst[2].max(vec_ops::max_abs_diff(&x0, &phi_st.tr_matvec(&st.x0_st)));
    }
    let ok = worst.iter().all(|&w| w <= 1e-11);
    Ok((
        ok,
        format!(
            "max-abs diff: matrix {:.2e}, input {:.2e}, initial {:.2e}",
            worst[0], worst[1], worst[2]
        ),
    ))
}

fn small_problems() -> Vec<(ProblemSpec, TimeGrid)> {
    let mut heat = ProblemSpec::new(ProblemKind::Heat1d);
    heat.nx = 40;
    let mut ad = ProblemSpec::new(ProblemKind::AdvDiff2d);
    ad.nx = 12;
    ad.ny = 12;
    let mut tr = ProblemSpec::new(ProblemKind::Transport1d);
    tr.nz = 24;
    tr.ndir = 4;
    vec![
        (heat, TimeGrid::uniform(2e-4, 50).expect("valid grid")),
        (
            ad,
            TimeGrid::new((0..60).map(|k| 0.02 + 0.01 * (k % 2) as f64).collect()).expect("valid grid"),
        ),
        (tr, TimeGrid::uniform(0.05, 40).expect("valid grid")),
    ]
}

/// Time marching against one global solve of the assembled space-time system.
pub fn fom_vs_space_time() -> Result<(bool, String)> {
    let mut detail = Vec::new();
    let mut ok = true;
    for (spec, grid) in small_problems() {
        let sys = make_system(&spec, &ParamPoint::default())?;
        let fom = fom_march(&sys, &grid)?;
        let st = assemble_st(&sys, &grid, ST_ASSEMBLY_CAP)?;
        let x = BandedLu::new(&st.a_st)?.solve(&vec_ops::add(&st.f_st, &st.x0_st));
        let diff = vec_ops::max_abs_diff(&x, fom.states.as_slice());
        ok &= diff <= 1e-9;
        detail.push(format!(
            "{} ({} dof) {diff:.2e}",
            spec.kind,
            sys.n_states() * grid.steps()
        ));
    }
    Ok((ok, detail.join("; ")))
}

/// With `n_s = N_s` and one training trajectory, both ROMs reproduce the FOM.
pub fn exactness() -> Result<(bool, String)> {
    let mut spec = ProblemSpec::new(ProblemKind::Heat1d);
    spec.nx = 10;
    let base = make_system(&spec, &ParamPoint::default())?;
    let x0: Vec<f64> = (0..10).map(|i| ((i + 1) as f64 * 0.9).sin()).collect();
    let sys = LinearDynamicalSystem::new(base.a, base.b, base.c, x0, base.input, base.param)?;
    let grid = TimeGrid::uniform(0.002, 20)?;
    let fom = fom_march(&sys, &grid)?;
    let mut state = SvdState::new(10, IsvdConfig::exact());
    state.ingest_simulation(&fom.states)?;
    let basis = build_basis_set(&state, 10, 1, 20, 1)?;
    let rom = build_spatial_rom(&sys, &basis, RefMode::Zero)?;
    let srom = srom_reconstruct(&rom, &srom_march(&rom, &grid, &sys.input)?);
    let st = build_space_time_rom(&rom, &basis, &grid, &sys.input, &sys.x0)?;
    let strom = reconstruct_all(&basis, &solve_strom(&st)?)?;
    let rel = |approx: &DenseMatrix| {
        (0..grid.steps())
            .map(|k| {
                vec_ops::norm2(&vec_ops::sub(fom.states.col(k), approx.col(k))) / vec_ops::norm2(fom.states.col(k))
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (rel(&srom), rel(&strom));
    Ok((
        e1 <= 1e-9 && e2 <= 1e-9,
        format!("max rel error: spatial {e1:.2e}, space-time {e2:.2e}"),
    ))
}

struct Trajectories {
    sys: LinearDynamicalSystem,
    grid: TimeGrid,
    exact: DenseMatrix,
    srom: DenseMatrix,
    strom: DenseMatrix,
}

fn rom_trajectories(
    spec: &ProblemSpec,
    train: &[ParamPoint],
    test: &ParamPoint,
    dt_frac: f64,
    steps: usize,
    n_s: usize,
) -> Result<Trajectories> {
    let sys = make_system(spec, test)?;
    let a_norm = operator_norm(&sys.a, &PowerIterationOptions::default())?;
    let grid = TimeGrid::uniform(dt_frac / a_norm, steps)?;
    let mut state = SvdState::new(sys.n_states(), IsvdConfig::default());
    for p in train {
        state.ingest_simulation(&fom_march(&make_system(spec, p)?, &grid)?.states)?;
    }
    let n_s = n_s.min(state.rank());
    let basis = build_basis_set(&state, n_s, train.len().min(steps), steps, train.len())?;
    let rom = build_spatial_rom(&sys, &basis, RefMode::InitialState)?;
    let srom = srom_reconstruct(&rom, &srom_march(&rom, &grid, &sys.input)?);
    let st = build_space_time_rom(&rom, &basis, &grid, &sys.input, &sys.x0)?;
    let strom = reconstruct_all(&basis, &solve_strom(&st)?)?;
    let exact = fom_march(&sys, &grid)?.states;
    Ok(Trajectories {
        sys,
        grid,
        exact,
        srom,
        strom,
    })
}

/// The three error bounds on randomized heat and transport configurations,
/// plus the shrinking stability constants of the spatial-ROM bound.
pub fn bound_dominance(seed: u64) -> Result<(bool, String)> {
    let opts = PowerIterationOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut configs = 0;
    let mut failures = Vec::new();
    let mut min_margin = [f64::INFINITY; 3];
    for c in 0..24 {
        let (spec, train, test) = if c % 2 == 0 {
            let mut spec = ProblemSpec::new(ProblemKind::Heat1d);
            spec.nx = rng.gen_range(12..40);
            let k: Vec<f64> = (0..3).map(|_| rng.gen_range(0.3..3.0)).collect();
            let p = |v: f64| ParamPoint::new([("kappa", v)]).expect("finite");
            (spec, vec![p(k[0]), p(k[1])], p(k[2]))
        } else {
            let mut spec = ProblemSpec::new(ProblemKind::Transport1d);
            spec.nz = rng.gen_range(10..24);
            spec.ndir = 2 * rng.gen_range(1..4);
            let p = |t: f64, s: f64| ParamPoint::new([("sigma_t", t), ("sigma_s", s * t)]).expect("finite");
            let draws: Vec<(f64, f64)> = (0..3)
                .map(|_| (rng.gen_range(0.5..2.0), rng.gen_range(0.1..0.9)))
                .collect();
            (
                spec,
                vec![p(draws[0].0, draws[0].1), p(draws[1].0, draws[1].1)],
                p(draws[2].0, draws[2].1),
            )
        };
        let steps = rng.gen_range(6..16);
        let n_s = rng.gen_range(1..4);
        let tr = rom_trajectories(&spec, &train, &test, rng.gen_range(0.1..0.9), steps, n_s)?;
        let b1 = bound_theorem1(&tr.sys, &tr.grid, &tr.srom, Some(&tr.exact), &opts)?;
        let b2 = bound_theorem2(&tr.sys, &tr.grid, &tr.srom, Some(&tr.exact), &opts)?;
        let b3 = bound_theorem3(&tr.sys, &tr.grid, tr.strom.as_slice(), Some(&tr.exact), &opts)?;
        for (i, r) in [&b1, &b2, &b3].into_iter().enumerate() {
            let margin = r
                .bounds
                .iter()
                .zip(r.errors.as_ref().expect("reference supplied"))
                .map(|(b, e)| b - e)
                .fold(f64::INFINITY, f64::min);
            min_margin[i] = min_margin[i].min(margin);
            if r.valid() != Some(true) {
                failures.push(format!("config {c} bound{}", i + 1));
            }
        }
        configs += 1;
    }

    let mut spec = ProblemSpec::new(ProblemKind::Heat1d);
    spec.nx = 24;
    let sys = make_system(&spec, &ParamPoint::default())?;
    let a_norm = operator_norm(&sys.a, &opts)?;
    let mut products = Vec::new();
    for shrink in [1.0, 10.0, 100.0] {
        let grid = TimeGrid::uniform(0.5 / a_norm / shrink, 10)?;
        let r = bound_theorem2(&sys, &grid, &DenseMatrix::zeros(24, 10), None, &opts)?;
        products.push(r.constant_product());
    }
    let decreasing = products.windows(2).all(|w| w[1] < w[0]) && products.iter().all(|&p| p >= 1.0);
    let ok = failures.is_empty() && decreasing && configs >= 20;
    let mut detail = format!(
        "{configs} configs, min margins {:.2e}/{:.2e}/{:.2e}; gamma products {}",
        min_margin[0],
        min_margin[1],
        min_margin[2],
        products
            .iter()
            .map(|p| format!("{p:.4}"))
            .collect::<Vec<_>>()
            .join(" -> ")
    );
    if !failures.is_empty() {
        let _ = write!(detail, "; violated: {}", failures.join(", "));
    }
    Ok((ok, detail))
}

fn inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    let cols = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            solve_dense(a, &e)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DenseMatrix::from_columns(&cols)?)
}

/// The five Kronecker-product identities on random small matrices.
pub fn kronecker(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 5];
    for _ in 0..100 {
        let (m, n, p, q) = (
            rng.gen_range(1..5),
            rng.gen_range(1..5),
            rng.gen_range(1..5),
            rng.gen_range(1..5),
        );
        let nonsingular = |k: usize, rng: &mut ChaCha8Rng| {
            DenseMatrix::identity(k)
                .scaled(2.0 * k as f64)
                .add_scaled(1.0, &random(k, k, rng))
        };
        let (a, b) = (nonsingular(m, &mut rng), nonsingular(p, &mut rng));
        worst[0] = worst[0].max(inverse(&kron(&a, &b))?.max_abs_diff(&kron(&inverse(&a)?, &inverse(&b)?)));

        let (a, b) = (random(m, n, &mut rng), random(p, q, &mut rng));
        worst[1] = worst[1].max(
            kron(&a, &b)
                .transpose()
                .max_abs_diff(&kron(&a.transpose(), &b.transpose())),
        );

        let (c, d) = (
            random(n, rng.gen_range(1..5), &mut rng),
            random(q, rng.gen_range(1..5), &mut rng),
        );
        worst[2] = worst[2].max(
            kron(&a, &b)
                .matmul(&kron(&c, &d))
                .max_abs_diff(&kron(&a.matmul(&c), &b.matmul(&d))),
        );

        let a2 = random(m, n, &mut rng);
        let lhs = kron(&a.add_scaled(1.0, &a2), &b);
        worst[3] = worst[3].max(lhs.max_abs_diff(&kron(&a, &b).add_scaled(1.0, &kron(&a2, &b))));

        let b2 = random(p, q, &mut rng);
        let lhs = kron(&a, &b.add_scaled(1.0, &b2));
        worst[4] = worst[4].max(lhs.max_abs_diff(&kron(&a, &b).add_scaled(1.0, &kron(&a, &b2))));
    }
    let ok = worst.iter().all(|&w| w <= 1e-12);
    Ok((
        ok,
        format!(
            "100 trials, max diffs: inverse {:.1e}, transpose {:.1e}, mixed product {:.1e}, left sum {:.1e}, right sum {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    ))
}

/// Bit-exact round trips for 50 random shapes, one through the filesystem,
/// and detection of every single-bit header corruption.
pub fn persistence(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    let mut undetected = 0;
    let mut corruptions = 0;
    let dir = std::env::temp_dir().join(format!("strom-verify-{}-{seed}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    for trial in 0..50 {
        let (rows, cols) = (rng.gen_range(1..40), rng.gen_range(1..40));
        let m = DenseMatrix::from_fn(rows, cols, |_, _| {
            rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-200..200))
        });
        let back = if trial == 0 {
            let path = dir.join("roundtrip.mat");
            write_matrix(&path, &m)?;
            read_matrix(&path)?
        } else {
            decode(&encode(&m)?)?
        };
        if back.shape() != m.shape()
            || m.as_slice()
                .iter()
                .zip(back.as_slice())
                .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            mismatches += 1;
        }
        let bytes = encode(&m)?;
        for byte in 0..HEADER_LEN {
            for bit in 0..8 {
                let mut bad = bytes.clone();
                bad[byte] ^= 1 << bit;
                corruptions += 1;
                if decode(&bad).is_ok() {
                    undetected += 1;
                }
            }
        }
        if decode(&bytes[..bytes.len() - 1]).is_ok() {
            undetected += 1;
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok((
        mismatches == 0 && undetected == 0,
        format!("50 shapes, {mismatches} mismatches; {corruptions} header corruptions + truncations, {undetected} undetected"),
    ))
}

/// Runs every suite.
pub fn run_all(seed: u64, perturb_st: f64) -> Vec<SuiteResult> {
    vec![
        SuiteResult::from_result("isvd_vs_batch", isvd_vs_batch(seed)),
        SuiteResult::from_result("block_assembly", block_assembly(seed, perturb_st)),
        SuiteResult::from_result("exactness", exactness()),
        SuiteResult::from_result("bound_dominance", bound_dominance(seed)),
        SuiteResult::from_result("kronecker", kronecker(seed)),
        SuiteResult::from_result("fom_vs_space_time", fom_vs_space_time()),
        SuiteResult::from_result("persistence", persistence(seed)),
    ]
}

pub fn render(results: &[SuiteResult]) -> String {
    let mut s = String::new();
    for r in results {
        let _ = writeln!(
            s,
            "{:<18} {}  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    s
}
