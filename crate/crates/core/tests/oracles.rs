//! Cross-checks of the fast paths against brute-force constructions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strom_core::basis::{build_basis_set, build_basis_set_batch, BasisSet, IsvdConfig, SvdState};
use strom_core::bounds::{bound_theorem1, bound_theorem2, bound_theorem3, st_inverse_norm, step_inverse_norms};
use strom_core::linalg::{qr, solve_dense, thin_svd, vec_ops, DenseMatrix, PowerIterationOptions, SparseMatrix};
use strom_core::problems::{make_system, ProblemKind, ProblemSpec};
use strom_core::srom::{build_spatial_rom, srom_march, srom_reconstruct, RefMode};
use strom_core::strom::{
    build_space_time_rom, build_st_init, build_st_input, build_st_matrix, explicit_st_basis, reconstruct,
    reconstruct_all, solve_strom,
};
use strom_core::system::{
    assemble_st, fom_march, InputSignal, LinearDynamicalSystem, ParamPoint, TimeGrid, ST_ASSEMBLY_CAP,
};

fn orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    qr(&DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0)))
        .unwrap()
        .0
}

fn random_system(n: usize, m: usize, steps: usize, rng: &mut ChaCha8Rng) -> LinearDynamicalSystem {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, -2.0 - rng.gen_range(0.0..1.0)));
        for _ in 0..2 {
            t.push((i, rng.gen_range(0..n), rng.gen_range(-0.5..0.5)));
        }
    }
    let b: Vec<_> = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, rng.gen_range(-1.0..1.0)))
        .collect();
    LinearDynamicalSystem::new(
        SparseMatrix::from_triplets(n, n, &t).unwrap(),
        SparseMatrix::from_triplets(n, m, &b).unwrap(),
        DenseMatrix::from_fn(n, 1, |_, _| rng.gen_range(-1.0..1.0)),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        InputSignal::Table(DenseMatrix::from_fn(m, steps, |_, _| rng.gen_range(-1.0..1.0))),
        ParamPoint::default(),
    )
    .unwrap()
}

fn random_basis(n_states: usize, n_steps: usize, n_s: usize, n_t: usize, rng: &mut ChaCha8Rng) -> BasisSet {
    let spatial = orthonormal(n_states, n_s, rng);
    let temporal = (0..n_s).map(|_| orthonormal(n_steps, n_t, rng)).collect();
    BasisSet::new(spatial, temporal, n_t).unwrap()
}

fn random_grid(steps: usize, rng: &mut ChaCha8Rng) -> TimeGrid {
    TimeGrid::new((0..steps).map(|_| rng.gen_range(0.01..0.2)).collect()).unwrap()
}

#[test]
fn isvd_matches_batch_singular_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = DenseMatrix::from_fn(200, 40, |_, _| rng.gen_range(-1.0..1.0));
    let mut s = SvdState::new(200, IsvdConfig::exact());
    s.ingest_simulation(&m).unwrap();
    let batch = thin_svd(&m).unwrap();
    assert_eq!(s.rank(), 40);
    for (a, b) in s.sigma().iter().zip(&batch.sigma) {
        assert!((a - b).abs() <= 1e-8 * b);
    }
    let rec = s
        .phi()
        .matmul(&DenseMatrix::from_diag(s.sigma()))
        .matmul(&s.v().transpose());
    assert!(rec.max_abs_diff(&m) < 1e-10);
}

#[test]
fn block_assembly_matches_explicit_projection() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, steps, n_s, n_t) = (12, 8, 3, 2);
        let sys = random_system(n, 2, steps, &mut rng);
        let grid = random_grid(steps, &mut rng);
        let basis = random_basis(n, steps, n_s, n_t, &mut rng);
        let rom = build_spatial_rom(&sys, &basis, RefMode::Zero).unwrap();

        let st = assemble_st(&sys, &grid, ST_ASSEMBLY_CAP).unwrap();
        let phi_st = explicit_st_basis(&basis, ST_ASSEMBLY_CAP).unwrap();
        let a_oracle = phi_st.tr_matmul(&st.a_st.mul_dense(&phi_st));
        let f_oracle = phi_st.tr_matvec(&st.f_st);
        let x0_oracle = phi_st.tr_matvec(&st.x0_st);

        let a = build_st_matrix(&rom, &basis, &grid).unwrap();
        let f = build_st_input(&rom, &basis, &grid, &sys.input).unwrap();
        let x0 = build_st_init(&basis, &rom.x0_hat).unwrap();
        assert!(a.max_abs_diff(&a_oracle) <= 1e-11, "seed {seed}");
        assert!(vec_ops::max_abs_diff(&f, &f_oracle) <= 1e-11, "seed {seed}");
        assert!(vec_ops::max_abs_diff(&x0, &x0_oracle) <= 1e-11, "seed {seed}");
    }
}

#[test]
fn explicit_basis_blocks_and_reconstruction() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, steps, n_s, n_t) = (7, 5, 3, 2);
    let basis = random_basis(n, steps, n_s, n_t, &mut rng);
    let phi_st = explicit_st_basis(&basis, 1000).unwrap();
    assert!(phi_st.orthonormality_error() < 1e-13);
    let xh: Vec<f64> = (0..n_s * n_t).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let full = phi_st.matvec(&xh);
    let all = reconstruct_all(&basis, &xh).unwrap();
    for k in 0..steps {
        let xk = reconstruct(&basis, &xh, k).unwrap();
        assert!(vec_ops::max_abs_diff(&xk, &full[k * n..(k + 1) * n]) < 1e-12);
        assert!(vec_ops::max_abs_diff(&xk, all.col(k)) < 1e-12);
        for j in 0..n_t {
            let block = phi_st.block(k * n, j * n_s, n, n_s);
            let e: Vec<f64> = (0..n_s).map(|i| basis.temporal[i][(k, j)]).collect();
            let expect = basis.spatial.matmul(&DenseMatrix::from_diag(&e));
            assert!(block.max_abs_diff(&expect) < 1e-15);
        }
    }
}

#[test]
fn fom_matches_explicit_space_time_solve() {
    let mut cases = Vec::new();
    let mut heat = ProblemSpec::new(ProblemKind::Heat1d);
    heat.nx = 20;
    cases.push((heat, TimeGrid::uniform(0.01, 30).unwrap()));
    let mut ad = ProblemSpec::new(ProblemKind::AdvDiff2d);
    ad.nx = 10;
    ad.ny = 10;
    cases.push((
        ad,
        TimeGrid::new((0..40).map(|k| 0.02 + 0.01 * (k % 3) as f64).collect()).unwrap(),
    ));
    let mut tr = ProblemSpec::new(ProblemKind::Transport1d);
    tr.nz = 20;
    tr.ndir = 4;
    cases.push((tr, TimeGrid::uniform(0.1, 25).unwrap()));

    for (spec, grid) in cases {
        let sys = make_system(&spec, &ParamPoint::default()).unwrap();
        assert!(sys.n_states() * grid.steps() <= ST_ASSEMBLY_CAP);
        let fom = fom_march(&sys, &grid).unwrap();
        let st = assemble_st(&sys, &grid, ST_ASSEMBLY_CAP).unwrap();
        let rhs = vec_ops::add(&st.f_st, &st.x0_st);
        let x = solve_dense(&st.a_st.to_dense(), &rhs).unwrap();
        let scale = vec_ops::max_abs(fom.states.as_slice()).max(1e-300);
        let diff = vec_ops::max_abs_diff(&x, fom.states.as_slice());
        assert!(diff <= 1e-9 * scale.max(1.0), "{}: {diff:e}", spec.kind);
    }
}

#[test]
fn full_basis_reproduces_fom() {
    let mut spec = ProblemSpec::new(ProblemKind::Heat1d);
    spec.nx = 8;
    let sys = make_system(&spec, &ParamPoint::default()).unwrap();
    let x0: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
    let sys = LinearDynamicalSystem::new(sys.a, sys.b, sys.c, x0, sys.input, sys.param).unwrap();
    let grid = TimeGrid::uniform(0.002, 16).unwrap();
    let fom = fom_march(&sys, &grid).unwrap();

    let mut state = SvdState::new(8, IsvdConfig::exact());
    state.ingest_simulation(&fom.states).unwrap();
    assert_eq!(state.rank(), 8);
    let basis = build_basis_set(&state, 8, 1, 16, 1).unwrap();

    let rom = build_spatial_rom(&sys, &basis, RefMode::Zero).unwrap();
    let xh = srom_march(&rom, &grid, &sys.input).unwrap();
    let srom_states = srom_reconstruct(&rom, &xh);

    let st = build_space_time_rom(&rom, &basis, &grid, &sys.input, &sys.x0).unwrap();
    let xst = solve_strom(&st).unwrap();
    let rhs = vec_ops::add(&st.f_st_hat, &st.x0_st_hat);
    let res = vec_ops::sub(&st.a_st_hat.matvec(&xst), &rhs);
    assert!(vec_ops::norm2(&res) <= 1e-10 * vec_ops::norm2(&rhs));
    let strom_states = reconstruct_all(&basis, &xst).unwrap();

    for k in 0..16 {
        let xk = fom.states.col(k);
        let nk = vec_ops::norm2(xk);
        assert!(vec_ops::norm2(&vec_ops::sub(xk, srom_states.col(k))) <= 1e-9 * nk);
        assert!(
            vec_ops::norm2(&vec_ops::sub(xk, strom_states.col(k))) <= 1e-9 * nk,
            "step {k}"
        );
    }
}

#[test]
fn incremental_and_batch_bases_agree() {
    let mut spec = ProblemSpec::new(ProblemKind::Heat1d);
    spec.nx = 24;
    let grid = TimeGrid::uniform(0.005, 20).unwrap();
    let mut sims = Vec::new();
    for kappa in [0.5, 1.0, 2.0] {
        let sys = make_system(&spec, &ParamPoint::new([("kappa", kappa)]).unwrap()).unwrap();
        sims.push(fom_march(&sys, &grid).unwrap().states);
    }
    let mut state = SvdState::new(24, IsvdConfig::exact());
    for s in &sims {
        state.ingest_simulation(s).unwrap();
    }
    let refs: Vec<&DenseMatrix> = sims.iter().collect();
    let snaps = strom_core::system::snapshot_matrix(&refs).unwrap();
    let inc = build_basis_set(&state, 3, 2, 20, 3).unwrap();
    let bat = build_basis_set_batch(&snaps, 3, 2, 20, 3).unwrap();
    // Singular vectors are determined up to sign; compare projectors.
    let p_inc = inc.spatial.matmul(&inc.spatial.transpose());
    let p_bat = bat.spatial.matmul(&bat.spatial.transpose());
    assert!(p_inc.max_abs_diff(&p_bat) < 1e-8);
    for i in 0..3 {
        let a = inc.temporal[i].matmul(&inc.temporal[i].transpose());
        let b = bat.temporal[i].matmul(&bat.temporal[i].transpose());
        assert!(a.max_abs_diff(&b) < 1e-6, "mode {i}");
    }
}

fn dense_inverse_norm(m: &DenseMatrix) -> f64 {
    1.0 / *thin_svd(m).unwrap().sigma.last().unwrap()
}

#[test]
fn space_time_inverse_norm_matches_dense() {
    let mut spec = ProblemSpec::new(ProblemKind::Heat1d);
    spec.nx = 32;
    let sys = make_system(&spec, &ParamPoint::default()).unwrap();
    let grid = TimeGrid::uniform(0.001, 16).unwrap();
    let est = st_inverse_norm(&sys, &grid, &PowerIterationOptions::default()).unwrap();
    let st = assemble_st(&sys, &grid, ST_ASSEMBLY_CAP).unwrap();
    let exact = dense_inverse_norm(&st.a_st.to_dense());
    assert!((est - exact).abs() <= 1e-6 * exact, "{est} vs {exact}");
}

#[test]
fn step_inverse_norms_match_dense_above_cutover() {
    let mut spec = ProblemSpec::new(ProblemKind::Transport1d);
    spec.nz = 40;
    spec.ndir = 8;
    let sys = make_system(&spec, &ParamPoint::default()).unwrap();
    assert!(sys.n_states() >= 256);
    let grid = TimeGrid::new(vec![0.1, 0.05]).unwrap();
    let est = step_inverse_norms(&sys, &grid, &PowerIterationOptions::default()).unwrap();
    for (k, &dt) in grid.dts().iter().enumerate() {
        let exact = dense_inverse_norm(&sys.step_matrix(dt).to_dense());
        assert!((est[k] - exact).abs() <= 1e-6 * exact, "{} vs {exact}", est[k]);
    }
}

fn spatial_rom_states(sys: &LinearDynamicalSystem, grid: &TimeGrid, train: &DenseMatrix, n_s: usize) -> DenseMatrix {
    let mut state = SvdState::new(sys.n_states(), IsvdConfig::default());
    state.ingest_simulation(train).unwrap();
    let basis = build_basis_set(&state, n_s, 1, grid.steps(), 1).unwrap();
    let rom = build_spatial_rom(sys, &basis, RefMode::InitialState).unwrap();
    srom_reconstruct(&rom, &srom_march(&rom, grid, &sys.input).unwrap())
}

#[test]
fn heat_bounds_dominate_error() {
    let opts = PowerIterationOptions::default();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut spec = ProblemSpec::new(ProblemKind::Heat1d);
        spec.nx = rng.gen_range(10..30);
        let train_kappa = rng.gen_range(0.5..2.0);
        let test_kappa = rng.gen_range(0.5..2.0);
        let sys_train = make_system(&spec, &ParamPoint::new([("kappa", train_kappa)]).unwrap()).unwrap();
        let sys = make_system(&spec, &ParamPoint::new([("kappa", test_kappa)]).unwrap()).unwrap();
        let a_norm = strom_core::system::operator_norm(&sys.a, &opts).unwrap();
        let grid = TimeGrid::uniform(0.5 / a_norm, rng.gen_range(8..20)).unwrap();
        let exact = fom_march(&sys, &grid).unwrap().states;
        let train = fom_march(&sys_train, &grid).unwrap().states;
        let approx = spatial_rom_states(&sys, &grid, &train, 2);

        let b1 = bound_theorem1(&sys, &grid, &approx, Some(&exact), &opts).unwrap();
        let b2 = bound_theorem2(&sys, &grid, &approx, Some(&exact), &opts).unwrap();
        let st: Vec<f64> = approx.as_slice().to_vec();
        let b3 = bound_theorem3(&sys, &grid, &st, Some(&exact), &opts).unwrap();
        assert_eq!(b1.valid(), Some(true), "seed {seed}");
        assert_eq!(b2.valid(), Some(true), "seed {seed}");
        assert!(b3.final_bound() >= b3.max_error().unwrap(), "seed {seed}");
        if b1.constants.iter().all(|&b| b >= 1.0) {
            assert!(b1.bounds.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}

#[test]
fn gamma_product_tends_to_one() {
    let opts = PowerIterationOptions::default();
    let mut spec = ProblemSpec::new(ProblemKind::Heat1d);
    spec.nx = 16;
    let sys = make_system(&spec, &ParamPoint::default()).unwrap();
    let a_norm = strom_core::system::operator_norm(&sys.a, &opts).unwrap();
    let mut last = f64::INFINITY;
    for shrink in [1.0, 10.0, 100.0] {
        let grid = TimeGrid::uniform(0.5 / a_norm / shrink, 10).unwrap();
        let approx = DenseMatrix::zeros(16, 10);
        let r = bound_theorem2(&sys, &grid, &approx, None, &opts).unwrap();
        let p = r.constant_product();
        assert!(p < last && p >= 1.0);
        last = p;
    }
    assert!(last - 1.0 < 0.1);
}
