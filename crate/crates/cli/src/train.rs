//! Offline phase: FOM sweeps, streaming SVD, basis construction.

use std::fmt::Write as _;
use std::time::Duration;

use anyhow::{Context, Result};
use log::info;
use strom_core::basis::{build_basis_set, BasisSet, IsvdHistory, SvdState};
use strom_core::par;
use strom_core::persist::write_matrix;
use strom_core::problems::make_system;
use strom_core::system::{check_stability, fom_march, StabilityMethod};

use crate::artifacts::{save_model, Manifest};
use crate::config::RunConfig;
use crate::timing::{time_once, Timing};

#[derive(Debug)]
pub struct TrainOutcome {
    pub basis: BasisSet,
    pub sigma: Vec<f64>,
    pub history: IsvdHistory,
    pub fom_times: Vec<Duration>,
    pub sweep: Timing,
    pub ingest: Timing,
    pub basis_build: Timing,
}

/// Runs the offline phase and, when `write` is set, stores the model and
/// `train_report.txt` in the output directory.
pub fn train(cfg: &RunConfig, write: bool) -> Result<TrainOutcome> {
    let grid = cfg.grid()?;
    let systems = cfg
        .samples
        .iter()
        .map(|p| make_system(&cfg.problem, p).with_context(|| format!("building the system at {p}")))
        .collect::<Result<Vec<_>>>()?;
    let stab = check_stability(&systems[0]).context("stability check")?;
    if !stab.stable {
        log::warn!(
            "the symmetric part of A is not negative definite ({:?}); backward Euler is still well posed but bounds may grow",
            stab.method
        );
    } else if stab.method == StabilityMethod::Gershgorin {
        info!("stability established by diagonal dominance");
    }

    let n_samples = systems.len();
    let work = systems[0].n_states() * grid.steps();
    let (sims, sweep) = time_once(|| {
        par::install(cfg.workers, || {
            par::map_collect(n_samples, work * n_samples, |i| fom_march(&systems[i], &grid))
        })
    });
    let sims = sims
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.with_context(|| format!("FOM at sample {}", cfg.samples[i])))
        .collect::<Result<Vec<_>>>()?;
    info!("FOM sweep over {n_samples} samples took {:.3} s", sweep.wall_secs());

    if let Some(dir) = &cfg.snapshot_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (i, s) in sims.iter().enumerate() {
            write_matrix(dir.join(format!("snapshots_{i:03}.mat")), &s.states)?;
        }
    }

    let (state, ingest) = time_once(|| -> Result<SvdState> {
        let mut state = SvdState::new(systems[0].n_states(), cfg.isvd);
        for (i, s) in sims.iter().enumerate() {
            state
                .ingest_simulation(&s.states)
                .with_context(|| format!("incremental SVD, sample {i}"))?;
        }
        Ok(state)
    });
    let state = state?;
    info!(
        "incremental SVD rank {} after {} columns",
        state.rank(),
        state.columns()
    );

    let (basis, basis_build) = time_once(|| build_basis_set(&state, cfg.rom_ns, cfg.rom_nt, grid.steps(), n_samples));
    let basis = basis.context("building bases")?;

    let outcome = TrainOutcome {
        basis,
        sigma: state.sigma().to_vec(),
        history: state.history().clone(),
        fom_times: sims.iter().map(|s| s.wall_time).collect(),
        sweep,
        ingest,
        basis_build,
    };
    if write {
        let manifest = Manifest {
            problem_kind: cfg.problem.kind.to_string(),
            n_states: outcome.basis.n_states(),
            n_steps: grid.steps(),
            n_mu: n_samples,
            n_s: outcome.basis.n_s(),
            n_t: outcome.basis.n_t(),
            dt: cfg.dt,
        };
        save_model(&cfg.out_dir, &outcome.basis, &outcome.sigma, &manifest)?;
        std::fs::write(cfg.out_dir.join("train_report.txt"), render_report(cfg, &outcome))
            .context("writing train_report.txt")?;
    }
    Ok(outcome)
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn render_report(cfg: &RunConfig, o: &TrainOutcome) -> String {
    let mut s = String::new();
    let h = &o.history;
    let _ = writeln!(s, "[train]");
    let _ = writeln!(s, "problem = {}", cfg.problem.kind);
    let _ = writeln!(s, "n_states = {}", o.basis.n_states());
    let _ = writeln!(s, "n_steps = {}", o.basis.n_steps());
    let _ = writeln!(s, "n_samples = {}", cfg.samples.len());
    let _ = writeln!(s, "n_s = {}", o.basis.n_s());
    let _ = writeln!(s, "n_t = {}", o.basis.n_t());
    let _ = writeln!(s, "svd.tol = {:e}", cfg.isvd.tol_svd);
    let _ = writeln!(s, "svd.sv_tol = {:e}", cfg.isvd.tol_sv);
    let _ = writeln!(s, "final_rank = {}", o.sigma.len());
    for (name, cols) in [
        ("rejected_columns", &h.rejected),
        ("dependent_updates", &h.dependent),
        ("truncations", &h.truncations),
        ("reorthogonalizations", &h.reorthogonalizations),
        ("reinitializations", &h.reinitializations),
    ] {
        let _ = writeln!(s, "{name} = {}", cols.len());
        let _ = writeln!(s, "{name}.at = {}", join(cols));
    }
    let _ = writeln!(s, "workers = {}", par::install(cfg.workers, par::current_num_threads));
    let _ = writeln!(s, "fom_sweep_wall_s = {:.6}", o.sweep.wall_secs());
    let _ = writeln!(s, "fom_sweep_cpu_s = {:.6}", o.sweep.cpu_secs());
    let _ = writeln!(s, "isvd_wall_s = {:.6}", o.ingest.wall_secs());
    let _ = writeln!(s, "basis_build_wall_s = {:.6}", o.basis_build.wall_secs());
    let _ = writeln!(s);
    let _ = writeln!(s, "[samples]");
    let _ = writeln!(s, "index,parameters,fom_wall_s");
    for (i, (p, t)) in cfg.samples.iter().zip(&o.fom_times).enumerate() {
        let _ = writeln!(s, "{i},\"{p}\",{:.6}", t.as_secs_f64());
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "[singular_values]");
    let _ = writeln!(
        s,
        "{}",
        join(&o.sigma.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>())
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "[rank_history]");
    let _ = writeln!(s, "{}", join(&h.ranks));
    s
}
