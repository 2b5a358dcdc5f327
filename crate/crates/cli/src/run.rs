//! Online phase: spatial and space-time ROM solves at a parameter point,
//! optional FOM ground truth, error bounds and timings.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use strom_core::basis::BasisSet;
use strom_core::bounds::{bound_theorem1, bound_theorem2, bound_theorem3, BoundError, BoundReport};
use strom_core::linalg::{vec_ops, DenseMatrix, PowerIterationOptions};
use strom_core::par;
use strom_core::problems::make_system;
use strom_core::srom::{build_spatial_rom, srom_march, srom_output, srom_reconstruct};
use strom_core::strom::{build_space_time_rom, reconstruct_all, solve_strom};
use strom_core::system::{fom_march, ParamPoint};

use crate::config::RunConfig;
use crate::timing::{ratio, time_median, time_once, Timing};

/// Repetitions for online timings; the median is reported.
pub const ONLINE_REPS: usize = 5;

/// A bound that was computed or deliberately skipped.
#[derive(Clone, Debug)]
pub enum BoundOutcome {
    Computed(BoundReport),
    Skipped(String),
}

impl BoundOutcome {
    pub fn report(&self) -> Option<&BoundReport> {
        match self {
            Self::Computed(r) => Some(r),
            Self::Skipped(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub param: ParamPoint,
    pub n_states: usize,
    pub n_steps: usize,
    pub n_s: usize,
    pub n_t: usize,
    pub projection: Timing,
    pub srom: Timing,
    pub strom: Timing,
    pub fom: Option<Timing>,
    pub srom_states: DenseMatrix,
    pub strom_states: DenseMatrix,
    pub fom_states: Option<DenseMatrix>,
    /// `Cᵀ x̃_{N_t}` from the spatial ROM.
    pub srom_final_output: Vec<f64>,
    pub fom_final_output: Option<Vec<f64>>,
    pub bounds: Vec<(&'static str, BoundOutcome)>,
    pub workers: usize,
}

fn rel_errors(exact: &DenseMatrix, approx: &DenseMatrix) -> Vec<f64> {
    (0..exact.cols())
        .map(|k| {
            let e = vec_ops::norm2(&vec_ops::sub(exact.col(k), approx.col(k)));
            let n = vec_ops::norm2(exact.col(k));
            if n > 0.0 {
                e / n
            } else {
                e
            }
        })
        .collect()
}

impl RunOutcome {
    pub fn fom_norms(&self) -> Option<Vec<f64>> {
        let f = self.fom_states.as_ref()?;
        Some((0..f.cols()).map(|k| vec_ops::norm2(f.col(k))).collect())
    }

    /// `‖x_k - x̃_k‖ / ‖x_k‖` per step for the spatial ROM.
    pub fn srom_rel_errors(&self) -> Option<Vec<f64>> {
        Some(rel_errors(self.fom_states.as_ref()?, &self.srom_states))
    }

    pub fn strom_rel_errors(&self) -> Option<Vec<f64>> {
        Some(rel_errors(self.fom_states.as_ref()?, &self.strom_states))
    }

    pub fn strom_wall_speedup(&self) -> Option<f64> {
        Some(ratio(self.fom?.wall, self.strom.wall))
    }

    pub fn strom_cpu_speedup(&self) -> Option<f64> {
        Some(ratio(self.fom?.cpu, self.strom.cpu))
    }

    pub fn srom_wall_speedup(&self) -> Option<f64> {
        Some(ratio(self.fom?.wall, self.srom.wall))
    }

    fn bound_series(&self, name: &str) -> Option<&[f64]> {
        self.bounds
            .iter()
            .find(|(n, _)| *n == name)
            .and_then(|(_, b)| b.report())
            .map(|r| r.bounds.as_slice())
    }
}

/// Solves both ROMs at `param` with a trained basis.
pub fn run_at(cfg: &RunConfig, basis: &BasisSet, param: &ParamPoint) -> Result<RunOutcome> {
    let grid = cfg.grid()?;
    let sys = make_system(&cfg.problem, param).with_context(|| format!("building the system at {param}"))?;
    if sys.n_states() != basis.n_states() || grid.steps() != basis.n_steps() {
        bail!(
            "trained basis is {}x{} (states x steps) but the configuration gives {}x{}",
            basis.n_states(),
            basis.n_steps(),
            sys.n_states(),
            grid.steps()
        );
    }

    let (srom, projection) = time_once(|| build_spatial_rom(&sys, basis, cfg.ref_mode));
    let srom = srom.context("projecting the operators")?;
    let (x_hat, srom_t) = time_median(ONLINE_REPS, || srom_march(&srom, &grid, &sys.input))?;
    let (x_st, strom_t) = time_median(ONLINE_REPS, || {
        let st = build_space_time_rom(&srom, basis, &grid, &sys.input, &sys.x0)?;
        solve_strom(&st)
    })?;
    let srom_states = srom_reconstruct(&srom, &x_hat);
    let strom_states = reconstruct_all(basis, &x_st)?;
    let srom_final_output = srom_output(&srom, x_hat.col(grid.steps() - 1));

    let (fom, fom_t) = if cfg.run_fom {
        let (fom, t) = time_once(|| fom_march(&sys, &grid));
        (Some(fom.context("FOM at the test parameter")?), Some(t))
    } else {
        (None, None)
    };
    let fom_states = fom.as_ref().map(|f| f.states.clone());
    let fom_final_output = fom.as_ref().map(|f| f.outputs.col(grid.steps() - 1).to_vec());

    let mut bounds = Vec::new();
    if cfg.run_bounds {
        let opts = PowerIterationOptions {
            seed: cfg.seed,
            ..PowerIterationOptions::default()
        };
        let reference = fom_states.as_ref();
        bounds.push((
            "bound1",
            BoundOutcome::Computed(bound_theorem1(&sys, &grid, &srom_states, reference, &opts)?),
        ));
        let b2 = if basis.n_s() == basis.n_states() {
            BoundOutcome::Skipped("n_s = N_s leaves no projection error; the spatial-ROM bound degenerates".into())
        } else {
            match bound_theorem2(&sys, &grid, &srom_states, reference, &opts) {
                Ok(r) => BoundOutcome::Computed(r),
                Err(BoundError::Precondition(msg)) => BoundOutcome::Skipped(msg),
                Err(e) => return Err(e.into()),
            }
        };
        bounds.push(("bound2", b2));
        bounds.push((
            "bound3",
            BoundOutcome::Computed(bound_theorem3(&sys, &grid, strom_states.as_slice(), reference, &opts)?),
        ));
        for (name, b) in &bounds {
            match b {
                BoundOutcome::Computed(r) if r.valid() == Some(false) => warn!("{name} is violated"),
                BoundOutcome::Skipped(why) => info!("{name} skipped: {why}"),
                _ => {}
            }
        }
    }

    Ok(RunOutcome {
        param: param.clone(),
        n_states: sys.n_states(),
        n_steps: grid.steps(),
        n_s: basis.n_s(),
        n_t: basis.n_t(),
        projection,
        srom: srom_t,
        strom: strom_t,
        fom: fom_t,
        srom_states,
        strom_states,
        fom_states,
        srom_final_output,
        fom_final_output,
        bounds,
        workers: par::current_num_threads(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_else(|| "NA".into())
}

pub fn render_series(o: &RunOutcome) -> String {
    let mut s = String::from("step,fom_norm,rel_error_srom,rel_error_strom,bound1,bound2,bound3\n");
    let fom = o.fom_norms();
    let e1 = o.srom_rel_errors();
    let e2 = o.strom_rel_errors();
    let b: Vec<Option<&[f64]>> = ["bound1", "bound2", "bound3"]
        .iter()
        .map(|n| o.bound_series(n))
        .collect();
    for k in 0..o.n_steps {
        let at = |v: &Option<Vec<f64>>| opt(v.as_ref().map(|v| v[k]));
        let bk = |i: usize| opt(b[i].map(|v| v[k]));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            k + 1,
            at(&fom),
            at(&e1),
            at(&e2),
            bk(0),
            bk(1),
            bk(2)
        );
    }
    s
}

pub fn render_report(o: &RunOutcome) -> String {
    let max = |v: Option<Vec<f64>>| v.map(|v| v.into_iter().fold(0.0, f64::max));
    let mut s = String::new();
    let _ = writeln!(s, "[run]");
    let _ = writeln!(s, "parameters = {}", o.param);
    let _ = writeln!(s, "n_states = {}", o.n_states);
    let _ = writeln!(s, "n_steps = {}", o.n_steps);
    let _ = writeln!(s, "n_s = {}", o.n_s);
    let _ = writeln!(s, "n_t = {}", o.n_t);
    let _ = writeln!(s, "space_time_dof = {}", o.n_states * o.n_steps);
    let _ = writeln!(s, "reduced_dof = {}", o.n_s * o.n_t);
    let _ = writeln!(s, "max_rel_error_srom = {}", opt(max(o.srom_rel_errors())));
    let _ = writeln!(s, "max_rel_error_strom = {}", opt(max(o.strom_rel_errors())));
    let _ = writeln!(
        s,
        "final_output_srom = {}",
        o.srom_final_output
            .iter()
            .map(|v| format!("{v:e}"))
            .collect::<Vec<_>>()
            .join(",")
    );
    if let Some(y) = &o.fom_final_output {
        let _ = writeln!(
            s,
            "final_output_fom = {}",
            y.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "[timings]");
    let _ = writeln!(s, "workers = {}", o.workers);
    let _ = writeln!(s, "online_repetitions = {ONLINE_REPS}");
    let _ = writeln!(s, "projection_wall_s = {:e}", o.projection.wall_secs());
    let _ = writeln!(s, "srom_wall_s = {:e}", o.srom.wall_secs());
    let _ = writeln!(s, "srom_cpu_s = {:e}", o.srom.cpu_secs());
    let _ = writeln!(s, "strom_wall_s = {:e}", o.strom.wall_secs());
    let _ = writeln!(s, "strom_cpu_s = {:e}", o.strom.cpu_secs());
    if let Some(f) = o.fom {
        let _ = writeln!(s, "fom_wall_s = {:e}", f.wall_secs());
        let _ = writeln!(s, "fom_cpu_s = {:e}", f.cpu_secs());
    }
    let _ = writeln!(s, "speedup_wall_srom = {}", opt(o.srom_wall_speedup()));
    let _ = writeln!(s, "speedup_wall_strom = {}", opt(o.strom_wall_speedup()));
    let _ = writeln!(s, "speedup_cpu_strom = {}", opt(o.strom_cpu_speedup()));
    for (name, b) in &o.bounds {
        let _ = writeln!(s);
        let _ = writeln!(s, "[{name}]");
        match b {
            BoundOutcome::Skipped(why) => {
                let _ = writeln!(s, "status = skipped");
                let _ = writeln!(s, "reason = {why}");
            }
            BoundOutcome::Computed(r) => {
                let _ = writeln!(s, "status = computed");
                let _ = writeln!(s, "kind = {}", r.kind);
                let _ = writeln!(s, "final_bound = {:e}", r.final_bound());
                let _ = writeln!(s, "max_error = {}", opt(r.max_error()));
                let _ = writeln!(
                    s,
                    "valid = {}",
                    r.valid().map(|v| v.to_string()).unwrap_or_else(|| "NA".into())
                );
                if !r.constants.is_empty() {
                    let _ = writeln!(s, "constant_product = {:e}", r.constant_product());
                }
                if let Some(n) = r.inverse_norm {
                    let _ = writeln!(s, "st_inverse_norm = {n:e}");
                }
            }
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "[series]");
    s.push_str(&render_series(o));
    s
}

/// Writes `run_report<suffix>.txt` and `run_series<suffix>.csv`.
pub fn write_outputs(dir: &Path, suffix: &str, o: &RunOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join(format!("run_report{suffix}.txt")), render_report(o)).context("writing the run report")?;
    std::fs::write(dir.join(format!("run_series{suffix}.csv")), render_series(o)).context("writing the run series")?;
    Ok(())
}
