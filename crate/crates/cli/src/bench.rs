//! `strom bench`: offline and online timings under both execution modes.

use std::fmt::Write as _;

use anyhow::{Context, Result};
use strom_core::par::{self, ExecMode};

use crate::config::RunConfig;
use crate::run::run_at;
use crate::train::train;

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub mode: ExecMode,
    pub workers: usize,
    pub fom_sweep_s: f64,
    pub isvd_s: f64,
    pub fom_s: Option<f64>,
    pub srom_s: f64,
    pub strom_s: f64,
    pub max_rel_error_strom: Option<f64>,
}

pub fn bench(cfg: &RunConfig) -> Result<Vec<BenchRow>> {
    let param = cfg
        .test_params
        .first()
        .or_else(|| cfg.samples.first())
        .context("no parameter point to benchmark")?
        .clone();
    let mut cfg = cfg.clone();
    cfg.run_bounds = false;
    let mut rows = Vec::new();
    let previous = par::exec_mode();
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        par::set_exec_mode(mode);
        let row = par::install(cfg.workers, || -> Result<BenchRow> {
            let t = train(&cfg, false)?;
            let r = run_at(&cfg, &t.basis, &param)?;
            Ok(BenchRow {
                mode,
                workers: if mode == ExecMode::Parallel {
                    par::current_num_threads()
                } else {
                    1
                },
                fom_sweep_s: t.sweep.wall_secs(),
                isvd_s: t.ingest.wall_secs(),
                fom_s: r.fom.map(|f| f.wall_secs()),
                srom_s: r.srom.wall_secs(),
                strom_s: r.strom.wall_secs(),
                max_rel_error_strom: r.strom_rel_errors().map(|e| e.into_iter().fold(0.0, f64::max)),
            })
        });
        rows.push(row?);
    }
    par::set_exec_mode(previous);
    Ok(rows)
}

pub fn render(rows: &[BenchRow]) -> String {
    let mut s = String::from("mode,workers,fom_sweep_s,isvd_s,fom_s,srom_s,strom_s,max_rel_error_strom\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_else(|| "NA".into());
    for r in rows {
        let mode = match r.mode {
            ExecMode::Sequential => "sequential",
            ExecMode::Parallel => "parallel",
        };
        let _ = writeln!(
            s,
            "{mode},{},{:e},{:e},{},{:e},{:e},{}",
            r.workers,
            r.fom_sweep_s,
            r.isvd_s,
            opt(r.fom_s),
            r.srom_s,
            r.strom_s,
            opt(r.max_rel_error_strom)
        );
    }
    s
}
