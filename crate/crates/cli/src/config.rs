//! Flat `key = value` run configuration.
//!
//! ```text
//! # heat equation, three diffusivities
//! problem.kind = heat1d
//! problem.nx = 64
//! time.dt = 0.001
//! time.nt = 100
//! samples = 0.5; 1.0; 2.0
//! test_params = 0.75
//! rom.ns = 6
//! rom.nt = 2
//! ```
//!
//! Parameter points are `;`-separated and their components `,`-separated, in
//! the order given by `samples.names` (the problem's default sample
//! parameters when absent).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use strom_core::basis::{IsvdConfig, RankCapPolicy};
use strom_core::problems::{ProblemKind, ProblemSpec};
use strom_core::srom::RefMode;
use strom_core::system::{ParamPoint, TimeGrid};

/// Bad command line or configuration; maps to exit status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub dt: f64,
    pub nt: usize,
    pub param_names: Vec<String>,
    pub samples: Vec<ParamPoint>,
    pub test_params: Vec<ParamPoint>,
    pub rom_ns: usize,
    pub rom_nt: usize,
    pub isvd: IsvdConfig,
    pub ref_mode: RefMode,
    /// Artifacts and reports.
    pub out_dir: PathBuf,
    /// Per-sample FOM snapshot matrices are written here when set.
    pub snapshot_dir: Option<PathBuf>,
    pub seed: u64,
    /// 0 picks the rayon default.
    pub workers: usize,
    /// Run the FOM at test parameters for ground truth.
    pub run_fom: bool,
    pub run_bounds: bool,
    /// Added to one reduced space-time operator entry during `verify`.
    pub verify_perturb_st: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut problem = ProblemSpec::new(ProblemKind::Heat1d);
        problem.nx = 32;
        let names: Vec<String> = ProblemKind::Heat1d
            .default_sample_names()
            .iter()
            .map(|s| s.to_string())
            .collect();
        let point = |v: f64| ParamPoint::new([(names[0].clone(), v)]).expect("finite");
        Self {
            problem,
            dt: 1e-3,
            nt: 50,
            samples: vec![point(0.5), point(1.0), point(2.0)],
            test_params: vec![point(0.75)],
            param_names: names.clone(),
            rom_ns: 6,
            rom_nt: 2,
            isvd: IsvdConfig::default(),
            ref_mode: RefMode::InitialState,
            out_dir: PathBuf::from("strom_out"),
            snapshot_dir: None,
            seed: 0x5eed,
            workers: 0,
            run_fom: true,
            run_bounds: true,
            verify_perturb_st: 0.0,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(|e| usage(format!("{e:#}")))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("line {}: expected `key = value`, got `{line}`", no + 1)))?;
            let key = k.trim().to_string();
            if map.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(usage(format!("line {}: duplicate key `{key}`", no + 1)));
            }
        }
        Self::from_map(map)
    }

    fn from_map(mut map: BTreeMap<String, String>) -> Result<Self> {
        let mut take = |key: &str| map.remove(key);
        let mut cfg = Self::default();

        let kind = match take("problem.kind") {
            Some(v) => v.parse::<ProblemKind>().map_err(|e| usage(e.to_string()))?,
            None => ProblemKind::Heat1d,
        };
        let mut p = ProblemSpec::new(kind);
        if kind == ProblemKind::Heat1d {
            p.nx = cfg.problem.nx;
        }
        set(&mut p.nx, take("problem.nx"), "problem.nx")?;
        set(&mut p.ny, take("problem.ny"), "problem.ny")?;
        set(&mut p.nz, take("problem.nz"), "problem.nz")?;
        set(&mut p.ndir, take("problem.ndir"), "problem.ndir")?;
        set(&mut p.kappa, take("problem.kappa"), "problem.kappa")?;
        set(&mut p.vx, take("problem.vx"), "problem.vx")?;
        set(&mut p.vy, take("problem.vy"), "problem.vy")?;
        set(&mut p.nu, take("problem.nu"), "problem.nu")?;
        set(&mut p.q, take("problem.q"), "problem.q")?;
        set(&mut p.length, take("problem.length"), "problem.length")?;
        if let Some(v) = take("problem.sigma_t") {
            p.sigma_t = parse_list(&v, "problem.sigma_t")?;
        }
        if let Some(v) = take("problem.sigma_s") {
            p.sigma_s = parse_list(&v, "problem.sigma_s")?;
        }
        cfg.problem = p;

        set(&mut cfg.dt, take("time.dt"), "time.dt")?;
        set(&mut cfg.nt, take("time.nt"), "time.nt")?;

        cfg.param_names = match take("samples.names") {
            Some(v) => v
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
            None => kind.default_sample_names().iter().map(|s| s.to_string()).collect(),
        };
        for name in &cfg.param_names {
            if !kind.parameter_names().contains(&name.as_str()) {
                return Err(usage(format!(
                    "samples.names: `{name}` is not a {kind} parameter (known: {})",
                    kind.parameter_names().join(", ")
                )));
            }
        }
        let defaults_changed = kind != ProblemKind::Heat1d;
        match take("samples") {
            Some(v) => cfg.samples = parse_points(&v, &cfg.param_names, "samples")?,
            None if defaults_changed => return Err(usage("`samples` is required for this problem kind")),
            None => {}
        }
        match take("test_params") {
            Some(v) => cfg.test_params = parse_points(&v, &cfg.param_names, "test_params")?,
            None if defaults_changed => cfg.test_params = Vec::new(),
            None => {}
        }

        set(&mut cfg.rom_ns, take("rom.ns"), "rom.ns")?;
        set(&mut cfg.rom_nt, take("rom.nt"), "rom.nt")?;
        set(&mut cfg.isvd.tol_svd, take("svd.tol"), "svd.tol")?;
        set(&mut cfg.isvd.tol_sv, take("svd.sv_tol"), "svd.sv_tol")?;
        if let Some(v) = take("svd.max_rank") {
            cfg.isvd.max_rank = if v == "none" {
                usize::MAX
            } else {
                parse_value(&v, "svd.max_rank")?
            };
        }
        if let Some(v) = take("svd.on_rank_cap") {
            cfg.isvd.on_rank_cap = match v.as_str() {
                "reinitialize" => RankCapPolicy::Reinitialize,
                "truncate" => RankCapPolicy::Truncate,
                other => {
                    return Err(usage(format!(
                        "svd.on_rank_cap: `{other}` (expected reinitialize or truncate)"
                    )))
                }
            };
        }
        if let Some(v) = take("ref_mode") {
            cfg.ref_mode = v
                .parse()
                .map_err(|e: strom_core::srom::RomError| usage(e.to_string()))?;
        }
        if let Some(v) = take("paths.out") {
            cfg.out_dir = PathBuf::from(v);
        }
        cfg.snapshot_dir = take("paths.snapshots").map(PathBuf::from);
        set(&mut cfg.seed, take("seed"), "seed")?;
        set(&mut cfg.workers, take("workers"), "workers")?;
        set(&mut cfg.run_fom, take("run.fom"), "run.fom")?;
        set(&mut cfg.run_bounds, take("run.bounds"), "run.bounds")?;
        set(
            &mut cfg.verify_perturb_st,
            take("verify.perturb_st"),
            "verify.perturb_st",
        )?;

        if let Some(k) = map.keys().next() {
            return Err(usage(format!("unknown key `{k}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rom_ns == 0 {
            return Err(usage("rom.ns must be at least 1"));
        }
        if self.nt == 0 || !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(usage(format!(
                "time.dt = {}, time.nt = {} must be positive",
                self.dt, self.nt
            )));
        }
        if self.samples.is_empty() {
            return Err(usage("at least one training sample is required"));
        }
        let nt_max = self.nt.min(self.samples.len());
        if self.rom_nt == 0 || self.rom_nt > nt_max {
            return Err(usage(format!(
                "rom.nt = {} must lie in 1..={nt_max} (min of time.nt and the number of samples)",
                self.rom_nt
            )));
        }
        if self.isvd.tol_svd.is_nan() || self.isvd.tol_svd <= 0.0 {
            return Err(usage("svd.tol must be positive"));
        }
        if self.isvd.tol_sv.is_nan() || self.isvd.tol_sv < 0.0 || self.isvd.max_rank == 0 {
            return Err(usage("svd.sv_tol must be non-negative and svd.max_rank positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::uniform(self.dt, self.nt)?)
    }

    /// Parses a `--param` value against the configured parameter names.
    pub fn parse_param(&self, text: &str) -> Result<ParamPoint> {
        let pts = parse_points(text, &self.param_names, "--param")?;
        match pts.len() {
            1 => Ok(pts.into_iter().next().expect("one point")),
            n => Err(usage(format!("--param expects one point, got {n}"))),
        }
    }
}

fn parse_value<T: std::str::FromStr>(v: &str, key: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.trim()
        .parse::<T>()
        .map_err(|e| usage(format!("{key}: cannot parse `{v}`: {e}")))
}

fn set<T: std::str::FromStr>(dst: &mut T, v: Option<String>, key: &str) -> Result<()>
where
    T::Err: fmt::Display,
{
    if let Some(v) = v {
        *dst = parse_value(&v, key)?;
    }
    Ok(())
}

fn parse_list(v: &str, key: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_value(s, key)).collect()
}

fn parse_points(v: &str, names: &[String], key: &str) -> Result<Vec<ParamPoint>> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|point| {
            let values = parse_list(point, key)?;
            if values.len() != names.len() {
                return Err(usage(format!(
                    "{key}: point `{point}` has {} components, expected {} ({})",
                    values.len(),
                    names.len(),
                    names.join(", ")
                )));
            }
            ParamPoint::new(names.iter().cloned().zip(values)).map_err(|e| usage(format!("{key}: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(cfg.problem.kind, ProblemKind::Heat1d);
        assert_eq!(cfg.samples.len(), 3);
    }

    #[test]
    fn full_config() {
        let text = "
            problem.kind = advdiff2d   # 2-D
            problem.nx = 10
            problem.ny = 12
            time.dt = 0.01
            time.nt = 20
            samples.names = kappa
            samples = 0.01; 0.02 ;0.03
            test_params = 0.015
            rom.ns = 4
            rom.nt = 3
            svd.max_rank = 40
            svd.on_rank_cap = truncate
            ref_mode = zero
            run.bounds = false
        ";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.problem.n_states(), 120);
        assert_eq!(cfg.samples[1].get("kappa"), Some(0.02));
        assert_eq!(cfg.isvd.on_rank_cap, RankCapPolicy::Truncate);
        assert_eq!(cfg.ref_mode, RefMode::Zero);
        assert!(!cfg.run_bounds);
        assert_eq!(cfg.parse_param("0.025").unwrap().get("kappa"), Some(0.025));
    }

    #[test]
    fn errors_are_usage_errors() {
        for bad in [
            "nonsense",
            "rom.ns = 0",
            "rom.nt = 4",
            "unknown.key = 1",
            "samples = 1,2",
            "time.dt = abc",
            "problem.kind = wave",
            "samples.names = sigma_t",
            "rom.ns = 1\nrom.ns = 2",
        ] {
            let err = RunConfig::parse(bad).unwrap_err();
            assert!(err.downcast_ref::<UsageError>().is_some(), "{bad}: {err:#}");
        }
    }
}
