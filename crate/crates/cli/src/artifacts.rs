//! On-disk layout of a trained model.
//!
//! ```text
//! <out>/spatial_basis.mat        N_s x n_s
//! <out>/temporal_basis_000.mat   N_t x n_t, one per spatial mode
//! <out>/singular_values.mat      r x 1
//! <out>/manifest.txt             key = value
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use strom_core::basis::BasisSet;
use strom_core::linalg::DenseMatrix;
use strom_core::persist::{read_matrix, write_matrix};

pub const SPATIAL_FILE: &str = "spatial_basis.mat";
pub const SINGULAR_VALUES_FILE: &str = "singular_values.mat";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn temporal_file(i: usize) -> String {
    format!("temporal_basis_{i:03}.mat")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub problem_kind: String,
    pub n_states: usize,
    pub n_steps: usize,
    pub n_mu: usize,
    pub n_s: usize,
    pub n_t: usize,
    pub dt: f64,
}

impl Manifest {
    fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format = 1");
        let _ = writeln!(s, "problem.kind = {}", self.problem_kind);
        let _ = writeln!(s, "n_states = {}", self.n_states);
        let _ = writeln!(s, "n_steps = {}", self.n_steps);
        let _ = writeln!(s, "n_mu = {}", self.n_mu);
        let _ = writeln!(s, "n_s = {}", self.n_s);
        let _ = writeln!(s, "n_t = {}", self.n_t);
        let _ = writeln!(s, "dt = {:e}", self.dt);
        s
    }

    fn parse(text: &str) -> Result<Self> {
        let map: BTreeMap<&str, &str> = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim(), v.trim()))
            .collect();
        let get = |k: &str| map.get(k).copied().with_context(|| format!("manifest lacks `{k}`"));
        let num = |k: &str| -> Result<usize> { get(k)?.parse().with_context(|| format!("manifest `{k}`")) };
        if get("format")? != "1" {
            bail!("unsupported manifest format {}", get("format")?);
        }
        Ok(Self {
            problem_kind: get("problem.kind")?.to_string(),
            n_states: num("n_states")?,
            n_steps: num("n_steps")?,
            n_mu: num("n_mu")?,
            n_s: num("n_s")?,
            n_t: num("n_t")?,
            dt: get("dt")?.parse().context("manifest `dt`")?,
        })
    }
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn save_model(dir: &Path, basis: &BasisSet, sigma: &[f64], manifest: &Manifest) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_matrix(path(dir, SPATIAL_FILE), &basis.spatial)?;
    for (i, t) in basis.temporal.iter().enumerate() {
        write_matrix(path(dir, &temporal_file(i)), t)?;
    }
    if !sigma.is_empty() {
        write_matrix(
            path(dir, SINGULAR_VALUES_FILE),
            &DenseMatrix::from_fn(sigma.len(), 1, |i, _| sigma[i]),
        )?;
    }
    std::fs::write(path(dir, MANIFEST_FILE), manifest.render()).context("writing manifest")?;
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<(BasisSet, Manifest)> {
    let mpath = path(dir, MANIFEST_FILE);
    let text = std::fs::read_to_string(&mpath)
        .with_context(|| format!("no trained model in {} (run `train` first)", dir.display()))?;
    let manifest = Manifest::parse(&text).with_context(|| format!("parsing {}", mpath.display()))?;
    let spatial = read_matrix(path(dir, SPATIAL_FILE)).context("loading the spatial basis")?;
    let temporal = (0..manifest.n_s)
        .map(|i| read_matrix(path(dir, &temporal_file(i))).with_context(|| format!("loading temporal basis {i}")))
        .collect::<Result<Vec<_>>>()?;
    let basis = BasisSet::new(spatial, temporal, manifest.n_mu)?;
    if basis.n_states() != manifest.n_states || basis.n_steps() != manifest.n_steps || basis.n_t() != manifest.n_t {
        bail!("basis files in {} disagree with the manifest", dir.display());
    }
    Ok((basis, manifest))
}
