//! Experiment configuration: a plain text file of `key = value` lines with
//! one `[run]` section per independent initialization, every key also
//! settable from the command line (command line wins).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use aies_core::ensemble::{InitSpec, Scheduler};
use aies_core::targets::{
    affine_wrap, AffineMap, Ar1Gaussian, Rosenbrock, StdGaussian, TargetDensity,
};

use crate::error::{CliError, Result};

/// Parsed but untyped configuration: global keys plus one key map per
/// `[run]` section.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    globals: BTreeMap<String, String>,
    runs: Vec<BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RawConfig::default();
        let mut section: Option<usize> = None;
        for (line_no, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        CliError::Config(format!("line {}: unterminated section", line_no + 1))
                    })?
                    .trim();
                if name != "run" {
                    return Err(CliError::Config(format!(
                        "line {}: unknown section [{name}], only [run] is supported",
                        line_no + 1
                    )));
                }
                cfg.runs.push(BTreeMap::new());
                section = Some(cfg.runs.len() - 1);
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value", line_no + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            match section {
                Some(idx) => cfg.runs[idx].insert(key, value),
                None => cfg.globals.insert(key, value),
            };
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Apply `key=value` pairs from the command line; these take priority.
    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<()> {
        for pair in pairs {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                CliError::Config(format!("override '{pair}' is not of the form key=value"))
            })?;
            self.globals
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.globals.get(key).map(|s| s.as_str())
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("{key} = {v} is not a number"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<u64>()
                .map_err(|_| CliError::Config(format!("{key} = {v} is not a nonnegative integer"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|part| {
                    part.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Config(format!("{key}: '{part}' is not a number")))
                })
                .collect(),
        }
    }

    pub fn usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|part| {
                    part.trim()
                        .parse::<usize>()
                        .map_err(|_| CliError::Config(format!("{key}: '{part}' is not an integer")))
                })
                .collect(),
        }
    }

    fn run_sections(&self) -> &[BTreeMap<String, String>] {
        &self.runs
    }
}

/// Which benchmark distribution to sample.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    StdGaussian {
        dim: usize,
    },
    Ar1 {
        alpha: f64,
        dim: usize,
    },
    Rosenbrock {
        dim: usize,
    },
    Affine {
        inner: Box<TargetSpec>,
        matrix_file: PathBuf,
        offset_file: Option<PathBuf>,
    },
}

impl TargetSpec {
    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::StdGaussian { dim }
            | TargetSpec::Ar1 { dim, .. }
            | TargetSpec::Rosenbrock { dim } => *dim,
            TargetSpec::Affine { inner, .. } => inner.dim(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn TargetDensity>> {
        Ok(match self {
            TargetSpec::StdGaussian { dim } => Box::new(StdGaussian::new(*dim)?),
            TargetSpec::Ar1 { alpha, dim } => Box::new(Ar1Gaussian::new(*alpha, *dim)?),
            TargetSpec::Rosenbrock { dim } => Box::new(Rosenbrock::new(*dim)?),
            TargetSpec::Affine {
                inner,
                matrix_file,
                offset_file,
            } => {
                let inner_target = inner.build()?;
                let matrix = load_matrix(matrix_file, inner.dim())?;
                let offset = match offset_file {
                    Some(p) => DVector::from_vec(load_vector(p, inner.dim())?),
                    None => DVector::zeros(inner.dim()),
                };
                let map = AffineMap::new(matrix, offset)?;
                Box::new(affine_wrap(inner_target, map)?)
            }
        })
    }
}

fn load_matrix(path: &Path, dim: usize) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read matrix file {}: {e}", path.display()))
    })?;
    let mut rows = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|_| {
            CliError::Config(format!(
                "matrix file {} has a non-numeric entry",
                path.display()
            ))
        })?);
    }
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(CliError::Config(format!(
            "matrix file {} is not {dim}x{dim}",
            path.display()
        )));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

fn load_vector(path: &Path, dim: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read vector file {}: {e}", path.display()))
    })?;
    let values: std::result::Result<Vec<f64>, _> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>())
        .collect();
    let values = values.map_err(|_| {
        CliError::Config(format!(
            "vector file {} has a non-numeric entry",
            path.display()
        ))
    })?;
    if values.len() != dim {
        return Err(CliError::Config(format!(
            "vector file {} holds {} values, expected {dim}",
            path.display(),
            values.len()
        )));
    }
    Ok(values)
}

/// The four over-dispersed initializations used when a config names none.
pub fn default_dispersed_inits() -> Vec<InitSpec> {
    vec![
        InitSpec { mean: 0.0, sd: 5.0 },
        InitSpec { mean: 1.0, sd: 5.0 },
        InitSpec {
            mean: -1.0,
            sd: 5.0,
        },
        InitSpec {
            mean: 0.0,
            sd: 10.0,
        },
    ]
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    pub walkers: usize,
    pub iterations: u64,
    pub thin: usize,
    pub a: f64,
    pub scheduler: Scheduler,
    pub seed: u64,
    pub scale: f64,
    pub out: PathBuf,
    pub inits: Vec<InitSpec>,
    /// Untyped view for command-specific keys.
    pub raw: RawConfig,
}

impl ExperimentConfig {
    /// Resolve a raw config with the plain AR(1)-problem defaults.
    pub fn resolve(raw: RawConfig, walkers_per_dim: usize) -> Result<Self> {
        Self::resolve_with_target(raw, walkers_per_dim, "ar1")
    }

    /// Resolve a raw config; `walkers_per_dim` supplies the default walker
    /// multiple (2 for the Gaussian problems, 10 for the Rosenbrock suite)
    /// and `default_target` the target used when the config names none.
    pub fn resolve_with_target(
        raw: RawConfig,
        walkers_per_dim: usize,
        default_target: &str,
    ) -> Result<Self> {
        let dim = raw.usize_or("dim", 10)?;
        if dim == 0 {
            return Err(CliError::Config("dim must be at least 1".into()));
        }
        let target_name = raw.get("target").unwrap_or(default_target).to_string();
        let target = parse_target(&target_name, &raw, dim)?;

        let walkers = raw.usize_or("walkers", walkers_per_dim * dim)?;
        let iterations = raw.u64_or("iterations", 20_000)?;
        let thin = raw.usize_or("thin", 10)?;
        if thin == 0 {
            return Err(CliError::Config("thin must be a positive integer".into()));
        }
        if iterations < 2 * thin as u64 {
            return Err(CliError::Config(format!(
                "iterations ({iterations}) must be at least twice the thinning factor ({thin})"
            )));
        }
        let a = raw.f64_or("a", 2.0)?;
        if !(a > 1.0) {
            return Err(CliError::Config(format!(
                "stretch scale a must exceed 1, got {a}"
            )));
        }
        let scheduler = match raw.get("scheduler").unwrap_or("split") {
            "serial" => Scheduler::SerialSweep,
            "split" => Scheduler::SplitHalf,
            "continuous" => Scheduler::ContinuousTime,
            other => {
                return Err(CliError::Config(format!(
                    "unknown scheduler '{other}' (use serial, split or continuous)"
                )))
            }
        };
        let seed = raw.u64_or("seed", 42)?;
        let scale = raw.f64_or("scale", 1.0)?;
        if !(scale > 0.0) {
            return Err(CliError::Config(format!(
                "scale must be positive, got {scale}"
            )));
        }
        let out = PathBuf::from(raw.get("out").unwrap_or("out"));

        let mut inits = Vec::new();
        for (idx, section) in raw.run_sections().iter().enumerate() {
            let mean = section
                .get("mean")
                .map(|v| v.parse::<f64>())
                .transpose()
                .map_err(|_| CliError::Config(format!("[run] {idx}: bad mean")))?
                .unwrap_or(0.0);
            let sd = section
                .get("sd")
                .map(|v| v.parse::<f64>())
                .transpose()
                .map_err(|_| CliError::Config(format!("[run] {idx}: bad sd")))?
                .unwrap_or(1.0);
            if !(sd > 0.0) {
                return Err(CliError::Config(format!(
                    "[run] {idx}: sd must be positive"
                )));
            }
            inits.push(InitSpec { mean, sd });
        }
        if inits.is_empty() {
            inits = default_dispersed_inits();
        }

        Ok(Self {
            target,
            walkers,
            iterations,
            thin,
            a,
            scheduler,
            seed,
            scale,
            out,
            inits,
            raw,
        })
    }

    /// Iteration count after applying the scale factor.
    pub fn effective_iterations(&self) -> u64 {
        ((self.iterations as f64 * self.scale).round() as u64).max(2 * self.thin as u64)
    }

    /// Walker count after applying the scale factor, kept even for the
    /// split-half scheduler.
    pub fn effective_walkers(&self) -> usize {
        let mut l = ((self.walkers as f64 * self.scale).round() as usize).max(2);
        if self.scheduler == Scheduler::SplitHalf && l % 2 == 1 {
            l += 1;
        }
        l
    }
}

fn parse_target(name: &str, raw: &RawConfig, dim: usize) -> Result<TargetSpec> {
    if let Some(rest) = name.strip_prefix("affine(") {
        let inner_name = rest
            .strip_suffix(')')
            .ok_or_else(|| CliError::Config(format!("malformed target '{name}'")))?;
        let inner = parse_target(inner_name.trim(), raw, dim)?;
        let matrix_file = raw
            .get("matrix_file")
            .ok_or_else(|| CliError::Config("affine target needs matrix_file".into()))?;
        let offset_file = raw.get("offset_file").map(PathBuf::from);
        return Ok(TargetSpec::Affine {
            inner: Box::new(inner),
            matrix_file: PathBuf::from(matrix_file),
            offset_file,
        });
    }
    match name {
        "std_gaussian" => Ok(TargetSpec::StdGaussian { dim }),
        "ar1" => {
            let alpha = raw.f64_or("alpha", 0.9)?;
            Ok(TargetSpec::Ar1 { alpha, dim })
        }
        "rosenbrock" => Ok(TargetSpec::Rosenbrock { dim }),
        other => Err(CliError::Config(format!(
            "unknown target '{other}' (use std_gaussian, ar1, rosenbrock or affine(<inner>))"
        ))),
    }
}
