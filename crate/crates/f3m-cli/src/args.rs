//! Command-line surface and flag/config-file resolution.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use f3m_core::engine::{F3mConfig, GridKind, Precision};
use f3m_core::error::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "f3m",
    version,
    about = "Hierarchical kernel matvec benchmarks, dataset tooling and ridge regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset file.
    Gen(GenArgs),
    /// Convert a numeric CSV into the binary dataset format.
    Ingest(IngestArgs),
    /// Run one approximate matvec and report timing and relative error.
    Matvec(RunArgs),
    /// Time matvec runs across a size sweep and fit the scaling slope.
    Bench(BenchArgs),
    /// Solve kernel ridge regression with conjugate gradient.
    Krr(KrrArgs),
    /// Run a matvec and verify the per-depth interaction accounting.
    Account(RunArgs),
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    /// uniform | normal | uniform-vs-normal | clustered | bm | fbm
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Hurst index for fbm (bm is fixed at 0.5).
    #[arg(long)]
    pub hurst: Option<f64>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub decay: Option<f64>,
    /// Report the effective variance at this lengthscale.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Report the lengthscale needed to hit this effective variance.
    #[arg(long = "gamma-ev")]
    pub gamma_ev: Option<f64>,
    /// f64 | f32 storage.
    #[arg(long, default_value = "f64")]
    pub precision: String,
}

#[derive(Args, Debug, Clone)]
pub struct IngestArgs {
    /// Input CSV path.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated column indices, or "all".
    #[arg(long, default_value = "all")]
    pub cols: String,
    /// Abort once more than this many malformed rows are seen.
    #[arg(long, default_value_t = 10)]
    pub max_malformed: usize,
    #[arg(long, default_value = "f64")]
    pub precision: String,
}

/// Flags shared by matvec, bench, krr and account. Every flag has a
/// `key=value` config-file equivalent; explicit flags win.
#[derive(Args, Debug, Clone, Default)]
pub struct EngineFlags {
    /// X dataset file.
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Y dataset file (defaults to X).
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Weight vector file; defaults to seeded standard normal weights.
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Output report path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Total interpolation-node budget per box grid.
    #[arg(long)]
    pub r: Option<usize>,
    /// Effective-variance limit for the smooth field.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Small-field occupancy threshold.
    #[arg(long)]
    pub rho: Option<usize>,
    /// Stop dividing once every box holds at most this many points.
    #[arg(long)]
    pub zeta: Option<usize>,
    /// Lengthscale: a number, or "median" for the median heuristic.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Choose the lengthscale so the data's effective variance hits this.
    #[arg(long = "gamma-ev")]
    pub gamma_ev: Option<f64>,
    /// full | sparse
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (F3M_THREADS when unset).
    #[arg(long)]
    pub threads: Option<usize>,
    /// f64 | f32
    #[arg(long)]
    pub precision: Option<String>,
    /// Disable all approximation; every interaction is computed exactly.
    #[arg(long)]
    pub exact: bool,
    /// Reproducible reports: wall-clock fields are omitted.
    #[arg(long)]
    pub deterministic: bool,
    /// Oracle subset size for the relative-error metric.
    #[arg(long = "subset-m")]
    pub subset_m: Option<usize>,
    /// Flat key=value config file; flags override file entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub flags: EngineFlags,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    #[command(flatten)]
    pub flags: EngineFlags,
    /// Synthetic dataset kind for the sweep.
    #[arg(long, default_value = "uniform")]
    pub kind: String,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Comma-separated sweep sizes, e.g. 10000,100000,1000000.
    #[arg(long = "n-list")]
    pub n_list: String,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
}

#[derive(Args, Debug, Clone)]
pub struct KrrArgs {
    #[command(flatten)]
    pub flags: EngineFlags,
    /// Generate synthetic training data instead of reading --x.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Ridge parameter; defaults to 1e-3 times the training rows.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 100)]
    pub max_iter: usize,
    /// Anchor rows for the planted-signal protocol.
    #[arg(long, default_value_t = 1000)]
    pub anchors: usize,
    /// Label noise variance for the planted-signal protocol.
    #[arg(long = "noise-var", default_value_t = 0.1)]
    pub noise_var: f64,
    /// Held-out fraction of rows.
    #[arg(long = "test-frac", default_value_t = 0.1)]
    pub test_frac: f64,
}

/// How the lengthscale is chosen.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum GammaMode {
    Fixed(f64),
    EffectiveVariance(f64),
    Median,
}

/// Fully resolved run settings, recorded verbatim in the report manifest.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub x: Option<String>,
    pub y: Option<String>,
    pub b: Option<String>,
    pub out: Option<String>,
    pub node_budget: usize,
    pub eta: f64,
    pub rho: Option<usize>,
    pub zeta: Option<usize>,
    pub gamma: GammaMode,
    pub grid: GridKind,
    pub seed: u64,
    pub threads: Option<usize>,
    pub precision: Precision,
    pub exact: bool,
    pub deterministic: bool,
    pub subset_m: usize,
}

impl Resolved {
    pub fn engine_config(&self) -> F3mConfig {
        F3mConfig {
            node_budget: self.node_budget,
            eta: self.eta,
            rho: self.rho,
            zeta: if self.exact { Some(usize::MAX) } else { self.zeta },
            grid: self.grid,
            threads: self.threads,
            deterministic: self.deterministic,
            precision: self.precision,
            exact: self.exact,
            ..F3mConfig::default()
        }
    }
}

fn parse_kv_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("config file {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (ix, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidInput(format!(
                "config file {} line {}: expected key=value",
                path.display(),
                ix + 1
            ))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_from<T: std::str::FromStr>(map: &HashMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::InvalidInput(format!("config key {key}: cannot parse {raw:?}"))),
    }
}

impl EngineFlags {
    /// Merge config-file defaults under the explicit flags and resolve every
    /// setting.
    pub fn resolve(&self) -> Result<Resolved> {
        let file = match &self.config {
            Some(p) => parse_kv_file(p)?,
            None => HashMap::new(),
        };
        let x = self
            .x
            .clone()
            .or_else(|| file.get("x").map(PathBuf::from));
        let y = self
            .y
            .clone()
            .or_else(|| file.get("y").map(PathBuf::from));
        let b = self
            .b
            .clone()
            .or_else(|| file.get("b").map(PathBuf::from));
        let out = self
            .out
            .clone()
            .or_else(|| file.get("out").map(PathBuf::from));
        let node_budget = match self.r {
            Some(v) => v,
            None => parse_from::<usize>(&file, "r")?.unwrap_or(64),
        };
        let eta = match self.eta {
            Some(v) => v,
            None => parse_from::<f64>(&file, "eta")?.unwrap_or(0.5),
        };
        let rho = match self.rho {
            Some(v) => Some(v),
            None => parse_from::<usize>(&file, "rho")?,
        };
        let zeta = match self.zeta {
            Some(v) => Some(v),
            None => parse_from::<usize>(&file, "zeta")?,
        };
        let gamma_flag = self
            .gamma
            .clone()
            .or_else(|| file.get("gamma").cloned());
        let gamma_ev = match self.gamma_ev {
            Some(v) => Some(v),
            None => parse_from::<f64>(&file, "gamma-ev")?,
        };
        let gamma = match (gamma_flag, gamma_ev) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidInput(
                    "--gamma and --gamma-ev are mutually exclusive".into(),
                ))
            }
            (Some(raw), None) => {
                if raw == "median" {
                    GammaMode::Median
                } else {
                    let v: f64 = raw.parse().map_err(|_| {
                        Error::InvalidInput(format!("gamma must be a number or \"median\", got {raw:?}"))
                    })?;
                    if !(v > 0.0) {
                        return Err(Error::InvalidInput("gamma must be positive".into()));
                    }
                    GammaMode::Fixed(v)
                }
            }
            (None, Some(ev)) => {
                if !(ev > 0.0) {
                    return Err(Error::InvalidInput(
                        "effective-variance target must be positive".into(),
                    ));
                }
                GammaMode::EffectiveVariance(ev)
            }
            (None, None) => GammaMode::EffectiveVariance(1.0),
        };
        let grid = {
            let raw = self
                .grid
                .clone()
                .or_else(|| file.get("grid").cloned())
                .unwrap_or_else(|| "full".into());
            match raw.as_str() {
                "full" => GridKind::Full,
                "sparse" => GridKind::Sparse,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "grid must be full or sparse, got {other:?}"
                    )))
                }
            }
        };
        let seed = match self.seed {
            Some(v) => v,
            None => parse_from::<u64>(&file, "seed")?.unwrap_or(0),
        };
        let threads = match self.threads {
            Some(v) => Some(v),
            None => match parse_from::<usize>(&file, "threads")? {
                Some(v) => Some(v),
                None => std::env::var("F3M_THREADS")
                    .ok()
                    .map(|raw| {
                        raw.parse::<usize>().map_err(|_| {
                            Error::InvalidInput(format!("F3M_THREADS: cannot parse {raw:?}"))
                        })
                    })
                    .transpose()?,
            },
        };
        let precision = {
            let raw = self
                .precision
                .clone()
                .or_else(|| file.get("precision").cloned())
                .unwrap_or_else(|| "f64".into());
            parse_precision(&raw)?
        };
        let exact = self.exact || parse_from::<bool>(&file, "exact")?.unwrap_or(false);
        let deterministic =
            self.deterministic || parse_from::<bool>(&file, "deterministic")?.unwrap_or(false);
        let subset_m = match self.subset_m {
            Some(v) => v,
            None => parse_from::<usize>(&file, "subset-m")?.unwrap_or(5000),
        };
        if subset_m == 0 {
            return Err(Error::InvalidInput("subset size must be positive".into()));
        }
        Ok(Resolved {
            x: x.map(|p| p.display().to_string()),
            y: y.map(|p| p.display().to_string()),
            b: b.map(|p| p.display().to_string()),
            out: out.map(|p| p.display().to_string()),
            node_budget,
            eta,
            rho,
            zeta,
            gamma,
            grid,
            seed,
            threads,
            precision,
            exact,
            deterministic,
            subset_m,
        })
    }
}

pub fn parse_precision(raw: &str) -> Result<Precision> {
    match raw {
        "f64" => Ok(Precision::F64),
        "f32" => Ok(Precision::F32),
        other => Err(Error::InvalidInput(format!(
            "precision must be f64 or f32, got {other:?}"
        ))),
    }
}
