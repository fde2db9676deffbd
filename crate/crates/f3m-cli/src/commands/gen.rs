//! `gen`: synthetic dataset files plus a summary of their statistics.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::args::{parse_precision, GenArgs};
use crate::commands::common::parse_kind;
use crate::report::emit;
use f3m_core::data::{
    compute_effective_variance, column_variances, generate_pair, solve_gamma_for_ev, DatasetSpec,
};
use f3m_core::error::Result;
use f3m_core::io::write_matrix;

#[derive(Serialize)]
struct DimSummary {
    min: f64,
    max: f64,
    variance: f64,
}

#[derive(Serialize)]
struct GenReport {
    kind: String,
    n: usize,
    d: usize,
    seed: u64,
    out: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    partner_out: Option<String>,
    per_dim: Vec<DimSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    effective_variance: Option<f64>,
}

fn summarize(x: &ndarray::Array2<f64>) -> Vec<DimSummary> {
    let vars = column_variances(x.view());
    (0..x.ncols())
        .map(|d| {
            let col = x.column(d);
            DimSummary {
                min: col.iter().copied().fold(f64::INFINITY, f64::min),
                max: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                variance: vars[d],
            }
        })
        .collect()
}

/// Partner file path for paired kinds: `data.f3m` becomes `data.y.f3m`.
fn partner_path(out: &Path) -> PathBuf {
    match out.extension() {
        Some(ext) => out.with_extension(format!("y.{}", ext.to_string_lossy())),
        None => out.with_extension("y"),
    }
}

pub fn run(args: &GenArgs) -> Result<()> {
    let kind = parse_kind(&args.kind, args.hurst, args.clusters, args.decay)?;
    let tag = match parse_precision(&args.precision)? {
        f3m_core::Precision::F64 => f3m_core::io::StorageTag::F64,
        f3m_core::Precision::F32 => f3m_core::io::StorageTag::F32,
    };
    let spec = DatasetSpec {
        kind,
        n: args.n,
        d: args.d,
        seed: args.seed,
        target_ev: args.gamma_ev,
    };
    let (x, partner) = generate_pair(&spec)?;
    write_matrix(&args.out, x.view(), tag)?;
    let partner_out = match partner {
        Some(y) => {
            let path = partner_path(&args.out);
            write_matrix(&path, y.view(), tag)?;
            Some(path.display().to_string())
        }
        None => None,
    };
    let gamma = match (args.gamma, args.gamma_ev) {
        (Some(g), _) => Some(g),
        (None, Some(target)) => Some(solve_gamma_for_ev(x.view(), target)?),
        (None, None) => None,
    };
    let report = GenReport {
        kind: args.kind.clone(),
        n: args.n,
        d: args.d,
        seed: args.seed,
        out: args.out.display().to_string(),
        partner_out,
        per_dim: summarize(&x),
        gamma,
        effective_variance: gamma.map(|g| compute_effective_variance(x.view(), g)),
    };
    emit(&report, None)
}
