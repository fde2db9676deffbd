//! `matvec`: one engine run with an error report, and `account`: the same run
//! with the verified per-depth counters.

use std::time::Instant;

use serde::Serialize;

use crate::args::RunArgs;
use crate::commands::common::{kernel_for, load_inputs};
use crate::report::{emit, RunManifest};
use f3m_core::engine::{account, f3m_matvec, DepthStats};
use f3m_core::error::Result;
use f3m_core::oracle::subset_error;

#[derive(Serialize)]
struct MatvecReport {
    manifest: RunManifest,
    n_x: usize,
    n_y: usize,
    d: usize,
    gamma: f64,
    grid_nodes: usize,
    final_depth: u32,
    relative_error: f64,
    subset_m: usize,
    account_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_time_s: Option<f64>,
    per_depth: Vec<DepthStats>,
}

pub fn run(args: &RunArgs) -> Result<()> {
    let resolved = args.flags.resolve()?;
    let manifest = RunManifest::new("matvec", &resolved);
    let inputs = load_inputs(&resolved)?;
    let kernel = kernel_for(inputs.gamma)?;
    let cfg = resolved.engine_config();

    let t0 = Instant::now();
    let (v, stats) = f3m_matvec(
        inputs.x.view(),
        inputs.y_view(),
        inputs.b.view(),
        &kernel,
        &cfg,
    )?;
    let time_s = t0.elapsed().as_secs_f64();

    let m = resolved.subset_m.min(inputs.x.nrows());
    let err = subset_error(
        &kernel,
        inputs.x.view(),
        inputs.y_view(),
        inputs.b.view(),
        v.view(),
        m,
    )?;
    let account_ok = account(&stats).is_ok();

    let report = MatvecReport {
        n_x: inputs.x.nrows(),
        n_y: inputs.y_view().nrows(),
        d: inputs.x.ncols(),
        gamma: inputs.gamma,
        grid_nodes: stats.grid_nodes,
        final_depth: stats.final_depth,
        relative_error: err.relative_error,
        subset_m: m,
        account_ok,
        time_s: manifest.clock(time_s),
        oracle_time_s: manifest.clock(err.exact_seconds),
        per_depth: stats.depths.clone(),
        manifest,
    };
    emit(&report, resolved.out.as_deref())
}

#[derive(Serialize)]
struct AccountReportOut {
    manifest: RunManifest,
    n_x: usize,
    n_y: usize,
    d: usize,
    final_depth: u32,
    rows: Vec<f3m_core::engine::AccountRow>,
}

pub fn run_account(args: &RunArgs) -> Result<()> {
    let resolved = args.flags.resolve()?;
    let manifest = RunManifest::new("account", &resolved);
    let inputs = load_inputs(&resolved)?;
    let kernel = kernel_for(inputs.gamma)?;
    let cfg = resolved.engine_config();
    let (_, stats) = f3m_matvec(
        inputs.x.view(),
        inputs.y_view(),
        inputs.b.view(),
        &kernel,
        &cfg,
    )?;
    // Propagates an internal-consistency failure (exit code 4) on violation.
    let verified = account(&stats)?;
    let report = AccountReportOut {
        manifest,
        n_x: inputs.x.nrows(),
        n_y: inputs.y_view().nrows(),
        d: inputs.x.ncols(),
        final_depth: stats.final_depth,
        rows: verified.rows,
    };
    emit(&report, resolved.out.as_deref())
}
