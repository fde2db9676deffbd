//! Exact dense oracle, the subset-based relative error metric, and the
//! log–log scaling slope used by the benchmark harness.

use std::time::Instant;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

/// Default cap on `n_x·n_y` kernel evaluations for one oracle call.
pub const DEFAULT_ORACLE_CAP: u128 = 20_000_000_000;

/// Relative-error measurement of an approximate product against the exact
/// oracle on a row subset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `‖v̂′ − v‖² / ‖v‖²` over the subset rows.
    pub relative_error: f64,
    /// Number of leading rows compared.
    pub subset_m: usize,
    /// Wall time of the exact subset product.
    pub exact_seconds: f64,
    /// Wall time of the approximate path, when the caller supplies it.
    pub approx_seconds: Option<f64>,
}

/// Exact dense product `v = k(X, Y)·b`, streamed row by row in f64 without
/// materializing the kernel matrix.
pub fn dense_matvec(
    kernel: &KernelSpec,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    dense_matvec_capped(kernel, x, y, b, DEFAULT_ORACLE_CAP)
}

/// Dense product with an explicit evaluation cap.
pub fn dense_matvec_capped(
    kernel: &KernelSpec,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
    cap: u128,
) -> Result<Array1<f64>> {
    if x.ncols() != y.ncols() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            x.ncols(),
            y.ncols()
        )));
    }
    if b.len() != y.nrows() {
        return Err(Error::InvalidInput(format!(
            "weight length {} does not match y rows {}",
            b.len(),
            y.nrows()
        )));
    }
    let work = x.nrows() as u128 * y.nrows() as u128;
    if work > cap {
        return Err(Error::OracleTooLarge(format!(
            "{} kernel evaluations exceed the oracle cap {cap}",
            work
        )));
    }
    let dim = x.ncols();
    let xs = crate::kernel::as_contiguous(x);
    let ys = crate::kernel::as_contiguous(y);
    let bs = b.to_vec();
    let inv_two_gamma_sq = 1.0 / (2.0 * kernel.gamma() * kernel.gamma());
    let out: Vec<f64> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let xi = &xs[i * dim..(i + 1) * dim];
            let mut acc = 0.0;
            for (yj, bj) in ys.chunks_exact(dim).zip(bs.iter()) {
                let mut sq = 0.0;
                for d in 0..dim {
                    let diff = xi[d] - yj[d];
                    sq += diff * diff;
                }
                acc += (-sq * inv_two_gamma_sq).exp() * bj;
            }
            acc
        })
        .collect();
    Ok(Array1::from_vec(out))
}

/// Relative error of `v_hat` against the exact product on the first `m` rows
/// of `x` (in input order), computed in double precision.
pub fn subset_error(
    kernel: &KernelSpec,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
    v_hat: ArrayView1<'_, f64>,
    m: usize,
) -> Result<ErrorReport> {
    if m > x.nrows() || m == 0 {
        return Err(Error::InvalidInput(format!(
            "subset size {m} must be in 1..={}",
            x.nrows()
        )));
    }
    if v_hat.len() != x.nrows() {
        return Err(Error::InvalidInput(format!(
            "approximate vector length {} does not match x rows {}",
            v_hat.len(),
            x.nrows()
        )));
    }
    let t0 = Instant::now();
    let subset = x.slice(ndarray::s![..m, ..]);
    let exact = dense_matvec(kernel, subset, y, b)?;
    let exact_seconds = t0.elapsed().as_secs_f64();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..m {
        let diff = v_hat[i] - exact[i];
        num += diff * diff;
        den += exact[i] * exact[i];
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric(
            "exact subset product has zero norm".into(),
        ));
    }
    Ok(ErrorReport {
        relative_error: num / den,
        subset_m: m,
        exact_seconds,
        approx_seconds: None,
    })
}

/// Ordinary least-squares slope of `log10(seconds)` against `log10(n)`.
pub fn scaling_slope(times: &[(f64, f64)]) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::InvalidInput(
            "slope needs at least 3 measurements".into(),
        ));
    }
    let mut xs = Vec::with_capacity(times.len());
    let mut ys = Vec::with_capacity(times.len());
    for &(n, secs) in times {
        if !(n > 0.0) || !(secs > 0.0) {
            return Err(Error::InvalidInput(
                "slope needs positive sizes and times".into(),
            ));
        }
        xs.push(n.log10());
        ys.push(secs.log10());
    }
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput(
            "slope needs at least two distinct sizes".into(),
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - xm) * (y - ym))
        .sum();
    Ok(sxy / sxx)
}
