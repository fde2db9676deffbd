//! Input loading and lengthscale resolution shared by the run commands.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::args::{GammaMode, Resolved};
use f3m_core::data::{
    generate, solve_gamma_for_ev, DatasetKind, DatasetSpec, DEFAULT_CLUSTERS_PER_LEVEL,
    DEFAULT_CLUSTER_DECAY,
};
use f3m_core::error::{Error, Result};
use f3m_core::io::read_matrix;
use f3m_core::KernelSpec;

pub struct RunInputs {
    pub x: Array2<f64>,
    /// Present only for asymmetric products.
    pub y: Option<Array2<f64>>,
    pub b: Array1<f64>,
    pub gamma: f64,
}

impl RunInputs {
    pub fn y_view(&self) -> ArrayView2<'_, f64> {
        self.y.as_ref().map(|m| m.view()).unwrap_or(self.x.view())
    }
}

pub fn load_inputs(resolved: &Resolved) -> Result<RunInputs> {
    let x_path = resolved
        .x
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("--x dataset file is required".into()))?;
    let (x, _) = read_matrix(Path::new(x_path))?;
    let y = match resolved.y.as_deref() {
        Some(p) => {
            let (m, _) = read_matrix(Path::new(p))?;
            if m.ncols() != x.ncols() {
                return Err(Error::InvalidInput(format!(
                    "dimension mismatch between x ({}) and y ({})",
                    x.ncols(),
                    m.ncols()
                )));
            }
            Some(m)
        }
        None => None,
    };
    let n_y = y.as_ref().map(|m| m.nrows()).unwrap_or(x.nrows());
    let b = match resolved.b.as_deref() {
        Some(p) => {
            let v = f3m_core::io::read_vector(Path::new(p))?;
            if v.len() != n_y {
                return Err(Error::InvalidInput(format!(
                    "weight file has {} entries, y has {} rows",
                    v.len(),
                    n_y
                )));
            }
            Array1::from_vec(v)
        }
        None => seeded_normal_weights(n_y, resolved.seed),
    };
    let gamma = resolve_gamma(&resolved.gamma, x.view(), resolved.seed)?;
    Ok(RunInputs { x, y, b, gamma })
}

/// Standard normal weights drawn from a stream derived from the run seed.
pub fn seeded_normal_weights(n: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0xB0B5_EED));
    Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal))
}

pub fn resolve_gamma(mode: &GammaMode, x: ArrayView2<'_, f64>, seed: u64) -> Result<f64> {
    match mode {
        GammaMode::Fixed(v) => Ok(*v),
        GammaMode::EffectiveVariance(target) => solve_gamma_for_ev(x, *target),
        GammaMode::Median => median_heuristic(x, seed),
    }
}

/// Median pairwise distance over a seeded subsample of at most 1000 rows.
pub fn median_heuristic(x: ArrayView2<'_, f64>, seed: u64) -> Result<f64> {
    let n = x.nrows();
    let take = n.min(1000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x3ED1A))
        ;
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    indices.truncate(take);
    let mut dists = Vec::with_capacity(take * (take - 1) / 2);
    for i in 0..take {
        for j in (i + 1)..take {
            let mut sq = 0.0;
            for d in 0..x.ncols() {
                let diff = x[[indices[i], d]] - x[[indices[j], d]];
                sq += diff * diff;
            }
            if sq > 0.0 {
                dists.push(sq.sqrt());
            }
        }
    }
    if dists.is_empty() {
        return Err(Error::InvalidInput(
            "median heuristic needs at least two distinct points".into(),
        ));
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(dists[dists.len() / 2])
}

pub fn kernel_for(gamma: f64) -> Result<KernelSpec> {
    KernelSpec::gaussian(gamma)
}

/// Parse a dataset kind name as used by gen, bench and krr.
pub fn parse_kind(raw: &str, hurst: Option<f64>, clusters: Option<usize>, decay: Option<f64>) -> Result<DatasetKind> {
    match raw {
        "uniform" => Ok(DatasetKind::Uniform),
        "normal" => Ok(DatasetKind::Normal),
        "uniform-vs-normal" => Ok(DatasetKind::UniformVsNormal),
        "clustered" => Ok(DatasetKind::Clustered {
            clusters_per_level: clusters.unwrap_or(DEFAULT_CLUSTERS_PER_LEVEL),
            decay: decay.unwrap_or(DEFAULT_CLUSTER_DECAY),
        }),
        "bm" => Ok(DatasetKind::BrownianMotion),
        "fbm" => Ok(DatasetKind::FractionalBrownianMotion {
            hurst: hurst.ok_or_else(|| Error::InvalidInput("fbm requires --hurst".into()))?,
        }),
        other => Err(Error::InvalidInput(format!(
            "unknown dataset kind {other:?}"
        ))),
    }
}

pub fn synth(kind: DatasetKind, n: usize, d: usize, seed: u64) -> Result<Array2<f64>> {
    generate(&DatasetSpec {
        kind,
        n,
        d,
        seed,
        target_ev: None,
    })
}
