//! Deterministic synthetic dataset generators and effective-variance
//! targeting for the lengthscale.

use ndarray::{Array2, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod fbm;

/// Dataset families. Clustered data is built by recursive center refinement;
/// Brownian motion is the Hurst-0.5 special case of fractional Brownian
/// motion and shares its sampler bit for bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DatasetKind {
    Uniform,
    Normal,
    /// Paired generation for the asymmetric product: the primary matrix is
    /// uniform, the partner matrix standard normal.
    UniformVsNormal,
    Clustered {
        clusters_per_level: usize,
        decay: f64,
    },
    BrownianMotion,
    FractionalBrownianMotion {
        hurst: f64,
    },
}

/// Default clustered-data refinement parameters.
pub const DEFAULT_CLUSTERS_PER_LEVEL: usize = 10;
pub const DEFAULT_CLUSTER_DECAY: f64 = 0.3;

/// A complete, reproducible description of one synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub kind: DatasetKind,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Optional effective-variance target recorded for summaries; the data
    /// itself is unscaled and `solve_gamma_for_ev` adjusts the lengthscale.
    pub target_ev: Option<f64>,
}

impl DatasetSpec {
    fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidInput("dataset needs at least one row".into()));
        }
        if self.d < 1 || self.d > 7 {
            return Err(Error::InvalidInput(format!(
                "dimension must be in 1..=7, got {}",
                self.d
            )));
        }
        match self.kind {
            DatasetKind::FractionalBrownianMotion { hurst } => {
                if !(hurst > 0.0 && hurst < 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "Hurst index must lie in (0, 1), got {hurst}"
                    )));
                }
            }
            DatasetKind::Clustered {
                clusters_per_level,
                decay,
            } => {
                if clusters_per_level < 2 {
                    return Err(Error::InvalidInput(
                        "clustered data needs at least 2 clusters per level".into(),
                    ));
                }
                if !(decay > 0.0 && decay < 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "cluster decay must lie in (0, 1), got {decay}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Generate the dataset matrix. Output is a pure function of the spec.
pub fn generate(spec: &DatasetSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, d) = (spec.n, spec.d);
    let data = match spec.kind {
        DatasetKind::Uniform | DatasetKind::UniformVsNormal => {
            (0..n * d).map(|_| rng.random::<f64>()).collect()
        }
        DatasetKind::Normal => (0..n * d).map(|_| rng.sample(StandardNormal)).collect(),
        DatasetKind::Clustered {
            clusters_per_level,
            decay,
        } => clustered(n, d, clusters_per_level, decay, &mut rng),
        DatasetKind::BrownianMotion => fbm_matrix(n, d, 0.5, &mut rng)?,
        DatasetKind::FractionalBrownianMotion { hurst } => fbm_matrix(n, d, hurst, &mut rng)?,
    };
    Ok(Array2::from_shape_vec((n, d), data).expect("generator length"))
}

/// Generate the dataset together with its partner matrix when the kind is
/// paired (`UniformVsNormal`); the partner draws from an independent stream
/// derived from the seed.
pub fn generate_pair(spec: &DatasetSpec) -> Result<(Array2<f64>, Option<Array2<f64>>)> {
    let x = generate(spec)?;
    match spec.kind {
        DatasetKind::UniformVsNormal => {
            let partner = DatasetSpec {
                kind: DatasetKind::Normal,
                seed: spec.seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
                ..spec.clone()
            };
            Ok((x, Some(generate(&partner)?)))
        }
        _ => Ok((x, None)),
    }
}

/// Recursive center refinement: top-level centers are standard normal, each
/// subsequent level resamples around its parent with the standard deviation
/// shrunk by `decay`. The deepest level's samples are the points, emitted in
/// depth-first order.
fn clustered(
    n: usize,
    d: usize,
    clusters_per_level: usize,
    decay: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut depth = 1usize;
    let mut capacity = clusters_per_level;
    while capacity < n {
        depth += 1;
        capacity = capacity.saturating_mul(clusters_per_level);
    }
    let mut out = Vec::with_capacity(n * d);
    let origin = vec![0.0; d];
    emit_cluster_level(&origin, 0, depth, n, d, clusters_per_level, decay, rng, &mut out);
    out.truncate(n * d);
    out
}

#[allow(clippy::too_many_arguments)]
fn emit_cluster_level(
    center: &[f64],
    level: usize,
    depth: usize,
    n: usize,
    d: usize,
    clusters_per_level: usize,
    decay: f64,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<f64>,
) {
    if out.len() >= n * d {
        return;
    }
    if level == depth {
        out.extend_from_slice(center);
        return;
    }
    let sigma = decay.powi(level as i32);
    let mut child = vec![0.0; d];
    for _ in 0..clusters_per_level {
        for (c, &base) in child.iter_mut().zip(center.iter()) {
            let g: f64 = rng.sample(StandardNormal);
            *c = base + sigma * g;
        }
        emit_cluster_level(
            &child,
            level + 1,
            depth,
            n,
            d,
            clusters_per_level,
            decay,
            rng,
            out,
        );
        if out.len() >= n * d {
            return;
        }
    }
}

/// `d` independent fractional Brownian paths sampled at `n` equispaced times
/// with spacing `1/n`, stored as columns. Row 0 is the origin.
fn fbm_matrix(n: usize, d: usize, hurst: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let dt = 1.0 / n as f64;
    let scale = dt.powf(hurst);
    let mut cols = Vec::with_capacity(d);
    for _ in 0..d {
        let path = if n > 1 {
            fbm::fractional_gaussian_noise(n - 1, hurst, rng)?
        } else {
            Vec::new()
        };
        let mut acc = 0.0;
        let mut col = Vec::with_capacity(n);
        col.push(0.0);
        for g in path {
            acc += scale * g;
            col.push(acc);
        }
        cols.push(col);
    }
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        for col in &cols {
            data.push(col[i]);
        }
    }
    Ok(data)
}

/// Per-column variance with the `1/n` convention, so the interval bound
/// `(max − min)²/4` holds deterministically for any sample.
pub fn column_variances(x: ArrayView2<'_, f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|d| {
            let col = x.column(d);
            let mean = col.sum() / n;
            col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
        })
        .collect()
}

/// Dataset-level effective variance: total per-dimension variance over `2γ²`.
pub fn compute_effective_variance(x: ArrayView2<'_, f64>, gamma: f64) -> f64 {
    let total: f64 = column_variances(x).iter().sum();
    total / (2.0 * gamma * gamma)
}

/// Lengthscale that hits a target effective variance on this data:
/// `γ = sqrt(Σ_d Var_d / (2·target))`.
pub fn solve_gamma_for_ev(x: ArrayView2<'_, f64>, target_ev: f64) -> Result<f64> {
    if !(target_ev > 0.0) {
        return Err(Error::InvalidInput(
            "effective-variance target must be positive".into(),
        ));
    }
    let total: f64 = column_variances(x).iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput(
            "data has zero variance; the lengthscale is unconstrained".into(),
        ));
    }
    Ok((total / (2.0 * target_ev)).sqrt())
}
