//! Translation-invariant kernels and exact dense block evaluation.
//!
//! The Gaussian kernel is the reference implementation; anything that can
//! express itself as a function of the squared distance plus a lengthscale
//! can plug into the same machinery through [`TranslationInvariantKernel`].

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floating-point type used for block arithmetic. Index math and tree
/// geometry always stay in `f64`; this trait only widens or narrows the
/// dense arithmetic inside blocks.
pub trait Real:
    num_traits::Float + num_traits::NumCast + Send + Sync + std::fmt::Debug + 'static
{
    fn from_f64(v: f64) -> Self;
    fn into_f64(self) -> f64;
}

impl Real for f64 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn into_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn into_f64(self) -> f64 {
        self as f64
    }
}

/// A kernel expressible as `k(x, y) = g(‖x − y‖²)` together with a
/// lengthscale-equivalent scale parameter used by the smoothness criterion.
pub trait TranslationInvariantKernel: Send + Sync {
    /// Evaluate the kernel as a function of the squared Euclidean distance.
    fn eval_sq_dist(&self, sq_dist: f64) -> f64;

    /// Scale parameter playing the role of the Gaussian lengthscale.
    fn scale(&self) -> f64;
}

/// Supported kernel families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Gaussian,
}

/// A validated kernel specification: the family plus its lengthscale γ.
///
/// For the Gaussian kind, `k(x, y) = exp(−‖x − y‖² / (2γ²))`, so `k(x, x) = 1`
/// and every value lies in `(0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    kind: KernelKind,
    gamma: f64,
}

impl KernelSpec {
    /// Gaussian kernel with lengthscale `gamma`.
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "lengthscale must be positive and finite, got {gamma}"
            )));
        }
        Ok(KernelSpec {
            kind: KernelKind::Gaussian,
            gamma,
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Unchecked pointwise evaluation; callers must have validated inputs.
    #[inline(always)]
    pub fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut sq = 0.0;
        for (a, b) in x.iter().zip(y.iter()) {
            let d = a - b;
            sq += d * d;
        }
        self.eval_sq_dist(sq)
    }
}

impl TranslationInvariantKernel for KernelSpec {
    #[inline(always)]
    fn eval_sq_dist(&self, sq_dist: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => (-sq_dist / (2.0 * self.gamma * self.gamma)).exp(),
        }
    }

    fn scale(&self) -> f64 {
        self.gamma
    }
}

/// Pointwise kernel evaluation with full input validation.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidInput(format!(
            "point dimensions must match and be at least 1, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "non-finite coordinate in kernel evaluation".into(),
        ));
    }
    Ok(spec.eval_unchecked(x, y))
}

/// Generic dense block product `out[i] += Σ_j k(x_i, y_j)·b_j` in precision `T`.
///
/// Each output row is summed in a single local accumulator before the store.
pub(crate) fn near_field_accumulate<T: Real>(
    spec: &KernelSpec,
    x_block: &[T],
    y_block: &[T],
    b_block: &[T],
    dim: usize,
    out: &mut [T],
) {
    let inv_two_gamma_sq = T::from_f64(1.0 / (2.0 * spec.gamma * spec.gamma));
    let n_x = out.len();
    let n_y = b_block.len();
    debug_assert_eq!(x_block.len(), n_x * dim);
    debug_assert_eq!(y_block.len(), n_y * dim);
    for i in 0..n_x {
        let xi = &x_block[i * dim..(i + 1) * dim];
        let mut acc = T::zero();
        for j in 0..n_y {
            let yj = &y_block[j * dim..(j + 1) * dim];
            let mut sq = T::zero();
            for d in 0..dim {
                let diff = xi[d] - yj[d];
                sq = sq + diff * diff;
            }
            acc = acc + (-sq * inv_two_gamma_sq).exp() * b_block[j];
        }
        out[i] = out[i] + acc;
    }
}

/// Exact dense partial product for one box pair:
/// `v_i = Σ_j k(x_i, y_j)·b_j` over the given blocks.
pub fn near_field_apply(
    spec: &KernelSpec,
    x_block: ArrayView2<'_, f64>,
    y_block: ArrayView2<'_, f64>,
    b_block: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    if x_block.ncols() != y_block.ncols() {
        return Err(Error::InvalidInput(format!(
            "block dimension mismatch: {} vs {}",
            x_block.ncols(),
            y_block.ncols()
        )));
    }
    if y_block.nrows() != b_block.len() {
        return Err(Error::InvalidInput(format!(
            "weight vector length {} does not match y block rows {}",
            b_block.len(),
            y_block.nrows()
        )));
    }
    if x_block.nrows() == 0 || y_block.nrows() == 0 {
        return Err(Error::InvalidInput("empty block".into()));
    }
    let dim = x_block.ncols();
    let xs = as_contiguous(x_block);
    let ys = as_contiguous(y_block);
    let bs = b_block.to_vec();
    let mut out = vec![0.0; x_block.nrows()];
    near_field_accumulate(spec, &xs, &ys, &bs, dim, &mut out);
    Ok(Array1::from_vec(out))
}

pub(crate) fn as_contiguous(view: ArrayView2<'_, f64>) -> Vec<f64> {
    match view.as_slice() {
        Some(s) => s.to_vec(),
        None => view.iter().copied().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{arr1, arr2, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_at_zero_distance_is_one() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        for d in 1..=7 {
            let x = vec![0.37; d];
            assert_eq!(kernel_eval(&k, &x, &x).unwrap(), 1.0);
        }
    }

    #[test]
    fn gaussian_unit_distance_matches_closed_form() {
        // γ = 1/√2 makes the exponent exactly −‖x−y‖².
        let k = KernelSpec::gaussian(1.0 / 2f64.sqrt()).unwrap();
        let v = kernel_eval(&k, &[0.0], &[1.0]).unwrap();
        assert_relative_eq!(v, (-1.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn gaussian_pythagorean_distance() {
        let k = KernelSpec::gaussian(3.0).unwrap();
        let v = kernel_eval(&k, &[0.0, 0.0, 0.0], &[1.0, 2.0, 2.0]).unwrap();
        assert_relative_eq!(v, (-0.5f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn invalid_spec_and_inputs_rejected() {
        assert!(matches!(
            KernelSpec::gaussian(0.0),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            KernelSpec::gaussian(-1.0),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            KernelSpec::gaussian(f64::NAN),
            Err(Error::InvalidSpec(_))
        ));
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert!(matches!(
            kernel_eval(&k, &[f64::NAN], &[0.0]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            kernel_eval(&k, &[0.0, 1.0], &[0.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn symmetry_under_random_sampling() {
        let k = KernelSpec::gaussian(0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let a = kernel_eval(&k, &x, &y).unwrap();
            let b = kernel_eval(&k, &y, &x).unwrap();
            assert_eq!(a, b);
            assert!(a > 0.0 && a <= 1.0);
        }
    }

    #[test]
    fn near_field_zero_weights_give_zero() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let x = arr2(&[[0.0, 0.0], [1.0, 1.0]]);
        let y = arr2(&[[0.5, 0.5], [2.0, 2.0], [3.0, 3.0]]);
        let b = arr1(&[0.0, 0.0, 0.0]);
        let v = near_field_apply(&k, x.view(), y.view(), b.view()).unwrap();
        assert_eq!(v.to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn near_field_single_coincident_point() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let x = arr2(&[[0.3]]);
        let v = near_field_apply(&k, x.view(), x.view(), arr1(&[5.0]).view()).unwrap();
        assert_eq!(v[0], 5.0);
    }

    /// Independent oracle: elementwise double loop with compensated (Kahan)
    /// summation, written without reusing the block kernel.
    fn brute_force_compensated(
        spec: &KernelSpec,
        x: &Array2<f64>,
        y: &Array2<f64>,
        b: &[f64],
    ) -> Vec<f64> {
        let g2 = 2.0 * spec.gamma() * spec.gamma();
        (0..x.nrows())
            .map(|i| {
                let mut sum = 0.0;
                let mut c = 0.0;
                for j in 0..y.nrows() {
                    let mut sq = 0.0;
                    for d in 0..x.ncols() {
                        let diff = x[[i, d]] - y[[j, d]];
                        sq += diff * diff;
                    }
                    let term = (-sq / g2).exp() * b[j];
                    let t = sum + term;
                    c += if sum.abs() >= term.abs() {
                        (sum - t) + term
                    } else {
                        (term - t) + sum
                    };
                    sum = t;
                }
                sum + c
            })
            .collect()
    }

    #[test]
    fn near_field_matches_compensated_double_loop() {
        let k = KernelSpec::gaussian(0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = Array2::from_shape_fn((8, 3), |_| rng.random::<f64>());
        let y = Array2::from_shape_fn((8, 3), |_| rng.random::<f64>());
        let b: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let v = near_field_apply(&k, x.view(), y.view(), arr1(&b).view()).unwrap();
        let expect = brute_force_compensated(&k, &x, &y, &b);
        for (a, e) in v.iter().zip(expect.iter()) {
            assert_relative_eq!(a, e, max_relative = 1e-14);
        }
    }

    #[test]
    fn near_field_linearity() {
        let k = KernelSpec::gaussian(1.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Array2::from_shape_fn((20, 2), |_| rng.random::<f64>());
        let y = Array2::from_shape_fn((30, 2), |_| rng.random::<f64>());
        let b1 = Array1::from_shape_fn(30, |_| rng.random::<f64>() - 0.5);
        let b2 = Array1::from_shape_fn(30, |_| rng.random::<f64>() - 0.5);
        let a = 2.75;
        let combined = near_field_apply(&k, x.view(), y.view(), (a * &b1 + &b2).view()).unwrap();
        let v1 = near_field_apply(&k, x.view(), y.view(), b1.view()).unwrap();
        let v2 = near_field_apply(&k, x.view(), y.view(), b2.view()).unwrap();
        let expect = a * &v1 + &v2;
        for (c, e) in combined.iter().zip(expect.iter()) {
            assert_relative_eq!(c, e, max_relative = 1e-12);
        }
    }

    #[test]
    fn induced_matrix_is_symmetric() {
        let k = KernelSpec::gaussian(0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((25, 3), |_| rng.random::<f64>());
        let u = Array1::from_shape_fn(25, |_| rng.random::<f64>() - 0.5);
        let w = Array1::from_shape_fn(25, |_| rng.random::<f64>() - 0.5);
        let ku = near_field_apply(&k, x.view(), x.view(), u.view()).unwrap();
        let kw = near_field_apply(&k, x.view(), x.view(), w.view()).unwrap();
        let lhs: f64 = w.iter().zip(ku.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(kw.iter()).map(|(a, b)| a * b).sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn f32_block_path_tracks_f64() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let xs: Vec<f32> = vec![0.1, 0.2, 0.9, 0.4];
        let ys: Vec<f32> = vec![0.0, 0.5, 0.3, 0.3];
        let bs: Vec<f32> = vec![1.0, -2.0];
        let mut out32 = vec![0.0f32; 2];
        near_field_accumulate(&k, &xs, &ys, &bs, 2, &mut out32);
        let xs64: Vec<f64> = xs.iter().map(|&v| v as f64).collect();
        let ys64: Vec<f64> = ys.iter().map(|&v| v as f64).collect();
        let bs64: Vec<f64> = bs.iter().map(|&v| v as f64).collect();
        let mut out64 = vec![0.0f64; 2];
        near_field_accumulate(&k, &xs64, &ys64, &bs64, 2, &mut out64);
        for (a, b) in out32.iter().zip(out64.iter()) {
            assert_relative_eq!(*a as f64, b, max_relative = 1e-5);
        }
    }
}
