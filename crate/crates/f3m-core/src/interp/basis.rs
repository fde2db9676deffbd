//! One-dimensional Chebyshev interpolation bases in barycentric form.

use crate::error::{Error, Result};
use crate::kernel::Real;

/// Chebyshev nodes of the second kind, `s_i = cos(iπ/r)` for `i = 0..=r`.
///
/// Evaluated through the equivalent `sin(π(r − 2i)/(2r))` form, which keeps
/// the node set exactly symmetric about zero and puts the middle node of an
/// even-degree basis at exactly `0.0`. Nodes are strictly decreasing from
/// `1` to `−1`.
pub fn chebyshev_nodes(r: usize) -> Result<Vec<f64>> {
    if r < 1 {
        return Err(Error::InvalidDegree(
            "interpolation degree must be at least 1".into(),
        ));
    }
    Ok((0..=r)
        .map(|i| {
            let k = r as f64 - 2.0 * i as f64;
            (std::f64::consts::PI * k / (2.0 * r as f64)).sin()
        })
        .collect())
}

/// Barycentric weights for Chebyshev nodes of the second kind:
/// `w_i = (−1)^i δ_i` with `δ` halving both endpoints.
pub fn barycentric_weights(r: usize) -> Result<Vec<f64>> {
    if r < 1 {
        return Err(Error::InvalidDegree(
            "interpolation degree must be at least 1".into(),
        ));
    }
    Ok((0..=r)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let delta = if i == 0 || i == r { 0.5 } else { 1.0 };
            sign * delta
        })
        .collect())
}

/// A 1-D interpolation basis: nodes plus barycentric weights for degree `r`.
#[derive(Clone, Debug)]
pub struct ChebyshevBasis1D {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ChebyshevBasis1D {
    pub fn new(degree: usize) -> Result<Self> {
        Ok(ChebyshevBasis1D {
            degree,
            nodes: chebyshev_nodes(degree)?,
            weights: barycentric_weights(degree)?,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Evaluate all cardinal functions `L_i(t)` into `out`.
    ///
    /// When `t` coincides bit-for-bit with a node `s_j`, the result is the
    /// unit vector `e_j`; otherwise the barycentric formula
    /// `L_i(t) = (w_i/(t−s_i)) / Σ_j (w_j/(t−s_j))` applies.
    pub fn eval_into<T: Real>(&self, t: T, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.nodes.len());
        let mut denom = T::zero();
        for (i, (&s, &w)) in self.nodes.iter().zip(self.weights.iter()).enumerate() {
            let diff = t - T::from_f64(s);
            if diff == T::zero() {
                for v in out.iter_mut() {
                    *v = T::zero();
                }
                out[i] = T::one();
                return;
            }
            let v = T::from_f64(w) / diff;
            out[i] = v;
            denom = denom + v;
        }
        for v in out.iter_mut() {
            *v = *v / denom;
        }
    }
}

/// Evaluate the cardinal functions of `basis` at `t`.
pub fn eval_basis(t: f64, basis: &ChebyshevBasis1D) -> Vec<f64> {
    let mut out = vec![0.0; basis.nodes.len()];
    basis.eval_into(t, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nodes_small_degrees_exact() {
        assert_eq!(chebyshev_nodes(1).unwrap(), vec![1.0, -1.0]);
        assert_eq!(chebyshev_nodes(2).unwrap(), vec![1.0, 0.0, -1.0]);
        let n4 = chebyshev_nodes(4).unwrap();
        let half_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(n4[0], 1.0);
        assert_relative_eq!(n4[1], half_sqrt2, max_relative = 1e-15);
        assert_eq!(n4[2], 0.0);
        assert_relative_eq!(n4[3], -half_sqrt2, max_relative = 1e-15);
        assert_eq!(n4[4], -1.0);
    }

    #[test]
    fn nodes_strictly_decreasing() {
        for r in 1..=32 {
            let n = chebyshev_nodes(r).unwrap();
            assert_eq!(n[0], 1.0);
            assert_eq!(n[r], -1.0);
            for w in n.windows(2) {
                assert!(w[0] > w[1]);
            }
        }
    }

    #[test]
    fn degree_zero_rejected() {
        assert!(matches!(chebyshev_nodes(0), Err(Error::InvalidDegree(_))));
        assert!(matches!(
            barycentric_weights(0),
            Err(Error::InvalidDegree(_))
        ));
    }

    #[test]
    fn weights_small_degrees() {
        assert_eq!(barycentric_weights(1).unwrap(), vec![0.5, -0.5]);
        assert_eq!(barycentric_weights(2).unwrap(), vec![0.5, -1.0, 0.5]);
        assert_eq!(
            barycentric_weights(4).unwrap(),
            vec![0.5, -1.0, 1.0, -1.0, 0.5]
        );
    }

    #[test]
    fn node_hit_returns_unit_vector() {
        let basis = ChebyshevBasis1D::new(6).unwrap();
        for (j, &s) in basis.nodes().iter().enumerate() {
            let l = eval_basis(s, &basis);
            for (i, &v) in l.iter().enumerate() {
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let basis = ChebyshevBasis1D::new(9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let t = rng.random::<f64>() * 2.0 - 1.0;
            let sum: f64 = eval_basis(t, &basis).iter().sum();
            assert_relative_eq!(sum, 1.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn cubic_reproduction() {
        let basis = ChebyshevBasis1D::new(8).unwrap();
        let f = |t: f64| t * t * t;
        let samples: Vec<f64> = basis.nodes().iter().map(|&s| f(s)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let t = rng.random::<f64>() * 2.0 - 1.0;
            let l = eval_basis(t, &basis);
            let approx: f64 = l.iter().zip(samples.iter()).map(|(a, b)| a * b).sum();
            assert!((approx - f(t)).abs() <= 1e-13);
        }
    }

    /// Direct product-form Lagrange cardinal functions, used only as a
    /// reference implementation.
    fn naive_lagrange(t: f64, nodes: &[f64]) -> Vec<f64> {
        (0..nodes.len())
            .map(|i| {
                let mut v = 1.0;
                for j in 0..nodes.len() {
                    if j != i {
                        v *= (t - nodes[j]) / (nodes[i] - nodes[j]);
                    }
                }
                v
            })
            .collect()
    }

    #[test]
    fn barycentric_matches_naive_product_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for r in 1..=16 {
            let basis = ChebyshevBasis1D::new(r).unwrap();
            for _ in 0..(1000 / r).max(20) {
                let t = rng.random::<f64>() * 2.0 - 1.0;
                let bary = eval_basis(t, &basis);
                let naive = naive_lagrange(t, basis.nodes());
                for (a, b) in bary.iter().zip(naive.iter()) {
                    assert!((a - b).abs() <= 1e-10, "r={r} t={t} {a} vs {b}");
                }
            }
        }
    }
}
