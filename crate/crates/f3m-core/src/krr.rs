//! Conjugate-gradient kernel ridge regression with the hierarchical matvec
//! as the operator.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::engine::{f3m_matvec, F3mConfig};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::oracle::dense_matvec;

/// Ridge-regression solve configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KrrConfig {
    /// Ridge parameter λ added to the kernel operator's diagonal.
    pub lambda: f64,
    /// Relative-residual convergence tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub engine: F3mConfig,
    pub kernel: KernelSpec,
}

impl KrrConfig {
    /// Defaults for a problem of `n` training rows: λ scales with n so the
    /// regularization stays commensurate with the unnormalized kernel sums.
    pub fn defaults(kernel: KernelSpec, n: usize) -> Self {
        KrrConfig {
            lambda: 1e-3 * n as f64,
            tol: 1e-5,
            max_iter: 100,
            engine: F3mConfig::default(),
            kernel,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidInput("ridge parameter must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Result of a conjugate-gradient solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CgSolution {
    pub alpha: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `‖b − A·α‖/‖b‖`.
    pub residual: f64,
    pub converged: bool,
    /// Relative residual after each iteration.
    pub residual_history: Vec<f64>,
}

/// Conjugate gradient on `(op + λI)·α = b` for an arbitrary operator.
pub fn cg_solve_with<F>(
    op: F,
    b: ArrayView1<'_, f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution>
where
    F: Fn(ArrayView1<'_, f64>) -> Result<Array1<f64>>,
{
    let n = b.len();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(CgSolution {
            alpha: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            converged: true,
            residual_history: Vec::new(),
        });
    }
    let apply = |v: ArrayView1<'_, f64>| -> Result<Array1<f64>> {
        let mut out = op(v)?;
        out.iter_mut().zip(v.iter()).for_each(|(o, &x)| *o += lambda * x);
        Ok(out)
    };

    let mut alpha = Array1::<f64>::zeros(n);
    let mut r = b.to_owned();
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..max_iter {
        let ap = apply(p.view())?;
        let denom = p.dot(&ap);
        if !denom.is_finite() || denom == 0.0 {
            return Err(Error::SolverBreakdown(format!(
                "curvature term degenerate at iteration {iterations}: {denom}"
            )));
        }
        let step = rs / denom;
        alpha.scaled_add(step, &p);
        r.scaled_add(-step, &ap);
        let rs_new = r.dot(&r);
        if !rs_new.is_finite() {
            return Err(Error::SolverBreakdown(format!(
                "residual diverged at iteration {iterations}"
            )));
        }
        iterations += 1;
        let rel = rs_new.sqrt() / b_norm;
        history.push(rel);
        if rel <= tol {
            converged = true;
            break;
        }
        p = &r + &(p * (rs_new / rs));
        rs = rs_new;
    }
    let residual = history.last().copied().unwrap_or(1.0);
    Ok(CgSolution {
        alpha: alpha.to_vec(),
        iterations,
        residual,
        converged,
        residual_history: history,
    })
}

/// Solve `(K̂(X,X) + λI)·α = b` with the hierarchical operator.
pub fn cg_solve(x: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>, cfg: &KrrConfig) -> Result<CgSolution> {
    cfg.validate()?;
    let op = |v: ArrayView1<'_, f64>| -> Result<Array1<f64>> {
        let (out, _) = f3m_matvec(x, x, v, &cfg.kernel, &cfg.engine)?;
        Ok(out)
    };
    cg_solve_with(op, b, cfg.lambda, cfg.tol, cfg.max_iter)
}

/// Predict at new points: `k(X_test, X_train)·α` through the same operator.
pub fn predict(
    x_train: ArrayView2<'_, f64>,
    alpha: &[f64],
    x_test: ArrayView2<'_, f64>,
    kernel: &KernelSpec,
    engine: &F3mConfig,
) -> Result<Array1<f64>> {
    if alpha.len() != x_train.nrows() {
        return Err(Error::InvalidInput(format!(
            "coefficient length {} does not match training rows {}",
            alpha.len(),
            x_train.nrows()
        )));
    }
    let alpha = ArrayView1::from(alpha);
    let (out, _) = f3m_matvec(x_test, x_train, alpha, kernel, engine)?;
    Ok(out)
}

/// A planted-signal regression problem: labels are a kernel expansion over a
/// small random subset plus Gaussian noise, split into train and test rows.
pub struct PlantedProblem {
    pub x_train: Array2<f64>,
    pub y_train: Array1<f64>,
    pub x_test: Array2<f64>,
    pub y_test: Array1<f64>,
}

/// Build the planted-signal problem: pick `subset` anchor rows, draw standard
/// normal expansion weights, set `b = k(X, anchors)·w + ε` with
/// `ε ~ N(0, noise_var)`, then split rows 90/10 by a seeded shuffle.
pub fn planted_signal(
    x: ArrayView2<'_, f64>,
    kernel: &KernelSpec,
    seed: u64,
    subset: usize,
    noise_var: f64,
    test_fraction: f64,
) -> Result<PlantedProblem> {
    let n = x.nrows();
    if subset == 0 || subset > n {
        return Err(Error::InvalidInput(format!(
            "anchor subset {subset} must be in 1..={n}"
        )));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidInput(
            "test fraction must lie in [0, 1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let anchors_ix = &indices[..subset];
    let dim = x.ncols();
    let mut anchors = Array2::zeros((subset, dim));
    for (i, &ix) in anchors_ix.iter().enumerate() {
        anchors.row_mut(i).assign(&x.row(ix));
    }
    let weights = Array1::from_shape_fn(subset, |_| rng.sample::<f64, _>(StandardNormal));
    let mut labels = dense_matvec(kernel, x, anchors.view(), weights.view())?;
    let noise_sd = noise_var.sqrt();
    for v in labels.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *v += noise_sd * g;
    }
    // Fresh shuffle for the split so anchors are not preferentially assigned.
    let mut split: Vec<usize> = (0..n).collect();
    split.shuffle(&mut rng);
    let n_test = ((n as f64) * test_fraction).round() as usize;
    let (test_ix, train_ix) = split.split_at(n_test);
    let gather = |ix: &[usize]| -> (Array2<f64>, Array1<f64>) {
        let mut pts = Array2::zeros((ix.len(), dim));
        let mut ys = Array1::zeros(ix.len());
        for (i, &r) in ix.iter().enumerate() {
            pts.row_mut(i).assign(&x.row(r));
            ys[i] = labels[r];
        }
        (pts, ys)
    };
    let (x_test, y_test) = gather(test_ix);
    let (x_train, y_train) = gather(train_ix);
    Ok(PlantedProblem {
        x_train,
        y_train,
        x_test,
        y_test,
    })
}

/// Coefficient of determination of predictions against targets.
pub fn r_squared(y_true: ArrayView1<'_, f64>, y_pred: ArrayView1<'_, f64>) -> Result<f64> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(Error::InvalidInput("mismatched metric inputs".into()));
    }
    let mean = y_true.sum() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric("targets are constant".into()));
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred.iter())
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Area under the ROC curve for ±1 labels scored by real values.
pub fn auc(labels: ArrayView1<'_, f64>, scores: ArrayView1<'_, f64>) -> Result<f64> {
    if labels.len() != scores.len() || labels.is_empty() {
        return Err(Error::InvalidInput("mismatched metric inputs".into()));
    }
    let mut pairs: Vec<(f64, bool)> = labels
        .iter()
        .zip(scores.iter())
        .map(|(&l, &s)| (s, l > 0.0))
        .collect();
    let pos = pairs.iter().filter(|(_, p)| *p).count();
    let neg = pairs.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs both positive and negative labels".into(),
        ));
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Rank-sum with average ranks for score ties.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for pair in &pairs[i..j] {
            if pair.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let auc = (rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0) / (pos as f64 * neg as f64);
    Ok(auc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, DatasetKind, DatasetSpec};
    use approx::assert_relative_eq;
    use ndarray::arr1;
    use ndarray::Array2;

    fn exact_engine(n: usize) -> F3mConfig {
        F3mConfig {
            exact: true,
            zeta: Some(n),
            ..F3mConfig::default()
        }
    }

    #[test]
    fn scalar_solve() {
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let x = Array2::from_shape_vec((1, 1), vec![0.0]).unwrap();
        let cfg = KrrConfig {
            lambda: 1.0,
            tol: 1e-12,
            max_iter: 10,
            engine: exact_engine(1),
            kernel,
        };
        let sol = cg_solve(x.view(), arr1(&[2.0]).view(), &cfg).unwrap();
        assert_relative_eq!(sol.alpha[0], 1.0, epsilon = 1e-10);
        assert!(sol.converged);
    }

    #[test]
    fn huge_ridge_shrinks_to_b_over_lambda() {
        let kernel = KernelSpec::gaussian(0.5).unwrap();
        let x = generate(&DatasetSpec {
            kind: DatasetKind::Uniform,
            n: 50,
            d: 2,
            seed: 1,
            target_ev: None,
        })
        .unwrap();
        let b = Array1::from_shape_fn(50, |i| (i as f64).sin() + 2.0);
        let lambda = 1e9;
        let cfg = KrrConfig {
            lambda,
            tol: 1e-10,
            max_iter: 50,
            engine: exact_engine(50),
            kernel,
        };
        let sol = cg_solve(x.view(), b.view(), &cfg).unwrap();
        let expect = &b / lambda;
        let num: f64 = sol
            .alpha
            .iter()
            .zip(expect.iter())
            .map(|(a, e)| (a - e) * (a - e))
            .sum::<f64>()
            .sqrt();
        let den: f64 = expect.iter().map(|e| e * e).sum::<f64>().sqrt();
        assert!(num / den <= 1e-6, "relative deviation {}", num / den);
    }

    /// Plain LU solve with partial pivoting, used only as a direct reference.
    fn lu_solve(mut a: Array2<f64>, mut b: Array1<f64>) -> Array1<f64> {
        let n = b.len();
        for col in 0..n {
            let mut pivot = col;
            for row in col + 1..n {
                if a[[row, col]].abs() > a[[pivot, col]].abs() {
                    pivot = row;
                }
            }
            if pivot != col {
                for k in 0..n {
                    let tmp = a[[col, k]];
                    a[[col, k]] = a[[pivot, k]];
                    a[[pivot, k]] = tmp;
                }
                b.swap(col, pivot);
            }
            for row in col + 1..n {
                let f = a[[row, col]] / a[[col, col]];
                for k in col..n {
                    a[[row, k]] -= f * a[[col, k]];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = Array1::zeros(n);
        for row in (0..n).rev() {
            let mut acc = b[row];
            for k in row + 1..n {
                acc -= a[[row, k]] * x[k];
            }
            x[row] = acc / a[[row, row]];
        }
        x
    }

    #[test]
    fn exact_mode_cg_matches_direct_dense_solve() {
        let n = 400;
        let kernel = KernelSpec::gaussian(0.4).unwrap();
        let x = generate(&DatasetSpec {
            kind: DatasetKind::Uniform,
            n,
            d: 2,
            seed: 3,
            target_ev: None,
        })
        .unwrap();
        let b = Array1::from_shape_fn(n, |i| ((i * 37 % 100) as f64) / 50.0 - 1.0);
        let lambda = 0.5;
        let cfg = KrrConfig {
            lambda,
            tol: 1e-12,
            max_iter: 400,
            engine: exact_engine(n),
            kernel,
        };
        let sol = cg_solve(x.view(), b.view(), &cfg).unwrap();

        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let xi: Vec<f64> = x.row(i).to_vec();
                let xj: Vec<f64> = x.row(j).to_vec();
                a[[i, j]] = kernel.eval_unchecked(&xi, &xj);
            }
            a[[i, i]] += lambda;
        }
        let direct = lu_solve(a, b.clone());
        let num: f64 = sol
            .alpha
            .iter()
            .zip(direct.iter())
            .map(|(s, d)| (s - d) * (s - d))
            .sum::<f64>()
            .sqrt();
        let den: f64 = direct.iter().map(|d| d * d).sum::<f64>().sqrt();
        assert!(num / den <= 1e-6, "relative deviation {}", num / den);
    }

    #[test]
    fn residual_history_non_increasing() {
        let n = 300;
        let kernel = KernelSpec::gaussian(0.3).unwrap();
        let x = generate(&DatasetSpec {
            kind: DatasetKind::Normal,
            n,
            d: 3,
            seed: 5,
            target_ev: None,
        })
        .unwrap();
        let b = Array1::from_shape_fn(n, |i| ((i % 17) as f64) - 8.0);
        let cfg = KrrConfig {
            lambda: 1.0,
            tol: 1e-10,
            max_iter: 200,
            engine: exact_engine(n),
            kernel,
        };
        let sol = cg_solve(x.view(), b.view(), &cfg).unwrap();
        for w in sol.residual_history.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-9),
                "residual rose from {} to {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn non_convergence_is_flagged_not_fatal() {
        let kernel = KernelSpec::gaussian(0.4).unwrap();
        let x = generate(&DatasetSpec {
            kind: DatasetKind::Uniform,
            n: 200,
            d: 2,
            seed: 7,
            target_ev: None,
        })
        .unwrap();
        let b = Array1::from_shape_fn(200, |i| (i as f64 * 0.37).cos());
        let cfg = KrrConfig {
            lambda: 1e-6,
            tol: 1e-14,
            max_iter: 2,
            engine: exact_engine(200),
            kernel,
        };
        let sol = cg_solve(x.view(), b.view(), &cfg).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 2);
    }

    #[test]
    fn zero_coefficients_predict_zero() {
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let x = generate(&DatasetSpec {
            kind: DatasetKind::Uniform,
            n: 64,
            d: 2,
            seed: 9,
            target_ev: None,
        })
        .unwrap();
        let alpha = vec![0.0; 64];
        let preds = predict(
            x.view(),
            &alpha,
            x.view(),
            &kernel,
            &exact_engine(64),
        )
        .unwrap();
        assert!(preds.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn near_interpolation_regime_reproduces_labels() {
        let n = 150;
        let kernel = KernelSpec::gaussian(0.08).unwrap();
        let x = generate(&DatasetSpec {
            kind: DatasetKind::Uniform,
            n,
            d: 1,
            seed: 11,
            target_ev: None,
        })
        .unwrap();
        let b = Array1::from_shape_fn(n, |i| (x[[i, 0]] * 7.0).sin());
        let cfg = KrrConfig {
            lambda: 1e-10,
            tol: 1e-14,
            max_iter: 20000,
            engine: exact_engine(n),
            kernel,
        };
        let sol = cg_solve(x.view(), b.view(), &cfg).unwrap();
        let preds = predict(x.view(), &sol.alpha, x.view(), &kernel, &exact_engine(n)).unwrap();
        let num: f64 = preds
            .iter()
            .zip(b.iter())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            .sqrt();
        let den: f64 = b.iter().map(|t| t * t).sum::<f64>().sqrt();
        assert!(num / den <= 1e-6, "relative deviation {}", num / den);
    }

    #[test]
    fn metrics_behave() {
        let y = arr1(&[1.0, 2.0, 3.0, 4.0]);
        assert_relative_eq!(r_squared(y.view(), y.view()).unwrap(), 1.0);
        let mean = arr1(&[2.5, 2.5, 2.5, 2.5]);
        assert_relative_eq!(r_squared(y.view(), mean.view()).unwrap(), 0.0);

        let labels = arr1(&[1.0, 1.0, -1.0, -1.0]);
        let perfect = arr1(&[0.9, 0.8, 0.1, 0.2]);
        assert_relative_eq!(auc(labels.view(), perfect.view()).unwrap(), 1.0);
        let inverted = arr1(&[0.1, 0.2, 0.9, 0.8]);
        assert_relative_eq!(auc(labels.view(), inverted.view()).unwrap(), 0.0);
        let ties = arr1(&[0.5, 0.5, 0.5, 0.5]);
        assert_relative_eq!(auc(labels.view(), ties.view()).unwrap(), 0.5);
    }
}
