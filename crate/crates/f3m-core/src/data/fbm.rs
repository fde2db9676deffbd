//! Fractional Gaussian noise samplers: exact Toeplitz recursion for short
//! sequences, circulant-embedding spectral synthesis for long ones.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Sequences up to this length use the exact covariance recursion.
pub const EXACT_COVARIANCE_MAX: usize = 1 << 14;

/// Autocovariance of unit-spacing fractional Gaussian noise at lag `k`.
fn autocovariance(k: usize, hurst: f64) -> f64 {
    let k = k as f64;
    let two_h = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

/// Draw `m` samples of unit-spacing fractional Gaussian noise with the given
/// Hurst index.
pub fn fractional_gaussian_noise(
    m: usize,
    hurst: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::InvalidInput(format!(
            "Hurst index must lie in (0, 1), got {hurst}"
        )));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    if m <= EXACT_COVARIANCE_MAX {
        Ok(hosking(m, hurst, rng))
    } else {
        circulant_embedding(m, hurst, rng)
    }
}

/// Durbin–Levinson recursion: the Toeplitz-structured Cholesky draw, exact
/// to the target covariance in O(m²).
fn hosking(m: usize, hurst: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let cov: Vec<f64> = (0..m).map(|k| autocovariance(k, hurst)).collect();
    let mut out = Vec::with_capacity(m);
    let g0: f64 = rng.sample(StandardNormal);
    out.push(g0);
    let mut phi = vec![0.0f64; m];
    let mut phi_prev = vec![0.0f64; m];
    let mut v = 1.0f64;
    for k in 1..m {
        let mut num = cov[k];
        for j in 1..k {
            num -= phi_prev[j] * cov[k - j];
        }
        let phi_kk = num / v;
        phi[k] = phi_kk;
        for j in 1..k {
            phi[j] = phi_prev[j] - phi_kk * phi_prev[k - j];
        }
        v *= 1.0 - phi_kk * phi_kk;
        let mut mean = 0.0;
        for j in 1..=k {
            mean += phi[j] * out[k - j];
        }
        let g: f64 = rng.sample(StandardNormal);
        out.push(mean + v.max(0.0).sqrt() * g);
        phi_prev[..=k].copy_from_slice(&phi[..=k]);
    }
    out
}

/// Davies–Harte synthesis: embed the covariance in a circulant of size 2m,
/// take its eigenvalues by FFT, color independent Gaussians in the spectral
/// domain and transform back. O(m log m).
fn circulant_embedding(m: usize, hurst: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let n = 2 * m;
    let mut row: Vec<Complex<f64>> = Vec::with_capacity(n);
    for k in 0..=m {
        row.push(Complex::new(autocovariance(k, hurst), 0.0));
    }
    for k in (1..m).rev() {
        row.push(Complex::new(autocovariance(k, hurst), 0.0));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    fft.process(&mut row);
    // Eigenvalues of the circulant; exact theory keeps them nonnegative for
    // fractional Gaussian noise, so only roundoff needs clamping.
    let lambda: Vec<f64> = row
        .iter()
        .map(|c| {
            if c.re < -1e-9 * m as f64 {
                f64::NAN
            } else {
                c.re.max(0.0)
            }
        })
        .collect();
    if lambda.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput(format!(
            "circulant embedding is not nonnegative definite for Hurst {hurst}"
        )));
    }
    let nf = n as f64;
    let mut spectral = vec![Complex::new(0.0, 0.0); n];
    let g: f64 = rng.sample(StandardNormal);
    spectral[0] = Complex::new((lambda[0] / nf).sqrt() * g, 0.0);
    for k in 1..m {
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        let amp = (lambda[k] / (2.0 * nf)).sqrt();
        spectral[k] = Complex::new(amp * g1, amp * g2);
        spectral[n - k] = spectral[k].conj();
    }
    let gm: f64 = rng.sample(StandardNormal);
    spectral[m] = Complex::new((lambda[m] / nf).sqrt() * gm, 0.0);
    let fft2 = planner.plan_fft_forward(n);
    fft2.process(&mut spectral);
    Ok(spectral[..m].iter().map(|c| c.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_at_hurst_half() {
        // Lags beyond zero vanish for H = 1/2.
        assert_eq!(autocovariance(0, 0.5), 1.0);
        for k in 1..10 {
            assert!(autocovariance(k, 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_and_spectral_paths_have_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let short = fractional_gaussian_noise(4096, 0.7, &mut rng).unwrap();
        let var: f64 = short.iter().map(|v| v * v).sum::<f64>() / short.len() as f64;
        assert!((var - 1.0).abs() < 0.15, "exact path variance {var}");

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let long = fractional_gaussian_noise(40_000, 0.7, &mut rng).unwrap();
        let var: f64 = long.iter().map(|v| v * v).sum::<f64>() / long.len() as f64;
        assert!((var - 1.0).abs() < 0.1, "spectral path variance {var}");
    }

    #[test]
    fn spectral_path_reproduces_lag_one_correlation() {
        let hurst = 0.75;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = fractional_gaussian_noise(60_000, hurst, &mut rng).unwrap();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        let var: f64 = g.iter().map(|v| (v - mean) * (v - mean)).sum();
        let cov: f64 = g.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let rho = cov / var;
        let expect = autocovariance(1, hurst);
        assert!((rho - expect).abs() < 0.05, "lag-1 {rho} vs {expect}");
    }
}
