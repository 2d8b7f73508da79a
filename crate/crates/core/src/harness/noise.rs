use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

fn arma_is_stable(den: &[f64]) -> bool {
    let n = den.len() - 1;
    if n == 0 {
        return true;
    }
    // Companion matrix of z^n + d_1 z^{n-1} + ... + d_n (monic after scaling).
    let mut c = DMatrix::zeros(n, n);
    for j in 0..n {
        c[(0, j)] = -den[j + 1] / den[0];
    }
    for i in 1..n {
        c[(i, i - 1)] = 1.0;
    }
    linalg::spectral_radius(&c) < 1.0
}

/// `N x n_y` noise, each channel an independent unit-variance Gaussian
/// sequence filtered by `num(q^-1) / den(q^-1)` from rest.
pub fn gen_noise(
    n: usize,
    n_y: usize,
    arma_num: &[f64],
    arma_den: &[f64],
    seed: u64,
) -> Result<DMatrix<f64>> {
    if arma_num.is_empty() || arma_den.is_empty() || arma_den[0] == 0.0 {
        return Err(Error::InvalidArgument(
            "ARMA polynomials need a nonzero leading coefficient".into(),
        ));
    }
    if !arma_is_stable(arma_den) {
        return Err(Error::UnstableNoiseFilter);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = DMatrix::from_fn(n, n_y, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut v = DMatrix::zeros(n, n_y);
    for ch in 0..n_y {
        for k in 0..n {
            let mut acc = 0.0;
            for (j, b) in arma_num.iter().enumerate().take(k + 1) {
                acc += b * e[(k - j, ch)];
            }
            for (j, a) in arma_den.iter().enumerate().skip(1).take(k) {
                acc -= a * v[(k - j, ch)];
            }
            v[(k, ch)] = acc / arma_den[0];
        }
    }
    Ok(v)
}

fn mean_channel_variance(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows() as f64;
    let total: f64 = x
        .column_iter()
        .map(|c| {
            let mean = c.mean();
            c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
        })
        .sum();
    total / x.ncols() as f64
}

/// `10 log10(mean_j var(x_j) / mean_j var(v_j))`.
pub fn measured_snr_db(x: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    10.0 * (mean_channel_variance(x) / mean_channel_variance(v)).log10()
}

/// Scales `v_unit` by one scalar `c` so the channel-averaged SNR equals
/// `target_db`. Returns `(c v_unit, c)`.
pub fn calibrate_snr(
    x: &DMatrix<f64>,
    v_unit: &DMatrix<f64>,
    target_db: f64,
) -> Result<(DMatrix<f64>, f64)> {
    if x.shape() != v_unit.shape() {
        return Err(Error::DimMismatch("signal and noise shapes differ".into()));
    }
    let px = mean_channel_variance(x);
    if !(px > 0.0) {
        return Err(Error::ZeroSignal);
    }
    let pv = mean_channel_variance(v_unit);
    if !(pv > 0.0) {
        return Err(Error::InvalidArgument("noise has zero power".into()));
    }
    let c = (px / (pv * 10f64.powf(target_db / 10.0))).sqrt();
    Ok((v_unit * c, c))
}
