#![allow(dead_code)]

use ctriv_core::{AdditiveModel, MatrixPoly, ScalarPoly, Subsystem};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn mode(xi: f64, w: f64, b0: &[f64], n_y: usize, n_u: usize) -> Subsystem {
    Subsystem::new(
        ScalarPoly::denominator(&[2.0 * xi / w, 1.0 / (w * w)]),
        MatrixPoly::constant(DMatrix::from_row_slice(n_y, n_u, b0)),
    )
    .unwrap()
}

/// Two lightly damped 2x2 modes with full-rank residues.
pub fn two_mode_mimo() -> AdditiveModel {
    AdditiveModel::new(vec![
        mode(0.2, 1.0, &[1.0, 0.3, -0.2, 0.8], 2, 2),
        mode(0.1, 3.0, &[0.5, -0.4, 0.6, 0.9], 2, 2),
    ])
    .unwrap()
}

/// SISO second-order plant with a zero.
pub fn siso() -> AdditiveModel {
    AdditiveModel::new(vec![Subsystem::new(
        ScalarPoly::denominator(&[0.4, 0.25]),
        MatrixPoly::new(vec![
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.3),
        ])
        .unwrap(),
    )
    .unwrap()])
    .unwrap()
}

pub fn white(n: usize, ch: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, ch, |_, _| rng.sample(StandardNormal))
}

/// Multiplies every parameter by `1 + U(-delta, delta)`.
pub fn perturb(model: &AdditiveModel, delta: f64, seed: u64) -> AdditiveModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = model
        .flatten()
        .map(|b| b * (1.0 + rng.random_range(-delta..delta)));
    model.structure().unflatten(&beta).unwrap()
}

pub fn rel_err(a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1e-300))
        .fold(0.0, f64::max)
}
