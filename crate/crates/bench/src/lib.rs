//! Shared fixtures for the benchmarks.

use ctriv_core::harness::{Benchmark, BenchmarkSpec, Realization};
use ctriv_core::AdditiveModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Open-loop three-mass record of `n` samples with the default noise.
pub fn open_loop_record(n: usize, seed: u64) -> (Benchmark, Realization) {
    let bench = Benchmark::new(BenchmarkSpec::default()).expect("default benchmark is valid");
    let real = bench
        .simulate(n, &mut ChaCha8Rng::seed_from_u64(seed))
        .expect("simulation succeeds");
    (bench, real)
}

/// `model` with every parameter scaled by a factor in `[1 - delta, 1 + delta]`.
pub fn perturbed(model: &AdditiveModel, delta: f64, seed: u64) -> AdditiveModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = model
        .flatten()
        .map(|b| b * (1.0 + rng.random_range(-delta..=delta)));
    model.structure().unflatten(&beta).expect("same structure")
}
