use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::noise::{calibrate_snr, gen_noise};
use crate::closed_loop::{control_sensitivity, simulate_closed_loop, DiscreteController};
use crate::error::{Error, Result};
use crate::lti::{
    freq_response, simulate_additive, siso_tf_to_ss, zoh_discretize, AdditiveModel, ScalarPoly,
    StateSpace,
};
use crate::riv::{LoopMode, SampledDataset};
use crate::structured::{modal_eval, ModalParams, Mode};

/// Output noise `v = num(q^-1) / den(q^-1) e`, scaled to `snr_db` against the
/// noise-free output. `snr_db = None` turns noise off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub arma_num: Vec<f64>,
    pub arma_den: Vec<f64>,
    pub snr_db: Option<f64>,
}

impl NoiseSpec {
    /// `(1 + 0.5 q^-1) / (1 - 0.85 q^-1)` at 30 dB.
    pub fn colored() -> Self {
        Self {
            arma_num: vec![1.0, 0.5],
            arma_den: vec![1.0, -0.85],
            snr_db: Some(30.0),
        }
    }
    pub fn white(snr_db: f64) -> Self {
        Self {
            arma_num: vec![1.0],
            arma_den: vec![1.0],
            snr_db: Some(snr_db),
        }
    }
    pub fn none() -> Self {
        Self {
            arma_num: vec![1.0],
            arma_den: vec![1.0],
            snr_db: None,
        }
    }
}

/// Decentralized lead filter `k_j (1 + s / w_z) / (1 + s / w_p)` per channel,
/// with `w_c = crossover_fraction * w_1`, `w_z = w_c / spread`,
/// `w_p = w_c spread` and `k_j = gain_fraction / |G_jj(i w_c)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadLagSpec {
    pub crossover_fraction: f64,
    pub gain_fraction: f64,
    pub spread: f64,
}

impl Default for LeadLagSpec {
    fn default() -> Self {
        Self {
            crossover_fraction: 0.3,
            gain_fraction: 1.0 / 3.0,
            spread: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub masses: Vec<f64>,
    /// Spring `i` joins mass `i` to mass `i - 1`; the first is grounded.
    pub springs: Vec<f64>,
    pub damping_ratio: f64,
    pub fs: f64,
    pub loop_mode: LoopMode,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub controller: LeadLagSpec,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            masses: vec![1.0; 3],
            springs: vec![50.0; 3],
            damping_ratio: 0.02,
            fs: 100.0,
            loop_mode: LoopMode::Open,
            noise: NoiseSpec::colored(),
            controller: LeadLagSpec::default(),
        }
    }
}

impl BenchmarkSpec {
    pub fn closed() -> Self {
        Self {
            loop_mode: LoopMode::Closed,
            ..Self::default()
        }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.fs
    }

    pub fn validate(&self) -> Result<()> {
        if self.masses.is_empty() || self.masses.len() != self.springs.len() {
            return Err(Error::InvalidArgument("need one spring per mass".into()));
        }
        if self
            .masses
            .iter()
            .chain(&self.springs)
            .any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "masses and springs must be positive".into(),
            ));
        }
        if !(self.damping_ratio > 0.0 && self.damping_ratio < 1.0) {
            return Err(Error::InvalidArgument(
                "damping ratio must lie in (0, 1)".into(),
            ));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::InvalidArgument(
                "sampling frequency must be positive".into(),
            ));
        }
        let c = &self.controller;
        if !(c.crossover_fraction > 0.0 && c.gain_fraction > 0.0 && c.spread >= 1.0) {
            return Err(Error::InvalidArgument(
                "controller spec needs positive fractions and spread >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Modes of the chain from the mass-normalized stiffness eigenproblem, each
/// with damping ratio `spec.damping_ratio`, ordered by increasing frequency.
pub fn chain_modes(spec: &BenchmarkSpec) -> Result<ModalParams> {
    spec.validate()?;
    let n = spec.masses.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for (i, &ks) in spec.springs.iter().enumerate() {
        k[(i, i)] += ks;
        if i > 0 {
            k[(i - 1, i - 1)] += ks;
            k[(i, i - 1)] -= ks;
            k[(i - 1, i)] -= ks;
        }
    }
    let m_isqrt: DVector<f64> =
        DVector::from_iterator(n, spec.masses.iter().map(|m| 1.0 / m.sqrt()));
    let kt = DMatrix::from_fn(n, n, |r, c| m_isqrt[r] * k[(r, c)] * m_isqrt[c]);
    let eig = kt.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let modes = order
        .into_iter()
        .map(|j| {
            let omega = eig.eigenvalues[j].sqrt();
            // Mass-normalized shape: phi^T M phi = 1.
            let phi = eig.eigenvectors.column(j).component_mul(&m_isqrt);
            let norm = phi.norm();
            Mode {
                xi: spec.damping_ratio,
                omega,
                psi_l: phi.iter().map(|v| v * norm / (omega * omega)).collect(),
                psi_r: phi.iter().map(|v| v / norm).collect(),
            }
            .normalized()
        })
        .collect();
    Ok(ModalParams { modes })
}

/// Force-to-position additive model of the chain, one rank-1 mode per mass.
pub fn build_three_mass(spec: &BenchmarkSpec) -> Result<AdditiveModel> {
    Ok(modal_eval(&chain_modes(spec)?))
}

/// ZOH-discretized decentralized lead controller for `model`; fails if it
/// does not stabilize the loop.
pub fn default_controller(
    model: &AdditiveModel,
    spec: &LeadLagSpec,
    h: f64,
) -> Result<DiscreteController> {
    let w1 = model
        .subsystems()
        .iter()
        .map(|s| 1.0 / s.den().coeff(s.n()).abs().powf(1.0 / s.n() as f64))
        .fold(f64::INFINITY, f64::min);
    let wc = spec.crossover_fraction * w1;
    let (wz, wp) = (wc / spec.spread, wc * spec.spread);
    let g = &freq_response(model, &[wc])[0];
    let n = model.n_y().min(model.n_u());
    if model.n_y() != model.n_u() {
        return Err(Error::DimMismatch(
            "decentralized controller needs a square plant".into(),
        ));
    }
    let parts = (0..n)
        .map(|j| {
            let mag = g[(j, j)].norm();
            if !(mag > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "channel {j} has no direct transfer at crossover"
                )));
            }
            let k = spec.gain_fraction / mag;
            siso_tf_to_ss(
                &ScalarPoly::new(vec![k, k / wz]),
                &ScalarPoly::new(vec![1.0, 1.0 / wp]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let ss = zoh_discretize(&StateSpace::block_diag(&parts)?, h)?;
    let ctrl = DiscreteController::new(ss, h)?;
    control_sensitivity(model, &ctrl, h)?;
    Ok(ctrl)
}

/// One simulated experiment.
#[derive(Debug, Clone)]
pub struct Realization {
    pub dataset: SampledDataset,
    pub noise_free: DMatrix<f64>,
    pub noise: DMatrix<f64>,
    /// Scale applied to the unit-variance noise.
    pub noise_scale: f64,
}

/// The benchmark plant, its controller (closed loop only) and the spec.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub spec: BenchmarkSpec,
    pub truth: AdditiveModel,
    pub controller: Option<DiscreteController>,
}

impl Benchmark {
    pub fn new(spec: BenchmarkSpec) -> Result<Self> {
        let truth = build_three_mass(&spec)?;
        let controller = match spec.loop_mode {
            LoopMode::Open => None,
            LoopMode::Closed => Some(default_controller(&truth, &spec.controller, spec.h())?),
        };
        Ok(Self {
            spec,
            truth,
            controller,
        })
    }

    pub fn with_controller(spec: BenchmarkSpec, controller: DiscreteController) -> Result<Self> {
        let truth = build_three_mass(&spec)?;
        control_sensitivity(&truth, &controller, spec.h())?;
        Ok(Self {
            spec,
            truth,
            controller: Some(controller),
        })
    }

    /// Unit-variance white excitation (input in open loop, reference in
    /// closed loop), ARMA noise at the target SNR, simulated from rest.
    pub fn simulate(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Realization> {
        let h = self.spec.h();
        let (n_y, n_u) = (self.truth.n_y(), self.truth.n_u());
        let ex_ch = match self.spec.loop_mode {
            LoopMode::Open => n_u,
            LoopMode::Closed => n_y,
        };
        let excitation = DMatrix::from_fn(n, ex_ch, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise_seed: u64 = rng.random();
        let noise_spec = &self.spec.noise;

        let noise_free = match (&self.spec.loop_mode, &self.controller) {
            (LoopMode::Open, _) => simulate_additive(&self.truth, &excitation, h)?,
            (LoopMode::Closed, Some(c)) => {
                simulate_closed_loop(&self.truth, c, &excitation, &DMatrix::zeros(n, n_y), h)?.1
            }
            (LoopMode::Closed, None) => return Err(Error::MissingController),
        };
        let (noise, noise_scale) = match noise_spec.snr_db {
            Some(db) => {
                let unit = gen_noise(
                    n,
                    n_y,
                    &noise_spec.arma_num,
                    &noise_spec.arma_den,
                    noise_seed,
                )?;
                calibrate_snr(&noise_free, &unit, db)?
            }
            None => (DMatrix::zeros(n, n_y), 0.0),
        };
        let dataset = match &self.controller {
            Some(c) if self.spec.loop_mode == LoopMode::Closed => {
                let (u, y) = simulate_closed_loop(&self.truth, c, &excitation, &noise, h)?;
                SampledDataset::new(h, 0.0, u, y, Some(excitation))?
            }
            _ => SampledDataset::new(h, 0.0, excitation, &noise_free + &noise, None)?,
        };
        Ok(Realization {
            dataset,
            noise_free,
            noise,
            noise_scale,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mass_frequency_is_sqrt_k_over_m() {
        let spec = BenchmarkSpec {
            masses: vec![2.0],
            springs: vec![18.0],
            ..BenchmarkSpec::default()
        };
        let modes = chain_modes(&spec).unwrap();
        assert!((modes.modes[0].omega - 3.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_spec_rejected() {
        let spec = BenchmarkSpec {
            masses: vec![1.0, -1.0, 1.0],
            ..BenchmarkSpec::default()
        };
        assert!(build_three_mass(&spec).is_err());
    }

    #[test]
    fn modes_are_rank_one_and_sorted() {
        let modes = chain_modes(&BenchmarkSpec::default()).unwrap();
        assert!(modes.modes.windows(2).all(|w| w[0].omega < w[1].omega));
        let model = build_three_mass(&BenchmarkSpec::default()).unwrap();
        for s in model.subsystems() {
            let b0 = &s.num().coeffs()[0];
            let sv = b0.clone().singular_values();
            assert!(sv[1] < 1e-14 * sv[0] && sv[2] < 1e-14 * sv[0]);
        }
    }

    #[test]
    fn default_controller_stabilizes_benchmark() {
        let model = build_three_mass(&BenchmarkSpec::default()).unwrap();
        let c = default_controller(&model, &LeadLagSpec::default(), 0.01).unwrap();
        assert_eq!((c.n_u(), c.n_y()), (3, 3));
    }
}
