use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dataset::SampledDataset;
use super::options::{EstimatorOptions, UnstablePolicy};
use super::regression::{
    accumulate, effective_range, extract_block_diagonal, noise_covariance, regularized_inverse,
    Signals,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::lti::{AdditiveModel, Subsystem};

/// Normal matrices beyond this equilibrated condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct RivResult {
    pub model: AdditiveModel,
    pub sigma_hat: DMatrix<f64>,
    /// Approximately `N Cov(beta_hat)`.
    pub acov: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Relative parameter step of every iteration.
    pub trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RivResultJson {
    model: AdditiveModel,
    sigma: Vec<Vec<f64>>,
    acov: Vec<Vec<f64>>,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

impl RivResult {
    pub fn to_json(&self) -> Result<String> {
        let j = RivResultJson {
            model: self.model.clone(),
            sigma: linalg::to_rows(&self.sigma_hat),
            acov: linalg::to_rows(&self.acov),
            iterations: self.iterations,
            converged: self.converged,
            trace: self.trace.clone(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: RivResultJson = serde_json::from_str(s)?;
        Ok(Self {
            model: j.model,
            sigma_hat: linalg::from_rows(&j.sigma)?,
            acov: linalg::from_rows(&j.acov)?,
            iterations: j.iterations,
            converged: j.converged,
            trace: j.trace,
        })
    }
}

fn check_stable(model: &AdditiveModel, margin: f64) -> Result<()> {
    match model
        .subsystems()
        .iter()
        .position(|s| !s.den().is_hurwitz(margin))
    {
        Some(i) => Err(Error::UnstableInitialModel(i)),
        None => Ok(()),
    }
}

fn skip_for(model: &AdditiveModel, ds: &SampledDataset, opts: &EstimatorOptions) -> usize {
    opts.skip(model.max_time_constant(), ds.h(), ds.len())
}

/// One update at a fixed transient window. `iteration` labels errors.
fn step(
    model: &AdditiveModel,
    ds: &SampledDataset,
    opts: &EstimatorOptions,
    skip: usize,
    iteration: usize,
) -> Result<AdditiveModel> {
    let sig = Signals::new(model, ds, opts)?;
    let range = effective_range(skip, sig.len);
    let (sigma, singular) = noise_covariance(&sig.eps.rows(range.start, range.len()).into_owned())?;
    let w = regularized_inverse(&sigma, singular)?;
    let normal = accumulate(&sig, &w, range, true, false);
    let cond = linalg::equilibrated_condition_number(&normal.lhs);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let sol = normal
        .lhs
        .lu()
        .solve(&normal.rhs)
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    let beta = extract_block_diagonal(&sol, model);
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFail("non-finite parameter update".into()));
    }
    let next = model.structure().unflatten(&beta)?;
    stabilize(next, opts, iteration)
}

fn stabilize(
    model: AdditiveModel,
    opts: &EstimatorOptions,
    iteration: usize,
) -> Result<AdditiveModel> {
    let margin = opts.stability_margin;
    let mut out = model.clone();
    for (i, s) in model.subsystems().iter().enumerate() {
        if s.den().is_hurwitz(margin) {
            continue;
        }
        match opts.on_unstable_iterate {
            UnstablePolicy::Abort => {
                return Err(Error::UnstableIterate {
                    iteration,
                    subsystem: i,
                })
            }
            UnstablePolicy::Reflect => {
                // Twice the margin keeps the mirrored roots strictly inside it.
                let (den, _) = s
                    .den()
                    .reflect_unstable(2.0 * margin.max(f64::MIN_POSITIVE))?;
                out = out.with_subsystem(i, Subsystem::new(den, s.num().clone())?);
            }
        }
    }
    Ok(out)
}

/// One refined IV update `beta_j -> beta_{j+1}`.
pub fn riv_step(
    model: &AdditiveModel,
    ds: &SampledDataset,
    opts: &EstimatorOptions,
) -> Result<AdditiveModel> {
    opts.validate()?;
    check_stable(model, opts.stability_margin)?;
    step(model, ds, opts, skip_for(model, ds, opts), 1)
}

/// Lexicographic order on `(n, m, theta)`, used to make the iteration
/// independent of how the caller lists the subsystems.
fn canonical_order(model: &AdditiveModel) -> Vec<usize> {
    let keys: Vec<(usize, usize, Vec<f64>)> = (0..model.k())
        .map(|i| {
            let s = &model.subsystems()[i];
            (s.n(), s.m(), model.theta(i).as_slice().to_vec())
        })
        .collect();
    let mut idx: Vec<usize> = (0..model.k()).collect();
    idx.sort_by(|&a, &b| {
        let (ka, kb) = (&keys[a], &keys[b]);
        ka.0.cmp(&kb.0).then(ka.1.cmp(&kb.1)).then_with(|| {
            ka.2.iter()
                .zip(&kb.2)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
    idx
}

/// Maps parameter indices of `model.permuted(perm)` back to `model`.
pub(crate) fn beta_index_map(model: &AdditiveModel, perm: &[usize]) -> Vec<usize> {
    let st = model.structure();
    let mut map = Vec::with_capacity(st.dim_beta());
    for &p in perm {
        let off = st.offset(p);
        map.extend(off..off + model.subsystems()[p].dim_theta());
    }
    map
}

/// Iterates [`riv_step`] until the relative parameter step drops below
/// `rel_tol` or `max_iter` is reached, then evaluates the noise and
/// asymptotic covariances at the final iterate.
pub fn riv_solve(
    model0: &AdditiveModel,
    ds: &SampledDataset,
    opts: &EstimatorOptions,
) -> Result<RivResult> {
    opts.validate()?;
    check_stable(model0, opts.stability_margin)?;
    let perm = canonical_order(model0);
    let mut cur = model0.permuted(&perm);
    let skip = skip_for(model0, ds, opts);

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = step(&cur, ds, opts, skip, iterations)?;
        let (b0, b1) = (cur.flatten(), next.flatten());
        let denom = b0.norm();
        let rel = if denom > 0.0 {
            (&b1 - &b0).norm() / denom
        } else {
            (&b1 - &b0).norm()
        };
        trace.push(rel);
        cur = next;
        if rel < opts.rel_tol {
            converged = true;
            break;
        }
    }

    let (sigma_hat, acov) = covariances(&cur, ds, opts, skip, None)?;

    let mut inv = vec![0; perm.len()];
    for (j, &p) in perm.iter().enumerate() {
        inv[p] = j;
    }
    let model = cur.permuted(&inv);
    let map = beta_index_map(&cur, &inv);
    let acov = DMatrix::from_fn(acov.nrows(), acov.ncols(), |r, c| acov[(map[r], map[c])]);
    Ok(RivResult {
        model,
        sigma_hat,
        acov,
        iterations,
        converged,
        trace,
    })
}

/// Noise covariance and `N_eff [sum PhiHat Sigma^-1 PhiHat^T]^{-1}` at `model`.
fn covariances(
    model: &AdditiveModel,
    ds: &SampledDataset,
    opts: &EstimatorOptions,
    skip: usize,
    sigma: Option<&DMatrix<f64>>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sig = Signals::new(model, ds, opts)?;
    let range = effective_range(skip, sig.len);
    let n_eff = range.len() as f64;
    let (sigma, w) = match sigma {
        Some(s) => (s.clone(), linalg::spd_inverse(s).ok_or(Error::NotPdWeight)?),
        None => {
            let (s, singular) =
                noise_covariance(&sig.eps.rows(range.start, range.len()).into_owned())?;
            let w = regularized_inverse(&s, singular)?;
            (s, w)
        }
    };
    let gram = accumulate(&sig, &w, range, false, true)
        .gram
        .expect("requested");
    let gram = linalg::symmetrize(&gram);
    let cond = linalg::equilibrated_condition_number(&gram);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let inv = linalg::spd_inverse(&gram)
        .or_else(|| gram.clone().try_inverse())
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    Ok((sigma, linalg::symmetrize(&(inv * n_eff))))
}

/// Plug-in estimate of `N Cov(beta_hat)` at a converged `model`.
pub fn asymptotic_covariance(
    model: &AdditiveModel,
    ds: &SampledDataset,
    opts: &EstimatorOptions,
) -> Result<DMatrix<f64>> {
    Ok(covariances(model, ds, opts, skip_for(model, ds, opts), None)?.1)
}

/// As [`asymptotic_covariance`] with a caller-supplied noise covariance.
pub fn asymptotic_covariance_with_sigma(
    model: &AdditiveModel,
    ds: &SampledDataset,
    opts: &EstimatorOptions,
    sigma: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    Ok(covariances(model, ds, opts, skip_for(model, ds, opts), Some(sigma))?.1)
}

/// `(1/N) sum_k PhiHat(t_k) Sigma^-1 v(t_k)` with the instrument evaluated
/// at `model`: the sample correlation between instrument and noise.
pub fn instrument_noise_correlation(
    model: &AdditiveModel,
    ds: &SampledDataset,
    opts: &EstimatorOptions,
    v: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let sig = Signals::new(model, ds, opts)?;
    if v.shape() != (sig.len, sig.n_y) {
        return Err(Error::DimMismatch(
            "noise must match the output record".into(),
        ));
    }
    let w = linalg::spd_inverse(sigma).ok_or(Error::NotPdWeight)?;
    let range = effective_range(skip_for(model, ds, opts), sig.len);
    let n_eff = range.len() as f64;
    let mut out = DVector::zeros(sig.dim);
    let mut k0 = range.start;
    let ny = sig.n_y;
    while k0 < range.end {
        let k1 = (k0 + super::regression::CHUNK).min(range.end);
        let rows = (k1 - k0) * ny;
        let mut x = DMatrix::zeros(rows, sig.dim);
        let mut xt = DMatrix::zeros(sig.dim, rows);
        let mut t = DMatrix::zeros(rows, sig.k());
        sig.fill_chunk(k0, k1, &mut x, &mut xt, &mut t);
        let mut vv = DVector::zeros(rows);
        for k in k0..k1 {
            let wv = &w * v.row(k).transpose();
            vv.rows_mut((k - k0) * ny, ny).copy_from(&wv);
        }
        out += &xt * vv;
        k0 = k1;
    }
    Ok(out / n_eff)
}
