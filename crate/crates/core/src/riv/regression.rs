//! Residuals, regressors and instruments of the refined IV iteration.
//!
//! Per sample `t_k` the regressor of subsystem `i` is a `d_i x n_y` matrix
//! `Phi_i(t_k)` so that `Phi_i(t_k)^T theta_i` reproduces the filtered
//! subsystem output. Everything is built from ZOH derivative banks of
//! `1 / A_i` and `1 / A_i^2`, each input channel being filtered once.

use nalgebra::{DMatrix, DVector};

use super::dataset::SampledDataset;
use super::options::{EstimatorOptions, LoopMode};
use crate::closed_loop::noiseless_input;
use crate::error::{Error, Result};
use crate::lti::simulate::accumulate_numerator;
use crate::lti::{AdditiveModel, DerivativeBank};

fn check_dims(model: &AdditiveModel, ds: &SampledDataset) -> Result<()> {
    if model.n_u() != ds.n_u() || model.n_y() != ds.n_y() {
        return Err(Error::DimMismatch(format!(
            "model is {}x{} but data has {} outputs and {} inputs",
            model.n_y(),
            model.n_u(),
            ds.n_y(),
            ds.n_u()
        )));
    }
    Ok(())
}

/// `p^j / A_i` of every input channel, `j = 0..=n_i`.
fn input_banks(model: &AdditiveModel, x: &DMatrix<f64>, h: f64) -> Result<Vec<Vec<DMatrix<f64>>>> {
    model
        .subsystems()
        .iter()
        .map(|s| {
            let bank = DerivativeBank::new(s.den(), h)?;
            Ok((0..x.ncols())
                .map(|c| bank.apply(x.column(c).as_slice()))
                .collect())
        })
        .collect()
}

/// Subsystem outputs `x_i = G_i u` from precomputed input banks.
fn outputs_from_banks(
    model: &AdditiveModel,
    banks: &[Vec<DMatrix<f64>>],
    len: usize,
) -> Vec<DMatrix<f64>> {
    model
        .subsystems()
        .iter()
        .zip(banks)
        .map(|(s, b)| {
            let mut x = DMatrix::zeros(len, model.n_y());
            for (c, d) in b.iter().enumerate() {
                accumulate_numerator(&mut x, s, c, d, 0);
            }
            x
        })
        .collect()
}

/// `eps(t_k) = y(t_k) - sum_i G_i(p) u(t_k)`.
pub fn residual(model: &AdditiveModel, ds: &SampledDataset) -> Result<DMatrix<f64>> {
    check_dims(model, ds)?;
    let banks = input_banks(model, ds.u(), ds.h())?;
    let xs = outputs_from_banks(model, &banks, ds.len());
    Ok(xs.iter().fold(ds.y().clone(), |acc, x| acc - x))
}

/// `y - sum_{l != i} G_l(p) u`: the output with every other subsystem removed.
pub fn subsystem_residual_output(
    model: &AdditiveModel,
    ds: &SampledDataset,
    i: usize,
) -> Result<DMatrix<f64>> {
    check_dims(model, ds)?;
    if i >= model.k() {
        return Err(Error::InvalidArgument(format!(
            "subsystem index {i} out of range"
        )));
    }
    let banks = input_banks(model, ds.u(), ds.h())?;
    let xs = outputs_from_banks(model, &banks, ds.len());
    Ok(xs
        .iter()
        .enumerate()
        .filter(|(l, _)| *l != i)
        .fold(ds.y().clone(), |acc, (_, x)| acc - x))
}

/// A sequence of `rows x cols` matrices, one per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrices {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SampleMatrices {
    fn zeros(len: usize, rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; len * rows * cols],
        }
    }
    pub fn len(&self) -> usize {
        self.data
            .len()
            .checked_div(self.rows * self.cols)
            .unwrap_or(0)
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn at(&self, k: usize) -> DMatrix<f64> {
        let sz = self.rows * self.cols;
        DMatrix::from_column_slice(self.rows, self.cols, &self.data[k * sz..(k + 1) * sz])
    }
    fn set(&mut self, k: usize, r: usize, c: usize, v: f64) {
        self.data[k * self.rows * self.cols + c * self.rows + r] = v;
    }
}

/// Regressor, instrument and target stacked over all subsystems.
#[derive(Debug, Clone)]
pub struct RegressionMatrices {
    /// `d x n_y` per sample.
    pub phi: SampleMatrices,
    /// `d x n_y` per sample.
    pub phi_hat: SampleMatrices,
    /// `n_y x K` per sample; column `i` is `y~_i / A_i`.
    pub upsilon: SampleMatrices,
}

/// Filtered signals of one subsystem at the current iterate.
pub(crate) struct SubsystemSignals {
    n: usize,
    m: usize,
    offset: usize,
    /// Per output channel: `p^j / A_i y~_i`, `N x (n+1)`.
    y_d: Vec<DMatrix<f64>>,
    /// Per input channel: `p^j / A_i u`.
    u_d: Vec<DMatrix<f64>>,
    /// Per input channel: `p^j / A_i z` when `z != u`.
    z_d: Option<Vec<DMatrix<f64>>>,
    /// `j = 1..=n`: `-p^j B_i / A_i^2 z`, `N x n_y`.
    inst_a: Vec<DMatrix<f64>>,
}

/// Everything the normal equations need at one iterate.
pub(crate) struct Signals {
    pub(crate) n_u: usize,
    pub(crate) n_y: usize,
    pub(crate) len: usize,
    pub(crate) dim: usize,
    pub(crate) eps: DMatrix<f64>,
    subs: Vec<SubsystemSignals>,
}

impl Signals {
    pub(crate) fn new(
        model: &AdditiveModel,
        ds: &SampledDataset,
        opts: &EstimatorOptions,
    ) -> Result<Self> {
        check_dims(model, ds)?;
        let h = ds.h();
        let len = ds.len();
        let z = match opts.loop_mode {
            LoopMode::Open => None,
            LoopMode::Closed => {
                let r = ds.r().ok_or(Error::MissingReference)?;
                let ctrl = opts.controller.as_ref().ok_or(Error::MissingController)?;
                Some(noiseless_input(model, ctrl, r, h)?)
            }
        };
        let u_banks = input_banks(model, ds.u(), h)?;
        let xs = outputs_from_banks(model, &u_banks, len);
        let eps = xs.iter().fold(ds.y().clone(), |acc, x| acc - x);
        let structure = model.structure();

        let mut subs = Vec::with_capacity(model.k());
        for (i, (s, u_d)) in model.subsystems().iter().zip(u_banks).enumerate() {
            let bank = DerivativeBank::new(s.den(), h)?;
            let y_tilde = &eps + &xs[i];
            let y_d = (0..model.n_y())
                .map(|r| bank.apply(y_tilde.column(r).as_slice()))
                .collect();
            let z_src = z.as_ref().unwrap_or(ds.u());
            let z_d = z.as_ref().map(|z| {
                (0..z.ncols())
                    .map(|c| bank.apply(z.column(c).as_slice()))
                    .collect()
            });
            let n = s.n();
            let mut inst_a = vec![DMatrix::zeros(len, model.n_y()); n];
            if n > 0 && !s.num().is_zero() {
                let bank2 = DerivativeBank::new(&s.den().mul(s.den()), h)?;
                for c in 0..z_src.ncols() {
                    let d2 = bank2.apply(z_src.column(c).as_slice());
                    for (j, target) in inst_a.iter_mut().enumerate() {
                        accumulate_numerator(target, s, c, &d2, j + 1);
                    }
                }
                for t in &mut inst_a {
                    t.neg_mut();
                }
            }
            subs.push(SubsystemSignals {
                n,
                m: s.m(),
                offset: structure.offset(i),
                y_d,
                u_d,
                z_d,
                inst_a,
            });
        }
        Ok(Self {
            n_u: model.n_u(),
            n_y: model.n_y(),
            len,
            dim: structure.dim_beta(),
            eps,
            subs,
        })
    }

    pub(crate) fn k(&self) -> usize {
        self.subs.len()
    }

    /// Fills rows `(k - k0) * n_y + r` for samples `k0..k1`:
    /// `x` gets `Phi^T`, `xhat_t` gets `PhiHat` (transposed layout) and
    /// `target` gets `Upsilon`.
    pub(crate) fn fill_chunk(
        &self,
        k0: usize,
        k1: usize,
        x: &mut DMatrix<f64>,
        xhat_t: &mut DMatrix<f64>,
        target: &mut DMatrix<f64>,
    ) {
        let ny = self.n_y;
        let nb = self.n_u * ny;
        x.fill(0.0);
        xhat_t.fill(0.0);
        for (i, s) in self.subs.iter().enumerate() {
            for k in k0..k1 {
                let base = (k - k0) * ny;
                for r in 0..ny {
                    target[(base + r, i)] = s.y_d[r][(k, 0)];
                }
                for j in 1..=s.n {
                    let col = s.offset + j - 1;
                    for r in 0..ny {
                        x[(base + r, col)] = -s.y_d[r][(k, j)];
                        xhat_t[(col, base + r)] = s.inst_a[j - 1][(k, r)];
                    }
                }
                let zd = s.z_d.as_ref().unwrap_or(&s.u_d);
                for l in 0..=s.m {
                    for c in 0..self.n_u {
                        let uv = s.u_d[c][(k, l)];
                        let zv = zd[c][(k, l)];
                        let col0 = s.offset + s.n + l * nb + c * ny;
                        for r in 0..ny {
                            x[(base + r, col0 + r)] = uv;
                            xhat_t[(col0 + r, base + r)] = zv;
                        }
                    }
                }
            }
        }
    }

    /// Materializes the per-sample matrices (useful for inspection and tests).
    pub(crate) fn materialize(&self) -> RegressionMatrices {
        let (d, ny, len) = (self.dim, self.n_y, self.len);
        let mut phi = SampleMatrices::zeros(len, d, ny);
        let mut phi_hat = SampleMatrices::zeros(len, d, ny);
        let mut upsilon = SampleMatrices::zeros(len, ny, self.k());
        let mut x = DMatrix::zeros(ny, d);
        let mut xt = DMatrix::zeros(d, ny);
        let mut t = DMatrix::zeros(ny, self.k());
        for k in 0..len {
            self.fill_chunk(k, k + 1, &mut x, &mut xt, &mut t);
            for r in 0..ny {
                for c in 0..d {
                    phi.set(k, c, r, x[(r, c)]);
                    phi_hat.set(k, c, r, xt[(c, r)]);
                }
                for i in 0..self.k() {
                    upsilon.set(k, r, i, t[(r, i)]);
                }
            }
        }
        RegressionMatrices {
            phi,
            phi_hat,
            upsilon,
        }
    }

    /// Restriction of a stacked block to subsystem `i`'s rows.
    fn block(&self, m: &SampleMatrices, i: usize, dim_i: usize) -> SampleMatrices {
        let off = self.subs[i].offset;
        let mut out = SampleMatrices::zeros(m.len(), dim_i, m.cols());
        for k in 0..m.len() {
            let full = m.at(k);
            for c in 0..m.cols() {
                for r in 0..dim_i {
                    out.set(k, r, c, full[(off + r, c)]);
                }
            }
        }
        out
    }
}

/// Stacked regressor, instrument and filtered targets at `model`.
pub fn regression_matrices(
    model: &AdditiveModel,
    ds: &SampledDataset,
    opts: &EstimatorOptions,
) -> Result<RegressionMatrices> {
    Ok(Signals::new(model, ds, opts)?.materialize())
}

/// `Phi_i(t_k)`: `d_i x n_y` per sample.
pub fn build_regressor(
    model: &AdditiveModel,
    ds: &SampledDataset,
    i: usize,
) -> Result<SampleMatrices> {
    let sig = Signals::new(model, ds, &EstimatorOptions::default())?;
    if i >= model.k() {
        return Err(Error::InvalidArgument(format!(
            "subsystem index {i} out of range"
        )));
    }
    let all = sig.materialize();
    Ok(sig.block(&all.phi, i, model.subsystems()[i].dim_theta()))
}

/// `PhiHat_i(t_k)`: `d_i x n_y` per sample, built from `z = u` (open loop)
/// or `z = S_uo r` (closed loop).
pub fn build_instrument(
    model: &AdditiveModel,
    ds: &SampledDataset,
    i: usize,
    opts: &EstimatorOptions,
) -> Result<SampleMatrices> {
    let sig = Signals::new(model, ds, opts)?;
    if i >= model.k() {
        return Err(Error::InvalidArgument(format!(
            "subsystem index {i} out of range"
        )));
    }
    let all = sig.materialize();
    Ok(sig.block(&all.phi_hat, i, model.subsystems()[i].dim_theta()))
}

/// Sample covariance `(1/N) sum eps eps^T` and whether it is numerically
/// singular (smallest eigenvalue below `1e-12 * trace`).
pub fn noise_covariance(eps: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let (n, ny) = eps.shape();
    if n < ny || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "need at least {ny} samples, got {n}"
        )));
    }
    let sigma = crate::linalg::symmetrize(&(eps.tr_mul(eps) / n as f64));
    let tr = sigma.trace();
    let min_eig = sigma.clone().symmetric_eigenvalues().min();
    let singular = !(min_eig >= 1e-12 * tr) || tr == 0.0;
    Ok((sigma, singular))
}

/// Inverse of `sigma` after the singular-case diagonal loading.
pub(crate) fn regularized_inverse(sigma: &DMatrix<f64>, singular: bool) -> Result<DMatrix<f64>> {
    let ny = sigma.nrows();
    let mut s = sigma.clone();
    if singular {
        let tr = sigma.trace();
        if tr > 0.0 {
            for r in 0..ny {
                s[(r, r)] += 1e-10 * tr / ny as f64;
            }
        } else {
            s = DMatrix::identity(ny, ny);
        }
    }
    crate::linalg::spd_inverse(&s).ok_or(Error::SingularSigma)
}

/// `(I_rows (x) w) m` for a stack of `n_y`-row blocks.
pub(crate) fn weight_blocks(w: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let ny = w.nrows();
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for b in 0..m.nrows() / ny {
        let rows = m.rows(b * ny, ny);
        out.rows_mut(b * ny, ny).copy_from(&(w * rows));
    }
    out
}

/// Sample count over which sums run once the transient is removed.
pub(crate) fn effective_range(skip: usize, len: usize) -> std::ops::Range<usize> {
    skip.min(len)..len
}

pub(crate) const CHUNK: usize = 1024;

/// Accumulated `sum PhiHat W Phi^T`, `sum PhiHat W Upsilon` and optionally
/// `sum PhiHat W PhiHat^T` over samples `range`.
pub(crate) struct Normal {
    pub(crate) lhs: DMatrix<f64>,
    pub(crate) rhs: DMatrix<f64>,
    pub(crate) gram: Option<DMatrix<f64>>,
}

pub(crate) fn accumulate(
    sig: &Signals,
    w: &DMatrix<f64>,
    range: std::ops::Range<usize>,
    want_lhs: bool,
    want_gram: bool,
) -> Normal {
    let (d, ny, kk) = (sig.dim, sig.n_y, sig.k());
    let mut lhs = DMatrix::zeros(if want_lhs { d } else { 0 }, if want_lhs { d } else { 0 });
    let mut rhs = DMatrix::zeros(if want_lhs { d } else { 0 }, if want_lhs { kk } else { 0 });
    let mut gram = want_gram.then(|| DMatrix::zeros(d, d));
    let mut k0 = range.start;
    while k0 < range.end {
        let k1 = (k0 + CHUNK).min(range.end);
        let rows = (k1 - k0) * ny;
        let mut x = DMatrix::zeros(rows, d);
        let mut xt = DMatrix::zeros(d, rows);
        let mut t = DMatrix::zeros(rows, kk);
        sig.fill_chunk(k0, k1, &mut x, &mut xt, &mut t);
        if want_lhs {
            lhs.gemm(1.0, &xt, &weight_blocks(w, &x), 1.0);
            rhs.gemm(1.0, &xt, &weight_blocks(w, &t), 1.0);
        }
        if let Some(g) = gram.as_mut() {
            g.gemm(1.0, &xt, &weight_blocks(w, &xt.transpose()), 1.0);
        }
        k0 = k1;
    }
    Normal { lhs, rhs, gram }
}

/// Stacks the diagonal blocks `theta_i = B[off_i.., i]` of the solved matrix.
pub(crate) fn extract_block_diagonal(sol: &DMatrix<f64>, model: &AdditiveModel) -> DVector<f64> {
    let structure = model.structure();
    let mut beta = DVector::zeros(structure.dim_beta());
    for i in 0..model.k() {
        let off = structure.offset(i);
        let di = model.subsystems()[i].dim_theta();
        beta.rows_mut(off, di)
            .copy_from(&sol.view((off, i), (di, 1)));
    }
    beta
}
