//! Starting model for `identify` when the caller supplies only orders.

use ctriv_core::lti::{filter_sampled, SubsystemOrder};
use ctriv_core::riv::SampledDataset;
use ctriv_core::{AdditiveModel, Error, MatrixPoly, Result, ScalarPoly, Subsystem};
use nalgebra::{Complex, DMatrix};

/// Searched pole frequencies as fractions of the Nyquist frequency.
const BAND: (f64, f64) = (0.002, 0.3);
const GRID: usize = 48;
const SWEEPS: usize = 3;
const INIT_DAMPING: f64 = 0.05;
/// Minimum spacing, in grid steps, between the frequencies of two subsystems.
const MIN_SEP: usize = 2;

fn grid(h: f64) -> Vec<f64> {
    let nyq = std::f64::consts::PI / h;
    let (lo, hi) = (BAND.0 * nyq, BAND.1 * nyq);
    (0..GRID)
        .map(|i| lo * (hi / lo).powf(i as f64 / (GRID - 1) as f64))
        .collect()
}

/// Denominator of order `n` with all poles near `w`: damped pairs, plus a
/// real pole when `n` is odd.
fn denominator(n: usize, w: f64) -> Result<ScalarPoly> {
    let mut roots = Vec::with_capacity(n);
    for j in 0..n / 2 {
        let wj = w * (1.0 + 0.1 * j as f64);
        let re = -INIT_DAMPING * wj;
        let im = wj * (1.0 - INIT_DAMPING * INIT_DAMPING).sqrt();
        roots.push(Complex::new(re, im));
        roots.push(Complex::new(re, -im));
    }
    if n % 2 == 1 {
        roots.push(Complex::new(-w, 0.0));
    }
    ScalarPoly::from_roots_unit_constant(&roots)
}

/// Least-squares numerators for fixed denominators and the residual sum of
/// squares. Coefficient rows are ordered (subsystem, lag, input).
fn fit_numerators(
    orders: &[SubsystemOrder],
    dens: &[ScalarPoly],
    ds: &SampledDataset,
) -> Result<(DMatrix<f64>, f64)> {
    let n_u = ds.n_u();
    let cols: usize = orders.iter().map(|o| (o.m + 1) * n_u).sum();
    let mut x = DMatrix::zeros(ds.len(), cols);
    let mut c = 0;
    for (o, den) in orders.iter().zip(dens) {
        for l in 0..=o.m {
            let mut p = vec![0.0; l + 1];
            p[l] = 1.0;
            let filtered = filter_sampled(&ScalarPoly::new(p), den, ds.u(), ds.h())?;
            x.columns_mut(c, n_u).copy_from(&filtered);
            c += n_u;
        }
    }
    let coef = x
        .clone()
        .svd(true, true)
        .solve(ds.y(), 1e-12)
        .map_err(|e| Error::NumericFail(format!("initial numerator fit: {e}")))?;
    let rss = (ds.y() - x * &coef).norm_squared();
    Ok((coef, rss))
}

/// Picks one grid frequency per subsystem by coordinate descent on the
/// residual of the linear numerator fit, then returns that fit as a model.
pub fn initial_model(orders: &[SubsystemOrder], ds: &SampledDataset) -> Result<AdditiveModel> {
    if orders.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one subsystem order is required".into(),
        ));
    }
    if let Some(o) = orders.iter().find(|o| o.n == 0 || o.m > o.n) {
        return Err(Error::InvalidArgument(format!(
            "order (n={}, m={}) is not proper with n >= 1",
            o.n, o.m
        )));
    }
    let k = orders.len();
    let w = grid(ds.h());
    let dens_at = |idx: &[usize]| -> Result<Vec<ScalarPoly>> {
        orders
            .iter()
            .zip(idx)
            .map(|(o, &i)| denominator(o.n, w[i]))
            .collect()
    };
    let free = |idx: &[usize], skip: usize, g: usize| {
        idx.iter()
            .enumerate()
            .all(|(j, &v)| j == skip || v.abs_diff(g) > MIN_SEP)
    };
    // Forward selection, one subsystem at a time.
    let mut idx: Vec<usize> = Vec::with_capacity(k);
    let mut best = f64::INFINITY;
    for i in 0..k {
        let mut pick = None;
        best = f64::INFINITY;
        for g in (0..GRID).filter(|&g| free(&idx, usize::MAX, g)) {
            let mut trial = idx.clone();
            trial.push(g);
            let rss = fit_numerators(&orders[..=i], &dens_at(&trial)?, ds)?.1;
            if rss < best {
                best = rss;
                pick = Some(g);
            }
        }
        let g = pick.ok_or_else(|| {
            Error::InvalidArgument("frequency grid too coarse for the orders".into())
        })?;
        idx.push(g);
    }
    // Coordinate descent from there.
    for _ in 0..SWEEPS {
        let mut moved = false;
        for i in 0..k {
            for g in 0..GRID {
                if g == idx[i] || !free(&idx, i, g) {
                    continue;
                }
                let mut trial = idx.clone();
                trial[i] = g;
                let rss = fit_numerators(orders, &dens_at(&trial)?, ds)?.1;
                if rss < best {
                    best = rss;
                    idx = trial;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }

    let dens = dens_at(&idx)?;
    let coef = fit_numerators(orders, &dens, ds)?.0;
    let (n_u, n_y) = (ds.n_u(), ds.n_y());
    let mut subsystems = Vec::with_capacity(k);
    let mut c = 0;
    for (o, den) in orders.iter().zip(dens) {
        let mut lags = Vec::with_capacity(o.m + 1);
        for _ in 0..=o.m {
            lags.push(DMatrix::from_fn(n_y, n_u, |r, j| coef[(c + j, r)]));
            c += n_u;
        }
        subsystems.push(Subsystem::new(den, MatrixPoly::new(lags)?)?);
    }
    AdditiveModel::new(subsystems)
}
