use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ParameterMap;
use crate::error::{Error, Result};
use crate::linalg;

/// Relative singular-value threshold used for rank decisions.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct ProjectOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-10,
            step_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub rho: Vec<f64>,
    /// Asymptotic covariance of `rho_hat` (scaled like the input weighting).
    pub ps: Vec<Vec<f64>>,
    pub cost: f64,
    /// Cost at the start and after every accepted step.
    pub cost_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// The Jacobian lost rank (beyond the map's gauge) at the solution; `ps`
    /// then comes from a pseudo-inverse.
    pub singular_jacobian: bool,
}

impl ProjectionResult {
    pub fn rho(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.rho)
    }
    pub fn ps(&self) -> DMatrix<f64> {
        linalg::from_rows(&self.ps).expect("square by construction")
    }
}

/// Lower Cholesky factor's inverse of an SPD weighting `q`.
fn whitener(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if (q - q.transpose()).amax() > 1e-10 * q.amax() {
        return Err(Error::NotPdWeight);
    }
    let chol = linalg::symmetrize(q).cholesky().ok_or(Error::NotPdWeight)?;
    chol.l().try_inverse().ok_or(Error::NotPdWeight)
}

/// Damped Gauss-Newton step `sum_i s_i / (s_i^2 + lambda) (u_i^T r) v_i`
/// over the numerically nonzero singular values of `jw`.
fn damped_step(jw: &DMatrix<f64>, r: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let svd = jw.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested");
    let vt = svd.v_t.as_ref().expect("requested");
    let smax = svd.singular_values.max();
    let mut step = DVector::zeros(jw.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > RANK_TOL * smax && s > 0.0 {
            let coef = s / (s * s + lambda) * u.column(i).dot(r);
            step += vt.row(i).transpose() * coef;
        }
    }
    step
}

/// Minimizes `0.5 ||beta_hat - f(rho)||^2_{Q^-1}` from `rho0` by
/// Levenberg-damped Gauss-Newton, renormalizing onto the map's chart after
/// every accepted step. `ps` is the inverse of `J^T Q^-1 J` on the chart,
/// mapped through the normalization Jacobian.
pub fn project(
    beta_hat: &DVector<f64>,
    q: &DMatrix<f64>,
    map: &dyn ParameterMap,
    rho0: &DVector<f64>,
    opts: &ProjectOptions,
) -> Result<ProjectionResult> {
    if beta_hat.len() != map.dim_beta()
        || rho0.len() != map.dim_rho()
        || q.shape() != (beta_hat.len(), beta_hat.len())
    {
        return Err(Error::DimMismatch(format!(
            "map '{}' expects beta of {} and rho of {}",
            map.name(),
            map.dim_beta(),
            map.dim_rho()
        )));
    }
    let l_inv = whitener(q)?;
    let resid = |rho: &DVector<f64>| &l_inv * (beta_hat - map.eval(rho));
    let cost_of = |r: &DVector<f64>| 0.5 * r.norm_squared();

    let mut rho = map.normalize(rho0);
    let mut r = resid(&rho);
    let mut cost = cost_of(&r);
    let mut cost_trace = vec![cost];
    let mut jw = &l_inv * map.jacobian(&rho);
    let diag_max = jw
        .column_iter()
        .map(|c| c.norm_squared())
        .fold(0.0, f64::max);
    let mut lambda = 1e-3 * diag_max.max(f64::MIN_POSITIVE);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let grad = jw.tr_mul(&r);
        if grad.norm() < opts.grad_tol * (1.0 + cost) {
            converged = true;
            break;
        }
        let step = damped_step(&jw, &r, lambda);
        if step.norm() < opts.step_tol {
            converged = true;
            break;
        }
        let cand = map.normalize(&(&rho + &step));
        let r_c = resid(&cand);
        let c_c = cost_of(&r_c);
        if c_c.is_finite() && c_c <= cost {
            rho = cand;
            r = r_c;
            cost = c_c;
            cost_trace.push(cost);
            jw = &l_inv * map.jacobian(&rho);
            lambda = (lambda / 3.0).max(1e-15 * diag_max);
        } else {
            lambda *= 4.0;
        }
    }

    let w = l_inv.tr_mul(&l_inv);
    let (ps, singular) = gauge_fixed_inverse(map, &rho, &w);
    Ok(ProjectionResult {
        rho: rho.iter().copied().collect(),
        ps: linalg::to_rows(&ps),
        cost,
        cost_trace,
        converged,
        iterations,
        singular_jacobian: singular,
    })
}

/// Orthonormal basis of the complement of the gauge directions, i.e. of the
/// null space of the normalization Jacobian `n`.
fn chart_basis(n: &DMatrix<f64>, gauge: usize) -> DMatrix<f64> {
    let dim = n.ncols();
    if gauge == 0 {
        return DMatrix::identity(dim, dim);
    }
    let svd = n.clone().svd(false, true);
    let vt = svd.v_t.as_ref().expect("requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let keep = dim - gauge;
    DMatrix::from_fn(dim, keep, |r, c| vt[(idx[c], r)])
}

/// `N G (G^T J^T W J G)^-1 G^T N^T` at `rho`, `G` spanning the chart, and
/// whether `J G` has lost rank. A pseudo-inverse replaces the inverse in the
/// rank-deficient case.
fn gauge_fixed_inverse(
    map: &dyn ParameterMap,
    rho: &DVector<f64>,
    w: &DMatrix<f64>,
) -> (DMatrix<f64>, bool) {
    let j = map.jacobian(rho);
    let n = map.normalization_jacobian(rho);
    let g = chart_basis(&n, map.gauge_dim());
    let jg = &j * &g;
    let singular = linalg::rank(&jg, RANK_TOL) < g.ncols();
    let info = linalg::symmetrize(&(jg.transpose() * w * &jg));
    let inv = match (singular, linalg::spd_inverse(&info)) {
        (false, Some(inv)) => inv,
        _ => linalg::pinv(&info, 1e-14).0,
    };
    let ng = &n * &g;
    (linalg::symmetrize(&(&ng * inv * ng.transpose())), singular)
}

/// Covariance of the normalized structured parameters
/// for an information-type weighting `w` (for instance `Q^-1` or a Fisher
/// matrix).
pub fn projected_covariance(
    map: &dyn ParameterMap,
    rho: &DVector<f64>,
    w: &DMatrix<f64>,
) -> DMatrix<f64> {
    gauge_fixed_inverse(map, rho, w).0
}

/// Sandwich covariance `M^-1 J^T Q^-1 P Q^-1 J M^-1`, `M = J^T Q^-1 J`, of a
/// projection weighted by `Q^-1` when `beta_hat` has covariance `P`.
pub fn general_covariance(
    j: &DMatrix<f64>,
    q: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (nb, nr) = j.shape();
    if q.shape() != (nb, nb) || p.shape() != (nb, nb) {
        return Err(Error::DimMismatch(
            "weighting and covariance must match J rows".into(),
        ));
    }
    if linalg::rank(j, RANK_TOL) < nr {
        return Err(Error::SingularJacobian);
    }
    let q_inv = linalg::spd_inverse(q).ok_or(Error::NotPdWeight)?;
    let a = &q_inv * j;
    let m = j.tr_mul(&a);
    let m_inv = linalg::spd_inverse(&m).ok_or(Error::SingularJacobian)?;
    let mid = a.tr_mul(&(p * &a));
    Ok(linalg::symmetrize(&(&m_inv * mid * &m_inv)))
}
