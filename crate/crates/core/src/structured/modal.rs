use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ParameterMap;
use crate::error::{Error, Result};
use crate::linalg::{kron_identity_vec, kron_vec_identity};
use crate::lti::{AdditiveModel, MatrixPoly, ScalarPoly, Subsystem};

/// One lightly damped mode `psi_l psi_r^T / (1 + 2 (xi / w) p + p^2 / w^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub xi: f64,
    pub omega: f64,
    pub psi_l: Vec<f64>,
    pub psi_r: Vec<f64>,
}

impl Mode {
    /// Representative with `||psi_r|| = 1` and its first nonzero entry positive.
    pub fn normalized(&self) -> Mode {
        let (l, r) = normalize_pair(&self.psi_l, &self.psi_r);
        Mode {
            xi: self.xi,
            omega: self.omega,
            psi_l: l,
            psi_r: r,
        }
    }
}

fn gauge_scale(psi_r: &[f64]) -> f64 {
    let norm = psi_r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = psi_r
        .iter()
        .find(|v| v.abs() > 1e-12 * norm)
        .map_or(1.0, |v| v.signum());
    sign * norm
}

fn normalize_pair(l: &[f64], r: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s = gauge_scale(r);
    if s == 0.0 {
        return (l.to_vec(), r.to_vec());
    }
    (
        l.iter().map(|v| v * s).collect(),
        r.iter().map(|v| v / s).collect(),
    )
}

/// Modal parameters of `K` modes sharing channel counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalParams {
    pub modes: Vec<Mode>,
}

impl ModalParams {
    pub fn n_y(&self) -> usize {
        self.modes.first().map_or(0, |m| m.psi_l.len())
    }
    pub fn n_u(&self) -> usize {
        self.modes.first().map_or(0, |m| m.psi_r.len())
    }

    /// Stacks `[xi, omega, psi_l, psi_r]` per mode.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = Vec::new();
        for m in &self.modes {
            v.push(m.xi);
            v.push(m.omega);
            v.extend(&m.psi_l);
            v.extend(&m.psi_r);
        }
        DVector::from_vec(v)
    }

    pub fn from_vector(v: &DVector<f64>, n_y: usize, n_u: usize) -> Result<Self> {
        let per = 2 + n_y + n_u;
        if !v.len().is_multiple_of(per) {
            return Err(Error::DimMismatch(format!(
                "modal vector length {} is not a multiple of {per}",
                v.len()
            )));
        }
        let modes = v
            .as_slice()
            .chunks(per)
            .map(|c| Mode {
                xi: c[0],
                omega: c[1],
                psi_l: c[2..2 + n_y].to_vec(),
                psi_r: c[2 + n_y..].to_vec(),
            })
            .collect();
        Ok(Self { modes })
    }

    pub fn normalized(&self) -> Self {
        Self {
            modes: self.modes.iter().map(Mode::normalized).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n_y, n_u) = (self.n_y(), self.n_u());
        for (i, m) in self.modes.iter().enumerate() {
            if m.psi_l.len() != n_y || m.psi_r.len() != n_u {
                return Err(Error::DimMismatch(format!(
                    "mode {i} has inconsistent shape vectors"
                )));
            }
            if !(m.omega > 0.0) || !(m.xi > 0.0 && m.xi < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "mode {i} needs omega > 0 and 0 < xi < 1"
                )));
            }
        }
        Ok(())
    }
}

fn mode_subsystem(m: &Mode) -> Subsystem {
    let (n_y, n_u) = (m.psi_l.len(), m.psi_r.len());
    let b0 = DMatrix::from_fn(n_y, n_u, |r, c| m.psi_l[r] * m.psi_r[c]);
    let den = ScalarPoly::denominator(&[2.0 * m.xi / m.omega, 1.0 / (m.omega * m.omega)]);
    Subsystem::new(den, MatrixPoly::constant(b0))
        .expect("second-order mode with constant numerator")
}

/// `a_1 = 2 xi / w`, `a_2 = 1 / w^2`, `B_0 = psi_l psi_r^T` per mode.
pub fn modal_eval(rho: &ModalParams) -> AdditiveModel {
    AdditiveModel::from_subsystems_unchecked(rho.modes.iter().map(mode_subsystem).collect())
        .expect("modes share channel counts")
}

/// Analytic `d beta / d rho`; cross-mode blocks are zero.
pub fn modal_jacobian(rho: &ModalParams) -> DMatrix<f64> {
    let (n_y, n_u) = (rho.n_y(), rho.n_u());
    let nb = 2 + n_y * n_u;
    let nr = 2 + n_y + n_u;
    let k = rho.modes.len();
    let mut j = DMatrix::zeros(k * nb, k * nr);
    for (i, m) in rho.modes.iter().enumerate() {
        let (r0, c0) = (i * nb, i * nr);
        let w = m.omega;
        j[(r0, c0)] = 2.0 / w;
        j[(r0, c0 + 1)] = -2.0 * m.xi / (w * w);
        j[(r0 + 1, c0 + 1)] = -2.0 / (w * w * w);
        let pl = DVector::from_column_slice(&m.psi_l);
        let pr = DVector::from_column_slice(&m.psi_r);
        j.view_mut((r0 + 2, c0 + 2), (n_y * n_u, n_y))
            .copy_from(&kron_vec_identity(&pr, n_y));
        j.view_mut((r0 + 2, c0 + 2 + n_y), (n_y * n_u, n_u))
            .copy_from(&kron_identity_vec(n_u, &pl));
    }
    j
}

/// Reads modal parameters off an unstructured estimate: the denominator
/// gives `(xi, w)`, the dominant singular triple of `B_0` the mode shapes.
pub fn modal_init(model: &AdditiveModel) -> Result<ModalParams> {
    let mut modes = Vec::with_capacity(model.k());
    for (i, s) in model.subsystems().iter().enumerate() {
        if s.n() != 2 || s.m() != 0 {
            return Err(Error::InvalidModel(format!(
                "subsystem {i} is not a second-order mode with constant numerator"
            )));
        }
        let b0 = &s.num().coeffs()[0];
        if b0.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateMode(i));
        }
        let (a1, a2) = (s.den().coeff(1), s.den().coeff(2));
        if !(a1 > 0.0 && a2 > 0.0) {
            return Err(Error::UnstableMode(i));
        }
        if a1 * a1 >= 4.0 * a2 {
            return Err(Error::NotOscillatory(i));
        }
        let omega = 1.0 / a2.sqrt();
        let xi = a1 * omega / 2.0;
        let svd = b0.clone().svd(true, true);
        let u = svd.u.as_ref().expect("requested");
        let vt = svd.v_t.as_ref().expect("requested");
        let top = svd.singular_values.imax();
        let sigma = svd.singular_values[top];
        let psi_l: Vec<f64> = u.column(top).iter().map(|v| v * sigma).collect();
        let psi_r: Vec<f64> = vt.row(top).iter().copied().collect();
        modes.push(
            Mode {
                xi,
                omega,
                psi_l,
                psi_r,
            }
            .normalized(),
        );
    }
    Ok(ModalParams { modes })
}

/// The modal chart as a [`ParameterMap`] for `K` modes of an `n_y x n_u` plant.
#[derive(Debug, Clone, Copy)]
pub struct ModalMap {
    pub n_y: usize,
    pub n_u: usize,
    pub k: usize,
}

impl ModalMap {
    pub fn new(n_y: usize, n_u: usize, k: usize) -> Self {
        Self { n_y, n_u, k }
    }
    fn per_mode(&self) -> usize {
        2 + self.n_y + self.n_u
    }
    fn params(&self, rho: &DVector<f64>) -> ModalParams {
        ModalParams::from_vector(rho, self.n_y, self.n_u).expect("rho sized by dim_rho")
    }
}

impl ParameterMap for ModalMap {
    fn name(&self) -> &str {
        "modal"
    }
    fn dim_rho(&self) -> usize {
        self.k * self.per_mode()
    }
    fn dim_beta(&self) -> usize {
        self.k * (2 + self.n_y * self.n_u)
    }
    fn eval(&self, rho: &DVector<f64>) -> DVector<f64> {
        let p = self.params(rho);
        let mut beta = Vec::with_capacity(self.dim_beta());
        for m in &p.modes {
            beta.push(2.0 * m.xi / m.omega);
            beta.push(1.0 / (m.omega * m.omega));
            for c in 0..self.n_u {
                for r in 0..self.n_y {
                    beta.push(m.psi_l[r] * m.psi_r[c]);
                }
            }
        }
        DVector::from_vec(beta)
    }
    fn jacobian(&self, rho: &DVector<f64>) -> DMatrix<f64> {
        modal_jacobian(&self.params(rho))
    }
    fn gauge_dim(&self) -> usize {
        self.k
    }
    fn normalize(&self, rho: &DVector<f64>) -> DVector<f64> {
        self.params(rho).normalized().to_vector()
    }
    fn normalization_jacobian(&self, rho: &DVector<f64>) -> DMatrix<f64> {
        let (ny, nu, per) = (self.n_y, self.n_u, self.per_mode());
        let mut n = DMatrix::identity(rho.len(), rho.len());
        for i in 0..self.k {
            let o = i * per;
            let l = rho.rows(o + 2, ny).into_owned();
            let r = rho.rows(o + 2 + ny, nu).into_owned();
            let s = gauge_scale(r.as_slice());
            if s == 0.0 {
                continue;
            }
            // d s / d psi_r = s psi_r^T / ||psi_r||^2
            let ds = r.transpose() * (s / r.norm_squared());
            n.view_mut((o + 2, o + 2), (ny, ny))
                .copy_from(&(DMatrix::identity(ny, ny) * s));
            n.view_mut((o + 2, o + 2 + ny), (ny, nu))
                .copy_from(&(&l * &ds));
            let dr = DMatrix::identity(nu, nu) / s - &r * &ds / (s * s);
            n.view_mut((o + 2 + ny, o + 2 + ny), (nu, nu))
                .copy_from(&dr);
        }
        n
    }
}

/// Structured-result document: the modes plus covariance, cost and status.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModalProjection {
    pub modes: Vec<Mode>,
    pub ps: Vec<Vec<f64>>,
    pub cost: f64,
    pub converged: bool,
}

impl ModalProjection {
    pub fn new(result: &super::ProjectionResult, n_y: usize, n_u: usize) -> Result<Self> {
        Ok(Self {
            modes: ModalParams::from_vector(&result.rho(), n_y, n_u)?.modes,
            ps: result.ps.clone(),
            cost: result.cost,
            converged: result.converged,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModalParams {
        ModalParams {
            modes: vec![
                Mode {
                    xi: 0.05,
                    omega: 2.0,
                    psi_l: vec![2.0, 1.0],
                    psi_r: vec![0.6, 0.8],
                },
                Mode {
                    xi: 0.1,
                    omega: 5.0,
                    psi_l: vec![-0.5, 1.5],
                    psi_r: vec![0.8, -0.6],
                },
            ],
        }
    }

    #[test]
    fn unit_mode() {
        let p = ModalParams {
            modes: vec![Mode {
                xi: 0.5,
                omega: 1.0,
                psi_l: vec![1.0, 0.0],
                psi_r: vec![1.0, 0.0],
            }],
        };
        let m = modal_eval(&p);
        assert_eq!(m.subsystems()[0].den().coeffs(), &[1.0, 1.0, 1.0]);
        assert_eq!(
            m.subsystems()[0].num().coeffs()[0],
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])
        );
    }

    #[test]
    fn outer_product_is_rank_one() {
        let s5 = 5f64.sqrt();
        let p = ModalParams {
            modes: vec![Mode {
                xi: 0.1,
                omega: 1.0,
                psi_l: vec![2.0, 1.0],
                psi_r: vec![1.0 / s5, 2.0 / s5],
            }],
        };
        let b0 = modal_eval(&p).subsystems()[0].num().coeffs()[0].clone();
        let expect = DMatrix::from_row_slice(2, 2, &[2.0, 4.0, 1.0, 2.0]) / s5;
        assert!((&b0 - expect).amax() < 1e-15);
        assert_eq!(crate::linalg::rank(&b0, 1e-12), 1);
    }

    #[test]
    fn second_coefficient_is_inverse_squared_frequency() {
        let w = (1.0f64 / 0.101).sqrt();
        let p = ModalParams {
            modes: vec![Mode {
                xi: 0.02,
                omega: w,
                psi_l: vec![1.0],
                psi_r: vec![1.0],
            }],
        };
        assert!((modal_eval(&p).subsystems()[0].den().coeff(2) - 0.101).abs() < 1e-15);
    }

    #[test]
    fn init_inverts_eval() {
        let p = sample().normalized();
        let back = modal_init(&modal_eval(&p)).unwrap();
        assert!((back.to_vector() - p.to_vector()).amax() < 1e-12);
    }

    #[test]
    fn init_from_coefficients() {
        let m = AdditiveModel::new(vec![Subsystem::new(
            ScalarPoly::denominator(&[0.012712, 0.101]),
            MatrixPoly::constant(DMatrix::from_element(1, 1, 1.0)),
        )
        .unwrap()])
        .unwrap();
        let p = modal_init(&m).unwrap();
        assert!((p.modes[0].omega - 3.1466).abs() < 1e-4);
        assert!((p.modes[0].xi - 0.0200).abs() < 1e-4);
    }

    #[test]
    fn init_errors() {
        let real = AdditiveModel::new(vec![Subsystem::new(
            ScalarPoly::denominator(&[3.0, 1.0]),
            MatrixPoly::constant(DMatrix::from_element(1, 1, 1.0)),
        )
        .unwrap()])
        .unwrap();
        assert_eq!(modal_init(&real).unwrap_err().code(), "NOT_OSCILLATORY");
        let zero = AdditiveModel::new(vec![Subsystem::new(
            ScalarPoly::denominator(&[0.1, 1.0]),
            MatrixPoly::constant(DMatrix::zeros(1, 1)),
        )
        .unwrap()])
        .unwrap();
        assert_eq!(modal_init(&zero).unwrap_err().code(), "DEGENERATE_MODE");
    }

    #[test]
    fn gauge_invariance_and_normalization() {
        let map = ModalMap::new(2, 2, 2);
        let mut p = sample();
        p.modes[0].psi_l.iter_mut().for_each(|v| *v *= -3.0);
        p.modes[0].psi_r.iter_mut().for_each(|v| *v /= -3.0);
        let v = p.to_vector();
        assert!((map.eval(&v) - map.eval(&sample().to_vector())).amax() < 1e-15);
        let n = map.normalize(&v);
        assert!((n - sample().normalized().to_vector()).amax() < 1e-15);
    }

    #[test]
    fn map_eval_matches_model_flatten() {
        let p = sample();
        let map = ModalMap::new(2, 2, 2);
        assert!((map.eval(&p.to_vector()) - modal_eval(&p).flatten()).amax() < 1e-15);
    }

    #[test]
    fn omega_column_at_zero_damping() {
        let mut p = sample();
        p.modes[0].xi = 0.0;
        assert_eq!(modal_jacobian(&p)[(0, 1)], 0.0);
    }
}
