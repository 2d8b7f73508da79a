//! Continuous-time filters applied to sampled signals.
//!
//! A sampled signal is held constant between samples (ZOH), passed through
//! the continuous-time filter and read back at the sampling instants. With a
//! controllable canonical realization this is exact: discretize once, then
//! run the discrete recursion from rest.

use nalgebra::DMatrix;

use super::poly::ScalarPoly;
use super::statespace::{siso_tf_to_ss, zoh_discretize};
use crate::error::{Error, Result};

/// Applies `f_num(p) / f_den(p)` to every column of `x` (one channel per
/// column, one sample per row) with step `h`, from zero initial state.
pub fn filter_sampled(
    f_num: &ScalarPoly,
    f_den: &ScalarPoly,
    x: &DMatrix<f64>,
    h: f64,
) -> Result<DMatrix<f64>> {
    let ct = siso_tf_to_ss(f_num, f_den)?;
    let dt = zoh_discretize(&ct, h)?;
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for ch in 0..x.ncols() {
        let col = x.column(ch).into_owned();
        let y = dt.simulate_unchecked(&DMatrix::from_column_slice(col.len(), 1, col.as_slice()));
        out.column_mut(ch).copy_from(&y.column(0));
    }
    Ok(out)
}

/// All state derivatives of `1 / den(p)` driven by a ZOH signal.
///
/// For input `x`, column `j` of [`DerivativeBank::apply`] holds
/// `p^j / den(p) x` sampled on the grid, for `j = 0..=deg(den)`. Every proper
/// filter with this denominator is a linear combination of these columns.
#[derive(Debug, Clone)]
pub struct DerivativeBank {
    den: Vec<f64>,
    phi: Vec<f64>,
    gamma: Vec<f64>,
    n: usize,
}

impl DerivativeBank {
    pub fn new(den: &ScalarPoly, h: f64) -> Result<Self> {
        let n = den.degree();
        if den.coeff(n) == 0.0 {
            return Err(Error::InvalidArgument("zero denominator".into()));
        }
        if n == 0 {
            return Ok(Self {
                den: den.coeffs().to_vec(),
                phi: vec![],
                gamma: vec![],
                n,
            });
        }
        let dt = zoh_discretize(&siso_tf_to_ss(&ScalarPoly::one(), den)?, h)?;
        let mut phi = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                phi[i * n + j] = dt.a()[(i, j)];
            }
        }
        let gamma = (0..n).map(|i| dt.b()[(i, 0)]).collect();
        Ok(Self {
            den: den.coeffs().to_vec(),
            phi,
            gamma,
            n,
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Returns an `N x (n + 1)` matrix of filtered derivatives.
    pub fn apply(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let big_n = x.len();
        let mut out = DMatrix::zeros(big_n, n + 1);
        if n == 0 {
            let g = 1.0 / self.den[0];
            for (k, &xk) in x.iter().enumerate() {
                out[(k, 0)] = g * xk;
            }
            return out;
        }
        let lead = self.den[n];
        let mut s = vec![0.0; n];
        let mut sn = vec![0.0; n];
        let data = out.as_mut_slice();
        for (k, &xk) in x.iter().enumerate() {
            let mut top = xk;
            for j in 0..n {
                data[j * big_n + k] = s[j];
                top -= self.den[j] * s[j];
            }
            data[n * big_n + k] = top / lead;
            for i in 0..n {
                let row = &self.phi[i * n..(i + 1) * n];
                let mut acc = self.gamma[i] * xk;
                for j in 0..n {
                    acc += row[j] * s[j];
                }
                sn[i] = acc;
            }
            std::mem::swap(&mut s, &mut sn);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passthrough() {
        let x = DMatrix::from_fn(20, 2, |i, j| (i as f64 * 0.3 + j as f64).sin());
        let y = filter_sampled(&ScalarPoly::one(), &ScalarPoly::one(), &x, 0.1).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn first_order_step_response() {
        let x = DMatrix::from_element(30, 1, 1.0);
        let y = filter_sampled(
            &ScalarPoly::one(),
            &ScalarPoly::new(vec![1.0, 1.0]),
            &x,
            1.0,
        )
        .unwrap();
        for k in 0..30 {
            let expected = 1.0 - (-(k as f64)).exp();
            assert!((y[(k, 0)] - expected).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn derivative_of_constant_decays_geometrically() {
        let h = 0.2;
        let x = DMatrix::from_element(40, 1, 3.0);
        let y = filter_sampled(
            &ScalarPoly::new(vec![0.0, 1.0]),
            &ScalarPoly::new(vec![1.0, 1.0]),
            &x,
            h,
        )
        .unwrap();
        assert!((y[(0, 0)] - 3.0).abs() < 1e-14);
        for k in 1..40 {
            assert!((y[(k, 0)] / y[(k - 1, 0)] - (-h).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn bank_matches_filter_sampled() {
        let den = ScalarPoly::new(vec![1.0, 0.3, 0.04, 0.002]);
        let h = 0.05;
        let x: Vec<f64> = (0..200).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
        let bank = DerivativeBank::new(&den, h).unwrap().apply(&x);
        let xm = DMatrix::from_column_slice(x.len(), 1, &x);
        for j in 0..=3 {
            let mut num = vec![0.0; j + 1];
            num[j] = 1.0;
            let y = filter_sampled(&ScalarPoly::new(num), &den, &xm, h).unwrap();
            let scale = y.amax().max(1.0);
            for k in 0..x.len() {
                assert!((y[(k, 0)] - bank[(k, j)]).abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn improper_filter_rejected() {
        let x = DMatrix::zeros(4, 1);
        let e = filter_sampled(
            &ScalarPoly::new(vec![0.0, 1.0]),
            &ScalarPoly::one(),
            &x,
            0.1,
        )
        .unwrap_err();
        assert_eq!(e.code(), "IMPROPER_FILTER");
    }
}
