//! Real polynomials in the differential operator `p`.
//!
//! Coefficients are stored in ascending degree: `coeffs[k]` multiplies `p^k`.
//! Denominators follow the constant-term-one convention
//! `A(p) = 1 + a_1 p + ... + a_n p^n`.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarPoly {
    coeffs: Vec<f64>,
}

impl ScalarPoly {
    /// Builds a polynomial, trimming trailing (highest-degree) zeros. An empty
    /// slice yields the zero polynomial.
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    /// `1 + a[0] p + a[1] p^2 + ...`
    pub fn denominator(a: &[f64]) -> Self {
        let mut coeffs = Vec::with_capacity(a.len() + 1);
        coeffs.push(1.0);
        coeffs.extend_from_slice(a);
        Self::new(coeffs)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Coefficient of `p^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// True when the constant coefficient is exactly one.
    pub fn is_unit_constant(&self) -> bool {
        self.coeffs[0] == 1.0
    }

    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn mul(&self, other: &ScalarPoly) -> ScalarPoly {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        ScalarPoly::new(out)
    }

    /// Roots as eigenvalues of the companion matrix. A constant polynomial has
    /// no roots.
    pub fn roots(&self) -> Vec<Complex<f64>> {
        let n = self.degree();
        if n == 0 {
            return Vec::new();
        }
        let lead = self.coeffs[n];
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            companion[(i, n - 1)] = -self.coeffs[i] / lead;
        }
        if n == 1 {
            return vec![Complex::new(companion[(0, 0)], 0.0)];
        }
        companion.complex_eigenvalues().iter().copied().collect()
    }

    /// True iff every root has real part strictly below `-margin`.
    pub fn is_hurwitz(&self, margin: f64) -> bool {
        self.roots().iter().all(|r| r.re < -margin)
    }

    /// Largest time constant `1 / min |Re(root)|` over the roots; zero for a
    /// constant polynomial and infinite when a root sits on the imaginary axis.
    pub fn max_time_constant(&self) -> f64 {
        self.roots()
            .iter()
            .map(|r| {
                if r.re == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / r.re.abs()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Rebuilds `prod_k (1 - p / s_k)`, the unit-constant polynomial with the
    /// given roots. Conjugate pairs must be complete; zero roots are rejected.
    pub fn from_roots_unit_constant(roots: &[Complex<f64>]) -> Result<ScalarPoly> {
        let mut acc = vec![Complex::new(1.0, 0.0)];
        for &s in roots {
            if s.norm() == 0.0 {
                return Err(Error::InvalidModel(
                    "a unit-constant polynomial cannot have a root at zero".into(),
                ));
            }
            let factor = -s.inv();
            let mut next = vec![Complex::new(0.0, 0.0); acc.len() + 1];
            for (k, &c) in acc.iter().enumerate() {
                next[k] += c;
                next[k + 1] += c * factor;
            }
            acc = next;
        }
        Ok(ScalarPoly::new(
            acc.iter().map(|c| c.re).collect::<Vec<_>>(),
        ))
    }

    /// Mirrors every root with real part at or above `-margin` into the open
    /// left half-plane (real part `-max(|Re|, margin)`) and rebuilds the
    /// coefficients. Returns the polynomial and whether anything moved.
    pub fn reflect_unstable(&self, margin: f64) -> Result<(ScalarPoly, bool)> {
        let roots = self.roots();
        if roots.iter().all(|r| r.re < -margin) {
            return Ok((self.clone(), false));
        }
        let mirrored: Vec<_> = roots
            .iter()
            .map(|r| {
                if r.re < -margin {
                    *r
                } else {
                    Complex::new(-r.re.abs().max(margin), r.im)
                }
            })
            .collect();
        let rebuilt = Self::from_roots_unit_constant(&mirrored)?;
        Ok((rebuilt, true))
    }
}

/// Scale-aware root coincidence test: `|r1 - r2| < tol * (1 + |r1|)`.
pub fn roots_coincide(r1: Complex<f64>, r2: Complex<f64>, tol: f64) -> bool {
    (r1 - r2).norm() < tol * (1.0 + r1.norm())
}

/// Relative tolerance for declaring two denominators to share a root.
pub const COPRIME_TOL: f64 = 1e-6;

/// True when the two polynomials share no root within [`COPRIME_TOL`].
pub fn coprime(a: &ScalarPoly, b: &ScalarPoly) -> bool {
    let ra = a.roots();
    let rb = b.roots();
    !ra.iter()
        .any(|&x| rb.iter().any(|&y| roots_coincide(x, y, COPRIME_TOL)))
}
