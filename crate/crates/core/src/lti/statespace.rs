//! State-space realizations, exact ZOH discretization and discrete simulation.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use super::poly::ScalarPoly;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Continuous,
    /// Discrete time with sampling interval `h` seconds.
    Discrete {
        h: f64,
    },
}

/// `x' = A x + B u, y = C x + D u` (continuous) or the shift-operator analogue.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    domain: Domain,
}

impl StateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        domain: Domain,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n {
            return Err(Error::DimMismatch(format!(
                "state matrices inconsistent: A {:?}, B {:?}, C {:?}",
                a.shape(),
                b.shape(),
                c.shape()
            )));
        }
        if d.shape() != (c.nrows(), b.ncols()) {
            return Err(Error::DimMismatch(format!(
                "feedthrough is {:?}, expected {:?}",
                d.shape(),
                (c.nrows(), b.ncols())
            )));
        }
        if let Domain::Discrete { h } = domain {
            if !(h > 0.0) {
                return Err(Error::InvalidArgument("discrete systems need h > 0".into()));
            }
        }
        Ok(Self { a, b, c, d, domain })
    }

    /// A pure gain with no states.
    pub fn static_gain(d: DMatrix<f64>, domain: Domain) -> Self {
        let (p, m) = d.shape();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(p, 0),
            d,
            domain,
        }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn step(&self) -> Option<f64> {
        match self.domain {
            Domain::Discrete { h } => Some(h),
            Domain::Continuous => None,
        }
    }

    /// Transfer matrix at `s` (continuous) or `z` (discrete):
    /// `C (sI - A)^{-1} B + D`.
    pub fn transfer_at(&self, s: Complex<f64>) -> DMatrix<Complex<f64>> {
        let cplx = |m: &DMatrix<f64>| m.map(|x| Complex::new(x, 0.0));
        let d = cplx(&self.d);
        if self.n_states() == 0 {
            return d;
        }
        let n = self.n_states();
        let si_a = DMatrix::<Complex<f64>>::identity(n, n) * s - cplx(&self.a);
        let x = si_a.lu().solve(&cplx(&self.b)).unwrap_or_else(|| {
            DMatrix::from_element(n, self.n_inputs(), Complex::new(f64::NAN, 0.0))
        });
        cplx(&self.c) * x + d
    }

    /// Frequency response at `omega` rad/s, using `z = exp(j omega h)` for
    /// discrete systems.
    pub fn freq_response(&self, omega: f64) -> DMatrix<Complex<f64>> {
        let s = match self.domain {
            Domain::Continuous => Complex::new(0.0, omega),
            Domain::Discrete { h } => Complex::new(0.0, omega * h).exp(),
        };
        self.transfer_at(s)
    }

    /// Simulates a discrete system from zero initial state. `u` holds one
    /// sample per row and one input channel per column.
    pub fn simulate(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if self.step().is_none() {
            return Err(Error::InvalidArgument(
                "only discrete systems can be simulated sample-wise".into(),
            ));
        }
        if u.ncols() != self.n_inputs() {
            return Err(Error::DimMismatch(format!(
                "input has {} channels, system expects {}",
                u.ncols(),
                self.n_inputs()
            )));
        }
        Ok(self.simulate_unchecked(u))
    }

    pub(crate) fn simulate_unchecked(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, m, p) = (self.n_states(), self.n_inputs(), self.n_outputs());
        let big_n = u.nrows();
        let mut y = DMatrix::zeros(big_n, p);
        let mut x = vec![0.0; n];
        let mut xn = vec![0.0; n];
        let mut uk = vec![0.0; m];
        for k in 0..big_n {
            for j in 0..m {
                uk[j] = u[(k, j)];
            }
            for r in 0..p {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += self.c[(r, j)] * x[j];
                }
                for j in 0..m {
                    acc += self.d[(r, j)] * uk[j];
                }
                y[(k, r)] = acc;
            }
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += self.a[(i, j)] * x[j];
                }
                for j in 0..m {
                    acc += self.b[(i, j)] * uk[j];
                }
                xn[i] = acc;
            }
            std::mem::swap(&mut x, &mut xn);
        }
        y
    }

    /// Block-diagonal (parallel, separate channels) composition.
    pub fn block_diag(parts: &[StateSpace]) -> Result<StateSpace> {
        let domain = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to compose".into()))?
            .domain;
        if parts.iter().any(|p| p.domain != domain) {
            return Err(Error::InvalidArgument("mixed time domains".into()));
        }
        let n: usize = parts.iter().map(|p| p.n_states()).sum();
        let m: usize = parts.iter().map(|p| p.n_inputs()).sum();
        let q: usize = parts.iter().map(|p| p.n_outputs()).sum();
        let (mut a, mut b, mut c, mut d) = (
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, m),
            DMatrix::zeros(q, n),
            DMatrix::zeros(q, m),
        );
        let (mut sn, mut sm, mut sq) = (0, 0, 0);
        for p in parts {
            let (pn, pm, pq) = (p.n_states(), p.n_inputs(), p.n_outputs());
            a.view_mut((sn, sn), (pn, pn)).copy_from(&p.a);
            b.view_mut((sn, sm), (pn, pm)).copy_from(&p.b);
            c.view_mut((sq, sn), (pq, pn)).copy_from(&p.c);
            d.view_mut((sq, sm), (pq, pm)).copy_from(&p.d);
            sn += pn;
            sm += pm;
            sq += pq;
        }
        StateSpace::new(a, b, c, d, domain)
    }

    /// Spectral radius of `A` (discrete stability measure).
    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.a)
    }
}

/// Controllable canonical realization of `num(p) / den(p)` in the
/// unit-constant convention. States are `w, p w, ..., p^{n-1} w` with
/// `w = u / den(p)`, so the realization order equals `deg(den)`.
pub fn siso_tf_to_ss(num: &ScalarPoly, den: &ScalarPoly) -> Result<StateSpace> {
    let n = den.degree();
    if num.degree() > n {
        return Err(Error::ImproperFilter {
            num: num.degree(),
            den: n,
        });
    }
    if den.coeff(n) == 0.0 || (n == 0 && den.coeff(0) == 0.0) {
        return Err(Error::InvalidArgument("zero denominator".into()));
    }
    if n == 0 {
        let g = num.coeff(0) / den.coeff(0);
        return Ok(StateSpace::static_gain(
            DMatrix::from_element(1, 1, g),
            Domain::Continuous,
        ));
    }
    let lead = den.coeff(n);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -den.coeff(j) / lead;
    }
    let mut b = DMatrix::zeros(n, 1);
    b[(n - 1, 0)] = 1.0 / lead;
    // p^n w = (u - sum_j den_j p^j w) / lead, folded into C and D for biproper
    let bn = num.coeff(n);
    let mut c = DMatrix::zeros(1, n);
    for j in 0..n {
        c[(0, j)] = num.coeff(j) - bn * den.coeff(j) / lead;
    }
    let d = DMatrix::from_element(1, 1, bn / lead);
    StateSpace::new(a, b, c, d, Domain::Continuous)
}

/// Exact zero-order-hold discretization through one exponential of the
/// augmented matrix `[[A, B], [0, 0]] h`.
pub fn zoh_discretize(ss: &StateSpace, h: f64) -> Result<StateSpace> {
    if ss.domain != Domain::Continuous {
        return Err(Error::InvalidArgument("system is already discrete".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(
            "sampling interval must be positive".into(),
        ));
    }
    let (n, m) = (ss.n_states(), ss.n_inputs());
    if n == 0 {
        return StateSpace::new(
            ss.a.clone(),
            ss.b.clone(),
            ss.c.clone(),
            ss.d.clone(),
            Domain::Discrete { h },
        );
    }
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&ss.a * h));
    aug.view_mut((0, n), (n, m)).copy_from(&(&ss.b * h));
    let e = aug.exp();
    StateSpace::new(
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
        ss.c.clone(),
        ss.d.clone(),
        Domain::Discrete { h },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ct(a: f64, b: f64) -> StateSpace {
        StateSpace::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            Domain::Continuous,
        )
        .unwrap()
    }

    #[test]
    fn first_order_realization() {
        let ss = siso_tf_to_ss(&ScalarPoly::one(), &ScalarPoly::new(vec![1.0, 1.0])).unwrap();
        assert_eq!(ss.a()[(0, 0)], -1.0);
        assert_eq!(ss.b()[(0, 0)], 1.0);
        assert_eq!(ss.c()[(0, 0)], 1.0);
        assert_eq!(ss.d()[(0, 0)], 0.0);
    }

    #[test]
    fn biproper_identity() {
        let p = ScalarPoly::new(vec![1.0, 1.0]);
        let ss = siso_tf_to_ss(&p, &p).unwrap();
        assert_eq!(ss.d()[(0, 0)], 1.0);
        assert_eq!(ss.c()[(0, 0)], 0.0);
        let g = ss.transfer_at(Complex::new(0.3, 2.0));
        assert!((g[(0, 0)] - Complex::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn improper_rejected() {
        let err = siso_tf_to_ss(
            &ScalarPoly::new(vec![0.0, 0.0, 1.0]),
            &ScalarPoly::new(vec![1.0, 1.0]),
        )
        .unwrap_err();
        assert_eq!(err.code(), "IMPROPER_FILTER");
    }

    #[test]
    fn bandpass_matches_rational_evaluation() {
        let num = ScalarPoly::new(vec![0.0, 1.0]);
        let den = ScalarPoly::new(vec![1.0, 0.1, 0.01]);
        let ss = siso_tf_to_ss(&num, &den).unwrap();
        for w in [0.1, 1.0, 10.0] {
            let s = Complex::new(0.0, w);
            let expected = num.eval(s) / den.eval(s);
            let got = ss.transfer_at(s)[(0, 0)];
            assert!((got - expected).norm() <= 1e-9 * expected.norm());
        }
    }

    #[test]
    fn zoh_integrator() {
        let d = zoh_discretize(&ct(0.0, 1.0), 0.5).unwrap();
        assert!((d.a()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((d.b()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zoh_first_order_closed_form() {
        let d = zoh_discretize(&ct(-1.0, 1.0), 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((d.a()[(0, 0)] - e).abs() < 1e-15);
        assert!((d.b()[(0, 0)] - (1.0 - e)).abs() < 1e-15);
    }

    #[test]
    fn zoh_preserves_dc_gain() {
        let ss = siso_tf_to_ss(
            &ScalarPoly::new(vec![2.0, 0.3]),
            &ScalarPoly::new(vec![1.0, 0.4, 0.05]),
        )
        .unwrap();
        let d = zoh_discretize(&ss, 0.01).unwrap();
        let g = d.transfer_at(Complex::new(1.0, 0.0))[(0, 0)];
        assert!((g.re - 2.0).abs() < 1e-9 && g.im.abs() < 1e-9);
    }

    #[test]
    fn static_gain_simulation() {
        let g = StateSpace::static_gain(
            DMatrix::from_element(1, 1, 2.0),
            Domain::Discrete { h: 1.0 },
        );
        let u = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let y = g.simulate(&u).unwrap();
        assert_eq!(y.as_slice(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn dimension_checks() {
        assert!(StateSpace::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
            Domain::Continuous
        )
        .is_err());
        assert!(StateSpace::new(
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            Domain::Discrete { h: 0.0 }
        )
        .is_err());
    }
}
