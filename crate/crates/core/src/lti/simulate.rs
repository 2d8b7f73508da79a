//! Simulation, ZOH equivalents and frequency responses of additive models.

use nalgebra::{Complex, DMatrix};

use super::filter::DerivativeBank;
use super::model::{AdditiveModel, Subsystem};
use super::statespace::{zoh_discretize, Domain, StateSpace};
use crate::error::{Error, Result};

/// Noise-free output `sum_i G_i(p) u(t_k)` from zero initial conditions.
pub fn simulate_additive(model: &AdditiveModel, u: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    if u.ncols() != model.n_u() {
        return Err(Error::DimMismatch(format!(
            "input has {} channels, model expects {}",
            u.ncols(),
            model.n_u()
        )));
    }
    let mut y = DMatrix::zeros(u.nrows(), model.n_y());
    for s in model.subsystems() {
        y += simulate_subsystem(s, u, h)?;
    }
    Ok(y)
}

/// Output of a single subsystem driven by `u`.
pub fn simulate_subsystem(s: &Subsystem, u: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    let bank = DerivativeBank::new(s.den(), h)?;
    let mut y = DMatrix::zeros(u.nrows(), s.num().n_y());
    for c in 0..u.ncols() {
        let derivs = bank.apply(u.column(c).as_slice());
        accumulate_numerator(&mut y, s, c, &derivs, 0);
    }
    Ok(y)
}

/// Adds `sum_l B_l[:, c] * derivs[:, l + shift]` to `y`.
pub(crate) fn accumulate_numerator(
    y: &mut DMatrix<f64>,
    s: &Subsystem,
    c: usize,
    derivs: &DMatrix<f64>,
    shift: usize,
) {
    for (l, bl) in s.num().coeffs().iter().enumerate() {
        let col = derivs.column(l + shift);
        for r in 0..y.ncols() {
            let g = bl[(r, c)];
            if g != 0.0 {
                y.column_mut(r).axpy(g, &col, 1.0);
            }
        }
    }
}

/// Continuous-time realization of one subsystem: `n_u` copies of the
/// controllable chain of `1 / A_i(p)`, one per input channel.
pub fn subsystem_realization(s: &Subsystem) -> StateSpace {
    let (n, n_u, n_y) = (s.n(), s.num().n_u(), s.num().n_y());
    let den = s.den();
    let lead = den.coeff(n);
    let nx = n * n_u;
    let mut a = DMatrix::zeros(nx, nx);
    let mut b = DMatrix::zeros(nx, n_u);
    let mut c = DMatrix::zeros(n_y, nx);
    let top = if s.is_biproper() {
        Some(&s.num().coeffs()[n])
    } else {
        None
    };
    for ch in 0..n_u {
        let o = ch * n;
        for i in 0..n.saturating_sub(1) {
            a[(o + i, o + i + 1)] = 1.0;
        }
        if n > 0 {
            for j in 0..n {
                a[(o + n - 1, o + j)] = -den.coeff(j) / lead;
            }
            b[(o + n - 1, ch)] = 1.0 / lead;
        }
        for j in 0..n {
            for r in 0..n_y {
                let mut v = s.num().coeffs().get(j).map_or(0.0, |bj| bj[(r, ch)]);
                if let Some(bn) = top {
                    v -= bn[(r, ch)] * den.coeff(j) / lead;
                }
                c[(r, o + j)] = v;
            }
        }
    }
    let d = match top {
        Some(bn) => bn / lead,
        None => DMatrix::zeros(n_y, n_u),
    };
    StateSpace::new(a, b, c, d, Domain::Continuous).expect("consistent by construction")
}

/// Continuous-time realization of the whole additive model (parallel
/// connection of the subsystem realizations).
pub fn model_realization(model: &AdditiveModel) -> StateSpace {
    let parts: Vec<_> = model
        .subsystems()
        .iter()
        .map(subsystem_realization)
        .collect();
    let nx: usize = parts.iter().map(StateSpace::n_states).sum();
    let (n_u, n_y) = (model.n_u(), model.n_y());
    let mut a = DMatrix::zeros(nx, nx);
    let mut b = DMatrix::zeros(nx, n_u);
    let mut c = DMatrix::zeros(n_y, nx);
    let mut d = DMatrix::zeros(n_y, n_u);
    let mut o = 0;
    for p in &parts {
        let k = p.n_states();
        a.view_mut((o, o), (k, k)).copy_from(p.a());
        b.view_mut((o, 0), (k, n_u)).copy_from(p.b());
        c.view_mut((0, o), (n_y, k)).copy_from(p.c());
        d += p.d();
        o += k;
    }
    StateSpace::new(a, b, c, d, Domain::Continuous).expect("consistent by construction")
}

/// Discrete-time ZOH equivalent of the total plant `sum_i G_i(p)`.
pub fn zoh_equivalent_dtf(model: &AdditiveModel, h: f64) -> Result<StateSpace> {
    zoh_discretize(&model_realization(model), h)
}

/// `sum_i B_i(j w) / A_i(j w)` at each frequency.
pub fn freq_response(model: &AdditiveModel, omegas: &[f64]) -> Vec<DMatrix<Complex<f64>>> {
    omegas
        .iter()
        .map(|&w| {
            let s = Complex::new(0.0, w);
            model
                .subsystems()
                .iter()
                .fold(DMatrix::zeros(model.n_y(), model.n_u()), |acc, sub| {
                    acc + sub.eval(s)
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::model::MatrixPoly;
    use crate::lti::poly::ScalarPoly;

    fn gain(g: f64, n: usize) -> Subsystem {
        Subsystem::new(
            ScalarPoly::one(),
            MatrixPoly::constant(DMatrix::identity(n, n) * g),
        )
        .unwrap()
    }

    #[test]
    fn identity_gain_passes_input() {
        let m = AdditiveModel::new(vec![gain(1.0, 2)]).unwrap();
        let u = DMatrix::from_fn(10, 2, |i, j| (i * 3 + j) as f64);
        assert_eq!(simulate_additive(&m, &u, 0.1).unwrap(), u);
    }

    #[test]
    fn additivity_of_half_gains() {
        let m = AdditiveModel::from_subsystems_unchecked(vec![gain(0.5, 2), gain(0.5, 2)]).unwrap();
        let u = DMatrix::from_fn(10, 2, |i, j| (i * 3 + j) as f64);
        assert_eq!(simulate_additive(&m, &u, 0.1).unwrap(), u);
    }

    #[test]
    fn channel_mismatch() {
        let m = AdditiveModel::new(vec![gain(1.0, 2)]).unwrap();
        let e = simulate_additive(&m, &DMatrix::zeros(5, 3), 0.1).unwrap_err();
        assert_eq!(e.code(), "DIM_MISMATCH");
    }

    #[test]
    fn static_model_equivalent_has_no_states() {
        let m = AdditiveModel::new(vec![gain(2.0, 2)]).unwrap();
        let d = zoh_equivalent_dtf(&m, 0.1).unwrap();
        assert_eq!(d.n_states(), 0);
        assert_eq!(d.d(), &(DMatrix::identity(2, 2) * 2.0));
        let fr = freq_response(&m, &[0.1, 10.0]);
        assert_eq!(fr[0], fr[1]);
    }

    #[test]
    fn first_order_pole() {
        let s = Subsystem::new(
            ScalarPoly::new(vec![1.0, 1.0]),
            MatrixPoly::constant(DMatrix::identity(1, 1)),
        )
        .unwrap();
        let d = zoh_equivalent_dtf(&AdditiveModel::new(vec![s]).unwrap(), 1.0).unwrap();
        assert!((d.a()[(0, 0)] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn resonance_peak_scales_with_inverse_damping() {
        for xi in [1e-2, 1e-3, 1e-4] {
            let w0 = 2.0;
            let s = Subsystem::new(
                ScalarPoly::denominator(&[2.0 * xi / w0, 1.0 / (w0 * w0)]),
                MatrixPoly::constant(DMatrix::identity(1, 1)),
            )
            .unwrap();
            let g = freq_response(&AdditiveModel::new(vec![s]).unwrap(), &[w0]);
            assert!((g[0][(0, 0)].norm() * 2.0 * xi - 1.0).abs() < 1e-12);
        }
    }
}
