//! Slow, independent reference implementations used by the test suites.
//!
//! Nothing here shares numerical code with `ctriv-core`: realizations,
//! matrix exponentials and simulations are re-derived from scratch so that
//! agreement between the two is meaningful.

use ctriv_core::{AdditiveModel, Error, Result, ScalarPoly, StateSpace};
use nalgebra::{DMatrix, DVector};

/// Central differences with step `1e-6 (1 + |x_j|)`.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let f0 = f(x);
    let mut jac = DMatrix::zeros(f0.len(), x.len());
    for j in 0..x.len() {
        let step = 1e-6 * (1.0 + x[j].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += step;
        xm[j] -= step;
        let col = (f(&xp) - f(&xm)) / (2.0 * step);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFail(format!(
                "non-finite evaluation at coordinate {j}"
            )));
        }
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// `exp(A)` by scaling and squaring around a truncated Taylor series.
pub fn expm_taylor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|v| v.abs()).sum::<f64>();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let scaled = a / 2f64.powi(s);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Observable canonical realization `(A, B, C, D)` of `num(p) / den(p)`.
pub fn observable_realization(
    num: &[f64],
    den: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64) {
    let n = den.len() - 1;
    let lead = den[n];
    let a: Vec<f64> = den.iter().map(|d| d / lead).collect();
    let mut b = vec![0.0; n + 1];
    for (i, v) in num.iter().enumerate() {
        b[i] = v / lead;
    }
    let dn = b[n];
    let mut am = DMatrix::zeros(n, n);
    let mut bm = DMatrix::zeros(n, 1);
    let mut cm = DMatrix::zeros(1, n);
    for i in 0..n {
        am[(i, 0)] = -a[n - 1 - i];
        if i + 1 < n {
            am[(i, i + 1)] = 1.0;
        }
        bm[(i, 0)] = b[n - 1 - i] - dn * a[n - 1 - i];
    }
    if n > 0 {
        cm[(0, 0)] = 1.0;
    }
    (am, bm, cm, dn)
}

/// ZOH equivalent `(Phi, Gamma)` via the exponential of `[[A, B], [0, 0]] h`.
pub fn zoh_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (a.nrows(), b.ncols());
    let mut big = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            big[(i, j)] = a[(i, j)] * h;
        }
        for j in 0..m {
            big[(i, n + j)] = b[(i, j)] * h;
        }
    }
    let e = expm_taylor(&big);
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}

/// Plain state recursion of a discrete system from rest; one sample per row.
pub fn lsim_oracle(ss: &StateSpace, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut state = DVector::zeros(ss.n_states());
    let mut out = DMatrix::zeros(x.nrows(), ss.n_outputs());
    for k in 0..x.nrows() {
        let uk = x.row(k).transpose();
        let yk = ss.c() * &state + ss.d() * &uk;
        out.set_row(k, &yk.transpose());
        state = ss.a() * &state + ss.b() * &uk;
    }
    out
}

/// ZOH-sampled response of `num(p) / den(p)` to one signal.
pub fn tf_filter_oracle(num: &[f64], den: &[f64], x: &[f64], h: f64) -> Vec<f64> {
    let (a, b, c, d) = observable_realization(num, den);
    let (phi, gam) = zoh_oracle(&a, &b, h);
    let mut s = DVector::zeros(a.nrows());
    let mut out = Vec::with_capacity(x.len());
    for &xk in x {
        out.push((&c * &s)[(0, 0)] + d * xk);
        s = &phi * &s + &gam * xk;
    }
    out
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn shift(p: &[f64], j: usize) -> Vec<f64> {
    let mut out = vec![0.0; j];
    out.extend_from_slice(p);
    out
}

/// Output of an additive model, entry by entry with SISO filters.
pub fn simulate_oracle(model: &AdditiveModel, u: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(u.nrows(), model.n_y());
    for s in model.subsystems() {
        for r in 0..model.n_y() {
            for c in 0..model.n_u() {
                let num: Vec<f64> = s.num().coeffs().iter().map(|b| b[(r, c)]).collect();
                if num.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let out = tf_filter_oracle(&num, s.den().coeffs(), u.column(c).as_slice(), h);
                for (k, v) in out.into_iter().enumerate() {
                    y[(k, r)] += v;
                }
            }
        }
    }
    y
}

/// Textbook simplified refined IV update of a single SISO transfer function
/// `B(p) / A(p)` (unit-constant `A`). Sums start at sample `skip`.
pub fn srivc_reference_step(
    den: &ScalarPoly,
    num: &[f64],
    u: &[f64],
    y: &[f64],
    h: f64,
    skip: usize,
) -> (Vec<f64>, Vec<f64>) {
    let a = den.coeffs();
    let n = a.len() - 1;
    let m = num.len() - 1;
    let a2 = poly_mul(a, a);
    let yf: Vec<Vec<f64>> = (0..=n)
        .map(|j| tf_filter_oracle(&shift(&[1.0], j), a, y, h))
        .collect();
    let uf: Vec<Vec<f64>> = (0..=m)
        .map(|l| tf_filter_oracle(&shift(&[1.0], l), a, u, h))
        .collect();
    let xf: Vec<Vec<f64>> = (1..=n)
        .map(|j| tf_filter_oracle(&shift(num, j), &a2, u, h))
        .collect();
    let d = n + m + 1;
    let mut lhs = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for k in skip..u.len() {
        let mut phi = DVector::zeros(d);
        let mut zeta = DVector::zeros(d);
        for j in 1..=n {
            phi[j - 1] = -yf[j][k];
            zeta[j - 1] = -xf[j - 1][k];
        }
        for l in 0..=m {
            phi[n + l] = uf[l][k];
            zeta[n + l] = uf[l][k];
        }
        lhs += &zeta * phi.transpose();
        rhs += &zeta * yf[0][k];
    }
    let theta = lhs
        .lu()
        .solve(&rhs)
        .expect("nonsingular SRIVC normal matrix");
    let mut den_new = vec![1.0];
    den_new.extend(theta.rows(0, n).iter());
    (den_new, theta.rows(n, m + 1).iter().copied().collect())
}

/// Numeric Fisher information `(1/N) sum_k J_k^T Sigma0^-1 J_k` of the
/// output-error residual `y - G(beta) u` at `model`, for the given input
/// record. Samples before `skip` are excluded.
pub fn fisher_numeric(
    model: &AdditiveModel,
    u: &DMatrix<f64>,
    h: f64,
    sigma0: &DMatrix<f64>,
    skip: usize,
) -> Result<DMatrix<f64>> {
    let structure = model.structure();
    let beta = model.flatten();
    let n_y = model.n_y();
    let len = u.nrows();
    let predict = |b: &DVector<f64>| -> DVector<f64> {
        match structure.unflatten(b) {
            Ok(m) => {
                let y = simulate_oracle(&m, u, h);
                DVector::from_iterator(
                    len * n_y,
                    (0..len)
                        .flat_map(|k| (0..n_y).map(move |r| (k, r)))
                        .map(|(k, r)| y[(k, r)]),
                )
            }
            Err(_) => DVector::from_element(len * n_y, f64::NAN),
        }
    };
    let jac = fd_jacobian(predict, &beta)?;
    let w = sigma0
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericFail("noise covariance is singular".into()))?;
    let d = beta.len();
    let mut info = DMatrix::zeros(d, d);
    for k in skip..len {
        let jk = jac.rows(k * n_y, n_y);
        info += jk.transpose() * &w * jk;
    }
    let info = info / (len - skip) as f64;
    Ok((&info + info.transpose()) * 0.5)
}

/// Sample covariance (normalized by `M - 1`) of a set of vectors.
pub fn empirical_covariance(samples: &[DVector<f64>]) -> DMatrix<f64> {
    let m = samples.len();
    let d = samples[0].len();
    let mean = samples.iter().fold(DVector::zeros(d), |acc, s| acc + s) / m as f64;
    let mut cov = DMatrix::zeros(d, d);
    for s in samples {
        let e = s - &mean;
        cov += &e * e.transpose();
    }
    cov / (m as f64 - 1.0).max(1.0)
}
