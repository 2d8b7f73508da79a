//! Discrete feedback loops `u = C_d(q) (r - y)` around the ZOH-equivalent plant.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lti::{zoh_equivalent_dtf, AdditiveModel, Domain, StateSpace};

/// Discrete-time controller with `n_y` inputs (the error) and `n_u` outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ControllerJson", into = "ControllerJson")]
pub struct DiscreteController {
    ss: StateSpace,
    h: f64,
}

impl DiscreteController {
    pub fn new(ss: StateSpace, h: f64) -> Result<Self> {
        match ss.domain() {
            Domain::Discrete { h: hs } if (hs - h).abs() <= 1e-12 * h.abs() => {}
            _ => {
                return Err(Error::InvalidArgument(
                    "controller must be discrete with the stated sampling interval".into(),
                ))
            }
        }
        if !has_nonzero_transfer(&ss) {
            return Err(Error::InvalidArgument(
                "controller transfer is identically zero".into(),
            ));
        }
        Ok(Self { ss, h })
    }

    pub fn ss(&self) -> &StateSpace {
        &self.ss
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn n_u(&self) -> usize {
        self.ss.n_outputs()
    }
    pub fn n_y(&self) -> usize {
        self.ss.n_inputs()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn check_step(&self, h: f64) -> Result<()> {
        if (self.h - h).abs() > 1e-9 * h.abs() {
            return Err(Error::InvalidArgument(format!(
                "controller step {} differs from data step {h}",
                self.h
            )));
        }
        Ok(())
    }
}

/// Markov parameters `D, CB, CAB, ...` up to the state dimension.
fn has_nonzero_transfer(ss: &StateSpace) -> bool {
    if ss.d().iter().any(|&v| v != 0.0) {
        return true;
    }
    let mut ab = ss.b().clone();
    for _ in 0..ss.n_states() {
        if (ss.c() * &ab).iter().any(|&v| v != 0.0) {
            return true;
        }
        ab = ss.a() * ab;
    }
    false
}

#[derive(Serialize, Deserialize)]
struct ControllerJson {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    h: f64,
}

impl From<DiscreteController> for ControllerJson {
    fn from(c: DiscreteController) -> Self {
        Self {
            a: linalg::to_rows(c.ss.a()),
            b: linalg::to_rows(c.ss.b()),
            c: linalg::to_rows(c.ss.c()),
            d: linalg::to_rows(c.ss.d()),
            h: c.h,
        }
    }
}

impl TryFrom<ControllerJson> for DiscreteController {
    type Error = Error;
    fn try_from(j: ControllerJson) -> Result<Self> {
        let d = linalg::from_rows(&j.d)?;
        let a = linalg::from_rows(&j.a)?;
        let nc = a.nrows();
        let (b, c) = if nc == 0 {
            (DMatrix::zeros(0, d.ncols()), DMatrix::zeros(d.nrows(), 0))
        } else {
            (linalg::from_rows(&j.b)?, linalg::from_rows(&j.c)?)
        };
        let ss = StateSpace::new(a, b, c, d, Domain::Discrete { h: j.h })?;
        DiscreteController::new(ss, j.h)
    }
}

/// Loop around `G_d` driven by `w` (the signal entering the summing junction
/// ahead of the controller). Outputs are `[u; x]`, with `x = G_d u`.
fn interconnect(model: &AdditiveModel, ctrl: &DiscreteController, h: f64) -> Result<StateSpace> {
    ctrl.check_step(h)?;
    if ctrl.n_u() != model.n_u() || ctrl.n_y() != model.n_y() {
        return Err(Error::DimMismatch(format!(
            "controller is {}x{}, plant expects {}x{}",
            ctrl.n_u(),
            ctrl.n_y(),
            model.n_u(),
            model.n_y()
        )));
    }
    let g = zoh_equivalent_dtf(model, h)?;
    let c = ctrl.ss();
    let (n_u, n_y) = (model.n_u(), model.n_y());
    let (ng, nc) = (g.n_states(), c.n_states());

    let loop_mat = DMatrix::identity(n_u, n_u) + c.d() * g.d();
    if linalg::condition_number(&loop_mat) > 1e12 {
        return Err(Error::AlgebraicLoop);
    }
    let f = loop_mat.try_inverse().ok_or(Error::AlgebraicLoop)?;

    let mut cu = DMatrix::zeros(n_u, ng + nc);
    cu.view_mut((0, 0), (n_u, ng))
        .copy_from(&(-&f * c.d() * g.c()));
    cu.view_mut((0, ng), (n_u, nc)).copy_from(&(&f * c.c()));
    let du = &f * c.d();

    let mut cx = DMatrix::zeros(n_y, ng + nc);
    cx.view_mut((0, 0), (n_y, ng)).copy_from(g.c());
    cx += g.d() * &cu;
    let dx = g.d() * &du;

    let n = ng + nc;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (ng, ng)).copy_from(g.a());
    a.view_mut((ng, ng), (nc, nc)).copy_from(c.a());
    let mut top = a.view_mut((0, 0), (ng, n));
    top += g.b() * &cu;
    let mut bottom = a.view_mut((ng, 0), (nc, n));
    bottom -= c.b() * &cx;

    let mut b = DMatrix::zeros(n, n_y);
    b.view_mut((0, 0), (ng, n_y)).copy_from(&(g.b() * &du));
    b.view_mut((ng, 0), (nc, n_y))
        .copy_from(&(c.b() * (DMatrix::identity(n_y, n_y) - &dx)));

    let mut cout = DMatrix::zeros(n_u + n_y, n);
    cout.view_mut((0, 0), (n_u, n)).copy_from(&cu);
    cout.view_mut((n_u, 0), (n_y, n)).copy_from(&cx);
    let mut dout = DMatrix::zeros(n_u + n_y, n_y);
    dout.view_mut((0, 0), (n_u, n_y)).copy_from(&du);
    dout.view_mut((n_u, 0), (n_y, n_y)).copy_from(&dx);

    let cl = StateSpace::new(a, b, cout, dout, Domain::Discrete { h })?;
    let rho = cl.spectral_radius();
    if !(rho < 1.0) {
        return Err(Error::ClUnstable(rho));
    }
    Ok(cl)
}

/// `S_uo(q) = C_d(q) [I + G_d(q) C_d(q)]^{-1}` as a discrete state space
/// from `r` (`n_y` channels) to `u` (`n_u` channels).
pub fn control_sensitivity(
    model: &AdditiveModel,
    ctrl: &DiscreteController,
    h: f64,
) -> Result<StateSpace> {
    let cl = interconnect(model, ctrl, h)?;
    let n_u = model.n_u();
    let n = cl.n_states();
    StateSpace::new(
        cl.a().clone(),
        cl.b().clone(),
        cl.c().view((0, 0), (n_u, n)).into_owned(),
        cl.d().view((0, 0), (n_u, cl.n_inputs())).into_owned(),
        cl.domain(),
    )
}

/// `z = S_uo(q, beta) r` from rest.
pub fn noiseless_input(
    model: &AdditiveModel,
    ctrl: &DiscreteController,
    r: &DMatrix<f64>,
    h: f64,
) -> Result<DMatrix<f64>> {
    control_sensitivity(model, ctrl, h)?.simulate(r)
}

/// Simulates the loop with output noise `v` entering at the plant output.
/// Returns `(u, y)` with `y = x + v`.
pub fn simulate_closed_loop(
    model: &AdditiveModel,
    ctrl: &DiscreteController,
    r: &DMatrix<f64>,
    v: &DMatrix<f64>,
    h: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if r.shape() != v.shape() || r.ncols() != model.n_y() {
        return Err(Error::DimMismatch(format!(
            "reference {:?} and noise {:?} must both be N x {}",
            r.shape(),
            v.shape(),
            model.n_y()
        )));
    }
    let cl = interconnect(model, ctrl, h)?;
    let out = cl.simulate(&(r - v))?;
    let n_u = model.n_u();
    let u = out.columns(0, n_u).into_owned();
    let y = out.columns(n_u, model.n_y()).into_owned() + v;
    Ok((u, y))
}
