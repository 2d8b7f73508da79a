//! Polynomials, additive transfer-function models, state-space realizations
//! and the ZOH semantics used for every continuous-time filter acting on
//! sampled data.

pub mod filter;
pub mod model;
pub mod poly;
pub mod simulate;
pub mod statespace;

pub use filter::{filter_sampled, DerivativeBank};
pub use model::{AdditiveModel, MatrixPoly, ModelStructure, Subsystem, SubsystemOrder};
pub use poly::ScalarPoly;
pub use simulate::{freq_response, simulate_additive, simulate_subsystem, zoh_equivalent_dtf};
pub use statespace::{siso_tf_to_ss, zoh_discretize, Domain, StateSpace};

/// Roots of a polynomial in `p` (empty for constants).
pub fn poly_roots(p: &ScalarPoly) -> Vec<nalgebra::Complex<f64>> {
    p.roots()
}

/// True iff every root of `p` has real part below `-margin`.
pub fn is_hurwitz(p: &ScalarPoly, margin: f64) -> bool {
    p.is_hurwitz(margin)
}
