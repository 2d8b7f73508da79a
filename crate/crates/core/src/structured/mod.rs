//! Weighted nonlinear least-squares projection of an unstructured estimate
//! onto a structured parametrization `beta = f(rho)`.

mod modal;
mod project;

pub use modal::{
    modal_eval, modal_init, modal_jacobian, ModalMap, ModalParams, ModalProjection, Mode,
};
pub use project::{
    general_covariance, project, projected_covariance, ProjectOptions, ProjectionResult,
};

use nalgebra::{DMatrix, DVector};

/// A smooth map from structured parameters `rho` to the additive-model
/// parameter vector `beta`.
///
/// Maps with a continuous symmetry (a gauge) report it through
/// [`ParameterMap::gauge_dim`] and pick one representative per orbit with
/// [`ParameterMap::normalize`].
pub trait ParameterMap: Sync {
    fn name(&self) -> &str;
    fn dim_rho(&self) -> usize;
    fn dim_beta(&self) -> usize;
    fn eval(&self, rho: &DVector<f64>) -> DVector<f64>;
    /// `d beta / d rho`, `dim_beta x dim_rho`.
    fn jacobian(&self, rho: &DVector<f64>) -> DMatrix<f64>;

    /// Dimension of the set of `rho` directions leaving `eval` unchanged.
    fn gauge_dim(&self) -> usize {
        0
    }
    fn normalize(&self, rho: &DVector<f64>) -> DVector<f64> {
        rho.clone()
    }
    /// Jacobian of [`ParameterMap::normalize`].
    fn normalization_jacobian(&self, rho: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(rho.len(), rho.len())
    }
}
