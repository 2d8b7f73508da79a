//! Refined instrumental-variable identification of additive continuous-time
//! MIMO transfer-function models from sampled data, with a structured
//! second-stage projection and a Monte Carlo harness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod closed_loop;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lti;
pub mod riv;
pub mod structured;

pub use closed_loop::DiscreteController;
pub use error::{Error, ErrorKind, Result};
pub use lti::{AdditiveModel, MatrixPoly, ModelStructure, ScalarPoly, StateSpace, Subsystem};
pub use riv::{EstimatorOptions, RivResult, SampledDataset};
