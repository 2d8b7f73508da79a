use serde::{Deserialize, Serialize};

use crate::closed_loop::DiscreteController;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LoopMode {
    #[default]
    Open,
    Closed,
}

/// What to do when an update produces a denominator outside the stability margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UnstablePolicy {
    /// Mirror offending roots into the left half-plane and continue.
    #[default]
    Reflect,
    Abort,
}

/// Leading samples excluded from every sum in the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TransientWindow {
    /// `ceil(5 tau_max / h)` from the initial model, capped at a quarter of the record.
    #[default]
    Auto,
    Samples(usize),
}

#[derive(Debug, Clone)]
pub struct EstimatorOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub stability_margin: f64,
    pub loop_mode: LoopMode,
    pub on_unstable_iterate: UnstablePolicy,
    pub transient: TransientWindow,
    /// Needed in closed-loop mode to synthesize the noiseless input.
    pub controller: Option<DiscreteController>,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            rel_tol: 1e-8,
            stability_margin: 1e-6,
            loop_mode: LoopMode::Open,
            on_unstable_iterate: UnstablePolicy::Reflect,
            transient: TransientWindow::Auto,
            controller: None,
        }
    }
}

impl EstimatorOptions {
    pub fn closed(controller: DiscreteController) -> Self {
        Self {
            loop_mode: LoopMode::Closed,
            controller: Some(controller),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("rel_tol must be positive".into()));
        }
        if !(self.stability_margin >= 0.0) {
            return Err(Error::InvalidArgument(
                "stability_margin must be non-negative".into(),
            ));
        }
        if self.loop_mode == LoopMode::Closed && self.controller.is_none() {
            return Err(Error::MissingController);
        }
        Ok(())
    }

    /// Number of leading samples to skip for a record of `n` samples.
    pub fn skip(&self, tau_max: f64, h: f64, n: usize) -> usize {
        match self.transient {
            TransientWindow::Samples(s) => s.min(n.saturating_sub(1)),
            TransientWindow::Auto => {
                let s = (5.0 * tau_max / h).ceil();
                let cap = n / 4;
                if s.is_finite() {
                    (s as usize).min(cap)
                } else {
                    cap
                }
            }
        }
    }
}
