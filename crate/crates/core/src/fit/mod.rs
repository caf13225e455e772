//! Bounded nonlinear weighted least squares (Levenberg-Marquardt with
//! smooth parameter transforms) plus the concrete fitting problems:
//! single-histogram g2 fits, the six-basis global cascade fit, and the
//! scalar photophysics models.

mod engine;
mod problems;

pub use engine::{least_squares, FitProblem, FitResult, ParamSpec, Transform};
pub use problems::{
    fit_cascade_global, fit_g2, fit_scalar_model, normalize_histogram, CascadeFitOptions,
    CascadeHistogramSet, FidelityEstimate, FidelityEstimates, G2Fixed, ScalarModel,
};
