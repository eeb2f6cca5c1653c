//! Normalizing constant, derivatives and maximum likelihood for the Bingham
//! distribution on the unit sphere, computed exactly (to user-set tolerance)
//! by the holonomic gradient method.
//!
//! The density on `S^{p-1}` is proportional to `exp(sum_i theta_i x_i^2)`;
//! its normalizing constant `C(theta)` has no closed form, but the vector of
//! its partial derivatives satisfies a Pfaffian system of linear ODEs with
//! rational coefficients. Evaluation therefore splits into an exact power
//! series near the origin ([`series`]) and ODE propagation out to the target
//! parameter ([`hg`]), in linear or logarithmic form, including parameters
//! with tied entries (the degenerate systems of [`pfaffian`]). Maximum
//! likelihood ([`mle`]) runs Newton iterations or the continuous Newton flow
//! with the derivative vector co-propagated. The saddle-point approximation
//! and the complex-Bingham closed form ([`approx`]) plus Monte Carlo and
//! contour-quadrature reference evaluators ([`oracles`]) cross-check all of
//! it.
//!
//! ```
//! use bingham_hgm::{hg_norm_const, OdeControl};
//!
//! let (log_c, eta) = hg_norm_const(&[4.0, 3.0, 2.0, 1.0, 0.0], 1e-8, &OdeControl::default())
//!     .unwrap();
//! assert!((log_c.exp() - 9.769432).abs() < 1e-4); // C(theta)/C(0)
//! assert!((eta.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
//! ```

// `!(x > 0.0)` guards intentionally treat NaN as invalid input
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod error;
pub mod hg;
pub mod linalg;
pub mod mle;
pub mod model;
pub mod ode;
pub mod oracles;
pub mod pfaffian;
pub mod series;
pub mod special;

pub use crate::approx::{complex_bingham_const, saddle_t, spa1, spa1_log, SaddleSolution};
pub use crate::error::{Error, Result};
pub use crate::hg::{
    hg_norm_const, hg_norm_const_report, propagate, propagate_log, propagate_log_observed,
    HgReport, PathSegment, LOG_FORM_L1, SERIES_ONLY_L1,
};
pub use crate::mle::{
    default_initial_point, fit_continuous, fit_discrete, loglik_grad_hess, sufficient_stats,
    FitIteration, FitResult, SuffStats, DEFAULT_EPSILON, DEFAULT_GRAD_TOL, DEFAULT_POLISH_STEPS,
};
pub use crate::model::{
    canonicalize, expand_eta, gauge_shift, uniform_mass, GVector, Layout, MultiplicityTheta,
    UniformMass,
};
pub use crate::ode::{OdeControl, OdeStats};
pub use crate::oracles::{
    contour_norm_const, contour_norm_const_with_offset, mc_norm_const, McEstimate,
};
pub use crate::pfaffian::{
    log_vector_field, pfaffian_matrix, reduced_pfaffian_matrix, PfaffianSystem, MIN_GAP,
};
pub use crate::series::{
    series_grad, series_norm_const, series_order, truncation_bound, SeriesRequest,
    DEFAULT_MAX_TERMS,
};
