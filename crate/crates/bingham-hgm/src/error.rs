//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("parameter dimension must be at least 2, got p = {p}")]
    DimensionTooSmall { p: usize },

    #[error("non-finite entry in {what}")]
    NonFinite { what: &'static str },

    #[error("invalid tolerance {value} for {what}")]
    InvalidTolerance { what: &'static str, value: f64 },

    #[error(
        "series truncation needs N = {needed_n} terms per axis (~{terms:.3e} total) \
         for ||phi||_1 = {phi_l1}; budget is {budget} terms, use the HG method instead"
    )]
    SeriesBudget {
        phi_l1: f64,
        needed_n: usize,
        terms: f64,
        budget: usize,
    },

    #[error("truncation bound requires N + 1 > ||phi||_1, got N = {n}, ||phi||_1 = {phi_l1}")]
    BoundDomain { phi_l1: f64, n: usize },

    #[error(
        "Pfaffian matrix undefined: minimum gap between distinct values is {gap:.3e}; \
         re-canonicalize with a tie tolerance to merge near-equal entries"
    )]
    PfaffianGap { gap: f64 },

    #[error("reduced system requires the smallest distinct value to be exactly 0")]
    ReducedGauge,

    #[error("no reduced system for q = 1: C equals exp(phi_1) * C(0) directly")]
    ReducedSingleBlock,

    #[error("index {index} out of range for q = {q}")]
    IndexOutOfRange { index: usize, q: usize },

    #[error("segment endpoints have different multiplicity pattern or coordinate order")]
    SegmentMismatch,

    #[error("G vector has layout {got} where {expected} is required")]
    LayoutMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("logarithmic G vector must lie on the simplex, got sum = {sum}")]
    SimplexViolation { sum: f64 },

    #[error("ODE step count exceeded {max_steps}")]
    OdeMaxSteps { max_steps: usize },

    #[error("ODE step size underflow at t = {t}")]
    OdeStepUnderflow { t: f64 },

    #[error("Hessian is numerically singular")]
    SingularHessian,

    #[error("tie pattern of the statistics does not match the parameter's pattern")]
    PatternMismatch,

    #[error("degenerate statistics: s_{index} = 0; drop that coordinate from the analysis")]
    DegenerateStats { index: usize },

    #[error("row {row} has Euclidean norm {norm} outside tolerance {tol} of 1")]
    RowNormViolation { row: usize, norm: f64, tol: f64 },

    #[error("statistics do not sum to 1 (sum = {sum})")]
    StatsNotNormalized { sum: f64 },

    #[error("damped Newton step failed to increase the likelihood after {halvings} halvings")]
    LineSearchFailed { halvings: usize },

    #[error("Newton iteration did not converge within {max_iters} iterations")]
    IterationCap { max_iters: usize },

    #[error("order or tie pattern violated during optimization at tau = {tau}")]
    OrderViolation { tau: f64 },

    #[error(
        "complex Bingham closed form is unreliable for minimum gap {gap:.3e} < {gap_min:.1e}; \
         evaluate the d = 2 real embedding with the HG method instead"
    )]
    ComplexBinghamGap { gap: f64, gap_min: f64 },

    #[error("contour oracle requires p >= 3, got p = {p}")]
    ContourDimension { p: usize },

    #[error("contour truncation point {s:.3e} exceeds budget {cap:.1e}")]
    ContourBudget { s: f64, cap: f64 },

    #[error("contour integral has non-vanishing imaginary part {im:.3e}")]
    ContourImaginary { im: f64 },

    #[error("adaptive quadrature exceeded {max_panels} panels")]
    QuadratureBudget { max_panels: usize },
}

impl Error {
    /// True for errors caused by invalid input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionTooSmall { .. }
                | Error::NonFinite { .. }
                | Error::InvalidTolerance { .. }
                | Error::IndexOutOfRange { .. }
                | Error::LayoutMismatch { .. }
                | Error::SegmentMismatch
                | Error::ReducedGauge
                | Error::ReducedSingleBlock
                | Error::PatternMismatch
                | Error::DegenerateStats { .. }
                | Error::RowNormViolation { .. }
                | Error::StatsNotNormalized { .. }
                | Error::ContourDimension { .. }
                | Error::BoundDomain { .. }
        )
    }
}
