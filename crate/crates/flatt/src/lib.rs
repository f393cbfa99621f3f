//! Flat linear transports in tensor bundles over a single coordinate chart.
//!
//! A transport law is an invertible matrix field `F` on a rectangular chart;
//! it moves tensors between points through the matrix `H(y,x) = F(y)⁻¹ F(x)`
//! acting on contravariant slots and its inverse acting on covariant slots.
//! From the law one derives a flat linear connection `Γ_k = F⁻¹ ∂F/∂x^k`, and
//! from a flat connection one can go back: reconstruct `F` by integrating the
//! matrix ODE `∂F/∂x^k = F Γ_k`, and, when the rows of `F` are closed
//! one-forms, recover holonomic coordinates whose differentials are those rows.
//!
//! Modules:
//! - [`expr`] — closed-form scalar expressions in chart coordinates with exact
//!   symbolic differentiation (the derivative backbone for everything else);
//! - [`matrix`] — small dense square matrices with partial-pivot inversion;
//! - [`tensor`] — dense `(p,q)`-tensors at a point, plus expression-valued
//!   tensor fields;
//! - [`chart`] — the rectangular chart, matrix fields, frames, structure
//!   coefficients and the connection transformation law;
//! - [`transport`] — transport laws, the axiom checker, gauge transformations,
//!   adapted frames, extension of a tensor to a transported field;
//! - [`connection`] — derived connections, covariant derivatives, curvature,
//!   torsion, parallel transport along paths;
//! - [`reconstruct`] — closedness tests, frame-field reconstruction from a
//!   flat connection, holonomic coordinates, combined flatness verdicts;
//! - [`numeric`] — independent numerical oracles (finite differences, RK4,
//!   composite Simpson) used by the verification suites;
//! - [`catalog`] — the built-in example laws;
//! - [`fieldgen`] — seeded random tensors and smooth random fields.
//!
//! Index conventions: coordinates, tensor slots, and coordinate directions in
//! public signatures are 1-based, matching the `x1…xn` variable names;
//! component storage is row-major with all contravariant slots leading.

pub mod catalog;
pub mod chart;
pub mod connection;
pub mod expr;
pub mod fieldgen;
pub mod matrix;
pub mod numeric;
pub mod reconstruct;
pub mod tensor;
pub mod transport;

use thiserror::Error;

/// Frame tag for coordinate-frame components.
pub const COORD_FRAME: &str = "coord";

/// Errors shared by the geometric layers of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] expr::ParseError),

    #[error(transparent)]
    Eval(#[from] expr::EvalError),

    #[error(transparent)]
    Tensor(#[from] tensor::TensorError),

    #[error("point {point:?} is outside the chart bounds")]
    OutOfBounds { point: Vec<f64> },

    #[error("singular matrix at {point:?} (det = {det:e})")]
    Singular { point: Vec<f64>, det: f64 },

    #[error("degenerate chart interval [{lo}, {hi}] in coordinate {axis}")]
    BadBounds { axis: usize, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate index {index} out of range 1..={n}")]
    AxisOutOfRange { index: usize, n: usize },

    #[error("symbolic matrix inversion is limited to n <= 4 (got n = {n})")]
    SymbolicInversionUnsupported { n: usize },

    #[error("tensor type ({p},{q}) exceeds the supported limit ({max_p},{max_q}) for {operation}")]
    UnsupportedTensorType {
        p: usize,
        q: usize,
        max_p: usize,
        max_q: usize,
        operation: &'static str,
    },

    #[error(
        "connection is not flat: max |R| = {max_abs:e} at {point:?} (tolerance {tolerance:e})"
    )]
    NotFlat {
        point: Vec<f64>,
        max_abs: f64,
        tolerance: f64,
    },

    #[error("row {row} of the frame field is not closed: defect {defect:e} exceeds {tolerance:e}")]
    NotClosed {
        row: usize,
        defect: f64,
        tolerance: f64,
    },

    #[error("path leaves the chart at t = {t} (point {point:?})")]
    PathExitsChart { t: f64, point: Vec<f64> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
