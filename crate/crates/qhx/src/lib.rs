//! Numerical toolkit for quasihyperbolic geometry of planar cusp domains,
//! Orlicz-type Young functions, singular dyadic quadrature on the unit disk,
//! harmonic extensions of boundary homeomorphisms and the cusp
//! counterexample audits built on top of them.
//!
//! Every routine is a pure function of its inputs; randomised sampling takes
//! an explicit seed so repeated runs are bit-identical.

pub mod counterexample;
pub mod geometry;
pub mod harmonic;
pub mod metrics;
pub mod orlicz;
pub mod quadrature;
pub mod report;

pub use geometry::{Domain, DomainSpec, Point2};



use thiserror::Error;

/// Errors shared by all modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("exterior point ({x}, {y})")]
    ExteriorPoint { x: f64, y: f64 },
    #[error("point ({x}, {y}) is within the excluded boundary collar")]
    InCollar { x: f64, y: f64 },
    #[error("disconnected at this resolution")]
    Disconnected,
    #[error("piece below resolution (k = {k})")]
    PieceBelowResolution { k: usize },
    #[error("non-simple polyline")]
    NonSimplePolyline,
    #[error("non-invertible on ray")]
    NonInvertible,
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("underflow: {0}")]
    Underflow(String),
    #[error("solver did not converge (relative residual {residual:e} after {iterations} iterations)")]
    NotConverged { residual: f64, iterations: usize },
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Overflow(_)
                | Error::Underflow(_)
                | Error::NotConverged { .. }
                | Error::Disconnected
                | Error::PieceBelowResolution { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
