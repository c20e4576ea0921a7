//! Directional rectangle maximal operators and slope-set divergence
//! experiments on the plane.
//!
//! The crate builds the objects behind divergence-of-averages constructions
//! for rotated rectangle bases and verifies their quantitative properties at
//! desk scale:
//!
//! - [`geometry`]: rotations, open rectangles, exact disk/rectangle areas.
//! - [`funcrep`]: signed disk-sum densities, lattice periodizations, dilated
//!   finite series, exact integrals with rigorous error radii.
//! - [`construct`]: builders — two-ray point configurations, ball radius
//!   selection, the signed bump, periodization, hyperbolic witness regions,
//!   interval splitting, and level schedules.
//! - [`maxop`]: rectangle averages, scale-band-restricted supremum search
//!   with witnesses, and analytic upper certificates.
//! - [`measure`]: pixel sets on the torus, per-cell measure bounds, greedy
//!   disjoint selection, refinement of rectangle unions, dilation unions.
//! - [`verify`]: reproducible pass/fail reports for each quantitative claim.
//! - [`cli`]: the command-line front end behind the `rsets` binary.
//!
//! Start with the runnable demos in `examples/`; each major capability has
//! one.

pub mod cli;
pub mod construct;
pub mod funcrep;
pub mod geometry;
pub mod maxop;
pub mod measure;
pub mod verify;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Library version string embedded in output artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
