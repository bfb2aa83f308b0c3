//! Kinetic wealth-exchange models.
//!
//! Three pairwise money-exchange rules (pure random, fixed saving fraction,
//! and the asymmetric winner/loser rule) are studied from two independent
//! directions:
//!
//! - [`montecarlo`]: an agent-based engine that applies the exchange rule to
//!   random pairs and histograms the resulting wealth distribution.
//! - [`kinetics`]: the deterministic loss/gain evolution equations for the
//!   wealth density, their steady states (found by fixed-point iteration) and
//!   the relaxation time towards them.
//!
//! [`models`] holds the exchange rules themselves, the analytic reference
//! densities (exponential and Gamma), the confluent hypergeometric function
//! and the Gamma-exactness residual. [`grid`] is the shared numerical layer:
//! densities sampled on a wealth grid, quadrature, interpolation, distances.

pub mod error;
pub mod grid;
pub mod io;
pub mod kinetics;
pub mod models;
pub mod montecarlo;

pub use error::{Error, Result};
pub use grid::{distance, quadrature, GridPdf, PdfDistance, Spacing, WealthGrid};
pub use models::{ModelKind, ModelParams};
