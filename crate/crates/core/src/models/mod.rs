//! Exchange rules, reference densities and special functions.

mod distributions;
mod exchange;
mod residual;
pub mod special;

pub use distributions::{exponential_pdf, gamma_pdf, gamma_shape, GammaSpec};
pub use exchange::{exchange_angle, exchange_pure, exchange_saving};
pub use residual::gamma_residual;
pub use special::hyp1f1;

use std::fmt;

use crate::error::{domain, Result};

/// Largest saving fraction the kinetic solver accepts; above this the gain
/// kernel collapses towards the identity.
pub const MAX_KINETIC_LAMBDA: f64 = 0.999;

/// Which exchange rule is applied to a trading pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// `u_i' = eps U`, `u_j' = (1 - eps) U` with `U = u_i + u_j`.
    PureRandom,
    /// Each agent keeps a fraction `lambda` and the rest is split at random.
    Saving { lambda: f64 },
    /// Agent `j` hands `eps * omega * u_j` to agent `i`.
    Angle { omega: f64 },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::PureRandom => "pure",
            ModelKind::Saving { .. } => "saving",
            ModelKind::Angle { .. } => "angle",
        }
    }
}

/// An exchange rule together with the mean wealth of the population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    kind: ModelKind,
    mean_wealth: f64,
}

impl ModelParams {
    pub fn new(kind: ModelKind, mean_wealth: f64) -> Result<Self> {
        if !(mean_wealth > 0.0 && mean_wealth.is_finite()) {
            return Err(domain(format!("mean wealth must be positive, got {mean_wealth}")));
        }
        match kind {
            ModelKind::PureRandom => {}
            ModelKind::Saving { lambda } => {
                if !(0.0..1.0).contains(&lambda) {
                    return Err(domain("lambda must be in [0,1)"));
                }
            }
            ModelKind::Angle { omega } => {
                if !(omega > 0.0 && omega <= 1.0) {
                    return Err(domain("omega must be in (0,1]"));
                }
            }
        }
        Ok(Self { kind, mean_wealth })
    }

    pub fn pure(mean_wealth: f64) -> Result<Self> {
        Self::new(ModelKind::PureRandom, mean_wealth)
    }

    pub fn saving(lambda: f64, mean_wealth: f64) -> Result<Self> {
        Self::new(ModelKind::Saving { lambda }, mean_wealth)
    }

    pub fn angle(omega: f64, mean_wealth: f64) -> Result<Self> {
        Self::new(ModelKind::Angle { omega }, mean_wealth)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn mean_wealth(&self) -> f64 {
        self.mean_wealth
    }

    /// The model's parameter (`lambda` or `omega`), if it has one.
    pub fn parameter(&self) -> Option<(&'static str, f64)> {
        match self.kind {
            ModelKind::PureRandom => None,
            ModelKind::Saving { lambda } => Some(("lambda", lambda)),
            ModelKind::Angle { omega } => Some(("omega", omega)),
        }
    }

    /// Applies the exchange rule without validating `eps`. Agent `j` is the
    /// loser for the Angle rule.
    #[inline]
    pub fn exchange(&self, u_i: f64, u_j: f64, eps: f64) -> (f64, f64) {
        match self.kind {
            ModelKind::PureRandom => exchange::pure(u_i, u_j, eps),
            ModelKind::Saving { lambda } => exchange::saving(u_i, u_j, eps, lambda),
            ModelKind::Angle { omega } => exchange::angle(u_i, u_j, eps, omega),
        }
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parameter() {
            Some((name, value)) => write!(f, "{} ({name}={value})", self.kind.name()),
            None => f.write_str(self.kind.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_ranges() {
        assert!(ModelParams::saving(0.0, 1.0).is_ok());
        assert!(ModelParams::saving(1.0, 1.0).is_err());
        assert!(ModelParams::saving(-0.1, 1.0).is_err());
        assert!(ModelParams::angle(1.0, 1.0).is_ok());
        assert!(ModelParams::angle(0.0, 1.0).is_err());
        assert!(ModelParams::angle(1.2, 1.0).is_err());
        assert!(ModelParams::pure(0.0).is_err());
        assert!(ModelParams::pure(f64::NAN).is_err());
        let err = ModelParams::saving(1.2, 1.0).unwrap_err();
        assert!(err.to_string().contains("lambda must be in [0,1)"));
    }
}
