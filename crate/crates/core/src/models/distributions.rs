//! Analytic reference densities.

use std::sync::Arc;

use super::special::ln_gamma;
use super::{ModelKind, ModelParams};
use crate::error::{domain, Error, Result};
use crate::grid::{GridPdf, WealthGrid};

/// `beta exp(-beta u)` with `beta = 1/<u>`.
pub fn exponential_pdf(u: f64, mean_wealth: f64) -> Result<f64> {
    if u.is_nan() || u < 0.0 {
        return Err(domain(format!("wealth must be nonnegative, got {u}")));
    }
    if !(mean_wealth > 0.0) {
        return Err(domain(format!("mean wealth must be positive, got {mean_wealth}")));
    }
    let beta = 1.0 / mean_wealth;
    Ok(beta * (-beta * u).exp())
}

/// Shape exponent of the Gamma approximation:
/// `(1 + 2 lambda)/(1 - lambda)` for saving, `(3 - 2 omega)/(2 omega)` for Angle.
pub fn gamma_shape(params: &ModelParams) -> Result<f64> {
    match params.kind() {
        ModelKind::Saving { lambda } => Ok((1.0 + 2.0 * lambda) / (1.0 - lambda)),
        ModelKind::Angle { omega } => Ok((3.0 - 2.0 * omega) / (2.0 * omega)),
        ModelKind::PureRandom => Err(Error::Unsupported(
            "the pure random model relaxes to the exponential; it has no Gamma shape".into(),
        )),
    }
}

/// `f(u) = a u^(n-1) exp(-n u / <u>)` with `a = (n/<u>)^n / Gamma(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSpec {
    n: f64,
    a: f64,
    mean_wealth: f64,
}

impl GammaSpec {
    pub fn new(n: f64, mean_wealth: f64) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(domain(format!("Gamma shape must be positive, got {n}")));
        }
        if !(mean_wealth > 0.0 && mean_wealth.is_finite()) {
            return Err(domain(format!("mean wealth must be positive, got {mean_wealth}")));
        }
        let a = (n * (n / mean_wealth).ln() - ln_gamma(n)).exp();
        Ok(Self { n, a, mean_wealth })
    }

    /// The Gamma approximation for a saving or Angle model.
    pub fn for_model(params: &ModelParams) -> Result<Self> {
        Self::new(gamma_shape(params)?, params.mean_wealth())
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn mean_wealth(&self) -> f64 {
        self.mean_wealth
    }

    /// Samples the density on every node (not renormalized).
    ///
    /// Shapes below 1 diverge at zero and need a grid whose first node is
    /// above zero.
    pub fn on_grid(&self, grid: Arc<WealthGrid>) -> Result<GridPdf> {
        let values = grid
            .nodes()
            .iter()
            .map(|&u| gamma_pdf(u, self))
            .collect::<Result<Vec<_>>>()?;
        GridPdf::new(grid, values, self.mean_wealth)
    }
}

pub fn gamma_pdf(u: f64, spec: &GammaSpec) -> Result<f64> {
    if u.is_nan() || u < 0.0 {
        return Err(domain(format!("wealth must be nonnegative, got {u}")));
    }
    let n = spec.n;
    if u == 0.0 {
        return if n < 1.0 {
            Err(Error::InfiniteDensity(0.0))
        } else if n == 1.0 {
            Ok(spec.a)
        } else {
            Ok(0.0)
        };
    }
    Ok((spec.a.ln() + (n - 1.0) * u.ln() - n * u / spec.mean_wealth).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn exponential_examples() {
        assert_eq!(exponential_pdf(0.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(exponential_pdf(1.0, 1.0).unwrap(), 0.367_879_4, epsilon = 1e-7);
        assert_eq!(exponential_pdf(0.0, 2.0).unwrap(), 0.5);
        assert!(exponential_pdf(-1.0, 1.0).is_err());
    }

    #[test]
    fn shape_examples() {
        let shape = |p: ModelParams| gamma_shape(&p).unwrap();
        assert_eq!(shape(ModelParams::saving(0.0, 1.0).unwrap()), 1.0);
        assert_eq!(shape(ModelParams::saving(0.5, 1.0).unwrap()), 4.0);
        assert_eq!(shape(ModelParams::angle(1.0, 1.0).unwrap()), 0.5);
        assert_eq!(shape(ModelParams::angle(0.5, 1.0).unwrap()), 2.0);
        assert!(matches!(
            gamma_shape(&ModelParams::pure(1.0).unwrap()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn normalization_constant() {
        for (n, mean) in [(0.5, 1.0), (4.0 / 3.0, 1.0), (4.0, 2.0), (19.0, 0.7)] {
            let spec = GammaSpec::new(n, mean).unwrap();
            let expected = (n / mean).powf(n) / super::super::special::gamma(n);
            assert_relative_eq!(spec.a(), expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn gamma_examples() {
        let one = GammaSpec::new(1.0, 1.0).unwrap();
        for u in [0.0, 0.3, 1.0, 7.5] {
            assert_relative_eq!(
                gamma_pdf(u, &one).unwrap(),
                exponential_pdf(u, 1.0).unwrap(),
                max_relative = 1e-14
            );
        }
        // (256/6) e^-4 = 0.7814673
        let four = GammaSpec::new(4.0, 1.0).unwrap();
        let oracle = 256.0 / 6.0 * (-4.0f64).exp();
        assert_abs_diff_eq!(oracle, 0.781_467_259_252_658, epsilon = 1e-14);
        assert_relative_eq!(gamma_pdf(1.0, &four).unwrap(), oracle, max_relative = 1e-13);
        assert_eq!(gamma_pdf(0.0, &GammaSpec::new(2.0, 1.0).unwrap()).unwrap(), 0.0);
        assert!(matches!(
            gamma_pdf(0.0, &GammaSpec::new(0.5, 1.0).unwrap()),
            Err(Error::InfiniteDensity(_))
        ));
    }

    #[test]
    fn gamma_on_default_grid_is_normalized_with_right_mean() {
        let grid = Arc::new(WealthGrid::default_for(1.0).unwrap());
        for params in [
            ModelParams::saving(0.1, 1.0).unwrap(),
            ModelParams::saving(0.5, 1.0).unwrap(),
            ModelParams::saving(0.9, 1.0).unwrap(),
            ModelParams::angle(0.3, 1.0).unwrap(),
            ModelParams::angle(0.5, 1.0).unwrap(),
        ] {
            let pdf = GammaSpec::for_model(&params).unwrap().on_grid(grid.clone()).unwrap();
            assert_abs_diff_eq!(pdf.mass(), 1.0, epsilon = 1e-4);
            assert_abs_diff_eq!(pdf.mean(), 1.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn normalize_scaled_gamma() {
        let grid = Arc::new(WealthGrid::default_for(1.0).unwrap());
        let spec = GammaSpec::new(4.0, 1.0).unwrap();
        let exact = spec.on_grid(grid.clone()).unwrap();
        let scaled: Vec<f64> = exact.values().iter().map(|v| 7.3 * v).collect();
        let normalized = exact.with_values(scaled).unwrap().normalize().unwrap();
        let mass = exact.mass();
        for (k, &u) in grid.nodes().iter().enumerate() {
            let direct = gamma_pdf(u, &spec).unwrap();
            assert_abs_diff_eq!(normalized.values()[k], direct / mass, epsilon = 1e-9);
            assert_abs_diff_eq!(normalized.values()[k], direct, epsilon = 1e-7);
        }
    }

    #[test]
    fn singular_gamma_needs_log_head_grid() {
        let spec = GammaSpec::new(0.5, 1.0).unwrap();
        let uniform = Arc::new(WealthGrid::default_for(1.0).unwrap());
        assert!(spec.on_grid(uniform).is_err());
        let head = Arc::new(WealthGrid::log_head_for(1.0).unwrap());
        let pdf = spec.on_grid(head).unwrap();
        assert_abs_diff_eq!(pdf.mass(), 1.0, epsilon = 1e-4);
    }
}
