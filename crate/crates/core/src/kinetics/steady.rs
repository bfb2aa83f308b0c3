use std::sync::Arc;

use crate::error::{contract, domain, Result};
use crate::grid::{GridPdf, WealthGrid};
use crate::models::{gamma_shape, GammaSpec, ModelKind, ModelParams};

use super::gain::steady_map;

/// Outcome of the fixed-point iteration `f <- normalize(K[f])`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    /// Number of applications of `K` that produced the returned density.
    pub iterations: usize,
    /// `sup |f - K[f]|` of the returned density.
    pub final_sup_residual: f64,
    /// `sup |f - K[f]|` before each iteration, starting with the seed.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Whether damping switched on after two consecutive residual increases.
    pub damped: bool,
}

/// Damping factor applied once residuals have grown twice in a row.
const DAMPING: f64 = 0.5;

/// The grid a model's steady state lives on: the log-head grid when its Gamma
/// approximation diverges at zero (Angle with `omega > 1/2`), the uniform
/// default otherwise.
pub fn preset_grid(model: &ModelParams) -> Result<WealthGrid> {
    let singular = matches!(model.kind(), ModelKind::Angle { .. }) && gamma_shape(model)? < 1.0;
    if singular {
        WealthGrid::log_head_for(model.mean_wealth())
    } else {
        WealthGrid::default_for(model.mean_wealth())
    }
}

/// Exponential for pure exchange, the model's Gamma approximation otherwise.
pub fn default_seed(model: &ModelParams, grid: Arc<WealthGrid>) -> Result<GridPdf> {
    match model.kind() {
        ModelKind::PureRandom => GridPdf::exponential(grid, model.mean_wealth()),
        _ => GammaSpec::for_model(model)?.on_grid(grid)?.normalize(),
    }
}

fn sup_residual(f: &GridPdf, image: &[f64]) -> f64 {
    f.values().iter().zip(image).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Iterates `f <- normalize(K[f])` from `seed` until `sup |f - K[f]| <= tol`
/// or `max_iter` applications of `K`. Running out of iterations is reported
/// through [`FixedPointReport::converged`], not as an error.
pub fn solve_steady(
    model: &ModelParams,
    seed: &GridPdf,
    max_iter: usize,
    tol: f64,
) -> Result<(GridPdf, FixedPointReport)> {
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    if (seed.mean_wealth() - model.mean_wealth()).abs() > 1e-12 * model.mean_wealth() {
        return Err(contract("seed density and model disagree on the mean wealth"));
    }
    let mut f = seed.normalize()?;
    let mut image = steady_map(&f, model)?;
    let mut residual = sup_residual(&f, &image);
    let mut report = FixedPointReport {
        iterations: 0,
        final_sup_residual: residual,
        residuals: vec![residual],
        converged: residual <= tol,
        damped: false,
    };
    let mut increases = 0;
    while !report.converged && report.iterations < max_iter {
        let next = if report.damped {
            f.values()
                .iter()
                .zip(&image)
                .map(|(a, b)| (1.0 - DAMPING) * a + DAMPING * b)
                .collect()
        } else {
            image
        };
        f = f.with_values(next)?.normalize()?;
        image = steady_map(&f, model)?;
        let previous = residual;
        residual = sup_residual(&f, &image);
        report.iterations += 1;
        report.residuals.push(residual);
        report.final_sup_residual = residual;
        report.converged = residual <= tol;
        increases = if residual > previous { increases + 1 } else { 0 };
        if increases >= 2 {
            report.damped = true;
        }
    }
    Ok((f, report))
}
