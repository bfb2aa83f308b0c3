//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a flat `Float64Array`; rows are interleaved so the
//! page can plot them without any glue beyond a stride.

use kinex_core::models::{exponential_pdf, gamma_pdf, gamma_residual, GammaSpec};
use kinex_core::montecarlo::{run_ensemble, EnsembleConfig};
use kinex_core::{Error, ModelKind, ModelParams, Result};
use wasm_bindgen::prelude::*;

/// Upper bound on agent-steps per call, so one click cannot freeze the tab.
pub const MAX_WORK: u64 = 50_000_000;

fn model_from(name: &str, parameter: f64) -> Result<ModelParams> {
    match name {
        "pure" => ModelParams::pure(1.0),
        "saving" => ModelParams::saving(parameter, 1.0),
        "angle" => ModelParams::angle(parameter, 1.0),
        other => Err(Error::Domain(format!("unknown model `{other}`"))),
    }
}

fn reference_density(model: &ModelParams, u: f64) -> Result<f64> {
    match model.kind() {
        ModelKind::PureRandom => exponential_pdf(u, model.mean_wealth()),
        _ => gamma_pdf(u, &GammaSpec::for_model(model)?),
    }
}

/// `[center, mc_density, reference_density]` per histogram bin.
pub fn histogram_rows(name: &str, parameter: f64, agents: u32, sweeps: u32, seed: u32) -> Result<Vec<f64>> {
    let model = model_from(name, parameter)?;
    let steps = u64::from(agents) * u64::from(sweeps);
    if steps > MAX_WORK {
        return Err(Error::Domain(format!(
            "{steps} exchange steps exceed the demo limit of {MAX_WORK}"
        )));
    }
    let config = EnsembleConfig::new(agents as usize, model, steps, 1, u64::from(seed))?;
    let outcome = run_ensemble(&config)?;
    let density = outcome.histogram.density()?;
    let mut rows = Vec::with_capacity(3 * density.len());
    for (center, value) in outcome.histogram.centers().into_iter().zip(density) {
        rows.extend([center, value, reference_density(&model, center)?]);
    }
    Ok(rows)
}

/// `[u, residual]` at `points` evenly spaced wealths in `[lo, hi]`.
pub fn residual_rows(omega: f64, lo: f64, hi: f64, points: u32) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || points < 2 {
        return Err(Error::Domain("need 0 < lo < hi and at least 2 points".into()));
    }
    let model = ModelParams::angle(omega, 1.0)?;
    let step = (hi - lo) / f64::from(points - 1);
    let mut rows = Vec::with_capacity(2 * points as usize);
    for k in 0..points {
        let u = lo + step * f64::from(k);
        rows.extend([u, gamma_residual(u, &model)?]);
    }
    Ok(rows)
}

/// Post-trade `[u_i, u_j]` for one exchange.
pub fn trade(name: &str, parameter: f64, u_i: f64, u_j: f64, eps: f64) -> Result<Vec<f64>> {
    let model = model_from(name, parameter)?;
    if !(u_i >= 0.0 && u_j >= 0.0 && (0.0..=1.0).contains(&eps)) {
        return Err(Error::Domain("wealths must be non-negative and eps in [0,1]".into()));
    }
    let (a, b) = model.exchange(u_i, u_j, eps);
    Ok(vec![a, b])
}

fn to_js<T>(result: Result<T>) -> std::result::Result<T, JsError> {
    result.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = simulateHistogram)]
pub fn simulate_histogram(
    model: &str,
    parameter: f64,
    agents: u32,
    sweeps: u32,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    to_js(histogram_rows(model, parameter, agents, sweeps, seed))
}

#[wasm_bindgen(js_name = residualCurve)]
pub fn residual_curve(omega: f64, lo: f64, hi: f64, points: u32) -> std::result::Result<Vec<f64>, JsError> {
    to_js(residual_rows(omega, lo, hi, points))
}

#[wasm_bindgen(js_name = exchange)]
pub fn exchange(model: &str, parameter: f64, u_i: f64, u_j: f64, eps: f64) -> std::result::Result<Vec<f64>, JsError> {
    to_js(trade(model, parameter, u_i, u_j, eps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_rows_hold_a_normalized_density() {
        let rows = histogram_rows("saving", 0.5, 500, 200, 3).unwrap();
        assert_eq!(rows.len() % 3, 0);
        let width = rows[3] - rows[0];
        let mass: f64 = rows.chunks(3).map(|r| r[1] * width).sum();
        assert!((mass - 1.0).abs() < 1e-9, "{mass}");
        assert!(rows.chunks(3).all(|r| r[2] >= 0.0));
    }

    #[test]
    fn oversized_runs_are_refused() {
        assert!(histogram_rows("pure", 0.0, 100_000, 1_000, 1).is_err());
        assert!(histogram_rows("barter", 0.0, 10, 10, 1).is_err());
    }

    #[test]
    fn residual_vanishes_for_full_transfer() {
        let rows = residual_rows(1.0, 0.05, 6.0, 50).unwrap();
        assert!(rows.chunks(2).all(|r| r[1].abs() <= 1e-8));
        assert!(residual_rows(0.3, 0.05, 6.0, 50)
            .unwrap()
            .chunks(2)
            .any(|r| r[1].abs() > 1e-2));
    }

    #[test]
    fn trade_conserves_the_pair_total() {
        let after = trade("angle", 0.4, 2.0, 1.0, 0.3).unwrap();
        assert!((after[0] + after[1] - 3.0).abs() < 1e-14);
        assert!(trade("pure", 0.0, -1.0, 1.0, 0.5).is_err());
    }
}
