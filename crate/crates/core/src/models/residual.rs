//! Exactness test of the Gamma ansatz for the Angle model.
//!
//! If `f = a u^(n-1) exp(-n u/<u>)` were the exact steady state, then
//! `2 u^2 (ln f)'' = -2 (n - 1)`. Feeding the Gamma through the steady-state
//! gain operator gives a closed form for the left-hand side in terms of
//! `1F1(n, 2n-1, .)`; the residual below is that closed form plus `2 (n-1)`,
//! identically zero only when the Gamma is exact.

use super::distributions::GammaSpec;
use super::special::{gamma, hyp1f1};
use super::ModelKind;
use super::ModelParams;
use crate::error::{domain, Result};

pub fn gamma_residual(u: f64, params: &ModelParams) -> Result<f64> {
    let omega = match params.kind() {
        ModelKind::Angle { omega } => omega,
        other => {
            return Err(domain(format!(
                "the Gamma residual is defined for the Angle model, not {}",
                other.name()
            )))
        }
    };
    if !(u > 0.0 && u.is_finite()) {
        return Err(domain(format!("the Gamma residual needs u > 0, got {u}")));
    }
    let spec = GammaSpec::for_model(params)?;
    let (n, a) = (spec.n(), spec.a());
    let beta_n = n / params.mean_wealth();
    let constant = 1.0 / omega + 2.0 * (n - 1.0);
    if omega == 1.0 {
        // 1/Gamma(2n-1) = 1/Gamma(0) kills the 1F1 term; the exponential term
        // decays like exp(-inf)
        return Ok(constant);
    }

    // (n-1) Gamma(n-1) = Gamma(n) keeps the prefactor finite at n = 1
    let gn = gamma(n);
    let prefactor = -a * u.powf(n) * gn * gn / (omega.powf(n) * gamma(2.0 * n - 1.0));
    let z = beta_n * (omega - 1.0) / omega * u;
    let kummer = prefactor * hyp1f1(n, 2.0 * n - 1.0, z)?;

    let decay = beta_n * omega * u / (1.0 - omega);
    let tail = -(-decay).exp() * (1.0 + decay) / (omega * (1.0 - omega).powf(n - 1.0));

    Ok(kummer + tail + constant)
}
