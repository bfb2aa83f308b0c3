//! Pair-update rules. Each returns the post-trade wealths `(u_i', u_j')`.
//!
//! The second output is always formed as `total - first` (or the loser's
//! remainder), so `u_i' + u_j'` differs from `u_i + u_j` by at most one
//! rounding.

use super::{ModelKind, ModelParams};
use crate::error::{domain, Result};

fn check_inputs(u_i: f64, u_j: f64, eps: f64) -> Result<()> {
    if !(u_i >= 0.0 && u_j >= 0.0) || !u_i.is_finite() || !u_j.is_finite() {
        return Err(domain(format!(
            "wealths must be finite and nonnegative, got ({u_i}, {u_j})"
        )));
    }
    // the open interval endpoints are accepted as limits
    if !(0.0..=1.0).contains(&eps) {
        return Err(domain(format!("eps must lie in (0,1), got {eps}")));
    }
    Ok(())
}

#[inline]
pub(super) fn pure(u_i: f64, u_j: f64, eps: f64) -> (f64, f64) {
    let total = u_i + u_j;
    let new_i = (eps * total).min(total);
    (new_i, total - new_i)
}

#[inline]
pub(super) fn saving(u_i: f64, u_j: f64, eps: f64, lambda: f64) -> (f64, f64) {
    let total = u_i + u_j;
    let new_i = (lambda * u_i + eps * (1.0 - lambda) * total).min(total);
    (new_i, total - new_i)
}

#[inline]
pub(super) fn angle(u_i: f64, u_j: f64, eps: f64, omega: f64) -> (f64, f64) {
    let transfer = eps * omega * u_j;
    (u_i + transfer, u_j - transfer)
}

/// `(eps U, (1 - eps) U)` with `U = u_i + u_j`.
pub fn exchange_pure(u_i: f64, u_j: f64, eps: f64) -> Result<(f64, f64)> {
    check_inputs(u_i, u_j, eps)?;
    Ok(pure(u_i, u_j, eps))
}

/// `(lambda u_i + eps (1-lambda) U, lambda u_j + (1-eps)(1-lambda) U)`.
pub fn exchange_saving(u_i: f64, u_j: f64, eps: f64, params: &ModelParams) -> Result<(f64, f64)> {
    check_inputs(u_i, u_j, eps)?;
    match params.kind() {
        ModelKind::Saving { lambda } => Ok(saving(u_i, u_j, eps, lambda)),
        other => Err(domain(format!("exchange_saving called with a {} model", other.name()))),
    }
}

/// `(u_i + eps omega u_j, u_j - eps omega u_j)`: agent `j` is the loser.
pub fn exchange_angle(u_i: f64, u_j: f64, eps: f64, params: &ModelParams) -> Result<(f64, f64)> {
    check_inputs(u_i, u_j, eps)?;
    match params.kind() {
        ModelKind::Angle { omega } => Ok(angle(u_i, u_j, eps, omega)),
        other => Err(domain(format!("exchange_angle called with a {} model", other.name()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn saving_params(lambda: f64) -> ModelParams {
        ModelParams::saving(lambda, 1.0).unwrap()
    }

    fn angle_params(omega: f64) -> ModelParams {
        ModelParams::angle(omega, 1.0).unwrap()
    }

    #[test]
    fn pure_examples() {
        assert_eq!(exchange_pure(1.0, 1.0, 0.25).unwrap(), (0.5, 1.5));
        assert_eq!(exchange_pure(2.0, 0.0, 0.5).unwrap(), (1.0, 1.0));
        for eps in [0.1, 0.5, 0.9] {
            assert_eq!(exchange_pure(0.0, 0.0, eps).unwrap(), (0.0, 0.0));
        }
        assert!(exchange_pure(1.0, 1.0, 1.5).is_err());
        assert!(exchange_pure(1.0, 1.0, -0.1).is_err());
        assert!(exchange_pure(-1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn saving_examples() {
        let half = saving_params(0.5);
        assert_eq!(exchange_saving(1.0, 1.0, 0.5, &half).unwrap(), (1.0, 1.0));
        assert_eq!(exchange_saving(1.0, 1.0, 1.0, &half).unwrap(), (1.5, 0.5));
        assert_eq!(
            exchange_saving(1.0, 1.0, 0.25, &saving_params(0.0)).unwrap(),
            (0.5, 1.5)
        );
        assert!(exchange_saving(1.0, 1.0, 0.5, &angle_params(0.5)).is_err());
    }

    #[test]
    fn angle_examples() {
        assert_eq!(exchange_angle(0.0, 1.0, 1.0, &angle_params(0.5)).unwrap(), (0.5, 0.5));
        assert_eq!(exchange_angle(1.0, 1.0, 1.0, &angle_params(1.0)).unwrap(), (2.0, 0.0));
        assert_eq!(exchange_angle(1.0, 2.0, 0.5, &angle_params(0.5)).unwrap(), (1.5, 1.5));
        assert!(exchange_angle(1.0, 1.0, 0.5, &saving_params(0.5)).is_err());
    }

    #[test]
    fn saving_without_saving_is_pure_bitwise() {
        use rand_core::{RngCore, SeedableRng};
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(11);
        let mut unit = || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let zero = saving_params(0.0);
        for _ in 0..1_000_000 {
            let (a, b, e) = (10.0 * unit(), 10.0 * unit(), unit());
            let p = exchange_pure(a, b, e).unwrap();
            let s = exchange_saving(a, b, e, &zero).unwrap();
            assert_eq!(p.0.to_bits(), s.0.to_bits());
            assert_eq!(p.1.to_bits(), s.1.to_bits());
        }
    }

    fn model_strategy() -> impl Strategy<Value = ModelParams> {
        prop_oneof![
            Just(ModelParams::pure(1.0).unwrap()),
            (0.0..0.999f64).prop_map(saving_params),
            (1e-3..=1.0f64).prop_map(angle_params),
        ]
    }

    proptest! {
        #[test]
        fn conserves_and_stays_nonnegative(
            model in model_strategy(),
            u_i in 0.0..1e3f64,
            u_j in 0.0..1e3f64,
            eps in 0.0..=1.0f64,
        ) {
            let (a, b) = model.exchange(u_i, u_j, eps);
            let total = u_i + u_j;
            prop_assert!(a >= 0.0 && b >= 0.0);
            prop_assert!((a + b - total).abs() <= 1e-15 * total.max(f64::MIN_POSITIVE));
            match model.kind() {
                ModelKind::Saving { lambda } => {
                    prop_assert!(a >= lambda * u_i * (1.0 - 1e-15));
                    prop_assert!(b >= lambda * u_j * (1.0 - 1e-15) - 1e-15 * total);
                }
                ModelKind::Angle { omega } => prop_assert!(b >= (1.0 - omega) * u_j * (1.0 - 1e-15)),
                ModelKind::PureRandom => {}
            }
        }

        #[test]
        fn symmetric_rules_swap(
            lambda in 0.0..0.999f64,
            u_i in 0.0..1e3f64,
            u_j in 0.0..1e3f64,
            eps in 0.0..=1.0f64,
        ) {
            for model in [ModelParams::pure(1.0).unwrap(), saving_params(lambda)] {
                let (a, b) = model.exchange(u_i, u_j, eps);
                let (b2, a2) = model.exchange(u_j, u_i, 1.0 - eps);
                let scale = (u_i + u_j).max(1e-300);
                prop_assert!((a - a2).abs() <= 4e-15 * scale);
                prop_assert!((b - b2).abs() <= 4e-15 * scale);
            }
        }
    }
}
