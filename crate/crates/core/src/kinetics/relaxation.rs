use crate::error::{domain, Error, Result};
use crate::grid::{distance, GridPdf};
use crate::models::ModelParams;

use super::evolution::{advance_with, EvolutionState, Integrator};

/// Distances below this are numerical noise, not signal.
pub const DISTANCE_FLOOR: f64 = 1e-10;
/// Minimum number of samples a fit is built from.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Exponential fit `d(t) ~ exp(-t / tau)` of the distance to equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationFit {
    pub tau: f64,
    pub tau_over_n: f64,
    /// Root-mean-square residual of the fit of `ln d`.
    pub rms_residual: f64,
    /// `(t_start, t_end)` in exchange steps.
    pub window: (f64, f64),
    /// `(t, d(t))` for every sample used.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationOptions {
    /// Time step as a fraction of `N`.
    pub step_fraction: f64,
    /// Length of the observation window as a multiple of `N`.
    pub window_fraction: f64,
    pub integrator: Integrator,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        Self {
            step_fraction: 0.1,
            window_fraction: 3.0,
            integrator: Integrator::IntegratingFactor,
        }
    }
}

/// Evolves `f0` towards `f_eq` and fits the L1 distance with an exponential.
pub fn relaxation_time(model: &ModelParams, f0: &GridPdf, f_eq: &GridPdf, n_agents: usize) -> Result<RelaxationFit> {
    relaxation_time_with(model, f0, f_eq, n_agents, RelaxationOptions::default())
}

pub fn relaxation_time_with(
    model: &ModelParams,
    f0: &GridPdf,
    f_eq: &GridPdf,
    n_agents: usize,
    options: RelaxationOptions,
) -> Result<RelaxationFit> {
    let n = n_agents as f64;
    let dt = options.step_fraction * n;
    if !(options.window_fraction > 0.0) {
        return Err(domain("observation window must be positive"));
    }
    let steps = (options.window_fraction / options.step_fraction).round() as usize;
    if steps + 1 < MIN_FIT_SAMPLES {
        return Err(domain(format!(
            "{} samples are fewer than the {MIN_FIT_SAMPLES} a fit needs",
            steps + 1
        )));
    }
    let mut state = EvolutionState::new(f0.clone(), *model, n_agents)?;
    let mut samples = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        if k > 0 {
            state = advance_with(&state, dt, options.integrator)?;
        }
        let d = distance(state.pdf(), f_eq)?.l1;
        if d < DISTANCE_FLOOR {
            if samples.len() < MIN_FIT_SAMPLES {
                return Err(Error::PerturbationTooSmall {
                    threshold: DISTANCE_FLOOR,
                    samples: samples.len(),
                });
            }
            break;
        }
        samples.push((state.time(), d));
    }
    let (slope, rms) = fit_log_linear(&samples);
    if !(slope < 0.0) {
        return Err(Error::Numeric(format!(
            "distance to equilibrium does not decay (slope {slope:e})"
        )));
    }
    let tau = -1.0 / slope;
    Ok(RelaxationFit {
        tau,
        tau_over_n: tau / n,
        rms_residual: rms,
        window: (samples[0].0, samples[samples.len() - 1].0),
        samples,
    })
}

/// Least-squares line through `(t, ln d)`; returns the slope and the rms residual.
fn fit_log_linear(samples: &[(f64, f64)]) -> (f64, f64) {
    let m = samples.len() as f64;
    let points: Vec<(f64, f64)> = samples.iter().map(|&(t, d)| (t, d.ln())).collect();
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / m;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|(t, y)| (t - t_mean) * (y - y_mean)).sum();
    let sxx: f64 = points.iter().map(|(t, _)| (t - t_mean) * (t - t_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let rms = (points
        .iter()
        .map(|(t, y)| (y - intercept - slope * t).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    (slope, rms)
}

/// `f + amplitude * f * (w(u) - p(u) u e^(-u/m))`, with `m` the mean wealth,
/// `w(u) = sin(2 pi u / period) (1 - e^(-(u/period)^2))` a wave switched off
/// below one period, and the polynomial `p` of degree `matched_moments`
/// chosen so that the perturbation has no moments of order `-1` through
/// `matched_moments - 1`. The damping factor keeps the correction bounded.
///
/// The slowly relaxing modes of the kinetic operators are low-order moment
/// modes, and for scale-free loser rules the `1/u` moment; removing them
/// isolates the local decay at rate `2/N`.
pub fn oscillatory_perturbation(f: &GridPdf, amplitude: f64, period: f64, matched_moments: usize) -> Result<GridPdf> {
    if !(period > 0.0) || !amplitude.is_finite() {
        return Err(domain("perturbation period must be positive and amplitude finite"));
    }
    if matched_moments == 0 || matched_moments > 6 {
        return Err(domain("between 1 and 6 moments can be matched"));
    }
    let grid = f.grid();
    let x = grid.nodes();
    let scale = f.mean_wealth();
    let wave: Vec<f64> = x
        .iter()
        .map(|u| (std::f64::consts::TAU * u / period).sin() * -(-(u / period).powi(2)).exp_m1())
        .collect();
    let moment = |g: &dyn Fn(usize) -> f64| -> Result<f64> {
        let values: Vec<f64> = (0..x.len()).map(|i| f.values()[i] * g(i)).collect();
        grid.integrate(&values)
    };
    // orders -1 ..= matched_moments - 1; the basis vanishes at 0 so every order is finite
    let orders: Vec<i32> = (-1..matched_moments as i32).collect();
    let monomial = |i: usize, k: i32| if x[i] > 0.0 { (x[i] / scale).powi(k) } else { 0.0 };
    let basis = |i: usize, j: usize| (x[i] / scale).powi(j as i32 + 1) * (-x[i] / scale).exp();
    // sum_j c_j <basis_j u^k> = <wave u^k> for every order k
    let m = orders.len();
    let mut system = vec![vec![0.0; m + 1]; m];
    for (row, &k) in system.iter_mut().zip(&orders) {
        for (j, cell) in row.iter_mut().take(m).enumerate() {
            *cell = moment(&|i| basis(i, j) * monomial(i, k))?;
        }
        row[m] = moment(&|i| monomial(i, k) * wave[i])?;
    }
    let coefficients = solve_dense(system)?;
    let values: Vec<f64> = (0..x.len())
        .map(|i| {
            let poly: f64 = coefficients.iter().enumerate().map(|(j, c)| c * basis(i, j)).sum();
            (f.values()[i] * (1.0 + amplitude * (wave[i] - poly))).max(0.0)
        })
        .collect();
    f.with_values(values)?.normalize()
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve_dense(mut a: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Numeric("singular moment matrix".into()));
        }
        a.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..=n {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][n] - tail) / a[row][row];
    }
    Ok(x)
}
