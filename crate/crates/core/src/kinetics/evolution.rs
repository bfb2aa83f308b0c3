use crate::error::{contract, domain, Error, Result};
use crate::grid::GridPdf;
use crate::models::ModelParams;

use super::gain::total_gain;

/// Clipped mass above which a time step is considered unstable.
pub const MAX_CLIPPED_MASS: f64 = 1e-3;

/// A density evolving under the kinetic equation of one model.
///
/// `time` counts exchange steps; `n_agents` is the `N` in `N df/dt`.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    pdf: GridPdf,
    model: ModelParams,
    time: f64,
    n_agents: usize,
    last_clipped_mass: f64,
}

/// How `advance` discretizes `N df/dt = -2 f + gain[f]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// `f += (dt/N)(-2 f + gain)`.
    Euler,
    /// Exact for the linear loss: `f = e^(-2 dt/N) f + (1 - e^(-2 dt/N)) gain/2`.
    #[default]
    IntegratingFactor,
}

impl EvolutionState {
    /// The density is normalized on entry.
    pub fn new(pdf: GridPdf, model: ModelParams, n_agents: usize) -> Result<Self> {
        if n_agents < 2 {
            return Err(domain(format!("need at least 2 agents, got {n_agents}")));
        }
        if (pdf.mean_wealth() - model.mean_wealth()).abs() > 1e-12 * model.mean_wealth() {
            return Err(contract(format!(
                "density mean wealth {} differs from the model's {}",
                pdf.mean_wealth(),
                model.mean_wealth()
            )));
        }
        Ok(Self {
            pdf: pdf.normalize()?,
            model,
            time: 0.0,
            n_agents,
            last_clipped_mass: 0.0,
        })
    }

    pub fn pdf(&self) -> &GridPdf {
        &self.pdf
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// Negative mass removed by the most recent `advance`.
    pub fn last_clipped_mass(&self) -> f64 {
        self.last_clipped_mass
    }

    /// Largest step allowed by the stability bound `dt <= N/4`.
    pub fn max_step(&self) -> f64 {
        self.n_agents as f64 / 4.0
    }
}

/// `N df/dt` at every node.
pub fn evolution_rate(state: &EvolutionState) -> Result<Vec<f64>> {
    let gain = total_gain(&state.pdf, &state.model)?;
    Ok(state.pdf.values().iter().zip(gain).map(|(f, g)| g - 2.0 * f).collect())
}

/// One explicit Euler step of `dt` exchange steps.
pub fn advance(state: &EvolutionState, dt: f64) -> Result<EvolutionState> {
    advance_with(state, dt, Integrator::Euler)
}

pub fn advance_with(state: &EvolutionState, dt: f64, integrator: Integrator) -> Result<EvolutionState> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(domain(format!("time step must be nonnegative, got {dt}")));
    }
    if dt > state.max_step() {
        return Err(domain(format!(
            "time step {dt} exceeds the stability bound N/4 = {}",
            state.max_step()
        )));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let h = dt / state.n_agents as f64;
    let gain = total_gain(&state.pdf, &state.model)?;
    let (keep, blend) = match integrator {
        Integrator::Euler => (1.0 - 2.0 * h, h),
        Integrator::IntegratingFactor => {
            let decay = (-2.0 * h).exp();
            (decay, 0.5 * (1.0 - decay))
        }
    };
    let mut next: Vec<f64> = state
        .pdf
        .values()
        .iter()
        .zip(&gain)
        .map(|(f, g)| keep * f + blend * g)
        .collect();

    let grid = state.pdf.grid();
    let negative: Vec<f64> = next.iter().map(|v| (-v).max(0.0)).collect();
    let clipped = grid.integrate(&negative)?;
    if clipped > MAX_CLIPPED_MASS {
        return Err(Error::Numeric(format!(
            "step of {dt} produced {clipped:e} negative mass; the evolution is unstable"
        )));
    }
    for v in &mut next {
        *v = v.max(0.0);
    }
    Ok(EvolutionState {
        pdf: state.pdf.with_values(next)?.normalize()?,
        model: state.model,
        time: state.time + dt,
        n_agents: state.n_agents,
        last_clipped_mass: clipped,
    })
}
