use super::histogram::WealthHistogram;
use super::population::{init_population, InitialCondition, Population};
use super::rng::RngStream;
use crate::error::{domain, Result};
use crate::models::ModelParams;

/// Burn-in before the first histogram sample, in units of `N` steps.
pub const BURN_IN_SWEEPS: u64 = 20;

/// Independent trajectories whose histograms are merged.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub n_agents: usize,
    pub model: ModelParams,
    pub initial: InitialCondition,
    /// Total exchange steps per replica, burn-in included.
    pub steps: u64,
    /// Steps before the first sample; defaults to `20 N` (capped at `steps`).
    pub burn_in: Option<u64>,
    /// Steps between samples; defaults to `N`.
    pub sample_every: Option<u64>,
    pub replicas: usize,
    pub seed: u64,
    pub edges: Vec<f64>,
}

impl EnsembleConfig {
    /// Default burn-in, sampling interval and histogram for `model`.
    pub fn new(n_agents: usize, model: ModelParams, steps: u64, replicas: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            n_agents,
            model,
            initial: InitialCondition::Delta,
            steps,
            burn_in: None,
            sample_every: None,
            replicas,
            seed,
            edges: WealthHistogram::default_for(model.mean_wealth())?.edges().to_vec(),
        })
    }

    pub fn burn_in_steps(&self) -> u64 {
        self.burn_in
            .unwrap_or(BURN_IN_SWEEPS * self.n_agents as u64)
            .min(self.steps)
    }

    pub fn sample_interval(&self) -> u64 {
        self.sample_every.unwrap_or(self.n_agents as u64).max(1)
    }

    fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(domain("need at least one replica"));
        }
        if self.n_agents < 2 {
            return Err(domain(format!(
                "a population needs at least 2 agents, got {}",
                self.n_agents
            )));
        }
        Ok(())
    }
}

/// What one trajectory produced.
#[derive(Debug, Clone)]
pub struct ReplicaOutcome {
    pub seed: u64,
    pub histogram: WealthHistogram,
    pub population: Population,
    /// Number of population snapshots recorded into the histogram.
    pub snapshots: u64,
    /// Mean over snapshots of the population average of `u^2`.
    pub mean_square_wealth: f64,
    pub initial_total: f64,
}

#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    pub histogram: WealthHistogram,
    pub replicas: Vec<ReplicaOutcome>,
}

impl EnsembleOutcome {
    /// Snapshot-weighted mean of `<u^2>` over all replicas.
    pub fn mean_square_wealth(&self) -> f64 {
        let snapshots: u64 = self.replicas.iter().map(|r| r.snapshots).sum();
        if snapshots == 0 {
            return f64::NAN;
        }
        self.replicas
            .iter()
            .map(|r| r.mean_square_wealth * r.snapshots as f64)
            .sum::<f64>()
            / snapshots as f64
    }
}

/// Runs replica `index` with its own derived seed.
pub fn run_replica(config: &EnsembleConfig, index: usize) -> Result<ReplicaOutcome> {
    config.validate()?;
    let mut rng = RngStream::derive(config.seed, index as u64);
    let seed = rng.seed();
    let mut pop = init_population(config.n_agents, config.model, &config.initial, &mut rng)?;
    let initial_total = pop.total_wealth();
    let mut histogram = WealthHistogram::new(config.edges.clone())?;
    let burn_in = config.burn_in_steps();
    let interval = config.sample_interval();
    pop.run(burn_in, &mut rng);
    let mut done = burn_in;
    let mut snapshots = 0u64;
    let mut square_sum = 0.0;
    while done + interval <= config.steps {
        pop.run(interval, &mut rng);
        done += interval;
        histogram.record_all(pop.wealth());
        square_sum += pop.wealth().iter().map(|w| w * w).sum::<f64>() / pop.len() as f64;
        snapshots += 1;
    }
    pop.run(config.steps - done, &mut rng);
    Ok(ReplicaOutcome {
        seed,
        histogram,
        population: pop,
        snapshots,
        mean_square_wealth: if snapshots > 0 {
            square_sum / snapshots as f64
        } else {
            f64::NAN
        },
        initial_total,
    })
}

/// Runs all replicas (in parallel when enabled) and merges their histograms
/// in replica order.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleOutcome> {
    config.validate()?;
    #[cfg(feature = "parallel")]
    let replicas: Vec<ReplicaOutcome> = {
        use rayon::prelude::*;
        (0..config.replicas)
            .into_par_iter()
            .map(|k| run_replica(config, k))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let replicas: Vec<ReplicaOutcome> = (0..config.replicas)
        .map(|k| run_replica(config, k))
        .collect::<Result<_>>()?;

    let mut histogram = WealthHistogram::new(config.edges.clone())?;
    for replica in &replicas {
        histogram.merge(&replica.histogram)?;
    }
    Ok(EnsembleOutcome { histogram, replicas })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(replicas: usize) -> EnsembleConfig {
        EnsembleConfig::new(500, ModelParams::pure(1.0).unwrap(), 100_000, replicas, 11).unwrap()
    }

    #[test]
    fn sampling_schedule() {
        let cfg = config(1);
        assert_eq!(cfg.burn_in_steps(), 10_000);
        assert_eq!(cfg.sample_interval(), 500);
        let out = run_replica(&cfg, 0).unwrap();
        assert_eq!(out.snapshots, 180);
        assert_eq!(out.population.step_count(), 100_000);
        assert_eq!(out.histogram.samples() + out.histogram.overflow(), 180 * 500);
    }

    #[test]
    fn replicas_use_distinct_streams() {
        let out = run_ensemble(&config(3)).unwrap();
        assert_ne!(out.replicas[0].population.wealth(), out.replicas[1].population.wealth());
        assert_ne!(out.replicas[0].seed, out.replicas[1].seed);
        let total: u64 = out.replicas.iter().map(|r| r.histogram.samples()).sum();
        assert_eq!(out.histogram.samples(), total);
    }

    #[test]
    fn ensemble_is_reproducible() {
        let a = run_ensemble(&config(2)).unwrap();
        let b = run_ensemble(&config(2)).unwrap();
        assert_eq!(a.histogram, b.histogram);
        assert_eq!(a.mean_square_wealth(), b.mean_square_wealth());
    }

    #[test]
    fn rejects_empty_ensemble() {
        assert!(run_ensemble(&config(0)).is_err());
    }
}
