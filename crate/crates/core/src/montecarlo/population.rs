use rand_core::RngCore;

use super::rng::{open_unit, uniform_below};
use crate::error::{domain, Result};
use crate::grid::GridPdf;
use crate::models::ModelParams;

/// Starting wealths of a population.
#[derive(Debug, Clone)]
pub enum InitialCondition {
    /// Every agent holds the mean wealth.
    Delta,
    /// Independent exponential draws.
    Exponential,
    /// Independent draws from a density on a grid.
    Custom(GridPdf),
}

impl InitialCondition {
    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::Delta => "delta",
            InitialCondition::Exponential => "exponential",
            InitialCondition::Custom(_) => "custom",
        }
    }
}

/// Agents trading under one exchange rule.
///
/// The total wealth is `N <u>` and every wealth is nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    wealth: Vec<f64>,
    model: ModelParams,
    step_count: u64,
}

pub fn init_population<R: RngCore + ?Sized>(
    n_agents: usize,
    model: ModelParams,
    initial: &InitialCondition,
    rng: &mut R,
) -> Result<Population> {
    if n_agents < 2 {
        return Err(domain(format!("a population needs at least 2 agents, got {n_agents}")));
    }
    let mean = model.mean_wealth();
    let mut wealth: Vec<f64> = match initial {
        InitialCondition::Delta => vec![mean; n_agents],
        InitialCondition::Exponential => (0..n_agents).map(|_| -mean * open_unit(rng).ln()).collect(),
        InitialCondition::Custom(pdf) => {
            let sampler = InverseCdf::new(pdf)?;
            (0..n_agents).map(|_| sampler.sample(open_unit(rng))).collect()
        }
    };
    if !matches!(initial, InitialCondition::Delta) {
        let total: f64 = wealth.iter().sum();
        if !(total > 0.0) {
            return Err(domain("initial draws carry no wealth"));
        }
        let scale = mean * n_agents as f64 / total;
        for w in &mut wealth {
            *w *= scale;
        }
    }
    Ok(Population {
        wealth,
        model,
        step_count: 0,
    })
}

/// Inverse of the piecewise-linear CDF through the node values of a density.
struct InverseCdf {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    fn new(pdf: &GridPdf) -> Result<Self> {
        let cumulative = pdf.cumulative();
        let total = cumulative.total();
        if !(total > 0.0) {
            return Err(domain("cannot sample from a density with no mass"));
        }
        let mut nodes = vec![0.0];
        let mut cdf = vec![0.0];
        for (&x, &c) in pdf.grid().nodes().iter().zip(cumulative.at_nodes()) {
            if x > 0.0 {
                nodes.push(x);
                cdf.push(c / total);
            }
        }
        Ok(Self { nodes, cdf })
    }

    fn sample(&self, p: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c < p).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let t = if c1 > c0 { (p - c0) / (c1 - c0) } else { 0.0 };
        self.nodes[k - 1] + t.clamp(0.0, 1.0) * (self.nodes[k] - self.nodes[k - 1])
    }
}

impl Population {
    pub fn wealth(&self) -> &[f64] {
        &self.wealth
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn len(&self) -> usize {
        self.wealth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wealth.is_empty()
    }

    pub fn total_wealth(&self) -> f64 {
        self.wealth.iter().sum()
    }

    /// Rebuilds a population from stored wealths, e.g. a snapshot file.
    pub fn from_parts(wealth: Vec<f64>, model: ModelParams, step_count: u64) -> Result<Self> {
        if wealth.len() < 2 {
            return Err(domain("a population needs at least 2 agents"));
        }
        if let Some(w) = wealth.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(domain(format!("wealth must be finite and nonnegative, got {w}")));
        }
        Ok(Self {
            wealth,
            model,
            step_count,
        })
    }

    /// One exchange between a uniformly drawn ordered pair of distinct agents.
    /// For the Angle rule the second agent of the pair is the loser.
    #[inline]
    pub fn step<R: RngCore + ?Sized>(&mut self, rng: &mut R) {
        let n = self.wealth.len() as u64;
        let i = uniform_below(rng, n) as usize;
        let j = loop {
            let j = uniform_below(rng, n) as usize;
            if j != i {
                break j;
            }
        };
        let eps = open_unit(rng);
        let (new_i, new_j) = self.model.exchange(self.wealth[i], self.wealth[j], eps);
        self.wealth[i] = new_i;
        self.wealth[j] = new_j;
        self.step_count += 1;
    }

    pub fn run<R: RngCore + ?Sized>(&mut self, n_steps: u64, rng: &mut R) {
        for _ in 0..n_steps {
            self.step(rng);
        }
    }
}
