use std::sync::Arc;

use super::population::Population;
use crate::error::{contract, domain, Result};
use crate::grid::{GridPdf, WealthGrid};

/// Default binning: this many equal bins on `[0, DEFAULT_RANGE * <u>]`.
pub const DEFAULT_BINS: usize = 200;
pub const DEFAULT_RANGE: f64 = 10.0;

/// Occupancy counts of wealth bins.
///
/// `samples` is the number of in-range observations, so the density
/// `counts / (samples * width)` integrates to one. Observations outside the
/// edges are kept in `underflow` and `overflow`.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthHistogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
    samples: u64,
    underflow: u64,
    overflow: u64,
    /// `(lo, 1/width)` when the edges are equally spaced.
    uniform: Option<(f64, f64)>,
}

impl WealthHistogram {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(domain("a histogram needs at least two edges"));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("histogram edges must be finite and strictly increasing"));
        }
        let bins = edges.len() - 1;
        let width = (edges[bins] - edges[0]) / bins as f64;
        let uniform = edges
            .iter()
            .enumerate()
            .all(|(k, e)| (e - (edges[0] + k as f64 * width)).abs() <= 1e-12 * width.max(e.abs()))
            .then_some((edges[0], 1.0 / width));
        Ok(Self {
            counts: vec![0; bins],
            edges,
            samples: 0,
            underflow: 0,
            overflow: 0,
            uniform,
        })
    }

    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(domain("need at least one bin and hi > lo"));
        }
        let width = (hi - lo) / bins as f64;
        Self::new(
            (0..=bins)
                .map(|k| if k == bins { hi } else { lo + k as f64 * width })
                .collect(),
        )
    }

    /// 200 bins on `[0, 10 <u>]`.
    pub fn default_for(mean_wealth: f64) -> Result<Self> {
        Self::uniform(0.0, DEFAULT_RANGE * mean_wealth, DEFAULT_BINS)
    }

    /// An empty histogram with the same edges.
    pub fn empty_like(&self) -> Self {
        Self {
            counts: vec![0; self.counts.len()],
            samples: 0,
            underflow: 0,
            overflow: 0,
            ..self.clone()
        }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    /// Bin of `u`, if inside the edges. The last bin is closed on the right.
    #[inline]
    fn bin(&self, u: f64) -> Option<usize> {
        let last = self.counts.len() - 1;
        if u < self.edges[0] || u > self.edges[last + 1] {
            return None;
        }
        let k = match self.uniform {
            Some((lo, inv_width)) => {
                let guess = (((u - lo) * inv_width) as usize).min(last);
                // rounding can put u one bin off the exact edges
                if u < self.edges[guess] {
                    guess - 1
                } else if guess < last && u >= self.edges[guess + 1] {
                    guess + 1
                } else {
                    guess
                }
            }
            None => (self.edges.partition_point(|&e| e <= u) - 1).min(last),
        };
        Some(k)
    }

    pub fn record(&mut self, u: f64) {
        match self.bin(u) {
            Some(k) => {
                self.counts[k] += 1;
                self.samples += 1;
            }
            None if u < self.edges[0] => self.underflow += 1,
            None => self.overflow += 1,
        }
    }

    pub fn record_all(&mut self, wealth: &[f64]) {
        for &u in wealth {
            self.record(u);
        }
    }

    pub fn merge(&mut self, other: &WealthHistogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(contract("cannot merge histograms with different edges"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.samples += other.samples;
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        Ok(())
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `counts / (samples * width)` per bin.
    pub fn density(&self) -> Result<Vec<f64>> {
        if self.samples == 0 {
            return Err(domain("histogram holds no in-range samples"));
        }
        let total = self.samples as f64;
        Ok(self
            .counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, w)| c as f64 / (total * (w[1] - w[0])))
            .collect())
    }

    /// Bin-centre densities interpolated linearly onto `grid`, held flat
    /// between the outer centres and edges, zero outside the edges, then
    /// normalized on the grid.
    pub fn to_grid_pdf(&self, grid: Arc<WealthGrid>, mean_wealth: f64) -> Result<GridPdf> {
        let density = self.density()?;
        let centers = self.centers();
        let (lo, hi) = (self.edges[0], self.edges[self.edges.len() - 1]);
        let last = centers.len() - 1;
        let pdf = GridPdf::from_fn(grid, mean_wealth, |u| {
            if u < lo || u > hi {
                0.0
            } else if u <= centers[0] {
                density[0]
            } else if u >= centers[last] {
                density[last]
            } else {
                let k = centers.partition_point(|&c| c <= u) - 1;
                let t = (u - centers[k]) / (centers[k + 1] - centers[k]);
                density[k] + t * (density[k + 1] - density[k])
            }
        })?;
        pdf.normalize()
    }
}

/// Occupancy of `pop`'s wealths in bins with the given edges.
pub fn histogram(pop: &Population, edges: Vec<f64>) -> Result<WealthHistogram> {
    let mut hist = WealthHistogram::new(edges)?;
    hist.record_all(pop.wealth());
    Ok(hist)
}
