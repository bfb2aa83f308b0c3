//! Wealth grids and densities sampled on them.
//!
//! A [`WealthGrid`] is an increasing list of wealth nodes. Integrals use the
//! composite trapezoid rule over the nodes; on grids whose first node is above
//! zero (the log-head preset) the cell `[0, nodes[0]]` is integrated
//! analytically by assuming a local power law fitted through the first two
//! samples, which is what keeps integrable `u^(n-1)` singularities finite.
//! Everything above `u_max` is treated as exactly zero.

use std::sync::Arc;

use crate::error::{contract, domain, Error, Result};

/// Nodes in the default uniform grid.
pub const DEFAULT_NODES: usize = 4001;
/// Default truncation bound in units of the mean wealth.
pub const DEFAULT_SPAN: f64 = 40.0;
/// First node of the log-head preset, in units of the mean wealth.
pub const LOG_HEAD_FIRST: f64 = 1e-4;
/// Where the log-spaced head hands over to uniform spacing, in units of the mean wealth.
pub const LOG_HEAD_KNEE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    /// Equally spaced nodes starting at zero.
    Uniform,
    /// Log-spaced nodes from a small positive first node up to a knee, then
    /// equally spaced up to `u_max`. The cell below the first node is
    /// integrated analytically.
    LogHead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WealthGrid {
    nodes: Vec<f64>,
    spacing: Spacing,
    /// Spacing of the uniform part of the grid.
    step: f64,
    /// Trapezoid weights over the nodes (the head cell is not included).
    weights: Vec<f64>,
}

impl WealthGrid {
    /// `n_nodes` equally spaced nodes on `[0, u_max]`.
    pub fn uniform(u_max: f64, n_nodes: usize) -> Result<Self> {
        if !(u_max > 0.0 && u_max.is_finite()) {
            return Err(domain(format!("u_max must be positive, got {u_max}")));
        }
        if n_nodes < 3 {
            return Err(domain(format!("a grid needs at least 3 nodes, got {n_nodes}")));
        }
        let step = u_max / (n_nodes - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_nodes).map(|k| k as f64 * step).collect();
        nodes[n_nodes - 1] = u_max;
        Ok(Self::build(nodes, Spacing::Uniform, step))
    }

    /// Log-spaced nodes on `[first, knee]` with ratio close to `1 + step/knee`,
    /// then uniform nodes with spacing `step` up to `u_max`.
    pub fn log_head(first: f64, knee: f64, step: f64, u_max: f64) -> Result<Self> {
        if !(first > 0.0 && first < knee && knee < u_max && step > 0.0 && step < u_max - knee) {
            return Err(domain(format!(
                "log-head grid needs 0 < first < knee < u_max and 0 < step < u_max - knee \
                 (first={first}, knee={knee}, step={step}, u_max={u_max})"
            )));
        }
        // match the relative spacing at the knee so the hand-over is smooth
        let ratio_step = step / knee;
        let n_log = ((knee / first).ln() / ratio_step.ln_1p()).ceil() as usize;
        let mut nodes = Vec::with_capacity(n_log + ((u_max - knee) / step) as usize + 2);
        for i in 0..n_log {
            nodes.push(first * (knee / first).powf(i as f64 / n_log as f64));
        }
        let n_lin = ((u_max - knee) / step).round() as usize;
        let lin_step = (u_max - knee) / n_lin as f64;
        for k in 0..=n_lin {
            nodes.push(knee + k as f64 * lin_step);
        }
        let last = nodes.len() - 1;
        nodes[last] = u_max;
        Ok(Self::build(nodes, Spacing::LogHead, lin_step))
    }

    /// The default grid: 4001 uniform nodes on `[0, 40 <u>]`.
    pub fn default_for(mean_wealth: f64) -> Result<Self> {
        Self::uniform(DEFAULT_SPAN * mean_wealth, DEFAULT_NODES)
    }

    /// The log-head preset used for densities that diverge at zero.
    pub fn log_head_for(mean_wealth: f64) -> Result<Self> {
        let step = DEFAULT_SPAN * mean_wealth / (DEFAULT_NODES - 1) as f64;
        Self::log_head(
            LOG_HEAD_FIRST * mean_wealth,
            LOG_HEAD_KNEE * mean_wealth,
            step,
            DEFAULT_SPAN * mean_wealth,
        )
    }

    /// Rebuilds a grid from explicit nodes, e.g. read back from a file.
    ///
    /// Nodes starting at zero must be equally spaced; nodes starting above
    /// zero are treated as a log-head grid.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(domain("a grid needs at least 3 nodes"));
        }
        if nodes.iter().any(|x| !x.is_finite()) || nodes[0] < 0.0 {
            return Err(domain("grid nodes must be finite and nonnegative"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("grid nodes must be strictly increasing"));
        }
        let last = nodes.len() - 1;
        let step = nodes[last] - nodes[last - 1];
        if nodes[0] == 0.0 {
            let h = nodes[last] / last as f64;
            let uniform = nodes
                .iter()
                .enumerate()
                .all(|(k, &x)| (x - k as f64 * h).abs() <= 1e-9 * nodes[last]);
            if !uniform {
                return Err(domain("a grid starting at zero must be uniformly spaced"));
            }
            Ok(Self::build(nodes, Spacing::Uniform, h))
        } else {
            Ok(Self::build(nodes, Spacing::LogHead, step))
        }
    }

    fn build(nodes: Vec<f64>, spacing: Spacing, step: f64) -> Self {
        let mut weights = vec![0.0; nodes.len()];
        for (i, w) in nodes.windows(2).enumerate() {
            let half = 0.5 * (w[1] - w[0]);
            weights[i] += half;
            weights[i + 1] += half;
        }
        Self {
            nodes,
            spacing,
            step,
            weights,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn u_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    /// Spacing of the uniform part of the grid.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same nodes (up to rounding in the last digit).
    pub fn compatible(&self, other: &WealthGrid) -> bool {
        std::ptr::eq(self, other)
            || (self.nodes.len() == other.nodes.len()
                && self
                    .nodes
                    .iter()
                    .zip(&other.nodes)
                    .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0)))
    }

    /// Cell containing `u`: returns `(i, t)` with `u = x_i + t (x_{i+1} - x_i)`,
    /// `0 <= i <= len - 2`. `u` is clamped to `[first, u_max]`.
    pub fn locate(&self, u: f64) -> (usize, f64) {
        let n = self.nodes.len();
        let u = u.clamp(self.nodes[0], self.nodes[n - 1]);
        let i = match self.spacing {
            Spacing::Uniform => ((u / self.step) as usize).min(n - 2),
            Spacing::LogHead => self.nodes.partition_point(|&x| x <= u).saturating_sub(1).min(n - 2),
        };
        // guard against rounding in the uniform index computation
        let i = if u < self.nodes[i] && i > 0 { i - 1 } else { i };
        let i = if i + 2 < n && u >= self.nodes[i + 1] { i + 1 } else { i };
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        (i, ((u - a) / (b - a)).clamp(0.0, 1.0))
    }

    /// Linear interpolation of node values. Zero above `u_max`; the first value
    /// below the first node.
    pub(crate) fn interpolate_values(&self, values: &[f64], u: f64) -> f64 {
        if u > self.u_max() {
            return 0.0;
        }
        if u <= self.nodes[0] {
            return values[0];
        }
        let (i, t) = self.locate(u);
        values[i] + t * (values[i + 1] - values[i])
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.nodes.len() {
            return Err(contract(format!(
                "integrand has {} values but the grid has {} nodes",
                values.len(),
                self.nodes.len()
            )));
        }
        Ok(())
    }

    /// Trapezoid integral of node values over the grid, including the head cell.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values)?;
        Ok(self.integrate_unchecked(values))
    }

    pub(crate) fn integrate_unchecked(&self, values: &[f64]) -> f64 {
        let body: f64 = self.weights.iter().zip(values).map(|(w, v)| w * v).sum();
        body + self.head_law(values).integral_to(self.nodes[0]) + self.zero_start_correction(values)
    }

    /// A density that vanishes at a zero first node like `u^p` with `p < 1`
    /// is badly served by the straight line on `[0, x_1]`; the power law
    /// through the next two samples replaces it. Linear data (`p = 1`) gets
    /// no correction.
    pub(crate) fn zero_start_law(&self, values: &[f64]) -> Option<HeadLaw> {
        if self.nodes[0] != 0.0 || values[0] != 0.0 || !(values[1] > 0.0 && values[2] > 0.0) {
            return None;
        }
        Some(HeadLaw::fit(self.nodes[1], self.nodes[2], values[1], values[2]))
    }

    pub(crate) fn zero_start_correction(&self, values: &[f64]) -> f64 {
        self.zero_start_law(values)
            .map(|law| law.integral_to(self.nodes[1]) - 0.5 * self.nodes[1] * values[1])
            .unwrap_or(0.0)
    }

    /// `int |a - b|`. The power-law cells are fitted to `a` and `b` separately
    /// and compared by mass; fitting `|a - b|` itself is unstable where the
    /// difference changes sign.
    fn l1_unchecked(&self, a: &[f64], b: &[f64], diff: &[f64]) -> f64 {
        let body: f64 = self.weights.iter().zip(diff).map(|(w, v)| w * v).sum();
        let head = (self.head_law(a).integral_to(self.nodes[0]) - self.head_law(b).integral_to(self.nodes[0])).abs();
        let first_cell = |v: &[f64]| 0.5 * self.nodes[1] * (v[0] + v[1]) + self.zero_start_correction(v);
        let zero_start = if self.nodes[0] == 0.0 {
            (first_cell(a) - first_cell(b)).abs() - 0.5 * self.nodes[1] * (diff[0] + diff[1])
        } else {
            0.0
        };
        body + head + zero_start
    }

    /// Power law through the first two samples, used on `[0, nodes[0]]`.
    pub(crate) fn head_law(&self, values: &[f64]) -> HeadLaw {
        HeadLaw::fit(self.nodes[0], self.nodes[1], values[0], values[1])
    }

    /// Running integral `F(x) = int_0^x v du` of node values.
    pub fn cumulative<'a>(&'a self, values: &'a [f64]) -> Result<Cumulative<'a>> {
        self.check_len(values)?;
        Ok(Cumulative::new(self, values))
    }
}

const GAUSS_LEGENDRE_8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Local power law `v(u) = v0 (u/x0)^p` on the head cell `[0, x0]`.
///
/// Falls back to the linear extrapolation through the first two samples when
/// they do not share a positive sign.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HeadLaw {
    x0: f64,
    v0: f64,
    kind: HeadKind,
}

#[derive(Debug, Clone, Copy)]
enum HeadKind {
    Empty,
    Power(f64),
    Linear(f64),
}

impl HeadLaw {
    /// Exponents at or below -1 are not integrable; they are capped here.
    const MIN_EXPONENT: f64 = -0.999;

    pub(crate) fn fit(x0: f64, x1: f64, v0: f64, v1: f64) -> Self {
        if x0 <= 0.0 {
            return Self {
                x0,
                v0,
                kind: HeadKind::Empty,
            };
        }
        let kind = if v0 > 0.0 && v1 > 0.0 {
            let p = (v1 / v0).ln() / (x1 / x0).ln();
            HeadKind::Power(p.max(Self::MIN_EXPONENT))
        } else {
            HeadKind::Linear((v1 - v0) / (x1 - x0))
        };
        Self { x0, v0, kind }
    }

    /// `int_0^x v(u) du` for `0 <= x <= x0`.
    pub(crate) fn integral_to(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, self.x0.max(0.0));
        match self.kind {
            HeadKind::Empty => 0.0,
            HeadKind::Power(p) => self.v0 * self.x0 / (p + 1.0) * (x / self.x0).powf(p + 1.0),
            HeadKind::Linear(s) => {
                // v(u) = v0 + s (u - x0)
                let v_at_0 = self.v0 - s * self.x0;
                x * v_at_0 + 0.5 * s * x * x
            }
        }
    }

    /// `int_lo^x0 v(u) g(u) du` for a smooth factor `g`, by Gauss-Legendre in
    /// the mass coordinate of the power law (exact when `g` is constant).
    pub(crate) fn weighted_integral(&self, lo: f64, g: impl Fn(f64) -> f64) -> f64 {
        let mass = self.integral_to(self.x0) - self.integral_to(lo);
        match self.kind {
            HeadKind::Power(p) if mass > 0.0 => {
                let q = p + 1.0;
                let s_lo = (lo.max(0.0) / self.x0).powf(q);
                let half = 0.5 * (1.0 - s_lo);
                let mid = 0.5 * (1.0 + s_lo);
                let avg: f64 = GAUSS_LEGENDRE_8
                    .iter()
                    .map(|&(node, weight)| {
                        let s = mid + half * node;
                        0.5 * weight * g(self.x0 * s.powf(1.0 / q))
                    })
                    .sum();
                mass * avg
            }
            _ => mass * g(0.5 * (lo.max(0.0) + self.x0)),
        }
    }

    /// `int_lo^x0 v(u)/(c + u) du`.
    pub(crate) fn inverse_moment(&self, lo: f64, c: f64) -> f64 {
        match self.kind {
            HeadKind::Power(p) if c == 0.0 && p > 0.0 => self.v0 / p * (1.0 - (lo.max(0.0) / self.x0).powf(p)),
            _ => self.weighted_integral(lo, |u| 1.0 / (c + u)),
        }
    }

    /// Exponent of the power law, if the fit produced one.
    pub(crate) fn exponent(&self) -> Option<f64> {
        match self.kind {
            HeadKind::Power(p) => Some(p),
            _ => None,
        }
    }

    /// Mean position of the head-cell mass, used when the integrand carries an
    /// extra slowly varying factor.
    pub(crate) fn centroid(&self) -> f64 {
        match self.kind {
            HeadKind::Empty => 0.0,
            HeadKind::Power(p) => self.x0 * (p + 1.0) / (p + 2.0),
            HeadKind::Linear(_) => 0.5 * self.x0,
        }
    }
}

/// Running integral of node values, exact for the piecewise-linear interpolant.
pub struct Cumulative<'a> {
    grid: &'a WealthGrid,
    values: &'a [f64],
    at_nodes: Vec<f64>,
    head: HeadLaw,
    zero_start: Option<HeadLaw>,
}

impl<'a> Cumulative<'a> {
    fn new(grid: &'a WealthGrid, values: &'a [f64]) -> Self {
        let head = grid.head_law(values);
        let zero_start = grid.zero_start_law(values);
        let mut at_nodes = Vec::with_capacity(values.len());
        let mut acc = head.integral_to(grid.nodes[0]);
        at_nodes.push(acc);
        for i in 1..values.len() {
            acc += match (&zero_start, i) {
                (Some(law), 1) => law.integral_to(grid.nodes[1]),
                _ => 0.5 * (grid.nodes[i] - grid.nodes[i - 1]) * (values[i] + values[i - 1]),
            };
            at_nodes.push(acc);
        }
        Self {
            grid,
            values,
            at_nodes,
            head,
            zero_start,
        }
    }

    pub fn total(&self) -> f64 {
        self.at_nodes[self.at_nodes.len() - 1]
    }

    pub fn at_nodes(&self) -> &[f64] {
        &self.at_nodes
    }

    /// `int_0^x v du`.
    pub fn at(&self, x: f64) -> f64 {
        let nodes = &self.grid.nodes;
        if x <= 0.0 {
            return 0.0;
        }
        if x < nodes[0] {
            return self.head.integral_to(x);
        }
        if x >= self.grid.u_max() {
            return self.total();
        }
        if let Some(law) = &self.zero_start {
            if x < nodes[1] {
                return law.integral_to(x);
            }
        }
        let (i, t) = self.grid.locate(x);
        let dx = nodes[i + 1] - nodes[i];
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        self.at_nodes[i] + dx * t * (v0 + 0.5 * t * (v1 - v0))
    }
}

/// A probability density sampled on a wealth grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPdf {
    grid: Arc<WealthGrid>,
    values: Vec<f64>,
    mean_wealth: f64,
}

impl GridPdf {
    pub fn new(grid: Arc<WealthGrid>, values: Vec<f64>, mean_wealth: f64) -> Result<Self> {
        grid.check_len(&values)?;
        if !(mean_wealth > 0.0 && mean_wealth.is_finite()) {
            return Err(domain(format!("mean wealth must be positive, got {mean_wealth}")));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(domain(format!(
                "density must be finite and nonnegative (node {k}: {})",
                values[k]
            )));
        }
        Ok(Self {
            grid,
            values,
            mean_wealth,
        })
    }

    /// Samples `density` at every node.
    pub fn from_fn(grid: Arc<WealthGrid>, mean_wealth: f64, density: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes.iter().map(|&u| density(u)).collect();
        Self::new(grid, values, mean_wealth)
    }

    /// `f(u) = exp(-u/<u>) / <u>` sampled on the grid.
    pub fn exponential(grid: Arc<WealthGrid>, mean_wealth: f64) -> Result<Self> {
        let beta = 1.0 / mean_wealth;
        Self::from_fn(grid, mean_wealth, |u| beta * (-beta * u).exp())
    }

    /// Same grid and mean wealth, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values, self.mean_wealth)
    }

    pub fn grid(&self) -> &WealthGrid {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<WealthGrid> {
        self.grid.clone()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean_wealth(&self) -> f64 {
        self.mean_wealth
    }

    /// `int f du`.
    pub fn mass(&self) -> f64 {
        self.grid.integrate_unchecked(&self.values)
    }

    /// `int u^k f du`.
    pub fn moment(&self, k: i32) -> f64 {
        let weighted: Vec<f64> = self
            .grid
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(u, f)| u.powi(k) * f)
            .collect();
        self.grid.integrate_unchecked(&weighted)
    }

    /// `int u f du`.
    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// Linear interpolation; zero above `u_max`, clamped below the first node.
    pub fn interpolate(&self, u: f64) -> Result<f64> {
        if u.is_nan() || u < 0.0 {
            return Err(domain(format!("wealth must be nonnegative, got {u}")));
        }
        Ok(self.grid.interpolate_values(&self.values, u))
    }

    pub fn normalize(&self) -> Result<Self> {
        let mass = self.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Degenerate(format!(
                "cannot normalize a density with mass {mass}"
            )));
        }
        let values = self.values.iter().map(|v| v / mass).collect();
        Ok(Self {
            grid: self.grid.clone(),
            values,
            mean_wealth: self.mean_wealth,
        })
    }

    pub fn cumulative(&self) -> Cumulative<'_> {
        Cumulative::new(&self.grid, &self.values)
    }

    pub(crate) fn check_same_grid(&self, other: &GridPdf) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.compatible(&other.grid) {
            Ok(())
        } else {
            Err(contract("densities live on different grids"))
        }
    }
}

/// Trapezoid integral of per-node integrand values over the density's grid.
pub fn quadrature(pdf: &GridPdf, integrand: &[f64]) -> Result<f64> {
    pdf.grid.integrate(integrand)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdfDistance {
    /// `int |f - g| du`.
    pub l1: f64,
    /// `max_k |f_k - g_k|`.
    pub sup: f64,
}

pub fn distance(a: &GridPdf, b: &GridPdf) -> Result<PdfDistance> {
    a.check_same_grid(b)?;
    let diff: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
    let sup = diff.iter().copied().fold(0.0, f64::max);
    Ok(PdfDistance {
        l1: a.grid.l1_unchecked(&a.values, &b.values, &diff),
        sup,
    })
}
