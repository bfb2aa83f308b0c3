//! Gain operators: the rate at which post-trade wealths land at `u`.
//!
//! All three are double integrals over the pre-trade pair. Each is rewritten
//! so that one of the two integrals becomes a running (cumulative) integral,
//! which brings a full evaluation on an `M`-node grid down to `O(M^2)`:
//!
//! - pure: `G(u) = int_u^inf h(U)/U dU` with `h = f * f` the self-convolution;
//! - saving: for each saved-part node `u_1` the inner integral over the
//!   partner's wealth is a tail integral of `f(y)/(u_1 + y)`, evaluated cell by
//!   cell in closed form for the piecewise-linear `f`;
//! - Angle: the winner term is integrated over the loser's wealth `u_2` with
//!   the winner's part collapsed to a CDF difference
//!   `F(u) - F(u - omega u_2)`, whose `O(u_2)` behaviour cancels the `1/u_2`
//!   of the kernel.
//!
//! Upper limits of infinity are read as `u_max`.

use crate::error::{domain, Error, Result};
use crate::grid::{GridPdf, HeadLaw, Spacing, WealthGrid};
use crate::models::{ModelKind, ModelParams, MAX_KINETIC_LAMBDA};

/// Number of fixed work chunks used when accumulating over source nodes.
/// Fixed so that the summation order does not depend on the thread count.
const ACCUMULATE_CHUNKS: usize = 32;

fn map_outputs<F>(n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Splits `0..n_items` into fixed chunks, lets each chunk add into its own
/// output buffer and sums the buffers in chunk order.
fn accumulate_chunks<F>(n_items: usize, n_out: usize, body: F) -> Vec<f64>
where
    F: Fn(std::ops::Range<usize>, &mut [f64]) + Sync + Send,
{
    let size = n_items.div_ceil(ACCUMULATE_CHUNKS).max(1);
    let ranges: Vec<_> = (0..n_items).step_by(size).map(|s| s..(s + size).min(n_items)).collect();
    let run = |r: std::ops::Range<usize>| {
        let mut out = vec![0.0; n_out];
        body(r, &mut out);
        out
    };
    #[cfg(feature = "parallel")]
    let partials: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        ranges.into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Vec<f64>> = ranges.into_iter().map(run).collect();

    let mut total = vec![0.0; n_out];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}

/// `int_a^b f(y)/(c + y) dy` for `f` linear on `[a, b]` with endpoint values
/// `fa`, `fb`.
#[inline]
fn cell_inverse(a: f64, b: f64, fa: f64, fb: f64, c: f64) -> f64 {
    let width = b - a;
    if width <= 0.0 {
        return 0.0;
    }
    let slope = (fb - fa) / width;
    let base = c + a;
    if base <= 0.0 {
        // c = a = 0: the integrand f(y)/y is finite only if f(0) = 0
        return if fa == 0.0 { slope * width } else { f64::INFINITY };
    }
    slope * width + (fa - slope * base) * (width / base).ln_1p()
}

/// `int f(y)/(c + y) dy` over pieces of the grid, with `f` linear between
/// nodes, a power law on the head cell of log-head grids and on the first
/// cell when `f` starts at zero like `y^p`.
struct InverseKernel<'a> {
    grid: &'a WealthGrid,
    f: &'a [f64],
    head: HeadLaw,
    start: Option<HeadLaw>,
}

impl<'a> InverseKernel<'a> {
    fn new(grid: &'a WealthGrid, f: &'a [f64]) -> Self {
        Self {
            grid,
            f,
            head: grid.head_law(f),
            start: grid.zero_start_law(f),
        }
    }

    /// From `lo` in cell `m` to the node `x_{m+1}`.
    #[inline]
    fn cell_from(&self, m: usize, lo: f64, c: f64) -> f64 {
        let x = self.grid.nodes();
        if m == 0 {
            if let Some(start) = &self.start {
                return start.inverse_moment(lo, c);
            }
        }
        let t = (lo - x[m]) / (x[m + 1] - x[m]);
        let f_lo = self.f[m] + t * (self.f[m + 1] - self.f[m]);
        cell_inverse(lo, x[m + 1], f_lo, self.f[m + 1], c)
    }

    /// From `lo` below the first node up to it.
    #[inline]
    fn head_from(&self, lo: f64, c: f64) -> f64 {
        self.head.inverse_moment(lo, c)
    }

    /// Running tail integrals `int_{x_m}^{u_max}` at every node.
    fn tails(&self, c: f64, out: &mut Vec<f64>) {
        let x = self.grid.nodes();
        let n = x.len();
        out.clear();
        out.resize(n, 0.0);
        for m in (0..n - 1).rev() {
            out[m] = out[m + 1] + self.cell_from(m, x[m], c);
        }
    }

    /// `int_lower^{u_max}` from precomputed tails; `lower` lies in `cell`.
    #[inline]
    fn tail_from(&self, tails: &[f64], c: f64, lower: f64, cell: usize) -> f64 {
        let x = self.grid.nodes();
        if lower >= self.grid.u_max() {
            return 0.0;
        }
        if lower < x[0] {
            return tails[0] + self.head_from(lower, c);
        }
        tails[cell + 1] + self.cell_from(cell, lower, c)
    }

    /// `int_a^b` summed cell by cell (single-point evaluations).
    fn between(&self, c: f64, a: f64, b: f64) -> f64 {
        let x = self.grid.nodes();
        let b = b.min(self.grid.u_max());
        if b <= a {
            return 0.0;
        }
        let from = |lo: f64| {
            if lo < x[0] {
                self.head_from(lo, c) + self.from_node(0, c, b)
            } else {
                let (cell, _) = self.grid.locate(lo);
                self.cell_from(cell, lo, c) + self.from_node(cell + 1, c, b)
            }
        };
        // int_a^b = int_a^inf - int_b^inf, each summed up to b's cell only
        from(a) - from(b)
    }

    /// `int_{x_m}` up to the end of the cell containing `b`.
    fn from_node(&self, m: usize, c: f64, b: f64) -> f64 {
        let x = self.grid.nodes();
        let mut total = 0.0;
        let mut i = m;
        while i + 1 < x.len() && x[i] < b {
            total += self.cell_from(i, x[i], c);
            i += 1;
        }
        total
    }
}

/// Extra weight on node 1 when `f` starts at zero like a power law: the
/// first cell `[0, x_1]` of an integrand `f(u) g(u)` with smooth `g` is
/// integrated as `g(x_1) int_0^{x_1} f`.
fn zero_start_extra(grid: &WealthGrid, f: &[f64]) -> f64 {
    match grid.zero_start_law(f) {
        Some(law) => law.integral_to(grid.nodes()[1]) / f[1] - 0.5 * grid.nodes()[1],
        None => 0.0,
    }
}

// ---------------------------------------------------------------------------
// pure random exchange

/// `h(U)/U` at every node, `h(U) = int_0^U f(u_1) f(U - u_1) du_1`.
fn convolution_over_total(grid: &WealthGrid, f: &[f64]) -> Vec<f64> {
    let x = grid.nodes();
    let n = x.len();
    match grid.spacing() {
        Spacing::Uniform => {
            let h = x[1] - x[0];
            let extra = zero_start_extra(grid, f);
            map_outputs(n, |k| {
                if k == 0 {
                    return f[0] * f[0];
                }
                let mut s = 0.0;
                for i in 0..=k {
                    s += f[i] * f[k - i];
                }
                let mut conv = h * (s - f[0] * f[k]);
                if k >= 3 {
                    // power-law first and last cells
                    conv += 2.0 * extra * f[1] * f[k - 1];
                }
                conv / x[k]
            })
        }
        Spacing::LogHead => {
            // symmetric in u_1 <-> U - u_1: integrate over [0, U/2] only
            let head = grid.head_law(f);
            map_outputs(n, |k| {
                let total = x[k];
                let half = 0.5 * total;
                let partner = |u1: f64| grid.interpolate_values(f, total - u1);
                let mut conv = 0.0;
                if half <= x[0] {
                    conv += head.integral_to(half) * partner(0.5 * half);
                } else {
                    conv += head.integral_to(x[0]) * partner(head.centroid());
                    let mut i = 0;
                    while i + 1 < n && x[i + 1] <= half {
                        conv += 0.5 * (x[i + 1] - x[i]) * (f[i] * partner(x[i]) + f[i + 1] * partner(x[i + 1]));
                        i += 1;
                    }
                    if x[i] < half {
                        let f_half = grid.interpolate_values(f, half);
                        conv += 0.5 * (half - x[i]) * (f[i] * partner(x[i]) + f_half * f_half);
                    }
                }
                2.0 * conv / total
            })
        }
    }
}

/// Pure-exchange gain `G(u_k)` at every node.
pub fn gain_pure_nodes(f: &GridPdf) -> Vec<f64> {
    let grid = f.grid();
    let q = convolution_over_total(grid, f.values());
    let cumulative = grid.cumulative(&q).expect("same grid");
    let total = cumulative.total();
    cumulative.at_nodes().iter().map(|c| (total - c).max(0.0)).collect()
}

/// `int_u^{u_max} dU int_0^U du_1 f(u_1) f(U - u_1) / U`.
pub fn gain_pure(f: &GridPdf, u: f64) -> Result<f64> {
    check_point(u)?;
    let grid = f.grid();
    if u >= grid.u_max() {
        return Ok(0.0);
    }
    let q = convolution_over_total(grid, f.values());
    let cumulative = grid.cumulative(&q)?;
    Ok((cumulative.total() - cumulative.at(u)).max(0.0))
}

fn check_point(u: f64) -> Result<()> {
    if u.is_nan() || u < 0.0 {
        return Err(domain(format!("wealth must be nonnegative, got {u}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// saving

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(domain("lambda must be in [0,1)"));
    }
    if lambda > MAX_KINETIC_LAMBDA {
        return Err(domain(format!(
            "lambda = {lambda} exceeds {MAX_KINETIC_LAMBDA}: the saving kernel degenerates to the identity"
        )));
    }
    Ok(())
}

/// Trapezoid weights of an integral over `[0, b]` in the saved-part variable,
/// with the last partial cell closed by linear interpolation between the
/// bracketing nodes.
#[derive(Clone, Copy)]
struct UpperCut {
    cell: usize,
    t: f64,
}

impl UpperCut {
    fn new(grid: &WealthGrid, b: f64) -> Self {
        if b <= grid.first() {
            return Self { cell: 0, t: 0.0 };
        }
        let (cell, t) = grid.locate(b);
        Self { cell, t }
    }

    /// Weight of node `i`, not counting the head cell.
    #[inline]
    fn weight(&self, x: &[f64], i: usize) -> f64 {
        let p = self.cell;
        let mut w = 0.0;
        if i >= 1 && i <= p {
            w += 0.5 * (x[i] - x[i - 1]);
        }
        if i < p {
            w += 0.5 * (x[i + 1] - x[i]);
        }
        if i == p || i == p + 1 {
            let len = self.t * (x[p + 1] - x[p]);
            w += if i == p {
                0.5 * len * (2.0 - self.t)
            } else {
                0.5 * len * self.t
            };
        }
        w
    }

    fn last_node(&self) -> usize {
        self.cell + 1
    }
}

/// Saving-model gain `G(u_k)` at every node.
///
/// Two orderings of the nested integral are used. Integrating over the pair
/// total `U` last keeps the integrand smooth when `lambda` is large; the
/// saved part `u_1` last does so when `lambda` is small. The first needs the
/// partner's wealth `U - u_1` on the grid, so it runs on uniform grids only.
pub fn gain_saving_nodes(f: &GridPdf, lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(gain_pure_nodes(f));
    }
    let grid = f.grid();
    if by_total(grid, lambda) {
        Ok(saving_by_total(grid, f.values(), lambda, grid.nodes()))
    } else {
        Ok(saving_by_saved_part(grid, f.values(), lambda))
    }
}

fn by_total(grid: &WealthGrid, lambda: f64) -> bool {
    grid.spacing() == Spacing::Uniform && lambda >= 0.25
}

/// `G(u) = int_u^inf dU [P_U(min(u/lambda, U)) - P_U(max((u - (1-lambda)U)/lambda, 0))] / ((1-lambda) U)`
/// with `P_U(a) = int_0^a f(u_1) f(U - u_1) du_1`. `outputs` must be ascending.
fn saving_by_total(grid: &WealthGrid, f: &[f64], lambda: f64, outputs: &[f64]) -> Vec<f64> {
    let x = grid.nodes();
    let n = x.len();
    let h = x[1] - x[0];
    let keep = 1.0 - lambda;
    let extra = zero_start_extra(grid, f);
    // f ~ u^p at zero makes the product f(u_1) f(U - u_1) vanish like a power
    // at both ends of [0, U]
    let end_power = grid.zero_start_law(f).and_then(|law| law.exponent()).map(|p| p + 1.0);
    accumulate_chunks(n, outputs.len(), |totals, out| {
        let mut products = Vec::with_capacity(n);
        let mut running = Vec::with_capacity(n);
        for m in totals {
            if m == 0 {
                continue;
            }
            let total = x[m];
            products.clear();
            products.extend((0..=m).map(|i| f[i] * f[m - i]));
            running.clear();
            running.push(0.0);
            for i in 0..m {
                running.push(running[i] + 0.5 * h * (products[i] + products[i + 1]));
            }
            if extra != 0.0 && m >= 3 {
                // power-law first and last cells
                let cell = extra * products[1];
                for r in running.iter_mut().skip(1) {
                    *r += cell;
                }
                running[m] += cell;
            }
            let ends = end_power.filter(|_| extra != 0.0 && m >= 3);
            let partial = |a: f64| {
                let s = (a / h).clamp(0.0, m as f64);
                let i = (s.floor() as usize).min(m - 1);
                let t = s - i as f64;
                match ends {
                    Some(q) if i == 0 => running[1] * t.powf(q),
                    Some(q) if i == m - 1 => running[m] - (running[m] - running[m - 1]) * (1.0 - t).powf(q),
                    _ => {
                        let (g0, g1) = (products[i], products[i + 1]);
                        running[i] + h * t * (g0 + 0.5 * t * (g1 - g0))
                    }
                }
            };
            let right = if m + 1 < n { 0.5 * (x[m + 1] - total) } else { 0.0 };
            for (slot, &u) in out.iter_mut().zip(outputs) {
                if u >= total {
                    break;
                }
                if u <= 0.0 {
                    continue;
                }
                let weight = right + 0.5 * (total - x[m - 1].max(u));
                let hi = (u / lambda).min(total);
                let lo = ((u - keep * total) / lambda).max(0.0);
                if hi > lo {
                    *slot += weight * (partial(hi) - partial(lo)) / (keep * total);
                }
            }
        }
    })
}

/// `G(u) = int_0^{u/lambda} du_1 f(u_1) T(u_1, max(0, (u - u_1)/(1 - lambda)))`
/// with `T(c, L) = int_L^inf f(y) / ((1 - lambda)(c + y)) dy`.
fn saving_by_saved_part(grid: &WealthGrid, fv: &[f64], lambda: f64) -> Vec<f64> {
    let x = grid.nodes();
    let n = x.len();
    let keep = 1.0 - lambda;
    let kernel = InverseKernel::new(grid, fv);
    let head_mass = grid.head_law(fv).integral_to(x[0]);
    let extra1 = zero_start_extra(grid, fv);

    let cuts: Vec<UpperCut> = x
        .iter()
        .map(|&u| UpperCut::new(grid, (u / lambda).min(grid.u_max())))
        .collect();
    // outputs whose integral reaches node i form a suffix k >= first_output[i]
    let mut first_output = vec![n; n];
    {
        let mut k = 0;
        for (i, slot) in first_output.iter_mut().enumerate() {
            while k < n && cuts[k].last_node() < i {
                k += 1;
            }
            *slot = k;
        }
    }

    accumulate_chunks(n, n, |sources, out| {
        let mut tails = Vec::with_capacity(n);
        for i in sources {
            let fi = fv[i];
            let head_weight = if i == 0 && head_mass > 0.0 { head_mass } else { 0.0 };
            if fi == 0.0 && head_weight == 0.0 {
                continue;
            }
            let c = x[i];
            kernel.tails(c, &mut tails);
            let mut cell = 0usize;
            for (k, slot) in out.iter_mut().enumerate().skip(first_output[i]) {
                let u = x[k];
                if u == 0.0 {
                    continue;
                }
                let cut = &cuts[k];
                let mut w = cut.weight(x, i) * fi;
                if i == 1 && cut.cell >= 1 {
                    w += extra1 * fi;
                }
                w += head_weight;
                if w == 0.0 {
                    continue;
                }
                let lower = ((u - c) / keep).max(0.0);
                if lower >= grid.u_max() {
                    continue;
                }
                if lower >= x[0] {
                    while cell + 2 < n && x[cell + 1] <= lower {
                        cell += 1;
                    }
                }
                *slot += w * kernel.tail_from(&tails, c, lower, cell) / keep;
            }
        }
    })
}

/// Saving-model gain at a single wealth value.
pub fn gain_saving(f: &GridPdf, u: f64, params: &ModelParams) -> Result<f64> {
    let lambda = match params.kind() {
        ModelKind::Saving { lambda } => lambda,
        other => return Err(domain(format!("gain_saving called with a {} model", other.name()))),
    };
    check_point(u)?;
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return gain_pure(f, u);
    }
    let grid = f.grid();
    let x = grid.nodes();
    let fv = f.values();
    if u == 0.0 || u >= grid.u_max() {
        // the density is truncated at u_max, so nothing lands above it
        return Ok(0.0);
    }
    if by_total(grid, lambda) {
        return Ok(saving_by_total(grid, fv, lambda, &[u])[0]);
    }
    let keep = 1.0 - lambda;
    let kernel = InverseKernel::new(grid, fv);
    let cut = UpperCut::new(grid, (u / lambda).min(grid.u_max()));
    let extra1 = zero_start_extra(grid, fv);
    let inner = |c: f64| kernel.between(c, ((u - c) / keep).max(0.0), grid.u_max()) / keep;
    let mut total = 0.0;
    for i in 0..=cut.last_node().min(x.len() - 1) {
        let mut w = cut.weight(x, i);
        if i == 1 && cut.cell >= 1 {
            w += extra1;
        }
        if w > 0.0 && fv[i] > 0.0 {
            total += w * fv[i] * inner(x[i]);
        }
    }
    let head_mass = grid.head_law(fv).integral_to(x[0]);
    if head_mass > 0.0 {
        total += head_mass * inner(x[0]);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Angle

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(domain("omega must be in (0,1]"));
    }
    Ok(())
}

/// Winner gain at `u`: `int du_2 f(u_2)/(omega u_2) [F(u) - F(u - omega u_2)]`.
fn winner_at(
    grid: &WealthGrid,
    fv: &[f64],
    cdf: &crate::grid::Cumulative<'_>,
    omega: f64,
    u: f64,
    buf: &mut Vec<f64>,
) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let x = grid.nodes();
    let f_u = grid.interpolate_values(fv, u);
    let at_u = cdf.at(u);
    let bracket = |y: f64| {
        if y == 0.0 {
            f_u
        } else {
            (at_u - cdf.at(u - omega * y)) / (omega * y)
        }
    };
    buf.clear();
    buf.extend(x.iter().zip(fv).map(|(&y, &fy)| fy * bracket(y)));
    let body: f64 = grid.weights().iter().zip(buf.iter()).map(|(w, v)| w * v).sum();
    // the head cell carries the power-law mass of f times the smooth bracket
    body + grid.zero_start_correction(buf) + grid.head_law(fv).weighted_integral(0.0, bracket)
}

/// Angle-model gains `(winner, loser)` at every node.
pub fn gain_angle_nodes(f: &GridPdf, omega: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_omega(omega)?;
    let grid = f.grid();
    let x = grid.nodes();
    let fv = f.values();
    let n = x.len();
    let cdf = f.cumulative();

    #[cfg(feature = "parallel")]
    let winner: Vec<f64> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map_init(Vec::new, |buf, k| winner_at(grid, fv, &cdf, omega, x[k], buf))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let winner: Vec<f64> = {
        let mut buf = Vec::new();
        (0..n)
            .map(|k| winner_at(grid, fv, &cdf, omega, x[k], &mut buf))
            .collect()
    };

    let kernel = InverseKernel::new(grid, fv);
    let mut tails = Vec::with_capacity(n);
    kernel.tails(0.0, &mut tails);
    let loser = (0..n)
        .map(|k| {
            let u = x[k];
            if u == 0.0 {
                return 0.0;
            }
            let top = if omega == 1.0 {
                grid.u_max()
            } else {
                (u / (1.0 - omega)).min(grid.u_max())
            };
            let (cell, _) = grid.locate(top);
            let above = if top >= grid.u_max() {
                0.0
            } else {
                kernel.tail_from(&tails, 0.0, top, cell)
            };
            ((tails[k] - above) / omega).max(0.0)
        })
        .collect();
    Ok((winner, loser))
}

/// Angle-model gains `(winner, loser)` at a single wealth value.
pub fn gain_angle(f: &GridPdf, u: f64, params: &ModelParams) -> Result<(f64, f64)> {
    let omega = match params.kind() {
        ModelKind::Angle { omega } => omega,
        other => return Err(domain(format!("gain_angle called with a {} model", other.name()))),
    };
    check_point(u)?;
    check_omega(omega)?;
    if u == 0.0 {
        return Ok((0.0, 0.0));
    }
    let grid = f.grid();
    let fv = f.values();
    let cdf = f.cumulative();
    let winner = winner_at(grid, fv, &cdf, omega, u, &mut Vec::new());
    let top = if omega == 1.0 { grid.u_max() } else { u / (1.0 - omega) };
    let loser = InverseKernel::new(grid, fv).between(0.0, u, top) / omega;
    Ok((winner, loser))
}

// ---------------------------------------------------------------------------

/// Largest gain-weighted relative change the moment correction may make.
const MAX_MOMENT_CORRECTION: f64 = 0.05;

/// Exact mass and mean wealth of the summed gain for a density with mass
/// `m0` and first moment `m1`.
fn gain_moment_targets(model: &ModelParams, m0: f64, m1: f64) -> [f64; 2] {
    match model.kind() {
        ModelKind::PureRandom | ModelKind::Saving { .. } => [2.0 * m0 * m0, 2.0 * m0 * m1],
        // winner term bilinear, loser term linear in f
        ModelKind::Angle { omega } => [m0 * m0 + m0, m0 * m1 * (1.0 + 0.5 * omega) + m1 * (1.0 - 0.5 * omega)],
    }
}

/// Multiplies `gain` by `1 + a + b u` so that its grid mass and mean match
/// `targets`. Quadrature errors of the raw gain, largest where the gain is
/// not smooth at `u = 0`, would otherwise leak probability and wealth.
fn conserve_moments(grid: &WealthGrid, gain: &mut [f64], targets: [f64; 2]) -> Result<()> {
    let x = grid.nodes();
    let mut weighted = vec![0.0; gain.len()];
    let mut scale = vec![1.0; gain.len()];
    // the head and zero-start laws are refitted on the corrected values, so
    // a second pass absorbs their slight nonlinearity
    for _ in 0..2 {
        let mut moments = [0.0; 3];
        for (k, m) in moments.iter_mut().enumerate() {
            for ((w, g), u) in weighted.iter_mut().zip(gain.iter()).zip(x) {
                *w = g * u.powi(k as i32);
            }
            *m = grid.integrate_unchecked(&weighted);
        }
        let det = moments[0] * moments[2] - moments[1] * moments[1];
        if !(det > 0.0) {
            return Ok(());
        }
        let r0 = targets[0] - moments[0];
        let r1 = targets[1] - moments[1];
        let a = (r0 * moments[2] - r1 * moments[1]) / det;
        let b = (r1 * moments[0] - r0 * moments[1]) / det;
        for ((g, s), u) in gain.iter_mut().zip(scale.iter_mut()).zip(x) {
            let factor = 1.0 + a + b * u;
            *g *= factor;
            *s *= factor;
        }
    }
    // gain-weighted: the linear factor is large only where the gain is negligible
    let (mut changed, mut total) = (0.0, 0.0);
    for ((w, g), s) in grid.weights().iter().zip(gain.iter()).zip(&scale) {
        let raw = (g / s).abs();
        changed += w * raw * (s - 1.0).abs();
        total += w * raw;
    }
    let worst = if total > 0.0 { changed / total } else { 0.0 };
    if worst > MAX_MOMENT_CORRECTION {
        return Err(Error::Numeric(format!(
            "gain quadrature is off by {worst:.3} relative; the grid is too coarse for this density"
        )));
    }
    Ok(())
}

/// Gain terms as computed by quadrature, before the moment correction:
/// `2 G` for pure and saving, `W + L` for Angle.
pub fn raw_total_gain(f: &GridPdf, model: &ModelParams) -> Result<Vec<f64>> {
    match model.kind() {
        ModelKind::PureRandom => Ok(gain_pure_nodes(f).into_iter().map(|g| 2.0 * g).collect()),
        ModelKind::Saving { lambda } => Ok(gain_saving_nodes(f, lambda)?.into_iter().map(|g| 2.0 * g).collect()),
        ModelKind::Angle { omega } => {
            let (w, l) = gain_angle_nodes(f, omega)?;
            Ok(w.into_iter().zip(l).map(|(a, b)| a + b).collect())
        }
    }
}

/// Sum of the gain terms entering `N df/dt`, corrected so that the grid
/// quadrature conserves probability and wealth exactly.
pub fn total_gain(f: &GridPdf, model: &ModelParams) -> Result<Vec<f64>> {
    let mut gain = raw_total_gain(f, model)?;
    let targets = gain_moment_targets(model, f.mass(), f.moment(1));
    conserve_moments(f.grid(), &mut gain, targets)?;
    Ok(gain)
}

/// The steady-state map `K[f]`: `G` for pure and saving, `(W + L)/2` for Angle.
pub fn steady_map(f: &GridPdf, model: &ModelParams) -> Result<Vec<f64>> {
    Ok(total_gain(f, model)?.into_iter().map(|g| 0.5 * g).collect())
}
