//! Radial calculus on geometric grids.
//!
//! Profiles are sampled at `r_i = r_min (r_max/r_min)^{i/(M-1)}` and are
//! understood as log-log linear between nodes, so power laws are
//! represented exactly. Integrals are taken against the measure
//! `|S^{N-1}| r^{N-1} dr`; the pieces outside `[r_min, r_max]` are estimated
//! from the boundary power law and reported separately.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Smallest allowed node count.
pub const MIN_NODES: usize = 16;

/// Geometric mesh of the radial variable in `R^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    r_min: f64,
    r_max: f64,
    log_step: f64,
    nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn geometric(dim: usize, r_min: f64, r_max: f64, m: usize) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if !(r_min > 0.0 && r_min.is_finite()) {
            return Err(Error::InvalidGrid(format!("r_min = {r_min} must be positive")));
        }
        if !(r_max > r_min && r_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "r_max = {r_max} must exceed r_min = {r_min}"
            )));
        }
        if m < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "M = {m} below the minimum of {MIN_NODES} nodes"
            )));
        }
        let log_span = (r_max / r_min).ln();
        let log_step = log_span / (m - 1) as f64;
        let ln_min = r_min.ln();
        let mut nodes: Vec<f64> = (0..m)
            .map(|i| (ln_min + log_step * i as f64).exp())
            .collect();
        nodes[0] = r_min;
        nodes[m - 1] = r_max;
        Ok(RadialGrid {
            dim,
            r_min,
            r_max,
            log_step,
            nodes,
        })
    }

    /// Grid with the default extent `[1e-4, 1e4]` and 2048 nodes.
    pub fn default_for(dim: usize) -> Self {
        Self::geometric(dim, 1e-4, 1e4, 2048).expect("default grid is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Spacing in `log r`.
    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    /// Ratio of consecutive nodes.
    pub fn ratio(&self) -> f64 {
        self.log_step.exp()
    }

    /// `ln r_i` computed without accumulating rounding.
    pub fn log_node(&self, i: usize) -> f64 {
        self.r_min.ln() + self.log_step * i as f64
    }

    /// `|S^{N-1}|`.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.dim)
    }

    /// Trapezoid weights in `log r` (half weights at the two ends).
    pub fn log_trapezoid_weights(&self) -> Vec<f64> {
        let m = self.len();
        let mut w = vec![self.log_step; m];
        w[0] *= 0.5;
        w[m - 1] *= 0.5;
        w
    }

    pub fn contains(&self, r: f64) -> bool {
        let eps = 1e-12;
        r >= self.r_min * (1.0 - eps) && r <= self.r_max * (1.0 + eps)
    }

    /// Continuous index `(ln r - ln r_min)/h`.
    pub fn fractional_index(&self, r: f64) -> f64 {
        (r / self.r_min).ln() / self.log_step
    }

    /// Stable identifier used by the kernel cache.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(&(self.dim as u64).to_le_bytes());
        eat(&self.r_min.to_bits().to_le_bytes());
        eat(&self.r_max.to_bits().to_le_bytes());
        eat(&(self.len() as u64).to_le_bytes());
        format!("{h:016x}")
    }
}

/// Surface area of the unit sphere `S^{n-1}` in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => sphere_area(n - 2) * 2.0 * PI / (n as f64 - 2.0),
    }
}

/// Sampled radial function. Values are nonnegative unless constructed with
/// [`RadialProfile::new_signed`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        let profile = Self::new_signed(grid, values)?;
        if let Some(i) = profile.values.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidProfile(format!(
                "negative value {} at node {i}",
                profile.values[i]
            )));
        }
        Ok(profile)
    }

    /// Profile whose values may be negative (derivatives, residual fields).
    pub fn new_signed(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidProfile(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile(format!(
                "non-finite value at node {i}"
            )));
        }
        Ok(RadialProfile { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Arc<RadialGrid>, f: F) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let m = grid.len();
        RadialProfile {
            grid,
            values: vec![0.0; m],
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise map; the result may be signed.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        RadialProfile {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `u^q`, with `0^q = 0`.
    pub fn powf(&self, q: f64) -> Self {
        self.map(|v| if v > 0.0 { v.powf(q) } else { 0.0 })
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    /// Log-log slope of the profile near `r_min` (`None` if it vanishes there).
    pub fn head_slope(&self) -> Option<f64> {
        boundary_slope(&self.values, self.grid.log_step(), Boundary::Head)
    }

    /// Log-log slope near `r_max` (`None` if it vanishes there).
    pub fn tail_slope(&self) -> Option<f64> {
        boundary_slope(&self.values, self.grid.log_step(), Boundary::Tail)
    }

    /// Log-log linear interpolation; outside the grid the boundary power law
    /// is extended.
    pub fn interpolate(&self, r: f64) -> f64 {
        let grid = &self.grid;
        let m = grid.len();
        let x = grid.fractional_index(r);
        if x <= 0.0 {
            return extend(self.values[0], self.head_slope(), x * grid.log_step());
        }
        if x >= (m - 1) as f64 {
            let dx = (x - (m - 1) as f64) * grid.log_step();
            return extend(self.values[m - 1], self.tail_slope(), dx);
        }
        let i = (x.floor() as usize).min(m - 2);
        let t = x - i as f64;
        interpolate_cell(self.values[i], self.values[i + 1], t)
    }
}

fn extend(boundary_value: f64, slope: Option<f64>, dlog: f64) -> f64 {
    match slope {
        Some(k) if boundary_value != 0.0 => boundary_value * (k * dlog).exp(),
        _ => boundary_value,
    }
}

fn interpolate_cell(a: f64, b: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return a;
    }
    if t >= 1.0 {
        return b;
    }
    if a > 0.0 && b > 0.0 {
        a * ((b / a).ln() * t).exp()
    } else if a < 0.0 && b < 0.0 {
        -((-a) * ((b / a).ln() * t).exp())
    } else {
        a + (b - a) * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Boundary {
    Head,
    Tail,
}

/// Fraction of nodes used for boundary power-law fits.
pub const BOUNDARY_FIT_FRACTION: f64 = 0.1;

/// Least-squares log-log slope over the boundary 10% of nodes, restricted to
/// the run of same-sign nonzero values adjacent to the boundary.
pub(crate) fn boundary_slope(values: &[f64], h: f64, side: Boundary) -> Option<f64> {
    let m = values.len();
    let window = ((m as f64 * BOUNDARY_FIT_FRACTION).round() as usize).clamp(2, m);
    let idx = |k: usize| match side {
        Boundary::Head => k,
        Boundary::Tail => m - 1 - k,
    };
    let first = values[idx(0)];
    if first == 0.0 {
        return None;
    }
    let mut xs = Vec::with_capacity(window);
    let mut ys = Vec::with_capacity(window);
    for k in 0..window {
        let v = values[idx(k)];
        if v == 0.0 || v.signum() != first.signum() {
            break;
        }
        let x = match side {
            Boundary::Head => k as f64 * h,
            Boundary::Tail => -(k as f64) * h,
        };
        xs.push(x);
        ys.push(v.abs().ln());
    }
    if xs.len() < 2 {
        return None;
    }
    Some(least_squares_slope(&xs, &ys).0)
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, stderr(b))`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if xs.len() > 2 {
        let ssr: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let e = y - intercept - slope * x;
                e * e
            })
            .sum();
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, stderr)
}

/// `∫ f ds` over one cell of log-width `width` where `log f` is linear;
/// falls back to the trapezoid when an endpoint vanishes or signs differ.
fn cell_integral(f0: f64, f1: f64, width: f64) -> f64 {
    if f0 > 0.0 && f1 > 0.0 {
        let x = (f1 / f0).ln();
        if x.abs() < 1e-12 {
            width * f0 * (1.0 + 0.5 * x)
        } else {
            width * f0 * x.exp_m1() / x
        }
    } else if f0 < 0.0 && f1 < 0.0 {
        -cell_integral(-f0, -f1, width)
    } else {
        0.5 * width * (f0 + f1)
    }
}

/// Integral of the partial cell `[t_a, t_b] ⊂ [0, 1]` (in cell units).
fn partial_cell_integral(f0: f64, f1: f64, width: f64, t_a: f64, t_b: f64) -> f64 {
    let fa = interpolate_cell(f0, f1, t_a);
    let fb = interpolate_cell(f0, f1, t_b);
    cell_integral(fa, fb, width * (t_b - t_a))
}

/// Value of `∫ u^q |x|^{-w} dx` split into the on-grid part and the
/// extrapolated pieces on `(0, r_min)` and `(r_max, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedIntegral {
    pub grid_part: f64,
    pub head: f64,
    pub tail: f64,
    /// Log-log slope of the integrand `u^q r^{N-w}` at each end.
    pub head_slope: Option<f64>,
    pub tail_slope: Option<f64>,
    pub head_divergent: bool,
    pub tail_divergent: bool,
}

impl WeightedIntegral {
    /// Grid part plus truncation corrections; `+∞` when either end diverges.
    pub fn value(&self) -> f64 {
        if self.head_divergent || self.tail_divergent {
            f64::INFINITY
        } else {
            self.grid_part + self.head + self.tail
        }
    }

    pub fn converges(&self) -> bool {
        !(self.head_divergent || self.tail_divergent)
    }

    /// Size of the extrapolated corrections.
    pub fn truncation_bound(&self) -> f64 {
        self.head.abs() + self.tail.abs()
    }
}

/// Samples of the integrand `u^q r^{N-w}` (in the `d log r` measure).
fn integrand(u: &RadialProfile, q: f64, w: f64) -> Vec<f64> {
    let n = u.grid.dim() as f64;
    u.values
        .iter()
        .zip(u.grid.nodes())
        .map(|(&v, &r)| {
            if v == 0.0 {
                0.0
            } else {
                v.abs().powf(q) * r.powf(n - w)
            }
        })
        .collect()
}

/// `∫_{R^N} u^q |x|^{-w} dx`, on-grid part by exact integration of the
/// log-log interpolant, plus head/tail power-law corrections.
pub fn integral_weighted(u: &RadialProfile, q: f64, w: f64) -> WeightedIntegral {
    let grid = &u.grid;
    let f = integrand(u, q, w);
    integral_of_samples(&f, grid)
}

pub(crate) fn integral_of_samples(f: &[f64], grid: &RadialGrid) -> WeightedIntegral {
    let h = grid.log_step();
    let area = grid.sphere_area();
    let m = f.len();
    let grid_part: f64 = (0..m - 1).map(|i| cell_integral(f[i], f[i + 1], h)).sum();
    let head_slope = boundary_slope(f, h, Boundary::Head);
    let tail_slope = boundary_slope(f, h, Boundary::Tail);
    let (head, head_divergent) = match head_slope {
        None => (0.0, false),
        Some(c) if c > 0.0 => (f[0] / c, false),
        Some(_) => (f64::INFINITY, true),
    };
    let (tail, tail_divergent) = match tail_slope {
        None => (0.0, false),
        Some(c) if c < 0.0 => (f[m - 1] / (-c), false),
        Some(_) => (f64::INFINITY, true),
    };
    if head_divergent {
        log::warn!("weighted integral diverges at the origin (slope {:?})", head_slope);
    }
    if tail_divergent {
        log::warn!("weighted integral diverges at infinity (slope {:?})", tail_slope);
    }
    WeightedIntegral {
        grid_part: area * grid_part,
        head: if head_divergent { f64::INFINITY } else { area * head },
        tail: if tail_divergent { f64::INFINITY } else { area * tail },
        head_slope,
        tail_slope,
        head_divergent,
        tail_divergent,
    }
}

/// `du/dr` at the nodes. Centered differences of `log u` in `log r` where the
/// three samples share a sign, centered differences of `u` otherwise;
/// one-sided at the ends.
pub fn derivative(u: &RadialProfile) -> RadialProfile {
    let grid = &u.grid;
    let h = grid.log_step();
    let r = grid.nodes();
    let v = &u.values;
    let m = v.len();
    let slope = |a: usize, b: usize, i: usize| -> f64 {
        // d u / d log r at node i from samples a < b.
        let span = (b - a) as f64 * h;
        let (va, vb, vi) = (v[a], v[b], v[i]);
        let same_sign = (va > 0.0 && vb > 0.0 && vi > 0.0) || (va < 0.0 && vb < 0.0 && vi < 0.0);
        if same_sign {
            vi * (vb / va).ln() / span
        } else {
            (vb - va) / span
        }
    };
    let mut d = vec![0.0; m];
    for i in 0..m {
        let du_dlogr = if i == 0 {
            slope(0, 1, 0)
        } else if i == m - 1 {
            slope(m - 2, m - 1, m - 1)
        } else {
            slope(i - 1, i + 1, i)
        };
        d[i] = du_dlogr / r[i];
    }
    RadialProfile {
        grid: grid.clone(),
        values: d,
    }
}

/// `‖∇u‖_p^p` for a radial profile.
pub fn lp_gradient_norm(u: &RadialProfile, p: f64) -> f64 {
    integral_weighted(&derivative(u).abs(), p, 0.0).value()
}

/// `∫_{R_lo < |x| < R_hi} u^q |x|^{-w} dx`.
pub fn annulus_integral(u: &RadialProfile, q: f64, w: f64, r_lo: f64, r_hi: f64) -> Result<f64> {
    let grid = &u.grid;
    for r in [r_lo, r_hi] {
        if !grid.contains(r) {
            return Err(Error::OutOfRange {
                r,
                r_min: grid.r_min(),
                r_max: grid.r_max(),
            });
        }
    }
    if !(r_lo < r_hi) {
        return Err(Error::InvalidParams(format!(
            "annulus needs R_lo < R_hi (got {r_lo}, {r_hi})"
        )));
    }
    let f = integrand(u, q, w);
    let h = grid.log_step();
    let m = f.len();
    let xa = grid.fractional_index(r_lo).clamp(0.0, (m - 1) as f64);
    let xb = grid.fractional_index(r_hi).clamp(0.0, (m - 1) as f64);
    let ia = (xa.floor() as usize).min(m - 2);
    let ib = (xb.floor() as usize).min(m - 2);
    let mut total = 0.0;
    for i in ia..=ib {
        let ta = if i == ia { xa - i as f64 } else { 0.0 };
        let tb = if i == ib { xb - i as f64 } else { 1.0 };
        if tb > ta {
            total += partial_cell_integral(f[i], f[i + 1], h, ta, tb);
        }
    }
    Ok(grid.sphere_area() * total)
}

/// `(∫_{R_lo < |x| < R_hi} u^q dx)^{1/q}`.
pub fn annulus_norm(u: &RadialProfile, q: f64, r_lo: f64, r_hi: f64) -> Result<f64> {
    Ok(annulus_integral(u, q, 0.0, r_lo, r_hi)?.powf(1.0 / q))
}

/// `∫_{|x| < R} u^q |x|^{-w} dx` including the extrapolated head.
pub fn ball_integral(u: &RadialProfile, q: f64, w: f64, radius: f64) -> Result<f64> {
    let whole = integral_weighted(u, q, w);
    if whole.head_divergent {
        return Ok(f64::INFINITY);
    }
    Ok(whole.head + annulus_integral(u, q, w, u.grid.r_min(), radius)?)
}

/// `∫_{|x| > R} u^q |x|^{-w} dx` including the extrapolated tail.
pub fn complement_integral(u: &RadialProfile, q: f64, w: f64, radius: f64) -> Result<f64> {
    let whole = integral_weighted(u, q, w);
    if whole.tail_divergent {
        return Ok(f64::INFINITY);
    }
    Ok(whole.tail + annulus_integral(u, q, w, radius, u.grid.r_max())?)
}

/// `r ↦ λ^a u(λ r)` resampled on the same grid. When `λ` is an integer power
/// of the node ratio this is an exact index shift.
pub fn rescale(u: &RadialProfile, lambda: f64, a: f64) -> RadialProfile {
    let factor = lambda.powf(a);
    let grid = u.grid.clone();
    let shift = (lambda.ln() / grid.log_step()).round();
    let exact = ((shift * grid.log_step()).exp() / lambda - 1.0).abs() < 1e-12;
    let values = if exact {
        let k = shift as i64;
        let head = u.head_slope();
        let tail = u.tail_slope();
        let m = grid.len() as i64;
        let h = grid.log_step();
        (0..m)
            .map(|i| {
                let j = i + k;
                let v = if j < 0 {
                    extend(u.values[0], head, j as f64 * h)
                } else if j >= m {
                    extend(u.values[(m - 1) as usize], tail, (j - m + 1) as f64 * h)
                } else {
                    u.values[j as usize]
                };
                factor * v
            })
            .collect()
    } else {
        grid.nodes()
            .iter()
            .map(|&r| factor * u.interpolate(lambda * r))
            .collect()
    };
    RadialProfile { grid, values }
}

/// Writes the two-column profile CSV with its `# N=<n> p=<p>` header.
pub fn write_profile_csv<W: Write>(mut out: W, u: &RadialProfile, p: f64) -> Result<()> {
    writeln!(out, "# N={} p={}", u.grid.dim(), p)?;
    writeln!(out, "r,u")?;
    for (r, v) in u.grid.nodes().iter().zip(&u.values) {
        writeln!(out, "{r:.17e},{v:.17e}")?;
    }
    Ok(())
}

/// Profile read back from CSV together with the header metadata.
#[derive(Debug, Clone)]
pub struct ProfileFile {
    pub dim: usize,
    pub p: f64,
    pub profile: RadialProfile,
    /// True when the file's radii were not geometric and were resampled.
    pub resampled: bool,
}

/// Reads a profile CSV. Radii must be strictly increasing and positive and
/// values finite and nonnegative; non-geometric radii are resampled onto a
/// geometric grid with the same extent and count.
pub fn read_profile_csv<R: BufRead>(input: R) -> Result<ProfileFile> {
    let mut dim = None;
    let mut p = None;
    let mut rs = Vec::new();
    let mut us = Vec::new();
    let mut saw_header_row = false;
    for (k, line) in input.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(meta) = trimmed.strip_prefix('#') {
            for token in meta.split_whitespace() {
                if let Some(v) = token.strip_prefix("N=") {
                    dim = Some(v.parse::<usize>().map_err(|e| Error::Parse {
                        line: line_no,
                        msg: format!("bad N: {e}"),
                    })?);
                } else if let Some(v) = token.strip_prefix("p=") {
                    p = Some(v.parse::<f64>().map_err(|e| Error::Parse {
                        line: line_no,
                        msg: format!("bad p: {e}"),
                    })?);
                }
            }
            continue;
        }
        if !saw_header_row {
            if trimmed.replace(' ', "") != "r,u" {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected header 'r,u', found '{trimmed}'"),
                });
            }
            saw_header_row = true;
            continue;
        }
        let mut cols = trimmed.split(',');
        let parse = |s: Option<&str>, what: &str| -> Result<f64> {
            let s = s.ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("missing {what} column"),
            })?;
            let v = s.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad {what} '{s}': {e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite {what}"),
                });
            }
            Ok(v)
        };
        let r = parse(cols.next(), "r")?;
        let v = parse(cols.next(), "u")?;
        if cols.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: "expected two columns".into(),
            });
        }
        if r <= 0.0 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("radius {r} must be positive"),
            });
        }
        if let Some(&prev) = rs.last() {
            if r <= prev {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("radii not strictly increasing ({prev} then {r})"),
                });
            }
        }
        if v < 0.0 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("negative value {v}"),
            });
        }
        rs.push(r);
        us.push(v);
    }
    let dim = dim.ok_or_else(|| Error::Parse {
        line: 1,
        msg: "missing '# N=<n> p=<p>' header".into(),
    })?;
    let p = p.ok_or_else(|| Error::Parse {
        line: 1,
        msg: "missing p in header".into(),
    })?;
    if rs.len() < MIN_NODES {
        return Err(Error::Parse {
            line: rs.len(),
            msg: format!("need at least {MIN_NODES} rows, found {}", rs.len()),
        });
    }
    let m = rs.len();
    let grid = Arc::new(RadialGrid::geometric(dim, rs[0], rs[m - 1], m)?);
    let geometric = grid
        .nodes()
        .iter()
        .zip(&rs)
        .all(|(a, b)| ((a - b) / a).abs() < 1e-9);
    if geometric {
        let profile = RadialProfile::new(grid, us)?;
        return Ok(ProfileFile {
            dim,
            p,
            profile,
            resampled: false,
        });
    }
    let values = grid
        .nodes()
        .iter()
        .map(|&r| {
            let j = match rs.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
                Ok(j) => return us[j],
                Err(j) => j.clamp(1, m - 1),
            };
            let t = (r / rs[j - 1]).ln() / (rs[j] / rs[j - 1]).ln();
            interpolate_cell(us[j - 1], us[j], t)
        })
        .collect();
    Ok(ProfileFile {
        dim,
        p,
        profile: RadialProfile::new(grid, values)?,
        resampled: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(dim: usize, lo: f64, hi: f64, m: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::geometric(dim, lo, hi, m).unwrap())
    }

    #[test]
    fn grid_is_log_uniform() {
        let g = grid(3, 1e-4, 1e4, 2048);
        let nodes = g.nodes();
        assert_eq!(nodes.len(), 2048);
        let h = g.log_step();
        for w in nodes.windows(2) {
            assert!(w[1] > w[0]);
            assert!(((w[1] / w[0]).ln() - h).abs() < 1e-12);
        }
        assert!(RadialGrid::geometric(3, 1.0, 2.0, 15).is_err());
        assert!(RadialGrid::geometric(3, 0.0, 2.0, 64).is_err());
        assert!(RadialGrid::geometric(3, 2.0, 1.0, 64).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn derivative_of_power_law_is_exact() {
        let g = grid(5, 1e-3, 1e3, 300);
        let gamma = 1.7;
        let u = RadialProfile::from_fn(g.clone(), |r| r.powf(-gamma)).unwrap();
        let d = derivative(&u);
        for (i, &r) in g.nodes().iter().enumerate() {
            let exact = -gamma * r.powf(-gamma - 1.0);
            assert!(((d.values()[i] - exact) / exact).abs() < 1e-10, "node {i}");
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = grid(3, 1e-2, 1e2, 64);
        let u = RadialProfile::from_fn(g, |_| 3.5).unwrap();
        assert!(derivative(&u).values().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn derivative_of_exponential() {
        let g = grid(3, 0.1, 10.0, 512);
        let u = RadialProfile::from_fn(g.clone(), |r| (-r).exp()).unwrap();
        let d = derivative(&u);
        let worst = (1..511)
            .map(|i| {
                let r = g.nodes()[i];
                ((d.values()[i] + (-r).exp()) / (-r).exp()).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn weighted_integral_of_power_law_matches_antiderivative() {
        let g = grid(5, 1e-2, 1e2, 400);
        let (a, q, w) = (1.3, 2.0, 0.5);
        let u = RadialProfile::from_fn(g.clone(), |r| r.powf(-a)).unwrap();
        let wi = integral_weighted(&u, q, w);
        let e = 5.0 - w - a * q;
        let exact = sphere_area(5) * (1e2f64.powf(e) - 1e-2f64.powf(e)) / e;
        assert!(((wi.grid_part - exact) / exact).abs() < 1e-8);
    }

    #[test]
    fn weighted_integral_of_zero() {
        let g = grid(4, 1e-2, 1e2, 64);
        let wi = integral_weighted(&RadialProfile::zeros(g), 2.0, 0.0);
        assert_eq!(wi.value(), 0.0);
    }

    #[test]
    fn shell_volume_via_annulus() {
        let g = grid(3, 0.1, 10.0, 1024);
        let u = RadialProfile::from_fn(g, |_| 1.0).unwrap();
        let v = annulus_norm(&u, 1.0, 1.0, 2.0).unwrap();
        assert!((v - 28.0 * PI / 3.0).abs() < 1e-6 * v);
        assert!(annulus_norm(&u, 1.0, 0.05, 2.0).is_err());
    }

    #[test]
    fn shell_volume_via_indicator() {
        let g = grid(3, 0.1, 10.0, 4096);
        let u = RadialProfile::from_fn(g, |r| if (1.0..=2.0).contains(&r) { 1.0 } else { 0.0 })
            .unwrap();
        let v = integral_weighted(&u, 1.0, 0.0).value();
        assert!((v - 28.0 * PI / 3.0).abs() < 5e-3 * v, "{v}");
    }

    #[test]
    fn truncation_corrections_recover_full_integral() {
        // ∫_{R^3} (1+r^2)^{-3} dx = π²/4.
        let g = grid(3, 1e-2, 1e2, 800);
        let u = RadialProfile::from_fn(g, |r| (1.0 + r * r).powi(-3)).unwrap();
        let wi = integral_weighted(&u, 1.0, 0.0);
        let exact = PI * PI / 4.0;
        assert!(wi.head > 0.0 && wi.tail > 0.0);
        assert!(((wi.value() - exact) / exact).abs() < 1e-4, "{wi:?}");
    }

    #[test]
    fn divergent_tail_is_flagged() {
        let g = grid(3, 1e-2, 1e2, 200);
        let u = RadialProfile::from_fn(g, |r| r.powf(-2.0)).unwrap();
        let wi = integral_weighted(&u, 1.0, 0.0);
        assert!(wi.tail_divergent && !wi.head_divergent);
        assert!(wi.value().is_infinite());
    }

    #[test]
    fn gradient_norm_of_power_law() {
        let g = grid(5, 1e-2, 1e2, 600);
        let (gamma, p) = (1.2, 2.0);
        let u = RadialProfile::from_fn(g.clone(), |r| r.powf(-gamma)).unwrap();
        let d = derivative(&u).abs();
        let e = 5.0 - p * (gamma + 1.0);
        let exact = sphere_area(5) * gamma.powf(p) * (1e2f64.powf(e) - 1e-2f64.powf(e)) / e;
        let got = integral_weighted(&d, p, 0.0).grid_part;
        assert!(((got - exact) / exact).abs() < 1e-6);
        let c = RadialProfile::from_fn(g, |_| 2.0).unwrap();
        assert_eq!(lp_gradient_norm(&c, p), 0.0);
    }

    #[test]
    fn rescale_by_node_ratio_is_a_shift() {
        let g = grid(5, 1e-3, 1e3, 257);
        let u = RadialProfile::from_fn(g.clone(), |r| (1.0 + r * r).powf(-1.5)).unwrap();
        let lambda = g.ratio().powi(7);
        let v = rescale(&u, lambda, 1.5);
        for i in 0..200 {
            let expect = lambda.powf(1.5) * u.values()[i + 7];
            assert!(((v.values()[i] - expect) / expect).abs() < 1e-13);
        }
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let g = grid(5, 1e-2, 1e2, 32);
        let u = RadialProfile::from_fn(g, |r| 1.0 / (1.0 + r)).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &u, 2.0).unwrap();
        let back = read_profile_csv(buf.as_slice()).unwrap();
        assert_eq!(back.dim, 5);
        assert_eq!(back.p, 2.0);
        assert!(!back.resampled);
        for (a, b) in back.profile.values().iter().zip(u.values()) {
            assert!((a - b).abs() <= 1e-15 * a.abs());
        }

        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let r3 = lines[4].split(',').next().unwrap().to_string();
        let mut with_nan = lines.clone();
        with_nan[4] = format!("{r3},NaN");
        let err = read_profile_csv(with_nan.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
        lines.swap(5, 6);
        let err = read_profile_csv(lines.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 7, .. }), "{err}");
    }
}
