//! Monte-Carlo evaluation of `(|x|^{-ν} * g)(x)` directly in `R^N`.
//!
//! Independent of the radial reduction in [`crate::convolution`]: the
//! integral is split into a ball `|y - x| < d`, sampled with density
//! `∝ |y - x|^{-ν}` so the weight stays bounded, and its complement, sampled
//! from a radial density in `|y|`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::radial::sphere_area;

/// Default number of samples per radius.
pub const DEFAULT_SAMPLES: usize = 1_000_000;

/// How the density behaves away from the origin.
#[derive(Debug, Clone, Copy)]
pub enum Support {
    /// `g = 0` for `|y| > radius`.
    Compact { radius: f64 },
    /// `g(t) ≲ t^{-decay}` for `t > scale`.
    PowerTail { scale: f64, decay: f64 },
}

/// Estimate with its one-sigma standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, w: f64) {
        self.n += 1;
        self.sum += w;
        self.sum_sq += w * w;
    }

    fn mean_and_var(&self) -> (f64, f64) {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0) / n;
        (mean, var)
    }
}

fn unit_vector<R: Rng>(rng: &mut R, n: usize, out: &mut [f64]) {
    loop {
        let mut norm = 0.0;
        for v in out.iter_mut().take(n) {
            *v = rng.sample(StandardNormal);
            norm += *v * *v;
        }
        if norm > 1e-300 {
            let inv = norm.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

const TABLE_CELLS: usize = 4096;

/// Piecewise-constant density in `t` proportional to an upper envelope of
/// `g(t) t^{N-1}` on `[0, scale]`.
struct RadialTable {
    step: f64,
    cdf: Vec<f64>,
    heights: Vec<f64>,
}

impl RadialTable {
    fn new<G: Fn(f64) -> f64>(g: &G, n: usize, scale: f64) -> Self {
        let step = scale / TABLE_CELLS as f64;
        let f = |t: f64| g(t).abs() * t.powi(n as i32 - 1);
        let mut raw: Vec<f64> = (0..TABLE_CELLS)
            .map(|k| {
                let a = k as f64 * step;
                f(a).max(f(a + 0.5 * step)).max(f(a + step))
            })
            .collect();
        let peak = raw.iter().cloned().fold(0.0, f64::max);
        // keep every cell reachable
        let floor = if peak > 0.0 { 1e-6 * peak } else { 1.0 };
        raw.iter_mut().for_each(|v| *v = v.max(floor));
        let total: f64 = raw.iter().sum::<f64>() * step;
        let heights: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let mut cdf = Vec::with_capacity(TABLE_CELLS);
        let mut acc = 0.0;
        for h in &heights {
            acc += h * step;
            cdf.push(acc);
        }
        RadialTable { step, cdf, heights }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        let k = self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1);
        let lo = if k == 0 { 0.0 } else { self.cdf[k - 1] };
        let frac = ((u - lo) / (self.heights[k] * self.step)).clamp(0.0, 1.0);
        (k as f64 + frac) * self.step
    }

    fn density(&self, t: f64) -> f64 {
        let cells = self.heights.len();
        if !(t >= 0.0) || t > cells as f64 * self.step {
            return 0.0;
        }
        self.heights[((t / self.step) as usize).min(cells - 1)]
    }
}

/// `∫_{R^N} |x - y|^{-ν} g(|y|) dy` at `|x| = r`.
pub fn riesz_monte_carlo<G: Fn(f64) -> f64 + Sync>(
    g: &G,
    support: Support,
    n: usize,
    nu: f64,
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let nf = n as f64;
    if !(nu > 0.0 && nu < nf) || n < 1 || samples < 2 || !(r >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "Monte-Carlo oracle needs 0 < nu < N, r >= 0 and at least 2 samples (nu={nu}, N={n}, r={r})"
        )));
    }
    let (scale, tail_decay) = match support {
        Support::Compact { radius } => (radius, None),
        Support::PowerTail { scale, decay } => {
            if decay <= nf - nu {
                return Err(Error::Divergence {
                    beta: decay,
                    threshold: nf - nu,
                });
            }
            (scale, Some(decay))
        }
    };
    if !(scale > 0.0) {
        return Err(Error::InvalidParams("support scale must be positive".into()));
    }
    let area = sphere_area(n);
    let d = 0.5 * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dir = vec![0.0; n];
    let norm_of = |dir: &[f64], len: f64, shift: f64| -> f64 {
        // |shift·e_1 + len·dir|
        let mut s = (shift + len * dir[0]).powi(2);
        for v in &dir[1..] {
            s += (len * v).powi(2);
        }
        s.sqrt()
    };

    // Ball around x: density |z|^{-ν}/c_a on |z| < d.
    let c_a = area * d.powf(nf - nu) / (nf - nu);
    let n_a = samples / 2;
    let mut near = Moments::default();
    let ball_misses_support = matches!(support, Support::Compact { .. }) && r - d > scale;
    for _ in 0..n_a {
        if ball_misses_support {
            near.push(0.0);
            continue;
        }
        let u: f64 = rng.random();
        let rho = d * u.powf(1.0 / (nf - nu));
        unit_vector(&mut rng, n, &mut dir);
        let y = norm_of(&dir, rho, r);
        near.push(c_a * g(y));
    }

    // Complement: |y| drawn from a tabulated envelope of g(t) t^{N-1} on
    // [0, scale], mixed with a Pareto tail beyond it for non-compact g.
    let table = RadialTable::new(g, n, scale);
    let tail_rate = tail_decay.map(|b| (b + nu - nf).max(0.25));
    let inner_share = if tail_rate.is_some() { 0.5 } else { 1.0 };
    let n_b = samples - n_a;
    let mut far = Moments::default();
    for _ in 0..n_b {
        unit_vector(&mut rng, n, &mut dir);
        let pick: f64 = rng.random();
        let t = match tail_rate {
            Some(a) if pick >= inner_share => {
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                scale * u.powf(-1.0 / a)
            }
            _ => table.sample(&mut rng),
        };
        let mut radial_density = inner_share * table.density(t);
        if let Some(a) = tail_rate {
            if t > scale {
                radial_density += 0.5 * a * scale.powf(a) * t.powf(-a - 1.0);
            }
        }
        let dist = norm_of(&dir, t, -r);
        let gt = g(t);
        if dist < d || gt == 0.0 {
            far.push(0.0);
            continue;
        }
        // y-density is radial_density / (|S| t^{N-1})
        far.push(dist.powf(-nu) * gt * area * t.powf(nf - 1.0) / radial_density);
    }
    let (ma, va) = near.mean_and_var();
    let (mb, vb) = far.mean_and_var();
    let value = ma + mb;
    if !value.is_finite() {
        return Err(Error::NotFinite("Monte-Carlo oracle"));
    }
    Ok(McEstimate {
        value,
        std_error: (va + vb).sqrt(),
    })
}

/// The oracle at several radii, one independent stream per radius.
pub fn riesz_monte_carlo_many<G: Fn(f64) -> f64 + Sync>(
    g: &G,
    support: Support,
    n: usize,
    nu: f64,
    radii: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    radii
        .par_iter()
        .enumerate()
        .map(|(k, &r)| {
            let stream = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64);
            riesz_monte_carlo(g, support, n, nu, r, samples, stream)
        })
        .collect()
}
