//! Post-hoc checks on computed profiles: decay-exponent fits, gradient
//! asymptotics, doubling estimates, monotonicity, the scaling form and the
//! moving-plane reflection deficit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::energy::{rayleigh, Problem};
use crate::error::{Error, Result};
use crate::model::{critical_exponents, decay_roots, ProblemParams, DEFAULT_ROOT_TOL};
use crate::radial::{
    annulus_norm, ball_integral, complement_integral, derivative, least_squares_slope, rescale,
    RadialGrid, RadialProfile,
};

/// Exponent fit over a window `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    /// Negated log-log slope.
    pub gamma: f64,
    pub stderr: f64,
    pub window: (f64, f64),
}

/// Least-squares decay exponent of `u` on `[lo, hi]`.
pub fn fit_decay_exponent(u: &RadialProfile, lo: f64, hi: f64) -> Result<ExponentFit> {
    let grid = u.grid();
    if !(lo > 0.0 && hi / lo >= 10.0 * (1.0 - 1e-9)) {
        return Err(Error::InvalidParams(format!(
            "fit window [{lo}, {hi}] must span at least one decade"
        )));
    }
    if lo < grid.r_min() * (1.0 - 1e-12) || hi > grid.r_max() * (1.0 + 1e-12) {
        return Err(Error::OutOfRange {
            r: if lo < grid.r_min() { lo } else { hi },
            r_min: grid.r_min(),
            r_max: grid.r_max(),
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&r, &v) in grid.nodes().iter().zip(u.values()) {
        if r < lo * (1.0 - 1e-12) || r > hi * (1.0 + 1e-12) {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "profile not positive at r = {r} inside the fit window"
            )));
        }
        xs.push(r.ln());
        ys.push(v.ln());
    }
    if xs.len() < 3 {
        return Err(Error::InvalidParams(format!(
            "fit window [{lo}, {hi}] holds fewer than 3 nodes"
        )));
    }
    let (slope, _, stderr) = least_squares_slope(&xs, &ys);
    Ok(ExponentFit {
        gamma: -slope,
        stderr,
        window: (lo, hi),
    })
}

/// Near and far fit windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindows {
    pub near: (f64, f64),
    pub far: (f64, f64),
}

impl FitWindows {
    /// `[2 r_min, 20 r_min]` and `[r_max/20, r_max/2]`.
    pub fn default_for(grid: &RadialGrid) -> Self {
        FitWindows {
            near: (2.0 * grid.r_min(), 20.0 * grid.r_min()),
            far: (grid.r_max() / 20.0, grid.r_max() / 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticsReport {
    pub gamma_near: ExponentFit,
    pub gamma_far: ExponentFit,
    pub grad_near: ExponentFit,
    pub grad_far: ExponentFit,
    /// `(γ₁, γ₂)` targets.
    pub targets: (f64, f64),
    pub tol: f64,
    pub near_pass: bool,
    pub far_pass: bool,
    pub grad_near_pass: bool,
    pub grad_far_pass: bool,
}

impl AsymptoticsReport {
    pub fn all_pass(&self) -> bool {
        self.near_pass && self.far_pass && self.grad_near_pass && self.grad_far_pass
    }
}

/// Compares fitted exponents of `u` and `|u'|` with `γ₁, γ₂, γ₁+1, γ₂+1`.
pub fn check_sharp_asymptotics(
    u: &RadialProfile,
    gammas: (f64, f64),
    tol: f64,
    windows: FitWindows,
) -> Result<AsymptoticsReport> {
    let du = derivative(u).abs();
    let gamma_near = fit_decay_exponent(u, windows.near.0, windows.near.1)?;
    let gamma_far = fit_decay_exponent(u, windows.far.0, windows.far.1)?;
    let grad_near = fit_decay_exponent(&du, windows.near.0, windows.near.1)?;
    let grad_far = fit_decay_exponent(&du, windows.far.0, windows.far.1)?;
    let (g1, g2) = gammas;
    Ok(AsymptoticsReport {
        near_pass: (gamma_near.gamma - g1).abs() <= tol,
        far_pass: (gamma_far.gamma - g2).abs() <= tol,
        grad_near_pass: (grad_near.gamma - (g1 + 1.0)).abs() <= tol,
        grad_far_pass: (grad_far.gamma - (g2 + 1.0)).abs() <= tol,
        gamma_near,
        gamma_far,
        grad_near,
        grad_far,
        targets: gammas,
        tol,
    })
}

/// Result of [`check_monotone`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneReport {
    pub monotone: bool,
    /// Largest `u_{i+1}/u_i`.
    pub worst_ratio: f64,
    /// Index `i` of that pair.
    pub worst_index: usize,
}

/// Relative slack allowed by [`check_monotone`].
pub const MONOTONE_SLACK: f64 = 1e-8;

pub fn check_monotone(u: &RadialProfile) -> MonotoneReport {
    let v = u.values();
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut worst_index = 0;
    let mut monotone = true;
    for i in 0..v.len() - 1 {
        let ratio = if v[i] > 0.0 {
            v[i + 1] / v[i]
        } else if v[i + 1] > 0.0 {
            f64::INFINITY
        } else {
            1.0
        };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_index = i;
        }
        if v[i + 1] > v[i] * (1.0 + MONOTONE_SLACK) || (v[i] <= 0.0 && v[i + 1] > 0.0) {
            monotone = false;
        }
    }
    MonotoneReport {
        monotone,
        worst_ratio,
        worst_index,
    }
}

/// Annulus ratios for one exponent `p̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublingSeries {
    pub p_bar: f64,
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `max / min` of the ratios.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublingReport {
    pub series: Vec<DoublingSeries>,
    pub spread_limit: f64,
    pub spread_pass: bool,
    /// Fitted exponent of `‖u‖_{p*}(B_R)` for small `R`.
    pub tau1: f64,
    /// Fitted exponent of `‖u‖_{p*}(R^N \ B_R)` for large `R`.
    pub tau2: f64,
    pub margin: f64,
    pub tau_pass: bool,
}

/// Dyadic radii `R₀ 2^k` covering one decade from `r0`.
pub fn dyadic_decade(r0: f64) -> Vec<f64> {
    (0..=4).map(|k| r0 * 2f64.powi(k)).filter(|r| *r <= r0 * 10.0 * (1.0 + 1e-12)).collect()
}

/// Default radii: one decade near each end of the grid, leaving room for
/// the `R/8 .. 8R` annuli.
pub fn default_doubling_radii(grid: &RadialGrid) -> Vec<Vec<f64>> {
    vec![
        dyadic_decade(10.0 * grid.r_min()),
        dyadic_decade(grid.r_max() / 100.0),
    ]
}

/// Annulus-ratio and ball-norm exponent checks.
///
/// For each list of radii and `p̄ ∈ {p*, 2p*}` computes
/// `‖u‖_{p̄}(R/4, 4R) / (R^{-(N-p)/p + N/p̄} ‖u‖_{p*}(R/8, 8R))`; the spread
/// `max/min` within each list must stay below `spread_limit`. The exponents
/// of `R ↦ ‖u‖_{p*}(B_R)` on `[10 r_min, 100 r_min]` and of the complement
/// norm on `[r_max/100, r_max/10]` must be `≥ margin` and `≤ -margin`.
pub fn doubling_check(
    u: &RadialProfile,
    params: &ProblemParams,
    radius_lists: &[Vec<f64>],
    spread_limit: f64,
    margin: f64,
) -> Result<DoublingReport> {
    let grid = u.grid();
    let n = params.dim();
    let p = params.p;
    let p_star = critical_exponents(params).p_star;
    let a = (n - p) / p;
    let mut series = Vec::new();
    for radii in radius_lists {
        if radii.is_empty() {
            continue;
        }
        for p_bar in [p_star, 2.0 * p_star] {
            let mut ratios = Vec::with_capacity(radii.len());
            for &r in radii {
                let inner = annulus_norm(u, p_bar, r / 4.0, 4.0 * r)?;
                let outer = annulus_norm(u, p_star, r / 8.0, 8.0 * r)?;
                ratios.push(inner / (r.powf(-a + n / p_bar) * outer));
            }
            let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            series.push(DoublingSeries {
                p_bar,
                radii: radii.clone(),
                ratios,
                spread: max / min,
            });
        }
    }
    let spread_pass = series
        .iter()
        .all(|s| s.spread.is_finite() && s.spread <= spread_limit);

    // A divergent norm is reported as an infinite exponent of the failing sign.
    let slope_of = |radii: &[f64], f: &dyn Fn(f64) -> Result<f64>, diverged: f64| -> Result<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &r in radii {
            let v = f(r)?;
            if !v.is_finite() {
                return Ok(diverged);
            }
            xs.push(r.ln());
            ys.push(v.ln() / p_star);
        }
        Ok(least_squares_slope(&xs, &ys).0)
    };
    let small: Vec<f64> = (0..=8)
        .map(|k| 10.0 * grid.r_min() * 10f64.powf(k as f64 / 8.0))
        .collect();
    let large: Vec<f64> = (0..=8)
        .map(|k| grid.r_max() / 100.0 * 10f64.powf(k as f64 / 8.0))
        .collect();
    let tau1 = slope_of(&small, &|r| ball_integral(u, p_star, 0.0, r), f64::NEG_INFINITY)?;
    let tau2 = slope_of(&large, &|r| complement_integral(u, p_star, 0.0, r), f64::INFINITY)?;
    Ok(DoublingReport {
        series,
        spread_limit,
        spread_pass,
        tau1,
        tau2,
        margin,
        tau_pass: tau1 >= margin && tau2 <= -margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFormReport {
    /// `λ = u(1)^{p/(N-p)}`
    pub lambda: f64,
    /// `Û(λ)`, which is 1 by construction.
    pub u_hat_at_lambda: f64,
    pub quotient: f64,
    pub quotient_hat: f64,
    pub identity_pass: bool,
    pub quotient_pass: bool,
}

/// Builds `Û(r) = λ^{-(N-p)/p} u(r/λ)` and compares it with `u`.
pub fn scaling_form_check(u: &RadialProfile, problem: &Problem) -> Result<ScalingFormReport> {
    let grid = u.grid();
    if u.is_zero() {
        return Err(Error::ZeroProfile("scaling form needs u > 0"));
    }
    if !grid.contains(1.0) {
        return Err(Error::OutOfRange {
            r: 1.0,
            r_min: grid.r_min(),
            r_max: grid.r_max(),
        });
    }
    let params = &problem.params;
    let a = params.scaling_exponent();
    let u1 = u.interpolate(1.0);
    if !(u1 > 0.0) {
        return Err(Error::InvalidProfile("u(1) must be positive".into()));
    }
    let lambda = u1.powf(1.0 / a);
    let hat = rescale(u, 1.0 / lambda, a);
    let u_hat_at_lambda = lambda.powf(-a) * u.interpolate(1.0);
    let quotient = rayleigh(u, problem)?.quotient;
    let quotient_hat = rayleigh(&hat, problem)?.quotient;
    Ok(ScalingFormReport {
        lambda,
        u_hat_at_lambda,
        quotient,
        quotient_hat,
        identity_pass: (u_hat_at_lambda - 1.0).abs() <= 1e-8,
        quotient_pass: ((quotient_hat - quotient) / quotient).abs() <= 1e-6,
    })
}

/// Default reflection positions.
pub const DEFAULT_PLANES: [f64; 3] = [-5.0, -2.0, -0.5];

/// Largest `max(0, u(|x|) - u(|x_λ|))` over `x ∈ Σ_λ = {x₁ < λ}`, per `λ`.
///
/// Points lie on `rays` random rays into the half-space, `points` per ray,
/// log-spaced over the part of the ray inside the grid range and `Σ_λ`.
pub fn moving_plane_deficit(
    u: &RadialProfile,
    lambdas: &[f64],
    rays: usize,
    points: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if let Some(l) = lambdas.iter().find(|l| !(**l < 0.0)) {
        return Err(Error::InvalidParams(format!("plane position {l} must be negative")));
    }
    let grid = u.grid();
    let n = grid.dim();
    Ok(lambdas
        .par_iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let mut worst: f64 = 0.0;
            for _ in 0..rays {
                // direction cosine e₁ of a uniform ray into x₁ < 0
                let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
                let e1 = -v[0].abs();
                if e1 > -1e-6 {
                    continue;
                }
                let t_lo = (lambda / e1 * (1.0 + 1e-9)).max(grid.r_min());
                let t_hi = grid.r_max();
                if t_lo >= t_hi {
                    continue;
                }
                for j in 0..points {
                    let t = t_lo * (t_hi / t_lo).powf(j as f64 / (points - 1).max(1) as f64);
                    let x1 = t * e1;
                    if x1 >= lambda {
                        continue;
                    }
                    let reflected2 = t * t + 4.0 * lambda * (lambda - x1);
                    let r_ref = reflected2.max(0.0).sqrt();
                    let d = u.interpolate(t) - u.interpolate(r_ref);
                    worst = worst.max(d);
                }
            }
            (lambda, worst)
        })
        .collect())
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub target: f64,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(check: impl Into<String>, target: f64, measured: f64, tolerance: f64, pass: bool) -> Self {
        CheckRow {
            check: check.into(),
            target,
            measured,
            tolerance,
            pass,
        }
    }
}

/// Settings of [`run_battery`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub windows: Option<FitWindows>,
    pub exponent_tol: f64,
    pub doubling_radii: Option<Vec<Vec<f64>>>,
    pub spread_limit: f64,
    pub tau_margin: f64,
    pub planes: Vec<f64>,
    pub rays: usize,
    pub points_per_ray: usize,
    pub deficit_tol: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            windows: None,
            exponent_tol: 0.1,
            doubling_radii: None,
            spread_limit: 10.0,
            tau_margin: 0.02,
            planes: DEFAULT_PLANES.to_vec(),
            rays: 64,
            points_per_ray: 128,
            deficit_tol: 1e-8,
            seed: 0,
        }
    }
}

/// Full battery; every check becomes one row.
pub fn run_battery(
    u: &RadialProfile,
    problem: &Problem,
    opts: &VerifyOptions,
) -> Result<Vec<CheckRow>> {
    let params = &problem.params;
    let grid = u.grid();
    let (g1, g2) = decay_roots(params, DEFAULT_ROOT_TOL)?;
    let windows = opts.windows.unwrap_or_else(|| FitWindows::default_for(grid));
    let tol = opts.exponent_tol;
    let mut rows = Vec::new();

    let asym = check_sharp_asymptotics(u, (g1, g2), tol, windows)?;
    rows.push(CheckRow::new("gamma_near", g1, asym.gamma_near.gamma, tol, asym.near_pass));
    rows.push(CheckRow::new("gamma_far", g2, asym.gamma_far.gamma, tol, asym.far_pass));
    rows.push(CheckRow::new(
        "grad_near",
        g1 + 1.0,
        asym.grad_near.gamma,
        tol,
        asym.grad_near_pass,
    ));
    rows.push(CheckRow::new(
        "grad_far",
        g2 + 1.0,
        asym.grad_far.gamma,
        tol,
        asym.grad_far_pass,
    ));

    let mono = check_monotone(u);
    rows.push(CheckRow::new("monotone", 1.0, mono.worst_ratio, MONOTONE_SLACK, mono.monotone));

    let radii = opts
        .doubling_radii
        .clone()
        .unwrap_or_else(|| default_doubling_radii(grid));
    let dbl = doubling_check(u, params, &radii, opts.spread_limit, opts.tau_margin)?;
    for s in &dbl.series {
        rows.push(CheckRow::new(
            format!("doubling_spread_pbar{:.4}_R{:.3e}", s.p_bar, s.radii[0]),
            1.0,
            s.spread,
            opts.spread_limit,
            s.spread.is_finite() && s.spread <= opts.spread_limit,
        ));
    }
    rows.push(CheckRow::new("tau1_small_R", opts.tau_margin, dbl.tau1, 0.0, dbl.tau1 >= opts.tau_margin));
    rows.push(CheckRow::new("tau2_large_R", -opts.tau_margin, dbl.tau2, 0.0, dbl.tau2 <= -opts.tau_margin));

    let sf = scaling_form_check(u, problem)?;
    rows.push(CheckRow::new("scaling_form_identity", 1.0, sf.u_hat_at_lambda, 1e-8, sf.identity_pass));
    rows.push(CheckRow::new("scaling_form_quotient", sf.quotient, sf.quotient_hat, 1e-6, sf.quotient_pass));

    let peak = u.max_value();
    for (lambda, d) in moving_plane_deficit(u, &opts.planes, opts.rays, opts.points_per_ray, opts.seed)? {
        rows.push(CheckRow::new(
            format!("moving_plane_lambda{lambda}"),
            0.0,
            d,
            opts.deficit_tol * peak,
            d <= opts.deficit_tol * peak,
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn grid() -> Arc<RadialGrid> {
        Arc::new(RadialGrid::default_for(5))
    }

    #[test]
    fn exact_power_law_fit() {
        let u = RadialProfile::from_fn(grid(), |r| 3.0 * r.powf(-1.7)).unwrap();
        let f = fit_decay_exponent(&u, 1.0, 100.0).unwrap();
        assert!((f.gamma - 1.7).abs() < 1e-12 && f.stderr < 1e-12, "{f:?}");
    }

    #[test]
    fn perturbed_power_law_fit() {
        let u = RadialProfile::from_fn(grid(), |r| 2.0 * r.powf(-0.4) * (1.0 + 0.01 * r)).unwrap();
        let f = fit_decay_exponent(&u, 1e-3, 1e-2).unwrap();
        assert!((f.gamma - 0.4).abs() <= 0.01);
    }

    #[test]
    fn talenti_tail_fit() {
        let u = RadialProfile::from_fn(grid(), |r| (1.0 + r * r).powf(-1.5)).unwrap();
        let f = fit_decay_exponent(&u, 1e2, 1e3).unwrap();
        assert!((f.gamma - 3.0).abs() <= 0.01);
    }

    #[test]
    fn narrow_window_rejected() {
        let u = RadialProfile::from_fn(grid(), |r| r.powf(-1.0)).unwrap();
        assert!(fit_decay_exponent(&u, 1.0, 5.0).is_err());
        assert!(fit_decay_exponent(&u, 1e-6, 1.0).is_err());
    }

    fn blend(g1: f64, g2: f64) -> RadialProfile {
        RadialProfile::from_fn(grid(), |r| r.powf(-g1) * (1.0 + r).powf(g1 - g2)).unwrap()
    }

    #[test]
    fn blend_passes_asymptotics_and_gaussian_fails() {
        let (g1, g2) = (0.381966, 2.618034);
        let u = blend(g1, g2);
        let w = FitWindows::default_for(u.grid());
        let rep = check_sharp_asymptotics(&u, (g1, g2), 0.05, w).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        let gauss = RadialProfile::from_fn(grid(), |r| (-r * r).exp().max(1e-300)).unwrap();
        let rep = check_sharp_asymptotics(&gauss, (0.0, 3.0), 0.1, w);
        assert!(rep.map(|r| !r.far_pass).unwrap_or(true));
    }

    #[test]
    fn monotone_detects_bump() {
        assert!(check_monotone(&blend(0.3, 2.7)).monotone);
        let mut v = blend(0.3, 2.7).into_values();
        v[1000] *= 1.05;
        let bumped = RadialProfile::new(grid(), v).unwrap();
        let rep = check_monotone(&bumped);
        assert!(!rep.monotone);
        assert_eq!(rep.worst_index, 999);
    }

    #[test]
    fn doubling_ratios_constant_on_power_law() {
        let params = ProblemParams::hartree(5, 2.0, 1.0).unwrap();
        let u = RadialProfile::from_fn(grid(), |r| r.powf(-1.2)).unwrap();
        let radii = default_doubling_radii(u.grid());
        let rep = doubling_check(&u, &params, &radii, 10.0, 0.02).unwrap();
        for s in &rep.series {
            assert!((s.spread - 1.0).abs() < 1e-9, "{s:?}");
        }
    }

    #[test]
    fn doubling_flags_slow_tail() {
        let params = ProblemParams::hartree(5, 2.0, 1.0).unwrap();
        let u = RadialProfile::from_fn(grid(), |r| (1.0 + r).powf(-1.2)).unwrap();
        let rep = doubling_check(&u, &params, &default_doubling_radii(u.grid()), 10.0, 0.02).unwrap();
        assert!(rep.tau2 > -0.02, "{rep:?}");
        assert!(!rep.tau_pass);
    }

    #[test]
    fn moving_plane_deficit_zero_for_decreasing_and_positive_for_bump() {
        let u = blend(0.3, 2.7);
        let peak = u.max_value();
        for (_, d) in moving_plane_deficit(&u, &[-5.0, -2.0, -0.5, -1e-3], 64, 128, 1).unwrap() {
            assert!(d <= 1e-8 * peak);
        }
        let bumped = RadialProfile::from_fn(grid(), |r| {
            r.powf(-0.3) * (1.0 + r).powf(-2.4) + 0.5 * (-(r - 6.0).powi(2)).exp()
        })
        .unwrap();
        let d = moving_plane_deficit(&bumped, &[-0.5], 64, 128, 1).unwrap();
        assert!(d[0].1 > 1e-3, "{d:?}");
    }

    #[test]
    fn deficit_is_deterministic() {
        let u = RadialProfile::from_fn(grid(), |r| (1.0 + r * r).powf(-1.5) + 0.1 * (-(r - 3.0).powi(2)).exp()).unwrap();
        let a = moving_plane_deficit(&u, &DEFAULT_PLANES, 16, 32, 9).unwrap();
        let b = moving_plane_deficit(&u, &DEFAULT_PLANES, 16, 32, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scaling_form_identity_holds() {
        let params = ProblemParams::hardy_sobolev(5, 2.0, 0.5, 0.0).unwrap();
        let problem = Problem::new(params, Arc::new(crate::convolution::KernelStore::new()));
        let u = blend(0.2, 2.8).scaled(3.7);
        let rep = scaling_form_check(&u, &problem).unwrap();
        assert!(rep.identity_pass, "{rep:?}");
        assert!(matches!(
            scaling_form_check(&RadialProfile::zeros(grid()), &problem),
            Err(Error::ZeroProfile(_))
        ));
    }
}
