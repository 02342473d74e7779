//! Ground states of the constrained minimisation problems by normalised
//! descent.
//!
//! Each inner step freezes the weights of the p-Laplacian at the current
//! iterate and solves the tridiagonal system `A_u z = B_u u`; the candidate
//! `u + τ(Λ z - u)` (with `Λ` the current multiplier) is projected back to
//! unit pairing and accepted when the quotient does not increase, halving
//! `τ` otherwise. For `p = 2` and a frozen potential this is inverse
//! iteration. Nonlocal variants recompute the potential between inner
//! phases; dilation-invariant variants are recentred by an index shift
//! between phases.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::Arc;

use crate::energy::{
    breakdown, pairing_integral, pairing_weight, residual_with, Discretization, Ends, PairingWeight,
    Problem, DEFAULT_TEST_BUMPS,
};
use crate::error::{Error, Result};
use crate::model::{decay_roots, ProblemParams, Variant, DEFAULT_ROOT_TOL};
use crate::radial::{read_profile_csv, RadialGrid, RadialProfile};
use crate::verify::{check_monotone, fit_decay_exponent, FitWindows};

/// Initial profile of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedKind {
    /// `r^{-γ₁}(1 + r)^{γ₁-γ₂}`
    TwoPowerBlend,
    /// `exp(-r²)`, floored at `1e-300`
    Gaussianlike,
    /// Profile CSV, resampled onto the solve grid.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    /// Initial step `τ` of each backtracking search, in `(0, 1]`.
    pub step0: f64,
    pub energy_tol: f64,
    pub residual_tol: f64,
    pub seed_profile: SeedKind,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_outer: 60,
            max_inner: 400,
            step0: 1.0,
            energy_tol: 1e-9,
            residual_tol: 1e-4,
            seed_profile: SeedKind::TwoPowerBlend,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer < 1 || self.max_inner < 1 {
            return Err(Error::InvalidParams("iteration caps must be at least 1".into()));
        }
        if !(self.energy_tol > 0.0 && self.residual_tol > 0.0) {
            return Err(Error::InvalidParams("tolerances must be positive".into()));
        }
        if !(self.step0 > 0.0 && self.step0 <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "step0 = {} must lie in (0, 1]",
                self.step0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Quotient after every accepted step (frozen potential for the
    /// nonlocal variants).
    pub quotient_history: Vec<f64>,
    /// Index into `quotient_history` where each inner phase starts.
    pub phase_starts: Vec<usize>,
    /// True quotient at the end of each outer sweep.
    pub outer_quotients: Vec<f64>,
    pub final_quotient: f64,
    pub el_residual: f64,
    /// Multiplier `Λ` at the returned (unit-pairing) profile.
    pub multiplier: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub fitted_gamma_near: f64,
    pub fitted_gamma_far: f64,
    pub monotone_flag: bool,
    pub clip_events: usize,
    pub converged: bool,
}

impl SolveReport {
    /// Quotient history is nonincreasing inside every phase.
    pub fn descent_holds(&self) -> bool {
        let mut bounds = self.phase_starts.clone();
        bounds.push(self.quotient_history.len());
        bounds.windows(2).all(|w| {
            self.quotient_history[w[0]..w[1]]
                .windows(2)
                .all(|q| q[1] <= q[0])
        })
    }
}

/// Seed profile on `grid`.
pub fn seed_profile(
    params: &ProblemParams,
    grid: &Arc<RadialGrid>,
    kind: &SeedKind,
) -> Result<RadialProfile> {
    match kind {
        SeedKind::TwoPowerBlend => {
            let (g1, g2) = decay_roots(params, DEFAULT_ROOT_TOL)?;
            RadialProfile::from_fn(grid.clone(), |r| r.powf(-g1) * (1.0 + r).powf(g1 - g2))
        }
        SeedKind::Gaussianlike => {
            RadialProfile::from_fn(grid.clone(), |r| (-r * r).exp().max(1e-300))
        }
        SeedKind::File(path) => {
            let file = read_profile_csv(BufReader::new(File::open(path)?))?;
            if file.dim != grid.dim() {
                return Err(Error::InvalidProfile(format!(
                    "seed file is for N = {}, solve grid has N = {}",
                    file.dim,
                    grid.dim()
                )));
            }
            let src = file.profile;
            RadialProfile::from_fn(grid.clone(), |r| src.interpolate(r).max(1e-300))
        }
    }
}

/// Symmetric tridiagonal solve (Thomas); `off[i]` couples `i` and `i+1`.
fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut pivot = diag[0];
    if !(pivot > 0.0) {
        return Err(Error::NotPositiveDefinite { row: 0, pivot });
    }
    c[0] = if m > 1 { off[0] / pivot } else { 0.0 };
    d[0] = rhs[0] / pivot;
    for i in 1..m {
        pivot = diag[i] - off[i - 1] * c[i - 1];
        if !(pivot > 0.0) {
            return Err(Error::NotPositiveDefinite { row: i, pivot });
        }
        if i < m - 1 {
            c[i] = off[i] / pivot;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / pivot;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

struct Stepper<'a> {
    disc: &'a Discretization,
    p: f64,
    mu: f64,
    gammas: (f64, f64),
    inv_rp: Vec<f64>,
}

impl Stepper<'_> {
    fn ends(&self) -> Ends {
        Ends::Exponents {
            gamma1: self.gammas.0,
            gamma2: self.gammas.1,
        }
    }

    fn numerator(&self, u: &[f64]) -> Result<f64> {
        let (g, h) = self.disc.gradient_and_hardy(u, self.p, self.ends())?;
        Ok(g - self.mu * h)
    }

    fn quotient(&self, u: &[f64], w: &PairingWeight) -> Result<(f64, f64)> {
        let q = self.numerator(u)?;
        let pairing = pairing_integral(self.disc, u, w)?;
        if !(pairing > 0.0) {
            return Err(Error::ZeroProfile("pairing vanished during descent"));
        }
        Ok((q.powf(1.0 / self.p) / pairing.powf(1.0 / w.degree), pairing))
    }

    /// Lagged operator `A_u` with `uᵀ A_u u = numerator(u)`.
    fn operator(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = u.len();
        let p = self.p;
        let du = self.disc.gradients(u);
        let eps = 1e-12 * du.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        let mut diag = vec![0.0; m];
        let mut off = vec![0.0; m - 1];
        for c in 0..m - 1 {
            let lag = if p == 2.0 {
                1.0
            } else {
                (du[c] * du[c] + eps * eps).powf(0.5 * (p - 2.0))
            };
            let a = lag * self.disc.cell_mass()[c] / (self.disc.dr()[c] * self.disc.dr()[c]);
            diag[c] += a;
            diag[c + 1] += a;
            off[c] = -a;
        }
        let lumped = self.disc.lumped();
        for i in 0..m {
            if u[i] > 0.0 {
                let lag = if p == 2.0 { 1.0 } else { u[i].powf(p - 2.0) };
                diag[i] -= self.mu * lumped[i] * self.inv_rp[i] * lag;
            }
        }
        // pieces are p-homogeneous in the end values; evaluate at 1
        let mut unit = vec![0.0; m];
        unit[0] = 1.0;
        unit[m - 1] = 1.0;
        let bp = self.disc.boundary_pieces(
            &unit,
            p,
            (Some(-self.gammas.0), Some(-self.gammas.1)),
        )?;
        let end_lag = |v: f64| if p == 2.0 { 1.0 } else { v.powf(p - 2.0) };
        if u[0] > 0.0 {
            diag[0] += (bp.grad_head - self.mu * bp.hardy_head) * end_lag(u[0]);
        }
        if u[m - 1] > 0.0 {
            diag[m - 1] += (bp.grad_tail - self.mu * bp.hardy_tail) * end_lag(u[m - 1]);
        }
        Ok((diag, off))
    }
}

fn project(u: &mut [f64], pairing: f64, degree: f64) {
    let s = pairing.powf(-1.0 / degree);
    u.iter_mut().for_each(|v| *v *= s);
}

/// Sets negative entries to half the smallest positive neighbour; returns
/// the number of clipped nodes.
fn clip(u: &mut [f64]) -> usize {
    let bad: Vec<usize> = (0..u.len()).filter(|&i| !(u[i] > 0.0)).collect();
    for &i in &bad {
        let left = if i > 0 { u[i - 1] } else { 0.0 };
        let right = if i + 1 < u.len() { u[i + 1] } else { 0.0 };
        let candidates = [left, right];
        let positive = candidates.iter().filter(|v| **v > 0.0).cloned();
        u[i] = 0.5 * positive.fold(f64::INFINITY, f64::min);
        if !u[i].is_finite() {
            u[i] = f64::MIN_POSITIVE;
        }
    }
    bad.len()
}

/// Shifts `u` by whole nodes so that `r^{(N-p)/p} u` peaks mid-grid.
/// Values pushed in from outside follow the `γ₁`/`γ₂` power laws.
fn recentre(u: &mut [f64], grid: &RadialGrid, a: f64, gammas: (f64, f64)) -> i64 {
    let m = u.len();
    let peak = (0..m)
        .max_by(|&i, &j| {
            let fi = grid.nodes()[i].powf(a) * u[i];
            let fj = grid.nodes()[j].powf(a) * u[j];
            fi.total_cmp(&fj)
        })
        .unwrap_or(m / 2);
    let k = peak as i64 - (m / 2) as i64;
    if k.unsigned_abs() as usize <= m / 20 {
        return 0;
    }
    let h = grid.log_step();
    let old = u.to_vec();
    for (i, v) in u.iter_mut().enumerate() {
        let j = i as i64 + k;
        *v = if j < 0 {
            old[0] * (-gammas.0 * j as f64 * h).exp()
        } else if j >= m as i64 {
            old[m - 1] * (-gammas.1 * (j - m as i64 + 1) as f64 * h).exp()
        } else {
            old[j as usize]
        };
    }
    k
}

/// Runs the descent; returns the last iterate even when the caps are hit
/// (`report.converged == false`).
pub fn solve(
    problem: &Problem,
    grid: &Arc<RadialGrid>,
    opts: &SolveOptions,
) -> Result<(RadialProfile, SolveReport)> {
    let params = &problem.params;
    params.validate()?;
    opts.validate()?;
    if grid.dim() != params.n {
        return Err(Error::InvalidGrid(format!(
            "grid dimension {} differs from N = {}",
            grid.dim(),
            params.n
        )));
    }
    let gammas = decay_roots(params, DEFAULT_ROOT_TOL)?;
    let disc = Discretization::new(grid.clone()).with_hardy_power(params.p);
    let stepper = Stepper {
        disc: &disc,
        p: params.p,
        mu: params.mu,
        gammas,
        inv_rp: disc.inv_rp(params.p),
    };
    let m = grid.len();
    let nonlocal = params.variant.is_nonlocal();
    let dilation_invariant = params.variant != Variant::GeneralV;
    let a = params.scaling_exponent();

    let seed = seed_profile(params, grid, &opts.seed_profile)?;
    let mut u = seed.into_values();
    if u.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidProfile("seed profile must be positive".into()));
    }

    let mut report = SolveReport {
        quotient_history: Vec::new(),
        phase_starts: Vec::new(),
        outer_quotients: Vec::new(),
        final_quotient: f64::NAN,
        el_residual: f64::NAN,
        multiplier: f64::NAN,
        outer_iters: 0,
        inner_iters: 0,
        fitted_gamma_near: f64::NAN,
        fitted_gamma_far: f64::NAN,
        monotone_flag: false,
        clip_events: 0,
        converged: false,
    };

    let weight_of = |u: &[f64]| -> Result<PairingWeight> {
        let prof = RadialProfile::new(grid.clone(), u.to_vec())?;
        pairing_weight(&prof, problem)
    };
    let mut true_w = weight_of(&u)?;
    let mut last_true: Option<f64> = None;

    for outer in 0..opts.max_outer {
        report.outer_iters = outer + 1;
        // frozen functional: ∫ W u^q with W fixed has degree q
        let frozen = PairingWeight {
            values: true_w.values.clone(),
            q: true_w.q,
            degree: if nonlocal { true_w.q } else { true_w.degree },
        };
        let (mut quot, pairing) = stepper.quotient(&u, &frozen)?;
        project(&mut u, pairing, frozen.degree);
        report.phase_starts.push(report.quotient_history.len());
        report.quotient_history.push(quot);

        for _ in 0..opts.max_inner {
            report.inner_iters += 1;
            let (diag, off) = stepper.operator(&u)?;
            let lumped = disc.lumped();
            let rhs: Vec<f64> = (0..m)
                .map(|i| lumped[i] * frozen.values[i] * u[i].powf(frozen.q - 1.0))
                .collect();
            let z = thomas(&diag, &off, &rhs)?;
            let num = stepper.numerator(&u)?;
            let bu: f64 = rhs.iter().zip(&u).map(|(b, v)| b * v).sum();
            let lambda = num / bu;
            let target: Vec<f64> = z.iter().map(|v| lambda * v).collect();
            let peak = u.iter().fold(0.0f64, |acc, v| acc.max(*v));
            let change = target
                .iter()
                .zip(&u)
                .fold(0.0f64, |acc, (t, v)| acc.max((t - v).abs()))
                / peak;
            if change < 1e-10 {
                break;
            }
            let mut tau = opts.step0;
            let mut accepted = None;
            for _ in 0..40 {
                let mut cand: Vec<f64> =
                    u.iter().zip(&target).map(|(v, t)| v + tau * (t - v)).collect();
                let clipped = clip(&mut cand);
                if clipped * 10 > m {
                    return Err(Error::PositivityLoss {
                        clipped,
                        total: m,
                    });
                }
                if clipped > 0 {
                    log::warn!("clipped {clipped} negative nodes");
                }
                if let Ok((q_new, p_new)) = stepper.quotient(&cand, &frozen) {
                    if q_new <= quot {
                        project(&mut cand, p_new, frozen.degree);
                        let (q_proj, _) = stepper.quotient(&cand, &frozen)?;
                        if q_proj <= quot {
                            report.clip_events += clipped;
                            accepted = Some((cand, q_proj));
                            break;
                        }
                    }
                }
                tau *= 0.5;
            }
            let Some((next, q_next)) = accepted else {
                break;
            };
            let rel = (quot - q_next) / quot;
            u = next;
            quot = q_next;
            report.quotient_history.push(quot);
            if rel < 1e-3 * opts.energy_tol && change < 1e-6 {
                break;
            }
        }

        if dilation_invariant {
            let shift = recentre(&mut u, grid, a, gammas);
            if shift != 0 {
                log::debug!("recentred by {shift} nodes");
            }
        }
        if nonlocal || dilation_invariant {
            true_w = weight_of(&u)?;
        }
        let b = breakdown(&disc, &u, &true_w, params.p, params.mu, stepper.ends())?;
        project(&mut u, b.pairing, b.degree);
        if nonlocal {
            true_w = weight_of(&u)?;
        }
        let b = breakdown(&disc, &u, &true_w, params.p, params.mu, stepper.ends())?;
        let residual = residual_with(
            &disc,
            &u,
            &true_w,
            params,
            stepper.ends(),
            DEFAULT_TEST_BUMPS,
        )?;
        report.outer_quotients.push(b.quotient);
        report.final_quotient = b.quotient;
        report.el_residual = residual;
        report.multiplier = b.multiplier;
        let stalled = match last_true {
            Some(prev) => ((prev - b.quotient) / b.quotient).abs() < opts.energy_tol,
            None => false,
        };
        log::info!(
            "outer {outer}: quotient {:.12e} residual {:.3e}",
            b.quotient,
            residual
        );
        last_true = Some(b.quotient);
        if stalled && residual < opts.residual_tol {
            report.converged = true;
            break;
        }
    }

    let profile = RadialProfile::new(grid.clone(), u)?;
    let windows = FitWindows::default_for(grid);
    report.fitted_gamma_near = fit_decay_exponent(&profile, windows.near.0, windows.near.1)
        .map(|f| f.gamma)
        .unwrap_or(f64::NAN);
    report.fitted_gamma_far = fit_decay_exponent(&profile, windows.far.0, windows.far.1)
        .map(|f| f.gamma)
        .unwrap_or(f64::NAN);
    report.monotone_flag = check_monotone(&profile).monotone;
    Ok((profile, report))
}

/// [`solve`], failing with [`Error::NonConvergence`] when the caps are hit.
pub fn solve_ground_state(
    problem: &Problem,
    grid: &Arc<RadialGrid>,
    opts: &SolveOptions,
) -> Result<(RadialProfile, SolveReport)> {
    let (u, report) = solve(problem, grid, opts)?;
    if !report.converged {
        return Err(Error::NonConvergence {
            what: "ground-state solve",
            iterations: report.inner_iters,
        });
    }
    Ok((u, report))
}
