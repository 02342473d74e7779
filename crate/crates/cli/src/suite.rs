//! The end-to-end battery: exponent reproduction, convolution checks,
//! solves and the verification of the solved profiles.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context, Result};
use extremal_core::convolution::{riesz_at_origin, riesz_convolve, KernelStore};
use extremal_core::energy::{hardy_ratio, inequality_suite, rayleigh, widening_cutoff, Problem};
use extremal_core::model::{decay_roots, hardy_best_constant, DEFAULT_ROOT_TOL};
use extremal_core::oracle::{riesz_monte_carlo_many, Support};
use extremal_core::radial::rescale;
use extremal_core::solver::{seed_profile, SeedKind, SolveReport};
use extremal_core::verify::{
    default_doubling_radii, doubling_check, fit_decay_exponent, CheckRow,
};
use extremal_core::{Error, ProblemParams, RadialGrid, RadialProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::commands::{ensure_dir, run_solve, verify_profile};
use crate::config::RunConfig;

pub const TITLES: [&str; 8] = [
    "exponent reproduction",
    "ordering invariant",
    "convolution oracle",
    "convolution decay laws",
    "Talenti end-to-end",
    "sharp asymptotics",
    "doubling estimates",
    "invariance suite",
];

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u32,
    pub rows: Vec<CheckRow>,
    pub elapsed: Duration,
    pub error: Option<String>,
}

impl CriterionResult {
    pub fn title(&self) -> &'static str {
        TITLES[(self.id - 1) as usize]
    }

    pub fn pass(&self) -> bool {
        self.error.is_none() && !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub criteria: Vec<CriterionResult>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.criteria.iter().all(CriterionResult::pass)
    }
}

fn row(check: impl Into<String>, target: f64, measured: f64, tolerance: f64, pass: bool) -> CheckRow {
    CheckRow {
        check: check.into(),
        target,
        measured,
        tolerance,
        pass,
    }
}

fn close(check: impl Into<String>, target: f64, measured: f64, tolerance: f64) -> CheckRow {
    let pass = (measured - target).abs() <= tolerance;
    row(check, target, measured, tolerance, pass)
}

fn at_most(check: impl Into<String>, limit: f64, measured: f64) -> CheckRow {
    row(check, limit, measured, 0.0, measured <= limit)
}

fn runtime_row(check: &str, limit_s: f64, elapsed: Duration) -> CheckRow {
    at_most(format!("runtime_s_{check}"), limit_s, elapsed.as_secs_f64())
}

/// A solved instance shared by criteria 5 to 8.
pub struct Solved {
    pub name: &'static str,
    pub problem: Problem,
    pub profile: RadialProfile,
    pub report: SolveReport,
    pub elapsed: Duration,
}

struct Instances {
    cfg: RunConfig,
    kernels: Arc<KernelStore>,
    grid: Arc<RadialGrid>,
    talenti: OnceLock<std::result::Result<Arc<Solved>, String>>,
    hartree0: OnceLock<std::result::Result<Arc<Solved>, String>>,
    hartree1: OnceLock<std::result::Result<Arc<Solved>, String>>,
}

impl Instances {
    fn solve(&self, name: &'static str, params: ProblemParams) -> Result<Arc<Solved>> {
        let mut cfg = self.cfg.clone();
        cfg.params = params;
        cfg.potential = None;
        let t = Instant::now();
        let out = run_solve(&cfg, self.kernels.clone(), &cfg.out_dir.join(format!("solve_{name}")))?;
        let elapsed = t.elapsed();
        log::info!("solved {name} in {elapsed:?}");
        Ok(Arc::new(Solved {
            name,
            problem: Problem::new(params, self.kernels.clone()),
            profile: out.profile,
            report: out.report,
            elapsed,
        }))
    }

    fn get(
        &self,
        cell: &OnceLock<std::result::Result<Arc<Solved>, String>>,
        name: &'static str,
        params: impl FnOnce() -> extremal_core::Result<ProblemParams>,
    ) -> Result<Arc<Solved>> {
        cell.get_or_init(|| {
            params()
                .map_err(anyhow::Error::from)
                .and_then(|p| self.solve(name, p))
                .map_err(|e| format!("{e:#}"))
        })
        .clone()
        .map_err(|e| anyhow!("solve {name}: {e}"))
    }

    fn talenti(&self) -> Result<Arc<Solved>> {
        self.get(&self.talenti, "talenti", || ProblemParams::hardy_sobolev(5, 2.0, 0.0, 0.0))
    }

    fn hartree(&self, mu: u8) -> Result<Arc<Solved>> {
        match mu {
            0 => self.get(&self.hartree0, "hartree_mu0", || ProblemParams::hartree(5, 2.0, 0.0)),
            _ => self.get(&self.hartree1, "hartree_mu1", || ProblemParams::hartree(5, 2.0, 1.0)),
        }
    }
}

fn quadratic_roots(n: f64, mu: f64) -> (f64, f64) {
    let b = n - 2.0;
    let d = (b * b - 4.0 * mu).sqrt();
    ((b - d) / 2.0, (b + d) / 2.0)
}

fn criterion1(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let t = Instant::now();
    let off = cfg.verify.target_offset;
    let mut rows = Vec::new();
    for mu in [0.0, 0.5, 1.0, 2.0, 2.2] {
        let (g1, g2) = decay_roots(&ProblemParams::hardy_sobolev(5, 2.0, mu, 0.0)?, DEFAULT_ROOT_TOL)?;
        let (e1, e2) = quadratic_roots(5.0, mu);
        rows.push(close(format!("gamma1_mu{mu}"), e1 + off, g1, 1e-10));
        rows.push(close(format!("gamma2_mu{mu}"), e2 + off, g2, 1e-10));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.verify.seed ^ 0xC1);
    let mut exact = 0;
    for _ in 0..50 {
        let n: usize = rng.random_range(2..=12);
        let p = 1.0 + rng.random::<f64>() * (n as f64 - 1.0);
        let params = ProblemParams::hardy_sobolev(n, p.max(1.0 + 1e-6), 0.0, 0.0)?;
        let (g1, g2) = decay_roots(&params, DEFAULT_ROOT_TOL)?;
        let top = (params.dim() - params.p) / (params.p - 1.0);
        if g1 == 0.0 + off && g2 == top + off {
            exact += 1;
        }
    }
    rows.push(close("mu0_random_exact_roots", 50.0, exact as f64, 0.0));
    rows.push(runtime_row("c1", 1.0, t.elapsed()));
    Ok(rows)
}

fn criterion2(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.verify.seed ^ 0xC2);
    let (mut order_bad, mut equality_bad, mut zeros) = (0usize, 0usize, 0usize);
    for k in 0..1000 {
        let n: usize = rng.random_range(2..=12);
        let p = (1.0 + rng.random::<f64>() * (n as f64 - 1.0)).max(1.0 + 1e-6);
        let mu_bar = ((n as f64 - p) / p).powf(p);
        // every tenth instance sits exactly at μ = 0
        let mu = if k % 10 == 0 { 0.0 } else { rng.random::<f64>() * mu_bar };
        let params = ProblemParams::hardy_sobolev(n, p, mu, 0.0)?;
        let (g1, g2) = decay_roots(&params, DEFAULT_ROOT_TOL)?;
        let mid = (n as f64 - p) / p;
        let top = (n as f64 - p) / (p - 1.0);
        if !(0.0 <= g1 && g1 < mid && mid < g2 && g2 <= top) {
            order_bad += 1;
        }
        if (g2 == top) != (mu == 0.0) {
            equality_bad += 1;
        }
        zeros += usize::from(mu == 0.0);
    }
    Ok(vec![
        close("ordering_violations", 0.0, order_bad as f64, 0.0),
        close("equality_iff_mu0_violations", 0.0, equality_bad as f64, 0.0),
        row("mu0_instances", 100.0, zeros as f64, 0.0, zeros > 0),
        runtime_row("c2", 1.0, t.elapsed()),
    ])
}

type TestFn = (&'static str, fn(f64) -> f64, f64);

/// Compactly supported radial densities and their support radii.
pub const CONVOLUTION_TEST_FUNCTIONS: [TestFn; 5] = [
    ("poly2", |t| (1.0 - t * t).max(0.0).powi(2), 1.0),
    ("poly3", |t| (1.0 - t).max(0.0).powi(3), 1.0),
    ("bump", |t| if t < 1.0 { (-1.0 / (1.0 - t * t)).exp() } else { 0.0 }, 1.0),
    ("shell", |t| (1.0 - (2.0 * t - 3.0).powi(2)).max(0.0).powi(2), 2.0),
    ("wide", |t| (1.0 - t / 3.0).max(0.0).powi(4) * (1.0 + t), 3.0),
];

pub const ORACLE_RADII: [f64; 8] = [0.01, 0.1, 0.4, 0.9, 1.2, 2.0, 4.0, 10.0];

fn criterion3(cfg: &RunConfig, inst: &Instances) -> Result<Vec<CheckRow>> {
    let t = Instant::now();
    let grid = &inst.grid;
    let n = grid.dim();
    let p = 2.0;
    let mut rows = Vec::new();
    for nu in [1.0, p, 2.0 * p] {
        let kernel = inst.kernels.get(grid, nu)?;
        for (name, f, radius) in CONVOLUTION_TEST_FUNCTIONS {
            let density = RadialProfile::from_fn(grid.clone(), f)?;
            let v = riesz_convolve(&density, &kernel)?;
            let mc = riesz_monte_carlo_many(
                &f,
                Support::Compact { radius },
                n,
                nu,
                &ORACLE_RADII,
                cfg.verify.mc_samples,
                cfg.verify.seed,
            )?;
            let worst = ORACLE_RADII
                .iter()
                .zip(&mc)
                .map(|(&r, e)| ((v.interpolate(r) - e.value) / e.value).abs())
                .fold(0.0, f64::max);
            rows.push(row(format!("nu{nu}_{name}"), 0.0, worst, 0.01, worst <= 0.01));
        }
    }
    rows.push(runtime_row("c3", 120.0, t.elapsed()));
    Ok(rows)
}

/// `(ν, β₂)` tail cases and `(ν, β₁)` near-origin cases. Near-origin
/// exponents `N-ν-β₁` stay below 1 so the singular part of `V(0) - V(r)`
/// dominates the smooth `r²` part on the fit window.
pub const TAIL_CASES: [(f64, f64); 6] =
    [(1.0, 4.25), (2.0, 4.0), (2.0, 3.5), (3.0, 3.0), (4.0, 3.0), (4.0, 2.0)];
pub const NEAR_CASES: [(f64, f64); 5] = [(1.0, 3.5), (2.0, 2.5), (2.0, 2.2), (3.0, 1.5), (4.0, 0.5)];
pub const DIVERGENT_CASES: [(f64, f64); 3] = [(2.0, 3.0), (2.0, 2.5), (1.0, 4.0)];
pub const TAIL_WINDOW: (f64, f64) = (1e2, 1e3);
pub const NEAR_WINDOW: (f64, f64) = (2e-4, 2e-3);

fn criterion4(inst: &Instances) -> Result<Vec<CheckRow>> {
    let t = Instant::now();
    let grid = &inst.grid;
    let n = grid.dim() as f64;
    let mut rows = Vec::new();
    for (nu, b2) in TAIL_CASES {
        let kernel = inst.kernels.get(grid, nu)?;
        let g = RadialProfile::from_fn(grid.clone(), |r| (1.0 + r).powf(-b2))?;
        let v = riesz_convolve(&g, &kernel)?;
        let fit = fit_decay_exponent(&v, TAIL_WINDOW.0, TAIL_WINDOW.1)?;
        rows.push(close(format!("tail_nu{nu}_beta2_{b2}"), n - nu - b2, -fit.gamma, 0.05));
    }
    for (nu, b1) in NEAR_CASES {
        let kernel = inst.kernels.get(grid, nu)?;
        let g = RadialProfile::from_fn(grid.clone(), |r| r.powf(-b1) * (-r * r).exp())?;
        let v = riesz_convolve(&g, &kernel)?;
        // V(0) is finite here; the law shows in V(0) - V(r)
        let v0 = riesz_at_origin(&g, nu)?;
        let dip = RadialProfile::new(grid.clone(), v.values().iter().map(|x| (v0 - x).abs()).collect())?;
        let fit = fit_decay_exponent(&dip, NEAR_WINDOW.0, NEAR_WINDOW.1)?;
        rows.push(close(format!("near_nu{nu}_beta1_{b1}"), n - nu - b1, -fit.gamma, 0.05));
    }
    for (nu, b0) in DIVERGENT_CASES {
        let kernel = inst.kernels.get(grid, nu)?;
        let g = RadialProfile::from_fn(grid.clone(), |r| (1.0 + r).powf(-b0))?;
        let fired = matches!(riesz_convolve(&g, &kernel), Err(Error::Divergence { .. }));
        rows.push(row(
            format!("divergence_nu{nu}_beta0_{b0}"),
            1.0,
            f64::from(u8::from(fired)),
            0.0,
            fired,
        ));
    }
    rows.push(runtime_row("c4", 60.0, t.elapsed()));
    Ok(rows)
}

/// Least-squares fit of `c (1 + (λr)²)^{-3/2}` in log space on `window`;
/// returns `(c, λ, max relative deviation)`.
pub fn talenti_fit(u: &RadialProfile, window: (f64, f64)) -> Result<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = u
        .grid()
        .nodes()
        .iter()
        .zip(u.values())
        .filter(|(r, _)| **r >= window.0 && **r <= window.1)
        .map(|(r, v)| (*r, *v))
        .collect();
    if pts.len() < 3 || pts.iter().any(|(_, v)| !(*v > 0.0)) {
        return Err(anyhow!("profile not positive on the fit window"));
    }
    let shape = |r: f64, lam: f64| (1.0 + (lam * r).powi(2)).powf(-1.5);
    let offset = |lam: f64| {
        pts.iter().map(|(r, v)| v.ln() - shape(*r, lam).ln()).sum::<f64>() / pts.len() as f64
    };
    let cost = |ll: f64| {
        let lam = ll.exp();
        let c = offset(lam);
        pts.iter()
            .map(|(r, v)| (v.ln() - c - shape(*r, lam).ln()).powi(2))
            .sum::<f64>()
    };
    // golden section on ln λ
    let (mut a, mut b) = (-12.0f64, 12.0f64);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - phi * (b - a), a + phi * (b - a));
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    while b - a > 1e-12 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = cost(x2);
        }
    }
    let lam = (0.5 * (a + b)).exp();
    let c = offset(lam).exp();
    let dev = pts
        .iter()
        .map(|(r, v)| (v / (c * shape(*r, lam)) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok((c, lam, dev))
}

fn criterion5(inst: &Instances) -> Result<Vec<CheckRow>> {
    let s = inst.talenti()?;
    let rep = &s.report;
    let (_, _, dev) = talenti_fit(&s.profile, (1e-2, 1e2))?;
    Ok(vec![
        row("converged", 1.0, f64::from(u8::from(rep.converged)), 0.0, rep.converged),
        row(
            "quotient_history_monotone",
            1.0,
            f64::from(u8::from(rep.descent_holds())),
            0.0,
            rep.descent_holds(),
        ),
        at_most("el_residual", 1e-3, rep.el_residual),
        at_most("closed_form_max_rel_dev", 1e-2, dev),
        runtime_row("c5_solve", 180.0, s.elapsed),
    ])
}

const ASYMPTOTIC_CHECKS: [&str; 4] = ["gamma_near", "gamma_far", "grad_near", "grad_far"];

fn criterion6(cfg: &RunConfig, inst: &Instances) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for mu in [0u8, 1] {
        let s = inst.hartree(mu)?;
        let mut local = cfg.clone();
        local.params = s.problem.params;
        let battery = verify_profile(&local, &s.profile, inst.kernels.clone())?;
        for r in battery {
            let keep = ASYMPTOTIC_CHECKS.contains(&r.check.as_str())
                || r.check.starts_with("moving_plane");
            if keep {
                rows.push(CheckRow {
                    check: format!("mu{mu}_{}", r.check),
                    ..r
                });
            }
        }
        let flag = s.report.monotone_flag;
        rows.push(row(format!("mu{mu}_monotone_flag"), 1.0, f64::from(u8::from(flag)), 0.0, flag));
        rows.push(runtime_row(&format!("c6_mu{mu}_solve"), 300.0, s.elapsed));
    }
    Ok(rows)
}

fn criterion7(cfg: &RunConfig, inst: &Instances) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for s in [inst.talenti()?, inst.hartree(0)?, inst.hartree(1)?] {
        let t = Instant::now();
        let u = &s.profile;
        let radii = default_doubling_radii(u.grid());
        let d = doubling_check(
            u,
            &s.problem.params,
            &radii,
            cfg.verify.spread_limit,
            cfg.verify.tau_margin,
        )?;
        for series in &d.series {
            rows.push(row(
                format!("{}_spread_pbar{:.3}_R{:.0e}", s.name, series.p_bar, series.radii[0]),
                1.0,
                series.spread,
                d.spread_limit,
                series.spread.is_finite() && series.spread <= d.spread_limit,
            ));
        }
        rows.push(row(format!("{}_tau1_small_R", s.name), d.margin, d.tau1, 0.0, d.tau_pass && d.tau1 >= d.margin));
        rows.push(row(format!("{}_tau2_large_R", s.name), -d.margin, d.tau2, 0.0, d.tau2 <= -d.margin));
        rows.push(runtime_row(&format!("c7_{}", s.name), 30.0, t.elapsed()));
    }
    Ok(rows)
}

pub const HOMOGENEITY_FACTORS: [f64; 4] = [1e-3, 0.5, 7.0, 1e3];
/// Off-grid dilations, so the rescaled profile is resampled.
pub const DILATIONS: [f64; 2] = [0.37, 2.9];
pub const CUTOFF_LEVELS: [f64; 3] = [1e1, 1e2, 1e3];

fn criterion8(inst: &Instances) -> Result<Vec<CheckRow>> {
    let t = Instant::now();
    let mut rows = Vec::new();
    let solved = [inst.talenti()?, inst.hartree(0)?, inst.hartree(1)?];
    for s in &solved {
        let q = rayleigh(&s.profile, &s.problem)?.quotient;
        let homog = HOMOGENEITY_FACTORS
            .iter()
            .map(|c| Ok(((rayleigh(&s.profile.scaled(*c), &s.problem)?.quotient - q) / q).abs()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        rows.push(at_most(format!("{}_homogeneity", s.name), 1e-10, homog));
        let a = s.problem.params.scaling_exponent();
        let dil = DILATIONS
            .iter()
            .map(|l| Ok(((rayleigh(&rescale(&s.profile, *l, a), &s.problem)?.quotient - q) / q).abs()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        rows.push(at_most(format!("{}_dilation", s.name), 1e-6, dil));
    }

    let hartree = &solved[2];
    let params = hartree.problem.params;
    let grid = hartree.profile.grid();
    let mut trials: Vec<(String, RadialProfile)> = solved
        .iter()
        .map(|s| (s.name.to_string(), s.profile.clone()))
        .collect();
    trials.push(("blend_mu1".into(), seed_profile(&params, grid, &SeedKind::TwoPowerBlend)?));
    trials.push(("rational".into(), RadialProfile::from_fn(grid.clone(), |r| (1.0 + r * r).powi(-2))?));
    for l in CUTOFF_LEVELS {
        trials.push((format!("cutoff_L{l:.0e}"), widening_cutoff(grid, params.p, l)?));
    }
    for r in inequality_suite(&trials, &hartree.problem)? {
        rows.push(row(format!("{}_{}", r.trial, r.inequality), r.bound, r.ratio, 0.0, r.pass));
    }

    let bound = 1.0 / hardy_best_constant(&params)?;
    let ratios = CUTOFF_LEVELS
        .iter()
        .map(|l| Ok(hardy_ratio(&widening_cutoff(grid, params.p, *l)?, params.p)?))
        .collect::<Result<Vec<f64>>>()?;
    let min_step = ratios.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    rows.push(row("cutoff_ratio_increasing", 0.0, min_step, 0.0, min_step > 0.0));
    let gap_first = bound - ratios[0];
    let gap_last = bound - ratios[ratios.len() - 1];
    rows.push(row(
        "cutoff_gap_shrinks",
        gap_first,
        gap_last,
        0.0,
        gap_last > 0.0 && gap_last < gap_first,
    ));
    rows.push(runtime_row("c8", 60.0, t.elapsed()));
    Ok(rows)
}

fn run_one(id: u32, cfg: &RunConfig, inst: &Instances) -> CriterionResult {
    let t = Instant::now();
    let out = match id {
        1 => criterion1(cfg),
        2 => criterion2(cfg),
        3 => criterion3(cfg, inst),
        4 => criterion4(inst),
        5 => criterion5(inst),
        6 => criterion6(cfg, inst),
        7 => criterion7(cfg, inst),
        8 => criterion8(inst),
        _ => Err(anyhow!("no criterion {id}")),
    };
    let (rows, error) = match out {
        Ok(rows) => (rows, None),
        Err(e) => (Vec::new(), Some(format!("{e:#}"))),
    };
    CriterionResult {
        id,
        rows,
        elapsed: t.elapsed(),
        error,
    }
}

/// Runs the configured criteria on a pool of `jobs` threads and writes
/// `suite.csv` into the output directory.
pub fn run_suite(cfg: &RunConfig, kernels: Arc<KernelStore>, jobs: usize) -> Result<SuiteReport> {
    let t = Instant::now();
    ensure_dir(&cfg.out_dir)?;
    let mut ids = cfg.verify.criteria.clone();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        log::warn!("suite has no criteria to run");
    }
    let inst = Instances {
        cfg: cfg.clone(),
        kernels,
        grid: Arc::new(cfg.grid.build(5)?),
        talenti: OnceLock::new(),
        hartree0: OnceLock::new(),
        hartree1: OnceLock::new(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("worker pool")?;
    let criteria: Vec<CriterionResult> =
        pool.install(|| ids.par_iter().map(|&id| run_one(id, cfg, &inst)).collect());
    let report = SuiteReport {
        criteria,
        elapsed: t.elapsed(),
    };
    write_suite_csv(&cfg.out_dir.join("suite.csv"), &report)?;
    Ok(report)
}

pub fn write_suite_csv(path: &Path, report: &SuiteReport) -> Result<()> {
    let mut out = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    writeln!(out, "criterion,check,target,measured,tolerance,pass")?;
    for c in &report.criteria {
        if let Some(e) = &c.error {
            writeln!(out, "{},error: {},nan,nan,nan,false", c.id, e.replace(',', ";"))?;
        }
        for r in &c.rows {
            writeln!(
                out,
                "{},{},{:.10e},{:.10e},{:.3e},{}",
                c.id, r.check, r.target, r.measured, r.tolerance, r.pass
            )?;
        }
    }
    Ok(())
}

/// One line per criterion.
pub fn summary_lines(report: &SuiteReport) -> Vec<String> {
    report
        .criteria
        .iter()
        .map(|c| {
            let failed: Vec<&str> = c.rows.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
            let detail = match (&c.error, failed.is_empty()) {
                (Some(e), _) => format!(" error: {e}"),
                (None, false) => format!(" failed: {}", failed.join(" ")),
                (None, true) => String::new(),
            };
            format!(
                "criterion {} {}: {} ({:.1} s){}",
                c.id,
                c.title(),
                if c.pass() { "PASS" } else { "FAIL" },
                c.elapsed.as_secs_f64(),
                detail
            )
        })
        .collect()
}
