//! Run configuration: flat `key = value` text split into sections.
//!
//! ```text
//! # comment
//! [params]
//! variant = hartree        # hartree | hardy-sobolev | weighted-hartree | general-v
//! n = 5
//! p = 2
//! mu = 1
//! s = 0
//! sigma = 4
//! potential = v.csv        # general-v only
//! [grid]
//! r_min = 0.0001
//! r_max = 10000
//! nodes = 2048
//! angular_nodes = 256
//! [solver]
//! max_outer = 60
//! max_inner = 400
//! step0 = 1
//! energy_tol = 1e-9
//! residual_tol = 0.0001
//! seed_profile = blend     # blend | gaussian | file:<path>
//! [verify]
//! exponent_tol = 0.1
//! spread_limit = 10
//! tau_margin = 0.02
//! rays = 64
//! points_per_ray = 128
//! deficit_tol = 1e-8
//! seed = 0
//! mc_samples = 1000000
//! mu_sweep = 0, 0.5, 1     # optional list for `exponents`
//! mu_steps = 0             # > 0: k·μ̄/steps for k < steps
//! criteria = 1, 2, 3, 4, 5, 6, 7, 8
//! target_offset = 0        # added to every exponent target
//! [output]
//! dir = out
//! kernel_cache = cache     # optional
//! ```
//!
//! Every key is optional; missing keys take the defaults above
//! (`variant = hartree`, `n = 5`, `p = 2`, `mu = 0`).

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use extremal_core::solver::{SeedKind, SolveOptions};
use extremal_core::verify::VerifyOptions;
use extremal_core::{ProblemParams, RadialGrid, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub nodes: usize,
    pub angular_nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            r_min: 1e-4,
            r_max: 1e4,
            nodes: 2048,
            angular_nodes: 256,
        }
    }
}

impl GridSpec {
    pub fn build(&self, dim: usize) -> Result<RadialGrid> {
        Ok(RadialGrid::geometric(dim, self.r_min, self.r_max, self.nodes)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    pub exponent_tol: f64,
    pub spread_limit: f64,
    pub tau_margin: f64,
    pub rays: usize,
    pub points_per_ray: usize,
    pub deficit_tol: f64,
    pub seed: u64,
    pub mc_samples: usize,
    pub mu_sweep: Vec<f64>,
    pub mu_steps: usize,
    pub criteria: Vec<u32>,
    pub target_offset: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        let v = VerifyOptions::default();
        VerifySettings {
            exponent_tol: v.exponent_tol,
            spread_limit: v.spread_limit,
            tau_margin: v.tau_margin,
            rays: v.rays,
            points_per_ray: v.points_per_ray,
            deficit_tol: v.deficit_tol,
            seed: v.seed,
            mc_samples: extremal_core::oracle::DEFAULT_SAMPLES,
            mu_sweep: Vec::new(),
            mu_steps: 0,
            criteria: (1..=8).collect(),
            target_offset: 0.0,
        }
    }
}

impl VerifySettings {
    pub fn options(&self) -> VerifyOptions {
        VerifyOptions {
            exponent_tol: self.exponent_tol,
            spread_limit: self.spread_limit,
            tau_margin: self.tau_margin,
            rays: self.rays,
            points_per_ray: self.points_per_ray,
            deficit_tol: self.deficit_tol,
            seed: self.seed,
            ..VerifyOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ProblemParams,
    pub potential: Option<PathBuf>,
    pub grid: GridSpec,
    pub solver: SolveOptions,
    pub verify: VerifySettings,
    pub out_dir: PathBuf,
    pub kernel_cache: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ProblemParams::hartree(5, 2.0, 0.0).expect("default instance is valid"),
            potential: None,
            grid: GridSpec::default(),
            solver: SolveOptions::default(),
            verify: VerifySettings::default(),
            out_dir: PathBuf::from("out"),
            kernel_cache: None,
        }
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, T::Err> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

fn seed_to_string(kind: &SeedKind) -> String {
    match kind {
        SeedKind::TwoPowerBlend => "blend".into(),
        SeedKind::Gaussianlike => "gaussian".into(),
        SeedKind::File(p) => format!("file:{}", p.display()),
    }
}

fn parse_seed(value: &str) -> Result<SeedKind> {
    match value {
        "blend" => Ok(SeedKind::TwoPowerBlend),
        "gaussian" => Ok(SeedKind::Gaussianlike),
        v => match v.strip_prefix("file:") {
            Some(path) if !path.is_empty() => Ok(SeedKind::File(PathBuf::from(path))),
            _ => bail!("unknown seed_profile '{v}' (blend | gaussian | file:<path>)"),
        },
    }
}

impl RunConfig {
    /// Parses and validates; errors carry the 1-based line number.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        // params are collected raw and validated once at the end
        let mut variant = cfg.params.variant;
        let (mut n, mut p, mut mu) = (cfg.params.n, cfg.params.p, cfg.params.mu);
        let mut s: Option<f64> = None;
        let mut sigma: Option<f64> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {line_no}: unterminated section header"))?;
                if !["params", "grid", "solver", "verify", "output"].contains(&name) {
                    bail!("line {line_no}: unknown section [{name}]");
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {line_no}: expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            let ctx = || format!("line {line_no}: bad value for {section}.{key}");
            macro_rules! num {
                () => {
                    value.parse().with_context(ctx)?
                };
            }
            match (section.as_str(), key) {
                ("params", "variant") => variant = value.parse().with_context(ctx)?,
                ("params", "n") => n = num!(),
                ("params", "p") => p = num!(),
                ("params", "mu") => mu = num!(),
                ("params", "s") => s = Some(num!()),
                ("params", "sigma") => sigma = Some(num!()),
                ("params", "potential") => cfg.potential = Some(PathBuf::from(value)),
                ("grid", "r_min") => cfg.grid.r_min = num!(),
                ("grid", "r_max") => cfg.grid.r_max = num!(),
                ("grid", "nodes") => cfg.grid.nodes = num!(),
                ("grid", "angular_nodes") => cfg.grid.angular_nodes = num!(),
                ("solver", "max_outer") => cfg.solver.max_outer = num!(),
                ("solver", "max_inner") => cfg.solver.max_inner = num!(),
                ("solver", "step0") => cfg.solver.step0 = num!(),
                ("solver", "energy_tol") => cfg.solver.energy_tol = num!(),
                ("solver", "residual_tol") => cfg.solver.residual_tol = num!(),
                ("solver", "seed_profile") => {
                    cfg.solver.seed_profile = parse_seed(value).with_context(ctx)?
                }
                ("verify", "exponent_tol") => cfg.verify.exponent_tol = num!(),
                ("verify", "spread_limit") => cfg.verify.spread_limit = num!(),
                ("verify", "tau_margin") => cfg.verify.tau_margin = num!(),
                ("verify", "rays") => cfg.verify.rays = num!(),
                ("verify", "points_per_ray") => cfg.verify.points_per_ray = num!(),
                ("verify", "deficit_tol") => cfg.verify.deficit_tol = num!(),
                ("verify", "seed") => cfg.verify.seed = num!(),
                ("verify", "mc_samples") => cfg.verify.mc_samples = num!(),
                ("verify", "mu_sweep") => {
                    cfg.verify.mu_sweep = parse_list(value).with_context(ctx)?
                }
                ("verify", "mu_steps") => cfg.verify.mu_steps = num!(),
                ("verify", "criteria") => {
                    cfg.verify.criteria = parse_list(value).with_context(ctx)?
                }
                ("verify", "target_offset") => cfg.verify.target_offset = num!(),
                ("output", "dir") => cfg.out_dir = PathBuf::from(value),
                ("output", "kernel_cache") => cfg.kernel_cache = Some(PathBuf::from(value)),
                ("", _) => bail!("line {line_no}: key '{key}' outside any section"),
                _ => bail!("line {line_no}: unknown key {section}.{key}"),
            }
        }

        cfg.params = ProblemParams {
            n,
            p,
            mu,
            s: s.unwrap_or(0.0),
            sigma: sigma.unwrap_or(match variant {
                Variant::Hartree => 2.0 * p,
                _ => 0.0,
            }),
            variant,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.solver.validate()?;
        self.grid.build(self.params.n)?;
        if self.grid.angular_nodes < 32 {
            bail!("grid.angular_nodes = {} must be at least 32", self.grid.angular_nodes);
        }
        if !(self.verify.exponent_tol > 0.0 && self.verify.deficit_tol > 0.0) {
            bail!("verify tolerances must be positive");
        }
        if self.verify.mc_samples < 2 {
            bail!("verify.mc_samples must be at least 2");
        }
        if let Some(c) = self.verify.criteria.iter().find(|c| !(1..=8).contains(*c)) {
            bail!("verify.criteria: no criterion {c} (valid: 1-8)");
        }
        if self.params.variant == Variant::GeneralV && self.potential.is_none() {
            bail!("params.potential is required for the general-v variant");
        }
        Ok(())
    }

    /// Canonical text; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut t = String::new();
        let pr = &self.params;
        let _ = writeln!(t, "[params]");
        let _ = writeln!(t, "variant = {}", pr.variant);
        let _ = writeln!(t, "n = {}", pr.n);
        let _ = writeln!(t, "p = {}", pr.p);
        let _ = writeln!(t, "mu = {}", pr.mu);
        let _ = writeln!(t, "s = {}", pr.s);
        let _ = writeln!(t, "sigma = {}", pr.sigma);
        if let Some(v) = &self.potential {
            let _ = writeln!(t, "potential = {}", v.display());
        }
        let g = &self.grid;
        let _ = writeln!(t, "\n[grid]");
        let _ = writeln!(t, "r_min = {}", g.r_min);
        let _ = writeln!(t, "r_max = {}", g.r_max);
        let _ = writeln!(t, "nodes = {}", g.nodes);
        let _ = writeln!(t, "angular_nodes = {}", g.angular_nodes);
        let s = &self.solver;
        let _ = writeln!(t, "\n[solver]");
        let _ = writeln!(t, "max_outer = {}", s.max_outer);
        let _ = writeln!(t, "max_inner = {}", s.max_inner);
        let _ = writeln!(t, "step0 = {}", s.step0);
        let _ = writeln!(t, "energy_tol = {}", s.energy_tol);
        let _ = writeln!(t, "residual_tol = {}", s.residual_tol);
        let _ = writeln!(t, "seed_profile = {}", seed_to_string(&s.seed_profile));
        let v = &self.verify;
        let _ = writeln!(t, "\n[verify]");
        let _ = writeln!(t, "exponent_tol = {}", v.exponent_tol);
        let _ = writeln!(t, "spread_limit = {}", v.spread_limit);
        let _ = writeln!(t, "tau_margin = {}", v.tau_margin);
        let _ = writeln!(t, "rays = {}", v.rays);
        let _ = writeln!(t, "points_per_ray = {}", v.points_per_ray);
        let _ = writeln!(t, "deficit_tol = {}", v.deficit_tol);
        let _ = writeln!(t, "seed = {}", v.seed);
        let _ = writeln!(t, "mc_samples = {}", v.mc_samples);
        let _ = writeln!(t, "mu_sweep = {}", join(&v.mu_sweep));
        let _ = writeln!(t, "mu_steps = {}", v.mu_steps);
        let _ = writeln!(t, "criteria = {}", join(&v.criteria));
        let _ = writeln!(t, "target_offset = {}", v.target_offset);
        let _ = writeln!(t, "\n[output]");
        let _ = writeln!(t, "dir = {}", self.out_dir.display());
        if let Some(c) = &self.kernel_cache {
            let _ = writeln!(t, "kernel_cache = {}", c.display());
        }
        t
    }
}


#[cfg(test)]
mod props {
    use super::RunConfig;
    use extremal_core::{ProblemParams, Variant};
    use proptest::prelude::*;

    fn params() -> impl Strategy<Value = ProblemParams> {
        (3usize..9, 0.0f64..1.0, 0.0f64..0.99, 0.0f64..1.0, 0.0f64..1.0, 0u8..4).prop_filter_map(
            "valid instance",
            |(n, pf, muf, sf, sigf, v)| {
                let nf = n as f64;
                let p = 1.05 + pf * (nf / 2.0 - 1.1);
                let mu = muf * ((nf - p) / p).powf(p);
                let s = sf * p * 0.9;
                match v {
                    0 => ProblemParams::hartree(n, p, mu).ok(),
                    1 => ProblemParams::hardy_sobolev(n, p, mu, s).ok(),
                    2 => {
                        let sigma = s + 1e-3 + sigf * (2.0 * p - 2.0 * s - 1e-3).min(nf - s - 1e-3);
                        ProblemParams::weighted_hartree(n, p, mu, s, sigma).ok()
                    }
                    _ => None,
                }
            },
        )
    }

    proptest! {
        #[test]
        fn parse_serialize_parse_is_identity(
            params in params(),
            nodes in 64usize..5000,
            r_min in 1e-8f64..1e-2,
            tol in 1e-12f64..1e-3,
            seed in any::<u64>(),
            criteria in proptest::collection::vec(1u32..=8, 0..8),
            sweep in proptest::collection::vec(0.0f64..1.0, 0..5),
        ) {
            let mut cfg = RunConfig { params, ..RunConfig::default() };
            cfg.grid.nodes = nodes;
            cfg.grid.r_min = r_min;
            cfg.solver.energy_tol = tol;
            cfg.verify.seed = seed;
            cfg.verify.criteria = criteria;
            cfg.verify.mu_sweep = sweep;
            cfg.validate().unwrap();
            let once = RunConfig::parse(&cfg.to_text()).unwrap();
            prop_assert_eq!(&once, &cfg);
            let twice = RunConfig::parse(&once.to_text()).unwrap();
            prop_assert_eq!(twice, once);
        }

        #[test]
        fn unknown_keys_are_rejected(key in "[a-z]{3,10}") {
            let text = format!("[params]\n{key}x = 1\n");
            prop_assert!(RunConfig::parse(&text).is_err());
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [Variant::Hartree, Variant::HardySobolev, Variant::WeightedHartree] {
            let text = format!("[params]\nvariant = {v}\nn = 6\np = 1.5\ns = 0\nsigma = {}\n", if v == Variant::Hartree { 3.0 } else { 2.0 });
            assert_eq!(RunConfig::parse(&text).unwrap().params.variant, v);
        }
    }
}
