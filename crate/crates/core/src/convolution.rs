//! Riesz potentials `(|x|^{-ν} * g)(r)` of radial densities.
//!
//! The angular average of `|x - y|^{-ν}` over the sphere `|y| = t` is
//!
//! ```text
//! K_ν(r, t) = |S^{N-2}| ∫_0^π (r² + t² - 2rt cos θ)^{-ν/2} sin^{N-2} θ dθ
//!           = r^{-ν} k_ν(t/r),
//! ```
//!
//! so on a geometric grid `K(r_i, t_j) = r_i^{-ν} k_ν(q^{j-i})` and the whole
//! table is generated by `2M - 1` samples of `k_ν`. The density is
//! represented by hat functions in `log t`; the hat-weighted integrals of
//! `k_ν(e^τ) e^{Nτ}` are computed once per kernel, which also takes care of
//! the (integrable) singularity of `k_ν` at `τ = 0` when `ν ≥ N - 1`.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{critical_exponents, ProblemParams, Variant};
use crate::quad;
use crate::radial::{sphere_area, RadialGrid, RadialProfile};

/// Default number of angular quadrature nodes.
pub const DEFAULT_ANGULAR_NODES: usize = 256;

/// Safety margin of the tail divergence test.
pub const DIVERGENCE_MARGIN: f64 = 0.02;

/// Decades of power-law extension on either side of the grid.
const EXTENSION_DECADES: f64 = 2.0;

const ANGULAR_REL_TOL: f64 = 1e-10;
const ANGULAR_MAX_PANELS: usize = 4000;
const RADIAL_REL_TOL: f64 = 1e-10;

/// `k_ν(ρ) = |S^{N-2}| ∫_0^π (1 + ρ² - 2ρ cos θ)^{-ν/2} sin^{N-2}θ dθ`.
///
/// Quadrature in `ξ` with `θ = π ξ²`, starting from `angular_nodes` points
/// and bisecting panels until the relative error estimate is below 1e-10.
/// Returns `+∞` at `ρ = 1` when `ν ≥ N - 1`.
pub fn angular_kernel(rho: f64, nu: f64, n: usize, angular_nodes: usize) -> f64 {
    if rho > 1.0 {
        return rho.powf(-nu) * angular_kernel(1.0 / rho, nu, n, angular_nodes);
    }
    let nf = n as f64;
    if rho == 1.0 && nu >= nf - 1.0 {
        return f64::INFINITY;
    }
    let gap = (1.0 - rho) * (1.0 - rho);
    let power = nf - 2.0;
    let integrand = |xi: f64| {
        let theta = std::f64::consts::PI * xi * xi;
        let half = (0.5 * theta).sin();
        let dist2 = gap + 4.0 * rho * half * half;
        let weight = if power == 0.0 { 1.0 } else { theta.sin().powf(power) };
        if dist2 <= 0.0 {
            return 0.0;
        }
        dist2.powf(-0.5 * nu) * weight * 2.0 * std::f64::consts::PI * xi
    };
    let q = quad::adaptive(
        integrand,
        0.0,
        1.0,
        (angular_nodes / 15).max(1),
        ANGULAR_REL_TOL,
        0.0,
        ANGULAR_MAX_PANELS,
    );
    sphere_area(n - 1) * q.value
}

/// Precomputed sphere-averaged Riesz kernel on one grid.
#[derive(Debug, Clone)]
pub struct AngularKernel {
    nu: f64,
    dim: usize,
    angular_nodes: usize,
    grid: Arc<RadialGrid>,
    /// `k_ν(q^m)` for `m = -(M-1)..=(M-1)`; the `m = 0` slot holds the
    /// average over one log cell.
    samples: Vec<f64>,
    /// Number of extension nodes beyond each end of the grid.
    extension: usize,
    /// Rising / falling half-hat weights for offsets `-(L)..=L`,
    /// `L = M - 1 + extension`.
    rising: Vec<f64>,
    falling: Vec<f64>,
    /// Full hat weights, symmetrised so that the pairing
    /// `Σ_i r_i^N h_i V[g]_i` is symmetric in `(g, h)`.
    total: Vec<f64>,
}

/// `w_m ← (w_m + e^{m h (2N-ν)} w_{-m}) / 2`.
fn symmetrised_weights(rising: &[f64], falling: &[f64], h: f64, n: usize, nu: f64) -> Vec<f64> {
    let limit = (rising.len() / 2) as i64;
    let c = h * (2.0 * n as f64 - nu);
    let raw: Vec<f64> = rising.iter().zip(falling).map(|(a, b)| a + b).collect();
    (0..raw.len())
        .map(|k| {
            let m = k as i64 - limit;
            let mirror = raw[(limit - m) as usize];
            0.5 * (raw[k] + (m as f64 * c).exp() * mirror)
        })
        .collect()
}

impl AngularKernel {
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn angular_nodes(&self) -> usize {
        self.angular_nodes
    }

    pub fn extension(&self) -> usize {
        self.extension
    }

    fn offset_limit(&self) -> i64 {
        (self.grid.len() - 1 + self.extension) as i64
    }

    /// `K(r_i, t_j)`; diagonal entries are cell averages.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let m = self.grid.len() as i64;
        let off = j as i64 - i as i64;
        self.grid.nodes()[i].powf(-self.nu) * self.samples[(off + m - 1) as usize]
    }

    /// Pairs closer than one log step, where the entry is a cell average.
    pub fn is_near_diagonal(&self, i: usize, j: usize) -> bool {
        i == j
    }

    fn hat_weight(&self, offset: i64) -> f64 {
        self.total[(offset + self.offset_limit()) as usize]
    }
}

/// Builds the kernel table for `grid` and exponent `ν`.
pub fn build_kernel(
    grid: &Arc<RadialGrid>,
    nu: f64,
    n: usize,
    angular_nodes: usize,
) -> Result<AngularKernel> {
    let nf = n as f64;
    if !(nu > 0.0 && nu < nf) {
        return Err(Error::InvalidParams(format!(
            "Riesz exponent nu = {nu} must lie in (0, N = {n})"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParams("kernel needs N >= 2".into()));
    }
    if angular_nodes < 32 {
        return Err(Error::InvalidParams(format!(
            "angular_nodes = {angular_nodes} must be at least 32"
        )));
    }
    if grid.dim() != n {
        return Err(Error::InvalidGrid(format!(
            "grid dimension {} differs from N = {n}",
            grid.dim()
        )));
    }
    let m = grid.len() as i64;
    let h = grid.log_step();
    let extension = (EXTENSION_DECADES * std::f64::consts::LN_10 / h).ceil() as usize;
    let limit = m - 1 + extension as i64;

    let k_at = |tau: f64| angular_kernel(tau.exp(), nu, n, angular_nodes);

    let samples: Vec<f64> = ((-(m - 1))..=(m - 1))
        .into_par_iter()
        .map(|off| {
            if off == 0 {
                let q = quad::adaptive(
                    |t: f64| k_at(t),
                    -0.5 * h,
                    0.5 * h,
                    2,
                    RADIAL_REL_TOL,
                    0.0,
                    2000,
                );
                q.value / h
            } else {
                k_at(off as f64 * h)
            }
        })
        .collect();

    let half = |lo: f64, rising: bool| -> f64 {
        let hi = lo + h;
        let f = |t: f64| {
            let shape = if rising { (t - lo) / h } else { (hi - t) / h };
            k_at(t) * (nf * t).exp() * shape
        };
        quad::adaptive(f, lo, hi, 1, RADIAL_REL_TOL, 0.0, 2000).value
    };
    let weights: Vec<(f64, f64)> = ((-limit)..=limit)
        .into_par_iter()
        .map(|off| {
            let c = off as f64 * h;
            (half(c - h, true), half(c, false))
        })
        .collect();
    let (rising, falling): (Vec<f64>, Vec<f64>) = weights.into_iter().unzip();
    let total = symmetrised_weights(&rising, &falling, h, n, nu);

    Ok(AngularKernel {
        nu,
        dim: n,
        angular_nodes,
        grid: grid.clone(),
        samples,
        extension,
        rising,
        falling,
        total,
    })
}

/// Boundary behaviour of a density used by the convolution.
#[derive(Debug, Clone, Copy)]
struct Extension {
    head_slope: Option<f64>,
    tail_slope: Option<f64>,
}

fn check_density(g: &RadialProfile, kernel: &AngularKernel) -> Result<Extension> {
    if g.grid().fingerprint() != kernel.grid.fingerprint() {
        return Err(Error::InvalidGrid("density and kernel live on different grids".into()));
    }
    if g.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NotFinite("convolution density"));
    }
    if let Some(i) = g.values().iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidProfile(format!("negative density at node {i}")));
    }
    let nf = kernel.dim as f64;
    let head_slope = g.head_slope();
    let tail_slope = g.tail_slope();
    if let Some(slope) = tail_slope {
        let beta = -slope;
        let threshold = nf - kernel.nu;
        if beta <= threshold + DIVERGENCE_MARGIN {
            return Err(Error::Divergence { beta, threshold });
        }
    }
    if let Some(slope) = head_slope {
        if -slope >= nf {
            return Err(Error::InvalidProfile(format!(
                "density not locally integrable at the origin (slope {slope})"
            )));
        }
    }
    Ok(Extension {
        head_slope,
        tail_slope,
    })
}

/// Density values on the extended index range `-E ..= M-1+E`.
fn extended_density(g: &RadialProfile, ext: &Extension, e: usize) -> Vec<f64> {
    let v = g.values();
    let m = v.len();
    let h = g.grid().log_step();
    let mut out = Vec::with_capacity(m + 2 * e);
    for k in (1..=e).rev() {
        out.push(match ext.head_slope {
            Some(s) => v[0] * (-s * k as f64 * h).exp(),
            None => 0.0,
        });
    }
    out.extend_from_slice(v);
    for k in 1..=e {
        out.push(match ext.tail_slope {
            Some(s) => v[m - 1] * (s * k as f64 * h).exp(),
            None => 0.0,
        });
    }
    out
}

/// `V(r_i) = ∫ K(r_i, t) g(t) t^{N-1} dt` at every node.
///
/// Fails with [`Error::Divergence`] when the fitted tail exponent of `g` is
/// not above `N - ν` (the potential is then identically `+∞`).
pub fn riesz_convolve(g: &RadialProfile, kernel: &AngularKernel) -> Result<RadialProfile> {
    if g.is_zero() {
        return Ok(RadialProfile::zeros(g.grid().clone()));
    }
    let ext = check_density(g, kernel)?;
    let grid = g.grid();
    let m = grid.len() as i64;
    let e = kernel.extension as i64;
    let h = grid.log_step();
    let nf = kernel.dim as f64;
    let nu = kernel.nu;
    let area = sphere_area(kernel.dim);
    let dens = extended_density(g, &ext, kernel.extension);
    let limit = kernel.offset_limit();
    let t_first = (grid.log_node(0) - e as f64 * h).exp();
    let t_last = (grid.log_node(grid.len() - 1) + e as f64 * h).exp();
    let g_first = dens[0];
    let g_last = dens[dens.len() - 1];

    // Far pieces beyond the extension, using K(r,t) ≈ |S| max(r,t)^{-ν}.
    let head_mass = match ext.head_slope {
        Some(s) if g_first > 0.0 => g_first * t_first.powf(nf) / (nf + s),
        _ => 0.0,
    };
    let tail_far = match ext.tail_slope {
        Some(s) if g_last > 0.0 => area * g_last * t_last.powf(nf - nu) / (-(nf - nu + s)),
        _ => 0.0,
    };

    let values: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for (k, &gj) in dens.iter().enumerate() {
                if gj == 0.0 {
                    continue;
                }
                let j = k as i64 - e;
                let off = j - i;
                let idx = (off + limit) as usize;
                let w = if k == 0 {
                    kernel.falling[idx]
                } else if k == dens.len() - 1 {
                    kernel.rising[idx]
                } else {
                    kernel.hat_weight(off)
                };
                acc += gj * w;
            }
            let r = grid.nodes()[i as usize];
            let near = r.powf(nf - nu) * acc;
            near + area * r.powf(-nu) * head_mass + tail_far
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotFinite("riesz convolution"));
    }
    RadialProfile::new(grid.clone(), values)
}

/// `∫ |y|^{-ν} g(|y|) dy`, the potential at the origin, with the same hat
/// discretisation of `g` that [`riesz_convolve`] uses.
pub fn riesz_at_origin(g: &RadialProfile, nu: f64) -> Result<f64> {
    let grid = g.grid();
    let nf = grid.dim() as f64;
    let h = grid.log_step();
    let c = nf - nu;
    if g.is_zero() {
        return Ok(0.0);
    }
    let head = g.head_slope();
    if let Some(s) = head {
        if c + s <= 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    if let Some(s) = g.tail_slope() {
        if -s <= c + DIVERGENCE_MARGIN {
            return Err(Error::Divergence {
                beta: -s,
                threshold: c,
            });
        }
    }
    // ∫ hat_j(s) e^{cs} ds, split into rising/falling halves.
    let x = c * h;
    let (rise, fall) = if x.abs() < 1e-6 {
        (0.5 * h * (1.0 - x / 3.0), 0.5 * h * (1.0 + x / 3.0))
    } else {
        (
            ((-x).exp() - 1.0 + x) / (c * x),
            (x.exp() - 1.0 - x) / (c * x),
        )
    };
    let v = g.values();
    let m = v.len();
    let mut acc = 0.0;
    for (i, &gi) in v.iter().enumerate() {
        let scale = (c * grid.log_node(i)).exp();
        let w = match i {
            0 => fall,
            _ if i == m - 1 => rise,
            _ => rise + fall,
        };
        acc += gi * scale * w;
    }
    let r0 = grid.r_min();
    let r1 = grid.r_max();
    let head_part = match head {
        Some(s) if v[0] > 0.0 => v[0] * r0.powf(c) / (c + s),
        _ => 0.0,
    };
    let tail_part = match g.tail_slope() {
        Some(s) if v[m - 1] > 0.0 => v[m - 1] * r1.powf(c) / (-(c + s)),
        _ => 0.0,
    };
    Ok(sphere_area(grid.dim()) * (acc + head_part + tail_part))
}

/// Cache of kernel tables keyed by `(ν, grid, angular nodes)`, optionally
/// mirrored to CSV files in a directory.
#[derive(Debug, Default)]
pub struct KernelStore {
    dir: Option<PathBuf>,
    angular_nodes: usize,
    tables: Mutex<HashMap<(u64, String, usize), Arc<AngularKernel>>>,
}

impl KernelStore {
    pub fn new() -> Self {
        KernelStore {
            dir: None,
            angular_nodes: DEFAULT_ANGULAR_NODES,
            tables: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_disk_cache<P: AsRef<Path>>(dir: P) -> Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(KernelStore {
            dir: Some(dir.as_ref().to_path_buf()),
            ..Self::new()
        })
    }

    pub fn with_angular_nodes(mut self, nodes: usize) -> Self {
        self.angular_nodes = nodes;
        self
    }

    /// Kernel for `ν` on `grid`, built on first use.
    pub fn get(&self, grid: &Arc<RadialGrid>, nu: f64) -> Result<Arc<AngularKernel>> {
        let key = (nu.to_bits(), grid.fingerprint(), self.angular_nodes);
        if let Some(k) = self.tables.lock().expect("kernel cache poisoned").get(&key) {
            return Ok(k.clone());
        }
        let kernel = match self.load(grid, nu)? {
            Some(k) => k,
            None => {
                let k = build_kernel(grid, nu, grid.dim(), self.angular_nodes)?;
                self.save(&k)?;
                k
            }
        };
        let kernel = Arc::new(kernel);
        self.tables
            .lock()
            .expect("kernel cache poisoned")
            .insert(key, kernel.clone());
        Ok(kernel)
    }

    /// Drops every table built for `grid`.
    pub fn invalidate(&self, grid: &RadialGrid) {
        let fp = grid.fingerprint();
        self.tables
            .lock()
            .expect("kernel cache poisoned")
            .retain(|k, _| k.1 != fp);
    }

    fn paths(&self, grid: &RadialGrid, nu: f64) -> Option<(PathBuf, PathBuf)> {
        let dir = self.dir.as_ref()?;
        let stem = format!(
            "kernel_nu{:016x}_{}_a{}",
            nu.to_bits(),
            grid.fingerprint(),
            self.angular_nodes
        );
        Some((
            dir.join(format!("{stem}.csv")),
            dir.join(format!("{stem}_weights.csv")),
        ))
    }

    fn header(&self, k: &AngularKernel) -> String {
        format!(
            "# nu={:e} N={} grid={} M={} angular_nodes={} extension={}",
            k.nu,
            k.dim,
            k.grid.fingerprint(),
            k.grid.len(),
            k.angular_nodes,
            k.extension
        )
    }

    fn save(&self, k: &AngularKernel) -> Result<()> {
        let Some((table_path, weight_path)) = self.paths(&k.grid, k.nu) else {
            return Ok(());
        };
        write_kernel_csv(k, &self.header(k), &table_path, &weight_path)
    }

    fn load(&self, grid: &Arc<RadialGrid>, nu: f64) -> Result<Option<AngularKernel>> {
        let Some((table_path, weight_path)) = self.paths(grid, nu) else {
            return Ok(None);
        };
        if !table_path.exists() || !weight_path.exists() {
            return Ok(None);
        }
        let loaded = read_kernel_csv(grid, nu, self.angular_nodes, &table_path, &weight_path);
        match loaded {
            Ok(k) if self.header(&k) == first_line(&table_path)? => Ok(Some(k)),
            Ok(_) => Ok(None),
            Err(e) => {
                log::warn!("ignoring unreadable kernel cache {}: {e}", table_path.display());
                Ok(None)
            }
        }
    }
}

fn first_line(path: &Path) -> Result<String> {
    let mut line = String::new();
    BufReader::new(fs::File::open(path)?).read_line(&mut line)?;
    Ok(line.trim_end().to_string())
}

/// Table file: `(i, j, K)` triples for row 0 and column 0, which generate
/// the whole table through `K(r_i, t_j) = (r_i/r_0)^{-ν} K(r_0, t_{j-i})`.
/// Weight file: `(offset, rising, falling)` hat weights.
fn write_kernel_csv(k: &AngularKernel, header: &str, table: &Path, weights: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(table)?);
    writeln!(out, "{header}")?;
    writeln!(out, "i,j,K")?;
    let m = k.grid.len();
    for j in 0..m {
        writeln!(out, "0,{j},{:e}", k.entry(0, j))?;
    }
    for i in 1..m {
        writeln!(out, "{i},0,{:e}", k.entry(i, 0))?;
    }
    out.flush()?;
    let mut out = BufWriter::new(fs::File::create(weights)?);
    writeln!(out, "{header}")?;
    writeln!(out, "offset,rising,falling")?;
    let limit = k.offset_limit();
    for (idx, (a, b)) in k.rising.iter().zip(&k.falling).enumerate() {
        writeln!(out, "{},{a:e},{b:e}", idx as i64 - limit)?;
    }
    out.flush()?;
    Ok(())
}

fn read_kernel_csv(
    grid: &Arc<RadialGrid>,
    nu: f64,
    angular_nodes: usize,
    table: &Path,
    weights: &Path,
) -> Result<AngularKernel> {
    let m = grid.len();
    let mut samples = vec![f64::NAN; 2 * m - 1];
    for (line_no, fields) in csv_rows(table, 3)? {
        let (i, j) = (fields[0] as usize, fields[1] as usize);
        if i >= m || j >= m {
            return Err(Error::Parse {
                line: line_no,
                msg: "index outside grid".into(),
            });
        }
        let off = j as i64 - i as i64;
        let r_i = grid.nodes()[i];
        samples[(off + m as i64 - 1) as usize] = fields[2] * r_i.powf(nu);
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse {
            line: 0,
            msg: "kernel table incomplete".into(),
        });
    }
    let mut rising = Vec::new();
    let mut falling = Vec::new();
    for (_, fields) in csv_rows(weights, 3)? {
        rising.push(fields[1]);
        falling.push(fields[2]);
    }
    let extension = rising.len().div_ceil(2) - m;
    let total = symmetrised_weights(&rising, &falling, grid.log_step(), grid.dim(), nu);
    Ok(AngularKernel {
        nu,
        dim: grid.dim(),
        angular_nodes,
        grid: grid.clone(),
        samples,
        extension,
        rising,
        falling,
        total,
    })
}

fn csv_rows(path: &Path, width: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut rows = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if k < 2 {
            continue;
        }
        let fields: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let fields = fields.map_err(|e| Error::Parse {
            line: k + 1,
            msg: e.to_string(),
        })?;
        if fields.len() != width {
            return Err(Error::Parse {
                line: k + 1,
                msg: format!("expected {width} columns"),
            });
        }
        rows.push((k + 1, fields));
    }
    Ok(rows)
}

/// The nonlocal potential of the Hartree-type variants:
/// `|x|^{-2p} * u^p` or `|x|^{-σ} * u^{p_{s,σ}}`.
pub fn hartree_potential(
    u: &RadialProfile,
    params: &ProblemParams,
    kernels: &KernelStore,
) -> Result<RadialProfile> {
    let (nu, q) = match params.variant {
        Variant::Hartree => (2.0 * params.p, params.p),
        Variant::WeightedHartree => {
            let q = critical_exponents(params)
                .p_s_sigma
                .expect("weighted Hartree has p_s_sigma");
            (params.sigma, q)
        }
        other => {
            return Err(Error::InvalidParams(format!(
                "variant {other} has no convolution potential"
            )))
        }
    };
    let kernel = kernels.get(u.grid(), nu)?;
    riesz_convolve(&u.powf(q), &kernel)
}
