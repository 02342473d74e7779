//! Problem parameters and the exponents derived from them.
//!
//! Every equation handled by the crate has the form
//!
//! ```text
//! -Δ_p u - μ u^{p-1} / |x|^p = V(x) |x|^{-s} u^{p-1}
//! ```
//!
//! where the variant decides how `V` is built from `u`. The decay exponents
//! `γ₁ < γ₂` are the two roots of `(p-1)γ^p - (N-p)γ^{p-1} + μ = 0`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which right-hand side couples `u` to itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `V = |x|^{-2p} * u^p`, `s = 0`.
    Hartree,
    /// `V = u^{p_s - p}` with the Hardy-Sobolev weight `|x|^{-s}`.
    HardySobolev,
    /// `V = (|x|^{-σ} * u^{p_{s,σ}}) u^{p_{s,σ} - p}`.
    WeightedHartree,
    /// `V` supplied externally on the grid.
    GeneralV,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Hartree => "hartree",
            Variant::HardySobolev => "hardy-sobolev",
            Variant::WeightedHartree => "weighted-hartree",
            Variant::GeneralV => "general-v",
        }
    }

    /// Whether the potential is a Riesz convolution of a power of `u`.
    pub fn is_nonlocal(&self) -> bool {
        matches!(self, Variant::Hartree | Variant::WeightedHartree)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "hartree" => Ok(Variant::Hartree),
            "hardy-sobolev" | "hardysobolev" => Ok(Variant::HardySobolev),
            "weighted-hartree" | "weightedhartree" => Ok(Variant::WeightedHartree),
            "general-v" | "generalv" => Ok(Variant::GeneralV),
            other => Err(Error::InvalidParams(format!("unknown variant '{other}'"))),
        }
    }
}

/// One equation instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub n: usize,
    pub p: f64,
    pub mu: f64,
    pub s: f64,
    pub sigma: f64,
    pub variant: Variant,
}

impl ProblemParams {
    /// Hartree instance with `s = 0`, `σ = 2p`.
    pub fn hartree(n: usize, p: f64, mu: f64) -> Result<Self> {
        let params = ProblemParams {
            n,
            p,
            mu,
            s: 0.0,
            sigma: 2.0 * p,
            variant: Variant::Hartree,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn hardy_sobolev(n: usize, p: f64, mu: f64, s: f64) -> Result<Self> {
        let params = ProblemParams {
            n,
            p,
            mu,
            s,
            sigma: 0.0,
            variant: Variant::HardySobolev,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn weighted_hartree(n: usize, p: f64, mu: f64, s: f64, sigma: f64) -> Result<Self> {
        let params = ProblemParams {
            n,
            p,
            mu,
            s,
            sigma,
            variant: Variant::WeightedHartree,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn general_v(n: usize, p: f64, mu: f64, s: f64) -> Result<Self> {
        let params = ProblemParams {
            n,
            p,
            mu,
            s,
            sigma: 0.0,
            variant: Variant::GeneralV,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn dim(&self) -> f64 {
        self.n as f64
    }

    /// Checks the invariants of the instance; the message names the one violated.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let p = self.p;
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n < 2 {
            return bad(format!("N = {} must be at least 2", self.n));
        }
        if !(p.is_finite() && p > 1.0 && p < n) {
            return bad(format!("1 < p < N violated (p = {p}, N = {})", self.n));
        }
        let mu_bar = ((n - p) / p).powf(p);
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return bad(format!("mu = {} must be >= 0", self.mu));
        }
        if self.mu >= mu_bar {
            return bad(format!(
                "0 <= mu < mu_bar violated (mu = {}, mu_bar = {mu_bar})",
                self.mu
            ));
        }
        let s = self.s;
        let sigma = self.sigma;
        match self.variant {
            Variant::Hartree => {
                if self.n < 3 {
                    return bad(format!("Hartree requires N >= 3 (N = {})", self.n));
                }
                if p >= n / 2.0 {
                    return bad(format!("Hartree requires 1 < p < N/2 (p = {p}, N = {})", self.n));
                }
                if s != 0.0 {
                    return bad(format!("Hartree requires s = 0 (s = {s})"));
                }
                if (sigma - 2.0 * p).abs() > 1e-12 {
                    return bad(format!("Hartree requires sigma = 2p (sigma = {sigma})"));
                }
            }
            Variant::HardySobolev | Variant::GeneralV => {
                if !(s >= 0.0 && s < p) {
                    return bad(format!("0 <= s < p violated (s = {s}, p = {p})"));
                }
            }
            Variant::WeightedHartree => {
                if !(s >= 0.0 && s < p) {
                    return bad(format!("0 <= s < p violated (s = {s}, p = {p})"));
                }
                if !(sigma > s && sigma < n) {
                    return bad(format!("s < sigma < N violated (s = {s}, sigma = {sigma})"));
                }
                if !(sigma + s > 0.0 && sigma + s <= 2.0 * p + 1e-12) {
                    return bad(format!(
                        "0 < sigma + s <= 2p violated (sigma + s = {})",
                        sigma + s
                    ));
                }
            }
        }
        Ok(())
    }

    /// `(N-p)/p`, the scaling weight of `u ↦ λ^{(N-p)/p} u(λ·)`.
    pub fn scaling_exponent(&self) -> f64 {
        (self.dim() - self.p) / self.p
    }

    /// Riesz exponent of the convolution for the nonlocal variants.
    pub fn riesz_exponent(&self) -> Option<f64> {
        match self.variant {
            Variant::Hartree => Some(2.0 * self.p),
            Variant::WeightedHartree => Some(self.sigma),
            _ => None,
        }
    }

    /// Power of `u` that is convolved, and the total homogeneity of the
    /// pairing integral.
    pub fn pairing_powers(&self) -> (f64, f64) {
        let ex = critical_exponents(self);
        match self.variant {
            Variant::Hartree => (self.p, 2.0 * self.p),
            Variant::WeightedHartree => {
                let q = ex.p_s_sigma.unwrap_or(self.p);
                (q, 2.0 * q)
            }
            Variant::HardySobolev => (ex.p_s, ex.p_s),
            Variant::GeneralV => (self.p, self.p),
        }
    }
}

/// Derived constants of an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub mu_bar: f64,
    pub p_star: f64,
    pub p_s: f64,
    pub p_s_sigma: Option<f64>,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Exponents {
    pub fn new(params: &ProblemParams) -> Result<Self> {
        params.validate()?;
        let crit = critical_exponents(params);
        let (gamma1, gamma2) = decay_roots(params, DEFAULT_ROOT_TOL)?;
        Ok(Exponents {
            mu_bar: hardy_best_constant(params)?,
            p_star: crit.p_star,
            p_s: crit.p_s,
            p_s_sigma: crit.p_s_sigma,
            gamma1,
            gamma2,
        })
    }
}

/// Default residual tolerance of [`decay_roots`], relative to `μ̄`.
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

/// `μ̄ = ((N-p)/p)^p`.
pub fn hardy_best_constant(params: &ProblemParams) -> Result<f64> {
    let n = params.dim();
    let p = params.p;
    if !(p > 1.0 && p < n) {
        return Err(Error::InvalidParams(format!(
            "1 < p < N violated (p = {p}, N = {})",
            params.n
        )));
    }
    Ok(((n - p) / p).powf(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalExponents {
    pub p_star: f64,
    pub p_s: f64,
    /// Reported only for the weighted Hartree variant.
    pub p_s_sigma: Option<f64>,
}

pub fn critical_exponents(params: &ProblemParams) -> CriticalExponents {
    let n = params.dim();
    let p = params.p;
    let s = params.s;
    let p_star = n * p / (n - p);
    let p_s = p * (n - s) / (n - p);
    let p_s_sigma = match params.variant {
        Variant::WeightedHartree => {
            Some((2.0 * n - params.sigma - s) * p / (2.0 * (n - p)))
        }
        _ => None,
    };
    CriticalExponents {
        p_star,
        p_s,
        p_s_sigma,
    }
}

/// `(p-1)γ^p - (N-p)γ^{p-1}`, with `γ = 0` mapped to 0 without touching `powf`.
pub fn root_polynomial(n: f64, p: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let g_pm1 = (gamma.ln() * (p - 1.0)).exp();
    g_pm1 * ((p - 1.0) * gamma - (n - p))
}

const MAX_BISECTIONS: usize = 400;

/// The two decay exponents `γ₁ < γ₂` by bisection on the brackets
/// `[0, (N-p)/p]` and `[(N-p)/p, (N-p)/(p-1)]`.
pub fn decay_roots(params: &ProblemParams, tol: f64) -> Result<(f64, f64)> {
    let n = params.dim();
    let p = params.p;
    let mu = params.mu;
    if !(p > 1.0 && p < n) {
        return Err(Error::InvalidParams(format!(
            "1 < p < N violated (p = {p}, N = {})",
            params.n
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("tol = {tol} must be positive")));
    }
    let mu_bar = ((n - p) / p).powf(p);
    if !(mu >= 0.0) {
        return Err(Error::InvalidParams(format!("mu = {mu} must be >= 0")));
    }
    if mu >= mu_bar {
        return Err(Error::RootDegeneracy { mu, mu_bar });
    }
    let mid = (n - p) / p;
    let top = (n - p) / (p - 1.0);
    if mu == 0.0 {
        return Ok((0.0, top));
    }
    let f = |g: f64| root_polynomial(n, p, g) + mu;
    // f(0) = μ > 0, f(mid) = μ - μ̄ < 0, f(top) = μ > 0.
    // γ₁ can be astronomically small when p is close to 1; shrink the
    // bracket geometrically first so it stays strictly positive.
    let mut hi = mid;
    while f(0.5 * hi) < 0.0 && 0.5 * hi > 0.0 {
        hi *= 0.5;
    }
    let g1 = if 0.5 * hi > 0.0 {
        bisect(&f, 0.5 * hi, hi, tol * 0.5 * hi)?
    } else {
        hi
    };
    let g2 = bisect(&f, mid, top, tol)?;
    Ok((g1, g2))
}

/// Bisection on a sign-changing bracket until its width is below
/// `tol · max(1, |x|)` or the bracket collapses to adjacent floats.
fn bisect(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (a, b);
    let (fa, fb) = (f(lo), f(hi));
    if fa == 0.0 {
        return Ok(lo);
    }
    if fb == 0.0 {
        return Ok(hi);
    }
    let f_lo_positive = fa > 0.0;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol * mid.abs().max(1.0) {
            let (flo, fhi) = (f(lo).abs(), f(hi).abs());
            return Ok(if flo <= fhi { lo } else { hi });
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == f_lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence {
        what: "decay root bisection",
        iterations: MAX_BISECTIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_roots(n: f64, mu: f64) -> (f64, f64) {
        let b = n - 2.0;
        let disc = (b * b - 4.0 * mu).sqrt();
        ((b - disc) / 2.0, (b + disc) / 2.0)
    }

    #[test]
    fn exact_root_on_a_bracket_end() {
        // γ₁ = 0.75 is exactly half of (N-p)/p
        let params = ProblemParams::hardy_sobolev(5, 2.0, 1.6875, 0.0).unwrap();
        assert_eq!(decay_roots(&params, DEFAULT_ROOT_TOL).unwrap(), (0.75, 2.25));
    }

    #[test]
    fn hardy_constant_examples() {
        let c = |n, p| {
            hardy_best_constant(&ProblemParams::hardy_sobolev(n, p, 0.0, 0.0).unwrap()).unwrap()
        };
        assert!((c(5, 2.0) - 2.25).abs() < 1e-15);
        assert!((c(4, 2.0) - 1.0).abs() < 1e-15);
        assert!((c(6, 3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hardy_constant_rejects_p_out_of_range() {
        let bad = ProblemParams {
            n: 3,
            p: 3.0,
            mu: 0.0,
            s: 0.0,
            sigma: 0.0,
            variant: Variant::HardySobolev,
        };
        assert!(matches!(
            hardy_best_constant(&bad),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn critical_exponent_examples() {
        let e = critical_exponents(&ProblemParams::hardy_sobolev(6, 2.0, 0.0, 0.0).unwrap());
        assert!((e.p_star - 3.0).abs() < 1e-15);
        assert!(e.p_s_sigma.is_none());
        let e = critical_exponents(&ProblemParams::hardy_sobolev(5, 2.0, 0.0, 1.0).unwrap());
        assert!((e.p_s - 8.0 / 3.0).abs() < 1e-15);
        let e = critical_exponents(
            &ProblemParams::weighted_hartree(5, 2.0, 0.0, 0.0, 4.0).unwrap(),
        );
        assert!((e.p_s_sigma.unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn roots_at_zero_mu_are_exact() {
        let params = ProblemParams::hartree(7, 2.5, 0.0).unwrap();
        let (g1, g2) = decay_roots(&params, 1e-12).unwrap();
        assert_eq!(g1, 0.0);
        assert_eq!(g2, 4.5 / 1.5);
    }

    #[test]
    fn roots_match_quadratic_for_p2() {
        let params = ProblemParams::hartree(5, 2.0, 1.0).unwrap();
        let (g1, g2) = decay_roots(&params, 1e-12).unwrap();
        assert!((g1 - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((g2 - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((g1 - 0.3819660).abs() < 1e-7);
        assert!((g2 - 2.6180340).abs() < 1e-7);
    }

    #[test]
    fn roots_near_degenerate_limit() {
        let mu = 2.25 * (1.0 - 1e-10);
        let params = ProblemParams::hartree(5, 2.0, mu).unwrap();
        let (g1, g2) = decay_roots(&params, 1e-12).unwrap();
        let (q1, q2) = quadratic_roots(5.0, mu);
        assert!((g1 - 1.5).abs() < 1e-4 && (g2 - 1.5).abs() < 1e-4);
        assert!((g1 - q1).abs() < 1e-4 && (g2 - q2).abs() < 1e-4);
        assert!(g1 < 1.5 && 1.5 < g2);
    }

    #[test]
    fn mu_equal_to_bar_is_rejected() {
        let params = ProblemParams {
            n: 5,
            p: 2.0,
            mu: 2.25,
            s: 0.0,
            sigma: 4.0,
            variant: Variant::Hartree,
        };
        assert!(matches!(
            decay_roots(&params, 1e-12),
            Err(Error::RootDegeneracy { .. })
        ));
        assert!(params.validate().is_err());
    }

    #[test]
    fn validation_messages_name_invariant() {
        let err = ProblemParams::hartree(5, 5.0, 0.0).unwrap_err();
        assert!(err.to_string().contains("1 < p < N"), "{err}");
        let err = ProblemParams::hartree(5, 2.6, 0.0).unwrap_err();
        assert!(err.to_string().contains("N/2"), "{err}");
        let err = ProblemParams::weighted_hartree(5, 2.0, 0.0, 0.5, 0.4).unwrap_err();
        assert!(err.to_string().contains("s < sigma"), "{err}");
        let err = ProblemParams::weighted_hartree(5, 2.0, 0.0, 1.0, 3.5).unwrap_err();
        assert!(err.to_string().contains("2p"), "{err}");
    }

    #[test]
    fn variant_round_trips_through_str() {
        for v in [
            Variant::Hartree,
            Variant::HardySobolev,
            Variant::WeightedHartree,
            Variant::GeneralV,
        ] {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
    }
}
