use std::sync::{Arc, OnceLock};

use extremal_core::convolution::{build_kernel, riesz_convolve, AngularKernel, KernelStore};
use extremal_core::energy::{rayleigh, Problem};
use extremal_core::model::{decay_roots, root_polynomial, DEFAULT_ROOT_TOL};
use extremal_core::radial::rescale;
use extremal_core::verify::check_monotone;
use extremal_core::{ProblemParams, RadialGrid, RadialProfile};
use proptest::prelude::*;

fn small_grid() -> Arc<RadialGrid> {
    static GRID: OnceLock<Arc<RadialGrid>> = OnceLock::new();
    GRID.get_or_init(|| Arc::new(RadialGrid::geometric(5, 1e-3, 1e3, 384).unwrap()))
        .clone()
}

fn kernel(nu_index: usize) -> &'static AngularKernel {
    static KERNELS: OnceLock<Vec<AngularKernel>> = OnceLock::new();
    &KERNELS.get_or_init(|| {
        [1.0, 2.5, 4.0]
            .iter()
            .map(|&nu| build_kernel(&small_grid(), nu, 5, 128).unwrap())
            .collect()
    })[nu_index]
}

/// Positive, integrable and decaying fast enough for every ν above.
fn density(a: f64, b: f64, c: f64) -> impl Fn(f64) -> f64 {
    move |r: f64| a * (1.0 + (r / b).powi(2)).powi(-4) + c * (-(r - 2.0).powi(2)).exp() * (1.0 + r).powi(-8)
}

fn inner(f: &RadialProfile, g: &RadialProfile) -> f64 {
    let grid = f.grid();
    let w = grid.log_trapezoid_weights();
    let n = grid.dim() as f64;
    grid.nodes()
        .iter()
        .zip(&w)
        .zip(f.values().iter().zip(g.values()))
        .map(|((&r, &wi), (&a, &b))| wi * r.powf(n) * a * b)
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roots_are_ordered_and_solve_the_polynomial(n in 3usize..12, pf in 0.0f64..1.0, muf in 0.0f64..1.0) {
        let nf = n as f64;
        let p = 1.02 + pf * (nf - 1.04);
        let mu_bar = ((nf - p) / p).powf(p);
        let params = ProblemParams::hardy_sobolev(n, p, muf * mu_bar * 0.999, 0.0).unwrap();
        let (g1, g2) = decay_roots(&params, DEFAULT_ROOT_TOL).unwrap();
        let mid = (nf - p) / p;
        prop_assert!(0.0 <= g1 && g1 <= mid && mid <= g2 && g2 <= (nf - p) / (p - 1.0));
        prop_assert!(g1 < g2);
        if params.mu > 0.0 {
            for g in [g1, g2] {
                let f = |x: f64| root_polynomial(nf, p, x) + params.mu;
                let (lo, hi) = (f(g * (1.0 - 1e-9)), f(g * (1.0 + 1e-9)));
                prop_assert!(lo * hi <= 0.0, "no sign change around {g}: {lo}, {hi}");
            }
        } else {
            prop_assert_eq!((g1, g2), (0.0, (nf - p) / (p - 1.0)));
        }
    }

    #[test]
    fn convolution_is_symmetric(k in 0usize..3, a in 0.1f64..2.0, b in 0.3f64..3.0, c in 0.0f64..2.0) {
        let grid = small_grid();
        let f = RadialProfile::from_fn(grid.clone(), density(a, b, c)).unwrap();
        let g = RadialProfile::from_fn(grid.clone(), density(c + 0.1, 1.0 / b, a)).unwrap();
        let kf = riesz_convolve(&f, kernel(k)).unwrap();
        let kg = riesz_convolve(&g, kernel(k)).unwrap();
        let (lhs, rhs) = (inner(&g, &kf), inner(&f, &kg));
        prop_assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs(), "{lhs} vs {rhs}");
    }

    #[test]
    fn convolution_is_monotone_in_the_density(k in 0usize..3, a in 0.1f64..2.0, b in 0.3f64..3.0, extra in 0.0f64..1.0) {
        let grid = small_grid();
        let f = RadialProfile::from_fn(grid.clone(), density(a, b, 0.0)).unwrap();
        let g = RadialProfile::from_fn(grid.clone(), density(a, b, extra)).unwrap();
        let kf = riesz_convolve(&f, kernel(k)).unwrap();
        let kg = riesz_convolve(&g, kernel(k)).unwrap();
        for (x, y) in kf.values().iter().zip(kg.values()) {
            prop_assert!(*x > 0.0 && *x <= *y * (1.0 + 1e-12));
        }
    }

    #[test]
    fn quotient_is_scale_invariant(c in -6.0f64..6.0, mu in 0.0f64..2.0, width in 0.2f64..5.0) {
        let grid = small_grid();
        let params = ProblemParams::hardy_sobolev(5, 2.0, mu, 0.5).unwrap();
        let problem = Problem::new(params, Arc::new(KernelStore::new()));
        let u = RadialProfile::from_fn(grid, |r| (1.0 + (r / width).powi(2)).powf(-1.5)).unwrap();
        let base = rayleigh(&u, &problem).unwrap().quotient;
        let scaled = rayleigh(&u.scaled(10f64.powf(c)), &problem).unwrap().quotient;
        prop_assert!((scaled - base).abs() <= 1e-10 * base);
    }

    #[test]
    fn quotient_is_dilation_invariant(shift in -20i32..20, mu in 0.0f64..2.0) {
        let grid = small_grid();
        let params = ProblemParams::hardy_sobolev(5, 2.0, mu, 0.5).unwrap();
        let problem = Problem::new(params, Arc::new(KernelStore::new()));
        let u = RadialProfile::from_fn(grid.clone(), |r| (1.0 + r * r).powf(-1.5)).unwrap();
        let lambda = grid.ratio().powi(shift);
        let v = rescale(&u, lambda, 1.5);
        let (a, b) = (rayleigh(&u, &problem).unwrap().quotient, rayleigh(&v, &problem).unwrap().quotient);
        prop_assert!((a - b).abs() <= 1e-6 * a, "{a} vs {b}");
    }

    #[test]
    fn decreasing_profiles_pass_the_monotone_check(a in 0.5f64..4.0, bump in 1usize..383, size in 1e-6f64..1e-2) {
        let grid = small_grid();
        let u = RadialProfile::from_fn(grid.clone(), |r| (1.0 + r).powf(-a)).unwrap();
        prop_assert!(check_monotone(&u).monotone);
        let mut values = u.values().to_vec();
        values[bump] = values[bump - 1] * (1.0 + size);
        let report = check_monotone(&RadialProfile::new(grid, values).unwrap());
        prop_assert!(!report.monotone);
        prop_assert_eq!(report.worst_index, bump - 1);
    }
}
