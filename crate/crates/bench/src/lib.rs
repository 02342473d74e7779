//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use extremal_core::convolution::KernelStore;
use extremal_core::energy::Problem;
use extremal_core::{ProblemParams, RadialGrid, RadialProfile};

pub fn grid(nodes: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::geometric(5, 1e-4, 1e4, nodes).expect("valid grid"))
}

pub fn talenti_problem() -> Problem {
    let params = ProblemParams::hardy_sobolev(5, 2.0, 0.0, 0.0).expect("valid instance");
    Problem::new(params, Arc::new(KernelStore::new()))
}

pub fn hartree_problem(mu: f64) -> Problem {
    let params = ProblemParams::hartree(5, 2.0, mu).expect("valid instance");
    Problem::new(params, Arc::new(KernelStore::new()))
}

/// `(1 + r²)^{-3/2}`, the N = 5 Talenti bubble.
pub fn bubble(grid: &Arc<RadialGrid>) -> RadialProfile {
    RadialProfile::from_fn(grid.clone(), |r| (1.0 + r * r).powf(-1.5)).expect("finite profile")
}
