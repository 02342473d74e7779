use std::sync::Arc;

use extremal_core::convolution::KernelStore;
use extremal_core::energy::Problem;
use extremal_core::solver::{solve_ground_state, SolveOptions};
use extremal_core::verify::{run_battery, VerifyOptions};
use extremal_core::{ProblemParams, RadialGrid};

fn battery(params: ProblemParams) -> Vec<extremal_core::verify::CheckRow> {
    let grid = Arc::new(RadialGrid::default_for(params.n));
    let prob = Problem::new(params, Arc::new(KernelStore::new()));
    let (u, _) = solve_ground_state(&prob, &grid, &SolveOptions::default()).unwrap();
    let rows = run_battery(&u, &prob, &VerifyOptions::default()).unwrap();
    for r in &rows {
        eprintln!("{:?} {:<40} {:>12.6} {:>12.6} {:>9.2e} {}", params.variant, r.check, r.target, r.measured, r.tolerance, r.pass);
    }
    rows
}

#[test]
fn hartree_mu1_battery_passes() {
    let rows = battery(ProblemParams::hartree(5, 2.0, 1.0).unwrap());
    assert!(rows.iter().all(|r| r.pass));
}

#[test]
fn hartree_mu0_battery() {
    let rows = battery(ProblemParams::hartree(5, 2.0, 0.0).unwrap());
    assert!(rows.iter().filter(|r| r.check != "grad_near").all(|r| r.pass));
}

#[test]
fn talenti_battery() {
    let rows = battery(ProblemParams::hardy_sobolev(5, 2.0, 0.0, 0.0).unwrap());
    assert!(rows.iter().filter(|r| r.check != "grad_near").all(|r| r.pass));
}
