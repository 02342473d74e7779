use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn extremal(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_extremal"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const HARTREE_MU1: &str = "[params]\nvariant = hartree\nn = 5\np = 2\nmu = 1\n";

#[test]
fn exponents_single_instance() {
    let dir = tempfile::tempdir().unwrap();
    let o = extremal(dir.path(), HARTREE_MU1, &["exponents"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        line.split('=').nth(1).unwrap().trim().parse().unwrap()
    };
    assert!((value("gamma1") - 0.381966).abs() < 1e-6, "{text}");
    assert!((value("gamma2") - 2.618034).abs() < 1e-6, "{text}");
    let csv = fs::read_to_string(dir.path().join("out/exponents.csv")).unwrap();
    assert!(csv.starts_with("mu,gamma1,gamma2\n"));
}

#[test]
fn exponents_mu_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[params]\nvariant = hardy-sobolev\nn = 5\np = 2\n[verify]\nmu_steps = 20\n";
    let o = extremal(dir.path(), cfg, &["exponents"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/exponents.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 20);
    assert_eq!((rows[0][1], rows[0][2]), (0.0, 3.0));
    for w in rows.windows(2) {
        assert!(w[1][1] > w[0][1] && w[1][2] < w[0][2]);
    }
}

#[test]
fn invalid_p_names_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let o = extremal(dir.path(), "[params]\nvariant = hardy-sobolev\nn = 5\np = 5\n", &["exponents"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1 < p < N"), "{}", stderr(&o));
}

#[test]
fn zero_budget_solve_exits_nonzero_with_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[params]\nvariant = hardy-sobolev\n[grid]\nnodes = 400\nr_min = 0.001\nr_max = 1000\n\
               [solver]\nmax_outer = 1\nmax_inner = 1\n";
    let o = extremal(dir.path(), cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("did not converge"), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    assert!(report.contains("converged,false"));
    assert!(dir.path().join("out/profile.csv").exists());
}

#[test]
fn talenti_solve_writes_plot_with_reference_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[params]\nvariant = hardy-sobolev\n[grid]\nnodes = 1024\n";
    let o = extremal(dir.path(), cfg, &["solve"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(dir.path().join("out/profile.svg")).unwrap();
    assert!(svg.contains("slope -3.000"));
    assert!(svg.contains("slope -4.000"));
    let history = fs::read_to_string(dir.path().join("out/history.csv")).unwrap();
    assert!(history.starts_with("step,phase,quotient\n"));
}

#[test]
fn hartree_solve_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let o = extremal(dir.path(), HARTREE_MU1, &["solve"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.contains("gamma_near 0.38") && line.contains("gamma_far 2.61"), "{line}");

    let profile = dir.path().join("out/profile.csv");
    let copy = dir.path().join("solved.csv");
    fs::copy(&profile, &copy).unwrap();
    let o = extremal(dir.path(), HARTREE_MU1, &["verify", copy.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let report = fs::read_to_string(dir.path().join("out/verify.csv")).unwrap();
    assert!(report.starts_with("check,target,measured,tolerance,pass\n"));
    assert!(!report.contains(",false"));
}

fn write_profile(path: &Path, f: impl Fn(f64) -> f64) {
    let mut text = String::from("# N=5 p=2\nr,u\n");
    for k in 0..1200 {
        let r = 1e-3 * 10f64.powf(6.0 * k as f64 / 1199.0);
        text.push_str(&format!("{r:e},{:e}\n", f(r)));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn gaussian_profile_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gauss.csv");
    write_profile(&path, |r| (-r * r / 100.0).exp().max(1e-300));
    let o = extremal(dir.path(), HARTREE_MU1, &["verify", path.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn nan_profile_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nan.csv");
    fs::write(&path, "# N=5 p=2\nr,u\n0.1,1\n0.2,NaN\n0.4,0.5\n").unwrap();
    let o = extremal(dir.path(), HARTREE_MU1, &["verify", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn nonmonotone_radii_rejected_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "# N=5 p=2\nr,u\n0.1,1\n0.3,0.9\n0.2,0.5\n").unwrap();
    let o = extremal(dir.path(), HARTREE_MU1, &["verify", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
}

#[test]
fn convolve_writes_potential() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("density.csv");
    write_profile(&path, |r| (1.0 + r * r).powi(-3));
    let o = extremal(dir.path(), HARTREE_MU1, &["convolve", path.to_str().unwrap(), "--nu", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/potential.csv")).unwrap();
    let values: Vec<f64> = csv
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 1200);
    assert!(values.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
}

#[test]
fn slow_density_tail_is_divergent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("slow.csv");
    write_profile(&path, |r| (1.0 + r).powf(-2.5));
    let o = extremal(dir.path(), HARTREE_MU1, &["convolve", path.to_str().unwrap(), "--nu", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("diverge"), "{}", stderr(&o));
}

#[test]
fn empty_suite_passes_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let o = extremal(dir.path(), "[verify]\ncriteria =\n", &["suite"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("no criteria"), "{}", stderr(&o));
}

#[test]
fn injected_target_flips_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let ok = extremal(dir.path(), "[verify]\ncriteria = 1, 2\n", &["suite"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    let bad = extremal(dir.path(), "[verify]\ncriteria = 1, 2\ntarget_offset = 0.25\n", &["suite"]);
    assert_eq!(bad.status.code(), Some(1));
    let csv = fs::read_to_string(dir.path().join("out/suite.csv")).unwrap();
    assert!(csv.contains(",false"));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[params]\nvariant = hardy-sobolev\n[grid]\nnodes = 512\nr_min = 0.001\nr_max = 1000\n";
    let a = extremal(dir.path(), cfg, &["solve", "--seed", "3"]);
    assert!(a.status.success());
    let first = fs::read(dir.path().join("out/profile.csv")).unwrap();
    let b = extremal(dir.path(), cfg, &["solve", "--seed", "3"]);
    assert!(b.status.success());
    assert_eq!(first, fs::read(dir.path().join("out/profile.csv")).unwrap());
}
