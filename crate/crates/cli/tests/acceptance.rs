//! Acceptance criteria 1-9 against the release-style binary.
//!
//! Runs `extremal suite` on one worker, prints one line per criterion and
//! exits nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

const SUITE_BUDGET: Duration = Duration::from_secs(15 * 60);
const TITLES: [&str; 9] = [
    "exponent reproduction",
    "ordering invariant",
    "convolution oracle",
    "convolution decay laws",
    "Talenti end-to-end",
    "sharp asymptotics",
    "doubling estimates",
    "invariance suite",
    "suite exit code, budget and target injection",
];

struct Run {
    code: i32,
    elapsed: Duration,
    csv: String,
}

fn run_suite(dir: &Path, config: Option<&str>) -> Run {
    fs::create_dir_all(dir).expect("scratch dir");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_extremal"));
    cmd.args(["suite", "--jobs", "1", "--out"]).arg(dir);
    if let Some(text) = config {
        let path = dir.join("suite.cfg");
        fs::write(&path, text).expect("config");
        cmd.arg("--config").arg(path);
    }
    let t = Instant::now();
    let out = cmd.output().expect("run extremal");
    let elapsed = t.elapsed();
    Run {
        code: out.status.code().unwrap_or(-1),
        elapsed,
        csv: fs::read_to_string(dir.join("suite.csv")).unwrap_or_default(),
    }
}

/// Failed checks per criterion; a criterion with no rows counts as failed.
fn failures(csv: &str) -> BTreeMap<u32, Vec<String>> {
    let mut map: BTreeMap<u32, Vec<String>> = (1..=8).map(|k| (k, vec!["no rows".into()])).collect();
    let mut seen = std::collections::BTreeSet::new();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let Some(id) = cols.first().and_then(|c| c.parse::<u32>().ok()) else {
            continue;
        };
        let entry = map.entry(id).or_default();
        if seen.insert(id) {
            entry.clear();
        }
        if cols.last() != Some(&"true") {
            entry.push(format!("{} (measured {})", cols[1], cols.get(3).unwrap_or(&"?")));
        }
    }
    map
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("tempdir");
    let base = run_suite(&scratch.path().join("baseline"), None);
    let injected = run_suite(
        &scratch.path().join("injected"),
        Some("[verify]\ntarget_offset = 0.5\n"),
    );
    // the injection mechanism on a subset that passes on its own
    let subset = run_suite(&scratch.path().join("subset"), Some("[verify]\ncriteria = 1, 2\n"));
    let subset_injected = run_suite(
        &scratch.path().join("subset_injected"),
        Some("[verify]\ncriteria = 1, 2\ntarget_offset = 0.5\n"),
    );

    let fails = failures(&base.csv);
    let mut all_pass = true;
    for (id, failed) in &fails {
        let pass = failed.is_empty();
        all_pass &= pass;
        let detail = if pass {
            String::new()
        } else {
            format!(" [{}]", failed.join("; "))
        };
        println!(
            "criterion {id} {}: {}{detail}",
            TITLES[(*id - 1) as usize],
            if pass { "PASS" } else { "FAIL" }
        );
    }

    let c9 = base.code == 0 && base.elapsed <= SUITE_BUDGET && injected.code != 0;
    all_pass &= c9;
    println!(
        "criterion 9 {}: {} [suite exit {} in {:.1} s; injected exit {}; subset exit {} -> injected {}]",
        TITLES[8],
        if c9 { "PASS" } else { "FAIL" },
        base.code,
        base.elapsed.as_secs_f64(),
        injected.code,
        subset.code,
        subset_injected.code
    );
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
