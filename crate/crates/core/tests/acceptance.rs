//! Acceptance run: `validate` on the benchmark configuration, twice.
//!
//! Prints one line per criterion. Criterion 11 additionally requires the two
//! reports to be byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use serde_json::Value;

/// Wall-clock limits in seconds, per criterion.
const LIMITS: [(u64, f64); 4] = [(1, 300.0), (2, 600.0), (4, 120.0), (8, 600.0)];

fn run_validate(config: &Path, out: &Path) -> (Vec<u8>, Value) {
    let status = Command::new(env!("CARGO_BIN_EXE_debt-reduction"))
        .args(["validate", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    let code = status.status.code();
    assert!(
        matches!(code, Some(0) | Some(3)),
        "validate exited with {code:?}: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    let report = std::fs::read(out.join("validation_report.json")).expect("report written");
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).expect("manifest"))
            .expect("manifest parses");
    (report, manifest)
}

fn timings(manifest: &Value) -> BTreeMap<u64, f64> {
    manifest["timings"]
        .as_array()
        .expect("timings")
        .iter()
        .filter_map(|t| {
            let id = t["stage"].as_str()?.strip_prefix("check_")?.parse().ok()?;
            Some((id, t["seconds"].as_f64()?))
        })
        .collect()
}

fn main() -> ExitCode {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    let config = root.join("configs/benchmark.json");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let (bytes_a, manifest) = run_validate(&config, dirs[0].path());
    let (bytes_b, _) = run_validate(&config, dirs[1].path());
    let report: Value = serde_json::from_slice(&bytes_a).expect("report parses");
    let secs = timings(&manifest);
    let identical = bytes_a == bytes_b;

    let mut failed = Vec::new();
    for check in report["checks"].as_array().expect("checks") {
        let id = check["id"].as_u64().unwrap();
        let mut pass = check["pass"].as_bool().unwrap();
        let mut detail = check["detail"].as_str().unwrap().to_string();
        let t = secs.get(&id).copied().unwrap_or(f64::NAN);
        if let Some(&(_, limit)) = LIMITS.iter().find(|(k, _)| *k == id) {
            pass &= t <= limit;
            detail.push_str(&format!("; {t:.1} s (≤ {limit:.0} s)"));
        }
        if id == 11 {
            pass &= identical;
            detail.push_str(&format!("; two validate runs byte-identical {identical}"));
        }
        println!(
            "criterion {id:>2} {:<24} {}  {detail}",
            check["name"].as_str().unwrap(),
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failed.push(id);
        }
    }
    let total = report["checks"].as_array().unwrap().len();
    println!("acceptance: {}/{total} criteria passed", total - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
