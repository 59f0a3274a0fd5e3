//! End-to-end runs of the `cwlab` binary: output manifests, exit codes,
//! determinism, flag overrides, and the JSON report schema.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Output;

use tempfile::TempDir;

fn cwlab(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_cwlab"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).expect("config written");
    path
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small but fully passing verification setup: identity checks are
/// scale-free, the statistical margins are widened to match the reduced
/// ensemble, and the single-scale schedule makes the plateau checks exact.
const SMALL_PASSING: &str = "\
command = \"all\"
n_max = 64
walkers = 2000

[env]
kind = \"constant\"
kappa = 1.0

[tolerances]
llt_deterministic = 0.2
ks_deterministic = 0.2
tv = 0.5
";

#[test]
fn all_command_writes_the_full_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), SMALL_PASSING);
    let out_dir = tmp.path().join("out");
    let out = cwlab(&["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(
        out.status.code() == Some(0),
        "expected success, got {:?}\n{}",
        out.status.code(),
        stderr_of(&out)
    );
    for name in [
        "environment.csv",
        "energies.csv",
        "snapshot_64.csv",
        "occupancy.csv",
        "escape.json",
        "report.json",
        "report.csv",
        "escape_exact.svg",
        "escape_mc.svg",
    ] {
        assert!(out_dir.join(name).is_file(), "missing {name}");
    }

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["all_passed"], serde_json::Value::Bool(true));
    assert_eq!(report["env"], "constant(kappa=1)#0");

    let energies = fs::read_to_string(out_dir.join("energies.csv")).unwrap();
    assert_eq!(energies.lines().next(), Some("n,energy"));
    assert_eq!(energies.lines().count(), 66, "header + energies for n = 0..=64");
    assert_eq!(energies.lines().nth(1), Some("0,0.5"), "e₀ = 1/c̄(0) = 1/2");

    let escape: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("escape.json")).unwrap()).unwrap();
    assert_eq!(escape[0]["k"], 1);
    assert_eq!(escape[0]["exact"], 1.0, "level 1 escape is certain");
    assert!(escape[0]["mc"].is_number());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        &SMALL_PASSING.replace("command = \"all\"", "command = \"verify\""),
    );
    let mut digests = Vec::new();
    for dir in ["a", "b"] {
        let out_dir = tmp.path().join(dir);
        let out = cwlab(&[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--quiet",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
        let mut names: Vec<String> = fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        let bytes: Vec<(String, Vec<u8>)> = names
            .into_iter()
            .map(|n| {
                let data = fs::read(out_dir.join(&n)).unwrap();
                (n, data)
            })
            .collect();
        digests.push(bytes);
    }
    assert_eq!(digests[0].len(), digests[1].len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in digests[0].iter().zip(&digests[1]) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "{name_a} differs between identical runs");
    }
}

#[test]
fn config_errors_exit_two_and_name_the_key() {
    let tmp = TempDir::new().unwrap();
    let cases: &[(&str, &str)] = &[
        (
            "command = \"kernel\"\n[env]\nkind = \"constant\"\nkappa = -1.0\n",
            "env.kappa",
        ),
        (
            "command = \"kernel\"\nn_max = 100\nschedule = [50, 200]\n[env]\nkind = \"constant\"\nkappa = 1.0\n",
            "exceeds n_max",
        ),
        (
            "command = \"walk\"\nwalkers = 0\n[env]\nkind = \"constant\"\nkappa = 1.0\n",
            "walkers",
        ),
        (
            "command = \"kernel\"\nfrobnicate = 1\n[env]\nkind = \"constant\"\nkappa = 1.0\n",
            "line 2",
        ),
        (
            "command = \"kernel\"\n[env]\nkind = \"constant\"\nkappa = 1.0\nalpha = 0.5\n",
            "env.alpha",
        ),
    ];
    for (text, needle) in cases {
        let cfg = write_cfg(tmp.path(), text);
        let out = cwlab(&["--config", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "config: {text}");
        let err = stderr_of(&out);
        assert!(err.contains(needle), "stderr {err:?} should mention {needle:?}");
    }
}

#[test]
fn verification_failure_exits_one_but_still_reports() {
    let tmp = TempDir::new().unwrap();
    // An unreachable total-variation tolerance forces exactly one asserted
    // failure; the report files must still be written.
    let cfg = write_cfg(
        tmp.path(),
        &SMALL_PASSING
            .replace("command = \"all\"", "command = \"verify\"")
            .replace("tv = 0.5", "tv = 1e-12"),
    );
    let out_dir = tmp.path().join("out");
    let out = cwlab(&["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("1 asserted check(s) failed"));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["all_passed"], serde_json::Value::Bool(false));
    assert_eq!(report["summary"]["mc_vs_kernel_tv"]["passed"], serde_json::Value::Bool(false));
    assert_eq!(report["summary"]["mc_vs_kernel_tv"]["asserted"], serde_json::Value::Bool(true));
    assert!(out_dir.join("report.csv").is_file());
}

#[test]
fn seed_and_out_flags_override_the_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "command = \"env-sample\"\nn_max = 50\n\n[env]\nkind = \"iid_lognormal\"\nm = 0.0\ns = 1.0\nseed = 1\n",
    );
    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    let run_a = cwlab(&["--config", cfg.to_str().unwrap(), "--out", dir_a.to_str().unwrap()]);
    let run_b = cwlab(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir_b.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert_eq!(run_a.status.code(), Some(0));
    assert_eq!(run_b.status.code(), Some(0));
    let field_a = fs::read_to_string(dir_a.join("environment.csv")).unwrap();
    let field_b = fs::read_to_string(dir_b.join("environment.csv")).unwrap();
    assert_ne!(field_a, field_b, "--seed must select a different realization");
    assert!(String::from_utf8_lossy(&run_b.stdout).contains("#7"));
}

#[test]
fn bad_thread_environment_variable_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), SMALL_PASSING);
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_cwlab"))
        .args(["--config", cfg.to_str().unwrap()])
        .env("CWLAB_THREADS", "many")
        .output()
        .expect("binary spawns");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("CWLAB_THREADS"));
}

#[test]
fn report_matches_the_schema() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        &SMALL_PASSING.replace("command = \"all\"", "command = \"verify\""),
    );
    let out_dir = tmp.path().join("out");
    let out = cwlab(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));

    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
    let schema: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    let errors: Vec<String> = match validator.validate(&report) {
        Ok(()) => Vec::new(),
        Err(violations) => violations.map(|e| e.to_string()).collect(),
    };
    assert!(errors.is_empty(), "schema violations: {errors:#?}");
}
