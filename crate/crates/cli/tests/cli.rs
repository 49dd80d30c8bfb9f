//! End-to-end checks of the installed binary: artifact layout, exit codes,
//! config rejection, and byte-level determinism of the data files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_oscqft")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("oscqft-cli-{}-{}", name, std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("missing {name}: {e}"))
}

#[test]
fn resources_command_writes_expected_table() {
    let dir = scratch("resources");
    let out = dir.join("run");
    let status = Command::new(binary())
        .args(["resources", "1", "10", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let table = read(&out, "resources.csv");
    let row3 = table.lines().nth(3).unwrap();
    assert!(row3.starts_with("3,15,16,16,"), "row: {row3}");
    assert!(read(&out, "run_record.json").contains("\"command\": \"resources\""));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn qft_command_is_byte_deterministic() {
    let dir = scratch("determinism");
    let mut artifacts = Vec::new();
    for run in ["a", "b"] {
        let out = dir.join(run);
        let status = Command::new(binary())
            .args(["qft", "--seed", "7", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        artifacts.push((
            read(&out, "qft_amplitudes.csv"),
            read(&out, "config_echo.toml"),
        ));
    }
    assert_eq!(artifacts[0].0, artifacts[1].0, "CSV artifacts differ between runs");
    assert_eq!(artifacts[0].1, artifacts[1].1, "config echoes differ between runs");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn config_echo_reparses_to_the_same_config() {
    let dir = scratch("echo");
    let out = dir.join("run");
    let status = Command::new(binary())
        .args(["phase", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let echo = read(&out, "config_echo.toml");
    let parsed = oscqft_cli::config::Config::from_toml(&echo).unwrap();
    assert_eq!(parsed, oscqft_cli::config::Config::default());
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn malformed_config_exits_with_code_two() {
    let dir = scratch("badcfg");
    let config_path = dir.join("bad.toml");
    fs::write(&config_path, "[device]\ng_mhz = -3.0\n").unwrap();
    let out = dir.join("run");
    let output = Command::new(binary())
        .args(["transfer", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("g_mhz"), "stderr: {stderr}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn unknown_config_key_is_rejected_with_position() {
    let dir = scratch("unknownkey");
    let config_path = dir.join("bad.toml");
    fs::write(&config_path, "[device]\nomega_a_ghz = 6.0\n").unwrap();
    let output = Command::new(binary())
        .args(["qft", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line"), "stderr: {stderr}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn phase_command_writes_distribution_with_units_header() {
    let dir = scratch("phase");
    let out = dir.join("run");
    let status = Command::new(binary())
        .args(["phase", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let table = read(&out, "distribution.csv");
    assert!(table.starts_with("n_hat,probability\n"));
    // θ/2π = 0.3 at n = 3: modal outcome 2.
    let record = read(&out, "run_record.json");
    assert!(record.contains("\"n_hat\": 2"), "record: {record}");
    let _ = fs::remove_dir_all(&dir);
}
