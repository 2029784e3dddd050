//! End-to-end runs of the `photonlink` binary on small grids.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use photonlink_cli::config::ExperimentConfig;

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn run(cmd: &str, out: &Path, extra: &[&str]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_photonlink"));
    c.arg(cmd).arg("--config").arg(default_config()).arg("--out").arg(out);
    for a in extra {
        c.arg(a);
    }
    c.output().expect("binary runs")
}

fn sets(pairs: &[&str]) -> Vec<String> {
    pairs
        .iter()
        .flat_map(|p| ["--set".to_string(), p.to_string()])
        .collect()
}

fn csvs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn rows_of(m: &serde_json::Value, file: &str) -> u64 {
    m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .find(|o| o["file"] == file)
        .unwrap_or_else(|| panic!("{file} missing from manifest"))["rows"]
        .as_u64()
        .unwrap()
}

const SMALL: &[&str] = &[
    "mc.replicas=3000",
    "mc.n_symbols=3000",
    "mc.burn_in=100",
    "mc.miss_method=\"mc\"",
    "sweep.power_dbm.start=-156",
    "sweep.power_dbm.stop=-148",
    "sweep.power_dbm.points=3",
    "sweep.lambda_per_s.points=4",
    "sweep.mean_photons.points=4",
    "sweep.lambda_tau.points=6",
    "saturation.replicas=300",
    "saturation.figures=[\"8\", \"11\", \"13\"]",
];

#[test]
fn outputs_do_not_depend_on_worker_count() {
    for cmd in ["detect", "miss-sweep", "ber-sweep", "rate-sweep", "saturation-sweep"] {
        let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
        for (dir, workers) in dirs.iter().zip(["1", "3", "1"]) {
            let mut args = sets(SMALL);
            args.extend(["--workers".to_string(), workers.to_string()]);
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            let o = run(cmd, dir.path(), &args);
            assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let first = csvs(dirs[0].path());
        assert!(!first.is_empty(), "{cmd} wrote no CSV");
        for d in &dirs[1..] {
            assert_eq!(first, csvs(d.path()), "{cmd} output changed");
        }
        assert_eq!(
            manifest(dirs[0].path())["config_hash"],
            manifest(dirs[1].path())["config_hash"]
        );
    }
}

#[test]
fn seed_changes_monte_carlo_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = sets(SMALL);
    let mut args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert!(run("ber-sweep", a.path(), &args).status.success());
    args.extend(["--seed", "99"]);
    assert!(run("ber-sweep", b.path(), &args).status.success());
    assert_ne!(csvs(a.path())["ber.csv"], csvs(b.path())["ber.csv"]);
    assert_eq!(manifest(b.path())["seed"], 99);
}

#[test]
fn row_counts_follow_grid_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let args = sets(SMALL);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert!(run("miss-sweep", dir.path(), &args).status.success());
    let m = manifest(dir.path());
    // four arrival rates, three kappa values, four gamma values
    assert_eq!(rows_of(&m, "miss.csv"), 4 * 3 * 4);
    let fig6 = std::fs::read_to_string(dir.path().join("fig6.csv")).unwrap();
    assert_eq!(fig6.lines().count(), 1 + 48);
    assert_eq!(fig6.lines().next().unwrap(), "gamma,kappa,lambda,p_miss,stderr");
    for o in m["outputs"].as_array().unwrap() {
        let text = std::fs::read(dir.path().join(o["file"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"], photonlink_cli::manifest::sha256_hex(&text));
    }
}

#[test]
fn figure_eight_extract() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "saturation-sweep",
        dir.path(),
        &[
            "--set",
            "saturation.figures=[\"8\"]",
            "--set",
            "sweep.lambda_tau.points=10",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fig = std::fs::read_to_string(dir.path().join("fig8.csv")).unwrap();
    let mut lines = fig.lines();
    assert_eq!(lines.next().unwrap(), "t_over_tau,lambda_tau,delta");
    assert_eq!(lines.count(), 3 * 10);
    let full = std::fs::read_to_string(dir.path().join("saturation_delta.csv")).unwrap();
    assert!(full.lines().next().unwrap().ends_with("regime,lambda0_tau"));
    assert!(full.contains("sub-poisson") && full.contains("super-poisson"));
}

#[test]
fn resolved_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "detect",
        dir.path(),
        &["--set", "device.kappa_rad_per_s=\"2pi*0.5e9\"", "--seed", "5"],
    );
    assert!(o.status.success());
    let resolved = ExperimentConfig::load(&dir.path().join("config.resolved.toml"), &[]).unwrap();
    assert_eq!(resolved.seed, 5);
    assert!((resolved.device.kappa_rad_per_s.0 - std::f64::consts::PI * 1e9).abs() < 1e-3);
    assert_eq!(manifest(dir.path())["config_hash"], resolved.hash());
}

#[test]
fn validate_passes_on_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("validate", dir.path(), &["--set", "mc.replicas=50000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let table = std::fs::read_to_string(dir.path().join("validate.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 11);
    assert!(table.lines().skip(1).all(|l| l.contains(",PASS,")));
}

fn error_record(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().expect("error line")).expect("error is JSON")
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        "device.bogus=1",
        "device.kappa_rad_per_s=-5",
        "timing.t_c_ns=0",
        "sweep.warp_factor.values=[1]",
        "mc.link_mode=\"quantum\"",
    ] {
        let o = run("detect", dir.path(), &["--set", bad]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
        let e = error_record(&o);
        assert_eq!(e["exit_code"], 2, "{bad}");
        assert_eq!(e["error"], "config");
        assert!(e["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_photonlink"))
        .args(["detect", "--config", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_cutoff_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "cutoff-fit",
        dir.path(),
        &[
            "--set",
            "cutoff.n_max=1",
            "--set",
            "cutoff.replicas=50",
            "--set",
            "sweep.kappa_t_c.points=2",
        ],
    );
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(error_record(&o)["error"], "non_convergence");
}
