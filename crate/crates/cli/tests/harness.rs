//! End-to-end harness behaviour: reproducibility of emitted artifacts,
//! worker-count invariance, and the seed pairing across coarse levels.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use cgmc_cli::commands::{cmd_compare, cmd_exit_times, cmd_simulate, oracle_battery};
use cgmc_cli::Overrides;

const CONFIG: &str = r#"
[lattice]
n_sites = 120
coarse_q = [1, 6]
interaction_range = 12

[model]
beta_j0 = 6.0
c0 = 0.072

[run]
t_final = 40.0
realizations = 8
master_seed = 2024
sampling_dt = 1.0
initial_state = "empty"

[output]
directory = "unused"
snapshot_times = [0.0, 20.0]
"#;

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("exp.toml");
    fs::write(&path, CONFIG).unwrap();
    path
}

/// Every non-manifest artifact in a directory, keyed by file name.
fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().to_string_lossy().to_string();
        if name == "manifest.json" {
            continue;
        }
        out.insert(name, fs::read(entry.path()).unwrap());
    }
    out
}

#[test]
fn reruns_and_worker_counts_reproduce_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());

    let run = |out: &str, workers: usize| {
        let overrides = Overrides {
            workers: Some(workers),
            out: Some(tmp.path().join(out)),
            ..Default::default()
        };
        cmd_simulate(&config, &overrides).unwrap();
        artifacts(&tmp.path().join(out))
    };

    let first = run("a", 1);
    let second = run("b", 1);
    let parallel = run("c", 2);
    assert_eq!(first, second, "same inputs must reproduce identical bytes");
    assert_eq!(first, parallel, "worker count must not affect results");
    assert!(first.keys().any(|k| k.starts_with("trajectory_q1_r")));
    assert!(first.keys().any(|k| k.starts_with("trajectory_q6_r")));
    assert!(first.keys().any(|k| k.starts_with("snapshot_q6_r0_t20")));
    assert_eq!(
        first.keys().filter(|k| k.starts_with("trajectory_")).count(),
        16
    );
}

#[test]
fn trajectories_share_the_time_grid_across_levels() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());
    let out = tmp.path().join("grid");
    cmd_simulate(
        &config,
        &Overrides {
            out: Some(out.clone()),
            ..Default::default()
        },
    )
    .unwrap();

    // Paired levels sample the same grid, so the t column matches and the
    // initial coverage matches (both start from the projected state).
    let read_col = |name: &str| -> Vec<String> {
        fs::read_to_string(out.join(name))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().to_string())
            .collect()
    };
    for r in 0..8 {
        assert_eq!(
            read_col(&format!("trajectory_q1_r{r}.csv")),
            read_col(&format!("trajectory_q6_r{r}.csv"))
        );
    }
}

#[test]
fn manifest_records_stages_and_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());
    let out = tmp.path().join("man");
    cmd_simulate(
        &config,
        &Overrides {
            out: Some(out.clone()),
            ..Default::default()
        },
    )
    .unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["master_seed"], 2024);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_seconds"]["q1"].as_f64().unwrap() >= 0.0);
    assert!(manifest["cpu_seconds"]["q6"].is_number());
}

#[test]
fn compare_and_exit_times_emit_expected_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());

    let out = tmp.path().join("cmp");
    cmd_compare(
        &config,
        &Overrides {
            out: Some(out.clone()),
            ..Default::default()
        },
    )
    .unwrap();
    let errors = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert!(errors.starts_with("q,realizations,e_w,e_s,rel_e_w,rel_e_s\n"));
    // Convergence diagnostics: one row per nested realization count.
    assert_eq!(errors.lines().filter(|l| l.starts_with("6,")).count(), 3);

    let out = tmp.path().join("et");
    let long_config = tmp.path().join("long.toml");
    fs::write(
        &long_config,
        CONFIG.replace("t_final = 40.0", "t_final = 4000.0"),
    )
    .unwrap();
    cmd_exit_times(
        &long_config,
        &Overrides {
            out: Some(out.clone()),
            ..Default::default()
        },
    )
    .unwrap();
    let table = fs::read_to_string(out.join("exit_times.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3, "header plus one row per level");
    assert!(lines[1].starts_with("1,"));
    assert!(lines[2].starts_with("6,"));
}

#[test]
fn oracle_battery_is_green() {
    let lines = oracle_battery().unwrap();
    assert!(lines.len() > 40);
    for line in &lines {
        assert!(line.pass, "{} = {:.3e}", line.name, line.value);
    }
}
