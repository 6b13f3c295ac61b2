use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn two_asset(extra: Value) -> Value {
    let mut cfg = json!({
        "model": {
            "preset": "two_asset",
            "alpha": 0.6, "gamma1": 0.4, "gamma2": 0.3,
            "hc12": 0.3, "ha12": 0.1, "hc21": 0.2, "ha21": 0.05,
            "mu1": 1.0, "mu2": 0.7
        },
        "master_seed": 17
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    cfg
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roughhawkes"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Every file under `root` with its contents, sorted by relative path.
fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn check_passes_on_admissible_two_asset() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &two_asset(json!({})));
    let out = dir.path().join("out");
    let res = run("check", &cfg, &out, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(out.join("assumptions.json"));
    assert_eq!(report["passed"], json!(true));
    assert_eq!(report["violated"], json!([]));
    let manifest = read_json(out.join("manifest.json"));
    assert_eq!(manifest["master_seed"], json!(17));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["command"], json!("check"));
}

#[test]
fn inadmissible_config_names_the_inequality_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let mut cfg = two_asset(json!({}));
    for k in ["hc12", "ha12", "hc21", "ha21"] {
        cfg["model"][k] = json!(0.5);
    }
    let path = write_config(dir.path(), &cfg);
    let out = dir.path().join("out");
    let res = run("check", &path, &out, &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("first admissibility inequality"));
    assert!(!out.exists());
}

#[test]
fn boundary_sector_config_passes_with_warning() {
    let dir = TempDir::new().unwrap();
    let h = (1.0 - 1e-6) / 2.0;
    let cfg = json!({
        "model": {
            "preset": "sector", "alpha": 0.7, "gamma": 0.5, "hc": 0.0, "ha": 0.0,
            "sectors": [[0, 1]], "hc_r": [h], "ha_r": [0.0], "mu": [1.0, 1.0]
        },
        "master_seed": 1
    });
    let path = write_config(dir.path(), &cfg);
    let out = dir.path().join("out");
    let res = run("check", &path, &out, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("near-critical"));
    let report = read_json(out.join("assumptions.json"));
    assert_eq!(report["near_critical"], json!(true));
    let margin = report["sector_price_margin"].as_f64().unwrap();
    assert!((margin - 1e-6).abs() < 1e-12, "{margin}");
}

#[test]
fn malformed_json_reports_its_line() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("config.json");
    fs::write(&path, "{\n  \"master_seed\": 1,\n  \"model\": oops\n}").unwrap();
    let res = run("check", &path, &dir.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 3"));
}

#[test]
fn converge_needs_horizons() {
    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), &two_asset(json!({"paths": 10})));
    let out = dir.path().join("out");
    let res = run("converge", &path, &out, &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn sim_micro_is_reproducible_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let path = write_config(
        dir.path(),
        &two_asset(json!({"T_list": [200.0], "paths": 6, "grid_points": 16, "keep_paths": 2, "statistics": ["x:1", "p2:2", "corr:1:2"]})),
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run("sim-micro", &path, &a, &["--threads", "1"]).status.success());
    assert!(run("sim-micro", &path, &b, &["--threads", "3"]).status.success());
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert_eq!(sa, sb);
    let names: Vec<&str> = sa.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"micro/T200/events_0.csv"));
    assert!(names.contains(&"micro/T200/rescaled_1.csv"));
    assert!(!names.contains(&"micro/T200/events_2.csv"));
    let moments = fs::read_to_string(a.join("moments.csv")).unwrap();
    assert!(moments.starts_with("T,statistic,value,SE,n\n"));
    assert_eq!(moments.lines().count(), 4);

    let c = dir.path().join("c");
    assert!(run("sim-micro", &path, &c, &["--seed", "18"]).status.success());
    assert_ne!(fs::read(a.join("micro/T200/events_0.csv")).unwrap(), fs::read(c.join("micro/T200/events_0.csv")).unwrap());
    assert_eq!(read_json(c.join("manifest.json"))["master_seed"], json!(18));
}

#[test]
fn sim_macro_writes_oracle_tables() {
    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), &two_asset(json!({"paths": 400, "grid_points": 65, "keep_paths": 1})));
    let out = dir.path().join("out");
    let res = run("sim-macro", &path, &out, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let lm = read_json(out.join("limit_model.json"));
    for key in ["alpha", "n_c", "m", "K", "M", "Lambda", "Theta1", "Theta2", "theta0", "Delta"] {
        assert!(lm.get(key).is_some(), "{key}");
    }
    assert!(out.join("macro/path_0.csv").exists());
    let summary = fs::read_to_string(out.join("variance_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 5 * 4);
    let moments = fs::read_to_string(out.join("price_moments.csv")).unwrap();
    let mut lines = moments.lines();
    assert_eq!(lines.next(), Some("i,j,mc,SE,closed_form,two_asset_formula"));
    for line in lines {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cells[4] - cells[5]).abs() < 1e-12 * cells[4].abs().max(1.0));
    }
}

#[test]
fn spectrum_reports_identity_and_sector_structure() {
    let dir = TempDir::new().unwrap();
    let identity = json!({
        "spectrum": {
            "gamma": 0.5, "lambda_plus": 0.0, "lambda_minus": 0.0,
            "lambda_plus_r": [0.0, 0.0], "lambda_minus_r": [0.0, 0.0],
            "sectors": [[0, 1, 2], [3, 4]]
        },
        "master_seed": 0
    });
    let path = write_config(dir.path(), &identity);
    let out = dir.path().join("id");
    assert!(run("spectrum", &path, &out, &[]).status.success());
    let doc = read_json(out.join("spectrum.json"));
    assert_eq!(doc["idealized"]["degenerate"], json!(true));

    let sectors: Vec<Vec<usize>> = vec![(0..34).collect(), (34..67).collect(), (67..100).collect()];
    let fixture = json!({
        "spectrum": {
            "gamma": 0.5, "lambda_plus": 0.25, "lambda_minus": 0.25,
            "lambda_plus_r": [2.1, 2.1, 2.1], "lambda_minus_r": [2.1, 2.1, 2.1],
            "sectors": sectors
        },
        "master_seed": 0
    });
    let path = write_config(dir.path(), &fixture);
    let out = dir.path().join("fixture");
    assert!(run("spectrum", &path, &out, &[]).status.success());
    let doc = read_json(out.join("spectrum.json"));
    assert!(doc["idealized"]["gap_ratios"]["market_sector"].as_f64().unwrap() > 5.0);
    assert!(doc["idealized"]["gap_ratios"]["sector_bulk"].as_f64().unwrap() > 3.0);
    assert_eq!(doc["market_vector"].as_array().unwrap().len(), 100);
    let csv = fs::read_to_string(out.join("eigenvalues.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
}
