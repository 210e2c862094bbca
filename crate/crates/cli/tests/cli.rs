use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const INSURANCE: &str = "\
[market]
T = 1
s0 = 100
mu = constant 0.05
sigma = constant 0.2
beta = constant -0.5
lambda = constant 0.3

[claim]
preset = insurance
p = 1
L = 0.8

[solve]
n_steps = 2000

[sim]
n_paths = 100000
n_steps = 200
seed = 7

[run]
x = 0.9
";

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn mvh(args: &[&str], config: &Path, workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mvh"));
    cmd.args(args).arg("--config").arg(config);
    match workers {
        Some(w) => cmd.env("MVH_WORKERS", w),
        None => cmd.env_remove("MVH_WORKERS"),
    };
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV table, skipping provenance lines and the header.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn error_record(o: &Output) -> serde_json::Value {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    serde_json::from_str(err.trim_end()).unwrap()
}

#[test]
fn solve_without_jumps_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.ini", &INSURANCE.replace("lambda = constant 0.3", "lambda = constant 0"));
    let out = mvh(&["solve"], &cfg, None);
    assert!(out.status.success());
    let table = rows(&stdout(&out));
    assert_eq!(table.len(), 2001);
    for r in &table {
        let t: f64 = r[0].parse().unwrap();
        let y: f64 = r[1].parse().unwrap();
        assert!((y - (-0.0625 * (1.0 - t)).exp()).abs() <= 1e-8, "t={t}");
    }
}

#[test]
fn value_at_the_vertex_is_the_residual_risk() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.ini", INSURANCE);
    let first = rows(&stdout(&mvh(&["value"], &cfg, None)));
    let yc0: f64 = first[0][2].parse().unwrap();
    let cfg = write(&dir, "v.ini", &INSURANCE.replace("x = 0.9", &format!("x = {yc0}")));
    let row = &rows(&stdout(&mvh(&["value"], &cfg, None)))[0];
    assert_eq!(row[4], row[3], "value must equal ups0");
}

#[test]
fn verify_passes_and_is_byte_identical_across_workers() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.ini", INSURANCE);
    let args = ["verify", "--seed", "42", "--paths", "100000"];
    let a = mvh(&args, &cfg, Some("1"));
    assert!(a.status.success(), "{}", stdout(&a));
    let text = stdout(&a);
    assert!(text.contains("# seed = 42"));
    let checks = rows(&text);
    assert!(checks.len() > 20);
    assert!(checks.iter().all(|r| r[3] == "true"));
    let b = mvh(&args, &cfg, Some("3"));
    assert_eq!(a.stdout, b.stdout);
    let c = mvh(&args, &cfg, None);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn failing_check_gives_exit_status_one() {
    let dir = TempDir::new().unwrap();
    // two solver steps cannot meet the self-convergence tolerance
    let cfg = write(&dir, "c.ini", &INSURANCE.replace("n_steps = 2000", "n_steps = 2"));
    let out = mvh(&["verify", "--paths", "2000", "--steps", "20"], &cfg, None);
    assert_eq!(out.status.code(), Some(1));
    let failed: Vec<_> = rows(&stdout(&out)).into_iter().filter(|r| r[3] == "false").collect();
    assert!(failed.iter().any(|r| r[0] == "solver_self_convergence"));
}

#[test]
fn json_and_csv_carry_identical_numbers() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.ini", INSURANCE);
    let out_csv = dir.path().join("t.csv");
    let out_json = dir.path().join("t.json");
    let flags = ["simulate", "--paths", "3000", "--steps", "50"];
    let a = mvh(&[&flags[..], &["--output", out_csv.to_str().unwrap()]].concat(), &cfg, None);
    let b = mvh(&[&flags[..], &["--format", "json", "--output", out_json.to_str().unwrap()]].concat(), &cfg, None);
    assert!(a.status.success() && b.status.success());
    assert!(a.stdout.is_empty());
    let csv = std::fs::read_to_string(out_csv).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_json).unwrap()).unwrap();
    let csv_rows = rows(&csv);
    let json_rows = json["rows"].as_array().unwrap();
    assert_eq!(csv_rows.len(), 6);
    assert_eq!(json_rows.len(), 6);
    let columns: Vec<&str> = json["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    assert_eq!(columns, ["strategy", "mse", "stderr", "n_paths", "diff_vs_optimal", "diff_stderr"]);
    for (c, j) in csv_rows.iter().zip(json_rows) {
        assert_eq!(j["strategy"].as_str().unwrap(), c[0]);
        for (k, name) in columns.iter().enumerate().skip(1) {
            let from_csv: f64 = c[k].parse().unwrap();
            assert_eq!(j[name].as_f64().unwrap().to_bits(), from_csv.to_bits(), "{name}");
        }
    }
}

#[test]
fn seed_flag_overrides_the_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.ini", INSURANCE);
    let run = |seed: &str| stdout(&mvh(&["simulate", "--paths", "500", "--steps", "20", "--seed", seed], &cfg, None));
    let (a, b) = (run("1"), run("2"));
    assert!(a.contains("# seed = 1") && b.contains("# seed = 2"));
    assert_ne!(rows(&a), rows(&b));
    assert_eq!(a, run("1"));
}

#[test]
fn sweep_covers_the_cartesian_grid() {
    let dir = TempDir::new().unwrap();
    let text = INSURANCE.replace("x = 0.9", "x = 0.9\nsweep = lambda: 0, 0.3, 1\nsweep2 = x: 0.5, 0.9");
    let cfg = write(&dir, "c.ini", &text);
    let out = mvh(&["sweep", "--paths", "2000", "--steps", "50"], &cfg, None);
    assert!(out.status.success());
    let csv = stdout(&out);
    assert!(csv.lines().any(|l| l == "lambda,x,y0,yc0,ups0,value,mse,mse_stderr,z"));
    let table = rows(&csv);
    assert_eq!(table.len(), 6);
    assert_eq!(table[1][0], "0.0000000000000000e0");
    assert_eq!(table[1][1], "9.0000000000000002e-1");
    // the middle block reproduces the base configuration
    let base = rows(&stdout(&mvh(&["value"], &write(&dir, "b.ini", INSURANCE), None)));
    assert_eq!(table[3][5], base[0][4]);
}

#[test]
fn invalid_volatility_is_a_line_numbered_error_record() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.ini", &INSURANCE.replace("sigma = constant 0.2", "sigma = constant 0"));
    let out = mvh(&["value"], &cfg, None);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let e = error_record(&out);
    assert_eq!(e["error"], "config");
    assert_eq!(e["line"], 5);
    assert!(e["message"].as_str().unwrap().contains("HS(ii)"));
}

#[test]
fn structural_and_io_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.ini", &format!("{INSURANCE}[market]\nT = 2\n"));
    let e = error_record(&mvh(&["value"], &cfg, None));
    assert_eq!(e["line"], 24);
    assert!(e["message"].as_str().unwrap().contains("duplicate section"));

    let e = error_record(&mvh(&["value"], &dir.path().join("missing.ini"), None));
    assert_eq!(e["error"], "io");

    let e = error_record(&mvh(&["sweep"], &write(&dir, "s.ini", INSURANCE), None));
    assert_eq!(e["error"], "usage");

    let e = error_record(&mvh(&["value"], &cfg, Some("zero")));
    assert_eq!(e["error"], "usage");

    let out = Command::new(env!("CARGO_BIN_EXE_mvh")).args(["bogus", "--config", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "usage");
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        jumphedge_cli::parse_config(&text).unwrap();
        n += 1;
    }
    assert!(n >= 4);
}
