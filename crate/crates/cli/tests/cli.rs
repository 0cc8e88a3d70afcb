use std::path::Path;
use std::process::{Command, Output};

use bdis_cli::config::{parse_config, ExperimentConfig};
use proptest::prelude::*;

const SMALL: &str = "problem = exp_abs\ns = 4\nbeta = 1\ntau = 1\nzeta = 0.6666666666666666\nrho_star = 4\n\
                     schedule = 2, 4.5\nmethods = MC, RQMC, BDIS\nm_min = 3\nm_max = 6\nR = 4\nseed = 9\noutput = small.csv\n";

fn bdis(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdis")).args(args).current_dir(dir).env_remove("BDIS_SEED").output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .take_while(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn run_writes_csv_reference_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let out = bdis(&["run", &cfg, "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("res");
    let csv = std::fs::read_to_string(res.join("small.csv")).unwrap();
    assert!(csv.starts_with("method,n,R,qoi,rmse,mean_estimate\n"));
    let rows = data_rows(&csv);
    // four methods over four levels
    assert_eq!(rows.len(), 4 * 4);
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    for name in ["MC", "RQMC", "BDIS(j^-2)", "BDIS(j^-4.5)"] {
        assert_eq!(names.iter().filter(|&&n| n == name).count(), 4, "{name}");
    }
    assert!(rows.iter().all(|r| r[2] == "4" && r[3] == "scalar"));
    let slopes = csv.split("# slope\n").nth(1).unwrap();
    assert!(slopes.starts_with("method,qoi,slope,intercept\n"));
    assert_eq!(slopes.lines().count(), 1 + 4);
    assert!(res.join("small_reference.csv").exists());
    let summary = std::fs::read_to_string(res.join("small_summary.txt")).unwrap();
    assert!(summary.contains("BDIS(j^-4.5)"));
    assert_eq!(String::from_utf8_lossy(&out.stdout), summary);
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let plain = bdis(&["run", &cfg, "--out", "a"], dir.path());
    assert!(plain.status.success());
    let seeded = Command::new(env!("CARGO_BIN_EXE_bdis"))
        .args(["run", &cfg, "--out", "b"])
        .current_dir(dir.path())
        .env("BDIS_SEED", "10")
        .output()
        .unwrap();
    assert!(seeded.status.success());
    let a = std::fs::read(dir.path().join("a/small.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/small.csv")).unwrap();
    assert_ne!(a, b);
    let bad = Command::new(env!("CARGO_BIN_EXE_bdis"))
        .args(["run", &cfg, "--out", "c"])
        .current_dir(dir.path())
        .env("BDIS_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", &SMALL.replace("rho_star = 4", "rho_star = 4\nfoo = 1"));
    let out = bdis(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 7") && err.contains("foo"), "{err}");
    let missing = write_config(dir.path(), "missing.cfg", "s = 4\n");
    assert_eq!(bdis(&["run", &missing], dir.path()).status.code(), Some(2));
}

#[test]
fn non_finite_estimates_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = "problem = exp_abs\ns = 2\nbeta = 2\ntau = 1\nzeta = 800\nrho_star = 4\nmethods = MC\n\
                m_min = 3\nm_max = 5\nR = 2\nseed = 1\n";
    let cfg = write_config(dir.path(), "blowup.cfg", text);
    let out = bdis(&["run", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_config_file_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bdis(&["run", "nope.cfg"], dir.path()).status.code(), Some(1));
}

#[test]
fn check_net_reports_quality() {
    let dir = tempfile::tempdir().unwrap();
    let out = bdis(&["check-net", "4", "2"], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "sobol m=4 s=2: t = 0 (scrambled: t = 0)\n");
    let out = bdis(&["check-net", "6", "3"], dir.path());
    assert!(String::from_utf8_lossy(&out.stdout).contains("t = 1"));
}

#[test]
fn schedule_subcommand_describes_plan() {
    let dir = tempfile::tempdir().unwrap();
    let light = "s = 4\nbeta = 2\ntau = 1\nzeta = 0.6666666666666666\nrho_star = 2.5\nm_min = 3\nm_max = 5\nseed = 1\n";
    let cfg = write_config(dir.path(), "light.cfg", light);
    let out = bdis(&["schedule", &cfg], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("beta-gt-tau-inversion") && text.contains("BDIS(inversion)"), "{text}");
    let heavy = "s = 4\nbeta = 1\ntau = 1\nzeta = 0.6666666666666666\nrho_star = 4\nm_min = 3\nm_max = 5\nseed = 1\n";
    let cfg = write_config(dir.path(), "heavy.cfg", heavy);
    let text = String::from_utf8_lossy(&bdis(&["schedule", &cfg], dir.path()).stdout).into_owned();
    assert!(text.contains("beta-eq-tau-small-q") && text.contains("theta_4"), "{text}");
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    (1usize..64, 1.0f64..3.0, 0.1f64..0.9, 1.5f64..6.0, 2u32..6, 1u32..6, any::<u64>(), 2usize..9).prop_map(
        |(s, beta, frac, rho, m_min, span, seed, r)| {
            let text = format!(
                "problem = pde\ns = {s}\nbeta = {beta}\ntau = {}\nzeta = 0.5\nrho_star = {rho}\nschedule = 3, 4.5\n\
                 mesh_n = 8\nm_min = {m_min}\nm_max = {}\nR = {r}\nseed = {seed}\n",
                beta * frac,
                m_min + span
            );
            parse_config(&text).unwrap()
        },
    )
}

proptest! {
    #[test]
    fn config_text_roundtrips(cfg in config_strategy()) {
        prop_assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }
}
