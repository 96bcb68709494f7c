use std::path::Path;
use std::process::{Command, Output};

use ivsurv::dataset::{load_cohort, save_cohort, CohortSchema};
use ivsurv::estimator::read_results_csv;
use ivsurv::simulate::{generate, read_report_json, DesignSet, DgpSpec};

fn ivsurv(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ivsurv"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn cohort_file(dir: &Path) -> String {
    let path = dir.join("cohort.csv");
    let cohort = generate(&DgpSpec::new(DesignSet::Set1Strong, 400, 8)).unwrap().cohort;
    save_cohort(&cohort, &path).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn estimate_writes_results_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let input = cohort_file(dir.path());
    std::fs::write(dir.path().join("run.toml"), "[estimator]\nweak_instrument = \"truncate\"\n").unwrap();
    let args = [
        "estimate",
        "--config",
        "run.toml",
        "--input",
        &input,
        "--methods",
        "onestep",
        "--quantiles",
        "0.5",
        "--output",
        "a.csv",
    ];
    let out = ivsurv(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_results_csv(std::fs::File::open(dir.path().join("a.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].ci_low.unwrap().is_finite() && rows[0].ci_high.unwrap().is_finite());

    let mut again = args;
    again[args.len() - 1] = "b.csv";
    assert_eq!(ivsurv(&again, dir.path()).status.code(), Some(0));
    assert_eq!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap()
    );
}

#[test]
fn weak_instrument_is_an_estimation_error_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let input = cohort_file(dir.path());
    let out = ivsurv(&["estimate", "--input", &input, "--horizons", "0.02"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("subject"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = cohort_file(dir.path());
    let out = ivsurv(&["estimate", "--input", &input, "--quantiles", "0.5", "--k-folds", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("K must be ≥ 2 or omitted"));

    let out = ivsurv(&["simulate", "--set", "set2", "--scenario", "9", "--reps", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = ivsurv(&["build-iv", "--input", &input, "--threshold", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("threshold must be in (0,1)"));

    assert_eq!(ivsurv(&["estimate", "--bogus"], dir.path()).status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "time,event,a,z,x1\n1,1,1,0,0.5\n-2,0,1,1,0.1\n").unwrap();
    let out = ivsurv(&["estimate", "--input", "bad.csv", "--horizons", "1"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row"));
}

#[test]
fn simulate_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = ivsurv(
        &["simulate", "--set", "set1_weak", "--reps", "10", "--n", "200", "--output", "r.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report_json(std::fs::File::open(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report.cells.len(), 12);
    assert_eq!(report.horizons.len(), 4);

    let out = ivsurv(
        &[
            "simulate",
            "--set",
            "set1_weak",
            "--reps",
            "4",
            "--n",
            "200",
            "--methods",
            "gformula",
            "--format",
            "csv",
        ],
        dir.path(),
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn build_iv_reports_exclusions() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("provider,time,event,a,x1\n");
    for i in 0..6 {
        text += &format!("p1,{}.0,1,{},0.{i}\n", i + 1, (i < 5) as u8);
        text += &format!("p2,{}.5,{},{},0.{i}\n", i + 1, i % 2, (i < 1) as u8);
    }
    for i in 0..4 {
        text += &format!("p3,{}.2,1,1,0.{i}\n", i + 1);
    }
    std::fs::write(dir.path().join("enc.csv"), text).unwrap();
    let out = ivsurv(
        &[
            "build-iv",
            "--input",
            "enc.csv",
            "--threshold",
            "0.5",
            "--min-patients",
            "5",
            "--output",
            "iv.csv",
        ],
        dir.path(),
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(0), "{stderr}");
    assert!(stderr.contains("4 rows excluded"), "{stderr}");
    let cohort = load_cohort(dir.path().join("iv.csv"), &CohortSchema::default()).unwrap();
    assert_eq!(cohort.len(), 12);
}
