use std::fs;
use std::path::Path;
use std::process::Command;

use sctf::config::{ExperimentConfig, ExperimentKind};
use sctf::error::CliError;
use sctf::plot::{loglog_slope, CsvData};

const FRAME_BOUNDS: &str = r#"
experiment = "frame-bounds"
hbar = [0.15915494309189535, 0.1]
seed = 7

[grid]
length = 32.0
points = 2048

[lattice]
alpha = 0.5
beta = 1.0
k_max = 12

[checks]
max_bound_spread = 0.01
min_lower_bound = 0.5
"#;

const PARAMETRIX: &str = r#"
experiment = "parametrix"
hbar = [0.1, 0.05]

[grid]
length = 16.0
points = 1024

[lattice]
alpha = 0.7071067811865476
beta = 0.7071067811865476
k_max = 6

[hamiltonian]
name = "pendulum"

[time]
times = [0.0, 0.25]
beam_dt = 1e-3
split_dt = 1e-2

[state]
kind = "random-hull"
count = 2
inner_fraction = 0.4
seed = 1

[checks]
max_initial_error = 1e-3
max_parametrix_error = 1.0
"#;

const RESIDUAL: &str = r#"
experiment = "residual-scaling"
hbar = [0.4, 0.2, 0.1, 0.05]

[grid]
length = 16.0
points = 2048

[hamiltonian]
name = "pendulum"

[time]
t = 0.25
beam_dt = 1e-3
dt_fd = 1e-5

[state]
kind = "coherent"
x = 1.5707963267948966
xi = 0.0

[checks]
slope_min = 1.3
slope_max = 1.7
"#;

const MATRIX: &str = r#"
experiment = "gabor-matrix"
hbar = [0.1]

[grid]
length = 16.0
points = 1024

[lattice]
alpha = 0.7071067811865476
beta = 0.7071067811865476
k_max = 6

[hamiltonian]
name = "harmonic"

[time]
t = 0.7853981633974483
beam_dt = 1e-3
split_dt = 1e-2

[matrix]
floor = 1e-12
threshold = 1e-6
vectors = 4
envelope_samples = 20
inner_fraction = 0.5
spread = 3.0
seed = 3

[checks]
min_decay_exponent = 4.0
max_constant_spread = 2.0
max_kept_fraction = 1.0
max_application_error = 1e-5
max_envelope_ratio = 4.0
"#;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn read(dir: &Path, name: &str) -> CsvData {
    CsvData::read(&dir.join(name)).unwrap()
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

#[test]
fn frame_bounds_agree_across_two_planck_constants() {
    let dir = tempfile::tempdir().unwrap();
    let report = sctf::run(&config(FRAME_BOUNDS), ExperimentKind::FrameBounds, Some(dir.path())).unwrap();
    assert!(report.passed, "{report:?}");
    let data = read(dir.path(), "frame_bounds.csv");
    assert_eq!(data.rows.len(), 2);
    for col in ["A", "B"] {
        let v = data.column(col).unwrap();
        assert!((v[0] - v[1]).abs() / v[0] < 0.01, "{col}: {v:?}");
    }
    let checks = read(dir.path(), "checks.csv");
    assert_eq!(checks.rows.len(), 2);
    assert!(checks.rows.iter().all(|r| r[4] == "1"));
    assert!(dir.path().join("frame_bounds.svg").exists());
    assert!(dir.path().join("report.toml").exists());
}

#[test]
fn csv_floats_carry_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    sctf::run(&config(FRAME_BOUNDS), ExperimentKind::FrameBounds, Some(dir.path())).unwrap();
    let data = read(dir.path(), "frame_bounds.csv");
    let a = &data.rows[0][data.header.iter().position(|h| h == "A").unwrap()];
    let mantissa = a.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{a}");
}

#[test]
fn oversized_lattice_is_rejected_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = config(&FRAME_BOUNDS.replace("k_max = 12", "k_max = 200"));
    match sctf::run(&cfg, ExperimentKind::FrameBounds, Some(&out)) {
        Err(CliError::Validation(errors)) => assert!(errors.iter().any(|e| e.contains("lattice"))),
        other => panic!("expected a validation error, got {other:?}"),
    }
    assert!(!out.exists());
}

#[test]
fn missing_output_directory_is_a_validation_error() {
    let err = sctf::run(&config(FRAME_BOUNDS), ExperimentKind::FrameBounds, None).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn identical_configs_give_byte_identical_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config(PARAMETRIX);
    sctf::run(&cfg, ExperimentKind::Parametrix, Some(a.path())).unwrap();
    sctf::run(&cfg, ExperimentKind::Parametrix, Some(b.path())).unwrap();
    let names = csv_files(a.path());
    assert_eq!(names, csv_files(b.path()));
    assert!(names.len() >= 3);
    for n in &names {
        assert_eq!(fs::read(a.path().join(n)).unwrap(), fs::read(b.path().join(n)).unwrap(), "{n}");
    }
    let svg = "parametrix.svg";
    assert_eq!(fs::read(a.path().join(svg)).unwrap(), fs::read(b.path().join(svg)).unwrap());
}

#[test]
fn config_echo_reruns_to_identical_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config(PARAMETRIX);
    sctf::run(&cfg, ExperimentKind::Parametrix, Some(a.path())).unwrap();
    let echo = ExperimentConfig::load(&a.path().join("config.toml")).unwrap();
    assert_eq!(echo, cfg);
    sctf::run(&echo, ExperimentKind::Parametrix, Some(b.path())).unwrap();
    for n in csv_files(a.path()) {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n}");
    }
}

#[test]
fn loglog_plot_label_matches_reported_slope() {
    let dir = tempfile::tempdir().unwrap();
    let report = sctf::run(&config(RESIDUAL), ExperimentKind::ResidualScaling, Some(dir.path())).unwrap();
    let fit = read(dir.path(), "residual_scaling_fit.csv");
    let slope = fit.column("slope").unwrap()[0];
    let data = read(dir.path(), "residual_scaling.csv");
    let refit = loglog_slope(&data.column("hbar").unwrap(), &data.column("residual").unwrap()).unwrap();
    assert_eq!(format!("{slope:.3}"), format!("{refit:.3}"));
    let svg = fs::read_to_string(dir.path().join("residual_scaling.svg")).unwrap();
    assert!(svg.contains(&format!("slope = {slope:.3}")), "slope {slope}");
    let check = report.checks.iter().find(|c| c.name == "slope_lower").unwrap();
    assert_eq!(check.value, slope);
}

#[test]
fn matrix_peaks_follow_the_classical_image() {
    let dir = tempfile::tempdir().unwrap();
    let report = sctf::run(&config(MATRIX), ExperimentKind::GaborMatrix, Some(dir.path())).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    let peaks = read(dir.path(), "gabor_matrix_peaks_hbar0.csv");
    let argmax = peaks.column("argmax_mu").unwrap();
    let image = peaks.column("chi_mu").unwrap();
    let lambda = peaks.column("lambda").unwrap();
    let side = 13.0;
    let mut interior = 0;
    for ((l, a), c) in lambda.iter().zip(&argmax).zip(&image) {
        let (k, m) = ((l / side).floor() - 6.0, l % side - 6.0);
        if k.abs() <= 3.0 && m.abs() <= 3.0 {
            interior += 1;
            assert_eq!(a, c, "column {l}");
        }
    }
    assert_eq!(interior, 49);
    let svg = fs::read_to_string(dir.path().join("gabor_matrix_hbar0.svg")).unwrap();
    assert!(svg.contains("<rect") && !svg.contains("no data"));
}

fn binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sctf")).args(args).output().unwrap()
}

#[test]
fn exit_code_reflects_checks_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    };
    let good = write("good.toml", FRAME_BOUNDS);
    let strict = write("strict.toml", &FRAME_BOUNDS.replace("min_lower_bound = 0.5", "min_lower_bound = 10.0"));
    let out = |n: &str| dir.path().join(n).to_string_lossy().into_owned();

    let o = binary(&["frame-bounds", "--config", &good, "--out", &out("a")]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 2, "{stdout}");

    let o = binary(&["frame-bounds", "--config", &strict, "--out", &out("b")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL] lower_bound"));

    let o = binary(&["dual-window", "--config", &good, "--out", &out("c")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("c").exists());
}
