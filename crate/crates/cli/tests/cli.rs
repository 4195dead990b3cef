use std::path::Path;
use std::process::{Command, Output};

use floquet_spectra::dpo::{self, DpoMode, DpoParameters};
use floquet_spectra::sampled::SampledSystem;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floquet-spectra")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|f| f.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn golden(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn compare(actual: &Path, expected: &Path, tolerances: &[f64]) {
    let (h1, r1) = read_csv(actual);
    let (h2, r2) = read_csv(expected);
    assert_eq!(h1, h2);
    assert_eq!(r1.len(), r2.len());
    for (a, e) in r1.iter().zip(&r2) {
        for ((x, y), tol) in a.iter().zip(e).zip(tolerances) {
            assert!((x - y).abs() <= tol * y.abs().max(1.0), "{x} vs {y} in {}", actual.display());
        }
    }
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).expect("structured error on stderr")
}

#[test]
fn dpo_spectrum_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    ok(&["dpo-spectrum", "--q", "3", "--sigma", "0.5", "--output", o]);
    compare(&dir.path().join("dpo_spectrum.csv"), &golden("dpo_spectrum_q3_sigma0.5.csv"), &[1e-9; 8]);
    let text = std::fs::read_to_string(dir.path().join("dpo_spectrum.csv")).unwrap();
    assert!(text.starts_with("omega,V11,V12,V22,V1,V2,detV,V2_dB\n"));
    assert!(!text.contains('\r'));
}

#[test]
fn dpo_sweep_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    ok(&["dpo-sweep", "--q-min", "2", "--q-max", "10", "--q-count", "9", "--output", o]);
    compare(&dir.path().join("dpo_sweep.csv"), &golden("dpo_sweep_q2_10.csv"), &[0.0, 1e-6, 1e-3, 1e-4]);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["results"]["rows"].as_array().unwrap().len(), 9);
    assert!(summary["metadata"]["units"].is_string());
}

#[test]
fn negative_sigma_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["dpo-spectrum", "--sigma", "-0.1", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"]["kind"], "config");
    assert_eq!(err["error"]["field"], "sigma");
    assert!(err["error"]["message"].as_str().unwrap().contains("sigma"));
}

#[test]
fn invalid_fields_are_reported() {
    for (args, field) in [
        (&["dpo-spectrum", "--omega-count", "0"][..], "omega-count"),
        (&["dpo-spectrum", "--kd", "0"][..], "kd"),
        (&["dpo-spectrum", "--tr", "0.1"][..], "tr"),
        (&["dpo-spectrum", "--kd", "2", "--tr", "5"][..], "tr"),
        (&["decompose", "--tol-rel", "0"][..], "tol-rel"),
        (&["dpo-sweep", "--q-min", "-1"][..], "q-min"),
        (&["correlate", "--pairs", "1;2"][..], "pairs"),
        (&["decompose", "--system-file", "/nonexistent/system.csv"][..], "system-file"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let mut full = args.to_vec();
        full.extend(["--output", dir.path().to_str().unwrap()]);
        let out = cli(&full);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(error_json(&out)["error"]["field"], field, "{args:?}");
    }
}

#[test]
fn unstable_parameters_exit_with_instability_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["dpo-spectrum", "--sigma", "1.2", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"]["kind"], "instability");
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let out = cli(&["decompose", "--output", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(error_json(&out)["error"]["kind"], "io");
}

#[test]
fn emitted_config_reproduces_outputs_bit_identically() {
    for args in [
        &["spectrum", "--omega-count", "9", "--kd", "3", "--tr", "0.2"][..],
        &["correlate", "--pairs", "2.3T:0.7T,0:0,1.5:4"][..],
        &["dpo-spectrum", "--mode", "rwa", "--omega-min", "-2", "--omega-max", "2", "--omega-count", "11"][..],
        &["decompose", "--q", "4", "--sigma", "0.3"][..],
    ] {
        let first = tempfile::tempdir().unwrap();
        let second = tempfile::tempdir().unwrap();
        let mut full = args.to_vec();
        full.extend(["--output", first.path().to_str().unwrap()]);
        ok(&full);
        let config = first.path().join("config.json");
        ok(&["--config", config.to_str().unwrap(), "--output", second.path().to_str().unwrap(), "--threads", "1"]);
        let mut names: Vec<_> = std::fs::read_dir(first.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() >= 3);
        for name in names {
            let a = std::fs::read(first.path().join(&name)).unwrap();
            let b = std::fs::read(second.path().join(&name)).unwrap();
            assert!(a == b, "{name:?} differs for {args:?}");
        }
    }
}

#[test]
fn sampled_system_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let params = DpoParameters::new(3.0, 0.5).unwrap();
    let system = dpo::build_dpo_system(&params, DpoMode::Full).unwrap();
    let file = dir.path().join("dpo.csv");
    std::fs::write(&file, SampledSystem::from_system(&system, 256).to_text()).unwrap();
    let out = dir.path().join("out");
    ok(&["decompose", "--system-file", file.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["metadata"]["system"]["interpolation_order"], 3);
    let mu = summary["results"]["exponents"][0]["re"].as_f64().unwrap();
    assert!((mu + 0.5063154658210467).abs() < 1e-6);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "# period = 1\n0, 1\n").unwrap();
    let out = cli(&["decompose", "--system-file", bad.to_str().unwrap(), "--output", dir.path().join("o2").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_prints_a_passing_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["verify", "--output", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.ends_with("PASS")).count(), 5, "{stdout}");
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn requires_a_subcommand_or_config() {
    let out = cli(&[]);
    assert_eq!(out.status.code(), Some(2));
}
