use std::path::Path;
use std::process::{Command, Output};

const NONDEGENERATE: &str = r#"{
    "system": {"type": "quadratic", "w": [1.0, 1.4142135623730951]},
    "E": 1.0, "epsilon": 0.5, "hs": [0.01, 0.005, 0.0025],
    "fhat": {"type": "triangle", "center": 6.283185307179586, "halfwidth": 0.5}
}"#;

const FLAT_TORUS: &str = r#"{
    "system": {"type": "torus", "n": 2},
    "E": 1.0, "epsilon": 0.5, "hs": [0.02, 0.01],
    "fhat": {"type": "triangle", "center": 4.442882938158366, "halfwidth": 2.5}
}"#;

fn semitrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semitrace")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn sweep(config: &str, out: &Path, threads: &str) -> Vec<u8> {
    let status = semitrace(&["--config", config, "--out", out.to_str().unwrap(), "--threads", threads, "sweep"]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(out.join("report.csv")).unwrap()
}

#[test]
fn sweep_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), NONDEGENERATE);
    let one = sweep(&config, &dir.path().join("t1"), "1");
    let eight = sweep(&config, &dir.path().join("t8"), "8");
    assert_eq!(one, eight);
    assert!(String::from_utf8(one).unwrap().starts_with("h,quantum_re,quantum_im,semicl_re,semicl_im,abs_err,rel_err,n_eigenvalues,wall_ms\n"));
}

#[test]
fn compare_accepts_a_converging_report_and_rejects_a_tight_bound() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), NONDEGENERATE);
    let out = dir.path().join("run");
    sweep(&config, &out, "2");
    let out = out.to_str().unwrap();
    let ok = semitrace(&["--config", &config, "--out", out, "compare", "--max-rel-err", "0.1"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let tight = semitrace(&["--out", out, "compare", "--max-rel-err", "0.01"]);
    assert_eq!(tight.status.code(), Some(2));
}

#[test]
fn compare_rejects_tampered_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), NONDEGENERATE);
    let out = dir.path().join("run");
    let csv = String::from_utf8(sweep(&config, &out, "2")).unwrap();
    let mut lines: Vec<&str> = csv.lines().collect();
    lines.swap(1, 2);
    std::fs::write(out.join("report.csv"), lines.join("\n")).unwrap();
    let res = semitrace(&["--out", out.to_str().unwrap(), "compare"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("sorted"));
}

#[test]
fn emit_plots_references_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), NONDEGENERATE);
    let out = dir.path().join("run");
    let res = semitrace(&["--config", &config, "--out", out.to_str().unwrap(), "--emit-plots", "sweep"]);
    assert!(res.status.success());
    assert!(std::fs::read_to_string(out.join("plot.gnuplot")).unwrap().contains("'report.csv'"));
    let components: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("components.json")).unwrap()).unwrap();
    assert_eq!(components["components"][0]["dim"], 1);
    assert_eq!(components["calibration_h"], 0.0025);
}

#[test]
fn classify_writes_predicates() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), NONDEGENERATE);
    let out = dir.path().join("run");
    let res = semitrace(&["--config", &config, "--out", out.to_str().unwrap(), "--seed", "11", "classify"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("classify.json")).unwrap()).unwrap();
    let period = &json["periods"][0];
    assert_eq!(period["J"], serde_json::json!([0]));
    assert_eq!(period["predicates"]["nondeg"], true);
    assert_eq!(period["predicates"]["clean"], true);
    assert_eq!(json["frequencies"]["class"], "AllNonDegenerate");
}

#[test]
fn analyze_quadratic_writes_densities() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), NONDEGENERATE);
    let out = dir.path().join("run");
    let res = semitrace(&["--config", &config, "--out", out.to_str().unwrap(), "analyze-quadratic"]);
    assert!(res.status.success());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("analysis.json")).unwrap()).unwrap();
    assert_eq!(json["components"].as_array().unwrap().len(), 1);
}

#[test]
fn berry_tabor_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), FLAT_TORUS);
    let out = dir.path().join("run");
    let res = semitrace(&["--config", &config, "--out", out.to_str().unwrap(), "berry-tabor"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("tori.json")).unwrap()).unwrap();
    assert!(json["tori"].as_array().unwrap().iter().any(|t| t["winding"] == serde_json::json!([1, 0])));
    let csv = std::fs::read_to_string(out.join("amplitudes.csv")).unwrap();
    assert!(csv.starts_with("winding,T,h,beta,re,im\n"));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &NONDEGENERATE.replace("[0.01, 0.005, 0.0025]", "[0.01, -0.005]"));
    let res = semitrace(&["--config", &config, "--out", dir.path().to_str().unwrap(), "sweep"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("hs[1]"));
    let missing = semitrace(&["sweep"]);
    assert!(!missing.status.success());
}
