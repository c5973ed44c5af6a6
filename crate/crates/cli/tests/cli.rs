use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn chiralmag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chiralmag"))
        .args(args)
        .output()
        .expect("spawn chiralmag")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// A fig3a run trimmed to one transfer leg on a coarse sample grid.
const SHORT_FIG3A: &str = "
scenario = \"fig3a\"
[grid]
t_end = 40.0
n_samples = 41
";

#[test]
fn list_prints_every_scenario() {
    let o = chiralmag(&["list"]);
    assert!(o.status.success());
    let ids: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(ids.len(), 20);
    assert_eq!(ids[0], "fig2");
    assert!(ids.contains(&"fig9b".to_string()));
}

#[test]
fn info_reports_transfer_times() {
    let o = chiralmag(&["info", "--scenario", "fig3a"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap_or_else(|| panic!("no {key} in\n{text}"))
            .parse()
            .unwrap()
    };
    assert!((value("t3") - 38.6115).abs() < 1e-3);
    assert!((value("t2") - 2.0 * value("t3")).abs() < 1e-9);
    assert!((value("f") - 2.404825557696).abs() < 1e-9);
}

#[test]
fn run_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", SHORT_FIG3A);
    let out = dir.path().join("out");
    let o = chiralmag(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(out.join("fock1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,P1,P2,P3"));
    assert_eq!(lines.count(), 41);

    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["tool"], "chiralmag");
    assert!((m["derived"]["t3"].as_f64().unwrap() - 38.6115).abs() < 1e-3);
    assert!(m["integrator"]["steps_per_period"].as_u64().unwrap() >= 200);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    let p2 = m["metrics"]["fock1"]["P2_t3"].as_f64().unwrap();
    assert!((p2 - 0.985819).abs() < 1e-5, "P2(t3) = {p2}");
}

#[test]
fn manifest_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", SHORT_FIG3A);
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    assert!(
        chiralmag(&["run", "--config", &cfg, "--out", first.to_str().unwrap()])
            .status
            .success()
    );
    let manifest = first.join("manifest.json");
    let o = chiralmag(&[
        "run",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(first.join("fock1.csv")).unwrap(),
        fs::read(second.join("fock1.csv")).unwrap()
    );
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[model]\nomgea = 20.0\n");
    let o = chiralmag(&["run", "--scenario", "fig3a", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("omgea"));
}

#[test]
fn invalid_value_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[grid]\nsteps_per_period = 50\n");
    let o = chiralmag(&["run", "--scenario", "fig3a", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("steps_per_period"));
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let o = chiralmag(&["run", "--scenario", "fig99"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn conflicting_scenario_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", SHORT_FIG3A);
    let o = chiralmag(&["run", "--scenario", "fig5a", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn delta_sweep_writes_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = chiralmag(&[
        "sweep",
        "--scenario",
        "fig8a",
        "--axis",
        "delta",
        "--values",
        "0,0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("sweep_delta_fock1.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("delta,P3_t3,P2_t2"));
    assert_eq!(lines.count(), 2);
    assert!(out.join("delta_0").join("manifest.json").exists());
}

#[test]
fn empty_sweep_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let o = chiralmag(&[
        "sweep",
        "--scenario",
        "fig8a",
        "--axis",
        "delta",
        "--values",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn sweep_without_axis_is_a_usage_error() {
    let o = chiralmag(&["sweep", "--scenario", "fig3a", "--values", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
