use std::path::Path;
use std::process::{Command, Output};

fn sqhard(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqhard"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SQHARD_OUT_DIR")
        .output()
        .expect("run sqhard")
}

fn generate(dir: &Path, out: &str) -> Output {
    sqhard(
        &["generate", "--mode", "sqrt-k", "-k", "8", "-d", "12", "--seed", "7", "-o", out],
        dir,
    )
}

#[test]
fn generate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.json");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(generate(dir.path(), "b.json").status.success());
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["version"], 1);
    assert_eq!(v["gmm"]["d"], 12);
    assert_eq!(v["gmm"]["cov_factor"]["V"], v["answer_key"]["V"]);
    assert_eq!(v["answer_key"]["core_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn verify_passes_then_flags_corrupted_weights() {
    let dir = tempfile::tempdir().unwrap();
    assert!(generate(dir.path(), "inst.json").status.success());
    let ok = sqhard(&["verify", "inst.json", "--tv-samples", "2000"], dir.path());
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));

    let path = dir.path().join("inst.json");
    let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let w0 = v["gmm"]["weights"][0].as_f64().unwrap();
    v["gmm"]["weights"][0] = serde_json::json!(w0 * 1.5);
    std::fs::write(&path, serde_json::to_vec(&v).unwrap()).unwrap();

    let bad = sqhard(&["verify", "inst.json", "--json", "rep.json", "--csv", "rep.csv"], dir.path());
    assert_eq!(bad.status.code(), Some(4));
    let stdout = String::from_utf8_lossy(&bad.stdout);
    let line = stdout.lines().find(|l| l.starts_with("weights_normalized")).unwrap();
    assert!(line.ends_with("FAIL"), "{line}");
    assert!(String::from_utf8_lossy(&bad.stderr).contains("weights_normalized"));
    let csv = std::fs::read_to_string(dir.path().join("rep.csv")).unwrap();
    assert!(csv.starts_with("check,value,stderr,threshold,pass\n"));
    assert!(csv.contains("weights_normalized,") && csv.contains(",false"));
    let rendered = sqhard(&["report", "rep.json"], dir.path());
    assert!(rendered.status.success());
    assert!(String::from_utf8_lossy(&rendered.stdout).contains("weights_normalized"));
}

#[test]
fn sample_blind_and_keyed() {
    let dir = tempfile::tempdir().unwrap();
    assert!(generate(dir.path(), "inst.json").status.success());
    let out = sqhard(
        &["sample", "inst.json", "-n", "50", "--variant", "both", "--seed", "3", "-o", "data.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let blind = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    let keyed = std::fs::read_to_string(dir.path().join("data.keyed.csv")).unwrap();
    let header: Vec<String> = (0..12).map(|i| format!("x{i}")).collect();
    assert_eq!(blind.lines().next().unwrap(), header.join(","));
    assert_eq!(keyed.lines().next().unwrap(), format!("{},component", header.join(",")));
    assert_eq!(blind.lines().count(), 51);
    for (b, k) in blind.lines().zip(keyed.lines()).skip(1) {
        assert!(k.starts_with(b));
        let first = b.split(',').next().unwrap();
        let mantissa = first.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17);
    }
}

#[test]
fn experiment_and_svg_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
dims = [4]
degrees = [1, 2, 4]
sample_sizes = [100, 1000]
trials = 10
significance = 0.05
seed = 2
lrt = false

[instance]
mode = "sqrt-k"
k = 4
c_delta = 0.1
seed = 1

[calibration]
kind = "asymptotic"
"#;
    std::fs::write(dir.path().join("exp.toml"), cfg).unwrap();
    let out = sqhard(&["experiment", "--config", "exp.toml", "-o", "power.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("power.csv").exists());
    let out = sqhard(&["report", "power.json", "--svg", "power.svg"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(dir.path().join("power.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 3);
    for r in [1, 2, 4] {
        assert!(svg.contains(&format!("r={r},")));
    }
    let csv = std::fs::read_to_string(dir.path().join("power.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn out_dir_variable_sets_default_location() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sqhard"))
        .args(["generate", "-k", "8", "-d", "12", "--seed", "7"])
        .current_dir(dir.path())
        .env("SQHARD_OUT_DIR", dir.path().join("outputs"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("outputs/instance.json").exists());
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let odd_k = sqhard(&["generate", "-k", "7", "-d", "12"], dir.path());
    assert_eq!(odd_k.status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "nonsense = 3\n").unwrap();
    let bad_cfg = sqhard(&["generate", "--config", "bad.toml"], dir.path());
    assert_eq!(bad_cfg.status.code(), Some(2));
    let missing = sqhard(&["verify", "nope.json"], dir.path());
    assert_eq!(missing.status.code(), Some(5));
    let lb = sqhard(&["lower-bound", "--gamma", "0.001", "--beta", "1", "-s", "1000"], dir.path());
    assert!(lb.status.success());
    assert!(String::from_utf8_lossy(&lb.stdout).contains("166.666667"));
}
