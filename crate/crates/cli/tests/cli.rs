use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spinctrl"));
    c.env_remove("SPINCTRL_THREADS");
    c
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn library_list_has_nine_entries() {
    let o = bin().args(["library", "list"]).output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 9, "{text}");
    assert!(rows.iter().filter(|r| r.contains("Xpi ")).count() == 3);
}

#[test]
fn library_show_out_of_range() {
    let o = bin().args(["library", "show", "9"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().args(["library", "show", "6"]).output().unwrap();
    assert!(stdout(&o).contains("\"T_ns\": 50.0"));
}

#[test]
fn bundled_configs_validate() {
    for entry in std::fs::read_dir(repo().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let o = bin().arg("validate").arg(&path).output().unwrap();
        assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
    }
}

#[test]
fn negative_coupling_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.json", r#"{"schema":"spinctrl.synthesize.v1","gate":"Xpi","T_ns":50,"model":{"dEz":0.2,"J":-0.01}}"#);
    let o = bin().arg("validate").arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/model/J"), "{}", stderr(&o));
}

#[test]
fn unknown_gate_names_the_allowed_set() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "c.json",
        r#"{"schema":"spinctrl.sweep-coupling.v1","pulse":{"source":"cosine","gate":"Zpi","T_ns":50},"model":{"dEz":0.2},"J":[0]}"#,
    );
    let o = bin().arg("validate").arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("Xpi") && err.contains("Xpi2") && err.contains("X2pi"), "{err}");
}

#[test]
fn unreadable_config_exits_2() {
    let o = bin().args(["validate", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_for_another_command_is_rejected() {
    let o = bin()
        .args(["sweep-coupling", "--out", "/tmp/unused-spinctrl-out", "--config"])
        .arg(repo().join("configs/entropy.json"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/schema"));
}

#[test]
fn zero_coupling_sweep_is_a_single_clean_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "c.json",
        r#"{"schema":"spinctrl.sweep-coupling.v1","pulse":{"source":"library","gate":"Xpi","T_ns":50},"model":{"dEz":0.2},"J":[0]}"#,
    );
    let out = dir.path().join("out");
    let o = bin().arg("sweep-coupling").arg("--config").arg(&p).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep-coupling.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], "x,y,y_stderr");
    let y: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!(y < 1e-4, "{y}");
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["config"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn existing_results_need_force() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "c.json",
        r#"{"schema":"spinctrl.sweep-coupling.v1","pulse":{"source":"cosine","gate":"Xpi2","T_ns":50},"model":{"dEz":0.2},"J":[0.01]}"#,
    );
    let out = dir.path().join("out");
    let run = |force: bool| {
        let mut c = bin();
        c.arg("sweep-coupling").arg("--config").arg(&p).arg("--out").arg(&out);
        if force {
            c.arg("--force");
        }
        c.output().unwrap()
    };
    assert!(run(false).status.success());
    let again = run(false);
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("--force"));
    assert!(run(true).status.success());
}

fn run_noise(dir: &Path, threads: &str, via_env: bool) -> (String, String) {
    let p = write_config(
        dir,
        "noise.json",
        r#"{"schema":"spinctrl.noise-1f.v1","pulse":{"source":"library","gate":"Xpi","T_ns":50},"model":{"dEz":0.2},
            "noise":{"gamma":7e5,"n_components":50},"J":[0.0,0.01],"realizations":100}"#,
    );
    let out = dir.join(format!("out-{threads}-{via_env}"));
    let mut c = bin();
    if via_env {
        c.env("SPINCTRL_THREADS", threads);
    } else {
        c.args(["--threads", threads]);
    }
    let o = c.arg("noise-1f").arg("--config").arg(&p).arg("--out").arg(&out).args(["--seed", "17"]).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    (std::fs::read_to_string(out.join("noise-1f.csv")).unwrap(), std::fs::read_to_string(out.join("manifest.json")).unwrap())
}

#[test]
fn output_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let one = run_noise(dir.path(), "1", false);
    let three = run_noise(dir.path(), "3", false);
    let env = run_noise(dir.path(), "2", true);
    assert_eq!(one, three);
    assert_eq!(one, env);
    assert!(one.1.contains("\"seed\": 17"));
}

#[test]
fn synthesis_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "syn.json",
        r#"{"schema":"spinctrl.synthesize.v1","gate":"Xpi2","T_ns":50,"model":{"dEz":0.2,"J":0.02},
            "optimizer":{"max_iters":8,"polish_iters":4,"steps_per_ns":10}}"#,
    );
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = bin().arg("synthesize").arg("--config").arg(&p).arg("--out").arg(&out).args(["--seed", "42"]).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).starts_with("synthesize: cost"));
        std::fs::read(out.join("synthesize.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn synthesized_pulse_feeds_a_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "syn.json",
        r#"{"schema":"spinctrl.synthesize.v1","gate":"Xpi","T_ns":50,"model":{"dEz":0.2,"J":0.02},
            "optimizer":{"max_iters":3,"polish_iters":2,"steps_per_ns":10}}"#,
    );
    let out = dir.path().join("syn");
    assert!(bin().arg("synthesize").arg("--config").arg(&p).arg("--out").arg(&out).output().unwrap().status.success());
    let pulse: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("pulse.json")).unwrap()).unwrap();
    let cfg = serde_json::json!({"schema": "spinctrl.sweep-coupling.v1", "pulse": pulse, "model": {"dEz": 0.2}, "J": [0.001]});
    let p2 = write_config(dir.path(), "sweep.json", &cfg.to_string());
    let o = bin().arg("validate").arg(&p2).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn lattice_file_resolves_relative_to_config() {
    let o = bin().arg("validate").arg(repo().join("configs/multiqubit-honeycomb.json")).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "c.json",
        r#"{"schema":"spinctrl.multiqubit.v1","lattice":{"path":"missing.json"},"assignment":[null],"ratios":[0.01]}"#,
    );
    let o = bin().arg("validate").arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/lattice"));
}
