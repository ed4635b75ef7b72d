use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_netsearch"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
  "networks": [{"kind": "line", "nodes": 4}],
  "priors": {"clique": {"lambda1": 0.5, "lambda2": 0.5}},
  "models": ["bl"],
  "policies": [{"kind": "greedy"}],
  "horizon": 1,
  "reps": 1
}"#;

#[test]
fn single_step_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let status = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "{csv}");
    assert!(lines[0].starts_with("network,rho,model,p11,policy,rep,step,edge,cumulative_relevant"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 1);
    assert!(String::from_utf8_lossy(&status.stdout).contains("line(4)"));
}

#[test]
fn empty_grid_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace(r#"[{"kind": "line", "nodes": 4}]"#, "[]"));
    let out = dir.path().join("out");
    let status = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    assert!(!out.exists());
}

#[test]
fn invalid_config_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace(r#""reps": 1"#, r#""reps": 0"#));
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("`reps`"));

    let cfg = write_config(dir.path(), &SMALL.replace(r#""bl""#, r#""exact_mrf""#).replace(r#""nodes": 4"#, r#""nodes": 40"#));
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));

    let out = bin().args(["run", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn seed_and_threads_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SMALL
            .replace(r#"{"kind": "line", "nodes": 4}"#, r#"{"kind": "clustered", "cliques": 2, "size": 4, "rewire": 0.2}"#)
            .replace(r#""horizon": 1"#, r#""horizon": 15"#)
            .replace(r#""reps": 1"#, r#""reps": 4, "rhos": [0.6, 0.9]"#),
    );
    let run = |seed: &str, threads: &str, out: &str| {
        let out = dir.path().join(out);
        let st = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--seed", seed, "--threads", threads])
            .status()
            .unwrap();
        assert!(st.success());
        fs::read(out.join("results.csv")).unwrap()
    };
    let a = run("11", "1", "a");
    let b = run("11", "4", "b");
    let c = run("12", "2", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}
