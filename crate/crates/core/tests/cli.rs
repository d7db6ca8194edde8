use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use serde_json::Value;

fn fhed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fhed")).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = fhed(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Kills the server when the test ends, pass or fail.
struct Served(Child);

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn serve(args: &[&str]) -> (Served, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_fhed"))
        .arg("serve")
        .args(args)
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line
        .strip_prefix("serving on ")
        .and_then(|rest| rest.split_whitespace().next())
        .unwrap_or_else(|| panic!("unexpected server banner {line:?}"))
        .to_string();
    (Served(child), addr)
}

#[test]
fn keygen_encrypt_decrypt_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let keys = dir.path().join("keys");
    let info = ok_json(&["keygen", "--out", p(&keys), "--logn", "3", "--logp", "40", "--logq", "120", "--seed", "4"]);
    assert_eq!(info["depth_budget"], 2);
    for f in ["secret.key", "public.key", "relin.key", "rot_1.key", "rot_2.key", "rot_4.key"] {
        assert!(keys.join(f).exists(), "{f} missing");
    }

    let input = dir.path().join("v.json");
    std::fs::write(&input, "[0.5, -0.25, 1.0]").unwrap();
    let ct = dir.path().join("v.ct");
    let out = fhed(&["encrypt", "--keys", p(&keys), "--input", p(&input), "--out", p(&ct), "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let slots = ok_json(&["decrypt", "--keys", p(&keys), "--in", p(&ct)]);
    let slots: Vec<f64> = serde_json::from_value(slots["slots"].clone()).unwrap();
    let expect = [0.5, -0.25, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    assert_eq!(slots.len(), 8);
    for (got, want) in slots.iter().zip(expect) {
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    let top = ok_json(&["decrypt", "--keys", p(&keys), "--in", p(&ct), "--top", "1"]);
    assert_eq!(top["top"][0]["index"], 2);
}

#[test]
fn bench_sum_on_clear_backend_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sum.csv");
    let out = fhed(&[
        "bench-sum", "--sizes", "3..5", "--trials", "10", "--backend", "clear", "--csv", p(&csv), "--warmup", "0",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,size,trials,max_abs_error,mean_abs_error,mean_time_s,log_slots,log_scale,log_modulus,seed"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for row in rows.iter().filter(|r| r[0] == "rot_add") {
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.0, "{row:?}");
    }
    let derived = std::fs::read_to_string(dir.path().join("sum_derived.csv")).unwrap();
    assert!(derived.starts_with("size,relative_error_pct,relative_speedup_pct\n"));
    assert_eq!(derived.lines().count(), 4);
}

#[test]
fn synth_serve_submit_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let info = ok_json(&[
        "synth", "--seed", "5", "--samples", "3", "--out", p(&data), "--symptoms", "16", "--hidden", "8", "--diseases", "4",
        "--comparator", "2,2,1",
    ]);
    assert_eq!(info["padded_size"], 16);
    let weights = data.join("weights.json");
    let plan = ok_json(&["plan", "--weights", p(&weights), "--logp", "30"]);
    let depth = plan["depth"].as_u64().unwrap();
    let logq = plan["min_log_modulus"].as_u64().unwrap().to_string();

    let keys = dir.path().join("keys");
    ok_json(&["keygen", "--out", p(&keys), "--logn", "4", "--logp", "30", "--logq", &logq, "--backend", "clear", "--seed", "1"]);
    let (_server, addr) = serve(&["--weights", p(&weights), "--bind", "127.0.0.1:0", "--backend", "clear", "--keys", p(&keys)]);

    let response = data.join("responses/0000.json");
    let remote = ok_json(&["submit", "--addr", &addr, "--keys", p(&keys), "--input", p(&response), "--weights", p(&weights), "--top", "2"]);
    assert_eq!(remote["top"].as_array().unwrap().len(), 2);

    // The same request evaluated locally gives the same prediction.
    let ct = dir.path().join("x.ct");
    let out = fhed(&["encrypt", "--keys", p(&keys), "--input", p(&response), "--weights", p(&weights), "--out", p(&ct)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let local = ok_json(&["infer", "--weights", p(&weights), "--in", p(&ct), "--keys", p(&keys), "--backend", "clear"]);
    assert_eq!(remote["logits"], local["logits"]);
    assert_eq!(remote["disease_name"], local["disease_name"]);
    assert!(depth > 0);
}

#[test]
fn submit_to_missing_server_fails() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok_json(&["synth", "--seed", "5", "--samples", "1", "--out", p(&data), "--symptoms", "16", "--hidden", "8", "--diseases", "4"]);
    let keys = dir.path().join("keys");
    ok_json(&["keygen", "--out", p(&keys), "--logn", "4", "--logp", "30", "--logq", "900", "--backend", "clear"]);
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().to_string();
    let out = fhed(&[
        "submit", "--addr", &port, "--keys", p(&keys), "--input", p(&data.join("responses/0000.json")), "--weights",
        p(&data.join("weights.json")), "--timeout", "2",
    ]);
    assert!(!out.status.success());
    assert_ne!(out.status.code(), Some(1), "connection failure is not a usage error");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(fhed(&[]).status.code(), Some(1));
    assert_eq!(fhed(&["bench-sum", "--sizes", "zero"]).status.code(), Some(1));
    assert_eq!(fhed(&["keygen", "--out", "x", "--logn", "4", "--logp", "30", "--logq", "10"]).status.code(), Some(1));
    assert_eq!(fhed(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn serve_refuses_shallow_modulus() {
    let dir = tempfile::tempdir().unwrap();
    ok_json(&["synth", "--seed", "5", "--samples", "1", "--out", p(dir.path()), "--symptoms", "16", "--hidden", "8", "--diseases", "4"]);
    let out = fhed(&["serve", "--weights", p(&dir.path().join("weights.json")), "--bind", "127.0.0.1:0", "--backend", "clear", "--logq", "200"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("depth"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn written_files_match_the_schemas() {
    let schema_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schema");
    let load = |name: &str| -> Value { serde_json::from_str(&std::fs::read_to_string(schema_dir.join(name)).unwrap()).unwrap() };
    let keys = |v: &Value| {
        let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
        k.sort();
        k
    };
    let dir = tempfile::tempdir().unwrap();
    ok_json(&["synth", "--seed", "5", "--samples", "1", "--out", p(dir.path()), "--symptoms", "16", "--hidden", "8", "--diseases", "4"]);
    let weights: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("weights.json")).unwrap()).unwrap();
    let response: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("responses/0000.json")).unwrap()).unwrap();

    let ws = load("weights.schema.json");
    assert_eq!(keys(&weights), keys(&ws["properties"]));
    for layer in weights["layers"].as_array().unwrap() {
        assert_eq!(keys(layer), keys(&ws["$defs"]["layer"]["properties"]));
        let kind = layer["activation"]["kind"].as_str().unwrap();
        let allowed = ws["$defs"]["activation"]["oneOf"].as_array().unwrap().iter().any(|alt| {
            let k = &alt["properties"]["kind"];
            let kind_ok = k["const"] == kind || k["enum"].as_array().is_some_and(|e| e.iter().any(|x| x == kind));
            kind_ok && keys(&layer["activation"]) == keys(&alt["properties"])
        });
        assert!(allowed, "activation {} not described by the schema", layer["activation"]);
    }
    assert_eq!(keys(&response), keys(&load("symptoms.schema.json")["properties"]));
}
