use std::fs;
use std::path::Path;
use std::process::Command;

use sparse_landscape::io::{read_json, read_net_spec, write_net_spec, RunManifest, MANIFEST_FILE};
use sparse_landscape::net::useless_connection_demo_net;
use sparse_landscape::Activation;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sparse-landscape"));
    c.env_remove("SEED");
    c
}

fn run(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["verify", "sd-minimum"]).0, 0);
    assert_eq!(run(&["verify", "ss-valley", "--values", "1,2,6,2"]).0, 1);
    assert_eq!(run(&["verify", "bogus"]).0, 2);
    assert_eq!(run(&["train", "--spec", "/no/such/file.json"]).0, 2);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn bad_spec_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(
        &p,
        r#"{"activation":{"kind":"linear"},"layers":[{"weights":[[1,2]],"mask":[[1,0]]},{"weights":[[1],[2]],"mask":[[1],[1]]}]}"#,
    )
    .unwrap();
    let out = bin().args(["train", "--spec", p.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("layers["), "{err}");
}

#[test]
fn train_on_spec_writes_trace_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("net.json");
    write_net_spec(&spec, &useless_connection_demo_net(Activation::Linear)).unwrap();
    let out = dir.path().join("run");
    let (code, text) = run(&[
        "train",
        "--spec",
        spec.to_str().unwrap(),
        "--n",
        "20",
        "--epochs",
        "300",
        "--rank-every",
        "50",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_eq!(code, 0, "{text}");
    let csv = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(csv.starts_with("epoch,loss"));
    let m: RunManifest = read_json(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.seed, 3);
    assert_eq!(m.command, "train");
    assert!(m.outputs.iter().any(|p| p.ends_with("trace.csv")));
    let final_net = read_net_spec(&out.join("final_net.json")).unwrap();
    assert!(final_net.respects_masks());
}

fn rerun(manifest_dir: &Path, out: &Path) -> String {
    let m: RunManifest = read_json(&manifest_dir.join(MANIFEST_FILE)).unwrap();
    let mut argv = m.argv.clone();
    let k = argv.iter().position(|a| a == "--out").unwrap();
    argv[k + 1] = out.to_str().unwrap().to_string();
    let status = bin().args(&argv).output().unwrap();
    assert!(status.status.success());
    fs::read_to_string(out.join("report.json")).unwrap()
}

#[test]
fn manifest_argv_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let out = bin()
        .env("SEED", "11")
        .args(["trials", "--n", "6", "--activation", "tanh", "--epochs", "2000", "--out", a.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let m: RunManifest = read_json(&a.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.seed, 11);
    assert!(m.argv.windows(2).any(|w| w[0] == "--seed" && w[1] == "11"));
    let first = fs::read_to_string(a.join("report.json")).unwrap();
    let b = dir.path().join("b");
    assert_eq!(rerun(&a, &b), first);
}

#[test]
fn prune_writes_reduced_spec() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = run(&["prune", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(text.contains("removed"));
    let net = read_net_spec(&dir.path().join("pruned_net.json")).unwrap();
    let (_, again) = sparse_landscape::net::prune_useless(&net);
    assert!(again.removed_edges.is_empty());
}

#[test]
fn path_and_rank_commands() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = run(&["path", "--cond", "3", "--samples", "200", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let csv = fs::read_to_string(dir.path().join("path.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,loss"));
    assert_eq!(run(&["path", "--cond", "1"]).0, 0);
    assert_eq!(run(&["path", "--cond", "2"]).0, 2);
    let (code, text) = run(&["rank", "--n", "6", "--trials", "20", "--json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["full_rank"], 20);
}
