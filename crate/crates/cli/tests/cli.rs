use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hgp_cli::export::LevelExport;

fn hgpsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hgpsl"))
        .args(args)
        .env_remove("HGPSL_CACHE")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn data_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic run that trains in well under a second per seed.
fn tiny_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    let body = format!(
        "dataset = synthetic\n\
         synth_count = 24\n\
         synth_min_nodes = 8\n\
         synth_max_nodes = 12\n\
         num_levels = 2\n\
         hidden_dim = 8\n\
         mlp_dims = 8\n\
         max_epochs = 3\n\
         batch_size = 8\n\
         seeds = 0, 1\n\
         output_dir = {}\n{extra}",
        dir.join("out").display()
    );
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn fetch_uses_populated_cache() {
    let out = hgpsl(&["fetch", "MUTAG", "--cache-dir", s(&data_root())]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("cache hit"), "{}", stdout(&out));
}

#[test]
fn fetch_rejects_unknown_name() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hgpsl(&["fetch", "NOPE", "--cache-dir", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fetch_transport_failure_is_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hgpsl(&[
        "fetch",
        "MUTAG",
        "--cache-dir",
        s(tmp.path()),
        "--base-url",
        "http://127.0.0.1:9",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("transport"));
}

#[test]
fn cache_env_is_honoured() {
    let out = Command::new(env!("CARGO_BIN_EXE_hgpsl"))
        .args(["stats", "MUTAG"])
        .env("HGPSL_CACHE", data_root())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("graphs               188"));
}

#[test]
fn stats_on_directory() {
    let out = hgpsl(&["stats", s(&data_root().join("MUTAG"))]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for line in [
        "graphs               188",
        "nodes                3371",
        "avg nodes            17.93",
        "avg edges            19.79",
        "classes              2",
    ] {
        assert!(text.contains(line), "missing `{line}` in\n{text}");
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(hgpsl(&[]).status.code(), Some(2));
    assert_eq!(hgpsl(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(hgpsl(&["train"]).status.code(), Some(2));
    assert_eq!(hgpsl(&["train", "/no/such/config"]).status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), "");
    for bad in [
        "bogus_key=1",
        "pooling_ratio=0",
        "variant=xl",
        "lambda=-1",
        "seeds=",
    ] {
        let out = hgpsl(&["train", s(&cfg), "--set", bad]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
    }
    let bad_file = tmp.path().join("bad.cfg");
    fs::write(&bad_file, "hidden_dim 8\n").unwrap();
    assert_eq!(hgpsl(&["gradcheck", s(&bad_file)]).status.code(), Some(2));
}

#[test]
fn train_writes_artifacts_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), "");
    let out = hgpsl(&["train", s(&cfg)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("over 2 runs"));

    let dir = tmp.path().join("out");
    for f in [
        "summary.csv",
        "metrics_seed0.csv",
        "metrics_seed1.csv",
        "model_seed0.ckpt",
        "model_seed1.ckpt",
    ] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let metrics = fs::read_to_string(dir.join("metrics_seed0.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next(),
        Some("epoch,train_loss,valid_loss,valid_acc,seconds")
    );
    assert_eq!(lines.count(), 3);

    let summary = fs::read(dir.join("summary.csv")).unwrap();
    let text = String::from_utf8(summary.clone()).unwrap();
    assert!(text.starts_with("seed,test_acc,best_epoch\n0,"));

    let again = hgpsl(&["train", s(&cfg)]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(fs::read(dir.join("summary.csv")).unwrap(), summary);
}

#[test]
fn train_on_tu_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("mutag.cfg");
    fs::write(
        &cfg,
        format!(
            "dataset = MUTAG\ndata_dir = {}\nnum_levels = 2\nhidden_dim = 8\nmlp_dims = 8\n\
             max_epochs = 2\nseeds = 3\noutput_dir = {}\n",
            data_root().join("MUTAG").display(),
            tmp.path().join("out").display()
        ),
    )
    .unwrap();
    let out = hgpsl(&["train", s(&cfg)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("MUTAG: "));
}

#[test]
fn every_variant_trains() {
    for variant in ["full", "nsl", "hop", "den"] {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny_config(tmp.path(), &format!("variant = {variant}\nseeds = 0\n"));
        let out = hgpsl(&["train", s(&cfg)]);
        assert_eq!(out.status.code(), Some(0), "{variant}");
    }
}

#[test]
fn gradcheck_passes_with_defaults_and_small_model() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.cfg");
    fs::write(&empty, "").unwrap();
    let out = hgpsl(&["gradcheck", s(&empty)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains(": ok"));

    for seed in 0..4 {
        let seed = format!("gradcheck_seed={seed}");
        let out = hgpsl(&[
            "gradcheck",
            s(&empty),
            "--set",
            "num_levels=2",
            "--set",
            "hidden_dim=4",
            "--set",
            "mlp_dims=4",
            "--set",
            "gradcheck_max_entries=0",
            "--set",
            &seed,
        ]);
        assert_eq!(out.status.code(), Some(0), "{seed}: {}", stdout(&out));
    }
}

fn trained(tmp: &Path, extra: &str) -> (PathBuf, PathBuf) {
    let cfg = tiny_config(tmp, &format!("seeds = 0\n{extra}"));
    assert_eq!(hgpsl(&["train", s(&cfg)]).status.code(), Some(0));
    (cfg, tmp.join("out/model_seed0.ckpt"))
}

#[test]
fn pool_export_dot_parses() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, ckpt) = trained(tmp.path(), "");
    let out = hgpsl(&[
        "pool-export",
        s(&cfg),
        "--checkpoint",
        s(&ckpt),
        "--graph",
        "1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let dir = tmp.path().join("out/export_graph1");
    let mut previous: Option<usize> = None;
    for level in 1..=2 {
        let ast = dot_parser::ast::Graph::from_file(dir.join(format!("level{level}.dot"))).unwrap();
        let graph = dot_parser::canonical::Graph::from(ast);
        assert!(graph.is_digraph);
        let n = graph.nodes.set.len();
        if let Some(p) = previous {
            assert_eq!(n, (0.8 * p as f64).ceil() as usize);
        }
        previous = Some(n);
        let mut sums = std::collections::HashMap::<String, f64>::new();
        for e in &graph.edges.set {
            assert!(graph.nodes.set.contains_key(&e.from));
            let w: f64 = e
                .attr
                .elems
                .iter()
                .find(|(k, _)| k == "weight")
                .map(|(_, v)| {
                    v.trim_matches('"')
                        .parse()
                        .unwrap_or_else(|_| panic!("weight `{v}`"))
                })
                .expect("weight attribute");
            *sums.entry(e.from.clone()).or_default() += w;
        }
        assert_eq!(sums.len(), n);
        for (node, total) in sums {
            assert!(
                (total - 1.0).abs() < 1e-9,
                "node {node} row sums to {total}"
            );
        }
    }
}

#[test]
fn pool_export_json_and_ratio_one() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, ckpt) = trained(tmp.path(), "pooling_ratio = 1\n");
    let dest = tmp.path().join("json");
    let out = hgpsl(&[
        "pool-export",
        s(&cfg),
        "--checkpoint",
        s(&ckpt),
        "--graph",
        "0",
        "--format",
        "json",
        "--out",
        s(&dest),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let level: LevelExport =
        serde_json::from_str(&fs::read_to_string(dest.join("level2.json")).unwrap()).unwrap();
    let first: LevelExport =
        serde_json::from_str(&fs::read_to_string(dest.join("level1.json")).unwrap()).unwrap();
    assert_eq!(level.nodes, first.nodes);
    assert_eq!(level.nodes, (0..level.nodes.len()).collect::<Vec<_>>());
}

#[test]
fn pool_export_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, ckpt) = trained(tmp.path(), "");
    let base = ["pool-export", s(&cfg), "--checkpoint", s(&ckpt)];

    let out = hgpsl(&[&base[..], &["--graph", "999"]].concat());
    assert_eq!(out.status.code(), Some(2));
    let out = hgpsl(&[&base[..], &["--graph", "0", "--format", "svg"]].concat());
    assert_eq!(out.status.code(), Some(2));
    let out = hgpsl(&[&base[..], &["--graph", "0", "--set", "hidden_dim=16"]].concat());
    assert_eq!(out.status.code(), Some(2), "checkpoint shape mismatch");

    let garbage = tmp.path().join("garbage.ckpt");
    fs::write(&garbage, "not a checkpoint").unwrap();
    let out = hgpsl(&[
        "pool-export",
        s(&cfg),
        "--checkpoint",
        s(&garbage),
        "--graph",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
