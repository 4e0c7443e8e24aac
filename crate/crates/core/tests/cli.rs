use std::path::Path;
use std::process::Command;

fn ssx(args: &[&str], cwd: &Path) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_ssx"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success(), "ssx {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn offline_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ssx(&["synth", "--out", "demo"], d);
    let out = ssx(&["ingest", "--signals", "demo/signals", "--frames", "demo/frames", "--out", "work"], d);
    assert!(out.contains("ingested 50 records (50 with signals), 0 failed"), "{out}");
    ssx(
        &[
            "describe", "--prompt", "4", "--backend", "fixture", "--fixture", "demo/video_descriptions.jsonl",
            "--catalog", "work/catalog.jsonl", "--out", "work/video.jsonl",
        ],
        d,
    );
    ssx(&["describe", "--source", "signal", "--catalog", "work/catalog.jsonl", "--out", "work/signal.jsonl"], d);
    ssx(&["index", "--source", "video", "--descriptions", "work/video.jsonl", "--index-dir", "idx"], d);
    ssx(&["index", "--source", "signal", "--descriptions", "work/signal.jsonl", "--index-dir", "idx"], d);
    assert!(d.join("idx/video-p4.ssx.jsonl").is_file());

    let json = ssx(
        &[
            "query", "--text", "Driving on a highway, an exit ramp is ahead.", "--top-n", "5", "--weights", "2,1",
            "--json", "--catalog", "work/catalog.jsonl", "--index-dir", "idx",
        ],
        d,
    );
    let resp: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(resp["results"].as_array().unwrap().len(), 5);
    assert_eq!(resp["results"][0]["record"], "000041");
    // frame URIs resolve from any working directory
    let uri = resp["results"][0]["frames"][0]["uri"].as_str().unwrap();
    assert!(Path::new(uri).is_absolute() && Path::new(uri).is_file(), "{uri}");

    let table = ssx(&["query", "--text", "tunnel", "--top-n", "3", "--catalog", "work/catalog.jsonl", "--index-dir", "idx"], d);
    assert!(table.lines().nth(1).unwrap().contains("000011"), "{table}");
    assert!(table.contains("RLGap"));
}

#[test]
fn metrics_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.txt"), "0.2 0.4\n0.5, 0.9\n").unwrap();
    let out = ssx(&["metrics", "--series", "s.txt"], dir.path());
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["LGap"], 0.4);
    assert_eq!(report["verdict"], "InsufficientData");

    let table = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/table3.csv");
    let out = ssx(&["metrics", "--table3", table.to_str().unwrap()], dir.path());
    assert_eq!(out.lines().count(), 54);
    assert!(!out.contains("MISMATCH"));
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"verdict": {"min_records": 2, "variance_floor": 0.0}}"#).unwrap();
    std::fs::write(dir.path().join("s.txt"), "0.05 0.2 0.5 0.9").unwrap();
    let out = ssx(&["--config", "c.json", "metrics", "--series", "s.txt"], dir.path());
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["verdict"], "Failed");
    assert_eq!(report["reason"], "moderate_clusters");
}
