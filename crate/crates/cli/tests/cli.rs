use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn feae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feae"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) -> PathBuf {
    let data = dir.join("flows.csv");
    let out = feae(&[
        "synth",
        "--out",
        s(&data),
        "--flows",
        "800",
        "--hosts",
        "60",
        "--attack-fraction",
        "0.05",
        "--seed",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    data
}

const QUICK: &[&str] = &[
    "--sample-frac",
    "1.0",
    "--hidden",
    "16",
    "--mlp-hidden",
    "16",
    "--encoder-epochs-max",
    "20",
    "--decoder-epochs-max",
    "50",
];

#[test]
fn train_eval_embed_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let (model, metrics, emb) = (
        dir.path().join("m.json"),
        dir.path().join("x.json"),
        dir.path().join("e.csv"),
    );
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--model",
        s(&model),
        "--metrics",
        s(&metrics),
    ];
    args.extend(["--embeddings", s(&emb), "--seed", "4", "--timing"]);
    args.extend(QUICK);
    let out = feae(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    for key in [
        "benign",
        "attack",
        "macro_f1",
        "attack_precision",
        "tp",
        "fp",
        "tn",
        "fn",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert!(report["runtime_seconds"].as_f64().unwrap() > 0.0);
    assert!(std::fs::read_to_string(&emb).unwrap().starts_with("h0,"));

    let eval_out = dir.path().join("eval.json");
    let out = feae(&[
        "eval",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--metrics",
        s(&eval_out),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&eval_out).unwrap()).unwrap();
    let total: u64 = ["tp", "fp", "tn", "fn"]
        .iter()
        .map(|k| report[k].as_u64().unwrap())
        .sum();
    assert_eq!(total, 800);
    assert!(report["runtime_seconds"].is_null());

    let all = dir.path().join("all.csv");
    let out = feae(&[
        "embed",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--out",
        s(&all),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(std::fs::read_to_string(&all).unwrap().lines().count(), 801);
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "k = 2\nssl_mode = \"dgi_only\"\n").unwrap();
    let table = dir.path().join("sweep.json");
    let mut args = vec![
        "sweep",
        "--data",
        s(&data),
        "--ks",
        "0,2",
        "--seeds",
        "1",
        "--out",
        s(&table),
    ];
    args.extend(["--config", s(&cfg)]);
    args.extend(QUICK);
    let out = feae(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&table).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("k\tmacro_f1"));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let (m, x) = (dir.path().join("m.json"), dir.path().join("x.json"));
    let base = [
        "train",
        "--data",
        s(&data),
        "--model",
        s(&m),
        "--metrics",
        s(&x),
    ];

    let no_seed = feae(&base);
    assert_eq!(no_seed.status.code(), Some(2));

    let mut bad_key = base.to_vec();
    bad_key.extend(["--seed", "1", "--no-such-field", "3"]);
    assert_eq!(feae(&bad_key).status.code(), Some(2));

    let mut bad_value = base.to_vec();
    bad_value.extend(["--seed", "1", "--alpha", "-2"]);
    assert_eq!(feae(&bad_value).status.code(), Some(2));

    let missing = dir.path().join("absent.csv");
    let out = feae(&[
        "train",
        "--data",
        s(&missing),
        "--model",
        s(&m),
        "--metrics",
        s(&x),
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3));

    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "a,b\n1,2\n").unwrap();
    let out = feae(&[
        "train",
        "--data",
        s(&broken),
        "--model",
        s(&m),
        "--metrics",
        s(&x),
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3));

    std::fs::write(&m, "{\"format_version\": 99}").unwrap();
    let out = feae(&[
        "eval",
        "--model",
        s(&m),
        "--data",
        s(&data),
        "--metrics",
        s(&x),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
