use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ddg::checkpoint::Checkpoint;
use ddg::eval::LedgerRow;
use ddg::experiment::{ledger_csv, COMPARISON_HEADER};
use ddg::model::{ModelBundle, ModelDims};
use ddg::trainer::TrainConfig;

const SMALL: &str = r#"{
  "dataset": {"n_per_domain": 40, "image_size": 10, "glyph_classes": 5, "angles": [0, 30, 60]},
  "train": {"batch_size": 8, "epochs": 2, "s_dim": 4, "v_dim": 3, "hidden": 16},
  "eval": {"a_distance_samples": 20, "n_pairs": 50}
}"#;

fn ddg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddg"))
        .args(args)
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn error_json(out: &Output) -> serde_json::Value {
    let line = String::from_utf8_lossy(&out.stderr);
    let last = line.lines().last().expect("stderr line");
    serde_json::from_str(last).unwrap_or_else(|_| panic!("not JSON: {last}"))
}

fn setup(dir: &Path) {
    fs::write(dir.join("cfg.json"), SMALL).unwrap();
    ok(ddg(&[
        "gen-data",
        "--config",
        p(&dir.join("cfg.json")),
        "--out",
        p(&dir.join("data")),
    ]));
}

#[test]
fn gen_data_writes_manifest_and_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let data = dir.path().join("data");
    let manifest = fs::read_to_string(data.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 121);
    for d in 0..3 {
        assert!(data.join(format!("domain_{d:02}")).is_dir());
    }
    let resolved: serde_json::Value =
        serde_json::from_slice(&fs::read(data.join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!(resolved["config"]["dataset"]["n_per_domain"], 40);
    assert_eq!(resolved["config"]["train"]["lambda0"], 0.1);
}

#[test]
fn train_is_reproducible_and_eval_manipulate_report_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    let cfg = d.join("cfg.json");
    let data = d.join("data");
    for run in ["a", "b"] {
        ok(ddg(&[
            "train",
            "--config",
            p(&cfg),
            "--data",
            p(&data),
            "--holdout-domain",
            "2",
            "--out",
            p(&d.join(run)),
        ]));
    }
    for f in ["checkpoint.ddgc", "metrics.csv", "resolved_config.json"] {
        assert_eq!(
            fs::read(d.join("a").join(f)).unwrap(),
            fs::read(d.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let metrics = fs::read_to_string(d.join("a/metrics.csv")).unwrap();
    let resolved: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("a/resolved_config.json")).unwrap()).unwrap();
    let n_train = resolved["train_examples"].as_u64().unwrap();
    let steps = resolved["steps"].as_u64().unwrap();
    assert_eq!(steps, 2 * (n_train / 8));
    assert_eq!(metrics.lines().count() as u64, 1 + steps);
    let selected = resolved["selected_step"].as_u64().unwrap();
    assert!(selected > 0 && selected <= steps && selected % (n_train / 8) == 0);

    let ckpt = d.join("a/checkpoint.ddgc");
    ok(ddg(&[
        "eval",
        "--checkpoint",
        p(&ckpt),
        "--data",
        p(&data),
        "--holdout-domain",
        "2",
        "--out",
        p(&d.join("eval")),
        "--config",
        p(&cfg),
    ]));
    let report = fs::read_to_string(d.join("eval/report.txt")).unwrap();
    for key in [
        "holdout_acc=",
        "worst_domain=",
        "a_distance_raw=",
        "a_distance_semantic=",
        "constraint_sat_rate=",
    ] {
        assert!(report.contains(key), "{key} missing from\n{report}");
    }
    let ledger = fs::read_to_string(d.join("eval/ledger.csv")).unwrap();
    assert!(ledger.lines().nth(1).unwrap().starts_with("ddg-s0-h2,"));

    for mode in ["swap", "interp-v", "interp-s"] {
        let out = d.join(format!("m-{mode}"));
        ok(ddg(&[
            "manipulate",
            "--checkpoint",
            p(&ckpt),
            "--data",
            p(&data),
            "--mode",
            mode,
            "--out",
            p(&out),
            "--config",
            p(&cfg),
        ]));
        let pgms: Vec<String> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n.ends_with(".pgm"))
            .collect();
        assert_eq!(pgms.len(), 1);
        assert!(
            pgms[0].ends_with(&format!("_0_{selected}.pgm")),
            "{}",
            pgms[0]
        );
        let bytes = fs::read(out.join(&pgms[0])).unwrap();
        assert!(bytes.starts_with(b"P5\n"));
        assert!(out.join("resolved_config.json").exists());
    }

    ok(ddg(&[
        "report",
        "--runs",
        p(&d.join("eval")),
        "--out",
        p(&d.join("report")),
    ]));
    let cmp = fs::read_to_string(d.join("report/comparison.csv")).unwrap();
    assert_eq!(cmp.lines().next().unwrap(), COMPARISON_HEADER);
    assert!(cmp.lines().nth(1).unwrap().starts_with("2,ddg,1,"));
}

#[test]
fn untrained_checkpoint_scores_near_chance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = r#"{"dataset": {"n_per_domain": 500, "image_size": 10, "glyph_classes": 5, "angles": [0, 45]},
                  "eval": {"a_distance_samples": 20, "n_pairs": 20}}"#;
    fs::write(d.join("cfg.json"), cfg).unwrap();
    ok(ddg(&[
        "gen-data",
        "--config",
        p(&d.join("cfg.json")),
        "--out",
        p(&d.join("data")),
    ]));
    let dims = ModelDims {
        image_size: 10,
        classes: 5,
        s_dim: 16,
        v_dim: 8,
        hidden: 128,
    };
    let ckpt = Checkpoint {
        config: TrainConfig::default(),
        gamma: 1.0,
        lambda: 0.1,
        step: 0,
        model: ModelBundle::new(dims, 11).unwrap(),
    };
    ckpt.save(&d.join("c.ddgc")).unwrap();
    ok(ddg(&[
        "eval",
        "--checkpoint",
        p(&d.join("c.ddgc")),
        "--data",
        p(&d.join("data")),
        "--holdout-domain",
        "1",
        "--out",
        p(&d.join("e")),
        "--config",
        p(&d.join("cfg.json")),
    ]));
    let report = fs::read_to_string(d.join("e/report.txt")).unwrap();
    let acc: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("holdout_acc="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((acc - 0.2).abs() <= 0.05, "holdout accuracy {acc}");
}

#[test]
fn report_takes_medians_over_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let row = |mode: &str, seed: u64, holdout: usize, acc: f64, worst: f64| LedgerRow {
        run_id: format!("{mode}-{seed}-{holdout}"),
        mode: mode.into(),
        seed,
        holdout,
        avg_acc: acc,
        worst_acc: worst,
        a_dist_raw: 1.5 + seed as f64 * 0.1,
        a_dist_sem: 0.5,
        sat_rate: 0.9,
    };
    let runs = [
        row("erm", 0, 5, 0.90, 0.80),
        row("erm", 1, 5, 0.70, 0.60),
        row("erm", 2, 5, 0.80, 0.75),
        row("ddg+aug", 0, 5, 0.60, 0.50),
        row("ddg+aug", 1, 5, 0.64, 0.52),
    ];
    for (i, r) in runs.iter().enumerate() {
        let sub = d.join(format!("runs/nested/{i}"));
        fs::create_dir_all(&sub).unwrap();
        fs::write(
            sub.join("ledger.csv"),
            ledger_csv(std::slice::from_ref(r)).unwrap(),
        )
        .unwrap();
    }
    ok(ddg(&[
        "report",
        "--runs",
        p(&d.join("runs")),
        "--out",
        p(&d.join("out")),
    ]));
    let mut rd = csv::Reader::from_path(d.join("out/comparison.csv")).unwrap();
    let rows: Vec<Vec<String>> = rd
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][..3], ["5", "ddg+aug", "2"]);
    assert!((rows[0][3].parse::<f64>().unwrap() - 0.62).abs() < 1e-12);
    assert!((rows[0][4].parse::<f64>().unwrap() - 0.51).abs() < 1e-12);
    assert_eq!(&rows[1][..3], ["5", "erm", "3"]);
    assert_eq!(rows[1][3].parse::<f64>().unwrap(), 0.80);
    assert_eq!(rows[1][4].parse::<f64>().unwrap(), 0.75);
    assert!((rows[1][5].parse::<f64>().unwrap() - 1.6).abs() < 1e-12);
    let merged = fs::read_to_string(d.join("out/ledger.csv")).unwrap();
    assert_eq!(merged.lines().count(), 6);
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);

    fs::write(d.join("bad.json"), r#"{"train": {"learning_rate": 1}}"#).unwrap();
    let out = ddg(&[
        "gen-data",
        "--config",
        p(&d.join("bad.json")),
        "--out",
        p(&d.join("x")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["exit_code"], 1);

    let out = ddg(&["train", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));

    let out = ddg(&[
        "train",
        "--data",
        p(&d.join("nowhere")),
        "--holdout-domain",
        "0",
        "--out",
        p(&d.join("y")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["exit_code"], 2);

    let diverge = SMALL.replace(r#""batch_size": 8"#, r#""batch_size": 8, "eta1": 1e200"#);
    fs::write(d.join("diverge.json"), diverge).unwrap();
    let out = ddg(&[
        "train",
        "--config",
        p(&d.join("diverge.json")),
        "--data",
        p(&d.join("data")),
        "--holdout-domain",
        "0",
        "--out",
        p(&d.join("z")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let v = error_json(&out);
    assert_eq!(v["error"]["exit_code"], 3);
    assert!(v["error"]["message"].as_str().unwrap().contains("step"));

    let out = ddg(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}
