use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dfan::data::{load_semantic_matrix, read_feature_file, read_split, Role};

fn dfan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfan")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> Output {
    dfan(&[&["synth", "--out", s(dir)][..], extra].concat())
}

fn json_lines(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn synth_writes_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = synth(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let listed: Vec<String> = String::from_utf8_lossy(&out.stdout).lines().map(str::to_string).collect();
    assert_eq!(listed.len(), 6);
    assert!(listed.iter().all(|p| Path::new(p).is_file()));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 6);

    let sm = load_semantic_matrix(&dir.path().join("semantic.bin")).unwrap();
    let split = read_split(&dir.path().join("split.json")).unwrap();
    assert_eq!((sm.num_classes(), sm.num_attributes()), (15, 20));
    assert_eq!((split.seen.len(), split.unseen.len()), (10, 5));
    assert_eq!(read_feature_file(&dir.path().join("train.dfz"), Role::Train).unwrap().len(), 10 * 24);
    assert_eq!(read_feature_file(&dir.path().join("test_seen.dfz"), Role::TestSeen).unwrap().len(), 10 * 6);
    assert_eq!(read_feature_file(&dir.path().join("test_unseen.dfz"), Role::TestUnseen).unwrap().len(), 5 * 30);
}

#[test]
fn invalid_synth_spec_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out");
    let out = synth(&target, &["--attributes", "40", "--dim", "32"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!target.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));
}

#[test]
fn one_sample_one_epoch_takes_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    let spec = ["--seen-classes", "1", "--unseen-classes", "1", "--samples-per-class", "1"];
    assert_eq!(synth(&data, &spec).status.code(), Some(0));
    let ckpt = dir.path().join("c.bin");
    for batch in ["1", "32"] {
        let out = dfan(&[
            "train", "--data-dir", s(&data), "--checkpoint", s(&ckpt), "--epochs", "1", "--batch", batch,
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let log = json_lines(&out);
        assert_eq!(log.len(), 1);
        assert_eq!(log[0]["steps"], 1);
        assert_eq!(log[0]["epoch"], 1);
    }
    assert!(ckpt.is_file());
}

#[test]
fn lambda_zero_logs_cos_outside_total() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    assert_eq!(synth(&data, &["--samples-per-class", "5"]).status.code(), Some(0));
    let ckpt = dir.path().join("c.bin");
    let out = dfan(&[
        "train", "--data-dir", s(&data), "--checkpoint", s(&ckpt), "--epochs", "2", "--lambda", "0", "--variant",
        "cls+attr",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for line in json_lines(&out) {
        let f = |k: &str| line[k].as_f64().unwrap();
        assert!(f("cos") > 0.0);
        assert!((f("total") - f("attr") - f("cls")).abs() < 1e-6 * f("total"));
    }
}

#[test]
fn full_variant_rejects_zero_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfan(&["train", "--data-dir", s(dir.path()), "--checkpoint", "c", "--lambda", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    assert_eq!(synth(&data, &["--samples-per-class", "6"]).status.code(), Some(0));
    let missing = dfan(&["eval", "--data-dir", s(&data), "--checkpoint", s(&dir.path().join("none.bin"))]);
    assert_eq!(missing.status.code(), Some(3));

    let ckpt = dir.path().join("c.bin");
    let train = ["train", "--data-dir", s(&data), "--checkpoint", s(&ckpt), "--epochs", "3"];
    assert_eq!(dfan(&train).status.code(), Some(0));
    let out = dfan(&["eval", "--data-dir", s(&data), "--checkpoint", s(&ckpt), "--gamma", "0.25", "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = &json_lines(&out)[0];
    assert_eq!(report["config"]["gamma"], 0.25);
    assert_eq!(report["config"]["beta1"], 0.5);
    assert_eq!(report["config"]["lambda"], 0.1);
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["per_class"].as_object().unwrap().len(), 15);

    let no_split = dfan(&["eval", "--checkpoint", s(&ckpt), "--semantic", s(&data.join("semantic.bin"))]);
    assert_eq!(no_split.status.code(), Some(2));
    let bad_beta = dfan(&["eval", "--data-dir", s(&data), "--checkpoint", s(&ckpt), "--beta1", "-1"]);
    assert_eq!(bad_beta.status.code(), Some(2));
    let corrupt = dir.path().join("bad.bin");
    fs::write(&corrupt, b"nonsense").unwrap();
    let bad_ckpt = dfan(&["eval", "--data-dir", s(&data), "--checkpoint", s(&corrupt)]);
    assert_eq!(bad_ckpt.status.code(), Some(3));
}

#[test]
fn config_file_feeds_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    assert_eq!(synth(&data, &["--samples-per-class", "4"]).status.code(), Some(0));
    let cfg = dir.path().join("run.json");
    let ckpt = dir.path().join("c.bin");
    let json = serde_json::json!({
        "data-dir": data,
        "checkpoint": ckpt,
        "epochs": 4,
        "normalize-input": true,
        "attention-axis": "attribute",
    });
    fs::write(&cfg, json.to_string()).unwrap();
    let out = dfan(&["train", "--config", s(&cfg), "--epochs", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_lines(&out).len(), 2);
    let eval = dfan(&["eval", "--config", s(&cfg)]);
    assert_eq!(eval.status.code(), Some(0), "{}", String::from_utf8_lossy(&eval.stderr));

    fs::write(&cfg, "{not json").unwrap();
    assert_eq!(dfan(&["train", "--config", s(&cfg)]).status.code(), Some(2));
    assert_eq!(dfan(&["train", "--config", s(&dir.path().join("absent.json"))]).status.code(), Some(3));
}

#[test]
fn gradcheck_exit_codes() {
    let ok = dfan(&["gradcheck"]);
    assert_eq!(ok.status.code(), Some(0));
    let no_cos = dfan(&["gradcheck", "--lambda", "0"]);
    assert_eq!(no_cos.status.code(), Some(0));
    let text = String::from_utf8_lossy(&no_cos.stdout).into_owned();
    for group in ["w_local", "w_global", "phi.w1", "phi.b3"] {
        assert!(text.lines().any(|l| l.starts_with(group) && l.ends_with("PASS")), "{group}\n{text}");
    }

    let bad = dfan(&["gradcheck", "--corrupt", "w_global"]);
    assert_eq!(bad.status.code(), Some(1));
    let text = String::from_utf8_lossy(&bad.stdout).into_owned();
    assert!(text.contains("failing groups: w_global"), "{text}");
    assert_eq!(dfan(&["gradcheck", "--dim", "0"]).status.code(), Some(2));
}

#[test]
fn ablate_and_sweep_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    assert_eq!(synth(&data, &["--samples-per-class", "6"]).status.code(), Some(0));
    let base = ["--data-dir", s(&data), "--epochs", "3"];

    let unknown = dfan(&[&["ablate", "--variants", "full,bogus"][..], &base].concat());
    assert_eq!(unknown.status.code(), Some(2));
    let unwritable = dfan(&[&["ablate", "--table", "module", "--out", "/nonexistent/dir/t.csv"][..], &base].concat());
    assert_eq!(unwritable.status.code(), Some(3));

    let table = dir.path().join("loss.csv");
    let out = dfan(&[&["ablate", "--table", "loss", "--out", s(&table)][..], &base].concat());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(&table).unwrap();
    let names: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(names, ["cls", "attr", "cls+attr", "all"]);

    let ckpt = dir.path().join("c.bin");
    assert_eq!(dfan(&[&["train", "--checkpoint", s(&ckpt)][..], &base].concat()).status.code(), Some(0));
    let sweep = dfan(&["sweep", "--data-dir", s(&data), "--checkpoint", s(&ckpt), "--axis", "gamma", "--grid", "0,1e9"]);
    assert_eq!(sweep.status.code(), Some(0), "{}", String::from_utf8_lossy(&sweep.stderr));
    let text = String::from_utf8_lossy(&sweep.stdout).into_owned();
    let col = |i: usize| -> Vec<f64> { text.lines().skip(1).map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect() };
    let (u, acc) = (col(1), col(4));
    assert_eq!(u.len(), 2);
    assert!(u[1] >= u[0]);
    // every seen score is pushed below every unseen one
    assert_eq!(u[1], acc[1]);

    let beta = dfan(&["sweep", "--data-dir", s(&data), "--checkpoint", s(&ckpt), "--axis", "beta"]);
    assert_eq!(String::from_utf8_lossy(&beta.stdout).lines().count(), 12);
    let bad = dfan(&["sweep", "--data-dir", s(&data), "--checkpoint", s(&ckpt), "--axis", "beta", "--grid", "1.5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(dfan(&["train", "--no-such-flag"]).status.code(), Some(2));
}
