use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tpdcopod"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_train_score_explain_eval() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    let test = dir.path().join("test.csv");
    let model = dir.path().join("model.tpd");
    let scores = dir.path().join("scores.csv");
    let expl = dir.path().join("explain.csv");
    let records = dir.path().join("explain.jsonl");

    ok(&[
        "gen",
        "--out",
        p(&train),
        "--rows",
        "5000",
        "--anomaly-rate",
        "0",
        "--seed",
        "1",
        "--process-seed",
        "9",
    ]);
    ok(&[
        "gen",
        "--out",
        p(&test),
        "--rows",
        "5000",
        "--min-run",
        "300",
        "--max-run",
        "500",
        "--seed",
        "2",
        "--process-seed",
        "9",
    ]);
    ok(&["train", "--input", p(&train), "--model", p(&model)]);

    let stdout = ok(&[
        "score",
        "--model",
        p(&model),
        "--input",
        p(&test),
        "--out",
        p(&scores),
    ]);
    assert!(stdout.contains("scored 5000 rows"), "{stdout}");
    let text = std::fs::read_to_string(&scores).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(
        header.contains("score_discrete") && header.contains("final_label"),
        "{header}"
    );
    assert_eq!(lines.count(), 5000);

    ok(&[
        "explain",
        "--model",
        p(&model),
        "--input",
        p(&test),
        "--out",
        p(&expl),
        "--records",
        p(&records),
        "--rows",
        "0,1",
    ]);
    let jsonl = std::fs::read_to_string(&records).unwrap();
    // one record per row and detector
    assert_eq!(jsonl.lines().count(), 4);
    for line in jsonl.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(rec["sample"] == 0 || rec["sample"] == 1, "{rec}");
    }
    let columnar = std::fs::read_to_string(&expl).unwrap();
    assert!(
        columnar.starts_with("sample,detector,dimension"),
        "{columnar}"
    );

    let metrics: serde_json::Value =
        serde_json::from_str(&ok(&["eval", "--model", p(&model), "--input", p(&test)])).unwrap();
    assert!(metrics["f1"].as_f64().unwrap() > 0.8, "{metrics}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    let model = dir.path().join("model.tpd");
    ok(&[
        "gen",
        "--out",
        p(&train),
        "--rows",
        "500",
        "--anomaly-rate",
        "0",
    ]);
    ok(&["train", "--input", p(&train), "--model", p(&model)]);

    // flipped payload byte
    let mut bytes = std::fs::read(&model).unwrap();
    let last = bytes.len() - 5;
    bytes[last] ^= 0x20;
    let broken = dir.path().join("broken.tpd");
    std::fs::write(&broken, &bytes).unwrap();
    let out = dir.path().join("s.csv");
    let r = run(&[
        "score",
        "--model",
        p(&broken),
        "--input",
        p(&train),
        "--out",
        p(&out),
    ]);
    assert_eq!(r.status.code(), Some(3));

    // stream missing a trained column
    let text = std::fs::read_to_string(&train).unwrap();
    let narrow: String = text
        .lines()
        .map(|l| {
            let keep: Vec<&str> = l
                .split(',')
                .enumerate()
                .filter(|(j, _)| *j != 1)
                .map(|(_, c)| c)
                .collect();
            keep.join(",") + "\n"
        })
        .collect();
    let narrow_path = dir.path().join("narrow.csv");
    std::fs::write(&narrow_path, narrow).unwrap();
    let r = run(&[
        "score",
        "--model",
        p(&model),
        "--input",
        p(&narrow_path),
        "--out",
        p(&out),
    ]);
    assert_eq!(r.status.code(), Some(2));

    let r = run(&[
        "train",
        "--input",
        p(&train),
        "--model",
        p(&model),
        "--contamination",
        "0.9",
    ]);
    assert_eq!(r.status.code(), Some(2));

    let r = run(&[
        "train",
        "--input",
        p(&dir.path().join("absent.csv")),
        "--model",
        p(&model),
    ]);
    assert_eq!(r.status.code(), Some(1));
}
