use std::path::Path;
use std::process::{Command, Output};

fn graftsurv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graftsurv")).current_dir(dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn synth_ingest_train_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&graftsurv(dir, &["--seed", "3", "synth", "--output", "raw.csv", "--n-records", "800"])), 0);
    let out = graftsurv(dir, &["ingest", "--input", "raw.csv", "--output", "clean.csv", "--attrition", "attrition.txt"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let log = std::fs::read_to_string(dir.join("attrition.txt")).unwrap();
    assert!(log.starts_with("input rows: 800"), "{log}");

    let out = graftsurv(dir, &["encode", "--input", "clean.csv", "--output", "x.csv", "--feature-set", "mm_abdr", "--post", "--plan", "plan.json"]);
    assert_eq!(code(&out), 0);
    let header = std::fs::read_to_string(dir.join("x.csv")).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header.split(',').count(), 1 + 23 + 3 + 6 + 2);
    assert!(dir.join("plan.json").exists());

    for model in ["coxnet", "rsf", "gb"] {
        let out = graftsurv(
            dir,
            &["--seed", "1", "train", "--input", "clean.csv", "--output", "m.json", "--model", model, "--feature-set", "mm_total", "--trees", "20"],
        );
        assert_eq!(code(&out), 0, "{model}: {}", String::from_utf8_lossy(&out.stderr));
        let out = graftsurv(dir, &["eval", "--model", "m.json", "--input", "clean.csv"]);
        assert_eq!(code(&out), 0);
        let text = stdout(&out);
        let c: f64 = text.lines().find_map(|l| l.strip_prefix("c_index\t")).unwrap().parse().unwrap();
        assert!(c > 0.5 && c <= 1.0, "{model}: {text}");
        assert!(text.contains("mean_auc\t"));
    }
}

#[test]
fn experiment_and_report_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("run.cfg"), "# small run\nn_splits = 2\nrsf_trees = 5\nrsf_depths = 3\ngb_trees = 5\ngb_depths = 1\ncoxnet_lambda_count = 1\ncoxnet_r_count = 1\n").unwrap();
    assert_eq!(code(&graftsurv(dir, &["--seed", "5", "synth", "--output", "c.csv", "--n-records", "500"])), 0);
    let out = graftsurv(dir, &["--config", "run.cfg", "experiment", "--input", "c.csv", "--out-dir", "out", "--feature-sets", "basic,mm_total"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("### C-index"));
    for f in ["detail.csv", "summary.csv", "splits.csv", "summary.md", "report.json"] {
        assert!(dir.join("out").join(f).exists(), "{f}");
    }
    let out = graftsurv(dir, &["report", "--input", "out/report.json", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), std::fs::read_to_string(dir.join("out/summary.csv")).unwrap());

    let out = graftsurv(dir, &["--config", "run.cfg", "target-enc-compare", "--input", "c.csv", "--out-dir", "te", "--n-splits", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.join("te/summary.csv")).unwrap();
    assert!(summary.contains("types_target_reg") && summary.contains("types_target_cls20"));
    assert!(summary.lines().next().unwrap().starts_with("feature_set,rsf_c_index"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&graftsurv(dir, &["--help"])), 0);
    assert_eq!(code(&graftsurv(dir, &["--version"])), 0);
    assert_eq!(code(&graftsurv(dir, &["frobnicate"])), 1);
    assert_eq!(code(&graftsurv(dir, &["train", "--input", "x.csv", "--output", "m.json", "--model", "svm"])), 1);
    assert_eq!(code(&graftsurv(dir, &["eval", "--model", "m.json", "--input", "missing.csv"])), 2);

    std::fs::write(dir.join("bad.cfg"), "n_split = 3\n").unwrap();
    assert_eq!(code(&graftsurv(dir, &["--config", "bad.cfg", "synth", "--output", "s.csv"])), 1);

    std::fs::write(dir.join("bad.csv"), "id,foo\n1,2\n").unwrap();
    assert_eq!(code(&graftsurv(dir, &["ingest", "--input", "bad.csv", "--output", "o.csv"])), 2);

    // an all-censored cohort cannot be fitted
    assert_eq!(code(&graftsurv(dir, &["synth", "--output", "s.csv", "--n-records", "200"])), 0);
    let text = std::fs::read_to_string(dir.join("s.csv")).unwrap();
    let censored: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 0 { format!("{l}\n") } else { format!("{}0\n", &l[..l.len() - 1]) })
        .collect();
    std::fs::write(dir.join("censored.csv"), censored).unwrap();
    let out = graftsurv(dir, &["train", "--input", "censored.csv", "--output", "m.json", "--model", "coxnet"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}
