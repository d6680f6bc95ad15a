use std::path::{Path, PathBuf};

use depthrank::cli::run;
use depthrank::trainer::write_params;
use depthrank::ScorerParams;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn depthrank(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("depthrank").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn gen(dir: &Path, name: &str, dim: &str) -> String {
    let out = path(dir, name);
    let r = depthrank(&[
        "gen-data",
        "--n-samples",
        "20",
        "--items",
        "15",
        "--dim",
        dim,
        "--seed",
        "5",
        "--out",
        &out,
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    out
}

fn value<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
        .unwrap_or_else(|| panic!("missing {key} in\n{report}"))
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "d.jsonl");
    let r = depthrank(&[
        "gen-data",
        "--n-samples",
        "3",
        "--items",
        "0",
        "--seed",
        "1",
        "--out",
        &out,
    ]);
    assert_eq!(r.code, 2);
    let r = depthrank(&["gen-data", "--n-samples", "3", "--out", &out]);
    assert_eq!(r.code, 2, "a missing seed is a usage error");
    assert!(r.err.contains("--seed"));

    let data = gen(dir.path(), "d.jsonl", "4");
    let p = path(dir.path(), "p.jsonl");
    let r = depthrank(&[
        "train",
        "--data",
        &data,
        "--loss",
        "nonsense",
        "--seed",
        "1",
        "--out-params",
        &p,
    ]);
    assert_eq!(r.code, 2);
    for name in ["pairwise", "listnet", "listmle", "weighted-listmle"] {
        assert!(r.err.contains(name), "valid losses listed: {}", r.err);
    }
    assert_eq!(depthrank(&["frobnicate"]).code, 2);
}

#[test]
fn missing_file_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let p = path(dir.path(), "p.jsonl");
    let r = depthrank(&[
        "train",
        "--data",
        &path(dir.path(), "absent"),
        "--loss",
        "listmle",
        "--seed",
        "1",
        "--out-params",
        &p,
    ]);
    assert_eq!(r.code, 1);
}

#[test]
fn train_and_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.jsonl", "4");
    let p = path(dir.path(), "p.jsonl");
    let r = depthrank(&[
        "train",
        "--data",
        &data,
        "--loss",
        "pairwise",
        "--pairs",
        "3000",
        "--epochs",
        "3",
        "--seed",
        "2",
        "--out-params",
        &p,
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(value(&r.out, "status"), "ok");
    assert_eq!(value(&r.out, "config.pairs"), "3000");

    let r = depthrank(&[
        "train",
        "--data",
        &data,
        "--loss",
        "weighted-listmle",
        "--epochs",
        "30",
        "--seed",
        "2",
        "--out-params",
        &p,
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let whdr: f64 = value(&r.out, "eval.whdr").parse().unwrap();
    assert!(whdr < 0.05, "{whdr}");

    let e = depthrank(&["eval", "--params", &p, "--data", &data]);
    assert_eq!(e.code, 0, "{}", e.err);
    assert_eq!(value(&e.out, "format"), "depthrank-report");
    assert_eq!(value(&e.out, "command"), "eval");
    assert_eq!(value(&e.out, "eval.degenerate_ties"), "false");
}

#[test]
fn oracle_params_score_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "d.jsonl");
    // Noiseless linear data is ordered exactly by the generator weights.
    let r = depthrank(&[
        "gen-data",
        "--n-samples",
        "30",
        "--items",
        "12",
        "--dim",
        "3",
        "--seed",
        "9",
        "--out",
        &data,
    ]);
    assert_eq!(r.code, 0);
    let ds = depthrank::data::read_dataset(&data).unwrap();
    let spec = ds.meta.generator.clone().unwrap();
    let model = depthrank::data::generator_model(&spec).unwrap();
    let params = ScorerParams::linear(model.weights.clone(), 0.0).unwrap();
    let p = path(dir.path(), "oracle.jsonl");
    write_params(&params, &p).unwrap();
    let e = depthrank(&["eval", "--params", &p, "--data", &data]);
    assert_eq!(e.code, 0, "{}", e.err);
    assert_eq!(value(&e.out, "eval.whdr"), "0");
    assert_eq!(value(&e.out, "eval.map"), "1");
    assert_eq!(value(&e.out, "eval.ndcg"), "1");
}

#[test]
fn zero_params_flag_degenerate_ties() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.jsonl", "4");
    let p = path(dir.path(), "zero.jsonl");
    write_params(&ScorerParams::linear(vec![0.0; 4], 0.0).unwrap(), &p).unwrap();
    let e = depthrank(&["eval", "--params", &p, "--data", &data]);
    assert_eq!(e.code, 0);
    assert_eq!(value(&e.out, "eval.degenerate_ties"), "true");
    assert_eq!(value(&e.out, "eval.tied_prediction_samples"), "20");
    assert!(e.err.contains("all-tied"));
}

#[test]
fn dimension_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.jsonl", "4");
    let p = path(dir.path(), "p.jsonl");
    write_params(&ScorerParams::linear(vec![1.0; 3], 0.0).unwrap(), &p).unwrap();
    let e = depthrank(&["eval", "--params", &p, "--data", &data]);
    assert_eq!(e.code, 2);
    assert!(e.err.contains("expects 3 features"), "{}", e.err);
}

#[test]
fn compare_prints_side_by_side_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.jsonl", "2");
    let a: PathBuf = dir.path().join("pairwise.jsonl");
    let b: PathBuf = dir.path().join("weighted.jsonl");
    write_params(&ScorerParams::linear(vec![0.0, 0.0], 0.0).unwrap(), &a).unwrap();
    write_params(&ScorerParams::linear(vec![0.0, 0.0], 0.0).unwrap(), &b).unwrap();
    let e = depthrank(&[
        "eval",
        "--params",
        a.to_str().unwrap(),
        "--compare",
        b.to_str().unwrap(),
        "--data",
        &data,
        "--format",
        "table",
    ]);
    assert_eq!(e.code, 0, "{}", e.err);
    let lines: Vec<&str> = e.out.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[1], "| metric | pairwise | weighted |");
    assert!(lines[3].starts_with("| WHDR   |"));
    assert!(lines[4].starts_with("| MAP    |"));
    assert!(lines[5].starts_with("| NDCG   |"));

    let kv = depthrank(&[
        "eval",
        "--params",
        a.to_str().unwrap(),
        "--compare",
        b.to_str().unwrap(),
        "--data",
        &data,
    ]);
    assert_eq!(value(&kv.out, "eval.map"), value(&kv.out, "compare.map"));
}

#[test]
fn gradcheck_flags() {
    let r = depthrank(&["gradcheck", "--instances", "5", "--max-items", "10"]);
    assert_eq!(r.code, 0, "{}{}", r.out, r.err);
    assert_eq!(r.out.lines().count(), 9);

    let r = depthrank(&["gradcheck", "--instances", "3", "--max-items", "8", "--tol", "0"]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("pairwise/linear"), "{}", r.err);

    let r = depthrank(&["gradcheck", "--instances", "3", "--cases", "pairwise"]);
    assert_eq!(r.code, 0);
    let rows: Vec<&str> = r.out.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|l| l.starts_with("pairwise/")));
}

#[test]
fn divergence_exits_3_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.jsonl", "4");
    let p = path(dir.path(), "p.jsonl");
    let r = depthrank(&[
        "train",
        "--data",
        &data,
        "--loss",
        "pairwise",
        "--family",
        "mlp",
        "--hidden",
        "4",
        "--gt-tie",
        "1e9",
        "--lr",
        "1e6",
        "--batch",
        "1",
        "--epochs",
        "50",
        "--seed",
        "1",
        "--out-params",
        &p,
    ]);
    assert_eq!(r.code, 3, "{}{}", r.out, r.err);
    assert_eq!(value(&r.out, "status"), "diverged");
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let once = || {
        let data = gen(d, "d.jsonl", "3");
        let p = path(d, "p.jsonl");
        let rep = path(d, "r.txt");
        let r = depthrank(&[
            "train",
            "--data",
            &data,
            "--loss",
            "listnet",
            "--epochs",
            "4",
            "--seed",
            "8",
            "--out-params",
            &p,
            "--out-report",
            &rep,
        ]);
        assert_eq!(r.code, 0);
        [data, p, rep].map(|f| std::fs::read(f).unwrap())
    };
    assert_eq!(once(), once());
}
