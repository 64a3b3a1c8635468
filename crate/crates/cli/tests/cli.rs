use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SUBCOMMANDS: [&str; 7] = [
    "ingest",
    "featurize",
    "train",
    "evaluate",
    "experiment",
    "bench-opt",
    "synth",
];

const SMALL_CONFIG: &str = "\
# desk-sized settings for tests
max_terms = 64
rank = 8
steps = 2
hidden = 1
param_bound = 5
budget = 2
budget_scale = 5
fractions = 0.5, 0.9   # two columns
budgets = 1, 2
methods = passer, random
";

fn plrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plrec"))
        .args(args)
        .output()
        .expect("run plrec")
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/reviews_200.jsonl")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.cfg");
    fs::write(&path, SMALL_CONFIG).unwrap();
    path
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = plrec(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(
        plrec(&["bench-opt", "--no-such-flag"]).status.code(),
        Some(2)
    );
    assert_eq!(plrec(&[]).status.code(), Some(2));
}

#[test]
fn help_everywhere() {
    let out = plrec(&["--help"]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in SUBCOMMANDS {
        assert!(text.contains(sub), "{sub} missing from top-level help");
    }
    for sub in SUBCOMMANDS {
        let out = plrec(&[sub, "--help"]);
        assert_ok(&out);
        let text = String::from_utf8_lossy(&out.stdout);
        for flag in ["--config", "--seed", "--set", "--out"] {
            assert!(text.contains(flag), "{sub} --help lacks {flag}");
        }
        for key in ["max_terms", "pop_size", "budget_scale", "fractions"] {
            assert!(text.contains(key), "{sub} --help lacks config key {key}");
        }
    }
}

#[test]
fn bench_opt_suite_writes_every_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("traces");
    assert_ok(&plrec(&["bench-opt", "--suite", "--out", s(&out_dir)]));
    let traces = fs::read_dir(&out_dir).unwrap().filter(|e| {
        let name = e.as_ref().unwrap().file_name();
        name != "summary.csv"
    });
    assert_eq!(traces.count(), 36);
    let sphere = fs::read_to_string(out_dir.join("sphere_5d_passer.csv")).unwrap();
    assert!(sphere.starts_with("iter,best_fitness\n1,"));
    assert_eq!(sphere.lines().count(), 501);
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 37);
}

#[test]
fn experiment_on_fixture_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        assert_ok(&plrec(&[
            "experiment",
            s(&fixture()),
            "--config",
            s(&config),
            "--seed",
            "4",
            "--out",
            s(&out_dir),
        ]));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    let csv = fs::read_to_string(a.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("dataset,method,train_fraction,budget,seed,metric,value")
    );
    // 2 methods x 2 fractions x 2 budgets x 4 metrics
    assert_eq!(lines.count(), 32);
    for file in ["report.csv", "report.json", "compare.txt"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file} differs"
        );
    }
    assert!(fs::read_to_string(a.join("compare.txt"))
        .unwrap()
        .contains("paper-reported, not reproduced"));
}

#[test]
fn grid_defaults_overrides_configured_grid() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out_dir = dir.path().join("grid");
    let out = plrec(&[
        "experiment",
        s(&fixture()),
        "--grid-defaults",
        "--config",
        s(&config),
        "--set",
        "methods=random",
        "--set",
        "budget_scale=1",
        "--out",
        s(&out_dir),
    ]);
    assert_ok(&out);
    let csv = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    // 6 fractions x 5 budgets x 4 metrics
    assert_eq!(csv.lines().count(), 1 + 120);
}

#[test]
fn pipeline_stages_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let stage = |tag: &str| {
        let root = dir.path().join(tag);
        let records = root.join("records.jsonl");
        let features = root.join("features");
        let model = root.join("model");
        let report = root.join("report");
        assert_ok(&plrec(&["ingest", s(&fixture()), "--out", s(&records)]));
        assert_ok(&plrec(&[
            "featurize",
            s(&records),
            "--out",
            s(&features),
            "--config",
            s(&config),
        ]));
        assert_ok(&plrec(&[
            "train",
            s(&features),
            "--out",
            s(&model),
            "--config",
            s(&config),
            "--seed",
            "9",
        ]));
        assert_ok(&plrec(&[
            "evaluate",
            s(&model),
            s(&features),
            "--out",
            s(&report),
            "--config",
            s(&config),
        ]));
        root
    };
    let (a, b) = (stage("a"), stage("b"));
    for file in [
        "records.jsonl",
        "features/tfidf.txt",
        "features/graph.txt",
        "features/train.txt",
        "features/test.txt",
        "model/params.csv",
        "model/model.txt",
        "model/trace.csv",
        "report/report.csv",
        "report/report.json",
    ] {
        let bytes = fs::read(a.join(file)).unwrap();
        assert!(!bytes.is_empty(), "{file} is empty");
        assert_eq!(bytes, fs::read(b.join(file)).unwrap(), "{file} differs");
    }
    let records = fs::read_to_string(a.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 200);
    assert!(records.lines().next().unwrap().contains("\"label\""));
    let report = fs::read_to_string(a.join("report/report.csv")).unwrap();
    assert!(report.contains("reviews,passer,0.9,2,9,f1,"));
    assert_eq!(
        fs::read_to_string(a.join("model/trace.csv"))
            .unwrap()
            .lines()
            .count(),
        11
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let records = dir.path().join("records.jsonl");
    assert_ok(&plrec(&["ingest", s(&fixture()), "--out", s(&records)]));
    let features = dir.path().join("f");
    assert_ok(&plrec(&[
        "featurize",
        s(&records),
        "--out",
        s(&features),
        "--config",
        s(&config),
        "--set",
        "rank=4",
        "--set",
        "train_fraction=0.5",
    ]));
    let graph = fs::read_to_string(features.join("graph.txt")).unwrap();
    assert!(
        graph.lines().next().unwrap().ends_with(" 4"),
        "{}",
        graph.lines().next().unwrap()
    );
    let test = fs::read_to_string(features.join("test.txt")).unwrap();
    assert!(test.starts_with("features v1 100 68\n"));
}

#[test]
fn runtime_failures_exit_one_with_a_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = plrec(&[
        "train",
        s(&dir.path().join("missing")),
        "--out",
        s(&dir.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "learning_rate = 0.1\n").unwrap();
    let out = plrec(&[
        "bench-opt",
        "--config",
        s(&bad),
        "--out",
        s(&dir.path().join("t")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config key"));

    let out = plrec(&[
        "bench-opt",
        "--set",
        "pop_size=many",
        "--out",
        s(&dir.path().join("t")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ingest_skips_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.jsonl");
    fs::write(
        &raw,
        "{\"reviewerID\":\"A\",\"asin\":\"B\",\"overall\":5,\"reviewText\":\"Great!!\"}\nnot json\n{\"reviewerID\":\"C\",\"asin\":\"B\",\"overall\":2,\"reviewText\":\"Meh\"}\n",
    )
    .unwrap();
    let records = dir.path().join("records.jsonl");
    let out = plrec(&["ingest", s(&raw), "--out", s(&records)]);
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("1 malformed"));
    let text = fs::read_to_string(&records).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains("\"great\""));
}
