use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_referee");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "gen", "--out", p(dir), "--range-bins", "256"];
    args.extend_from_slice(extra);
    ok(&args);
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn version_names_format_versions() {
    let out = ok(&["--version"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("RFMX 1") && text.contains("RFRD 1"), "{text}");
}

#[test]
fn every_subcommand_help_lists_config_keys() {
    let keys = [
        "--sigma",
        "--z-thresh",
        "--min-range-bin",
        "--log-intensity",
        "--alpha",
        "--partition-axis",
        "--tau-s",
        "--tau-t",
        "--exclusion",
        "--loop-radius",
        "--meta-cols",
        "--range-resolution",
        "--jobs",
    ];
    for sub in ["describe", "index", "query", "eval", "bench"] {
        let text = String::from_utf8(ok(&[sub, "--help"]).stdout).unwrap();
        for key in keys {
            assert!(text.contains(key), "`{sub} --help` lacks {key}");
        }
    }
}

#[test]
fn describe_writes_one_descriptor_per_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let desc = tmp.path().join("desc");
    synth(&data, &["--poses", "10"]);
    ok(&["describe", "--input", p(&data), "--output", p(&desc), "--masks"]);

    let rfrd = fs::read_dir(&desc)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "rfrd"))
        .count();
    assert_eq!(rfrd, 10);
    let manifest = fs::read_to_string(desc.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 11);
    assert!(desc.join("000009.pgm").is_file());
    // 400 azimuths, alpha 50: header plus 50 doubles.
    assert_eq!(fs::metadata(desc.join("000000.rfrd")).unwrap().len(), 32 + 400);
}

#[test]
fn describe_empty_directory_succeeds_with_empty_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let desc = tmp.path().join("desc");
    let out = ok(&["describe", "--input", p(&empty), "--output", p(&desc)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let manifest = fs::read_to_string(desc.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 1);
}

#[test]
fn indivisible_alpha_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &["--poses", "2"]);
    let out = run(&[
        "describe",
        "--alpha",
        "7",
        "--input",
        p(&data),
        "--output",
        p(&tmp.path().join("desc")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_flag_values_are_aggregated_configuration_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "--sigma",
        "-1",
        "--exclusion",
        "soon",
        "index",
        "--db",
        p(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.lines().count() >= 2, "{err}");
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &["--poses", "2"]);
    let config = tmp.path().join("referee.ini");
    fs::write(&config, "# test\nalpha = 7\n").unwrap();
    let desc = tmp.path().join("desc");
    let out = run(&["describe", "--config", p(&config), "--input", p(&data), "--output", p(&desc)]);
    assert_eq!(out.status.code(), Some(2));
    ok(&[
        "describe",
        "--config",
        p(&config),
        "--alpha",
        "25",
        "--input",
        p(&data),
        "--output",
        p(&desc),
    ]);
    assert_eq!(fs::metadata(desc.join("000000.rfrd")).unwrap().len(), 32 + 200);
}

#[test]
fn single_session_eval_finds_revisits() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let desc = tmp.path().join("desc");
    let eval = tmp.path().join("eval");
    synth(&data, &["--poses", "60", "--revisit"]);
    ok(&["describe", "--input", p(&data), "--output", p(&desc)]);
    let gt = data.join("trajectory.csv");
    ok(&["index", "--db", p(&desc), "--gt", p(&gt)]);
    ok(&["eval", "--db", p(&desc), "--queries", p(&desc), "--gt", p(&gt), "--out", p(&eval)]);

    let s = summary(&eval);
    let auc = s["auc_pr"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));
    assert!(s["recall_at_precision_1"].as_f64().unwrap() > 0.0);
    assert_eq!(s["mode"], "single-session");
    assert!(eval.join("pr.csv").is_file() && eval.join("matches.csv").is_file());

    let queried = ok(&["query", "--db", p(&desc), "--queries", p(&desc), "--tau-s", "2"]);
    let csv = String::from_utf8(queried.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("query_id,match_id,d_s,d_t,accepted"));
    assert_eq!(csv.lines().count(), 61);
}

#[test]
fn identical_sessions_match_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        synth(dir, &["--poses", "20", "--seed", "5"]);
        ok(&["describe", "--input", p(dir), "--output", p(&dir.join("desc"))]);
    }
    let eval = tmp.path().join("eval");
    ok(&[
        "eval",
        "--db",
        p(&a.join("desc")),
        "--queries",
        p(&b.join("desc")),
        "--gt",
        p(&a.join("trajectory.csv")),
        "--query-gt",
        p(&b.join("trajectory.csv")),
        "--out",
        p(&eval),
    ]);
    let s = summary(&eval);
    assert_eq!(s["mode"], "multi-session");
    assert!((s["max_f1"].as_f64().unwrap() - 1.0).abs() < 1e-12, "{s}");
}

#[test]
fn disjoint_sessions_report_no_positives() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, &["--poses", "10"]);
    synth(&b, &["--poses", "10", "--start-y", "150"]);
    for dir in [&a, &b] {
        ok(&["describe", "--input", p(dir), "--output", p(&dir.join("desc"))]);
    }
    let out = run(&[
        "eval",
        "--db",
        p(&a.join("desc")),
        "--queries",
        p(&b.join("desc")),
        "--gt",
        p(&a.join("trajectory.csv")),
        "--query-gt",
        p(&b.join("trajectory.csv")),
        "--out",
        p(&tmp.path().join("eval")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(err.contains("no true loops"), "{err}");
}

#[test]
fn bench_reports_descriptor_size() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &["--poses", "12", "--azimuths", "448"]);
    let report = tmp.path().join("bench.json");
    ok(&["bench", "--alpha", "56", "--input", p(&data), "--output", p(&report)]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["descriptor_bytes"], 448);
    assert!(r["processing_time_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn bench_needs_enough_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &["--poses", "3"]);
    let out = run(&["bench", "--input", p(&data)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(err.contains("sample"), "{err}");
}
