use std::path::Path;
use std::process::{Command, Output};

fn egoassist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egoassist"))
        .args(args)
        .env_remove("EGOASSIST_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn arg(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(egoassist(&["--help"]).status.code(), Some(0));
    assert_eq!(egoassist(&["frobnicate"]).status.code(), Some(1));
    let o = egoassist(&["simulate", "--script", "omelette"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown script"));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let o = egoassist(&["bench", "lta", "--dataset", "/nonexistent/lta.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreachable_provider_is_a_provider_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "[providers]\nllm = \"remote:http://127.0.0.1:9\"\n").unwrap();
    let o = egoassist(&["--config", &arg(&cfg), "bench", "lta", "--synthetic", "2"]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn oracle_simulation_succeeds_and_persists_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let o = egoassist(&[
        "simulate",
        "--script",
        "caprese",
        "--trials",
        "5",
        "--out",
        &arg(dir.path()),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("5/5 sessions succeeded"));
    assert_eq!(
        std::fs::read_dir(dir.path().join("sessions"))
            .unwrap()
            .count(),
        5
    );
    assert_eq!(
        std::fs::read_dir(dir.path().join("events"))
            .unwrap()
            .count(),
        5
    );
}

#[test]
fn latin_square_runs_both_predictors() {
    let o = egoassist(&[
        "simulate",
        "--script",
        "latte",
        "--trials",
        "2",
        "--predictor",
        "both",
        "--latin-square",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("4/4 sessions succeeded"), "{out}");
    let socratic_first = out.find("latte-socratic-1").unwrap() < out.find("latte-vclm-1").unwrap();
    let vclm_first = out.find("latte-vclm-2").unwrap() < out.find("latte-socratic-2").unwrap();
    assert!(socratic_first && vclm_first);
}

#[test]
fn generated_fixture_reproduces_skip_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(egoassist(&["data", "--out", &arg(&data)]).status.success());
    for f in [
        "synthetic/lta.jsonl",
        "synthetic/vpa_z3.jsonl",
        "stubs/latte_precedence.json",
        "stubs/lta_cheating.json",
    ] {
        assert!(data.join(f).is_file(), "{f}");
    }
    let o = egoassist(&[
        "analyze",
        "--sessions",
        &arg(&data.join("fixtures/skip_table")),
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("61.9%"), "{out}");
    assert!(out.contains("65/105"), "{out}");
}

#[test]
fn cheating_stub_bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(egoassist(&["data", "--out", &arg(&data)]).status.success());
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        format!(
            "[providers]\nllm = {:?}\n",
            format!("stub:{}", arg(&data.join("stubs/lta_cheating.json")))
        ),
    )
    .unwrap();
    let run = dir.path().join("run");
    let o = egoassist(&[
        "--config",
        &arg(&cfg),
        "bench",
        "lta",
        "--dataset",
        &arg(&data.join("synthetic/lta.jsonl")),
        "--out",
        &arg(&run),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("0.000"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("reports/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["aggregates"]["ed_action"], 0.0);
    assert!(run.join("reports/table.txt").is_file());
}

#[test]
fn goldens_check_passes_on_the_repository() {
    assert_eq!(egoassist(&["goldens", "--check"]).status.code(), Some(0));
}
