use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_matchcause"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn fixture_pipeline_writes_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin().arg("pipeline").arg("--config").arg(fixture("pipeline.toml")).arg("--output-dir").arg(dir.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["cohort.tsv", "features.tsv", "selection.json", "matches.tsv", "balance.tsv", "effect.json", "mediation.tsv", "manifest.json"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let effect: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("effect.json")).unwrap()).unwrap();
    let est = effect["estimate"].as_f64().unwrap();
    assert!((est - 5.0).abs() < 1.0, "estimate {est}");
}

#[test]
fn effect_without_matches_names_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin().arg("effect").arg("--output-dir").arg(dir.path()));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("match set not found"), "{err}");
}

#[test]
fn invalid_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[matcher]\ncalipre = 0.9\n").unwrap();
    let out = run(bin().arg("ingest").arg("--config").arg(&cfg));
    assert_eq!(out.status.code(), Some(1));

    let out = run(bin().arg("ingest").arg("--input").arg(dir.path().join("missing.jsonl")).arg("--output-dir").arg(dir.path()));
    assert_eq!(out.status.code(), Some(1));

    let out = run(bin().args(["pipeline", "--from", "nonsense"]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_then_resume_from_select() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("synth.toml");
    std::fs::write(
        &cfg,
        "output_dir = \"out\"\n[diagnostics]\npermutations = 99\n[synth]\nn_units = 2000\nn_confounders = 6\n\
         gamma = [1.0, 0.4, 0.4, 0.4, 0.4, 0.4]\ndelta = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]\ntau = 5.0\nseed = 4\n",
    )
    .unwrap();
    let out = run(bin().arg("synth").arg("--config").arg(&cfg));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(bin().args(["pipeline", "--from", "select", "--config"]).arg(&cfg));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let effect: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/effect.json")).unwrap()).unwrap();
    let est = effect["estimate"].as_f64().unwrap();
    assert!((est - 5.0).abs() < 0.75, "estimate {est}");
}

#[test]
fn exhausted_sweep_exits_with_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .arg("pipeline")
        .arg("--config")
        .arg(fixture("pipeline.toml"))
        .arg("--output-dir")
        .arg(dir.path())
        .args(["--min-pairs", "100000"]));
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("matches.tsv").exists());
}
