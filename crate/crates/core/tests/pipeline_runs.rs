use std::fs;
use std::path::Path;

use citenorm::pipeline::{files, run_pipeline, PipelineConfig, RunManifest, StageStatus};
use citenorm::synthgen::{generate, FieldSpec, SynthConfig};

const CSVS: [&str; 6] = [
    files::CORE,
    files::CLASSIFICATION,
    files::SCORES,
    files::CURVE,
    files::DECOMPOSITION,
    files::YEARLY,
];

fn setup(dir: &Path) -> PipelineConfig {
    let synth = SynthConfig {
        seed: 21,
        first_year: 2005,
        last_year: 2011,
        fields: vec![
            FieldSpec::new("a", 300, 25.0),
            FieldSpec::new("b", 200, 10.0),
            FieldSpec::new("c", 150, 35.0),
        ],
        ..SynthConfig::default()
    };
    let paths = generate(&synth).unwrap().write(&dir.join("input")).unwrap();
    let text = format!(
        r#"
[input]
corpus = "{}"
journals = "{}"
systems = ["{}"]
[classification]
resolution = 2e-4
min_cluster_size = 30
restarts = 3
[scoring]
census_year = 2011
[evaluation]
quantiles = 20
"#,
        paths.corpus.display(),
        paths.journals.display(),
        paths.truth.display()
    );
    PipelineConfig::from_toml(&text, None).unwrap()
}

#[test]
fn full_run_writes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let run = dir.path().join("run");
    let outcome = run_pipeline(&cfg, &run).unwrap();
    for f in CSVS {
        let text = fs::read_to_string(run.join(f)).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == ','), "{f}: {header}");
        assert!(text.lines().count() > 1, "{f} has no rows");
    }
    let m: RunManifest = serde_json::from_slice(&fs::read(run.join(files::MANIFEST)).unwrap()).unwrap();
    assert!(m.success);
    assert_eq!(m.inputs.len(), 3);
    let names: Vec<_> = m.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["ingest", "select-core", "classify", "score", "evaluate"]);
    assert!(m.stages.iter().all(|s| s.status == StageStatus::Ran));
    assert_eq!(outcome.manifest, m);
    assert!(outcome.classification_report.unwrap().fields > 1);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    run_pipeline(&cfg, &dir.path().join("one")).unwrap();
    run_pipeline(&cfg, &dir.path().join("two")).unwrap();
    for f in CSVS.iter().chain([&files::REPORT]) {
        let a = fs::read(dir.path().join("one").join(f)).unwrap();
        let b = fs::read(dir.path().join("two").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn precomputed_classification_skips_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = setup(dir.path());
    let fresh = dir.path().join("fresh");
    run_pipeline(&cfg, &fresh).unwrap();

    cfg.classification.precomputed = Some(fresh.join(files::CLASSIFICATION));
    cfg.core.precomputed = Some(fresh.join(files::CORE));
    let resumed = dir.path().join("resumed");
    let outcome = run_pipeline(&cfg, &resumed).unwrap();
    let status = |name: &str| outcome.manifest.stages.iter().find(|s| s.name == name).unwrap().status;
    assert_eq!(status("classify"), StageStatus::Skipped);
    assert_eq!(status("select-core"), StageStatus::Skipped);
    assert!(!resumed.join(files::CLASSIFICATION).exists());
    for f in [files::SCORES, files::CURVE, files::DECOMPOSITION, files::YEARLY] {
        assert_eq!(fs::read(fresh.join(f)).unwrap(), fs::read(resumed.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unknown_ncs_system_fails_the_score_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = setup(dir.path());
    cfg.scoring.ncs_system = Some("nonexistent".into());
    let err = run_pipeline(&cfg, &dir.path().join("run")).unwrap_err();
    assert_eq!(err.stage.as_deref(), Some("score"));
    assert_eq!(err.exit_code(), 1);
    let m: RunManifest =
        serde_json::from_slice(&fs::read(dir.path().join("run").join(files::MANIFEST)).unwrap()).unwrap();
    assert!(!m.success);
    assert!(m.error.unwrap().contains("nonexistent"));
}
