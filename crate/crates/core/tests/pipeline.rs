use mbimpute::ingest::{self, FileFormat};
use mbimpute::runner::{self, summarize, EvalReport, ExperimentConfig, RunOptions, TableFormat};
use mbimpute::synth::{self, ScoreDist, SynthSpec};
use mbimpute::ModalitySet;

fn write_dataset(dir: &std::path::Path) {
    let spec = SynthSpec::uniform(
        15,
        ModalitySet::new(["face", "finger", "iris"]).unwrap(),
        ScoreDist::new(0.72, 0.1),
        ScoreDist::new(0.4, 0.1),
        0.7,
        21,
    );
    let table = synth::generate(&spec).unwrap();
    ingest::write_table(&table, FileFormat::LongCsv, dir.join("scores.csv")).unwrap();
}

#[test]
fn file_dataset_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path());
    let config_text = r#"{
        "dataset": {"kind": "file", "path": "scores.csv"},
        "scenario": "add_modality",
        "target_modality": "iris",
        "missing_levels": [0.0, 0.2, 0.4],
        "repetitions": 3,
        "master_seed": 77,
        "imputers": [
            {"method": "no_imputation"},
            {"method": "listwise"},
            {"method": "median"},
            {"method": "iterative", "regressor": "bayesian_ridge"},
            {"method": "iterative", "regressor": "cart", "cart_min_leaf": 3}
        ]
    }"#;
    let config_path = dir.path().join("exp.json");
    std::fs::write(&config_path, config_text).unwrap();
    let config = ExperimentConfig::from_file(&config_path).unwrap();
    let out = dir.path().join("out");
    let report = runner::run(
        &config,
        &RunOptions {
            out_dir: Some(out.clone()),
            jobs: None,
        },
    )
    .unwrap();

    assert_eq!(report.modalities, ["face", "finger", "iris"]);
    assert_eq!(report.levels.len(), 3);
    for level in &report.levels {
        assert_eq!(level.methods.len(), 5);
        assert_eq!(level.masked_cells.len(), 3);
        for m in &level.methods {
            assert_eq!(m.per_rep.len(), 3);
            if m.method.starts_with("iterative") {
                assert!(m.per_rep.iter().all(|c| c.convergence.is_some()));
            }
        }
    }
    // add_modality masks round(level * rows) cells of the whole table
    assert!(report.levels[1].masked_cells.iter().all(|&c| c == 45));

    let text = std::fs::read_to_string(out.join("report.json")).unwrap();
    let back = EvalReport::from_json(&text).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.to_json(), text);
    assert_eq!(
        std::fs::read_to_string(out.join("summary.csv")).unwrap(),
        summarize(&report, TableFormat::Csv)
    );
    assert_eq!(report.config_hash, runner::sha256_hex(config.canonical_json().as_bytes()));
}

#[test]
fn config_hash_ignores_output_dir_but_not_seed() {
    let base = r#"{"dataset": {"kind": "file", "path": "x.csv"}, "scenario": "merge", "master_seed": 1}"#;
    let a = ExperimentConfig::from_json(base).unwrap();
    let mut b = a.clone();
    b.output_dir = Some("elsewhere".into());
    assert_eq!(a.canonical_json(), b.canonical_json());
    b.master_seed = 2;
    assert_ne!(a.canonical_json(), b.canonical_json());
}
