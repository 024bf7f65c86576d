//! Seeded experiment grid: scenario x missing level x repetition x method.
//!
//! Per repetition the table is split by probe identity and normalized with
//! ranges fitted on the training rows. Per (level, repetition) cell the
//! scenario's mask is drawn with a seed derived from the master seed, the
//! level value and the repetition, so cells never depend on each other.
//! Every method in the roster sees the same masked table. Cells run in
//! parallel and are reduced in grid order.

mod config;
mod report;
mod summarize;

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, EvalError, RunError};
use crate::eval::{self, FusedScores, Provenance};
use crate::exec;
use crate::impute::{self, Method};
use crate::ingest::{self, FileFormat};
use crate::model::{split_by_probe, ModalitySet, ScoreTable};
use crate::normalize;
use crate::scenarios::{self, ScenarioKind};
use crate::seed;
use crate::synth;

pub use config::{default_roster, DatasetSource, EvalSettings, ExperimentConfig, MatrixFile, MethodSpec};
pub use report::{CellRecord, EvalReport, LevelReport, MethodReport, MetricSet, MetricSummary, Stat};
pub use summarize::{summarize, TableFormat};

/// Knobs that do not change results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for `report.json`, `summary.csv` and per-cell CSVs.
    /// Falls back to the config's `output_dir`; nothing is written if both are unset.
    pub out_dir: Option<PathBuf>,
    /// Worker threads for grid cells; `None` uses every core.
    pub jobs: Option<usize>,
}

/// Load the configured dataset.
pub fn load_dataset(source: &DatasetSource) -> Result<ScoreTable, Error> {
    Ok(match source {
        DatasetSource::Synthetic { spec } => synth::generate(spec)?,
        DatasetSource::File { path, format, modalities } => {
            let set = modalities.as_ref().map(ModalitySet::new).transpose()?;
            match format {
                None => ingest::read_csv_auto(path, set.as_ref())?,
                Some(FileFormat::LongCsv) => ingest::read_long_csv(path, set.as_ref())?,
                Some(FileFormat::WideCsv) => ingest::read_wide_csv(path)?,
                Some(FileFormat::Bssr1MatrixSet) => {
                    return Err(RunError::Config("matrix sets use the `bssr1` dataset kind".into()).into())
                }
            }
        }
        DatasetSource::Bssr1 { files, gallery_size } => {
            let files: Vec<(String, PathBuf)> = files.iter().map(|f| (f.modality.clone(), f.path.clone())).collect();
            ingest::read_bssr1_matrix_set(&files, *gallery_size)?
        }
    })
}

/// Load the dataset and run the grid.
pub fn run(config: &ExperimentConfig, options: &RunOptions) -> Result<EvalReport, Error> {
    config.validate()?;
    let table = load_dataset(&config.dataset)?;
    run_on_table(config, &table, options)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Repetition {
    index: usize,
    split_seed: u64,
    train_rows: Vec<usize>,
    test_rows: Vec<usize>,
    split: crate::model::DataSplit,
    normalized: ScoreTable,
    test_probes: usize,
}

struct CellOutput {
    masked_cells: usize,
    records: Vec<CellRecord>,
}

fn metrics(fused: &FusedScores, settings: &EvalSettings, lenient_probes: Option<usize>) -> Result<MetricSet, EvalError> {
    let (auc, eer, tpr_at_fpr) = match eval::roc(fused) {
        Ok(curve) => (
            Some(curve.auc),
            Some(curve.eer),
            settings.fpr_points.iter().map(|&p| Some(curve.tpr_at_fpr(p))).collect(),
        ),
        Err(EvalError::OneClassOnly { .. }) if lenient_probes.is_some() => {
            (None, None, vec![None; settings.fpr_points.len()])
        }
        Err(e) => return Err(e),
    };
    let cmc = match lenient_probes {
        Some(total) => eval::cmc_lenient(fused, settings.max_rank, total)?,
        None => eval::cmc(fused, settings.max_rank)?,
    };
    Ok(MetricSet {
        auc,
        eer,
        tpr_at_fpr,
        rank_accuracy: cmc.accuracy,
        n_test_rows: fused.len(),
    })
}

struct Artifacts<'a> {
    dir: Option<&'a Path>,
}

impl Artifacts<'_> {
    fn write(&self, tag: &str, fused: &FusedScores, settings: &EvalSettings, lenient: Option<usize>) -> Result<(), Error> {
        let Some(dir) = self.dir else { return Ok(()) };
        let io = |path: PathBuf| move |source| RunError::Io { path, source };
        if let Ok(curve) = eval::roc(fused) {
            let path = dir.join(format!("roc_{tag}.csv"));
            let mut buf = Vec::new();
            eval::write_roc_csv(&curve, &mut buf).map_err(io(path.clone()))?;
            fs::write(&path, buf).map_err(io(path.clone()))?;
        }
        let cmc = match lenient {
            Some(total) => eval::cmc_lenient(fused, settings.max_rank, total)?,
            None => eval::cmc(fused, settings.max_rank)?,
        };
        let path = dir.join(format!("cmc_{tag}.csv"));
        let mut buf = Vec::new();
        eval::write_cmc_csv(&cmc, &mut buf).map_err(io(path.clone()))?;
        fs::write(&path, buf).map_err(io(path.clone()))?;
        Ok(())
    }
}

/// Fuse and score one method on the masked test rows.
fn run_method(
    method: &MethodSpec,
    masked: &ScoreTable,
    rep: &Repetition,
    target: Option<usize>,
) -> Result<(FusedScores, Option<usize>, Option<impute::Convergence>), Error> {
    let test = masked.subset(&rep.test_rows);
    Ok(match method {
        MethodSpec::NoImputation => (
            eval::fuse_simple_sum(&test, true)?.with_provenance(Provenance::AvailableOnly),
            None,
            None,
        ),
        MethodSpec::Retrain => {
            let m = target.ok_or_else(|| RunError::Config("retrain needs a target modality".into()))?;
            let reduced = test.without_modality(m)?;
            (eval::fuse_simple_sum(&reduced, true)?.with_provenance(Provenance::Complete), None, None)
        }
        MethodSpec::Impute(spec) if spec.method == Method::Listwise => {
            let kept = impute::listwise_delete(&test);
            (
                eval::fuse_simple_sum(&kept, false)?.with_provenance(Provenance::Listwise),
                Some(rep.test_probes),
                None,
            )
        }
        MethodSpec::Impute(spec) => {
            let fitted = impute::fit(masked, &rep.train_rows, spec)?;
            let filled = fitted.apply(&test)?;
            (
                eval::fuse_simple_sum(&filled, false)?.with_provenance(Provenance::Imputed(spec.label())),
                None,
                fitted.convergence,
            )
        }
    })
}

fn level_tag(level: f64) -> String {
    format!("{level}")
}

/// Run the grid on an already loaded table.
pub fn run_on_table(config: &ExperimentConfig, table: &ScoreTable, options: &RunOptions) -> Result<EvalReport, Error> {
    config.validate()?;
    let roster = config.roster();
    let scenario = config.scenario();
    let n_mod = table.n_modalities();
    let target = match &config.target_modality {
        Some(name) => Some(table.modalities().require(name)?),
        None => None,
    };
    if config.scenario == ScenarioKind::Merge {
        let bound = (n_mod as f64 - 1.0) / n_mod as f64;
        if let Some(&level) = config.missing_levels.iter().find(|&&l| l * n_mod as f64 > n_mod as f64 - 1.0 + 1e-12) {
            return Err(RunError::Config(format!(
                "merge level {level} exceeds the feasible bound {bound} for {n_mod} modalities"
            ))
            .into());
        }
    }
    let out_dir = options.out_dir.clone().or_else(|| config.output_dir.clone());
    if let Some(dir) = &out_dir {
        fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.clone(),
            source,
        })?;
    }
    let artifacts = Artifacts { dir: out_dir.as_deref() };
    let master = config.master_seed;
    let settings = &config.eval;

    exec::with_jobs(options.jobs, || {
        let reps: Vec<Result<Repetition, Error>> = exec::map_range(config.repetitions, |r| {
            let wrap = |e: Error| -> Error {
                RunError::Repetition {
                    repetition: r,
                    source: Box::new(e),
                }
                .into()
            };
            let split_seed = seed::split_seed(master, r);
            let split = split_by_probe(table, config.split_fraction, split_seed).map_err(|e| wrap(e.into()))?;
            let train_rows = split.train_rows(table);
            let test_rows = split.test_rows(table);
            let params = normalize::fit(table, &train_rows).map_err(|e| wrap(e.into()))?;
            let normalized = normalize::transform(table, &params).map_err(|e| wrap(e.into()))?;
            Ok(Repetition {
                index: r,
                split_seed,
                train_rows,
                test_rows,
                test_probes: split.test_probe_ids.len(),
                split,
                normalized,
            })
        });
        let reps = reps.into_iter().collect::<Result<Vec<_>, _>>()?;

        let baseline: Vec<Result<CellRecord, Error>> = exec::map_slice(&reps, |rep| {
            let cell_err = |e: Error| -> Error {
                RunError::Cell {
                    level: 0.0,
                    repetition: rep.index,
                    method: "complete".into(),
                    source: Box::new(e),
                }
                .into()
            };
            let test = rep.normalized.subset(&rep.test_rows);
            let fused = eval::fuse_simple_sum(&test, false).map_err(|e| cell_err(e.into()))?;
            let metrics = metrics(&fused, settings, None).map_err(|e| cell_err(e.into()))?;
            artifacts
                .write(&format!("baseline_{}", rep.index), &fused, settings, None)
                .map_err(cell_err)?;
            Ok(CellRecord {
                repetition: rep.index,
                split_seed: rep.split_seed,
                mask_seed: None,
                metrics,
                convergence: None,
            })
        });
        let baseline = baseline.into_iter().collect::<Result<Vec<_>, _>>()?;

        let cells: Vec<(usize, usize)> = (0..config.missing_levels.len())
            .flat_map(|l| (0..reps.len()).map(move |r| (l, r)))
            .collect();
        let outputs: Vec<Result<CellOutput, Error>> = exec::map_slice(&cells, |&(l, r)| {
            let level = config.missing_levels[l];
            let rep = &reps[r];
            let mask_seed = seed::mask_seed(master, level, r);
            let cell_err = |method: &str, e: Error| -> Error {
                RunError::Cell {
                    level,
                    repetition: r,
                    method: method.to_string(),
                    source: Box::new(e),
                }
                .into()
            };
            let plan = scenarios::plan(&rep.normalized, &scenario, Some(&rep.split), level, mask_seed)
                .map_err(|e| cell_err("mask", e.into()))?;
            let masked = scenarios::apply(&rep.normalized, &plan).map_err(|e| cell_err("mask", e.into()))?;
            let mut records = Vec::with_capacity(roster.len());
            for method in &roster {
                let label = method.label();
                let (fused, lenient, convergence) =
                    run_method(method, &masked, rep, target).map_err(|e| cell_err(&label, e))?;
                let metrics = metrics(&fused, settings, lenient).map_err(|e| cell_err(&label, e.into()))?;
                artifacts
                    .write(&format!("{}_{}_{}", level_tag(level), r, label), &fused, settings, lenient)
                    .map_err(|e| cell_err(&label, e))?;
                records.push(CellRecord {
                    repetition: r,
                    split_seed: rep.split_seed,
                    mask_seed: Some(mask_seed),
                    metrics,
                    convergence,
                });
            }
            Ok(CellOutput {
                masked_cells: plan.cells.len(),
                records,
            })
        });

        let mut outputs = outputs.into_iter();
        let mut levels = Vec::with_capacity(config.missing_levels.len());
        for &level in &config.missing_levels {
            let mut per_method: Vec<Vec<CellRecord>> = vec![Vec::with_capacity(reps.len()); roster.len()];
            let mut masked_cells = Vec::with_capacity(reps.len());
            for _ in 0..reps.len() {
                let out = outputs.next().expect("one output per cell")?;
                masked_cells.push(out.masked_cells);
                for (slot, record) in per_method.iter_mut().zip(out.records) {
                    slot.push(record);
                }
            }
            levels.push(LevelReport {
                level,
                masked_cells,
                methods: roster
                    .iter()
                    .zip(per_method)
                    .map(|(m, recs)| MethodReport::new(m.label(), recs))
                    .collect(),
            });
        }

        let report = EvalReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_hex(config.canonical_json().as_bytes()),
            config: config.clone(),
            modalities: table.modalities().names().to_vec(),
            fpr_points: settings.fpr_points.clone(),
            max_rank: settings.max_rank,
            baseline: MethodReport::new("complete".into(), baseline),
            levels,
        };
        if let Some(dir) = &out_dir {
            for (name, text) in [
                ("report.json", report.to_json()),
                ("summary.csv", summarize(&report, TableFormat::Csv)),
            ] {
                let path = dir.join(name);
                fs::write(&path, text).map_err(|source| RunError::Io { path, source })?;
            }
        }
        Ok(report)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{ScoreDist, SynthSpec};

    fn config(scenario: ScenarioKind, target: Option<&str>, levels: Vec<f64>) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSource::Synthetic {
                spec: SynthSpec::uniform(
                    20,
                    ModalitySet::new(["a", "b", "c"]).unwrap(),
                    ScoreDist::new(0.65, 0.12),
                    ScoreDist::new(0.35, 0.12),
                    0.6,
                    11,
                ),
            },
            scenario,
            target_modality: target.map(String::from),
            missing_levels: levels,
            repetitions: 2,
            split_fraction: 0.8,
            master_seed: 5,
            imputers: None,
            eval: EvalSettings::default(),
            output_dir: None,
        }
    }

    #[test]
    fn grid_shape() {
        let c = config(ScenarioKind::Retire, Some("b"), vec![0.0, 0.5]);
        let report = run(&c, &RunOptions::default()).unwrap();
        assert_eq!(report.levels.len(), 2);
        assert_eq!(report.levels[0].methods.len(), 8);
        assert_eq!(report.baseline.per_rep.len(), 2);
        assert_eq!(report.levels[1].masked_cells, vec![40, 40]);
        assert_eq!(report.config_hash.len(), 64);
    }

    #[test]
    fn level_zero_matches_baseline() {
        let c = config(ScenarioKind::Merge, None, vec![0.0]);
        let report = run(&c, &RunOptions::default()).unwrap();
        for m in &report.levels[0].methods {
            let metrics: Vec<_> = m.per_rep.iter().map(|c| &c.metrics).collect();
            let base: Vec<_> = report.baseline.per_rep.iter().map(|c| &c.metrics).collect();
            assert_eq!(metrics, base, "{}", m.method);
            assert_eq!(m.summary, report.baseline.summary);
        }
    }

    #[test]
    fn merge_bound_checked_before_running() {
        let c = config(ScenarioKind::Merge, None, vec![0.7]);
        assert!(matches!(run(&c, &RunOptions::default()), Err(Error::Run(RunError::Config(_)))));
    }

    #[test]
    fn errors_carry_cell_provenance() {
        let mut c = config(ScenarioKind::AddModality, Some("a"), vec![0.2]);
        let mut spec = impute::ImputerSpec::iterative(impute::RegressorKind::Knn);
        spec.knn_k = 100_000;
        c.imputers = Some(vec![MethodSpec::Impute(spec)]);
        match run(&c, &RunOptions::default()) {
            Err(Error::Run(RunError::Cell { method, repetition, .. })) => {
                assert_eq!(method, "iterative_knn");
                assert_eq!(repetition, 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn jobs_do_not_change_results() {
        let c = config(ScenarioKind::AddModality, Some("c"), vec![0.3]);
        let one = run(&c, &RunOptions { out_dir: None, jobs: Some(1) }).unwrap();
        let many = run(&c, &RunOptions { out_dir: None, jobs: Some(4) }).unwrap();
        assert_eq!(one.to_json(), many.to_json());
    }
}
