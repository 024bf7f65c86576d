//! Sequential versus data-parallel timings of the pipeline's hot loops.
//!
//! With the default `parallel` feature every benchmark runs twice: inside a
//! one-thread rayon pool and on the global pool. Building with
//! `--no-default-features` compiles the plain sequential loops instead, for
//! comparison against the first variant.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mbimpute::eval;
use mbimpute::impute::{self, ImputerSpec, Method, RegressorKind};
use mbimpute::runner::{self, DatasetSource, EvalSettings, ExperimentConfig, MethodSpec, RunOptions};
use mbimpute::scenarios::{self, ScenarioKind};
use mbimpute::synth::{self, ScoreDist, SynthSpec};
use mbimpute::{ModalitySet, ScoreTable};

fn spec(n: usize) -> SynthSpec {
    SynthSpec::uniform(
        n,
        ModalitySet::new(["face", "finger", "iris", "voice"]).unwrap(),
        ScoreDist::new(0.75, 0.12),
        ScoreDist::new(0.35, 0.12),
        0.8,
        42,
    )
}

fn masked(n: usize) -> ScoreTable {
    let table = synth::generate(&spec(n)).unwrap();
    let plan = scenarios::plan_merge(&table, 0.4, 7).unwrap();
    scenarios::apply(&table, &plan).unwrap()
}

#[cfg(feature = "parallel")]
fn variants() -> Vec<(&'static str, Option<rayon::ThreadPool>)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("sequential", Some(one)), ("parallel", None)]
}

#[cfg(feature = "parallel")]
fn on<R: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn variants() -> Vec<(&'static str, Option<()>)> {
    vec![("sequential", None)]
}

#[cfg(not(feature = "parallel"))]
fn on<R>(_pool: &Option<()>, f: impl FnOnce() -> R) -> R {
    f()
}

fn bench_synth(c: &mut Criterion) {
    let mut group = c.benchmark_group("synth_generate");
    let s = spec(150);
    for (name, pool) in variants() {
        group.bench_function(BenchmarkId::new(name, 150), |b| {
            b.iter(|| on(&pool, || synth::generate(black_box(&s)).unwrap()))
        });
    }
    group.finish();
}

fn bench_knn_impute(c: &mut Criterion) {
    let mut group = c.benchmark_group("iterative_knn_impute");
    group.sample_size(10);
    let table = masked(80);
    let train: Vec<usize> = (0..table.len()).collect();
    let spec = ImputerSpec::iterative(RegressorKind::Knn);
    for (name, pool) in variants() {
        group.bench_function(BenchmarkId::new(name, table.len()), |b| {
            b.iter(|| on(&pool, || impute::impute(black_box(&table), &train, &spec).unwrap()))
        });
    }
    group.finish();
}

fn bench_cmc(c: &mut Criterion) {
    let mut group = c.benchmark_group("cmc");
    let table = synth::generate(&spec(300)).unwrap();
    let fused = eval::fuse_simple_sum(&table, false).unwrap();
    for (name, pool) in variants() {
        group.bench_function(BenchmarkId::new(name, fused.len()), |b| {
            b.iter(|| on(&pool, || eval::cmc(black_box(&fused), 10).unwrap()))
        });
    }
    group.finish();
}

fn bench_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("experiment_grid");
    group.sample_size(10);
    let config = ExperimentConfig {
        dataset: DatasetSource::Synthetic { spec: spec(30) },
        scenario: ScenarioKind::Merge,
        target_modality: None,
        missing_levels: vec![0.0, 0.25, 0.5],
        repetitions: 2,
        split_fraction: 0.8,
        master_seed: 1,
        imputers: Some(vec![
            MethodSpec::NoImputation,
            MethodSpec::Impute(ImputerSpec::new(Method::Mean)),
            MethodSpec::Impute(ImputerSpec::iterative(RegressorKind::BayesianRidge)),
        ]),
        eval: EvalSettings::default(),
        output_dir: None,
    };
    for (name, jobs) in [("sequential", Some(1)), ("parallel", None)] {
        let options = RunOptions { out_dir: None, jobs };
        group.bench_function(BenchmarkId::new(name, 6), |b| {
            b.iter(|| runner::run(black_box(&config), &options).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_synth, bench_knn_impute, bench_cmc, bench_grid);
criterion_main!(benches);
