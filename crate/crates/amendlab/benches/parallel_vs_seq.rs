//! Compares the data-parallel paths (rayon, on by default via the
//! `parallel` feature) against their explicit sequential baselines on
//! the three hot loops: masking-plan generation, featurization, and the
//! bootstrap. Run with `cargo bench --bench parallel_vs_seq`.

use amendlab::camlm::{plan_corpus, plan_corpus_sequential, MaskPolicy};
use amendlab::corpus::{ECVersion, Phase, Split, TrialMetadata, TrialRecord};
use amendlab::eval::{bootstrap, bootstrap_sequential};
use amendlab::model::{featurize_corpus, featurize_corpus_sequential, FeatureFields};
use amendlab::rng::substream;
use chrono::NaiveDate;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

const PHRASES: [&str; 8] = [
    "Age >= 18 years",
    "ECOG performance status 0-1",
    "Adequate hepatic function",
    "No prior chemotherapy within 6 months",
    "Measurable disease per RECIST 1.1",
    "Life expectancy of at least 12 weeks",
    "No active central nervous system metastases",
    "Willing to provide archival tumor tissue",
];

/// Corpus of two-version trials with shuffled, partially rewritten EC
/// text so the diff and masking paths do real work.
fn bench_corpus(n: usize) -> Vec<TrialRecord> {
    (0..n)
        .map(|i| {
            let mut rng = substream(42, &format!("bench/{i}"));
            let mut items: Vec<&str> = PHRASES
                .iter()
                .filter(|_| rng.gen::<f64>() < 0.8)
                .copied()
                .collect();
            if items.is_empty() {
                items.push(PHRASES[0]);
            }
            let body = |items: &[&str]| {
                format!(
                    "Inclusion Criteria:\n{}\nExclusion Criteria:\n- Pregnancy",
                    items
                        .iter()
                        .map(|p| format!("- {p}"))
                        .collect::<Vec<_>>()
                        .join("\n")
                )
            };
            let initial = body(&items);
            let drop_at = rng.gen_range(0..items.len());
            items.remove(drop_at);
            items.push("Serum creatinine <= 1.5 x upper limit of normal");
            let amended = body(&items);
            TrialRecord {
                trial_id: format!("NCT{:08}", 30_000_000 + i),
                ec_versions: vec![
                    ECVersion {
                        version_index: 0,
                        timestamp: NaiveDate::from_ymd_opt(2019, 1, 15).unwrap(),
                        text: initial,
                    },
                    ECVersion {
                        version_index: 1,
                        timestamp: NaiveDate::from_ymd_opt(2019, 9, 15).unwrap(),
                        text: amended,
                    },
                ],
                metadata: TrialMetadata {
                    title: format!("Bench study {i}"),
                    description: String::new(),
                    diseases: vec!["melanoma".into()],
                    interventions: vec!["osimertinib".into()],
                    phase: Phase::Phase2,
                    status: "Completed".into(),
                },
                label_registry: Some(u8::from(i % 2 == 0)),
                label_llm: None,
                label_human: None,
                amendment_count: None,
                split: Split::Train,
            }
        })
        .collect()
}

fn bench_masking(c: &mut Criterion) {
    let trials = bench_corpus(400);
    let mut group = c.benchmark_group("plan_corpus");
    group.bench_with_input(BenchmarkId::new("parallel", 400), &trials, |b, t| {
        b.iter(|| plan_corpus(t, MaskPolicy::camlm(), 7).unwrap())
    });
    group.bench_with_input(BenchmarkId::new("sequential", 400), &trials, |b, t| {
        b.iter(|| plan_corpus_sequential(t, MaskPolicy::camlm(), 7).unwrap())
    });
    group.finish();
}

fn bench_featurize(c: &mut Criterion) {
    let trials = bench_corpus(400);
    let mut group = c.benchmark_group("featurize_corpus");
    group.bench_with_input(BenchmarkId::new("parallel", 400), &trials, |b, t| {
        b.iter(|| featurize_corpus(t, FeatureFields::all(), 18).unwrap())
    });
    group.bench_with_input(BenchmarkId::new("sequential", 400), &trials, |b, t| {
        b.iter(|| featurize_corpus_sequential(t, FeatureFields::all(), 18).unwrap())
    });
    group.finish();
}

fn bench_bootstrap(c: &mut Criterion) {
    let n = 1_000;
    let mut rng = substream(42, "bench/bootstrap");
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
    let scores: Vec<f64> = labels
        .iter()
        .map(|&l| 0.3 * f64::from(l) + rng.gen::<f64>())
        .collect();
    let mut group = c.benchmark_group("bootstrap_1000");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| bootstrap(&scores, &labels, 1_000, 7).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| bootstrap_sequential(&scores, &labels, 1_000, 7).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_masking, bench_featurize, bench_bootstrap);
criterion_main!(benches);
