//! Metrics and the statistical protocol: AUROC, AUPRC, accuracy/F1,
//! nonparametric bootstrap, and DeLong's paired AUROC test.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::rng::substream;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("metric undefined: only one class present")]
    SingleClass,
    #[error("AUPRC undefined: no positive labels")]
    NoPositives,
    #[error("score vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("scores and labels have different lengths ({0} vs {1})")]
    ScoreLabelMismatch(usize, usize),
}

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<(), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::ScoreLabelMismatch(scores.len(), labels.len()));
    }
    Ok(())
}

/// Midranks (1-based, ties averaged) of `values`.
fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite scores"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 averaged
        let rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Mann–Whitney AUROC with half-credit ties, via rank sums.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1)
        .map(|(r, _)| r)
        .sum();
    Ok((rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos * n_neg) as f64)
}

/// Average precision over the descending-score sweep with grouped ties.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    check_lengths(scores, labels)?;
    let total_pos = labels.iter().filter(|&&l| l == 1).count();
    if total_pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut recall_prev = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            tp += usize::from(labels[idx] == 1);
        }
        seen += j - i + 1;
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
        i = j + 1;
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub accuracy: f64,
    pub f1: f64,
}

/// Accuracy and F1 at a score threshold. F1 is 0 when there are no
/// predicted positives or no true positives.
pub fn accuracy_f1(scores: &[f64], labels: &[u8], threshold: f64) -> ThresholdMetrics {
    let n = scores.len();
    let (mut tp, mut fp, mut fnn, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (s, &l) in scores.iter().zip(labels) {
        match (*s >= threshold, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => tn += 1,
        }
    }
    let accuracy = if n == 0 {
        0.0
    } else {
        (tp + tn) as f64 / n as f64
    };
    let f1 = if 2 * tp + fp + fnn == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fnn) as f64
    };
    ThresholdMetrics { accuracy, f1 }
}

pub const DEFAULT_BOOTSTRAP_ITERATIONS: u32 = 1_000;
/// Redraw cap for iterations that resample a single class.
const MAX_REDRAWS: u32 = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub point: f64,
    pub bootstrap_mean: f64,
    pub bootstrap_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: BTreeMap<String, MetricSummary>,
    pub n: usize,
    pub iterations: u32,
    pub seed: u64,
}

fn all_metrics(scores: &[f64], labels: &[u8]) -> Result<BTreeMap<&'static str, f64>, EvalError> {
    let mut out = BTreeMap::new();
    out.insert("auroc", auroc(scores, labels)?);
    out.insert("auprc", auprc(scores, labels)?);
    let t = accuracy_f1(scores, labels, 0.5);
    out.insert("accuracy", t.accuracy);
    out.insert("f1", t.f1);
    Ok(out)
}

/// One bootstrap iteration: resample with replacement, redrawing (within
/// the iteration's own substream) when a single class comes up.
fn bootstrap_iteration(
    scores: &[f64],
    labels: &[u8],
    seed: u64,
    iteration: u32,
) -> Option<BTreeMap<&'static str, f64>> {
    let n = scores.len();
    let mut rng = substream(seed, &format!("bootstrap/{iteration}"));
    for _ in 0..MAX_REDRAWS {
        let mut s = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n);
        for _ in 0..n {
            let idx = rand::Rng::gen_range(&mut rng, 0..n);
            s.push(scores[idx]);
            l.push(labels[idx]);
        }
        if let Ok(metrics) = all_metrics(&s, &l) {
            return Some(metrics);
        }
    }
    None
}

fn summarize(
    point: &BTreeMap<&'static str, f64>,
    draws: &[BTreeMap<&'static str, f64>],
) -> BTreeMap<String, MetricSummary> {
    point
        .iter()
        .map(|(&name, &p)| {
            let values: Vec<f64> = draws.iter().map(|d| d[name]).collect();
            let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
            let var = if values.len() > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                    / (values.len() - 1) as f64
            } else {
                0.0
            };
            (
                name.to_string(),
                MetricSummary {
                    point: p,
                    bootstrap_mean: mean,
                    bootstrap_std: var.sqrt(),
                },
            )
        })
        .collect()
}

/// Bootstrap all metrics. Iterations draw from per-iteration substreams,
/// so the result is independent of execution order and worker count.
pub fn bootstrap(
    scores: &[f64],
    labels: &[u8],
    iterations: u32,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    check_lengths(scores, labels)?;
    let point = all_metrics(scores, labels)?;

    #[cfg(feature = "parallel")]
    let draws: Vec<_> = (0..iterations)
        .into_par_iter()
        .filter_map(|i| bootstrap_iteration(scores, labels, seed, i))
        .collect();

    #[cfg(not(feature = "parallel"))]
    let draws: Vec<_> = (0..iterations)
        .filter_map(|i| bootstrap_iteration(scores, labels, seed, i))
        .collect();

    Ok(EvalReport {
        metrics: summarize(&point, &draws),
        n: scores.len(),
        iterations,
        seed,
    })
}

/// Sequential bootstrap regardless of feature flags (benchmark baseline).
pub fn bootstrap_sequential(
    scores: &[f64],
    labels: &[u8],
    iterations: u32,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    check_lengths(scores, labels)?;
    let point = all_metrics(scores, labels)?;
    let draws: Vec<_> = (0..iterations)
        .filter_map(|i| bootstrap_iteration(scores, labels, seed, i))
        .collect();
    Ok(EvalReport {
        metrics: summarize(&point, &draws),
        n: scores.len(),
        iterations,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeLongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    pub variance: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Structural components (V10 over positives, V01 over negatives) and AUC
/// for one model, via the midrank formulation.
fn structural_components(scores: &[f64], labels: &[u8]) -> (Vec<f64>, Vec<f64>, f64) {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1)
        .map(|(s, _)| *s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l != 1)
        .map(|(s, _)| *s)
        .collect();
    let m = pos.len();
    let n = neg.len();
    let tx = midranks(&pos);
    let ty = midranks(&neg);
    let mut all = pos.clone();
    all.extend_from_slice(&neg);
    let tz = midranks(&all);

    let v10: Vec<f64> = (0..m).map(|i| (tz[i] - tx[i]) / n as f64).collect();
    let v01: Vec<f64> = (0..n)
        .map(|j| 1.0 - (tz[m + j] - ty[j]) / m as f64)
        .collect();
    let auc = (tz[..m].iter().sum::<f64>() - (m * (m + 1)) as f64 / 2.0) / (m * n) as f64;
    (v10, v01, auc)
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (n - 1) as f64
}

/// Paired two-sided DeLong test for the AUROC difference of two models
/// scored on the same examples.
pub fn delong_test(
    scores_a: &[f64],
    scores_b: &[f64],
    labels: &[u8],
) -> Result<DeLongResult, EvalError> {
    if scores_a.len() != scores_b.len() {
        return Err(EvalError::LengthMismatch(scores_a.len(), scores_b.len()));
    }
    check_lengths(scores_a, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(EvalError::SingleClass);
    }

    let (v10_a, v01_a, auc_a) = structural_components(scores_a, labels);
    let (v10_b, v01_b, auc_b) = structural_components(scores_b, labels);

    let m = v10_a.len() as f64;
    let n = v01_a.len() as f64;
    let s10 = [
        [covariance(&v10_a, &v10_a), covariance(&v10_a, &v10_b)],
        [covariance(&v10_b, &v10_a), covariance(&v10_b, &v10_b)],
    ];
    let s01 = [
        [covariance(&v01_a, &v01_a), covariance(&v01_a, &v01_b)],
        [covariance(&v01_b, &v01_a), covariance(&v01_b, &v01_b)],
    ];
    let s = |i: usize, j: usize| s10[i][j] / m + s01[i][j] / n;
    let variance = s(0, 0) + s(1, 1) - 2.0 * s(0, 1);

    if variance <= 0.0 {
        return Ok(DeLongResult {
            auc_a,
            auc_b,
            variance: variance.max(0.0),
            z: 0.0,
            p_value: 1.0,
        });
    }
    let z = (auc_a - auc_b) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = 2.0 * (1.0 - normal.cdf(z.abs()));
    Ok(DeLongResult {
        auc_a,
        auc_b,
        variance,
        z,
        p_value,
    })
}

/// One row of the pairwise-comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeLongRow {
    pub model_a: String,
    pub model_b: String,
    pub result: DeLongResult,
}

pub fn write_delong_csv<W: Write>(rows: &[DeLongRow], mut writer: W) -> std::io::Result<()> {
    writeln!(writer, "model_a,model_b,auc_a,auc_b,z,p")?;
    for row in rows {
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            row.model_a,
            row.model_b,
            row.result.auc_a,
            row.result.auc_b,
            row.result.z,
            row.result.p_value
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_auroc(scores: &[f64], labels: &[u8]) -> f64 {
        let pos: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == 1)
            .map(|(s, _)| *s)
            .collect();
        let neg: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l != 1)
            .map(|(s, _)| *s)
            .collect();
        let mut total = 0.0;
        for p in &pos {
            for q in &neg {
                total += if p > q {
                    1.0
                } else if p == q {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn auroc_perfect_separation() {
        let auc = auroc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap();
        assert!((auc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auroc_all_tied_is_half() {
        let auc = auroc(&[0.5, 0.5, 0.5, 0.5], &[0, 1, 0, 1]).unwrap();
        assert!((auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn auroc_worked_example() {
        let auc = auroc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
        assert!((auc - 0.75).abs() < 1e-12);
    }

    #[test]
    fn auroc_rejects_single_class() {
        assert!(matches!(
            auroc(&[0.1, 0.2], &[1, 1]),
            Err(EvalError::SingleClass)
        ));
    }

    #[test]
    fn auprc_perfect_ranking() {
        let ap = auprc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        assert!((ap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auprc_single_tie_block_equals_prevalence() {
        let ap = auprc(&[0.5; 8], &[1, 0, 0, 1, 0, 0, 0, 0]).unwrap();
        assert!((ap - 0.25).abs() < 1e-12);
    }

    #[test]
    fn auprc_worked_example() {
        let ap = auprc(&[0.9, 0.8, 0.7, 0.6], &[1, 0, 1, 0]).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn accuracy_f1_worked_example() {
        // TP=2, FP=1, FN=1, TN=2
        let m = accuracy_f1(&[0.9, 0.8, 0.7, 0.4, 0.3, 0.2], &[1, 1, 0, 1, 0, 0], 0.5);
        assert!((m.accuracy - 4.0 / 6.0).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn f1_zero_when_nothing_predicted_positive() {
        let m = accuracy_f1(&[0.1, 0.2], &[1, 0], 0.5);
        assert_eq!(m.f1, 0.0);
    }

    #[test]
    fn all_correct_gives_ones() {
        let m = accuracy_f1(&[0.9, 0.1], &[1, 0], 0.5);
        assert_eq!((m.accuracy, m.f1), (1.0, 1.0));
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let scores = [0.1, 0.9, 0.4, 0.7, 0.2, 0.8];
        let labels = [0, 1, 0, 1, 0, 1];
        let a = bootstrap(&scores, &labels, 50, 3).unwrap();
        let b = bootstrap(&scores, &labels, 50, 3).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn bootstrap_parallel_matches_sequential() {
        let scores = [0.1, 0.9, 0.4, 0.7, 0.2, 0.8, 0.5, 0.6];
        let labels = [0, 1, 0, 1, 0, 1, 1, 0];
        let par = bootstrap(&scores, &labels, 40, 9).unwrap();
        let seq = bootstrap_sequential(&scores, &labels, 40, 9).unwrap();
        assert_eq!(
            serde_json::to_string(&par).unwrap(),
            serde_json::to_string(&seq).unwrap()
        );
    }

    #[test]
    fn bootstrap_single_iteration_has_zero_std() {
        let scores = [0.1, 0.9, 0.4, 0.7];
        let labels = [0, 1, 0, 1];
        let report = bootstrap(&scores, &labels, 1, 5).unwrap();
        for summary in report.metrics.values() {
            assert_eq!(summary.bootstrap_std, 0.0);
        }
    }

    #[test]
    fn constant_accuracy_has_zero_std() {
        // scores far from threshold: every resample classifies identically
        let scores = [0.99, 0.99, 0.01, 0.01];
        let labels = [1, 1, 0, 0];
        let report = bootstrap(&scores, &labels, 30, 1).unwrap();
        assert_eq!(report.metrics["accuracy"].bootstrap_std, 0.0);
    }

    #[test]
    fn delong_self_comparison_is_null() {
        let scores = [0.2, 0.7, 0.4, 0.9, 0.1];
        let labels = [0, 1, 0, 1, 0];
        let r = delong_test(&scores, &scores, &labels).unwrap();
        assert_eq!(r.z, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn delong_aucs_match_auroc() {
        let a = [0.2, 0.7, 0.4, 0.9, 0.1, 0.6];
        let b = [0.3, 0.5, 0.8, 0.6, 0.2, 0.4];
        let labels = [0, 1, 0, 1, 0, 1];
        let r = delong_test(&a, &b, &labels).unwrap();
        assert!((r.auc_a - auroc(&a, &labels).unwrap()).abs() < 1e-12);
        assert!((r.auc_b - auroc(&b, &labels).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn delong_swap_negates_z_preserves_p() {
        let a = [0.2, 0.7, 0.4, 0.9, 0.1, 0.6, 0.8, 0.3];
        let b = [0.3, 0.5, 0.8, 0.6, 0.2, 0.4, 0.7, 0.1];
        let labels = [0, 1, 0, 1, 0, 1, 1, 0];
        let ab = delong_test(&a, &b, &labels).unwrap();
        let ba = delong_test(&b, &a, &labels).unwrap();
        assert!((ab.z + ba.z).abs() < 1e-12);
        assert!((ab.p_value - ba.p_value).abs() < 1e-12);
    }

    #[test]
    fn delong_csv_layout() {
        let rows = vec![DeLongRow {
            model_a: "camlm".into(),
            model_b: "mlm".into(),
            result: DeLongResult {
                auc_a: 0.9,
                auc_b: 0.8,
                variance: 0.001,
                z: 3.16,
                p_value: 0.0016,
            },
        }];
        let mut buf = Vec::new();
        write_delong_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("model_a,model_b,auc_a,auc_b,z,p\n"));
        assert!(text.contains("camlm,mlm,0.9,0.8,"));
    }

    proptest! {
        #[test]
        fn auroc_matches_brute_force(
            data in prop::collection::vec((0u8..2, 0u32..20), 2..50)
        ) {
            let labels: Vec<u8> = data.iter().map(|(l, _)| *l).collect();
            let scores: Vec<f64> = data.iter().map(|(_, s)| *s as f64 / 20.0).collect();
            prop_assume!(labels.iter().any(|&l| l == 1) && labels.iter().any(|&l| l == 0));
            let fast = auroc(&scores, &labels).unwrap();
            prop_assert!((fast - brute_force_auroc(&scores, &labels)).abs() < 1e-9);
        }

        #[test]
        fn auroc_invariant_under_monotone_transform(
            data in prop::collection::vec((0u8..2, 0u32..50), 2..40)
        ) {
            let labels: Vec<u8> = data.iter().map(|(l, _)| *l).collect();
            let scores: Vec<f64> = data.iter().map(|(_, s)| *s as f64 / 50.0).collect();
            prop_assume!(labels.iter().any(|&l| l == 1) && labels.iter().any(|&l| l == 0));
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s + 1.0).exp()).collect();
            let a = auroc(&scores, &labels).unwrap();
            let b = auroc(&transformed, &labels).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
