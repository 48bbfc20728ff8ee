//! Shared oracles and generators for the acceptance suite. Everything here
//! is written independently of the library implementations it checks:
//! quadratic diff reference, brute-force metrics, and the synthetic
//! planted-signal corpus.

use amendlab::corpus::{ECVersion, Phase, Split, TrialMetadata, TrialRecord};
use amendlab::diffcore::OpTag;
use amendlab::rng::substream;
use chrono::NaiveDate;
use rand::Rng;

/// Longest common block of `a[alo..ahi]` and `b[blo..bhi]` by direct
/// quadratic scan; ties resolve to the smallest `i`, then smallest `j`,
/// matching the reference matcher's documented preference.
fn longest_block<T: Eq>(
    a: &[T],
    b: &[T],
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> (usize, usize, usize) {
    let (mut bi, mut bj, mut bk) = (alo, blo, 0);
    for i in alo..ahi {
        for j in blo..bhi {
            let mut k = 0;
            while i + k < ahi && j + k < bhi && a[i + k] == b[j + k] {
                k += 1;
            }
            if k > bk {
                (bi, bj, bk) = (i, j, k);
            }
        }
    }
    (bi, bj, bk)
}

fn collect_blocks<T: Eq>(
    a: &[T],
    b: &[T],
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
    out: &mut Vec<(usize, usize, usize)>,
) {
    let (i, j, k) = longest_block(a, b, alo, ahi, blo, bhi);
    if k == 0 {
        return;
    }
    collect_blocks(a, b, alo, i, blo, j, out);
    out.push((i, j, k));
    collect_blocks(a, b, i + k, ahi, j + k, bhi, out);
}

/// Opcodes for (a, b) from the quadratic reference. Adjacent blocks are
/// merged before opcode derivation, as in the reference matcher.
pub fn reference_opcodes<T: Eq>(a: &[T], b: &[T]) -> Vec<(OpTag, usize, usize, usize, usize)> {
    let mut blocks = Vec::new();
    collect_blocks(a, b, 0, a.len(), 0, b.len(), &mut blocks);

    let mut merged: Vec<(usize, usize, usize)> = Vec::new();
    for (i, j, k) in blocks {
        if let Some(last) = merged.last_mut() {
            if last.0 + last.2 == i && last.1 + last.2 == j {
                last.2 += k;
                continue;
            }
        }
        merged.push((i, j, k));
    }
    merged.push((a.len(), b.len(), 0));

    let mut opcodes = Vec::new();
    let (mut ai, mut bj) = (0usize, 0usize);
    for (i, j, k) in merged {
        let tag = match (ai < i, bj < j) {
            (true, true) => Some(OpTag::Replace),
            (true, false) => Some(OpTag::Delete),
            (false, true) => Some(OpTag::Insert),
            (false, false) => None,
        };
        if let Some(tag) = tag {
            opcodes.push((tag, ai, i, bj, j));
        }
        if k > 0 {
            opcodes.push((OpTag::Equal, i, i + k, j, j + k));
        }
        ai = i + k;
        bj = j + k;
    }
    opcodes
}

/// All pairs ordered by AUROC's definition, counted directly.
pub fn brute_force_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut concordant = 0.0;
    let mut pairs = 0.0;
    for (i, (&si, &li)) in scores.iter().zip(labels).enumerate() {
        for (&sj, &lj) in scores.iter().zip(labels).skip(i + 1) {
            let (pos, neg) = match (li, lj) {
                (1, 0) => (si, sj),
                (0, 1) => (sj, si),
                _ => continue,
            };
            pairs += 1.0;
            concordant += if pos > neg {
                1.0
            } else if pos == neg {
                0.5
            } else {
                0.0
            };
        }
    }
    concordant / pairs
}

/// Average precision by an explicit threshold sweep over distinct scores.
pub fn brute_force_auprc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let total_pos = labels.iter().filter(|&&l| l == 1).count() as f64;

    let mut ap = 0.0;
    let mut recall_prev = 0.0;
    for &t in &thresholds {
        let tp = scores
            .iter()
            .zip(labels)
            .filter(|(s, &l)| **s >= t && l == 1)
            .count() as f64;
        let predicted = scores.iter().filter(|&&s| s >= t).count() as f64;
        let recall = tp / total_pos;
        let precision = tp / predicted;
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
    }
    ap
}

const PLANTED_SHIFT: f64 = 2.772588722239781; // logit(0.8) - logit(0.2)
const BASE_LOGIT: f64 = -1.3862943611198906; // logit(0.2)

const DISEASE_A: [(&str, f64); 5] = [
    ("melanoma", -4.4),
    ("glioma", -2.2),
    ("asthma", 0.0),
    ("anemia", 2.2),
    ("psoriasis", 4.4),
];
const DISEASE_B: [(&str, f64); 5] = [
    ("hypertension", -4.4),
    ("gastritis", -2.2),
    ("arthritis", 0.0),
    ("dermatitis", 2.2),
    ("neuropathy", 4.4),
];
const INTERVENTIONS: [(&str, f64); 3] = [
    ("placebo", -3.2),
    ("metformin", 0.0),
    ("osimertinib", 3.2),
];
const PHASES: [(Phase, f64); 3] = [
    (Phase::Phase1, -2.2),
    (Phase::Phase2, 0.0),
    (Phase::Phase3, 2.2),
];
// each EC signal is a three-way choice: negative phrase / absent / positive
const EC_SIGNALS: [(&str, &str, f64); 4] = [
    (
        "No concomitant anticoagulant therapy",
        "Continuous cardiac telemetry required",
        3.6,
    ),
    (
        "Stable antihypertensive regimen for 30 days",
        "Weekly hepatic function monitoring required",
        3.0,
    ),
    (
        "Willing to abstain from grapefruit products",
        "Mandatory overnight observation after dosing",
        2.4,
    ),
    (
        "Documented vaccination history on file",
        "Serial tumor biopsies at weeks 2 and 6",
        2.4,
    ),
];
pub const PLANTED_PHRASE: &str = "Requires prior biomarker stratification panel";

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Synthetic planted-signal corpus. The planted phrase alone moves the
/// amendment probability from 0.2 to 0.8 (all other signals at baseline);
/// the extra metadata and EC signals widen the logit spread so the
/// generating probabilities separate the classes well beyond that.
/// Returns the records alongside each trial's generating probability.
pub fn synthetic_corpus(n: usize, seed: u64) -> (Vec<TrialRecord>, Vec<f64>) {
    let mut records = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = substream(seed, &format!("synth/{i}"));
        let planted = rng.gen::<f64>() < 0.5;
        let mut logit = BASE_LOGIT + if planted { PLANTED_SHIFT } else { 0.0 };

        let da = DISEASE_A[rng.gen_range(0..DISEASE_A.len())];
        let db = DISEASE_B[rng.gen_range(0..DISEASE_B.len())];
        let iv = INTERVENTIONS[rng.gen_range(0..INTERVENTIONS.len())];
        let ph = PHASES[rng.gen_range(0..PHASES.len())];
        logit += da.1 + db.1 + iv.1 + ph.1;

        let mut signal_items = Vec::new();
        for (neg, pos, shift) in EC_SIGNALS {
            match rng.gen_range(0..3) {
                0 => {
                    signal_items.push(neg);
                    logit -= shift;
                }
                2 => {
                    signal_items.push(pos);
                    logit += shift;
                }
                _ => {}
            }
        }

        let p = sigmoid(logit);
        let y = u8::from(rng.gen::<f64>() < p);

        let mut items = vec!["Age >= 18 years".to_string(), "ECOG performance status 0-1".to_string()];
        if planted {
            items.push(PLANTED_PHRASE.to_string());
        }
        items.extend(signal_items.iter().map(|s| s.to_string()));
        let initial = format!(
            "Inclusion Criteria:\n{}\nExclusion Criteria:\n- Pregnancy",
            items
                .iter()
                .map(|i| format!("- {i}"))
                .collect::<Vec<_>>()
                .join("\n")
        );

        let mut ec_versions = vec![ECVersion {
            version_index: 0,
            timestamp: NaiveDate::from_ymd_opt(2019, 1, 15).unwrap(),
            text: initial.clone(),
        }];
        if y == 1 {
            let amended = initial
                .replace("Age >= 18 years", "Age >= 21 years")
                + "\n- No prior chemotherapy within 6 months";
            ec_versions.push(ECVersion {
                version_index: 1,
                timestamp: NaiveDate::from_ymd_opt(2019, 9, 15).unwrap(),
                text: amended,
            });
        }

        let split = if i < n * 7 / 10 {
            Split::Train
        } else if i < n * 17 / 20 {
            Split::Validation
        } else {
            Split::Test
        };
        records.push(TrialRecord {
            trial_id: format!("NCT{:08}", 20_000_000 + i),
            ec_versions,
            metadata: TrialMetadata {
                title: format!("Synthetic study {i}"),
                description: String::new(),
                diseases: vec![da.0.to_string(), db.0.to_string()],
                interventions: vec![iv.0.to_string()],
                phase: ph.0,
                status: "Completed".to_string(),
            },
            label_registry: Some(y),
            label_llm: None,
            label_human: None,
            amendment_count: None,
            split,
        });
        probs.push(p);
    }
    (records, probs)
}
