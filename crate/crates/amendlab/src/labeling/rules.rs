//! Deterministic rule engine for amendment labels.
//!
//! Mirrors the human annotation procedure: a registry label of 0 is trusted
//! as-is; otherwise addition, removal, and modification checks run over
//! segmented, normalized criteria. Formatting, case, punctuation, marker,
//! and reordering changes are neutralized by normalization and set
//! semantics; synonym and abbreviation equivalence comes from an editable
//! table.

use std::collections::BTreeSet;

use crate::diffcore::{diff, Granularity};
use crate::textprep::{normalize, segment_criteria_with, tokenize_basic, SegmentConfig};

use super::{AmendmentLabel, ComponentVerdicts, LabelOrigin};

#[derive(Debug, Clone)]
pub struct RuleConfig {
    /// Minimum similarity ratio for pairing criteria in the modification
    /// check.
    pub tau_align: f64,
    /// (variant, canonical) phrase pairs treated as equivalent.
    pub equivalences: Vec<(String, String)>,
    /// Tokens ignored by the modification check's content comparison.
    pub stopwords: Vec<String>,
    pub segment: SegmentConfig,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            tau_align: 0.6,
            equivalences: vec![
                ("electrocardiogram".into(), "ecg".into()),
                ("high blood pressure".into(), "hypertension".into()),
            ],
            stopwords: ["a", "an", "the", "of", "to", "in", "for", "be", "is", "are", "with"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            segment: SegmentConfig::default(),
        }
    }
}

fn replace_phrase(text: &str, from: &str, to: &str) -> String {
    // whole-phrase replacement with word boundaries
    let padded = format!(" {text} ");
    let replaced = padded.replace(&format!(" {from} "), &format!(" {to} "));
    replaced.trim().to_string()
}

fn canonicalize(item: &str, config: &RuleConfig) -> String {
    let mut s = normalize(item);
    for (variant, canonical) in &config.equivalences {
        s = replace_phrase(&s, variant, canonical);
    }
    s
}

fn content_tokens(item: &str, config: &RuleConfig) -> (Vec<String>, Vec<String>) {
    let toks = tokenize_basic(item);
    let mut numeric: Vec<String> = toks
        .tokens
        .iter()
        .filter(|t| t.chars().any(|c| c.is_ascii_digit()))
        .cloned()
        .collect();
    let mut content: Vec<String> = toks
        .tokens
        .iter()
        .filter(|t| {
            t.chars().any(char::is_alphanumeric) && !config.stopwords.iter().any(|s| s == *t)
        })
        .cloned()
        .collect();
    numeric.sort_unstable();
    content.sort_unstable();
    (numeric, content)
}

fn similarity(a: &str, b: &str) -> f64 {
    let ta = tokenize_basic(a).tokens;
    let tb = tokenize_basic(b).tokens;
    diff(&ta, &tb, Granularity::Token).similarity_ratio
}

/// Rule-based amendment label from the first and final EC versions plus the
/// registry label.
pub fn rule_label(
    ec_first: &str,
    ec_final: &str,
    registry_label: u8,
    config: &RuleConfig,
) -> AmendmentLabel {
    let mut components = ComponentVerdicts::default();

    if registry_label != 0 {
        let first_items: Vec<String> = segment_criteria_with(ec_first, &config.segment)
            .all_items()
            .map(|i| canonicalize(i, config))
            .collect();
        let final_items: Vec<String> = segment_criteria_with(ec_final, &config.segment)
            .all_items()
            .map(|i| canonicalize(i, config))
            .collect();
        let first_set: BTreeSet<&str> = first_items.iter().map(String::as_str).collect();
        let final_set: BTreeSet<&str> = final_items.iter().map(String::as_str).collect();

        components.add = u8::from(final_items.iter().any(|c| !first_set.contains(c.as_str())));
        components.remove = u8::from(first_items.iter().any(|c| !final_set.contains(c.as_str())));

        // modification check: greedy best-match alignment among unmatched items
        let mut unmatched_first: Vec<&String> = first_items
            .iter()
            .filter(|c| !final_set.contains(c.as_str()))
            .collect();
        let mut unmatched_final: Vec<&String> = final_items
            .iter()
            .filter(|c| !first_set.contains(c.as_str()))
            .collect();
        while !unmatched_first.is_empty() && !unmatched_final.is_empty() {
            let mut best: Option<(usize, usize, f64)> = None;
            for (i, fi) in unmatched_first.iter().enumerate() {
                for (j, fj) in unmatched_final.iter().enumerate() {
                    let s = similarity(fi, fj);
                    if best.is_none_or(|(_, _, bs)| s > bs) {
                        best = Some((i, j, s));
                    }
                }
            }
            let (i, j, s) = best.expect("non-empty candidate sets");
            if s < config.tau_align {
                break;
            }
            let old = unmatched_first.swap_remove(i);
            let new = unmatched_final.swap_remove(j);
            let (num_old, content_old) = content_tokens(old, config);
            let (num_new, content_new) = content_tokens(new, config);
            if num_old != num_new || content_old != content_new {
                components.modify = 1;
            }
        }
    }

    AmendmentLabel {
        trial_id: String::new(),
        label: components.any(),
        source: LabelOrigin::Rules,
        components: Some(components),
    }
}
