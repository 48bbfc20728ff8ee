//! Version pairing and masking-plan generation.
//!
//! Three policies share one sampler: MLM masks every position at a flat
//! rate, CAMLM masks tokens inside unstable spans (changes against the
//! final version) at `p_span` and the rest at `p_low`, and Span-MLM applies
//! the same two rates to spans from consecutive-version diffs. Plans are
//! pure functions of (pair, policy, seed): every pair draws from its own
//! RNG substream, so worker count and corpus composition never change the
//! output.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TrialRecord;
use crate::diffcore::{diff, unstable_spans, Granularity, UnstableSpanSet};
use crate::rng::substream;
use crate::textprep::{tokenize_basic, TokenSequence};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const DEFAULT_P_SPAN: f64 = 0.8;
pub const DEFAULT_P_LOW: f64 = 0.05;
pub const DEFAULT_P_MLM: f64 = 0.15;
pub const DEFAULT_MAX_WINDOW: usize = 512;

#[derive(Debug, Error)]
pub enum CamlmError {
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("mask token {0:?} absent from vocabulary")]
    MaskTokenMissing(String),
}

/// Masking policy with its sampling rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum MaskPolicy {
    Mlm { p: f64 },
    SpanMlm { p_span: f64, p_low: f64 },
    Camlm { p_span: f64, p_low: f64 },
}

impl MaskPolicy {
    pub fn mlm() -> Self {
        Self::Mlm { p: DEFAULT_P_MLM }
    }

    pub fn span_mlm() -> Self {
        Self::SpanMlm {
            p_span: DEFAULT_P_SPAN,
            p_low: DEFAULT_P_LOW,
        }
    }

    pub fn camlm() -> Self {
        Self::Camlm {
            p_span: DEFAULT_P_SPAN,
            p_low: DEFAULT_P_LOW,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mlm { .. } => "mlm",
            Self::SpanMlm { .. } => "span_mlm",
            Self::Camlm { .. } => "camlm",
        }
    }

    fn validate(&self) -> Result<(), CamlmError> {
        let probs = match *self {
            Self::Mlm { p } => vec![p],
            Self::SpanMlm { p_span, p_low } | Self::Camlm { p_span, p_low } => {
                vec![p_span, p_low]
            }
        };
        for p in probs {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(CamlmError::InvalidProbability(p));
            }
        }
        Ok(())
    }

    fn rate_at(&self, position: usize, unstable: &UnstableSpanSet) -> f64 {
        match *self {
            Self::Mlm { p } => p,
            Self::SpanMlm { p_span, p_low } | Self::Camlm { p_span, p_low } => {
                if unstable.contains(position) {
                    p_span
                } else {
                    p_low
                }
            }
        }
    }
}

/// An earlier EC version paired with a later one, carrying the earlier
/// version's tokens and the spans that change.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VersionPair {
    pub trial_id: String,
    /// earlier version index
    pub t: u32,
    /// later version index (the final version under CAMLM pairing)
    pub pair_end: u32,
    pub tokens_earlier: TokenSequence,
    pub unstable: UnstableSpanSet,
}

fn pair_versions(trial: &TrialRecord, t: usize, end: usize) -> VersionPair {
    let earlier = tokenize_basic(&trial.ec_versions[t].text);
    let unstable = if t == end {
        UnstableSpanSet { spans: Vec::new() }
    } else {
        let later = tokenize_basic(&trial.ec_versions[end].text);
        let d = diff(&earlier.tokens, &later.tokens, Granularity::Token);
        unstable_spans(&d).expect("token-granularity diff")
    };
    VersionPair {
        trial_id: trial.trial_id.clone(),
        t: trial.ec_versions[t].version_index,
        pair_end: trial.ec_versions[end].version_index,
        tokens_earlier: earlier,
        unstable,
    }
}

/// Final-version pairing: (v0, vT), …, (v_{T-1}, vT); a single-version
/// trial yields one (v0, v0) pair with no unstable spans.
pub fn make_pairs(trial: &TrialRecord) -> Vec<VersionPair> {
    let n = trial.ec_versions.len();
    if n == 1 {
        return vec![pair_versions(trial, 0, 0)];
    }
    (0..n - 1).map(|t| pair_versions(trial, t, n - 1)).collect()
}

/// Consecutive-version pairing (v_t, v_{t+1}) used by the Span-MLM policy.
pub fn make_consecutive_pairs(trial: &TrialRecord) -> Vec<VersionPair> {
    let n = trial.ec_versions.len();
    if n == 1 {
        return vec![pair_versions(trial, 0, 0)];
    }
    (0..n - 1).map(|t| pair_versions(trial, t, t + 1)).collect()
}

/// Per-token mask decisions for one pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskingPlan {
    pub pair: VersionPair,
    pub policy: MaskPolicy,
    pub masked_positions: Vec<usize>,
    pub seed: u64,
}

/// Sample mask positions for one pair. Deterministic: the RNG substream is
/// keyed by (seed, trial_id, t), independent of all other pairs.
pub fn plan_masks(
    pair: &VersionPair,
    policy: MaskPolicy,
    seed: u64,
) -> Result<MaskingPlan, CamlmError> {
    policy.validate()?;
    let context = format!("camlm/{}/{}", pair.trial_id, pair.t);
    let mut rng = substream(seed, &context);
    let mut masked_positions = Vec::new();
    for position in 0..pair.tokens_earlier.len() {
        let rate = policy.rate_at(position, &pair.unstable);
        if rand::Rng::gen::<f64>(&mut rng) < rate {
            masked_positions.push(position);
        }
    }
    Ok(MaskingPlan {
        pair: pair.clone(),
        policy,
        masked_positions,
        seed,
    })
}

/// Generate plans for a whole corpus slice, in deterministic
/// (trial_id, t) order. Span-MLM uses consecutive pairing; the other
/// policies pair against the final version.
pub fn plan_corpus(
    trials: &[TrialRecord],
    policy: MaskPolicy,
    seed: u64,
) -> Result<Vec<MaskingPlan>, CamlmError> {
    policy.validate()?;
    let pair_fn = match policy {
        MaskPolicy::SpanMlm { .. } => make_consecutive_pairs,
        _ => make_pairs,
    };

    #[cfg(feature = "parallel")]
    let mut plans: Vec<MaskingPlan> = trials
        .par_iter()
        .flat_map_iter(|t| pair_fn(t).into_iter())
        .map(|p| plan_masks(&p, policy, seed).expect("policy already validated"))
        .collect();

    #[cfg(not(feature = "parallel"))]
    let mut plans: Vec<MaskingPlan> = trials
        .iter()
        .flat_map(|t| pair_fn(t).into_iter())
        .map(|p| plan_masks(&p, policy, seed).expect("policy already validated"))
        .collect();

    plans.sort_by(|a, b| {
        (a.pair.trial_id.as_str(), a.pair.t).cmp(&(b.pair.trial_id.as_str(), b.pair.t))
    });
    Ok(plans)
}

/// Sequential plan generation regardless of feature flags (benchmark
/// baseline). Produces the same plans as [`plan_corpus`].
pub fn plan_corpus_sequential(
    trials: &[TrialRecord],
    policy: MaskPolicy,
    seed: u64,
) -> Result<Vec<MaskingPlan>, CamlmError> {
    policy.validate()?;
    let pair_fn = match policy {
        MaskPolicy::SpanMlm { .. } => make_consecutive_pairs,
        _ => make_pairs,
    };
    let mut plans: Vec<MaskingPlan> = trials
        .iter()
        .flat_map(|t| pair_fn(t).into_iter())
        .map(|p| plan_masks(&p, policy, seed).expect("policy already validated"))
        .collect();
    plans.sort_by(|a, b| {
        (a.pair.trial_id.as_str(), a.pair.t).cmp(&(b.pair.trial_id.as_str(), b.pair.t))
    });
    Ok(plans)
}

/// One trainer-ready input/supervision record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedInstance {
    pub trial_id: String,
    pub t: u32,
    #[serde(rename = "T")]
    pub pair_end: u32,
    pub policy: String,
    pub seed: u64,
    pub input_tokens: Vec<String>,
    /// positions relative to the window start
    pub masked_positions: Vec<usize>,
    pub targets: Vec<String>,
}

#[derive(Debug, Default)]
pub struct EmitSummary {
    pub instances: Vec<MaskedInstance>,
    /// windows skipped because no position was masked
    pub skipped_zero_mask: usize,
}

/// Materialize instances from plans, windowing long documents into
/// `max_window`-token segments. Windows with no masked position are
/// skipped and counted.
pub fn emit_instances(
    plans: &[MaskingPlan],
    mask_token: &str,
    vocab: Option<&crate::textprep::Vocab>,
    max_window: usize,
) -> Result<EmitSummary, CamlmError> {
    if let Some(v) = vocab {
        if !v.contains(mask_token) {
            return Err(CamlmError::MaskTokenMissing(mask_token.to_string()));
        }
    }
    let max_window = max_window.max(1);
    let mut summary = EmitSummary::default();
    for plan in plans {
        let tokens = &plan.pair.tokens_earlier.tokens;
        let mut window_start = 0;
        while window_start < tokens.len() || (tokens.is_empty() && window_start == 0) {
            let window_end = (window_start + max_window).min(tokens.len());
            let in_window: Vec<usize> = plan
                .masked_positions
                .iter()
                .filter(|&&p| p >= window_start && p < window_end)
                .map(|&p| p - window_start)
                .collect();
            if in_window.is_empty() {
                summary.skipped_zero_mask += 1;
            } else {
                let mut input: Vec<String> = tokens[window_start..window_end].to_vec();
                let targets: Vec<String> =
                    in_window.iter().map(|&p| input[p].clone()).collect();
                for &p in &in_window {
                    input[p] = mask_token.to_string();
                }
                summary.instances.push(MaskedInstance {
                    trial_id: plan.pair.trial_id.clone(),
                    t: plan.pair.t,
                    pair_end: plan.pair.pair_end,
                    policy: plan.policy.name().to_string(),
                    seed: plan.seed,
                    input_tokens: input,
                    masked_positions: in_window,
                    targets,
                });
            }
            if tokens.is_empty() {
                break;
            }
            window_start = window_end;
        }
    }
    Ok(summary)
}

/// Write instances as newline-delimited JSON.
pub fn write_instances_jsonl<W: Write>(
    instances: &[MaskedInstance],
    mut writer: W,
) -> std::io::Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut writer, inst)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
