//! Amendment label production: the deterministic rule engine, LLM check
//! orchestration, verdict parsing and aggregation, and agreement scoring.

mod llm;
mod rules;

pub use llm::{
    CachingClient, DecodeConfig, HttpLlmClient, LlmClient, LlmClientConfig, MockLlmClient,
};
pub use rules::{rule_label, RuleConfig};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::TrialRecord;
use crate::diffcore::{diff, render_unified, split_lines_for_prompt, Granularity};

#[derive(Debug, Error)]
pub enum LabelingError {
    #[error("no parseable verdict after {attempts} attempts")]
    UnparseableVerdict { attempts: u32, raw_response: String },
    #[error("LLM transport error: {0}")]
    Transport(String),
    #[error("label sets cover different trial ids ({only_a} only in A, {only_b} only in B)")]
    IdSetMismatch { only_a: usize, only_b: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Add,
    Remove,
    Modify,
}

impl CheckKind {
    pub const ALL: [CheckKind; 3] = [CheckKind::Add, CheckKind::Remove, CheckKind::Modify];
}

/// Outcome of one denoising check, with the full transcript for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub check: CheckKind,
    pub verdict: u8,
    pub raw_response: String,
    pub parse_attempts: u32,
    pub prompt_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelOrigin {
    Registry,
    Rules,
    Llm,
    Human,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentVerdicts {
    pub add: u8,
    pub remove: u8,
    pub modify: u8,
}

impl ComponentVerdicts {
    pub fn any(&self) -> u8 {
        u8::from(self.add == 1 || self.remove == 1 || self.modify == 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmendmentLabel {
    pub trial_id: String,
    pub label: u8,
    pub source: LabelOrigin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<ComponentVerdicts>,
}

const TEMPLATE_ADDED: &str = include_str!("../../prompts/criteria_added.txt");
const TEMPLATE_REMOVED: &str = include_str!("../../prompts/criteria_removed.txt");
const TEMPLATE_MODIFIED: &str = include_str!("../../prompts/criteria_modified.txt");
const EXAMPLE_ADDED: &str = include_str!("../../prompts/example_added.txt");
const EXAMPLE_REMOVED: &str = include_str!("../../prompts/example_removed.txt");
const EXAMPLE_MODIFIED: &str = include_str!("../../prompts/example_modified.txt");

pub fn prompt_template(check: CheckKind) -> &'static str {
    match check {
        CheckKind::Add => TEMPLATE_ADDED,
        CheckKind::Remove => TEMPLATE_REMOVED,
        CheckKind::Modify => TEMPLATE_MODIFIED,
    }
}

pub fn one_shot_example(check: CheckKind) -> &'static str {
    match check {
        CheckKind::Add => EXAMPLE_ADDED,
        CheckKind::Remove => EXAMPLE_REMOVED,
        CheckKind::Modify => EXAMPLE_MODIFIED,
    }
}

/// Fill the check's template with its canonical one-shot example and the
/// rendered diff. Byte-deterministic.
pub fn build_prompt(check: CheckKind, diff_text: &str) -> String {
    prompt_template(check)
        .replace("{example}", one_shot_example(check).trim_end())
        .replace("{difference}", diff_text.trim_end())
}

pub fn prompt_hash(prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Parse the LAST line exactly matching `Final output: 0|1` (case-sensitive,
/// surrounding whitespace ignored).
fn parse_verdict(response: &str) -> Option<u8> {
    response.lines().rev().find_map(|line| match line.trim() {
        "Final output: 0" => Some(0),
        "Final output: 1" => Some(1),
        _ => None,
    })
}

const FORMAT_REMINDER: &str = "\n\nYour final answer must be a single line at the end in the following format (case-sensitive):\n\nFinal output: 0\nor\nFinal output: 1";

/// Run one denoising check, retrying on parse failure with an appended
/// restatement of the output format.
pub fn run_check(
    check: CheckKind,
    diff_text: &str,
    client: &dyn LlmClient,
    decode: &DecodeConfig,
    max_retries: u32,
) -> Result<CheckVerdict, LabelingError> {
    let base_prompt = build_prompt(check, diff_text);
    let mut last_response = String::new();
    for attempt in 0..=max_retries {
        let prompt = if attempt == 0 {
            base_prompt.clone()
        } else {
            format!("{base_prompt}{FORMAT_REMINDER}")
        };
        let response = client
            .complete(&prompt, decode)
            .map_err(LabelingError::Transport)?;
        if let Some(verdict) = parse_verdict(&response) {
            return Ok(CheckVerdict {
                check,
                verdict,
                raw_response: response,
                parse_attempts: attempt + 1,
                prompt_hash: prompt_hash(&prompt),
            });
        }
        last_response = response;
    }
    Err(LabelingError::UnparseableVerdict {
        attempts: max_retries + 1,
        raw_response: last_response,
    })
}

#[derive(Debug, Clone)]
pub struct DenoiseConfig {
    pub decode: DecodeConfig,
    pub max_parse_retries: u32,
    pub context_lines: usize,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            decode: DecodeConfig::default(),
            max_parse_retries: 2,
            context_lines: crate::diffcore::DEFAULT_CONTEXT_LINES,
        }
    }
}

/// Render the line diff between a trial's first and final EC versions.
pub fn first_final_diff(trial: &TrialRecord, context_lines: usize) -> String {
    let a = split_lines_for_prompt(&trial.first_version().text);
    let b = split_lines_for_prompt(&trial.final_version().text);
    let d = diff(&a, &b, Granularity::Line);
    render_unified(&d, &a, &b, context_lines).expect("line diff renders")
}

/// LLM-denoised amendment label: OR over the three checks on the first/final
/// diff. An empty diff short-circuits to label 0 without LLM calls.
pub fn denoise_label(
    trial: &TrialRecord,
    client: &dyn LlmClient,
    config: &DenoiseConfig,
) -> Result<AmendmentLabel, LabelingError> {
    let diff_text = first_final_diff(trial, config.context_lines);
    if diff_text.is_empty() {
        return Ok(AmendmentLabel {
            trial_id: trial.trial_id.clone(),
            label: 0,
            source: LabelOrigin::Llm,
            components: Some(ComponentVerdicts::default()),
        });
    }
    let mut components = ComponentVerdicts::default();
    for check in CheckKind::ALL {
        let verdict = run_check(check, &diff_text, client, &config.decode, config.max_parse_retries)?;
        match check {
            CheckKind::Add => components.add = verdict.verdict,
            CheckKind::Remove => components.remove = verdict.verdict,
            CheckKind::Modify => components.modify = verdict.verdict,
        }
    }
    Ok(AmendmentLabel {
        trial_id: trial.trial_id.clone(),
        label: components.any(),
        source: LabelOrigin::Llm,
        components: Some(components),
    })
}

/// A trial excluded from the output set because a check failed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reject {
    pub trial_id: String,
    pub error: String,
}

/// Denoise a batch of trials. Results and rejects are ordered by trial_id so
/// output files are deterministic regardless of worker count.
pub fn denoise_batch(
    trials: &[TrialRecord],
    client: &(dyn LlmClient + Sync),
    config: &DenoiseConfig,
) -> (Vec<AmendmentLabel>, Vec<Reject>) {
    #[cfg(feature = "parallel")]
    let results: Vec<(String, Result<AmendmentLabel, LabelingError>)> = {
        use rayon::prelude::*;
        trials
            .par_iter()
            .map(|t| (t.trial_id.clone(), denoise_label(t, client, config)))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(String, Result<AmendmentLabel, LabelingError>)> = trials
        .iter()
        .map(|t| (t.trial_id.clone(), denoise_label(t, client, config)))
        .collect();

    let mut labels = Vec::new();
    let mut rejects = Vec::new();
    for (trial_id, result) in results {
        match result {
            Ok(label) => labels.push(label),
            Err(err) => rejects.push(Reject {
                trial_id,
                error: err.to_string(),
            }),
        }
    }
    labels.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));
    rejects.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));
    (labels, rejects)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgreementReport {
    pub n: usize,
    pub mismatches: usize,
    pub match_rate: f64,
    /// Match rate as a percentage rounded to two decimals.
    pub match_rate_percent: f64,
}

pub fn agreement_from_counts(n: usize, mismatches: usize) -> AgreementReport {
    let match_rate = (n - mismatches) as f64 / n as f64;
    AgreementReport {
        n,
        mismatches,
        match_rate,
        match_rate_percent: (match_rate * 10000.0).round() / 100.0,
    }
}

/// Agreement between two label sets over the same trial ids.
pub fn agreement(
    labels_a: &[AmendmentLabel],
    labels_b: &[AmendmentLabel],
) -> Result<AgreementReport, LabelingError> {
    let a: BTreeMap<&str, u8> = labels_a.iter().map(|l| (l.trial_id.as_str(), l.label)).collect();
    let b: BTreeMap<&str, u8> = labels_b.iter().map(|l| (l.trial_id.as_str(), l.label)).collect();
    let only_a = a.keys().filter(|k| !b.contains_key(**k)).count();
    let only_b = b.keys().filter(|k| !a.contains_key(**k)).count();
    if only_a > 0 || only_b > 0 {
        return Err(LabelingError::IdSetMismatch { only_a, only_b });
    }
    let mismatches = a.iter().filter(|(k, v)| b[**k] != **v).count();
    Ok(agreement_from_counts(a.len(), mismatches))
}
