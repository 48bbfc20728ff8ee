//! Trial data model, JSONL ingestion with invariant validation, split
//! accounting, and descriptive statistics.

mod fetch;
mod stats;

pub use fetch::{
    ArchivePayload, ArchiveVersion, EndpointConfig, FetchClient, FetchError, HttpTransport,
    Transport, TransportResponse, CACHE_DIR_ENV,
};
pub use stats::{
    amendment_count_stats, amendment_rates, AmendmentCountStats, AmendmentRateReport,
    AmendmentRateRow, CountingMode, GroupBy,
};

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read corpus file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed JSON: {source}")]
    MalformedLine {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: schema_version {found:?} does not match expected {expected:?}")]
    SchemaVersionMismatch {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("line {line}: duplicate trial_id {id:?}")]
    DuplicateTrialId { line: usize, id: String },
    #[error("line {line}: trial {id:?} violates invariant: {message}")]
    InvariantViolation {
        line: usize,
        id: String,
        message: String,
    },
    #[error("test record {id:?} is missing label_human")]
    TestMissingHumanLabel { id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Validation => write!(f, "validation"),
            Split::Test => write!(f, "test"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Phase {
    EarlyPhase1,
    Phase1,
    Phase1_2,
    Phase2,
    Phase2_3,
    Phase3,
    Phase4,
    #[default]
    NA,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::EarlyPhase1 => "EarlyPhase1",
            Phase::Phase1 => "Phase1",
            Phase::Phase1_2 => "Phase1_2",
            Phase::Phase2 => "Phase2",
            Phase::Phase2_3 => "Phase2_3",
            Phase::Phase3 => "Phase3",
            Phase::Phase4 => "Phase4",
            Phase::NA => "NA",
        };
        write!(f, "{s}")
    }
}

/// Which label slot of a [`TrialRecord`] to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Registry,
    Llm,
    Human,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialMetadata {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
    /// MeSH-standardized condition strings, lowercase-normalized.
    #[serde(default)]
    pub diseases: Vec<String>,
    #[serde(default)]
    pub interventions: Vec<String>,
    #[serde(default)]
    pub phase: Phase,
    #[serde(default)]
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ECVersion {
    pub version_index: u32,
    pub timestamp: NaiveDate,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    pub ec_versions: Vec<ECVersion>,
    #[serde(default)]
    pub metadata: TrialMetadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_registry: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_llm: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_human: Option<u8>,
    /// Registry-reported amendment count, when the input carries one; when
    /// absent the count is derived as `ec_versions.len() - 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amendment_count: Option<u32>,
    pub split: Split,
}

impl TrialRecord {
    pub fn label(&self, source: LabelSource) -> Option<u8> {
        match source {
            LabelSource::Registry => self.label_registry,
            LabelSource::Llm => self.label_llm,
            LabelSource::Human => self.label_human,
        }
    }

    pub fn first_version(&self) -> &ECVersion {
        &self.ec_versions[0]
    }

    pub fn final_version(&self) -> &ECVersion {
        self.ec_versions.last().expect("ec_versions is non-empty")
    }

    fn validate(&self) -> Result<(), String> {
        if self.ec_versions.is_empty() {
            return Err("ec_versions must be non-empty".into());
        }
        for pair in self.ec_versions.windows(2) {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(format!(
                    "ec_versions timestamps must be strictly increasing ({} then {})",
                    pair[0].timestamp, pair[1].timestamp
                ));
            }
        }
        if self.ec_versions[0].text.trim().is_empty() {
            return Err("initial EC version text must be non-empty".into());
        }
        if self.label_human.is_some() && self.split != Split::Test {
            return Err("label_human may be set only on split=test records".into());
        }
        for (name, label) in [
            ("label_registry", self.label_registry),
            ("label_llm", self.label_llm),
            ("label_human", self.label_human),
        ] {
            if let Some(v) = label {
                if v > 1 {
                    return Err(format!("{name} must be 0 or 1, got {v}"));
                }
            }
        }
        Ok(())
    }
}

/// Wire format of one `trials.jsonl` line: a [`TrialRecord`] plus the
/// required `schema_version` field.
#[derive(Debug, Serialize, Deserialize)]
struct RecordLine {
    schema_version: String,
    #[serde(flatten)]
    record: TrialRecord,
}

/// Per-field counts of metadata fields that were absent in the input.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MissingFieldReport {
    pub title: usize,
    pub description: usize,
    pub diseases: usize,
    pub interventions: usize,
    pub phase: usize,
    pub status: usize,
}

impl MissingFieldReport {
    fn record_has_missing(v: &serde_json::Value) -> bool {
        let meta = &v["metadata"];
        !meta.is_object()
            || ["title", "description", "diseases", "interventions", "phase", "status"]
                .iter()
                .any(|f| meta.get(f).is_none())
    }

    fn tally(&mut self, v: &serde_json::Value) {
        let meta = &v["metadata"];
        let missing = |field: &str| !meta.is_object() || meta.get(field).is_none();
        if missing("title") {
            self.title += 1;
        }
        if missing("description") {
            self.description += 1;
        }
        if missing("diseases") {
            self.diseases += 1;
        }
        if missing("interventions") {
            self.interventions += 1;
        }
        if missing("phase") {
            self.phase += 1;
        }
        if missing("status") {
            self.status += 1;
        }
    }
}

/// Validated, read-only corpus. Record order matches the input file.
#[derive(Debug, Clone)]
pub struct Corpus {
    records: Vec<TrialRecord>,
    by_id: HashMap<String, usize>,
    missing_fields: MissingFieldReport,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Reproduce the upstream filtering: drop records with any missing
    /// metadata field instead of defaulting it.
    pub drop_missing: bool,
}

impl Corpus {
    pub fn from_records(records: Vec<TrialRecord>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            rec.validate().map_err(|message| CorpusError::InvariantViolation {
                line: i + 1,
                id: rec.trial_id.clone(),
                message,
            })?;
            if by_id.insert(rec.trial_id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateTrialId {
                    line: i + 1,
                    id: rec.trial_id.clone(),
                });
            }
        }
        Ok(Self {
            records,
            by_id,
            missing_fields: MissingFieldReport::default(),
        })
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, trial_id: &str) -> Option<&TrialRecord> {
        self.by_id.get(trial_id).map(|&i| &self.records[i])
    }

    pub fn missing_fields(&self) -> &MissingFieldReport {
        &self.missing_fields
    }

    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> Result<(), CorpusError> {
        for rec in &self.records {
            let line = RecordLine {
                schema_version: SCHEMA_VERSION.to_string(),
                record: rec.clone(),
            };
            serde_json::to_writer(&mut w, &line).map_err(std::io::Error::other)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Ingest a JSONL corpus file, validating every record.
pub fn ingest_corpus(path: &Path, schema_version: &str) -> Result<Corpus, CorpusError> {
    ingest_corpus_with(path, schema_version, &IngestOptions::default())
}

pub fn ingest_corpus_with(
    path: &Path,
    schema_version: &str,
    options: &IngestOptions,
) -> Result<Corpus, CorpusError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut missing_fields = MissingFieldReport::default();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|source| CorpusError::MalformedLine { line: line_no, source })?;
        let parsed: RecordLine = serde_json::from_value(value.clone())
            .map_err(|source| CorpusError::MalformedLine { line: line_no, source })?;
        if parsed.schema_version != schema_version {
            return Err(CorpusError::SchemaVersionMismatch {
                line: line_no,
                expected: schema_version.to_string(),
                found: parsed.schema_version,
            });
        }
        if options.drop_missing && MissingFieldReport::record_has_missing(&value) {
            continue;
        }
        missing_fields.tally(&value);

        let mut rec = parsed.record;
        for d in &mut rec.metadata.diseases {
            *d = d.to_lowercase();
        }
        rec.validate().map_err(|message| CorpusError::InvariantViolation {
            line: line_no,
            id: rec.trial_id.clone(),
            message,
        })?;
        if by_id.contains_key(&rec.trial_id) {
            return Err(CorpusError::DuplicateTrialId {
                line: line_no,
                id: rec.trial_id,
            });
        }
        by_id.insert(rec.trial_id.clone(), records.len());
        records.push(rec);
    }

    Ok(Corpus {
        records,
        by_id,
        missing_fields,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LabelCounts {
    pub total: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SplitCounts {
    pub n: usize,
    pub registry: LabelCounts,
    pub llm: LabelCounts,
    pub human: LabelCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SplitReport {
    pub train: SplitCounts,
    pub validation: SplitCounts,
    pub test: SplitCounts,
}

impl SplitReport {
    pub fn split(&self, split: Split) -> &SplitCounts {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }
}

/// Per-split record counts and positive/negative counts per label source.
/// Every test record must carry a human label.
pub fn validate_splits(corpus: &Corpus) -> Result<SplitReport, CorpusError> {
    let mut report = SplitReport::default();
    for rec in corpus.records() {
        if rec.split == Split::Test && rec.label_human.is_none() {
            return Err(CorpusError::TestMissingHumanLabel {
                id: rec.trial_id.clone(),
            });
        }
        let counts = match rec.split {
            Split::Train => &mut report.train,
            Split::Validation => &mut report.validation,
            Split::Test => &mut report.test,
        };
        counts.n += 1;
        for (slot, label) in [
            (&mut counts.registry, rec.label_registry),
            (&mut counts.llm, rec.label_llm),
            (&mut counts.human, rec.label_human),
        ] {
            if let Some(v) = label {
                slot.total += 1;
                if v == 1 {
                    slot.positive += 1;
                } else {
                    slot.negative += 1;
                }
            }
        }
    }
    Ok(report)
}
