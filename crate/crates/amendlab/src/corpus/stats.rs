//! Descriptive statistics over a corpus: amendment counts and amendment
//! rates grouped by phase or status.

use serde::Serialize;

use super::{Corpus, LabelSource, TrialRecord};

/// How a trial qualifies as "amended" for count statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountingMode {
    /// Amended iff more than one stored version (count = versions - 1, or
    /// the explicit amendment_count field when present).
    #[default]
    VersionCount,
    /// Additionally count single-version trials whose registry label is 1
    /// as having one amendment.
    VersionCountOrRegistryFlag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmendmentCountStats {
    pub n_amended: usize,
    pub min: u32,
    pub mean: f64,
    pub median: f64,
    pub max: u32,
}

fn amendment_count(rec: &TrialRecord, mode: CountingMode) -> u32 {
    let derived = rec
        .amendment_count
        .unwrap_or_else(|| (rec.ec_versions.len() as u32).saturating_sub(1));
    match mode {
        CountingMode::VersionCount => derived,
        CountingMode::VersionCountOrRegistryFlag => {
            if derived == 0 && rec.label_registry == Some(1) {
                1
            } else {
                derived
            }
        }
    }
}

/// Count statistics over amended trials only. Returns `None` when the corpus
/// has no amended trials.
pub fn amendment_count_stats(corpus: &Corpus, mode: CountingMode) -> Option<AmendmentCountStats> {
    let mut counts: Vec<u32> = corpus
        .records()
        .iter()
        .map(|rec| amendment_count(rec, mode))
        .filter(|&c| c > 0)
        .collect();
    if counts.is_empty() {
        return None;
    }
    counts.sort_unstable();
    let n = counts.len();
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        counts[n / 2] as f64
    } else {
        (counts[n / 2 - 1] as f64 + counts[n / 2] as f64) / 2.0
    };
    Some(AmendmentCountStats {
        n_amended: n,
        min: counts[0],
        mean,
        median,
        max: counts[n - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Phase,
    Status,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmendmentRateRow {
    pub group: String,
    pub rate: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmendmentRateReport {
    pub rows: Vec<AmendmentRateRow>,
    /// Pooled rate over all labeled trials (the figures' dashed line).
    pub overall_rate: f64,
    pub overall_n: usize,
}

impl AmendmentRateReport {
    /// CSV with header `group,rate,n`, one row per group plus an `overall`
    /// summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,rate,n\n");
        for row in &self.rows {
            out.push_str(&format!("{},{},{}\n", row.group, row.rate, row.n));
        }
        out.push_str(&format!("overall,{},{}\n", self.overall_rate, self.overall_n));
        out
    }
}

/// Amendment rate per group. Trials missing the chosen label are excluded;
/// empty group values are bucketed under "Other".
pub fn amendment_rates(
    corpus: &Corpus,
    group_by: GroupBy,
    label_source: LabelSource,
) -> AmendmentRateReport {
    let mut groups: Vec<(String, usize, usize)> = Vec::new(); // (group, positives, n)
    let mut overall_pos = 0usize;
    let mut overall_n = 0usize;

    for rec in corpus.records() {
        let Some(label) = rec.label(label_source) else {
            continue;
        };
        let group = match group_by {
            GroupBy::Phase => rec.metadata.phase.to_string(),
            GroupBy::Status => {
                let s = rec.metadata.status.trim();
                if s.is_empty() {
                    "Other".to_string()
                } else {
                    s.to_string()
                }
            }
        };
        overall_n += 1;
        overall_pos += label as usize;
        match groups.iter_mut().find(|(g, _, _)| *g == group) {
            Some(entry) => {
                entry.1 += label as usize;
                entry.2 += 1;
            }
            None => groups.push((group, label as usize, 1)),
        }
    }

    groups.sort_by(|a, b| a.0.cmp(&b.0));
    AmendmentRateReport {
        rows: groups
            .into_iter()
            .map(|(group, pos, n)| AmendmentRateRow {
                group,
                rate: pos as f64 / n as f64,
                n,
            })
            .collect(),
        overall_rate: if overall_n == 0 {
            0.0
        } else {
            overall_pos as f64 / overall_n as f64
        },
        overall_n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, ECVersion, Split, TrialMetadata, TrialRecord};
    use chrono::NaiveDate;

    fn trial(id: &str, versions: usize, label: u8, status: &str) -> TrialRecord {
        TrialRecord {
            trial_id: id.into(),
            ec_versions: (0..versions)
                .map(|i| ECVersion {
                    version_index: i as u32,
                    timestamp: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
                        + chrono::Days::new(i as u64),
                    text: "age >= 18".into(),
                })
                .collect(),
            metadata: TrialMetadata {
                status: status.into(),
                ..TrialMetadata::default()
            },
            label_registry: Some(label),
            label_llm: None,
            label_human: None,
            amendment_count: None,
            split: Split::Train,
        }
    }

    #[test]
    fn count_stats_on_fixture() {
        // version counts {2,3,5} -> amendment counts {1,2,4}
        let corpus = Corpus::from_records(vec![
            trial("A", 2, 1, ""),
            trial("B", 3, 1, ""),
            trial("C", 5, 1, ""),
            trial("D", 1, 0, ""),
        ])
        .unwrap();
        let stats = amendment_count_stats(&corpus, CountingMode::VersionCount).unwrap();
        assert_eq!(stats.n_amended, 3);
        assert_eq!(stats.min, 1);
        assert_eq!(stats.max, 4);
        assert!((stats.mean - 7.0 / 3.0).abs() < 1e-12);
        assert_eq!(stats.median, 2.0);
    }

    #[test]
    fn all_two_version_trials_give_constant_stats() {
        let corpus = Corpus::from_records(vec![trial("A", 2, 1, ""), trial("B", 2, 1, "")]).unwrap();
        let stats = amendment_count_stats(&corpus, CountingMode::VersionCount).unwrap();
        assert_eq!((stats.min, stats.mean, stats.median, stats.max), (1, 1.0, 1.0, 1));
    }

    #[test]
    fn no_amended_trials_gives_none() {
        let corpus = Corpus::from_records(vec![trial("A", 1, 0, "")]).unwrap();
        assert!(amendment_count_stats(&corpus, CountingMode::VersionCount).is_none());
    }

    #[test]
    fn registry_flag_mode_counts_flagged_single_version_trials() {
        let corpus = Corpus::from_records(vec![trial("A", 1, 1, "")]).unwrap();
        assert!(amendment_count_stats(&corpus, CountingMode::VersionCount).is_none());
        let stats =
            amendment_count_stats(&corpus, CountingMode::VersionCountOrRegistryFlag).unwrap();
        assert_eq!((stats.n_amended, stats.min, stats.max), (1, 1, 1));
    }

    #[test]
    fn explicit_amendment_count_overrides_version_count() {
        let mut t = trial("A", 2, 1, "");
        t.amendment_count = Some(5);
        let corpus = Corpus::from_records(vec![t]).unwrap();
        let stats = amendment_count_stats(&corpus, CountingMode::VersionCount).unwrap();
        assert_eq!(stats.max, 5);
    }

    #[test]
    fn single_group_rate() {
        let corpus = Corpus::from_records(vec![
            trial("A", 2, 1, "Completed"),
            trial("B", 2, 1, "Completed"),
            trial("C", 2, 1, "Completed"),
            trial("D", 1, 0, "Completed"),
        ])
        .unwrap();
        let report = amendment_rates(&corpus, GroupBy::Status, LabelSource::Registry);
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].rate, 0.75);
        assert_eq!(report.rows[0].n, 4);
    }

    #[test]
    fn overall_rate_is_pooled_over_trials() {
        // two groups, equal n, rates 0.2 and 0.6 -> overall 0.4
        let mut records = Vec::new();
        for i in 0..5 {
            records.push(trial(&format!("A{i}"), if i < 1 { 2 } else { 1 }, u8::from(i < 1), "X"));
        }
        for i in 0..5 {
            records.push(trial(&format!("B{i}"), if i < 3 { 2 } else { 1 }, u8::from(i < 3), "Y"));
        }
        let corpus = Corpus::from_records(records).unwrap();
        let report = amendment_rates(&corpus, GroupBy::Status, LabelSource::Registry);
        assert!((report.overall_rate - 0.4).abs() < 1e-12);
        let weighted: f64 = report.rows.iter().map(|r| r.rate * r.n as f64).sum();
        let n: usize = report.rows.iter().map(|r| r.n).sum();
        assert!((weighted / n as f64 - report.overall_rate).abs() < 1e-12);
    }

    #[test]
    fn empty_status_buckets_under_other() {
        let corpus = Corpus::from_records(vec![trial("A", 2, 1, "")]).unwrap();
        let report = amendment_rates(&corpus, GroupBy::Status, LabelSource::Registry);
        assert_eq!(report.rows[0].group, "Other");
    }

    #[test]
    fn unlabeled_source_gives_empty_table() {
        let corpus = Corpus::from_records(vec![trial("A", 2, 1, "Completed")]).unwrap();
        let report = amendment_rates(&corpus, GroupBy::Status, LabelSource::Llm);
        assert!(report.rows.is_empty());
        assert_eq!(report.overall_n, 0);
    }

    #[test]
    fn csv_has_header_and_overall_row() {
        let corpus = Corpus::from_records(vec![trial("A", 2, 1, "Completed")]).unwrap();
        let csv = amendment_rates(&corpus, GroupBy::Status, LabelSource::Registry).to_csv();
        assert!(csv.starts_with("group,rate,n\n"));
        assert!(csv.ends_with("overall,1,1\n"));
    }
}
