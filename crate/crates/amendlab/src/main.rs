//! `amendlab`: pipeline orchestration over the library crate.
//!
//! One binary, subcommand per stage. Config comes from an optional TOML
//! file with flag overrides (flags win). Progress goes to stderr, data to
//! files; every artifact embeds the tool version, a hash of the effective
//! config, and the seed. Exit codes: 0 ok, 1 usage, 2 data error,
//! 3 external-service error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use amendlab::camlm::{
    emit_instances, plan_corpus, MaskPolicy, DEFAULT_MAX_WINDOW, DEFAULT_P_LOW, DEFAULT_P_MLM,
    DEFAULT_P_SPAN,
};
use amendlab::corpus::{
    amendment_count_stats, amendment_rates, ingest_corpus_with, validate_splits, Corpus,
    CountingMode, GroupBy, IngestOptions, LabelSource, Split, TrialRecord,
};
use amendlab::eval::{
    bootstrap, delong_test, write_delong_csv, DeLongRow, DEFAULT_BOOTSTRAP_ITERATIONS,
};
use amendlab::labeling::{
    denoise_batch, rule_label, CachingClient, DenoiseConfig, HttpLlmClient, LlmClientConfig,
    RuleConfig,
};
use amendlab::model::{
    featurize_corpus, model_to_json, predict, select_c, FeatureFields, C_GRID, DEFAULT_HASH_BITS,
};

const SCHEMA_VERSION: &str = "1";

const EXIT_USAGE: i32 = 1;
const EXIT_DATA: i32 = 2;
const EXIT_EXTERNAL: i32 = 3;

struct AppError {
    code: i32,
    message: String,
}

impl AppError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    fn external(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_EXTERNAL,
            message: message.into(),
        }
    }
}

type AppResult<T> = Result<T, AppError>;

#[derive(Parser)]
#[command(name = "amendlab", version, about = "Eligibility-criteria amendment toolkit")]
struct Cli {
    /// TOML config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root random seed recorded into every artifact
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a JSONL corpus and write the canonical form
    Ingest(IngestArgs),
    /// Amendment-count statistics and rates by group
    Stats(StatsArgs),
    /// Produce amendment labels (rule engine or LLM denoising)
    Label(LabelArgs),
    /// Generate masked pretraining instances
    Mask(MaskArgs),
    /// Train the hashed-feature logistic regression
    Train(TrainArgs),
    /// Bootstrap evaluation of a prediction file
    Eval(EvalArgs),
    /// DeLong comparison of two prediction files
    Compare(CompareArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Drop records with missing metadata fields instead of defaulting
    #[arg(long)]
    drop_missing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupByArg {
    Phase,
    Status,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelSourceArg {
    Registry,
    Llm,
    Human,
}

impl From<LabelSourceArg> for LabelSource {
    fn from(v: LabelSourceArg) -> Self {
        match v {
            LabelSourceArg::Registry => LabelSource::Registry,
            LabelSourceArg::Llm => LabelSource::Llm,
            LabelSourceArg::Human => LabelSource::Human,
        }
    }
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, value_enum, default_value = "phase")]
    group_by: GroupByArg,
    #[arg(long, value_enum, default_value = "registry")]
    label_source: LabelSourceArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelMode {
    Rules,
    Llm,
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "rules")]
    mode: LabelMode,
    /// LLM endpoint base URL (llm mode)
    #[arg(long)]
    base_url: Option<String>,
    /// Response cache directory (llm mode)
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Mlm,
    SpanMlm,
    Camlm,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "camlm")]
    policy: PolicyArg,
    #[arg(long)]
    p_span: Option<f64>,
    #[arg(long)]
    p_low: Option<f64>,
    #[arg(long)]
    p_mlm: Option<f64>,
    #[arg(long)]
    max_window: Option<usize>,
    #[arg(long, default_value = "[MASK]")]
    mask_token: String,
    /// WordPiece vocabulary; when given, the mask token must be present
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model_out: PathBuf,
    /// Test-split predictions CSV
    #[arg(long)]
    preds_out: Option<PathBuf>,
    /// Comma-separated subset of ec,disease,intervention,phase
    #[arg(long, default_value = "ec,disease,intervention,phase")]
    fields: String,
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long, value_enum, default_value = "registry")]
    label_source: LabelSourceArg,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    iters: Option<u32>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "registry")]
    label_source: LabelSourceArg,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    pred_a: PathBuf,
    #[arg(long)]
    pred_b: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "model_a")]
    name_a: String,
    #[arg(long, default_value = "model_b")]
    name_b: String,
    #[arg(long, value_enum, default_value = "registry")]
    label_source: LabelSourceArg,
}

/// File-level configuration; any flag with the same meaning wins.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    seed: Option<u64>,
    jobs: Option<usize>,
    llm: LlmFileConfig,
    mask: MaskFileConfig,
    model: ModelFileConfig,
    eval: EvalFileConfig,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct LlmFileConfig {
    base_url: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
    cache_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct MaskFileConfig {
    p_span: Option<f64>,
    p_low: Option<f64>,
    p_mlm: Option<f64>,
    max_window: Option<usize>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ModelFileConfig {
    bits: Option<u32>,
    c_grid: Option<Vec<f64>>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct EvalFileConfig {
    iterations: Option<u32>,
}

/// Provenance block embedded in every artifact.
#[derive(Debug, Clone, Serialize)]
struct ArtifactMeta {
    tool_version: &'static str,
    config_hash: String,
    seed: u64,
}

fn load_config(path: Option<&Path>) -> AppResult<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| AppError::usage(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| AppError::usage(format!("bad config {}: {e}", p.display())))
        }
    }
}

fn meta_for(config: &FileConfig, seed: u64) -> ArtifactMeta {
    let serialized = toml::to_string(config).expect("config serialization");
    let mut hasher = Sha256::new();
    hasher.update(serialized.as_bytes());
    hasher.update(seed.to_le_bytes());
    ArtifactMeta {
        tool_version: env!("CARGO_PKG_VERSION"),
        config_hash: format!("{:x}", hasher.finalize()),
        seed,
    }
}

/// Write via a temp file so a failure never leaves a partial artifact.
fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| AppError::data(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    let tmp = path.with_extension("tmp");
    let write = fs::write(&tmp, bytes)
        .and_then(|()| fs::rename(&tmp, path));
    if let Err(e) = write {
        let _ = fs::remove_file(&tmp);
        return Err(AppError::data(format!("cannot write {}: {e}", path.display())));
    }
    Ok(())
}

fn load_corpus(path: &Path) -> AppResult<Corpus> {
    ingest_corpus_with(path, SCHEMA_VERSION, &IngestOptions::default())
        .map_err(|e| AppError::data(format!("{}: {e}", path.display())))
}

fn gold_label(rec: &TrialRecord, source: LabelSource) -> Option<u8> {
    match source {
        LabelSource::Registry => rec.label_registry,
        LabelSource::Llm => rec.label_llm,
        LabelSource::Human => rec.label_human,
    }
}

/// `trial_id,score[,label]` rows after `#`-prefixed meta comments.
fn read_predictions(path: &Path) -> AppResult<Vec<(String, f64)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("trial_id,") {
            continue;
        }
        let mut parts = line.split(',');
        let id = parts
            .next()
            .ok_or_else(|| AppError::data(format!("{}:{}: empty row", path.display(), lineno + 1)))?;
        let score: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                AppError::data(format!("{}:{}: bad score", path.display(), lineno + 1))
            })?;
        out.push((id.to_string(), score));
    }
    Ok(out)
}

/// Align predictions with gold labels by trial id.
fn join_gold(
    preds: &[(String, f64)],
    corpus: &Corpus,
    source: LabelSource,
) -> AppResult<(Vec<f64>, Vec<u8>)> {
    let mut scores = Vec::with_capacity(preds.len());
    let mut labels = Vec::with_capacity(preds.len());
    for (id, score) in preds {
        let rec = corpus
            .get(id)
            .ok_or_else(|| AppError::data(format!("prediction for unknown trial {id}")))?;
        let label = gold_label(rec, source)
            .ok_or_else(|| AppError::data(format!("trial {id} has no {source:?} label")))?;
        scores.push(*score);
        labels.push(label);
    }
    Ok((scores, labels))
}

fn parse_fields(spec: &str) -> AppResult<FeatureFields> {
    let mut fields = FeatureFields {
        ec: false,
        disease: false,
        intervention: false,
        phase: false,
    };
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match name {
            "ec" => fields.ec = true,
            "disease" => fields.disease = true,
            "intervention" => fields.intervention = true,
            "phase" => fields.phase = true,
            other => return Err(AppError::usage(format!("unknown field {other:?}"))),
        }
    }
    if !fields.any() {
        return Err(AppError::usage("no feature fields selected"));
    }
    Ok(fields)
}

fn cmd_ingest(args: &IngestArgs, meta: &ArtifactMeta) -> AppResult<()> {
    let corpus = ingest_corpus_with(
        &args.input,
        SCHEMA_VERSION,
        &IngestOptions {
            drop_missing: args.drop_missing,
        },
    )
    .map_err(|e| AppError::data(format!("{}: {e}", args.input.display())))?;

    let mut out = Vec::new();
    corpus
        .write_jsonl(&mut out)
        .map_err(|e| AppError::data(e.to_string()))?;
    write_atomic(&args.output, &out)?;
    let mf = corpus.missing_fields();
    let missing_total =
        mf.title + mf.description + mf.diseases + mf.interventions + mf.phase + mf.status;
    eprintln!(
        "ingested {} records ({} missing metadata fields defaulted) [config {}]",
        corpus.len(),
        missing_total,
        &meta.config_hash[..12],
    );
    Ok(())
}

fn cmd_stats(args: &StatsArgs, meta: &ArtifactMeta) -> AppResult<()> {
    let corpus = load_corpus(&args.corpus)?;
    let counts = amendment_count_stats(&corpus, CountingMode::VersionCount);
    let splits = validate_splits(&corpus).map_err(|e| AppError::data(e.to_string()))?;
    let group_by = match args.group_by {
        GroupByArg::Phase => GroupBy::Phase,
        GroupByArg::Status => GroupBy::Status,
    };
    let rates = amendment_rates(&corpus, group_by, args.label_source.into());

    let stats = serde_json::json!({
        "meta": meta,
        "amendment_counts": counts,
        "splits": splits,
    });
    write_atomic(
        &args.output_dir.join("stats.json"),
        serde_json::to_string_pretty(&stats)
            .expect("stats serialization")
            .as_bytes(),
    )?;
    let csv = format!(
        "# tool_version={} config_hash={} seed={}\n{}",
        meta.tool_version,
        meta.config_hash,
        meta.seed,
        rates.to_csv()
    );
    write_atomic(&args.output_dir.join("rates.csv"), csv.as_bytes())?;
    eprintln!("stats written to {}", args.output_dir.display());
    Ok(())
}

fn cmd_label(args: &LabelArgs, config: &FileConfig, meta: &ArtifactMeta) -> AppResult<()> {
    let corpus = load_corpus(&args.corpus)?;
    let mut lines = vec![serde_json::json!({ "meta": meta }).to_string()];

    match args.mode {
        LabelMode::Rules => {
            let rule_config = RuleConfig::default();
            for rec in corpus.records() {
                let first = &rec.ec_versions.first().expect("validated non-empty").text;
                let last = &rec.ec_versions.last().expect("validated non-empty").text;
                let registry = rec.label_registry.unwrap_or(1);
                let mut label = rule_label(first, last, registry, &rule_config);
                label.trial_id = rec.trial_id.clone();
                lines.push(serde_json::to_string(&label).expect("label serialization"));
            }
            eprintln!("rule-labeled {} trials", corpus.len());
        }
        LabelMode::Llm => {
            let base_url = args
                .base_url
                .clone()
                .or_else(|| config.llm.base_url.clone())
                .ok_or_else(|| AppError::usage("llm mode requires --base-url or [llm].base_url"))?;
            let mut client_config = LlmClientConfig {
                base_url,
                ..Default::default()
            };
            if let Some(m) = &config.llm.model {
                client_config.model = m.clone();
            }
            if let Some(env) = &config.llm.api_key_env {
                client_config.api_key_env = env.clone();
            }
            let http = HttpLlmClient::new(client_config);
            let cache_dir = args
                .cache_dir
                .clone()
                .or_else(|| config.llm.cache_dir.clone());
            let denoise_config = DenoiseConfig::default();
            let (labels, rejects) = match cache_dir {
                Some(dir) => {
                    let client = CachingClient::new(http, dir);
                    denoise_batch(corpus.records(), &client, &denoise_config)
                }
                None => denoise_batch(corpus.records(), &http, &denoise_config),
            };
            if labels.is_empty() && !rejects.is_empty() {
                return Err(AppError::external(format!(
                    "all {} trials failed: {}",
                    rejects.len(),
                    rejects[0].error
                )));
            }
            for label in &labels {
                lines.push(serde_json::to_string(label).expect("label serialization"));
            }
            for reject in &rejects {
                eprintln!("rejected {}: {}", reject.trial_id, reject.error);
            }
            eprintln!("denoised {} trials ({} rejected)", labels.len(), rejects.len());
        }
    }
    lines.push(String::new());
    write_atomic(&args.output, lines.join("\n").as_bytes())?;
    Ok(())
}

fn cmd_mask(args: &MaskArgs, config: &FileConfig, meta: &ArtifactMeta) -> AppResult<()> {
    let corpus = load_corpus(&args.corpus)?;
    let p_span = args.p_span.or(config.mask.p_span).unwrap_or(DEFAULT_P_SPAN);
    let p_low = args.p_low.or(config.mask.p_low).unwrap_or(DEFAULT_P_LOW);
    let p_mlm = args.p_mlm.or(config.mask.p_mlm).unwrap_or(DEFAULT_P_MLM);
    let policy = match args.policy {
        PolicyArg::Mlm => MaskPolicy::Mlm { p: p_mlm },
        PolicyArg::SpanMlm => MaskPolicy::SpanMlm { p_span, p_low },
        PolicyArg::Camlm => MaskPolicy::Camlm { p_span, p_low },
    };
    let max_window = args
        .max_window
        .or(config.mask.max_window)
        .unwrap_or(DEFAULT_MAX_WINDOW);

    let vocab = match &args.vocab {
        None => None,
        Some(path) => Some(
            amendlab::textprep::Vocab::load(path)
                .map_err(|e| AppError::data(format!("{}: {e}", path.display())))?,
        ),
    };

    let plans = plan_corpus(corpus.records(), policy, meta.seed)
        .map_err(|e| AppError::usage(e.to_string()))?;
    let summary = emit_instances(&plans, &args.mask_token, vocab.as_ref(), max_window)
        .map_err(|e| AppError::data(e.to_string()))?;

    let header = serde_json::json!({
        "meta": meta,
        "policy": policy,
        "max_window": max_window,
        "mask_token": args.mask_token,
        "skipped_zero_mask": summary.skipped_zero_mask,
    });
    let mut out = Vec::new();
    out.extend_from_slice(header.to_string().as_bytes());
    out.push(b'\n');
    amendlab::camlm::write_instances_jsonl(&summary.instances, &mut out)
        .map_err(|e| AppError::data(e.to_string()))?;
    write_atomic(&args.output, &out)?;
    eprintln!(
        "emitted {} instances ({} zero-mask windows skipped)",
        summary.instances.len(),
        summary.skipped_zero_mask
    );
    Ok(())
}

fn split_records<'a>(corpus: &'a Corpus, split: Split) -> Vec<&'a TrialRecord> {
    corpus.records().iter().filter(|r| r.split == split).collect()
}

fn labeled(
    records: &[&TrialRecord],
    source: LabelSource,
) -> (Vec<TrialRecord>, Vec<u8>) {
    let mut trials = Vec::new();
    let mut labels = Vec::new();
    for rec in records {
        if let Some(l) = gold_label(rec, source) {
            trials.push((*rec).clone());
            labels.push(l);
        }
    }
    (trials, labels)
}

fn cmd_train(args: &TrainArgs, config: &FileConfig, meta: &ArtifactMeta) -> AppResult<()> {
    let corpus = load_corpus(&args.corpus)?;
    let fields = parse_fields(&args.fields)?;
    let bits = args.bits.or(config.model.bits).unwrap_or(DEFAULT_HASH_BITS);
    let grid = config.model.c_grid.clone().unwrap_or_else(|| C_GRID.to_vec());
    let source: LabelSource = args.label_source.into();

    let (train_trials, train_labels) = labeled(&split_records(&corpus, Split::Train), source);
    let (val_trials, val_labels) = labeled(&split_records(&corpus, Split::Validation), source);
    if train_trials.is_empty() || val_trials.is_empty() {
        return Err(AppError::data("train or validation split has no labeled records"));
    }

    eprintln!(
        "featurizing {} train / {} validation trials (b={bits})",
        train_trials.len(),
        val_trials.len()
    );
    let train_vecs =
        featurize_corpus(&train_trials, fields, bits).map_err(|e| AppError::data(e.to_string()))?;
    let val_vecs =
        featurize_corpus(&val_trials, fields, bits).map_err(|e| AppError::data(e.to_string()))?;

    let (model, val_auc) = select_c(&train_vecs, &train_labels, &val_vecs, &val_labels, &grid, meta.seed)
        .map_err(|e| AppError::data(e.to_string()))?;
    eprintln!("selected C={} (validation AUROC {val_auc:.4})", model.c);

    let model_json = model_to_json(&model);
    let wrapped = serde_json::json!({
        "meta": meta,
        "fields": fields,
        "validation_auroc": val_auc,
        "model": serde_json::from_str::<serde_json::Value>(&model_json).expect("model json"),
    });
    write_atomic(
        &args.model_out,
        serde_json::to_string_pretty(&wrapped).expect("model wrapper").as_bytes(),
    )?;

    if let Some(preds_out) = &args.preds_out {
        let test_records = split_records(&corpus, Split::Test);
        let (test_trials, test_labels) = labeled(&test_records, source);
        let test_vecs = featurize_corpus(&test_trials, fields, bits)
            .map_err(|e| AppError::data(e.to_string()))?;
        let scores = predict(&model, &test_vecs).map_err(|e| AppError::data(e.to_string()))?;
        let mut csv = format!(
            "# tool_version={} config_hash={} seed={}\ntrial_id,score,label\n",
            meta.tool_version, meta.config_hash, meta.seed
        );
        for ((t, s), l) in test_trials.iter().zip(&scores).zip(&test_labels) {
            csv.push_str(&format!("{},{},{}\n", t.trial_id, s, l));
        }
        write_atomic(preds_out, csv.as_bytes())?;
        eprintln!("wrote {} test predictions", test_trials.len());
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs, config: &FileConfig, meta: &ArtifactMeta) -> AppResult<()> {
    let corpus = load_corpus(&args.gold)?;
    let preds = read_predictions(&args.pred)?;
    let (scores, labels) = join_gold(&preds, &corpus, args.label_source.into())?;
    let iterations = args
        .iters
        .or(config.eval.iterations)
        .unwrap_or(DEFAULT_BOOTSTRAP_ITERATIONS);
    eprintln!("bootstrapping {iterations} iterations over n={}", scores.len());
    let report =
        bootstrap(&scores, &labels, iterations, meta.seed).map_err(|e| AppError::data(e.to_string()))?;
    let wrapped = serde_json::json!({ "meta": meta, "report": report });
    write_atomic(
        &args.output,
        serde_json::to_string_pretty(&wrapped).expect("report json").as_bytes(),
    )?;
    eprintln!("report written to {}", args.output.display());
    Ok(())
}

fn cmd_compare(args: &CompareArgs, meta: &ArtifactMeta) -> AppResult<()> {
    let corpus = load_corpus(&args.gold)?;
    let preds_a = read_predictions(&args.pred_a)?;
    let preds_b = read_predictions(&args.pred_b)?;
    let ids_a: Vec<&str> = preds_a.iter().map(|(id, _)| id.as_str()).collect();
    let ids_b: Vec<&str> = preds_b.iter().map(|(id, _)| id.as_str()).collect();
    if ids_a != ids_b {
        return Err(AppError::data(
            "prediction files cover different trials (paired test requires identical id order)",
        ));
    }
    let (scores_a, labels) = join_gold(&preds_a, &corpus, args.label_source.into())?;
    let (scores_b, _) = join_gold(&preds_b, &corpus, args.label_source.into())?;
    let result =
        delong_test(&scores_a, &scores_b, &labels).map_err(|e| AppError::data(e.to_string()))?;
    let rows = vec![DeLongRow {
        model_a: args.name_a.clone(),
        model_b: args.name_b.clone(),
        result,
    }];
    let mut out = format!(
        "# tool_version={} config_hash={} seed={}\n",
        meta.tool_version, meta.config_hash, meta.seed
    )
    .into_bytes();
    write_delong_csv(&rows, &mut out).map_err(|e| AppError::data(e.to_string()))?;
    write_atomic(&args.output, &out)?;
    eprintln!(
        "AUC {} = {:.4}, AUC {} = {:.4}, p = {:.4}",
        args.name_a, result.auc_a, args.name_b, result.auc_b, result.p_value
    );
    Ok(())
}

fn run(cli: &Cli) -> AppResult<()> {
    let mut config = load_config(cli.config.as_deref())?;
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if cli.jobs.is_some() {
        config.jobs = cli.jobs;
    }
    let seed = config.seed.unwrap_or(0);

    #[cfg(feature = "parallel")]
    if let Some(jobs) = config.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| AppError::usage(format!("cannot configure {jobs} jobs: {e}")))?;
    }

    let meta = meta_for(&config, seed);
    match &cli.command {
        Command::Ingest(args) => cmd_ingest(args, &meta),
        Command::Stats(args) => cmd_stats(args, &meta),
        Command::Label(args) => cmd_label(args, &config, &meta),
        Command::Mask(args) => cmd_mask(args, &config, &meta),
        Command::Train(args) => cmd_train(args, &config, &meta),
        Command::Eval(args) => cmd_eval(args, &config, &meta),
        Command::Compare(args) => cmd_compare(args, &meta),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            if e.use_stderr() {
                eprintln!("error: {}", e.kind());
                std::process::exit(EXIT_USAGE);
            }
            e.print().expect("write help");
            std::process::exit(0);
        }
    };
    if let Err(e) = run(&cli) {
        eprintln!("error: {}", e.message.replace('\n', " | "));
        std::process::exit(e.code);
    }
}

// unused-import guard when built without the parallel feature
#[cfg(not(feature = "parallel"))]
#[allow(dead_code)]
fn _jobs_flag_is_inert_without_parallel() {}
