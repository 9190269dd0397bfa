//! `epb`: command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use epb_core::corpus::{
    self, Arity, ConllColumn, DatasetSplit, Format, IngestOptions, LabelPolicy, LabeledExample, Labeling, SplitPaths,
    TaskSchema,
};
use epb_core::embedstore::{pool_examples, EmbeddingArchive, PooledSet, Target};
use epb_core::mdl::{self, PrequentialSchedule};
use epb_core::memaudit::{self, HeuristicKind, MemorizationIndex, UniformSpace};
use epb_core::metrics::{self, compute_metrics, round2, DropReport};
use epb_core::pipeline::{self, run_pipeline, PipelineConfig};
use epb_core::probes::{self, ProbeConfig, ProbeKind, ProbeModel};
use epb_core::synth::{self, SynthConfig};
use epb_core::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "epb", version, about = "Edge-probing bias toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert CoNLL or ep-json files into a dataset directory.
    Ingest(IngestArgs),
    /// Carve a dev split off train and/or drop test labels unseen in train.
    Split(SplitArgs),
    /// Resample the test part to equal class counts.
    Balance(BalanceArgs),
    /// Report heuristic memorization accuracies on the test part.
    Audit(AuditArgs),
    /// Write a dataset whose test part excludes heuristic-classifiable examples.
    Filter(FilterArgs),
    /// Embedding archive tools.
    Emb {
        #[command(subcommand)]
        command: EmbCommand,
    },
    /// Generate a synthetic corpus, archive and ground-truth audit.
    Synth(SynthArgs),
    /// Train a probe.
    Train(TrainArgs),
    /// Score predictions against gold labels.
    Eval(EvalArgs),
    /// Relative accuracy drop, optionally compared with a random encoder.
    Drop(DropArgs),
    /// Codelengths of a probe on a dataset.
    Mdl(MdlArgs),
    /// Run the full workflow from a config file.
    Pipeline(PipelineArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Conll2003,
    Conll2000,
    EpJson,
}

#[derive(Clone, Copy, ValueEnum)]
enum ColumnArg {
    Pos,
    Chunk,
    Ner,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArityArg {
    OneSpan,
    TwoSpan,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelingArg {
    SingleLabel,
    MultiLabel,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Key,
    Full,
}

impl From<SpaceArg> for UniformSpace {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::Key => UniformSpace::Key,
            SpaceArg::Full => UniformSpace::Full,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum HeuristicArg {
    MemExact,
    MemFreq,
    MemUniform,
}

impl From<HeuristicArg> for HeuristicKind {
    fn from(h: HeuristicArg) -> Self {
        match h {
            HeuristicArg::MemExact => HeuristicKind::MemExact,
            HeuristicArg::MemFreq => HeuristicKind::MemFreq,
            HeuristicArg::MemUniform => HeuristicKind::MemUniform,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeArg {
    Linear,
    Mlp,
}

impl From<ProbeArg> for ProbeKind {
    fn from(p: ProbeArg) -> Self {
        match p {
            ProbeArg::Linear => ProbeKind::Linear,
            ProbeArg::Mlp => ProbeKind::Mlp,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Tsv,
    Json,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartArg {
    Train,
    Dev,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum MdlModeArg {
    TwoPart,
    Prequential,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, value_enum)]
    format: FormatArg,
    /// CoNLL label column; defaults to ner (2003) or chunk (2000).
    #[arg(long, value_enum)]
    column: Option<ColumnArg>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    test: PathBuf,
    /// Existing schema; without one the vocabulary is collected from the data.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Add labels missing from --schema instead of rejecting them.
    #[arg(long)]
    extend_labels: bool,
    #[arg(long, default_value = "task")]
    name: String,
    #[arg(long, value_enum, default_value = "one-span")]
    arity: ArityArg,
    #[arg(long, value_enum, default_value = "single-label")]
    labeling: LabelingArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    dev_fraction: Option<f64>,
    #[arg(long)]
    drop_unseen_labels: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BalanceArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "key")]
    uniform_space: SpaceArg,
    #[arg(long, value_enum, default_value = "tsv")]
    report: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    heuristic: HeuristicArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "key")]
    uniform_space: SpaceArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EmbCommand {
    /// Check an archive's structure, values and (optionally) token counts.
    Validate {
        #[arg(long)]
        emb: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Pool one dataset part into an archive of one row per example.
    Pool {
        #[arg(long)]
        emb: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        part: PartArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// JSON synth config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ProbeFlags {
    #[arg(long, value_enum, default_value = "linear")]
    probe: ProbeArg,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    #[arg(long, default_value_t = 1024)]
    hidden: usize,
    #[arg(long, default_value_t = 0.1)]
    warmup: f64,
    #[arg(long, default_value_t = 3)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ProbeFlags {
    fn config(&self, input_dim: usize, schema: &TaskSchema) -> ProbeConfig {
        let mut c = ProbeConfig::new(self.probe.into(), input_dim, schema.num_classes(), schema.labeling);
        c.epochs = self.epochs;
        c.batch_size = self.batch;
        c.learning_rate = self.lr;
        c.dropout = self.dropout;
        c.hidden_dim = self.hidden;
        c.warmup = self.warmup;
        c.replicas = self.replicas;
        c.seed = self.seed;
        c
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    emb: PathBuf,
    #[command(flatten)]
    probe: ProbeFlags,
    #[arg(long)]
    out: PathBuf,
    /// Training log (per-step losses, per-epoch dev scores) as JSON.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Gold ep-json file.
    #[arg(long)]
    gold: PathBuf,
    /// Schema; defaults to schema.json next to the gold file.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Predicted ep-json file aligned with the gold file.
    #[arg(long, conflicts_with = "model")]
    pred: Option<PathBuf>,
    /// Predict with this model instead of reading --pred.
    #[arg(long, requires = "emb")]
    model: Option<PathBuf>,
    #[arg(long)]
    emb: Option<PathBuf>,
    /// Write the model's predictions as ep-json.
    #[arg(long)]
    write_pred: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tsv")]
    report: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DropArgs {
    #[arg(long, required_unless_present = "original")]
    original_acc: Option<f64>,
    #[arg(long, required_unless_present = "filtered")]
    filtered_acc: Option<f64>,
    /// Metric report (json) on the original test set.
    #[arg(long, conflicts_with = "original_acc")]
    original: Option<PathBuf>,
    /// Metric report (json) on the filtered test set.
    #[arg(long, conflicts_with = "filtered_acc")]
    filtered: Option<PathBuf>,
    /// Drop of the random-encoder counterpart, to classify the pair.
    #[arg(long)]
    random_drop: Option<f64>,
    #[arg(long, default_value_t = metrics::SIGNIFICANCE_FACTOR)]
    significance_factor: f64,
}

#[derive(Args)]
struct MdlArgs {
    #[arg(long, value_enum, default_value = "two-part")]
    mode: MdlModeArg,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    emb: PathBuf,
    #[command(flatten)]
    probe: ProbeFlags,
    /// `default` or comma-separated block boundaries.
    #[arg(long, default_value = "default")]
    schedule: String,
    #[arg(long, value_enum, default_value = "json")]
    report: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn part(split: &DatasetSplit, p: PartArg) -> &[LabeledExample] {
    match p {
        PartArg::Train => &split.train,
        PartArg::Dev => &split.dev,
        PartArg::Test => &split.test,
    }
}

fn load_archive(path: &Path, split: &DatasetSplit) -> Result<EmbeddingArchive> {
    let a = EmbeddingArchive::load(path)?;
    a.validate_against(split)?;
    a.check_finite()?;
    Ok(a)
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let format = match a.format {
        FormatArg::Conll2003 => Format::Conll2003,
        FormatArg::Conll2000 => Format::Conll2000,
        FormatArg::EpJson => Format::EpJson,
    };
    let mut opts = IngestOptions::new(format);
    opts.column = a.column.map(|c| match c {
        ColumnArg::Pos => ConllColumn::Pos,
        ColumnArg::Chunk => ConllColumn::Chunk,
        ColumnArg::Ner => ConllColumn::Ner,
    });
    let schema = match &a.schema {
        Some(p) => {
            if a.extend_labels {
                opts.policy = LabelPolicy::Extend;
            }
            TaskSchema::load(p)?
        }
        None => {
            opts.policy = LabelPolicy::Extend;
            let arity = match a.arity {
                ArityArg::OneSpan => Arity::OneSpan,
                ArityArg::TwoSpan => Arity::TwoSpan,
            };
            let labeling = match a.labeling {
                LabelingArg::SingleLabel => Labeling::SingleLabel,
                LabelingArg::MultiLabel => Labeling::MultiLabel,
            };
            TaskSchema::open(a.name.clone(), arity, labeling)
        }
    };
    let paths = SplitPaths {
        train: &a.train,
        dev: a.dev.as_deref(),
        test: &a.test,
    };
    let split = corpus::ingest(&paths, &opts, schema)?;
    split.save_dir(&a.out)?;
    eprintln!(
        "{} sentences; train {}, dev {}, test {} examples; {} labels",
        split.sentences.len(),
        split.train.len(),
        split.dev.len(),
        split.test.len(),
        split.schema.num_classes()
    );
    Ok(())
}

fn split_cmd(a: &SplitArgs) -> Result<()> {
    if a.dev_fraction.is_none() && !a.drop_unseen_labels {
        return Err(Error::invalid("nothing to do: pass --dev-fraction and/or --drop-unseen-labels"));
    }
    let mut split = DatasetSplit::load_dir(&a.dataset)?;
    if a.drop_unseen_labels {
        let (s, removed) = split.drop_unseen_labels();
        eprintln!("removed {} dev and {} test examples with unseen labels", removed.dev, removed.test);
        split = s;
    }
    if let Some(f) = a.dev_fraction {
        split = split.make_dev_split(f, a.seed)?;
    }
    split.save_dir(&a.out)
}

fn audit_parts(dataset: &Path) -> Result<(DatasetSplit, MemorizationIndex, Vec<memaudit::Query>)> {
    let split = DatasetSplit::load_dir(dataset)?;
    let index = MemorizationIndex::build(&split.train, &split.sentences, &split.schema)?;
    let queries = memaudit::queries(&split.test, &split.sentences, &split.schema)?;
    Ok((split, index, queries))
}

fn audit(a: &AuditArgs) -> Result<()> {
    let (_, index, queries) = audit_parts(&a.dataset)?;
    let report = memaudit::audit(&index, &queries, a.seed, a.uniform_space.into())?;
    let text = match a.report {
        ReportFormat::Tsv => report.to_tsv(),
        ReportFormat::Json => json(&report),
        ReportFormat::Md => report.to_markdown(),
    };
    emit(a.out.as_deref(), &text)
}

fn filter(a: &FilterArgs) -> Result<()> {
    let (split, index, queries) = audit_parts(&a.dataset)?;
    let (kept, removed) = memaudit::filter(
        &split.test,
        &queries,
        a.heuristic.into(),
        &index,
        a.seed,
        a.uniform_space.into(),
    );
    let mut buf = Vec::new();
    let removed: Vec<LabeledExample> = removed.into_iter().cloned().collect();
    corpus::write_ep_json(&mut buf, &split.sentences, &removed, split.schema.labeling)?;
    let out = DatasetSplit {
        test: kept.into_iter().cloned().collect(),
        ..split.clone()
    };
    out.save_dir(&a.out)?;
    let path = a.out.join("removed.jsonl");
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    eprintln!("kept {} of {} test examples", out.test.len(), split.test.len());
    Ok(())
}

fn emb(cmd: &EmbCommand) -> Result<()> {
    match cmd {
        EmbCommand::Validate { emb, dataset } => {
            let a = EmbeddingArchive::load(emb)?;
            a.check_finite()?;
            if let Some(d) = dataset {
                a.validate_against(&DatasetSplit::load_dir(d)?)?;
            }
            println!("ok: {} sentences, dim {}", a.len(), a.dim());
            Ok(())
        }
        EmbCommand::Pool {
            emb,
            dataset,
            part: p,
            out,
        } => {
            let split = DatasetSplit::load_dir(dataset)?;
            let a = load_archive(emb, &split)?;
            pool_examples(&a, &split, part(&split, *p))?.to_archive()?.save(out)
        }
    }
}

fn synth_cmd(a: &SynthArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
    let config: SynthConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
        context: format!("synth config {}", a.config.display()),
        source,
    })?;
    let c = synth::generate(&config)?;
    c.split.save_dir(&a.out_dir.join("data"))?;
    c.archive.save(&a.out_dir.join("embeddings.epemb"))?;
    let path = a.out_dir.join("truth.json");
    fs::write(&path, json(&c.truth)).map_err(|e| Error::io(&path, e))
}

/// Digest binding a standalone model to its inputs and config.
fn run_digest(files: &[&Path], config: &ProbeConfig) -> Result<String> {
    let mut parts = BTreeMap::new();
    for f in files {
        let bytes = fs::read(f).map_err(|e| Error::io(f, e))?;
        parts.insert(f.display().to_string(), pipeline::sha256_hex(&bytes));
    }
    let doc = serde_json::json!({ "version": epb_core::VERSION, "inputs": parts, "config": config });
    Ok(pipeline::sha256_hex(doc.to_string().as_bytes()))
}

fn dataset_files(dir: &Path) -> Vec<PathBuf> {
    ["schema.json", "train.jsonl", "dev.jsonl", "test.jsonl"]
        .iter()
        .map(|f| dir.join(f))
        .filter(|p| p.exists())
        .collect()
}

fn train(a: &TrainArgs) -> Result<()> {
    let split = DatasetSplit::load_dir(&a.dataset)?;
    let archive = load_archive(&a.emb, &split)?;
    let config = a.probe.config(archive.dim(), &split.schema);
    let train = pool_examples(&archive, &split, &split.train)?;
    let dev = pool_examples(&archive, &split, &split.dev)?;
    let model = probes::train::<f32>(&config, &train, &dev)?;
    let mut files = dataset_files(&a.dataset);
    files.push(a.emb.clone());
    let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    let digest = run_digest(&refs, &config)?;
    model.save(&a.out, split.schema.labels(), &digest)?;
    if let Some(log) = &a.log {
        fs::write(log, json(&model.log)).map_err(|e| Error::io(log, e))?;
    }
    eprintln!(
        "selected replica {} (dev scores {:?})",
        model.log.selected_replica, model.log.replica_dev_scores
    );
    Ok(())
}

fn read_examples(path: &Path, schema: &mut TaskSchema) -> Result<corpus::Part> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    corpus::parse_ep_json_bytes(&bytes, schema)
}

fn targets(examples: &[LabeledExample], schema: &TaskSchema) -> Result<Vec<Target>> {
    examples
        .iter()
        .map(|e| {
            let ks = schema.classes_of(&e.gold)?;
            Ok(if schema.is_multi_label() {
                Target::Multi(ks)
            } else {
                Target::Single(ks[0])
            })
        })
        .collect()
}

fn eval(a: &EvalArgs) -> Result<()> {
    let schema_path = match &a.schema {
        Some(p) => p.clone(),
        None => a.gold.parent().unwrap_or(Path::new(".")).join("schema.json"),
    };
    let mut schema = TaskSchema::load(&schema_path)?;
    let gold_part = read_examples(&a.gold, &mut schema)?;
    let gold = targets(&gold_part.examples, &schema)?;
    let pred = match (&a.pred, &a.model, &a.emb) {
        (Some(p), None, _) => {
            let part = read_examples(p, &mut schema)?;
            let ids = |x: &[LabeledExample]| x.iter().map(LabeledExample::id).collect::<Vec<_>>();
            if ids(&part.examples) != ids(&gold_part.examples) {
                return Err(Error::invalid("predictions are not aligned with the gold examples"));
            }
            targets(&part.examples, &schema)?
        }
        (None, Some(m), Some(e)) => {
            let saved = ProbeModel::<f32>::load(m)?;
            if saved.labels != schema.labels() {
                return Err(Error::invalid("model labels differ from the schema"));
            }
            let split = DatasetSplit::from_parts(
                schema.clone(),
                corpus::Part::default(),
                corpus::Part::default(),
                gold_part.clone(),
            )?;
            let archive = load_archive(e, &split)?;
            let pooled: PooledSet = pool_examples(&archive, &split, &split.test)?;
            let pred = saved.model.predict(&pooled)?;
            if let Some(out) = &a.write_pred {
                let examples: Vec<LabeledExample> = split
                    .test
                    .iter()
                    .zip(&pred)
                    .map(|(ex, t)| LabeledExample {
                        gold: t.classes().iter().map(|&k| schema.label(k).to_string()).collect(),
                        ..ex.clone()
                    })
                    .collect();
                let mut buf = Vec::new();
                corpus::write_ep_json(&mut buf, &split.sentences, &examples, schema.labeling)?;
                fs::write(out, buf).map_err(|e| Error::io(out, e))?;
            }
            pred
        }
        _ => return Err(Error::invalid("pass either --pred or --model with --emb")),
    };
    let report = compute_metrics(&gold, &pred, schema.num_classes(), schema.is_multi_label())?;
    let text = match a.report {
        ReportFormat::Tsv => report.to_tsv(),
        ReportFormat::Json => json(&report),
        ReportFormat::Md => report.to_markdown(),
    };
    emit(a.out.as_deref(), &text)
}

fn accuracy_from(path: &Path) -> Result<f64> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    v.get("accuracy")
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| Error::Format(format!("{}: no accuracy field", path.display())))
}

fn drop_cmd(a: &DropArgs) -> Result<()> {
    let orig = match (a.original_acc, &a.original) {
        (Some(v), _) => v,
        (None, Some(p)) => accuracy_from(p)?,
        _ => return Err(Error::invalid("missing original accuracy")),
    };
    let filt = match (a.filtered_acc, &a.filtered) {
        (Some(v), _) => v,
        (None, Some(p)) => accuracy_from(p)?,
        _ => return Err(Error::invalid("missing filtered accuracy")),
    };
    let report = DropReport::new(orig, filt)?;
    let mut doc = serde_json::json!({
        "acc_original": report.acc_original,
        "acc_filtered": report.acc_filtered,
        "drop": round2(report.drop),
    });
    if let Some(r) = a.random_drop {
        let class = metrics::classify_pair_with(round2(report.drop), round2(r), a.significance_factor);
        doc["random_drop"] = serde_json::json!(round2(r));
        doc["classification"] = serde_json::json!(class.name());
    }
    print!("{}", json(&doc));
    Ok(())
}

fn mdl_cmd(a: &MdlArgs) -> Result<()> {
    if a.report != ReportFormat::Json {
        return Err(Error::invalid("codelength reports are written as json"));
    }
    let split = DatasetSplit::load_dir(&a.dataset)?;
    let archive = load_archive(&a.emb, &split)?;
    let config = a.probe.config(archive.dim(), &split.schema);
    let train = pool_examples(&archive, &split, &split.train)?;
    let text = match a.mode {
        MdlModeArg::TwoPart => {
            let dev = pool_examples(&archive, &split, &split.dev)?;
            let model = probes::train::<f32>(&config, &train, &dev)?;
            json(&mdl::two_part_codelength(&model, &train)?)
        }
        MdlModeArg::Prequential => {
            let schedule = if a.schedule == "default" {
                PrequentialSchedule::default()
            } else {
                PrequentialSchedule::parse(&a.schedule)?
            };
            json(&mdl::prequential_codelength::<f32>(&config, &train, &schedule, a.probe.seed)?)
        }
    };
    emit(a.out.as_deref(), &text)
}

fn pipeline_cmd(a: &PipelineArgs) -> Result<()> {
    let mut config = PipelineConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        config.seed = s;
    }
    let base = a.config.parent().unwrap_or(Path::new("."));
    let out = run_pipeline(&config, base, &a.out)?;
    eprintln!("{} cells, manifest {}", out.cells.len(), out.manifest_digest);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(&a),
        Command::Split(a) => split_cmd(&a),
        Command::Balance(a) => DatasetSplit::load_dir(&a.dataset)?.rebalance(a.seed)?.save_dir(&a.out),
        Command::Audit(a) => audit(&a),
        Command::Filter(a) => filter(&a),
        Command::Emb { command } => emb(&command),
        Command::Synth(a) => synth_cmd(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Drop(a) => drop_cmd(&a),
        Command::Mdl(a) => mdl_cmd(&a),
        Command::Pipeline(a) => pipeline_cmd(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            })
        }
    }
}
