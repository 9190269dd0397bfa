//! End-to-end runs: audit, filter, train one probe per (archive, probe kind)
//! cell, evaluate on the original and filtered test sets, and write drop and
//! codelength reports.
//!
//! Every report carries the digest of the run manifest. The manifest records
//! the toolkit version, the run seed, SHA-256 digests of every input file
//! and the resolved config; wall-clock timings go to a separate file so the
//! rest of the output is reproducible byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{DatasetSplit, LabeledExample};
use crate::embedstore::{pool_examples, EmbeddingArchive, PooledSet};
use crate::error::{Error, Result};
use crate::mdl::{self, Codelength, PrequentialReport, PrequentialSchedule};
use crate::memaudit::{self, AuditReport, HeuristicKind, MemorizationIndex, UniformSpace};
use crate::metrics::{compute_metrics, drop_table_markdown, DropCell, DropReport, DropRow, MetricReport};
use crate::probes::{self, ProbeConfig, ProbeKind, ProbeModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveSpec {
    pub name: String,
    pub path: PathBuf,
    /// Name of the pretrained archive this randomly initialized one mirrors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub kinds: Vec<ProbeKind>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub hidden_dim: usize,
    pub warmup: f64,
    pub weight_decay: f64,
    pub replicas: usize,
}

impl Default for ProbeSection {
    fn default() -> Self {
        ProbeSection {
            kinds: vec![ProbeKind::Linear],
            epochs: 3,
            batch_size: 16,
            learning_rate: 1e-3,
            dropout: 0.1,
            hidden_dim: 1024,
            warmup: 0.1,
            weight_decay: 0.01,
            replicas: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MdlMode {
    #[default]
    None,
    TwoPart,
    Prequential,
}

fn all_filters() -> Vec<HeuristicKind> {
    HeuristicKind::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory holding `schema.json` and the ep-json splits.
    pub dataset: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Carve a dev split off train when the dataset has none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_fraction: Option<f64>,
    #[serde(default)]
    pub drop_unseen_labels: bool,
    #[serde(default)]
    pub balance: bool,
    #[serde(rename = "archive")]
    pub archives: Vec<ArchiveSpec>,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default = "all_filters")]
    pub filters: Vec<HeuristicKind>,
    #[serde(default)]
    pub uniform_space: UniformSpace,
    #[serde(default)]
    pub mdl: MdlMode,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::invalid(format!("pipeline config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.archives.is_empty() {
            return Err(Error::invalid("pipeline config names no archive"));
        }
        if self.probe.kinds.is_empty() {
            return Err(Error::invalid("pipeline config names no probe kind"));
        }
        let mut names: Vec<&str> = self.archives.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("archive names must be unique"));
        }
        for a in &self.archives {
            if let Some(base) = &a.random_of {
                if !names.contains(&base.as_str()) || base == &a.name {
                    return Err(Error::invalid(format!("archive {:?} mirrors unknown archive {base:?}", a.name)));
                }
            }
        }
        Ok(())
    }

    fn probe_config(&self, kind: ProbeKind, input_dim: usize, split: &DatasetSplit) -> ProbeConfig {
        let p = &self.probe;
        let mut c = ProbeConfig::new(kind, input_dim, split.schema.num_classes(), split.schema.labeling);
        c.epochs = p.epochs;
        c.batch_size = p.batch_size;
        c.learning_rate = p.learning_rate;
        c.dropout = p.dropout;
        c.hidden_dim = p.hidden_dim;
        c.warmup = p.warmup;
        c.optimizer.weight_decay = p.weight_decay;
        c.replicas = p.replicas;
        c.seed = self.seed;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    /// Input file name → lowercase hex SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub config: PipelineConfig,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterResult {
    pub filter: HeuristicKind,
    pub kept: usize,
    pub removed: usize,
    /// `None` when the filter removes every test example.
    pub metrics: Option<MetricReport>,
    pub drop: Option<DropReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdlResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_part: Option<Codelength>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prequential: Option<PrequentialReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub archive: String,
    pub probe: ProbeKind,
    pub original: MetricReport,
    pub filters: Vec<FilterResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mdl: Option<MdlResult>,
    pub selected_replica: usize,
    pub replica_dev_scores: Vec<f64>,
}

impl CellResult {
    pub fn name(&self) -> String {
        format!("{}-{}", self.archive, self.probe)
    }

    pub fn filter(&self, kind: HeuristicKind) -> Option<&FilterResult> {
        self.filters.iter().find(|f| f.filter == kind)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub manifest: RunManifest,
    pub manifest_digest: String,
    pub audit: AuditReport,
    pub cells: Vec<CellResult>,
    pub drop_rows: Vec<DropRow>,
}

impl PipelineOutput {
    pub fn cell(&self, archive: &str, probe: ProbeKind) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.archive == archive && c.probe == probe)
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    manifest_digest: &'a str,
    #[serde(flatten)]
    report: &'a T,
}

struct Writer<'a> {
    dir: &'a Path,
    digest: &'a str,
}

impl Writer<'_> {
    fn text(&self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, body).map_err(|e| Error::io(&path, e))
    }

    fn json<T: Serialize>(&self, name: &str, report: &T) -> Result<()> {
        let stamped = Stamped {
            manifest_digest: self.digest,
            report,
        };
        let mut body = serde_json::to_string_pretty(&stamped).map_err(|source| Error::Json {
            context: name.to_string(),
            source,
        })?;
        body.push('\n');
        self.text(name, &body)
    }

    fn markdown(&self, name: &str, body: &str) -> Result<()> {
        self.text(name, &format!("{body}\nmanifest: {}\n", self.digest))
    }

    fn tsv(&self, name: &str, body: &str) -> Result<()> {
        self.text(name, &format!("# manifest {}\n{body}", self.digest))
    }

    fn metrics(&self, stem: &str, report: &MetricReport) -> Result<()> {
        self.json(&format!("{stem}.json"), report)?;
        self.tsv(&format!("{stem}.tsv"), &report.to_tsv())?;
        self.markdown(&format!("{stem}.md"), &report.to_markdown())
    }
}

fn stage<T>(name: &str, digest: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name.to_string(),
        digest: digest.to_string(),
        source: Box::new(e),
    })
}

/// Number of worker threads: `EPB_THREADS` if set, else rayon's default.
pub fn thread_count() -> Result<usize> {
    match std::env::var("EPB_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::invalid(format!("EPB_THREADS={v:?} is not a positive integer"))),
        Err(_) => Ok(rayon::current_num_threads()),
    }
}

struct Prepared {
    split: DatasetSplit,
    archives: Vec<(ArchiveSpec, EmbeddingArchive)>,
    audit: AuditReport,
    /// Per filter: indices into `split.test` that survive it.
    kept: Vec<(HeuristicKind, Vec<usize>)>,
}

fn prepare(config: &PipelineConfig, base_dir: &Path) -> Result<Prepared> {
    let mut split = DatasetSplit::load_dir(&base_dir.join(&config.dataset))?;
    if config.drop_unseen_labels {
        split = split.drop_unseen_labels().0;
    }
    if config.balance {
        split = split.rebalance(config.seed)?;
    }
    if let (Some(f), true) = (config.dev_fraction, split.dev.is_empty()) {
        split = split.make_dev_split(f, config.seed)?;
    }
    let mut archives = Vec::with_capacity(config.archives.len());
    for spec in &config.archives {
        let a = EmbeddingArchive::load(&base_dir.join(&spec.path))?;
        a.validate_against(&split)?;
        a.check_finite()?;
        archives.push((spec.clone(), a));
    }
    let index = MemorizationIndex::build(&split.train, &split.sentences, &split.schema)?;
    let queries = memaudit::queries(&split.test, &split.sentences, &split.schema)?;
    let audit = memaudit::audit(&index, &queries, config.seed, config.uniform_space)?;
    let kept = config
        .filters
        .iter()
        .map(|&kind| {
            let idx = queries
                .iter()
                .enumerate()
                .filter(|(_, q)| !memaudit::predict(kind, &index, q, config.seed, config.uniform_space).classifiable)
                .map(|(i, _)| i)
                .collect();
            (kind, idx)
        })
        .collect();
    Ok(Prepared {
        split,
        archives,
        audit,
        kept,
    })
}

fn run_cell(
    config: &PipelineConfig,
    prep: &Prepared,
    archive: &(ArchiveSpec, EmbeddingArchive),
    kind: ProbeKind,
) -> Result<(CellResult, ProbeModel<f32>)> {
    let split = &prep.split;
    let pooled = |ex: &[LabeledExample]| pool_examples(&archive.1, split, ex);
    let train: PooledSet = pooled(&split.train)?;
    let dev = pooled(&split.dev)?;
    let test = pooled(&split.test)?;
    let probe_config = config.probe_config(kind, archive.1.dim(), split);
    let model = probes::train::<f32>(&probe_config, &train, &dev)?;
    let pred = model.predict(&test)?;
    let classes = split.schema.num_classes();
    let multi = split.schema.is_multi_label();
    let original = compute_metrics(&test.targets, &pred, classes, multi)?;
    let mut filters = Vec::with_capacity(prep.kept.len());
    for (filter, idx) in &prep.kept {
        let gold: Vec<_> = idx.iter().map(|&i| test.targets[i].clone()).collect();
        let p: Vec<_> = idx.iter().map(|&i| pred[i].clone()).collect();
        let metrics = if idx.is_empty() {
            None
        } else {
            Some(compute_metrics(&gold, &p, classes, multi)?)
        };
        let drop = match &metrics {
            Some(m) if original.accuracy > 0.0 => Some(DropReport::new(original.accuracy, m.accuracy)?),
            _ => None,
        };
        filters.push(FilterResult {
            filter: *filter,
            kept: idx.len(),
            removed: test.len() - idx.len(),
            metrics,
            drop,
        });
    }
    let mdl = match config.mdl {
        MdlMode::None => None,
        MdlMode::TwoPart => Some(MdlResult {
            two_part: Some(mdl::two_part_codelength(&model, &train)?),
            prequential: None,
        }),
        MdlMode::Prequential => Some(MdlResult {
            two_part: None,
            prequential: Some(mdl::prequential_codelength::<f32>(
                &probe_config,
                &train,
                &PrequentialSchedule::default(),
                config.seed,
            )?),
        }),
    };
    let cell = CellResult {
        archive: archive.0.name.clone(),
        probe: kind,
        original,
        filters,
        mdl,
        selected_replica: model.log.selected_replica,
        replica_dev_scores: model.log.replica_dev_scores.clone(),
    };
    Ok((cell, model))
}

fn drop_rows(config: &PipelineConfig, dataset: &str, cells: &[CellResult]) -> Vec<DropRow> {
    let drop_of = |archive: &str, probe: ProbeKind, f: HeuristicKind| -> Option<f64> {
        cells
            .iter()
            .find(|c| c.archive == archive && c.probe == probe)
            .and_then(|c| c.filter(f))
            .and_then(|r| r.drop.as_ref())
            .map(|d| d.drop)
    };
    let mut rows = Vec::new();
    for spec in config.archives.iter().filter(|a| a.random_of.is_none()) {
        let random = config
            .archives
            .iter()
            .find(|a| a.random_of.as_deref() == Some(&spec.name));
        for &probe in &config.probe.kinds {
            rows.push(DropRow {
                dataset: dataset.to_string(),
                encoder: spec.name.clone(),
                probe: probe.to_string(),
                cells: config
                    .filters
                    .iter()
                    .map(|&f| DropCell {
                        filter: f,
                        base: drop_of(&spec.name, probe, f).unwrap_or(f64::NAN),
                        random: random.map(|r| drop_of(&r.name, probe, f).unwrap_or(f64::NAN)),
                    })
                    .collect(),
            });
        }
    }
    rows
}

/// Runs every cell and writes the artifact tree under `out_dir`. Relative
/// paths in `config` resolve against `base_dir`.
pub fn run_pipeline(config: &PipelineConfig, base_dir: &Path, out_dir: &Path) -> Result<PipelineOutput> {
    let started = Instant::now();
    config.validate()?;
    let dataset_dir = base_dir.join(&config.dataset);
    let mut inputs = BTreeMap::new();
    for name in ["schema.json", "train.jsonl", "dev.jsonl", "test.jsonl"] {
        let path = dataset_dir.join(name);
        if name == "dev.jsonl" && !path.exists() {
            continue;
        }
        inputs.insert(format!("dataset/{name}"), stage("manifest", "", file_digest(&path))?);
    }
    for a in &config.archives {
        inputs.insert(
            format!("archive/{}", a.name),
            stage("manifest", "", file_digest(&base_dir.join(&a.path)))?,
        );
    }
    let manifest = RunManifest {
        version: crate::VERSION.to_string(),
        seed: config.seed,
        inputs,
        config: config.clone(),
    };
    let digest = manifest.digest();
    let w = Writer {
        dir: out_dir,
        digest: &digest,
    };
    stage("manifest", &digest, w.text("manifest.json", &(manifest.to_json() + "\n")))?;

    let prep = stage("prepare", &digest, prepare(config, base_dir))?;
    stage("audit", &digest, w.json("audit.json", &prep.audit))?;
    stage("audit", &digest, w.tsv("audit.tsv", &prep.audit.to_tsv()))?;
    stage("audit", &digest, w.markdown("audit.md", &prep.audit.to_markdown()))?;

    let jobs: Vec<(usize, ProbeKind)> = (0..prep.archives.len())
        .flat_map(|a| config.probe.kinds.iter().map(move |&k| (a, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(stage("train", &digest, thread_count())?)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let results: Vec<Result<(CellResult, ProbeModel<f32>, f64)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(a, kind)| {
                let t = Instant::now();
                let (cell, model) = run_cell(config, &prep, &prep.archives[a], kind)?;
                Ok((cell, model, t.elapsed().as_secs_f64()))
            })
            .collect()
    });
    let mut cells = Vec::with_capacity(results.len());
    let mut timings = BTreeMap::new();
    let labels = prep.split.schema.labels().to_vec();
    for r in results {
        let (cell, model, secs) = stage("train", &digest, r)?;
        let name = cell.name();
        let dir = format!("cells/{name}");
        let cell_dir = out_dir.join(&dir);
        stage("report", &digest, fs::create_dir_all(&cell_dir).map_err(|e| Error::io(&cell_dir, e)))?;
        stage("report", &digest, model.save(&cell_dir.join("model.epm"), &labels, &digest))?;
        stage("report", &digest, w.metrics(&format!("{dir}/metrics_original"), &cell.original))?;
        for f in &cell.filters {
            if let Some(m) = &f.metrics {
                stage("report", &digest, w.metrics(&format!("{dir}/metrics_{}", f.filter), m))?;
            }
        }
        let drops: Vec<_> = cell
            .filters
            .iter()
            .map(|f| serde_json::json!({"filter": f.filter, "kept": f.kept, "removed": f.removed, "drop": f.drop}))
            .collect();
        stage("report", &digest, w.json(&format!("{dir}/drops.json"), &serde_json::json!({ "drops": drops })))?;
        if let Some(m) = &cell.mdl {
            stage("report", &digest, w.json(&format!("{dir}/mdl.json"), m))?;
        }
        stage("report", &digest, w.json(&format!("{dir}/cell.json"), &cell))?;
        timings.insert(name, secs);
        cells.push(cell);
    }
    let rows = drop_rows(config, &prep.split.schema.name, &cells);
    stage("report", &digest, w.json("drop_table.json", &serde_json::json!({ "rows": rows })))?;
    stage("report", &digest, w.markdown("drop_table.md", &drop_table_markdown(&rows)))?;
    let timing_doc = serde_json::json!({
        "cells_seconds": timings,
        "total_seconds": started.elapsed().as_secs_f64(),
    });
    stage(
        "report",
        &digest,
        w.text("timings.json", &(serde_json::to_string_pretty(&timing_doc).unwrap() + "\n")),
    )?;
    Ok(PipelineOutput {
        manifest,
        manifest_digest: digest,
        audit: prep.audit,
        cells,
        drop_rows: rows,
    })
}
