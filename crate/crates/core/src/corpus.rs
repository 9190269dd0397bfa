//! Canonical data model for edge-probing datasets.
//!
//! A dataset is a set of sentences plus labeled examples pointing into them.
//! Each example carries one or two half-open token spans and a gold label set
//! (a singleton for single-label tasks). Ingestion covers the CoNLL-2003 and
//! CoNLL-2000 column formats and the line-oriented span JSON format
//! (`ep-json`), which is also the on-disk canonical form.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, domain};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: u64,
    pub tokens: Vec<String>,
}

/// Half-open token range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn fits(&self, n_tokens: usize) -> bool {
        self.start < self.end && self.end <= n_tokens
    }
}

impl Serialize for Span {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.start, self.end].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [start, end] = <[usize; 2]>::deserialize(d)?;
        Ok(Span { start, end })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arity {
    OneSpan,
    TwoSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Labeling {
    SingleLabel,
    MultiLabel,
}

/// Task description. The order of `labels` is the canonical class-index mapping.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct TaskSchema {
    pub name: String,
    pub arity: Arity,
    pub labeling: Labeling,
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    name: String,
    arity: Arity,
    labeling: Labeling,
    labels: Vec<String>,
}

impl TryFrom<RawSchema> for TaskSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        TaskSchema::new(raw.name, raw.arity, raw.labeling, raw.labels)
    }
}

impl From<TaskSchema> for RawSchema {
    fn from(s: TaskSchema) -> Self {
        RawSchema {
            name: s.name,
            arity: s.arity,
            labeling: s.labeling,
            labels: s.labels,
        }
    }
}

impl PartialEq for TaskSchema {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.arity == other.arity
            && self.labeling == other.labeling
            && self.labels == other.labels
    }
}

impl TaskSchema {
    pub fn new(
        name: impl Into<String>,
        arity: Arity,
        labeling: Labeling,
        labels: Vec<String>,
    ) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Schema(format!(
                "label vocabulary needs at least 2 entries, got {}",
                labels.len()
            )));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i as u32).is_some() {
                return Err(Error::Schema(format!("duplicate label {l:?}")));
            }
        }
        Ok(TaskSchema {
            name: name.into(),
            arity,
            labeling,
            labels,
            index,
        })
    }

    /// A schema with an empty vocabulary, filled in by ingesting with
    /// [`LabelPolicy::Extend`] and checked afterwards with [`validated`].
    ///
    /// [`validated`]: TaskSchema::validated
    pub fn open(name: impl Into<String>, arity: Arity, labeling: Labeling) -> Self {
        TaskSchema {
            name: name.into(),
            arity,
            labeling,
            labels: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn validated(self) -> Result<Self> {
        TaskSchema::new(self.name, self.arity, self.labeling, self.labels)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            context: format!("schema {}", path.display()),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("schema serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn class_index(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, class: u32) -> &str {
        &self.labels[class as usize]
    }

    pub fn is_multi_label(&self) -> bool {
        self.labeling == Labeling::MultiLabel
    }

    fn extend(&mut self, label: &str) -> u32 {
        if let Some(i) = self.class_index(label) {
            return i;
        }
        let i = self.labels.len() as u32;
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        i
    }

    /// Sorted, deduplicated class indices of a gold label set.
    pub fn classes_of(&self, gold: &[String]) -> Result<Vec<u32>> {
        let mut out = gold
            .iter()
            .map(|l| {
                self.class_index(l)
                    .ok_or_else(|| Error::UnknownLabel { label: l.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

/// Stable identity of an example: its sentence and its position in that
/// sentence's target list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExampleId {
    pub sentence: u64,
    pub target: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub sentence_id: u64,
    pub target: u32,
    pub span1: Span,
    pub span2: Option<Span>,
    pub gold: Vec<String>,
}

impl LabeledExample {
    pub fn id(&self) -> ExampleId {
        ExampleId {
            sentence: self.sentence_id,
            target: self.target,
        }
    }
}

/// What to do with a gold label missing from the schema vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelPolicy {
    #[default]
    Reject,
    Extend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Conll2003,
    Conll2000,
    EpJson,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conll2003" => Ok(Format::Conll2003),
            "conll2000" => Ok(Format::Conll2000),
            "ep-json" => Ok(Format::EpJson),
            other => Err(Error::invalid(format!("unknown format {other:?}"))),
        }
    }
}

/// Which CoNLL column supplies the labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConllColumn {
    Pos,
    Chunk,
    Ner,
}

impl std::str::FromStr for ConllColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pos" => Ok(ConllColumn::Pos),
            "chunk" => Ok(ConllColumn::Chunk),
            "ner" => Ok(ConllColumn::Ner),
            other => Err(Error::invalid(format!("unknown CoNLL column {other:?}"))),
        }
    }
}

impl Format {
    fn conll_width(self) -> usize {
        match self {
            Format::Conll2003 => 4,
            Format::Conll2000 => 3,
            Format::EpJson => 0,
        }
    }

    /// Label column used when none is requested: NER for CoNLL-2003,
    /// chunks for CoNLL-2000.
    pub fn default_column(self) -> ConllColumn {
        match self {
            Format::Conll2000 => ConllColumn::Chunk,
            _ => ConllColumn::Ner,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub format: Format,
    pub column: Option<ConllColumn>,
    pub policy: LabelPolicy,
}

impl IngestOptions {
    pub fn new(format: Format) -> Self {
        IngestOptions {
            format,
            column: None,
            policy: LabelPolicy::Reject,
        }
    }
}

/// Sentences and examples read from one file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Part {
    pub sentences: Vec<Sentence>,
    pub examples: Vec<LabeledExample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub schema: TaskSchema,
    pub sentences: BTreeMap<u64, Sentence>,
    pub train: Vec<LabeledExample>,
    pub dev: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

/// Number of examples removed by [`DatasetSplit::drop_unseen_labels`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct UnseenRemoval {
    pub dev: usize,
    pub test: usize,
}

/// Contiguous `B-X`/`I-X` runs become one span labeled `X`; every `O` token
/// becomes its own single-token span labeled `O`. An `I-X` that does not
/// continue an `X` run opens a new span (IOB1 input).
pub fn bio_spans(tags: &[&str]) -> std::result::Result<Vec<(Span, String)>, String> {
    let mut out: Vec<(Span, String)> = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    let close = |out: &mut Vec<(Span, String)>, open: &mut Option<(usize, &str)>, end: usize| {
        if let Some((start, label)) = open.take() {
            out.push((Span::new(start, end), label.to_string()));
        }
    };
    for (i, tag) in tags.iter().enumerate() {
        if *tag == "O" {
            close(&mut out, &mut open, i);
            out.push((Span::new(i, i + 1), "O".to_string()));
            continue;
        }
        let (prefix, label) = tag
            .split_once('-')
            .ok_or_else(|| format!("malformed BIO tag {tag:?}"))?;
        if label.is_empty() {
            return Err(format!("malformed BIO tag {tag:?}"));
        }
        match prefix {
            "B" => {
                close(&mut out, &mut open, i);
                open = Some((i, label));
            }
            "I" => match open {
                Some((_, cur)) if cur == label => {}
                _ => {
                    close(&mut out, &mut open, i);
                    open = Some((i, label));
                }
            },
            _ => return Err(format!("malformed BIO tag {tag:?}")),
        }
    }
    close(&mut out, &mut open, tags.len());
    Ok(out)
}

fn resolve_labels(
    schema: &mut TaskSchema,
    policy: LabelPolicy,
    labels: &[String],
) -> Result<()> {
    for l in labels {
        if schema.class_index(l).is_none() {
            match policy {
                LabelPolicy::Reject => return Err(Error::UnknownLabel { label: l.clone() }),
                LabelPolicy::Extend => {
                    schema.extend(l);
                }
            }
        }
    }
    Ok(())
}

/// Reads CoNLL columns. Sentence ids are assigned sequentially from `first_id`.
pub fn read_conll<R: BufRead>(
    reader: R,
    opts: &IngestOptions,
    schema: &mut TaskSchema,
    first_id: u64,
) -> Result<Part> {
    let width = opts.format.conll_width();
    if width == 0 {
        return Err(Error::invalid("read_conll called with a non-CoNLL format"));
    }
    let column = opts.column.unwrap_or(opts.format.default_column());
    let col = match column {
        ConllColumn::Pos => 1,
        ConllColumn::Chunk => 2,
        ConllColumn::Ner => 3,
    };
    if col >= width {
        return Err(Error::invalid(format!(
            "column {column:?} is not present in {:?}",
            opts.format
        )));
    }

    let mut part = Part::default();
    let mut tokens: Vec<String> = Vec::new();
    let mut tags: Vec<String> = Vec::new();
    let mut sent_line = 0usize;
    let mut next_id = first_id;

    let mut flush = |tokens: &mut Vec<String>,
                     tags: &mut Vec<String>,
                     line: usize,
                     part: &mut Part,
                     schema: &mut TaskSchema|
     -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        let id = next_id;
        next_id += 1;
        let spans: Vec<(Span, String)> = if column == ConllColumn::Pos {
            tags.iter()
                .enumerate()
                .map(|(i, t)| (Span::new(i, i + 1), t.clone()))
                .collect()
        } else {
            let refs: Vec<&str> = tags.iter().map(String::as_str).collect();
            bio_spans(&refs).map_err(|message| Error::Parse { line, message })?
        };
        for (target, (span, label)) in spans.into_iter().enumerate() {
            let gold = vec![label];
            resolve_labels(schema, opts.policy, &gold)?;
            part.examples.push(LabeledExample {
                sentence_id: id,
                target: target as u32,
                span1: span,
                span2: None,
                gold,
            });
        }
        part.sentences.push(Sentence {
            id,
            tokens: std::mem::take(tokens),
        });
        tags.clear();
        Ok(())
    };

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            flush(&mut tokens, &mut tags, sent_line, &mut part, schema)?;
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols[0] == "-DOCSTART-" {
            continue;
        }
        if cols.len() != width {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {width} columns, found {}", cols.len()),
            });
        }
        if tokens.is_empty() {
            sent_line = lineno;
        }
        tokens.push(cols[0].to_string());
        tags.push(cols[col].to_string());
    }
    flush(&mut tokens, &mut tags, sent_line, &mut part, schema)?;
    Ok(part)
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelField {
    One(String),
    Many(Vec<String>),
}

// Field order is alphabetical: serialization is canonical by construction.
#[derive(Serialize, Deserialize)]
struct TargetRecord {
    label: LabelField,
    span1: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    span2: Option<Span>,
}

#[derive(Serialize, Deserialize)]
struct SentenceRecord {
    id: u64,
    targets: Vec<TargetRecord>,
    tokens: Vec<String>,
}

/// Reads `ep-json`: one sentence record per line, blank lines ignored.
pub fn read_ep_json<R: BufRead>(
    reader: R,
    policy: LabelPolicy,
    schema: &mut TaskSchema,
) -> Result<Part> {
    let mut part = Part::default();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SentenceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if rec.tokens.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                message: "sentence has no tokens".into(),
            });
        }
        let n = rec.tokens.len();
        for (t, target) in rec.targets.into_iter().enumerate() {
            for span in std::iter::once(&target.span1).chain(target.span2.as_ref()) {
                if !span.fits(n) {
                    return Err(Error::SpanOverflow {
                        line: lineno,
                        start: span.start,
                        end: span.end,
                        len: n,
                    });
                }
            }
            let two = schema.arity == Arity::TwoSpan;
            if two != target.span2.is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!(
                        "target {t}: span2 must be {} for a {:?} task",
                        if two { "present" } else { "absent" },
                        schema.arity
                    ),
                });
            }
            let gold = match target.label {
                LabelField::One(l) => vec![l],
                LabelField::Many(ls) => ls,
            };
            if gold.is_empty() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("target {t}: empty gold label set"),
                });
            }
            if !schema.is_multi_label() && gold.len() != 1 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("target {t}: single-label task with {} labels", gold.len()),
                });
            }
            resolve_labels(schema, policy, &gold)?;
            part.examples.push(LabeledExample {
                sentence_id: rec.id,
                target: t as u32,
                span1: target.span1,
                span2: target.span2,
                gold,
            });
        }
        part.sentences.push(Sentence {
            id: rec.id,
            tokens: rec.tokens,
        });
    }
    Ok(part)
}

/// Writes examples as `ep-json` with canonical key order. Consecutive
/// examples of the same sentence share one record.
pub fn write_ep_json<W: Write>(
    mut w: W,
    sentences: &BTreeMap<u64, Sentence>,
    examples: &[LabeledExample],
    labeling: Labeling,
) -> Result<()> {
    let mut i = 0;
    while i < examples.len() {
        let sid = examples[i].sentence_id;
        let sentence = sentences
            .get(&sid)
            .ok_or(Error::DanglingSentence(sid))?;
        let mut targets = Vec::new();
        while i < examples.len() && examples[i].sentence_id == sid {
            let ex = &examples[i];
            let label = match labeling {
                Labeling::SingleLabel if ex.gold.len() == 1 => LabelField::One(ex.gold[0].clone()),
                _ => LabelField::Many(ex.gold.clone()),
            };
            targets.push(TargetRecord {
                label,
                span1: ex.span1,
                span2: ex.span2,
            });
            i += 1;
        }
        let rec = SentenceRecord {
            id: sid,
            targets,
            tokens: sentence.tokens.clone(),
        };
        let line = serde_json::to_string(&rec).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io("<ep-json output>", e))?;
    }
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Reads one file in the given format.
pub fn ingest_part(
    path: &Path,
    opts: &IngestOptions,
    schema: &mut TaskSchema,
    first_id: u64,
) -> Result<Part> {
    let reader = open(path)?;
    match opts.format {
        Format::EpJson => read_ep_json(reader, opts.policy, schema),
        _ => read_conll(reader, opts, schema, first_id),
    }
}

/// Paths of the parts of one dataset; `dev` is optional.
#[derive(Debug, Clone)]
pub struct SplitPaths<'a> {
    pub train: &'a Path,
    pub dev: Option<&'a Path>,
    pub test: &'a Path,
}

/// Ingests train/dev/test files into one split. CoNLL sentence ids run
/// sequentially across the parts; ep-json ids must be unique across them.
pub fn ingest(paths: &SplitPaths<'_>, opts: &IngestOptions, schema: TaskSchema) -> Result<DatasetSplit> {
    let mut schema = schema;
    let mut next_id = 0u64;
    let mut read = |path: &Path, schema: &mut TaskSchema| -> Result<Part> {
        let part = ingest_part(path, opts, schema, next_id)?;
        next_id += part.sentences.len() as u64;
        Ok(part)
    };
    let train = read(paths.train, &mut schema)?;
    let dev = match paths.dev {
        Some(p) => read(p, &mut schema)?,
        None => Part::default(),
    };
    let test = read(paths.test, &mut schema)?;
    DatasetSplit::from_parts(schema.validated()?, train, dev, test)
}

impl DatasetSplit {
    pub fn from_parts(schema: TaskSchema, train: Part, dev: Part, test: Part) -> Result<Self> {
        let mut sentences = BTreeMap::new();
        for s in train
            .sentences
            .into_iter()
            .chain(dev.sentences)
            .chain(test.sentences)
        {
            let id = s.id;
            if sentences.insert(id, s).is_some() {
                return Err(Error::DuplicateSentence(id));
            }
        }
        let split = DatasetSplit {
            schema,
            sentences,
            train: train.examples,
            dev: dev.examples,
            test: test.examples,
        };
        split.validate()?;
        Ok(split)
    }

    /// Checks sentence references, span bounds and gold labels.
    pub fn validate(&self) -> Result<()> {
        for ex in self.all_examples() {
            let s = self
                .sentences
                .get(&ex.sentence_id)
                .ok_or(Error::DanglingSentence(ex.sentence_id))?;
            for span in std::iter::once(&ex.span1).chain(ex.span2.as_ref()) {
                if !span.fits(s.tokens.len()) {
                    return Err(Error::SpanOverflow {
                        line: 0,
                        start: span.start,
                        end: span.end,
                        len: s.tokens.len(),
                    });
                }
            }
            if ex.gold.is_empty() {
                return Err(Error::invalid("example with empty gold label set"));
            }
            self.schema.classes_of(&ex.gold)?;
        }
        Ok(())
    }

    pub fn all_examples(&self) -> impl Iterator<Item = &LabeledExample> {
        self.train.iter().chain(&self.dev).chain(&self.test)
    }

    pub fn sentence(&self, id: u64) -> Result<&Sentence> {
        self.sentences.get(&id).ok_or(Error::DanglingSentence(id))
    }

    /// Moves a seeded `fraction` of train into dev. Dev size is
    /// `round_half_up(fraction * n)`, at least 1.
    pub fn make_dev_split(&self, fraction: f64, seed: u64) -> Result<DatasetSplit> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::invalid(format!("dev fraction {fraction} not in (0, 1)")));
        }
        if !self.dev.is_empty() {
            return Err(Error::invalid("dataset already has a dev split"));
        }
        let n = self.train.len();
        let k = ((fraction * n as f64 + 0.5).floor() as usize).max(1);
        if k >= n {
            return Err(Error::invalid(format!(
                "dev split of {k} would leave no training examples (train has {n})"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::stream(seed, domain::DEV_SPLIT, &[]));
        let mut in_dev = vec![false; n];
        for &i in &order[..k] {
            in_dev[i] = true;
        }
        let (dev, train): (Vec<_>, Vec<_>) = self
            .train
            .iter()
            .cloned()
            .zip(in_dev)
            .partition(|(_, d)| *d);
        Ok(DatasetSplit {
            train: train.into_iter().map(|(e, _)| e).collect(),
            dev: dev.into_iter().map(|(e, _)| e).collect(),
            ..self.clone()
        })
    }

    /// Removes dev/test examples whose gold set contains any label that never
    /// occurs in train.
    pub fn drop_unseen_labels(&self) -> (DatasetSplit, UnseenRemoval) {
        let seen: BTreeSet<&str> = self
            .train
            .iter()
            .flat_map(|e| e.gold.iter().map(String::as_str))
            .collect();
        let keep = |e: &&LabeledExample| e.gold.iter().all(|l| seen.contains(l.as_str()));
        let dev: Vec<_> = self.dev.iter().filter(keep).cloned().collect();
        let test: Vec<_> = self.test.iter().filter(keep).cloned().collect();
        let removed = UnseenRemoval {
            dev: self.dev.len() - dev.len(),
            test: self.test.len() - test.len(),
        };
        (
            DatasetSplit {
                dev,
                test,
                ..self.clone()
            },
            removed,
        )
    }

    /// Downsamples every test class to the minority-class count. Retained
    /// examples keep their original order; train and dev are untouched.
    pub fn rebalance(&self, seed: u64) -> Result<DatasetSplit> {
        if self.schema.is_multi_label() {
            return Err(Error::invalid("rebalance requires a single-label task"));
        }
        let c = self.schema.num_classes();
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
        for (i, ex) in self.test.iter().enumerate() {
            let k = self.schema.classes_of(&ex.gold)?[0];
            by_class[k as usize].push(i);
        }
        if let Some(k) = by_class.iter().position(Vec::is_empty) {
            return Err(Error::invalid(format!(
                "class {:?} has no test examples",
                self.schema.label(k as u32)
            )));
        }
        let minority = by_class.iter().map(Vec::len).min().unwrap_or(0);
        let mut keep = vec![false; self.test.len()];
        for (k, idx) in by_class.iter_mut().enumerate() {
            idx.shuffle(&mut seed::stream(seed, domain::REBALANCE, &[k as u64]));
            for &i in &idx[..minority] {
                keep[i] = true;
            }
        }
        let test = self
            .test
            .iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(e, _)| e.clone())
            .collect();
        Ok(DatasetSplit {
            test,
            ..self.clone()
        })
    }

    /// Writes `schema.json`, `train.jsonl`, `dev.jsonl` and `test.jsonl`.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.schema.save(&dir.join("schema.json"))?;
        for (name, part) in [("train", &self.train), ("dev", &self.dev), ("test", &self.test)] {
            let path = dir.join(format!("{name}.jsonl"));
            let mut buf = Vec::new();
            write_ep_json(&mut buf, &self.sentences, part, self.schema.labeling)?;
            fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Reads a directory written by [`DatasetSplit::save_dir`]. A missing
    /// `dev.jsonl` means an empty dev part.
    pub fn load_dir(dir: &Path) -> Result<DatasetSplit> {
        let schema = TaskSchema::load(&dir.join("schema.json"))?;
        let dev = dir.join("dev.jsonl");
        let paths = SplitPaths {
            train: &dir.join("train.jsonl"),
            dev: dev.exists().then_some(dev.as_path()),
            test: &dir.join("test.jsonl"),
        };
        ingest(&paths, &IngestOptions::new(Format::EpJson), schema)
    }

    /// Class counts of the test part, in schema order.
    pub fn test_class_counts(&self) -> Result<Vec<usize>> {
        let mut counts = vec![0; self.schema.num_classes()];
        for ex in &self.test {
            for k in self.schema.classes_of(&ex.gold)? {
                counts[k as usize] += 1;
            }
        }
        Ok(counts)
    }
}

/// Reads an entire ep-json byte buffer; convenience for tests and tools.
pub fn parse_ep_json_bytes(bytes: &[u8], schema: &mut TaskSchema) -> Result<Part> {
    read_ep_json(BufReader::new(bytes), LabelPolicy::Reject, schema)
}
