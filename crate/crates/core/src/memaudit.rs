//! Memorization audit: the span-key index over the training split, the three
//! heuristic baselines (Mem-Exact, Mem-Freq, Mem-Uniform), their accuracy
//! report and heuristic-filtered test sets.
//!
//! Labels are handled as label *sets* (sorted class indices) so single- and
//! multi-label tasks share one code path; for single-label tasks every set
//! is a singleton.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledExample, Sentence, TaskSchema};
use crate::error::{Error, Result};
use crate::seed::{self, domain};

/// Sorted, deduplicated class indices.
pub type LabelSet = Vec<u32>;

/// Surface form of an example's span(s): tokens joined by a single space,
/// case preserved. Two-span keys are ordered pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpanKey {
    One(String),
    Two(String, String),
}

impl SpanKey {
    pub fn of(sentence: &Sentence, ex: &LabeledExample) -> SpanKey {
        let surface = |s: crate::corpus::Span| sentence.tokens[s.start..s.end].join(" ");
        match ex.span2 {
            None => SpanKey::One(surface(ex.span1)),
            Some(s2) => SpanKey::Two(surface(ex.span1), surface(s2)),
        }
    }
}

/// A test example reduced to what the heuristics look at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub key: SpanKey,
    pub gold: LabelSet,
    /// Stream index for Mem-Uniform, derived from the stable example id.
    pub stream: [u64; 2],
}

impl Query {
    pub fn new(
        ex: &LabeledExample,
        sentences: &BTreeMap<u64, Sentence>,
        schema: &TaskSchema,
    ) -> Result<Query> {
        let sentence = sentences
            .get(&ex.sentence_id)
            .ok_or(Error::DanglingSentence(ex.sentence_id))?;
        Ok(Query {
            key: SpanKey::of(sentence, ex),
            gold: schema.classes_of(&ex.gold)?,
            stream: [ex.sentence_id, ex.target as u64],
        })
    }
}

pub fn queries(
    examples: &[LabeledExample],
    sentences: &BTreeMap<u64, Sentence>,
    schema: &TaskSchema,
) -> Result<Vec<Query>> {
    examples
        .iter()
        .map(|ex| Query::new(ex, sentences, schema))
        .collect()
}

/// Span key → multiset of training label sets.
#[derive(Debug, Clone, Default)]
pub struct MemorizationIndex {
    map: HashMap<SpanKey, BTreeMap<LabelSet, u64>>,
    total: u64,
    num_classes: usize,
    observed: BTreeSet<LabelSet>,
}

impl MemorizationIndex {
    pub fn build(
        train: &[LabeledExample],
        sentences: &BTreeMap<u64, Sentence>,
        schema: &TaskSchema,
    ) -> Result<Self> {
        let mut index = MemorizationIndex {
            num_classes: schema.num_classes(),
            ..Default::default()
        };
        for ex in train {
            let q = Query::new(ex, sentences, schema)?;
            index.insert(q.key, q.gold);
        }
        Ok(index)
    }

    pub fn insert(&mut self, key: SpanKey, labels: LabelSet) {
        self.observed.insert(labels.clone());
        *self.map.entry(key).or_default().entry(labels).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn labels(&self, key: &SpanKey) -> Option<&BTreeMap<LabelSet, u64>> {
        self.map.get(key)
    }

    /// Number of distinct keys.
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Number of indexed training examples.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeuristicKind {
    MemExact,
    MemFreq,
    MemUniform,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 3] = [
        HeuristicKind::MemExact,
        HeuristicKind::MemFreq,
        HeuristicKind::MemUniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::MemExact => "mem-exact",
            HeuristicKind::MemFreq => "mem-freq",
            HeuristicKind::MemUniform => "mem-uniform",
        }
    }

    /// Column label used in drop tables.
    pub fn short(self) -> &'static str {
        match self {
            HeuristicKind::MemExact => "Mem-Ex",
            HeuristicKind::MemFreq => "Mem-Freq",
            HeuristicKind::MemUniform => "Mem-Unif",
        }
    }
}

impl std::fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mem-exact" => Ok(HeuristicKind::MemExact),
            "mem-freq" => Ok(HeuristicKind::MemFreq),
            "mem-uniform" => Ok(HeuristicKind::MemUniform),
            other => Err(Error::invalid(format!("unknown heuristic {other:?}"))),
        }
    }
}

/// Sample space of Mem-Uniform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UniformSpace {
    /// The distinct label sets stored for the key.
    #[default]
    Key,
    /// Every class of the vocabulary (single-label), or every label set
    /// observed anywhere in train (multi-label).
    Full,
}

impl std::str::FromStr for UniformSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "key" => Ok(UniformSpace::Key),
            "full" => Ok(UniformSpace::Full),
            other => Err(Error::invalid(format!("unknown uniform space {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeuristicPrediction {
    pub kind: HeuristicKind,
    /// `None` means abstain.
    pub outcome: Option<LabelSet>,
    pub classifiable: bool,
}

impl HeuristicPrediction {
    fn new(kind: HeuristicKind, outcome: Option<LabelSet>, gold: &LabelSet) -> Self {
        let classifiable = outcome.as_ref() == Some(gold);
        HeuristicPrediction {
            kind,
            outcome,
            classifiable,
        }
    }
}

/// Predicts the key's label when the key was seen in train with exactly one
/// distinct label set.
pub fn mem_exact(index: &MemorizationIndex, q: &Query) -> HeuristicPrediction {
    let outcome = index
        .labels(&q.key)
        .filter(|m| m.len() == 1)
        .and_then(|m| m.keys().next().cloned());
    HeuristicPrediction::new(HeuristicKind::MemExact, outcome, &q.gold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreqPrediction {
    pub prediction: HeuristicPrediction,
    /// Empirical probability of the gold label set under the key's training
    /// distribution; 0 for unseen keys.
    pub p_gold: f64,
}

/// Predicts the most frequent training label set of the key; ties go to the
/// canonically smallest set (lowest class index for single-label tasks).
pub fn mem_freq(index: &MemorizationIndex, q: &Query) -> FreqPrediction {
    let Some(dist) = index.labels(&q.key) else {
        return FreqPrediction {
            prediction: HeuristicPrediction::new(HeuristicKind::MemFreq, None, &q.gold),
            p_gold: 0.0,
        };
    };
    let mut best: Option<(&LabelSet, u64)> = None;
    let mut total = 0u64;
    for (labels, &count) in dist {
        total += count;
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((labels, count));
        }
    }
    let p_gold = dist.get(&q.gold).copied().unwrap_or(0) as f64 / total as f64;
    FreqPrediction {
        prediction: HeuristicPrediction::new(
            HeuristicKind::MemFreq,
            best.map(|(l, _)| l.clone()),
            &q.gold,
        ),
        p_gold,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformPrediction {
    pub prediction: HeuristicPrediction,
    /// Probability that a uniform draw hits the gold label set.
    pub expected: f64,
}

/// Draws one label set uniformly from the sample space of a seen key. The
/// draw uses the stream keyed by `(seed, example id)`, so results do not
/// depend on the example's position in the test set.
pub fn mem_uniform(
    index: &MemorizationIndex,
    q: &Query,
    seed: u64,
    space: UniformSpace,
) -> UniformPrediction {
    let abstain = || UniformPrediction {
        prediction: HeuristicPrediction::new(HeuristicKind::MemUniform, None, &q.gold),
        expected: 0.0,
    };
    let Some(dist) = index.labels(&q.key) else {
        return abstain();
    };
    let mut rng = seed::stream(seed, domain::MEM_UNIFORM, &q.stream);
    let (draw, expected) = match space {
        UniformSpace::Key => {
            let n = dist.len();
            let pick = dist.keys().nth(rng.random_range(0..n)).cloned();
            let hit = dist.contains_key(&q.gold) as u32 as f64;
            (pick, hit / n as f64)
        }
        UniformSpace::Full if index.observed.iter().any(|s| s.len() > 1) => {
            let n = index.observed.len();
            let pick = index.observed.iter().nth(rng.random_range(0..n)).cloned();
            let hit = index.observed.contains(&q.gold) as u32 as f64;
            (pick, hit / n as f64)
        }
        UniformSpace::Full => {
            let n = index.num_classes;
            let pick = vec![rng.random_range(0..n) as u32];
            (Some(pick), 1.0 / n as f64)
        }
    };
    UniformPrediction {
        prediction: HeuristicPrediction::new(HeuristicKind::MemUniform, draw, &q.gold),
        expected,
    }
}

/// Runs `kind` on one query; Mem-Uniform uses its realized draw.
pub fn predict(
    kind: HeuristicKind,
    index: &MemorizationIndex,
    q: &Query,
    seed: u64,
    space: UniformSpace,
) -> HeuristicPrediction {
    match kind {
        HeuristicKind::MemExact => mem_exact(index, q),
        HeuristicKind::MemFreq => mem_freq(index, q).prediction,
        HeuristicKind::MemUniform => mem_uniform(index, q, seed, space).prediction,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeuristicScore {
    pub heuristic: HeuristicKind,
    pub n: usize,
    pub classifiable: usize,
    pub covered: usize,
    /// 100 × classifiable / n; abstentions count as incorrect.
    pub accuracy: f64,
    /// 100 × non-abstaining / n.
    pub coverage: f64,
    /// Expected accuracy when predicting by sampling (Mem-Freq: from the
    /// empirical distribution; Mem-Uniform: uniformly). `None` for Mem-Exact.
    pub expected_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub n: usize,
    pub seed: u64,
    pub uniform_space: UniformSpace,
    pub scores: Vec<HeuristicScore>,
}

pub fn percent(count: usize, n: usize) -> f64 {
    100.0 * count as f64 / n as f64
}

/// Scores every heuristic on the test queries.
pub fn audit(
    index: &MemorizationIndex,
    test: &[Query],
    seed: u64,
    space: UniformSpace,
) -> Result<AuditReport> {
    if test.is_empty() {
        return Err(Error::EmptyTest);
    }
    let n = test.len();
    let mut tally = [(0usize, 0usize); 3];
    let (mut p_freq, mut p_unif) = (0.0f64, 0.0f64);
    for q in test {
        let exact = mem_exact(index, q);
        let freq = mem_freq(index, q);
        let unif = mem_uniform(index, q, seed, space);
        for (slot, p) in tally
            .iter_mut()
            .zip([&exact, &freq.prediction, &unif.prediction])
        {
            slot.0 += p.classifiable as usize;
            slot.1 += p.outcome.is_some() as usize;
        }
        p_freq += freq.p_gold;
        p_unif += unif.expected;
    }
    let expected = [None, Some(100.0 * p_freq / n as f64), Some(100.0 * p_unif / n as f64)];
    let scores = HeuristicKind::ALL
        .iter()
        .zip(tally)
        .zip(expected)
        .map(|((&heuristic, (classifiable, covered)), expected_accuracy)| HeuristicScore {
            heuristic,
            n,
            classifiable,
            covered,
            accuracy: percent(classifiable, n),
            coverage: percent(covered, n),
            expected_accuracy,
        })
        .collect();
    Ok(AuditReport {
        n,
        seed,
        uniform_space: space,
        scores,
    })
}

impl AuditReport {
    pub fn score(&self, kind: HeuristicKind) -> &HeuristicScore {
        self.scores
            .iter()
            .find(|s| s.heuristic == kind)
            .expect("report holds every heuristic")
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("heuristic\tn\tclassifiable\tcovered\taccuracy\tcoverage\texpected_accuracy\n");
        for s in &self.scores {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.2}\t{:.2}\t{}",
                s.heuristic,
                s.n,
                s.classifiable,
                s.covered,
                s.accuracy,
                s.coverage,
                s.expected_accuracy.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
            );
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Heuristic | Accuracy (%) | Coverage (%) | Expected (%) |\n|---|---:|---:|---:|\n");
        for s in &self.scores {
            let _ = writeln!(
                out,
                "| {} | {:.2} | {:.2} | {} |",
                s.heuristic.short(),
                s.accuracy,
                s.coverage,
                s.expected_accuracy.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
            );
        }
        out
    }
}

/// Splits the test set into points the heuristic cannot classify (`kept`)
/// and those it can (`removed`). Order is preserved within each side.
pub fn filter<'a>(
    test: &'a [LabeledExample],
    queries: &[Query],
    kind: HeuristicKind,
    index: &MemorizationIndex,
    seed: u64,
    space: UniformSpace,
) -> (Vec<&'a LabeledExample>, Vec<&'a LabeledExample>) {
    assert_eq!(test.len(), queries.len(), "one query per test example");
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (ex, q) in test.iter().zip(queries) {
        if predict(kind, index, q, seed, space).classifiable {
            removed.push(ex);
        } else {
            kept.push(ex);
        }
    }
    (kept, removed)
}
