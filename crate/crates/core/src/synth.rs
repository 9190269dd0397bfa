//! Seeded synthetic probing corpora with a known amount of train/test key
//! leakage and a choice of informative or label-free embeddings.
//!
//! Every example is its own sentence whose tokens are exactly the span key.
//! Keys come from a vocabulary of `vocab_size` types: the first
//! `train_keys` appear in train (some with a single label, some with two),
//! the rest only ever occur in test. Test points are assigned a role up
//! front (leaked-unique, leaked-ambiguous, unseen), so the heuristic
//! outcomes are known from the generator's own bookkeeping.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{Arity, DatasetSplit, LabeledExample, Labeling, Sentence, Span, TaskSchema};
use crate::embedstore::EmbeddingArchive;
use crate::error::{Error, Result};
use crate::memaudit::percent;
use crate::seed::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingMode {
    /// Per occurrence: `separation · e_gold + N(0, I)`.
    Informative,
    /// One fixed `N(0, I)` vector per token type, independent of labels.
    Noise,
}

fn default_separation() -> f64 {
    4.0
}

fn default_arity() -> Arity {
    Arity::OneSpan
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub rho_exact: f64,
    pub rho_ambig: f64,
    pub embedding: EmbeddingMode,
    pub dim: usize,
    pub seed: u64,
    #[serde(default = "default_arity")]
    pub arity: Arity,
    /// Key types that occur in train; defaults to half the vocabulary.
    #[serde(default)]
    pub train_keys: Option<usize>,
    #[serde(default = "default_separation")]
    pub separation: f64,
}

impl SynthConfig {
    pub fn new(classes: usize, n_train: usize, n_test: usize, rho_exact: f64, embedding: EmbeddingMode) -> Self {
        SynthConfig {
            vocab_size: 64,
            classes,
            n_train,
            n_test,
            rho_exact,
            rho_ambig: 0.0,
            embedding,
            dim: 16,
            seed: 0,
            arity: Arity::OneSpan,
            train_keys: None,
            separation: 4.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        let rate = |r: f64| (0.0..=1.0).contains(&r);
        if !rate(self.rho_exact) || !rate(self.rho_ambig) || self.rho_exact + self.rho_ambig > 1.0 + 1e-12 {
            return bad("leak rates must lie in [0, 1] and sum to at most 1".into());
        }
        if self.n_train == 0 || self.n_test == 0 || self.dim == 0 {
            return bad("sizes and dimension must be at least 1".into());
        }
        if self.classes < 2 {
            return bad("at least 2 classes are required".into());
        }
        if self.embedding == EmbeddingMode::Informative && self.dim < self.classes {
            return bad(format!(
                "informative embeddings need dim >= classes ({} < {})",
                self.dim, self.classes
            ));
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return bad("separation must be finite and non-negative".into());
        }
        Ok(())
    }

    fn train_key_count(&self) -> usize {
        self.train_keys.unwrap_or(self.vocab_size / 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestRole {
    /// Key seen in train with exactly the gold label.
    Exact,
    /// Key seen in train with at least two labels.
    Ambiguous,
    /// Key never seen in train.
    Unseen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPoint {
    pub sentence_id: u64,
    pub role: TestRole,
    pub gold: u32,
    /// `(class, count)` of the key's training occurrences.
    pub train_labels: Vec<(u32, u64)>,
    pub mem_exact: bool,
    pub mem_freq: bool,
    /// Probability that a uniform draw over the key's training labels hits gold.
    pub mem_uniform: f64,
}

/// Heuristic outcomes enumerated from the generator's bookkeeping, with the
/// same percentage conventions as the audit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub n: usize,
    pub mem_exact_correct: usize,
    pub mem_freq_correct: usize,
    pub mem_exact_accuracy: f64,
    pub mem_freq_accuracy: f64,
    pub mem_freq_expected: f64,
    pub mem_uniform_expected: f64,
    pub points: Vec<TruthPoint>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub split: DatasetSplit,
    pub archive: EmbeddingArchive,
    pub truth: GroundTruth,
}

/// Labels of a train key: one for unique keys, two for ambiguous ones.
struct KeyInfo {
    labels: Vec<u32>,
    counts: BTreeMap<u32, u64>,
}

fn normal_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) as f32).collect()
}

pub fn label_names(classes: usize) -> Vec<String> {
    (0..classes).map(|k| format!("c{k}")).collect()
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let v = config.vocab_size;
    let k_train = config.train_key_count();
    let n_exact = ((config.rho_exact * config.n_test as f64).round() as usize).min(config.n_test);
    let n_ambig = ((config.rho_ambig * config.n_test as f64).round() as usize).min(config.n_test - n_exact);
    let n_unseen = config.n_test - n_exact - n_ambig;
    let n_ambig_keys = if n_ambig > 0 {
        ((k_train as f64 * config.rho_ambig).ceil() as usize).max(1)
    } else {
        0
    };
    let n_unique_keys = k_train.saturating_sub(n_ambig_keys);
    if k_train > v || n_unique_keys == 0 || (n_unseen > 0 && v == k_train) {
        return Err(Error::invalid(format!(
            "vocabulary of {v} keys is too small: {k_train} train keys ({n_ambig_keys} ambiguous) and {} unseen keys needed",
            (n_unseen > 0) as usize
        )));
    }
    if config.n_train < n_unique_keys + 2 * n_ambig_keys {
        return Err(Error::invalid(format!(
            "{} training examples cannot cover {} train keys",
            config.n_train, k_train
        )));
    }

    let mut rng = seed::stream(config.seed, domain::SYNTH_CORPUS, &[]);
    let c = config.classes as u32;
    // keys [0, n_unique) are unique, [n_unique, k_train) ambiguous
    let mut keys: Vec<KeyInfo> = (0..k_train)
        .map(|k| {
            let labels = if k < n_unique_keys {
                vec![rng.random_range(0..c)]
            } else {
                let a = rng.random_range(0..c);
                let b = (a + rng.random_range(1..c)) % c;
                vec![a, b]
            };
            KeyInfo {
                labels,
                counts: BTreeMap::new(),
            }
        })
        .collect();
    let mut second: Vec<usize> = (0..v).collect();
    second.shuffle(&mut rng);

    let mut train: Vec<(usize, u32)> = Vec::with_capacity(config.n_train);
    for (k, info) in keys.iter().enumerate() {
        for &l in &info.labels {
            train.push((k, l));
        }
    }
    while train.len() < config.n_train {
        let k = rng.random_range(0..k_train);
        let labels = &keys[k].labels;
        let l = labels[rng.random_range(0..labels.len())];
        train.push((k, l));
    }
    train.shuffle(&mut rng);
    for &(k, l) in &train {
        *keys[k].counts.entry(l).or_insert(0) += 1;
    }

    let mut roles: Vec<TestRole> = std::iter::repeat_n(TestRole::Exact, n_exact)
        .chain(std::iter::repeat_n(TestRole::Ambiguous, n_ambig))
        .chain(std::iter::repeat_n(TestRole::Unseen, n_unseen))
        .collect();
    roles.shuffle(&mut rng);
    let test: Vec<(usize, u32, TestRole)> = roles
        .into_iter()
        .map(|role| match role {
            TestRole::Exact => {
                let k = rng.random_range(0..n_unique_keys);
                (k, keys[k].labels[0], role)
            }
            TestRole::Ambiguous => {
                let k = rng.random_range(n_unique_keys..k_train);
                let labels = &keys[k].labels;
                (k, labels[rng.random_range(0..labels.len())], role)
            }
            TestRole::Unseen => (rng.random_range(k_train..v), rng.random_range(0..c), role),
        })
        .collect();

    let tokens_of = |k: usize| -> Vec<String> {
        match config.arity {
            Arity::OneSpan => vec![format!("w{k}")],
            Arity::TwoSpan => vec![format!("a{k}"), format!("b{}", second[k])],
        }
    };
    let token_ids = |k: usize| -> Vec<u64> {
        match config.arity {
            Arity::OneSpan => vec![k as u64],
            Arity::TwoSpan => vec![k as u64, (v + second[k]) as u64],
        }
    };
    let schema = TaskSchema::new("synth", config.arity, Labeling::SingleLabel, label_names(config.classes))?;
    let mut sentences = BTreeMap::new();
    let mut make = |id: u64, k: usize, label: u32| -> LabeledExample {
        sentences.insert(
            id,
            Sentence {
                id,
                tokens: tokens_of(k),
            },
        );
        LabeledExample {
            sentence_id: id,
            target: 0,
            span1: Span::new(0, 1),
            span2: (config.arity == Arity::TwoSpan).then_some(Span::new(1, 2)),
            gold: vec![schema.label(label).to_string()],
        }
    };
    let train_examples: Vec<LabeledExample> = train
        .iter()
        .enumerate()
        .map(|(i, &(k, l))| make(i as u64, k, l))
        .collect();
    let base = config.n_train as u64;
    let test_examples: Vec<LabeledExample> = test
        .iter()
        .enumerate()
        .map(|(i, &(k, l, _))| make(base + i as u64, k, l))
        .collect();
    let split = DatasetSplit {
        schema,
        sentences,
        train: train_examples,
        dev: Vec::new(),
        test: test_examples,
    };

    let mut archive = EmbeddingArchive::new(config.dim)?;
    let all = train.iter().map(|&(k, l)| (k, l)).chain(test.iter().map(|&(k, l, _)| (k, l)));
    for (id, (k, label)) in all.enumerate() {
        let mut values = Vec::with_capacity(config.dim * token_ids(k).len());
        for tok in token_ids(k) {
            let row = match config.embedding {
                EmbeddingMode::Noise => normal_vec(&mut seed::stream(config.seed, domain::SYNTH_EMBED, &[0, tok]), config.dim),
                EmbeddingMode::Informative => {
                    let mut r = normal_vec(
                        &mut seed::stream(config.seed, domain::SYNTH_EMBED, &[1, id as u64, tok]),
                        config.dim,
                    );
                    r[label as usize] += config.separation as f32;
                    r
                }
            };
            values.extend(row);
        }
        archive.push(id as u64, values)?;
    }

    let truth = ground_truth(&keys, &test, base);
    Ok(SynthCorpus { split, archive, truth })
}

fn ground_truth(keys: &[KeyInfo], test: &[(usize, u32, TestRole)], base: u64) -> GroundTruth {
    let n = test.len();
    let mut points = Vec::with_capacity(n);
    let (mut p_freq, mut p_unif) = (0.0f64, 0.0f64);
    for (i, &(k, gold, role)) in test.iter().enumerate() {
        let counts: Vec<(u32, u64)> = keys
            .get(k)
            .map(|info| info.counts.iter().map(|(&l, &c)| (l, c)).collect())
            .unwrap_or_default();
        let total: u64 = counts.iter().map(|c| c.1).sum();
        let mut best: Option<(u32, u64)> = None;
        for &(l, c) in &counts {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((l, c));
            }
        }
        let gold_count = counts.iter().find(|c| c.0 == gold).map_or(0, |c| c.1);
        let mem_exact = counts.len() == 1 && counts[0].0 == gold;
        let mem_freq = best.is_some_and(|(l, _)| l == gold);
        let mem_uniform = if counts.is_empty() {
            0.0
        } else {
            (gold_count > 0) as u32 as f64 / counts.len() as f64
        };
        if total > 0 {
            p_freq += gold_count as f64 / total as f64;
        }
        p_unif += mem_uniform;
        points.push(TruthPoint {
            sentence_id: base + i as u64,
            role,
            gold,
            train_labels: counts,
            mem_exact,
            mem_freq,
            mem_uniform,
        });
    }
    let exact = points.iter().filter(|p| p.mem_exact).count();
    let freq = points.iter().filter(|p| p.mem_freq).count();
    GroundTruth {
        n,
        mem_exact_correct: exact,
        mem_freq_correct: freq,
        mem_exact_accuracy: percent(exact, n),
        mem_freq_accuracy: percent(freq, n),
        mem_freq_expected: 100.0 * p_freq / n as f64,
        mem_uniform_expected: 100.0 * p_unif / n as f64,
        points,
    }
}
