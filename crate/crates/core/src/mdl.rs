//! Codelengths in bits: data codelength under a trained probe, the two-part
//! code with a `(p/2)·log₂ n` complexity term, and the prequential (online)
//! code over a block schedule.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embedstore::{PooledSet, Target};
use crate::error::{Error, Result};
use crate::probes::{self, ProbeConfig, ProbeModel};
use crate::scalar::Scalar;
use crate::seed::{self, domain};

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-log₂ max(p, floor)`.
pub fn bits(p: f64) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::NonFinite("probability".into()));
    }
    Ok(-p.max(PROB_FLOOR).log2())
}

/// Bits to encode `target` under a probability row: the gold class for
/// single-label targets, every per-class bit for multi-label targets.
pub fn target_bits(probs: &[f64], target: &Target) -> Result<f64> {
    match target {
        Target::Single(k) => bits(probs[*k as usize]),
        Target::Multi(ks) => probs.iter().enumerate().try_fold(0.0, |acc, (k, &p)| {
            let on = ks.contains(&(k as u32));
            Ok(acc + bits(if on { p } else { 1.0 - p })?)
        }),
    }
}

/// Bits per example under the uniform code.
pub fn uniform_bits(classes: usize, multi_label: bool) -> f64 {
    if multi_label {
        classes as f64
    } else {
        (classes as f64).log2()
    }
}

pub fn data_codelength<T: Scalar>(model: &ProbeModel<T>, set: &PooledSet) -> Result<f64> {
    let mut total = 0.0;
    for (i, target) in set.targets.iter().enumerate() {
        let probs: Vec<f64> = model
            .probs(&probes::to_scalar::<T>(set.row(i)))?
            .iter()
            .map(|p| p.to_f64_lossy())
            .collect();
        total += target_bits(&probs, target)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codelength {
    pub data_bits: f64,
    pub complexity_bits: f64,
    pub total_bits: f64,
    pub n: usize,
    pub p: usize,
    /// Residual constant of the complexity term, fixed at 0.
    pub c_k: f64,
}

impl Codelength {
    pub fn new(data_bits: f64, p: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("codelength of an empty dataset"));
        }
        let complexity_bits = complexity_bits(p, n);
        Ok(Codelength {
            data_bits,
            complexity_bits,
            total_bits: data_bits + complexity_bits,
            n,
            p,
            c_k: 0.0,
        })
    }
}

/// `(p/2)·log₂ n`.
pub fn complexity_bits(p: usize, n: usize) -> f64 {
    p as f64 / 2.0 * (n as f64).log2()
}

pub fn two_part_codelength<T: Scalar>(model: &ProbeModel<T>, set: &PooledSet) -> Result<Codelength> {
    Codelength::new(data_codelength(model, set)?, model.num_params(), set.len())
}

/// Cumulative fractions of the stream at which blocks end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrequentialSchedule {
    boundaries: Vec<f64>,
}

impl Default for PrequentialSchedule {
    fn default() -> Self {
        PrequentialSchedule {
            boundaries: vec![
                0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.0625, 0.125, 0.25, 0.5, 1.0,
            ],
        }
    }
}

impl PrequentialSchedule {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        let ok = !boundaries.is_empty()
            && boundaries.iter().all(|&b| b > 0.0 && b <= 1.0)
            && boundaries.windows(2).all(|w| w[0] < w[1])
            && *boundaries.last().unwrap() == 1.0;
        if !ok {
            return Err(Error::invalid(
                "schedule boundaries must increase strictly within (0, 1] and end at 1",
            ));
        }
        Ok(PrequentialSchedule { boundaries })
    }

    pub fn one_block() -> Self {
        PrequentialSchedule { boundaries: vec![1.0] }
    }

    /// Comma-separated fractions, e.g. `0.1,0.5,1`.
    pub fn parse(csv: &str) -> Result<Self> {
        let b = csv
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad schedule entry {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(b)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// End index of each block for a stream of `n` examples, `ceil(f·n)`.
    pub fn block_ends(&self, n: usize) -> Result<Vec<usize>> {
        let mut ends = Vec::with_capacity(self.boundaries.len());
        let mut prev = 0;
        for (i, &f) in self.boundaries.iter().enumerate() {
            let end = ((f * n as f64).ceil() as usize).min(n);
            if end <= prev {
                return Err(Error::invalid(format!(
                    "prequential block {i} is empty for a stream of {n} examples"
                )));
            }
            ends.push(end);
            prev = end;
        }
        Ok(ends)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBits {
    pub start: usize,
    pub end: usize,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrequentialReport {
    pub n: usize,
    pub classes: usize,
    pub total_bits: f64,
    /// Cost of the whole stream under the uniform code.
    pub uniform_bits: f64,
    pub blocks: Vec<BlockBits>,
}

/// The first block costs the uniform code; every later block is encoded by
/// a fresh probe (one replica) trained on all preceding examples. The stream
/// order is a seeded permutation of `stream`.
pub fn prequential_codelength<T: Scalar>(
    config: &ProbeConfig,
    stream: &PooledSet,
    schedule: &PrequentialSchedule,
    seed: u64,
) -> Result<PrequentialReport> {
    config.validate()?;
    let n = stream.len();
    if n == 0 {
        return Err(Error::invalid("prequential code of an empty stream"));
    }
    let ends = schedule.block_ends(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::stream(seed, domain::PREQUENTIAL_ORDER, &[]));
    let per_example = uniform_bits(config.classes, config.is_multi_label());
    let empty = PooledSet::empty(stream.dim);
    let mut blocks = Vec::with_capacity(ends.len());
    let mut start = 0;
    for (b, &end) in ends.iter().enumerate() {
        let bits = if b == 0 {
            end as f64 * per_example
        } else {
            let block_config = ProbeConfig {
                replicas: 1,
                seed: seed::mix(seed, domain::PREQUENTIAL_BLOCK, &[b as u64]),
                ..config.clone()
            };
            let seen = stream.subset(&order[..start]);
            let model = probes::train::<T>(&block_config, &seen, &empty)?;
            data_codelength(&model, &stream.subset(&order[start..end]))?
        };
        blocks.push(BlockBits { start, end, bits });
        start = end;
    }
    Ok(PrequentialReport {
        n,
        classes: config.classes,
        total_bits: blocks.iter().map(|b| b.bits).sum(),
        uniform_bits: n as f64 * per_example,
        blocks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderComparison {
    pub baseline_bits: f64,
    pub candidate_bits: f64,
    /// `baseline − candidate`: positive when the candidate is shorter.
    pub difference: f64,
    /// `candidate / baseline`.
    pub ratio: f64,
}

/// Compares two codes of the same dataset, each given as `(total bits, n)`.
pub fn compare_encoders(baseline: (f64, usize), candidate: (f64, usize)) -> Result<EncoderComparison> {
    if baseline.1 != candidate.1 {
        return Err(Error::invalid(format!(
            "codelengths cover different dataset sizes ({} vs {})",
            baseline.1, candidate.1
        )));
    }
    Ok(EncoderComparison {
        baseline_bits: baseline.0,
        candidate_bits: candidate.0,
        difference: baseline.0 - candidate.0,
        ratio: if baseline.0 == 0.0 {
            if candidate.0 == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            candidate.0 / baseline.0
        },
    })
}
