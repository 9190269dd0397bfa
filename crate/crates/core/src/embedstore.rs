//! `EPEMB1` token-embedding archives and span pooling.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes  45 50 45 4D 42 31 00 00   ("EPEMB1\0\0")
//! dim        u32
//! count      u64      number of sentences
//! repeated count times:
//!   id       u64
//!   n_tokens u32
//!   values   n_tokens * dim f32, row-major
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::{DatasetSplit, LabeledExample, Span};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"EPEMB1\0\0";

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    id: u64,
    n_tokens: usize,
    values: Vec<f32>,
}

/// Read-only map from sentence id to an `n_tokens × dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingArchive {
    dim: usize,
    entries: Vec<Entry>,
    lookup: HashMap<u64, usize>,
}

impl EmbeddingArchive {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > u32::MAX as usize {
            return Err(Error::invalid(format!("embedding width {dim} out of range")));
        }
        Ok(EmbeddingArchive {
            dim,
            entries: Vec::new(),
            lookup: HashMap::new(),
        })
    }

    /// Appends one sentence matrix given row-major values.
    pub fn push(&mut self, id: u64, values: Vec<f32>) -> Result<()> {
        if values.is_empty() || !values.len().is_multiple_of(self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: values.len(),
            });
        }
        if self.lookup.contains_key(&id) {
            return Err(Error::DuplicateSentence(id));
        }
        self.lookup.insert(id, self.entries.len());
        self.entries.push(Entry {
            id,
            n_tokens: values.len() / self.dim,
            values,
        });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|e| e.id)
    }

    pub fn n_tokens(&self, id: u64) -> Option<usize> {
        self.lookup.get(&id).map(|&i| self.entries[i].n_tokens)
    }

    /// The sentence's matrix as row-major values.
    pub fn matrix(&self, id: u64) -> Option<&[f32]> {
        self.lookup.get(&id).map(|&i| self.entries[i].values.as_slice())
    }

    pub fn row(&self, id: u64, token: usize) -> Option<&[f32]> {
        let m = self.matrix(id)?;
        m.get(token * self.dim..(token + 1) * self.dim)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let floats: usize = self.entries.iter().map(|e| e.values.len()).sum();
        let mut out = Vec::with_capacity(20 + self.entries.len() * 12 + floats * 4);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&e.id.to_le_bytes());
            out.extend_from_slice(&(e.n_tokens as u32).to_le_bytes());
            for v in &e.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::BadMagic { expected: "EPEMB1" });
        }
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(Error::Format("EPEMB1 header declares width 0".into()));
        }
        let count = r.u64()?;
        let mut archive = EmbeddingArchive::new(dim)?;
        for _ in 0..count {
            let id = r.u64()?;
            let n_tokens = r.u32()? as usize;
            if n_tokens == 0 {
                return Err(Error::Format(format!(
                    "sentence {id} at offset {} has no tokens",
                    r.pos - 12
                )));
            }
            let raw = r.take(n_tokens * dim * 4)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            archive.push(id, values)?;
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after the last record at offset {}",
                bytes.len() - r.pos,
                r.pos
            )));
        }
        Ok(archive)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Checks that every sentence of the dataset is present with the right
    /// token count, and that all values are finite.
    pub fn validate_against(&self, split: &DatasetSplit) -> Result<()> {
        for s in split.sentences.values() {
            let n = self.n_tokens(s.id).ok_or(Error::DanglingSentence(s.id))?;
            if n != s.tokens.len() {
                return Err(Error::TokenCountMismatch {
                    sentence: s.id,
                    archive: n,
                    corpus: s.tokens.len(),
                });
            }
        }
        self.check_finite()
    }

    pub fn check_finite(&self) -> Result<()> {
        for e in &self.entries {
            if let Some(i) = e.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "sentence {} token {} holds a non-finite value",
                    e.id,
                    i / self.dim
                )));
            }
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                offset: self.pos,
                needed: n,
                len: self.bytes.len(),
            }),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn span_mean(archive: &EmbeddingArchive, m: &[f32], span: Span, acc: &mut [f64]) -> Result<()> {
    let n = m.len() / archive.dim;
    if !span.fits(n) {
        return Err(Error::SpanOverflow {
            line: 0,
            start: span.start,
            end: span.end,
            len: n,
        });
    }
    let mut sum = vec![0.0f64; archive.dim];
    for row in m[span.start * archive.dim..span.end * archive.dim].chunks_exact(archive.dim) {
        for (s, &v) in sum.iter_mut().zip(row) {
            *s += v as f64;
        }
    }
    let len = span.len() as f64;
    for (a, s) in acc.iter_mut().zip(sum) {
        *a += s / len;
    }
    Ok(())
}

/// Mean of the token rows in `span1`; with `span2`, the mean of the two span
/// means (each span weighted equally). Accumulates in `f64`.
pub fn pool(archive: &EmbeddingArchive, sentence_id: u64, span1: Span, span2: Option<Span>) -> Result<Vec<f32>> {
    let m = archive
        .matrix(sentence_id)
        .ok_or(Error::DanglingSentence(sentence_id))?;
    let mut acc = vec![0.0f64; archive.dim];
    span_mean(archive, m, span1, &mut acc)?;
    let parts = match span2 {
        Some(s2) => {
            span_mean(archive, m, s2, &mut acc)?;
            2.0
        }
        None => 1.0,
    };
    Ok(acc.into_iter().map(|v| (v / parts) as f32).collect())
}

/// Gold targets of a pooled example in schema class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Single(u32),
    Multi(Vec<u32>),
}

impl Target {
    pub fn classes(&self) -> &[u32] {
        match self {
            Target::Single(c) => std::slice::from_ref(c),
            Target::Multi(cs) => cs,
        }
    }
}

/// Probe inputs: one pooled vector per example, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSet {
    pub dim: usize,
    pub vectors: Vec<f32>,
    pub targets: Vec<Target>,
}

impl PooledSet {
    pub fn empty(dim: usize) -> Self {
        PooledSet {
            dim,
            vectors: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, vector: &[f32], target: Target) {
        assert_eq!(vector.len(), self.dim);
        self.vectors.extend_from_slice(vector);
        self.targets.push(target);
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, idx: &[usize]) -> PooledSet {
        let mut out = PooledSet::empty(self.dim);
        for &i in idx {
            out.push(self.row(i), self.targets[i].clone());
        }
        out
    }

    /// Pooled vectors as an archive with one single-row "sentence" per
    /// example, ids being example ordinals.
    pub fn to_archive(&self) -> Result<EmbeddingArchive> {
        let mut a = EmbeddingArchive::new(self.dim)?;
        for i in 0..self.len() {
            a.push(i as u64, self.row(i).to_vec())?;
        }
        Ok(a)
    }
}

/// Pools every example and attaches its schema-ordered gold classes.
pub fn pool_examples<'a>(
    archive: &EmbeddingArchive,
    split: &DatasetSplit,
    examples: impl IntoIterator<Item = &'a LabeledExample>,
) -> Result<PooledSet> {
    let mut out = PooledSet::empty(archive.dim());
    let multi = split.schema.is_multi_label();
    for ex in examples {
        let v = pool(archive, ex.sentence_id, ex.span1, ex.span2)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "pooled vector of sentence {} target {}",
                ex.sentence_id, ex.target
            )));
        }
        let classes = split.schema.classes_of(&ex.gold)?;
        let target = if multi {
            Target::Multi(classes)
        } else {
            Target::Single(classes[0])
        };
        out.push(&v, target);
    }
    Ok(out)
}
