//! Classification metrics, accuracy drops and encoder-pair classification.
//!
//! Conventions follow scikit-learn: a class whose precision or recall has a
//! zero denominator scores 0, macro averages run over the classes present in
//! gold or predictions, and weighted averages use gold support.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::embedstore::Target;
use crate::error::{Error, Result};
use crate::memaudit::HeuristicKind;

/// Counts for a batch of predictions. Shards combine with [`merge`].
///
/// [`merge`]: ConfusionAccumulator::merge
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfusionAccumulator {
    /// Row-major `gold × predicted` matrix.
    Single { classes: usize, matrix: Vec<u64> },
    Multi {
        classes: usize,
        tp: Vec<u64>,
        fp: Vec<u64>,
        fn_: Vec<u64>,
        tn: Vec<u64>,
        /// Examples whose predicted set equals the gold set.
        exact: u64,
        n: u64,
    },
}

impl ConfusionAccumulator {
    pub fn single(classes: usize) -> Self {
        ConfusionAccumulator::Single {
            classes,
            matrix: vec![0; classes * classes],
        }
    }

    pub fn multi(classes: usize) -> Self {
        ConfusionAccumulator::Multi {
            classes,
            tp: vec![0; classes],
            fp: vec![0; classes],
            fn_: vec![0; classes],
            tn: vec![0; classes],
            exact: 0,
            n: 0,
        }
    }

    pub fn from_matrix(classes: usize, matrix: Vec<u64>) -> Result<Self> {
        if matrix.len() != classes * classes {
            return Err(Error::invalid("confusion matrix is not square"));
        }
        Ok(ConfusionAccumulator::Single { classes, matrix })
    }

    pub fn classes(&self) -> usize {
        match self {
            ConfusionAccumulator::Single { classes, .. } | ConfusionAccumulator::Multi { classes, .. } => {
                *classes
            }
        }
    }

    pub fn add(&mut self, gold: &Target, pred: &Target) -> Result<()> {
        let c = self.classes();
        let in_range = |t: &Target| t.classes().iter().all(|&k| (k as usize) < c);
        if !in_range(gold) || !in_range(pred) {
            return Err(Error::invalid("class index outside the label vocabulary"));
        }
        match (self, gold, pred) {
            (ConfusionAccumulator::Single { matrix, .. }, Target::Single(g), Target::Single(p)) => {
                matrix[*g as usize * c + *p as usize] += 1;
            }
            (
                ConfusionAccumulator::Multi {
                    tp,
                    fp,
                    fn_,
                    tn,
                    exact,
                    n,
                    ..
                },
                Target::Multi(g),
                Target::Multi(p),
            ) => {
                for k in 0..c as u32 {
                    match (g.contains(&k), p.contains(&k)) {
                        (true, true) => tp[k as usize] += 1,
                        (false, true) => fp[k as usize] += 1,
                        (true, false) => fn_[k as usize] += 1,
                        (false, false) => tn[k as usize] += 1,
                    }
                }
                *exact += (g == p) as u64;
                *n += 1;
            }
            _ => return Err(Error::invalid("mixed single- and multi-label targets")),
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionAccumulator) -> Result<()> {
        if self.classes() != other.classes() {
            return Err(Error::invalid("cannot merge accumulators of different width"));
        }
        fn add(a: &mut [u64], b: &[u64]) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        match (self, other) {
            (ConfusionAccumulator::Single { matrix: a, .. }, ConfusionAccumulator::Single { matrix: b, .. }) => {
                add(a, b)
            }
            (
                ConfusionAccumulator::Multi {
                    tp,
                    fp,
                    fn_,
                    tn,
                    exact,
                    n,
                    ..
                },
                ConfusionAccumulator::Multi {
                    tp: tp2,
                    fp: fp2,
                    fn_: fn2,
                    tn: tn2,
                    exact: e2,
                    n: n2,
                    ..
                },
            ) => {
                add(tp, tp2);
                add(fp, fp2);
                add(fn_, fn2);
                add(tn, tn2);
                *exact += e2;
                *n += n2;
            }
            _ => return Err(Error::invalid("cannot merge single- and multi-label accumulators")),
        }
        Ok(())
    }

    /// Per-class `(tp, fp, fn)` counts.
    fn per_class(&self) -> Vec<(u64, u64, u64)> {
        match self {
            ConfusionAccumulator::Single { classes, matrix } => (0..*classes)
                .map(|k| {
                    let tp = matrix[k * classes + k];
                    let row: u64 = matrix[k * classes..(k + 1) * classes].iter().sum();
                    let col: u64 = (0..*classes).map(|g| matrix[g * classes + k]).sum();
                    (tp, col - tp, row - tp)
                })
                .collect(),
            ConfusionAccumulator::Multi { tp, fp, fn_, .. } => {
                (0..tp.len()).map(|k| (tp[k], fp[k], fn_[k])).collect()
            }
        }
    }

    pub fn report(&self) -> Result<MetricReport> {
        let per_class = self.per_class();
        let (n, correct) = match self {
            ConfusionAccumulator::Single { classes, matrix } => {
                (matrix.iter().sum::<u64>(), (0..*classes).map(|k| matrix[k * classes + k]).sum())
            }
            ConfusionAccumulator::Multi { exact, n, .. } => (*n, *exact),
        };
        if n == 0 {
            return Err(Error::EmptyTest);
        }
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let f1 = |p: f64, r: f64| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };

        let total_support: u64 = per_class.iter().map(|&(tp, _, fn_)| tp + fn_).sum();
        let mut macro_ = [0.0f64; 3];
        let mut weighted = [0.0f64; 3];
        let mut present = 0usize;
        let mut tp_sum = 0u64;
        for &(tp, fp, fn_) in &per_class {
            let p = ratio(tp, tp + fp);
            let r = ratio(tp, tp + fn_);
            let f = f1(p, r);
            let support = (tp + fn_) as f64;
            tp_sum += tp;
            weighted[0] += support * p;
            weighted[2] += support * f;
            if tp + fp + fn_ > 0 {
                present += 1;
                macro_[0] += p;
                macro_[1] += r;
                macro_[2] += f;
            }
        }
        let norm = |x: f64, d: f64| if d == 0.0 { 0.0 } else { 100.0 * x / d };
        let ts = total_support as f64;
        let pc = present as f64;
        // support · recall is exactly tp for every class
        let weighted_recall = norm(tp_sum as f64, ts);

        let (mcc, micro_f1) = match self {
            ConfusionAccumulator::Single { classes, matrix } => (multiclass_mcc(*classes, matrix), None),
            ConfusionAccumulator::Multi { tp, fp, fn_, tn, .. } => {
                let s = |v: &[u64]| v.iter().sum::<u64>();
                let (tp, fp, fn_, tn) = (s(tp), s(fp), s(fn_), s(tn));
                let micro = if tp == 0 {
                    0.0
                } else {
                    100.0 * 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
                };
                (binary_mcc(tp, fp, fn_, tn), Some(micro))
            }
        };
        Ok(MetricReport {
            n: n as usize,
            accuracy: 100.0 * correct as f64 / n as f64,
            weighted_precision: norm(weighted[0], ts),
            weighted_recall,
            weighted_f1: norm(weighted[2], ts),
            macro_precision: norm(macro_[0], pc),
            macro_recall: norm(macro_[1], pc),
            macro_f1: norm(macro_[2], pc),
            mcc,
            micro_f1,
        })
    }
}

/// Covariance-form Matthews correlation over a `C × C` confusion matrix;
/// 0 when either marginal is degenerate.
pub fn multiclass_mcc(classes: usize, matrix: &[u64]) -> f64 {
    let mut t = vec![0f64; classes];
    let mut p = vec![0f64; classes];
    let mut c = 0f64;
    let mut s = 0f64;
    for g in 0..classes {
        for k in 0..classes {
            let v = matrix[g * classes + k] as f64;
            t[g] += v;
            p[k] += v;
            s += v;
            if g == k {
                c += v;
            }
        }
    }
    let pt: f64 = p.iter().zip(&t).map(|(a, b)| a * b).sum();
    let pp: f64 = p.iter().map(|a| a * a).sum();
    let tt: f64 = t.iter().map(|a| a * a).sum();
    let denom = ((s * s - pp) * (s * s - tt)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (c * s - pt) / denom
    }
}

pub fn binary_mcc(tp: u64, fp: u64, fn_: u64, tn: u64) -> f64 {
    let (tp, fp, fn_, tn) = (tp as f64, fp as f64, fn_ as f64, tn as f64);
    let denom = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / denom
    }
}

/// Percentages in `[0, 100]`, MCC in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub mcc: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub micro_f1: Option<f64>,
}

pub fn compute_metrics(gold: &[Target], pred: &[Target], classes: usize, multi_label: bool) -> Result<MetricReport> {
    if gold.len() != pred.len() {
        return Err(Error::invalid(format!(
            "{} gold targets but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let mut acc = if multi_label {
        ConfusionAccumulator::multi(classes)
    } else {
        ConfusionAccumulator::single(classes)
    };
    for (g, p) in gold.iter().zip(pred) {
        acc.add(g, p)?;
    }
    acc.report()
}

/// Rounds to 2 decimals, halves away from zero.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

impl MetricReport {
    fn columns(&self) -> Vec<(&'static str, f64)> {
        let mut cols = vec![
            ("accuracy", self.accuracy),
            ("w_precision", self.weighted_precision),
            ("w_recall", self.weighted_recall),
            ("w_f1", self.weighted_f1),
            ("m_precision", self.macro_precision),
            ("m_recall", self.macro_recall),
            ("m_f1", self.macro_f1),
            ("mcc", self.mcc),
        ];
        if let Some(m) = self.micro_f1 {
            cols.push(("micro_f1", m));
        }
        cols
    }

    pub fn to_tsv(&self) -> String {
        let cols = self.columns();
        let head: Vec<&str> = std::iter::once("n").chain(cols.iter().map(|c| c.0)).collect();
        let vals: Vec<String> = std::iter::once(self.n.to_string())
            .chain(cols.iter().map(|c| format!("{:.2}", round2(c.1))))
            .collect();
        format!("{}\n{}\n", head.join("\t"), vals.join("\t"))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Metric | Value |\n|---|---|\n");
        writeln!(s, "| n | {} |", self.n).unwrap();
        for (name, v) in self.columns() {
            writeln!(s, "| {name} | {:.2} |", round2(v)).unwrap();
        }
        s
    }
}

/// Relative accuracy reduction in percent; negative when the filtered set
/// scores higher.
pub fn drop(acc_original: f64, acc_filtered: f64) -> Result<f64> {
    if acc_original == 0.0 || !acc_original.is_finite() || !acc_filtered.is_finite() {
        return Err(Error::invalid("drop needs a finite, non-zero original accuracy"));
    }
    Ok((acc_original - acc_filtered) * 100.0 / acc_original)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairClass {
    Higher,
    HigherSignificant,
    Lower,
    Equal,
}

impl PairClass {
    pub fn name(self) -> &'static str {
        match self {
            PairClass::Higher => "higher",
            PairClass::HigherSignificant => "higher-significant",
            PairClass::Lower => "lower",
            PairClass::Equal => "equal",
        }
    }
}

pub const SIGNIFICANCE_FACTOR: f64 = 2.0;

/// How the random encoder's drop compares to the pretrained one's.
/// "Significant" means the random drop exceeds `factor` times a positive
/// base drop.
pub fn classify_pair_with(base_drop: f64, random_drop: f64, factor: f64) -> PairClass {
    if random_drop > base_drop {
        if base_drop > 0.0 && random_drop > factor * base_drop {
            PairClass::HigherSignificant
        } else {
            PairClass::Higher
        }
    } else if random_drop < base_drop {
        PairClass::Lower
    } else {
        PairClass::Equal
    }
}

pub fn classify_pair(base_drop: f64, random_drop: f64) -> PairClass {
    classify_pair_with(base_drop, random_drop, SIGNIFICANCE_FACTOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropReport {
    pub acc_original: f64,
    pub acc_filtered: f64,
    pub drop: f64,
}

impl DropReport {
    pub fn new(acc_original: f64, acc_filtered: f64) -> Result<Self> {
        Ok(DropReport {
            acc_original,
            acc_filtered,
            drop: drop(acc_original, acc_filtered)?,
        })
    }
}

/// One row of a drop table: a dataset/probe and, per filter, the drop of the
/// pretrained encoder and optionally of its random counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRow {
    pub dataset: String,
    pub encoder: String,
    pub probe: String,
    pub cells: Vec<DropCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropCell {
    pub filter: HeuristicKind,
    pub base: f64,
    pub random: Option<f64>,
}

impl DropCell {
    /// Classification on the 2-decimal values shown in the table.
    pub fn class(&self) -> Option<PairClass> {
        self.random
            .filter(|r| r.is_finite() && self.base.is_finite())
            .map(|r| classify_pair(round2(self.base), round2(r)))
    }
}

fn fmt_drop(d: f64) -> String {
    if d.is_finite() {
        format!("{:.2}", round2(d))
    } else {
        "n/a".to_string()
    }
}

/// Markdown table with one column pair per filter. A random-encoder drop is
/// bold when it exceeds the pretrained drop and italic when below it.
pub fn drop_table_markdown(rows: &[DropRow]) -> String {
    let filters: Vec<HeuristicKind> = rows
        .first()
        .map(|r| r.cells.iter().map(|c| c.filter).collect())
        .unwrap_or_default();
    let mut s = String::from("| Dataset | Encoder | Probe |");
    for f in &filters {
        write!(s, " {} | {} (random) |", f.short(), f.short()).unwrap();
    }
    s.push_str("\n|---|---|---|");
    for _ in &filters {
        s.push_str("---|---|");
    }
    s.push('\n');
    for row in rows {
        write!(s, "| {} | {} | {} |", row.dataset, row.encoder, row.probe).unwrap();
        for cell in &row.cells {
            let random = match (cell.random, cell.class()) {
                (Some(r), Some(PairClass::Higher | PairClass::HigherSignificant)) => format!("**{:.2}**", round2(r)),
                (Some(r), Some(PairClass::Lower)) => format!("*{:.2}*", round2(r)),
                (Some(r), _) => fmt_drop(r),
                (None, _) => "-".to_string(),
            };
            write!(s, " {} | {} |", fmt_drop(cell.base), random).unwrap();
        }
        s.push('\n');
    }
    s
}
