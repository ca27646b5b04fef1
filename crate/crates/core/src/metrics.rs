//! Confusion matrix and per-class scores.
//!
//! Rows of the matrix are predicted classes and columns are true classes.
//! `precision` and `recall` follow the formulas
//! `p_k = chi[k][k] / sum_m chi[m][k]` (column sum) and
//! `R_k = chi[k][k] / sum_m chi[k][m]` (row sum). Under the rows-predicted
//! layout this `p_k` is what most libraries call recall and vice versa; the
//! names here are attached to the formulas, not to the convention.
//!
//! A score whose denominator vanishes is `None` and is written as `NaN`
//! in reports, with the affected class listed in an `undefined` column.

use std::fmt::Write as _;

use serde::Serialize;

use crate::dataset::NUM_CLASSES;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionMatrix {
    /// `chi[predicted][true]`
    pub chi: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_predictions(predicted: &[u8], truth: &[u8]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::domain(format!(
                "{} predictions for {} labels",
                predicted.len(),
                truth.len()
            )));
        }
        let mut chi = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for (&p, &t) in predicted.iter().zip(truth) {
            if p as usize >= NUM_CLASSES || t as usize >= NUM_CLASSES {
                return Err(Error::domain("class index out of range"));
            }
            chi[p as usize][t as usize] += 1;
        }
        Ok(Self { chi })
    }

    pub fn total(&self) -> u64 {
        self.chi.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|k| self.chi[k][k]).sum()
    }

    fn row_sum(&self, k: usize) -> u64 {
        self.chi[k].iter().sum()
    }

    fn col_sum(&self, k: usize) -> u64 {
        self.chi.iter().map(|r| r[k]).sum()
    }

    /// Trace over total, in percent.
    pub fn accuracy(&self) -> Result<f64> {
        let n = self.total();
        if n == 0 {
            return Err(Error::domain("accuracy of an empty confusion matrix"));
        }
        Ok(self.trace() as f64 / n as f64 * 100.0)
    }

    /// `(p_k, R_k)` as fractions.
    pub fn precision_recall(&self, k: usize) -> (Option<f64>, Option<f64>) {
        let d = self.chi[k][k] as f64;
        let ratio = |den: u64| (den > 0).then(|| d / den as f64);
        (ratio(self.col_sum(k)), ratio(self.row_sum(k)))
    }

    /// Harmonic mean of `p_k` and `R_k`, in percent.
    pub fn f_score(&self, k: usize) -> Option<f64> {
        let (p, r) = self.precision_recall(k);
        let (p, r) = (p?, r?);
        (p + r > 0.0).then(|| 2.0 * p * r / (p + r) * 100.0)
    }

    /// One-vs-rest Matthews correlation for class `k`, in percent.
    pub fn mcc(&self, k: usize) -> Option<f64> {
        let tp = self.chi[k][k] as f64;
        let fp = (self.col_sum(k) - self.chi[k][k]) as f64;
        let fn_ = (self.row_sum(k) - self.chi[k][k]) as f64;
        let tn = (self.total() + self.chi[k][k] - self.row_sum(k) - self.col_sum(k)) as f64;
        let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        (den > 0.0).then(|| (tp * tn - fp * fn_) / den.sqrt() * 100.0)
    }

    pub fn class_metrics(&self) -> [ClassMetrics; NUM_CLASSES] {
        std::array::from_fn(|k| {
            let (precision, recall) = self.precision_recall(k);
            ClassMetrics {
                class: k as u8,
                precision,
                recall,
                f_score: self.f_score(k),
                mcc: self.mcc(k),
            }
        })
    }

    /// Plain-text rendering with predicted classes down the side and true classes across.
    pub fn render(&self) -> String {
        let width = self
            .chi
            .iter()
            .flatten()
            .map(|v| v.to_string().len())
            .max()
            .unwrap_or(1)
            .max(5);
        let mut s = String::new();
        let _ = write!(s, "{:>9} |", "pred\\true");
        for t in 0..NUM_CLASSES {
            let _ = write!(s, " {:>width$}", t);
        }
        s.push('\n');
        s.push_str(&"-".repeat(11 + NUM_CLASSES * (width + 1)));
        s.push('\n');
        for (p, row) in self.chi.iter().enumerate() {
            let _ = write!(s, "{p:>9} |");
            for v in row {
                let _ = write!(s, " {v:>width$}");
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: u8,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_score: Option<f64>,
    pub mcc: Option<f64>,
}

impl ClassMetrics {
    fn undefined(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, v) in [
            ("precision", self.precision),
            ("recall", self.recall),
            ("f_score", self.f_score),
            ("mcc", self.mcc),
        ] {
            if v.is_none() {
                out.push(name);
            }
        }
        out
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "NaN".to_string(),
    }
}

/// One row of the accuracy/hyperparameter summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub mapping: String,
    pub k: usize,
    pub weighting: String,
    pub metric: String,
    pub cv_accuracy: f64,
    pub validation_accuracy: f64,
}

pub const ACCURACY_HEADER: &str = "mapping,k,weighting,metric,cv_accuracy,validation_accuracy";
pub const CLASS_HEADER: &str = "mapping,class,precision,recall,f_score,mcc,undefined";

pub fn accuracy_table_csv(rows: &[AccuracyRow]) -> String {
    let mut s = String::from(ACCURACY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.4},{:.4}",
            r.mapping, r.k, r.weighting, r.metric, r.cv_accuracy, r.validation_accuracy
        );
    }
    s
}

/// Per-class scores for each `(mapping, matrix)` pair.
pub fn class_table_csv(entries: &[(String, ConfusionMatrix)]) -> String {
    let mut s = String::from(CLASS_HEADER);
    s.push('\n');
    for (mapping, cm) in entries {
        for m in cm.class_metrics() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                mapping,
                m.class,
                fmt_opt(m.precision),
                fmt_opt(m.recall),
                fmt_opt(m.f_score),
                fmt_opt(m.mcc),
                m.undefined().join(";")
            );
        }
    }
    s
}
