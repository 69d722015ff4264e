use std::fmt;

use serde::Serialize;

use super::{ConfusionMatrix, MetricsError};
use crate::slicing::SliceKind;

/// Per-class scores, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub slice: SliceKind,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub support: u64,
}

/// Headline figures are macro averages; all values are percentages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub total: u64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f_score: f64,
    /// Micro precision = recall = F for single-label data; equal to accuracy.
    pub micro_f_score: f64,
    pub per_class: [ClassMetrics; 3],
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64, what: &str, slice: SliceKind) -> f64 {
    if den == 0 {
        log::warn!("{what} of {slice} has a zero denominator; reporting 0");
        0.0
    } else {
        num as f64 * 100.0 / den as f64
    }
}

pub fn metrics(m: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    let total = m.total();
    if total == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let per_class = SliceKind::CLASSES.map(|slice| {
        let i = slice.class_index().expect("class");
        let tp = m.counts[i][i];
        let precision = ratio(tp, m.column_sum(i), "precision", slice);
        let recall = ratio(tp, m.row_sum(i), "recall", slice);
        let f_score = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            slice,
            precision,
            recall,
            f_score,
            support: m.row_sum(i),
        }
    });
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / 3.0;
    let accuracy = m.trace() as f64 * 100.0 / total as f64;
    Ok(MetricsReport {
        total,
        accuracy,
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f_score: mean(|c| c.f_score),
        micro_f_score: accuracy,
        per_class,
        confusion: *m,
    })
}

impl MetricsReport {
    /// Human-readable table; `micro` adds the micro-averaged line.
    pub fn render(&self, micro: bool) -> String {
        let mut out = String::new();
        out.push_str(&format!("pairs        {}\n", self.total));
        out.push_str(&format!("accuracy     {:.2}\n", self.accuracy));
        out.push_str(&format!("recall       {:.2}\n", self.macro_recall));
        out.push_str(&format!("precision    {:.2}\n", self.macro_precision));
        out.push_str(&format!("f-score      {:.2}\n", self.macro_f_score));
        if micro {
            out.push_str(&format!("micro f      {:.2}\n", self.micro_f_score));
        }
        out.push_str("\nclass   precision  recall  f-score  support\n");
        for c in &self.per_class {
            out.push_str(&format!(
                "{:<7} {:>9.2} {:>7.2} {:>8.2} {:>8}\n",
                c.slice.as_str(),
                c.precision,
                c.recall,
                c.f_score,
                c.support
            ));
        }
        out.push_str("\ntruth\\pred    embb    mmtc   urllc\n");
        for (i, slice) in SliceKind::CLASSES.iter().enumerate() {
            let row = self.confusion.counts[i];
            out.push_str(&format!(
                "{:<10} {:>7} {:>7} {:>7}\n",
                slice.as_str(),
                row[0],
                row[1],
                row[2]
            ));
        }
        out
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(false))
    }
}
