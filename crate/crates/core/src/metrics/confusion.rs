use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::slicing::SliceKind;

/// Counts indexed by `[truth][predicted]` over eMBB, mMTC, URLLC.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 3]; 3]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn get(&self, truth: SliceKind, predicted: SliceKind) -> u64 {
        match (truth.class_index(), predicted.class_index()) {
            (Some(t), Some(p)) => self.counts[t][p],
            _ => 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.counts[truth].iter().sum()
    }

    pub fn column_sum(&self, predicted: usize) -> u64 {
        self.counts.iter().map(|row| row[predicted]).sum()
    }
}

/// Tallies `(truth, predicted)` pairs. Master is not a class and is rejected.
pub fn confusion(pairs: &[(SliceKind, SliceKind)]) -> Result<ConfusionMatrix, MetricsError> {
    let mut m = ConfusionMatrix::default();
    for &(truth, predicted) in pairs {
        let (Some(t), Some(p)) = (truth.class_index(), predicted.class_index()) else {
            return Err(MetricsError::MasterLabel);
        };
        m.counts[t][p] += 1;
    }
    Ok(m)
}
