//! Confusion matrix, accuracy and macro F1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class_id: usize,
    pub support: u64,
    pub predicted: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// False for classes with neither samples nor predictions; those are
    /// left out of the macro average.
    pub included: bool,
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if counts.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("confusion matrix must be square"));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let n = self.size();
        if truth >= n || predicted >= n {
            return Err(Error::invalid(format!("class index out of range for {n} classes")));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    /// Element-wise sum; merging partial matrices is order-independent.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.size() != self.size() {
            return Err(Error::invalid("cannot merge matrices of different size"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.size()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::invalid("accuracy of an empty confusion matrix"));
        }
        Ok(self.trace() as f64 / total as f64)
    }

    pub fn per_class(&self) -> Vec<ClassScore> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let tp = self.counts[i][i];
                let support: u64 = self.counts[i].iter().sum();
                let predicted: u64 = (0..n).map(|r| self.counts[r][i]).sum();
                let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassScore {
                    class_id: i,
                    support,
                    predicted,
                    precision,
                    recall,
                    f1,
                    included: support > 0 || predicted > 0,
                }
            })
            .collect()
    }

    /// Unweighted mean F1 over included classes. Classes that have samples
    /// or predictions but no true positives count as 0.
    pub fn macro_f1(&self) -> Result<f64> {
        let scores: Vec<f64> = self
            .per_class()
            .iter()
            .filter(|s| s.included)
            .map(|s| s.f1)
            .collect();
        if scores.is_empty() {
            return Err(Error::invalid("macro F1 of an empty confusion matrix"));
        }
        Ok(scores.iter().sum::<f64>() / scores.len() as f64)
    }
}
