use crate::error::{Error, Result};
use crate::graphs::check_labels;
use crate::linalg::FeatureMatrix;

/// Feature matrix paired with one class label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn new(features: FeatureMatrix, labels: Vec<usize>) -> Result<Self> {
        if features.cols() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples but {} labels",
                features.cols(),
                labels.len()
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.rows()
    }

    pub fn select(&self, indices: &[usize]) -> LabeledSet {
        LabeledSet {
            features: self.features.select_columns(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn check_classes(&self, num_classes: usize) -> Result<()> {
        check_labels(&self.labels, num_classes)
    }

    /// Appends the samples of `other`, which must share the feature dimension.
    pub fn extend(&self, other: &LabeledSet) -> Result<LabeledSet> {
        let features = self.features.hstack(&other.features)?;
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(LabeledSet { features, labels })
    }
}

/// Ground-truth labels for an unlabelled pool.
///
/// The labels are private: fitting and pseudo-label selection only ever see
/// the features, and the truth can only be compared against finished
/// predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth(Vec<usize>);

impl GroundTruth {
    pub fn new(labels: Vec<usize>) -> Self {
        Self(labels)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Fraction of `predicted` that matches. An empty pool scores 1.
    pub fn accuracy(&self, predicted: &[usize]) -> Result<f64> {
        if predicted.len() != self.0.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictions for {} ground-truth labels",
                predicted.len(),
                self.0.len()
            )));
        }
        if self.0.is_empty() {
            return Ok(1.0);
        }
        let hits = self.0.iter().zip(predicted).filter(|(a, b)| a == b).count();
        Ok(hits as f64 / self.0.len() as f64)
    }

    /// Labels for reporting purposes only (exports and evaluation tables).
    pub fn reveal(&self) -> &[usize] {
        &self.0
    }
}
