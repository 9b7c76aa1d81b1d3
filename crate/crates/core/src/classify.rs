//! Nearest-class-mean recognition in the learned subspace.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg::{FeatureMatrix, NORM_EPS};

/// Normalised class means of projected labelled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMeans {
    /// `d × C`; columns of absent classes are zero.
    pub means: Array2<f64>,
    /// Samples contributing to each mean.
    pub support: Vec<usize>,
    /// Classes with no support, or whose samples cancel out, are never predicted.
    pub absent: Vec<bool>,
}

impl ClassMeans {
    pub fn num_classes(&self) -> usize {
        self.support.len()
    }

    pub fn present(&self) -> impl Iterator<Item = usize> + '_ {
        self.absent
            .iter()
            .enumerate()
            .filter(|(_, a)| !**a)
            .map(|(c, _)| c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: usize,
    /// Euclidean distance to the winning mean.
    pub distance: f64,
    /// `-distance`.
    pub confidence: f64,
    /// Runner-up distance minus winning distance; infinite with a single class.
    pub margin: f64,
}

/// Means over every projected sample of either domain, grouped by label.
///
/// With `strict` set a class without samples is an error; otherwise it is
/// marked absent. A class whose samples sum to (nearly) zero is always
/// marked absent.
pub fn compute_class_means(
    zs: &FeatureMatrix,
    source_labels: &[usize],
    zt: &FeatureMatrix,
    target_labels: &[usize],
    num_classes: usize,
    strict: bool,
) -> Result<ClassMeans> {
    if zs.rows() != zt.rows() {
        return Err(Error::DimensionMismatch(format!(
            "projected domains have {} and {} dimensions",
            zs.rows(),
            zt.rows()
        )));
    }
    if zs.cols() != source_labels.len() || zt.cols() != target_labels.len() {
        return Err(Error::DimensionMismatch(
            "labels do not match projected samples".into(),
        ));
    }
    crate::graphs::check_labels(source_labels, num_classes)?;
    crate::graphs::check_labels(target_labels, num_classes)?;

    let mut sums = Array2::<f64>::zeros((zs.rows(), num_classes));
    let mut support = vec![0usize; num_classes];
    for (z, labels) in [(zs, source_labels), (zt, target_labels)] {
        for (j, &l) in labels.iter().enumerate() {
            let mut col = sums.column_mut(l);
            col += &z.column(j);
            support[l] += 1;
        }
    }
    let mut absent = vec![false; num_classes];
    for c in 0..num_classes {
        if support[c] == 0 {
            if strict {
                return Err(Error::EmptyClass(c));
            }
            absent[c] = true;
            continue;
        }
        let mut col = sums.column_mut(c);
        let norm = col.dot(&col).sqrt();
        if norm < NORM_EPS * support[c] as f64 {
            col.fill(0.0);
            absent[c] = true;
        } else {
            col.mapv_inplace(|v| v / norm);
        }
    }
    Ok(ClassMeans {
        means: sums,
        support,
        absent,
    })
}

/// Closest present class mean; ties go to the lowest class index.
pub fn predict(means: &ClassMeans, z: ArrayView1<'_, f64>) -> Result<Prediction> {
    if z.len() != means.means.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} dimensions, means have {}",
            z.len(),
            means.means.nrows()
        )));
    }
    let mut best: Option<(usize, f64)> = None;
    let mut runner_up = f64::INFINITY;
    for c in means.present() {
        let dist = means
            .means
            .column(c)
            .iter()
            .zip(z.iter())
            .map(|(m, x)| (m - x) * (m - x))
            .sum::<f64>()
            .sqrt();
        match best {
            Some((_, d)) if dist >= d => runner_up = runner_up.min(dist),
            Some((_, d)) => {
                runner_up = d;
                best = Some((c, dist));
            }
            None => best = Some((c, dist)),
        }
    }
    let (label, distance) = best.ok_or(Error::NoClasses)?;
    Ok(Prediction {
        label,
        distance,
        confidence: -distance,
        margin: runner_up - distance,
    })
}

/// Predicts every column of `z`.
pub fn predict_all(means: &ClassMeans, z: &FeatureMatrix) -> Result<Vec<Prediction>> {
    z.view()
        .columns()
        .into_iter()
        .map(|col| predict(means, col))
        .collect()
}

fn by_confidence(a: &Prediction, b: &Prediction) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then_with(|| b.margin.total_cmp(&a.margin))
}

/// Indices ordered from most to least confident: smallest distance first,
/// then largest margin, then lowest index.
pub fn confidence_rank(predictions: &[Prediction]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    // stable sort keeps index order for full ties
    order.sort_by(|&a, &b| by_confidence(&predictions[a], &predictions[b]));
    order
}
