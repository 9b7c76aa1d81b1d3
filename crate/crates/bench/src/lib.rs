//! Fixtures shared by the benchmarks.

use cdspp::synthetic::{generate, SyntheticProblem, SyntheticSpec};

/// A synthetic problem with `per_class` source and unlabelled target samples per class.
pub fn problem(
    classes: usize,
    per_class: usize,
    source_dim: usize,
    target_dim: usize,
) -> SyntheticProblem {
    generate(&SyntheticSpec {
        classes,
        source_dim,
        target_dim,
        source_per_class: per_class,
        target_unlabeled_per_class: per_class,
        seed: 7,
        ..Default::default()
    })
}
