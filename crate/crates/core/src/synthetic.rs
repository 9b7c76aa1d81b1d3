//! Seeded heterogeneous two-domain data with a shared low-dimensional class
//! structure.
//!
//! Class `c` sits at angle `2πc/C` on the unit circle of a 2-D latent space.
//! Each domain observes latent points through its own random linear map
//! (`N(0, 1)` entries), with Gaussian jitter of scale `noise` added both in
//! the latent space and to the observed features.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{GroundTruth, LabeledSet};
use crate::linalg::FeatureMatrix;
use crate::pipeline::Task;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub source_dim: usize,
    pub target_dim: usize,
    pub noise: f64,
    pub source_per_class: usize,
    pub target_labeled_per_class: usize,
    pub target_unlabeled_per_class: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 3,
            source_dim: 20,
            target_dim: 12,
            noise: 0.05,
            source_per_class: 50,
            target_labeled_per_class: 3,
            target_unlabeled_per_class: 50,
            seed: 0,
        }
    }
}

/// A ready-made split: labelled source, labelled target and an unlabelled pool.
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    pub source: LabeledSet,
    pub target: LabeledSet,
    pub unlabeled: FeatureMatrix,
    pub truth: GroundTruth,
}

const LATENT_DIM: usize = 2;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

struct Domain {
    map: Array2<f64>,
}

impl Domain {
    fn new(dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            map: Array2::from_shape_fn((dim, LATENT_DIM), |_| gaussian(rng)),
        }
    }

    fn sample(&self, class: usize, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let angle = std::f64::consts::TAU * class as f64 / spec.classes as f64;
        let latent = [
            angle.cos() + spec.noise * gaussian(rng),
            angle.sin() + spec.noise * gaussian(rng),
        ];
        (0..self.map.nrows())
            .map(|i| {
                self.map[[i, 0]] * latent[0]
                    + self.map[[i, 1]] * latent[1]
                    + spec.noise * gaussian(rng)
            })
            .collect()
    }
}

fn draw(
    domain: &Domain,
    per_class: &[usize],
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (c, &n) in per_class.iter().enumerate() {
        for _ in 0..n {
            samples.push(domain.sample(c, spec, rng));
            labels.push(c);
        }
    }
    (samples, labels)
}

fn matrix(samples: &[Vec<f64>], dim: usize) -> FeatureMatrix {
    if samples.is_empty() {
        return FeatureMatrix::empty(dim).expect("dim >= 1");
    }
    FeatureMatrix::from_samples(samples).expect("generated samples are finite and rectangular")
}

/// Generates the labelled/unlabelled split directly.
pub fn generate(spec: &SyntheticSpec) -> SyntheticProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let source_domain = Domain::new(spec.source_dim, &mut rng);
    let target_domain = Domain::new(spec.target_dim, &mut rng);
    let c = spec.classes;
    let (xs, ys) = draw(
        &source_domain,
        &vec![spec.source_per_class; c],
        spec,
        &mut rng,
    );
    let (xt, yt) = draw(
        &target_domain,
        &vec![spec.target_labeled_per_class; c],
        spec,
        &mut rng,
    );
    let (xu, yu) = draw(
        &target_domain,
        &vec![spec.target_unlabeled_per_class; c],
        spec,
        &mut rng,
    );
    SyntheticProblem {
        source: LabeledSet::new(matrix(&xs, spec.source_dim), ys).expect("sizes agree"),
        target: LabeledSet::new(matrix(&xt, spec.target_dim), yt).expect("sizes agree"),
        unlabeled: matrix(&xu, spec.target_dim),
        truth: GroundTruth::new(yu),
    }
}

/// Generates full domains (target holds labelled plus unlabelled counts per
/// class) to be split later with [`crate::pipeline::generate_split`].
pub fn generate_task(spec: &SyntheticSpec, name: &str) -> Task {
    let problem = generate(spec);
    let truth = problem.truth.reveal().to_vec();
    let pool = LabeledSet::new(problem.unlabeled, truth).expect("sizes agree");
    Task {
        name: name.to_string(),
        source: problem.source,
        target: problem.target.extend(&pool).expect("same dimension"),
        num_classes: spec.classes,
    }
}
