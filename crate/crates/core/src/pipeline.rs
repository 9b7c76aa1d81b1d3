//! End-to-end runs: supervised fitting, iterative selective pseudo-labelling,
//! seeded experiment splits and multi-trial benchmark tables.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{compute_class_means, confidence_rank, predict_all, ClassMeans, Prediction};
use crate::data::{GroundTruth, LabeledSet};
use crate::error::{Error, Result};
use crate::linalg::{pca_fit, pca_transform, FeatureMatrix};
use crate::model::{fit, CdsppConfig, ProjectionPair, Selection};

pub const REPORT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Supervised,
    #[default]
    SemiSupervised,
}

/// One pseudo-labelled sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoLabel {
    /// Index into the unlabelled pool.
    pub index: usize,
    pub label: usize,
    pub confidence: f64,
}

/// The samples admitted as labelled targets at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelBatch {
    pub iteration: usize,
    pub target_count: usize,
    /// Ordered from most to least confident.
    pub selected: Vec<PseudoLabel>,
}

/// Number of pseudo-labels admitted at iteration `k` of `total`: `⌊k·n/total⌋`.
pub fn schedule_count(k: usize, pool: usize, total: usize) -> usize {
    (k * pool / total).min(pool)
}

/// Picks the most confident predictions for iteration `k` of `total`.
///
/// [`Selection::Global`] takes the top `⌊k·n_u/T⌋` over the whole pool.
/// [`Selection::ClassBalanced`] applies the same fraction within each
/// predicted class, so its total can fall short of the global count.
pub fn select_pseudo_labels(
    predictions: &[Prediction],
    k: usize,
    total: usize,
    selection: Selection,
) -> PseudoLabelBatch {
    let order = confidence_rank(predictions);
    let pick = |i: usize| PseudoLabel {
        index: i,
        label: predictions[i].label,
        confidence: predictions[i].confidence,
    };
    let selected: Vec<PseudoLabel> = match selection {
        Selection::Global => {
            let n = schedule_count(k, predictions.len(), total);
            order.iter().take(n).map(|&i| pick(i)).collect()
        }
        Selection::ClassBalanced => {
            let classes = predictions.iter().map(|p| p.label + 1).max().unwrap_or(0);
            let mut per_class = vec![0usize; classes];
            predictions.iter().for_each(|p| per_class[p.label] += 1);
            let quota: Vec<usize> = per_class
                .iter()
                .map(|&m| schedule_count(k, m, total))
                .collect();
            let mut taken = vec![0usize; classes];
            order
                .iter()
                .filter(|&&i| {
                    let l = predictions[i].label;
                    let keep = taken[l] < quota[l];
                    taken[l] += usize::from(keep);
                    keep
                })
                .map(|&i| pick(i))
                .collect()
        }
    };
    PseudoLabelBatch {
        iteration: k,
        target_count: selected.len(),
        selected,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub dim_requested: Option<usize>,
    pub dim_effective: usize,
    pub alpha: f64,
    pub iterations: usize,
    pub selection: Selection,
    pub strict_classes: bool,
    pub pca_components: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub source: usize,
    pub target: usize,
    pub unlabeled: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Everything a run produces apart from the model itself.
///
/// Timings are the only non-deterministic fields and are kept last so that
/// serialised reports can be compared byte for byte up to the timing table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    /// Eigenvalues of the final model.
    pub eigenvalues: Vec<f64>,
    /// Accuracy of the labelled-data-only model on the unlabelled pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_accuracy: Option<f64>,
    /// Accuracy after each pseudo-labelling refit.
    pub iteration_accuracy: Vec<f64>,
    /// Pseudo-labels admitted at each iteration.
    pub selected_counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_accuracy: Option<f64>,
    pub predictions: Vec<usize>,
    pub warnings: Vec<String>,
    pub config: ConfigEcho,
    pub samples: SampleCounts,
    pub timings: Vec<StageTiming>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub projection: ProjectionPair,
    pub means: ClassMeans,
    /// Final predictions for the unlabelled pool.
    pub predictions: Vec<Prediction>,
    /// The pseudo-labels used for the final refit, if any.
    pub last_batch: Option<PseudoLabelBatch>,
    pub report: RunReport,
}

struct Stopwatch(Vec<StageTiming>);

impl Stopwatch {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push(StageTiming {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

fn class_count(source: &LabeledSet, target: &LabeledSet) -> usize {
    source
        .labels
        .iter()
        .chain(&target.labels)
        .max()
        .map_or(0, |m| m + 1)
}

struct Model {
    projection: ProjectionPair,
    means: ClassMeans,
}

fn train(
    source: &LabeledSet,
    target: &LabeledSet,
    classes: usize,
    config: &CdsppConfig,
) -> Result<Model> {
    let projection = fit(
        &source.features,
        &target.features,
        &source.labels,
        &target.labels,
        config,
    )?;
    let zs = projection.project_source(&source.features)?;
    let zt = projection.project_target(&target.features)?;
    let means = compute_class_means(
        &zs,
        &source.labels,
        &zt,
        &target.labels,
        classes,
        config.strict_classes,
    )?;
    Ok(Model { projection, means })
}

fn classify_pool(model: &Model, pool: &FeatureMatrix) -> Result<Vec<Prediction>> {
    if pool.cols() == 0 {
        return Ok(Vec::new());
    }
    let z = model.projection.project_target(pool)?;
    predict_all(&model.means, &z)
}

fn labels_of(predictions: &[Prediction]) -> Vec<usize> {
    predictions.iter().map(|p| p.label).collect()
}

fn check_inputs(
    source: &LabeledSet,
    target: &LabeledSet,
    unlabeled: &FeatureMatrix,
    truth: Option<&GroundTruth>,
    config: &CdsppConfig,
) -> Result<()> {
    config.validate()?;
    if source.is_empty() {
        return Err(Error::EmptyDomain("source"));
    }
    if target.is_empty() {
        return Err(Error::EmptyDomain("target"));
    }
    if unlabeled.rows() != target.dim() {
        return Err(Error::DimensionMismatch(format!(
            "unlabelled samples have {} features, labelled targets {}",
            unlabeled.rows(),
            target.dim()
        )));
    }
    if let Some(t) = truth {
        if t.len() != unlabeled.cols() {
            return Err(Error::DimensionMismatch(format!(
                "{} ground-truth labels for {} unlabelled samples",
                t.len(),
                unlabeled.cols()
            )));
        }
    }
    Ok(())
}

fn base_report(
    mode: Mode,
    config: &CdsppConfig,
    counts: SampleCounts,
    projection: &ProjectionPair,
) -> RunReport {
    let mut warnings = Vec::new();
    if projection.is_truncated() {
        warnings.push(format!(
            "subspace truncated from {} to {} directions",
            projection.requested_dim,
            projection.dim()
        ));
    }
    RunReport {
        version: REPORT_VERSION.to_string(),
        mode,
        seed: None,
        task: None,
        eigenvalues: projection.eigenvalues.clone(),
        initial_accuracy: None,
        iteration_accuracy: Vec::new(),
        selected_counts: Vec::new(),
        final_accuracy: None,
        predictions: Vec::new(),
        warnings,
        config: ConfigEcho {
            dim_requested: config.dim,
            dim_effective: projection.dim(),
            alpha: config.alpha,
            iterations: config.iterations,
            selection: config.selection,
            strict_classes: config.strict_classes,
            pca_components: None,
        },
        samples: counts,
        timings: Vec::new(),
    }
}

fn absent_warnings(means: &ClassMeans, report: &mut RunReport) {
    for (c, absent) in means.absent.iter().enumerate() {
        if *absent {
            report.warnings.push(format!(
                "class {c} has no usable support and is never predicted"
            ));
        }
    }
}

/// Fits on the labelled data and classifies the unlabelled pool.
pub fn run_supervised(
    source: &LabeledSet,
    target: &LabeledSet,
    unlabeled: &FeatureMatrix,
    truth: Option<&GroundTruth>,
    config: &CdsppConfig,
) -> Result<RunOutcome> {
    check_inputs(source, target, unlabeled, truth, config)?;
    let classes = class_count(source, target);
    let mut clock = Stopwatch(Vec::new());
    let model = clock.time("fit", || train(source, target, classes, config))?;
    let predictions = clock.time("classify", || classify_pool(&model, unlabeled))?;

    let counts = SampleCounts {
        source: source.len(),
        target: target.len(),
        unlabeled: unlabeled.cols(),
        classes,
    };
    let mut report = base_report(Mode::Supervised, config, counts, &model.projection);
    absent_warnings(&model.means, &mut report);
    report.predictions = labels_of(&predictions);
    if let Some(t) = truth {
        let acc = t.accuracy(&report.predictions)?;
        report.initial_accuracy = Some(acc);
        report.final_accuracy = Some(acc);
    }
    report.timings = clock.0;
    Ok(RunOutcome {
        projection: model.projection,
        means: model.means,
        predictions,
        last_batch: None,
        report,
    })
}

/// Iterative selective pseudo-labelling.
///
/// Starts from the labelled-only model. At iteration `k = 1..=T` every
/// unlabelled sample is labelled by the current model, the `⌊k·n_u/T⌋` most
/// confident are added to the labelled targets, and the model is refitted
/// from scratch. Class means always come from the current training set. With
/// an empty pool this is exactly [`run_supervised`].
pub fn run_semi_supervised(
    source: &LabeledSet,
    target: &LabeledSet,
    unlabeled: &FeatureMatrix,
    truth: Option<&GroundTruth>,
    config: &CdsppConfig,
) -> Result<RunOutcome> {
    check_inputs(source, target, unlabeled, truth, config)?;
    if unlabeled.cols() == 0 {
        let mut out = run_supervised(source, target, unlabeled, truth, config)?;
        out.report.mode = Mode::SemiSupervised;
        return Ok(out);
    }
    let classes = class_count(source, target);
    let mut clock = Stopwatch(Vec::new());
    let mut model = clock.time("fit-initial", || train(source, target, classes, config))?;
    let mut predictions = clock.time("classify-initial", || classify_pool(&model, unlabeled))?;

    let initial_accuracy = match truth {
        Some(t) => Some(t.accuracy(&labels_of(&predictions))?),
        None => None,
    };
    let mut iteration_accuracy = Vec::new();
    let mut selected_counts = Vec::new();
    let mut last_batch = None;
    for k in 1..=config.iterations {
        let batch = select_pseudo_labels(&predictions, k, config.iterations, config.selection);
        let indices: Vec<usize> = batch.selected.iter().map(|p| p.index).collect();
        let pseudo = LabeledSet {
            features: unlabeled.select_columns(&indices),
            labels: batch.selected.iter().map(|p| p.label).collect(),
        };
        let augmented = target.extend(&pseudo)?;
        model = clock.time(&format!("fit-{k}"), || {
            train(source, &augmented, classes, config)
        })?;
        predictions = clock.time(&format!("classify-{k}"), || {
            classify_pool(&model, unlabeled)
        })?;
        if let Some(t) = truth {
            iteration_accuracy.push(t.accuracy(&labels_of(&predictions))?);
        }
        selected_counts.push(batch.selected.len());
        last_batch = Some(batch);
    }

    let counts = SampleCounts {
        source: source.len(),
        target: target.len(),
        unlabeled: unlabeled.cols(),
        classes,
    };
    let mut report = base_report(Mode::SemiSupervised, config, counts, &model.projection);
    absent_warnings(&model.means, &mut report);
    report.predictions = labels_of(&predictions);
    report.initial_accuracy = initial_accuracy;
    report.final_accuracy = iteration_accuracy.last().copied();
    report.iteration_accuracy = iteration_accuracy;
    report.selected_counts = selected_counts;
    report.timings = clock.0;
    Ok(RunOutcome {
        projection: model.projection,
        means: model.means,
        predictions,
        last_batch,
        report,
    })
}

/// A per-class sample count, or every remaining sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CountRepr", into = "CountRepr")]
pub enum SampleCount {
    Count(usize),
    All,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CountRepr {
    Number(usize),
    Word(String),
}

impl TryFrom<CountRepr> for SampleCount {
    type Error = String;

    fn try_from(r: CountRepr) -> std::result::Result<Self, String> {
        match r {
            CountRepr::Number(n) => Ok(SampleCount::Count(n)),
            CountRepr::Word(w) if w.eq_ignore_ascii_case("all") => Ok(SampleCount::All),
            CountRepr::Word(w) => Err(format!("expected a count or \"all\", got {w:?}")),
        }
    }
}

impl From<SampleCount> for CountRepr {
    fn from(c: SampleCount) -> Self {
        match c {
            SampleCount::Count(n) => CountRepr::Number(n),
            SampleCount::All => CountRepr::Word("all".into()),
        }
    }
}

impl std::str::FromStr for SampleCount {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(SampleCount::All);
        }
        s.parse()
            .map(SampleCount::Count)
            .map_err(|_| format!("expected a count or \"all\", got {s:?}"))
    }
}

/// How many samples of each class go into each part of a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub source_per_class: SampleCount,
    pub target_labeled_per_class: usize,
    pub target_unlabeled_per_class: SampleCount,
}

/// Indices into the full source and target sample sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub source: Vec<usize>,
    pub target_labeled: Vec<usize>,
    pub target_unlabeled: Vec<usize>,
}

fn by_class(labels: &[usize], classes: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    groups
}

fn take(pool: &[usize], count: SampleCount, class: usize) -> Result<usize> {
    match count {
        SampleCount::All => Ok(pool.len()),
        SampleCount::Count(n) if n <= pool.len() => Ok(n),
        SampleCount::Count(n) => Err(Error::InsufficientSamples {
            class,
            needed: n,
            available: pool.len(),
        }),
    }
}

/// Draws a seeded per-class split without replacement.
///
/// Source samples come from the source domain; labelled and unlabelled
/// target samples come from disjoint parts of each target class. Returned
/// index lists are sorted.
pub fn generate_split(
    source_labels: &[usize],
    target_labels: &[usize],
    num_classes: usize,
    spec: &SplitSpec,
) -> Result<SplitIndices> {
    crate::graphs::check_labels(source_labels, num_classes)?;
    crate::graphs::check_labels(target_labels, num_classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut split = SplitIndices {
        source: vec![],
        target_labeled: vec![],
        target_unlabeled: vec![],
    };

    for (c, mut pool) in by_class(source_labels, num_classes).into_iter().enumerate() {
        pool.shuffle(&mut rng);
        let n = take(&pool, spec.source_per_class, c)?;
        split.source.extend_from_slice(&pool[..n]);
    }
    for (c, mut pool) in by_class(target_labels, num_classes).into_iter().enumerate() {
        pool.shuffle(&mut rng);
        let labeled = take(&pool, SampleCount::Count(spec.target_labeled_per_class), c)?;
        let rest = &pool[labeled..];
        let unlabeled = take(rest, spec.target_unlabeled_per_class, c).map_err(|_| {
            let SampleCount::Count(n) = spec.target_unlabeled_per_class else {
                unreachable!()
            };
            Error::InsufficientSamples {
                class: c,
                needed: labeled + n,
                available: pool.len(),
            }
        })?;
        split.target_labeled.extend_from_slice(&pool[..labeled]);
        split.target_unlabeled.extend_from_slice(&rest[..unlabeled]);
    }
    split.source.sort_unstable();
    split.target_labeled.sort_unstable();
    split.target_unlabeled.sort_unstable();
    Ok(split)
}

/// Full source and target domains of one adaptation task.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub name: String,
    pub source: LabeledSet,
    pub target: LabeledSet,
    pub num_classes: usize,
}

/// Settings shared by every trial of a run or benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub mode: Mode,
    pub config: CdsppConfig,
    /// Per-domain PCA component count applied before fitting.
    pub pca_components: Option<usize>,
}

/// The sample sets of one trial, after optional PCA.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub source: LabeledSet,
    pub target: LabeledSet,
    pub unlabeled: FeatureMatrix,
    pub truth: GroundTruth,
    pub warnings: Vec<String>,
}

fn reduce(
    fit_on: &FeatureMatrix,
    apply_to: &[&FeatureMatrix],
    k: usize,
    domain: &str,
    warnings: &mut Vec<String>,
) -> Result<Vec<FeatureMatrix>> {
    let limit = fit_on.rows().min(fit_on.cols().saturating_sub(1));
    let k_eff = k.min(limit);
    if k_eff < k {
        warnings.push(format!(
            "{domain} PCA reduced to {k_eff} components (requested {k})"
        ));
    }
    let model = pca_fit(fit_on, k_eff)?;
    if model.is_rank_deficient() {
        warnings.push(format!(
            "{domain} PCA kept {} of {k_eff} components with positive variance",
            model.n_components()
        ));
    }
    apply_to.iter().map(|m| pca_transform(&model, m)).collect()
}

/// Materialises a split, applying per-domain PCA when requested.
///
/// Source PCA is fitted on the selected source samples; target PCA on all
/// selected target samples (labelled and unlabelled features, never labels).
pub fn prepare_trial(task: &Task, split: &SplitIndices, pca: Option<usize>) -> Result<TrialData> {
    let mut source = task.source.select(&split.source);
    let mut target = task.target.select(&split.target_labeled);
    let pool = task.target.select(&split.target_unlabeled);
    let mut unlabeled = pool.features;
    let mut warnings = Vec::new();
    if let Some(k) = pca {
        let reduced = reduce(
            &source.features,
            &[&source.features],
            k,
            "source",
            &mut warnings,
        )?;
        source.features = reduced.into_iter().next().expect("one matrix");
        let all_target = target.features.hstack(&unlabeled)?;
        let mut reduced = reduce(
            &all_target,
            &[&target.features, &unlabeled],
            k,
            "target",
            &mut warnings,
        )?
        .into_iter();
        target.features = reduced.next().expect("two matrices");
        unlabeled = reduced.next().expect("two matrices");
    }
    Ok(TrialData {
        source,
        target,
        unlabeled,
        truth: GroundTruth::new(pool.labels),
        warnings,
    })
}

/// Runs one trial of `task` with the given split.
pub fn run_trial(
    task: &Task,
    split: &SplitIndices,
    options: &RunOptions,
) -> Result<(TrialData, RunOutcome)> {
    let start = Instant::now();
    let data = prepare_trial(task, split, options.pca_components)?;
    let prep = start.elapsed().as_secs_f64();
    let runner = match options.mode {
        Mode::Supervised => run_supervised,
        Mode::SemiSupervised => run_semi_supervised,
    };
    let mut outcome = runner(
        &data.source,
        &data.target,
        &data.unlabeled,
        Some(&data.truth),
        &options.config,
    )?;
    let report = &mut outcome.report;
    report.task = Some(task.name.clone());
    report.config.pca_components = options.pca_components;
    report.warnings.splice(0..0, data.warnings.iter().cloned());
    report.timings.insert(
        0,
        StageTiming {
            stage: "prepare".into(),
            seconds: prep,
        },
    );
    Ok((data, outcome))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: String,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator; 0 for one trial).
    pub std: f64,
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<TaskSummary>,
    /// Mean of the per-task means.
    pub average: f64,
}

/// Returns `(mean, sample std)`.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Runs `trials` seeded trials of every task (trial `i` uses seed
/// `spec.seed + i`) on up to `jobs` threads and tabulates the accuracies.
pub fn run_benchmark(
    tasks: &[Task],
    trials: usize,
    spec: &SplitSpec,
    options: &RunOptions,
    jobs: usize,
) -> Result<BenchmarkTable> {
    if trials == 0 {
        return Err(Error::InvalidConfig(
            "at least one trial is required".into(),
        ));
    }
    options.config.validate()?;
    let work: Vec<(usize, u64)> = (0..tasks.len())
        .flat_map(|t| (0..trials as u64).map(move |i| (t, i)))
        .collect();
    let run_one = |&(t, i): &(usize, u64)| -> Result<f64> {
        let task = &tasks[t];
        let trial_spec = SplitSpec {
            seed: spec.seed.wrapping_add(i),
            ..*spec
        };
        let split = generate_split(
            &task.source.labels,
            &task.target.labels,
            task.num_classes,
            &trial_spec,
        )?;
        let (_, outcome) = run_trial(task, &split, options)?;
        Ok(outcome.report.final_accuracy.unwrap_or(f64::NAN))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<Result<f64>> = pool.install(|| work.par_iter().map(run_one).collect());
    let accuracies = results.into_iter().collect::<Result<Vec<f64>>>()?;

    let rows: Vec<TaskSummary> = tasks
        .iter()
        .zip(accuracies.chunks(trials))
        .map(|(task, accs)| {
            let (mean, std) = mean_std(accs);
            TaskSummary {
                task: task.name.clone(),
                mean,
                std,
                accuracies: accs.to_vec(),
            }
        })
        .collect();
    let average = rows.iter().map(|r| r.mean).sum::<f64>() / rows.len().max(1) as f64;
    Ok(BenchmarkTable { rows, average })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pred(label: usize, distance: f64) -> Prediction {
        Prediction {
            label,
            distance,
            confidence: -distance,
            margin: 0.0,
        }
    }

    fn spec(seed: u64, lts: usize, uts: SampleCount) -> SplitSpec {
        SplitSpec {
            seed,
            source_per_class: SampleCount::All,
            target_labeled_per_class: lts,
            target_unlabeled_per_class: uts,
        }
    }

    #[test]
    fn schedule_boundaries() {
        assert_eq!(schedule_count(1, 7, 1), 7);
        assert_eq!(schedule_count(5, 150, 5), 150);
        assert_eq!(
            (1..=5)
                .map(|k| schedule_count(k, 150, 5))
                .collect::<Vec<_>>(),
            [30, 60, 90, 120, 150]
        );
        assert_eq!(schedule_count(1, 3, 5), 0);
    }

    #[test]
    fn global_selection_takes_most_confident() {
        let preds = [pred(0, 0.5), pred(1, 0.1), pred(0, 0.3), pred(1, 0.9)];
        let batch = select_pseudo_labels(&preds, 1, 2, Selection::Global);
        assert_eq!(batch.target_count, 2);
        let idx: Vec<usize> = batch.selected.iter().map(|p| p.index).collect();
        assert_eq!(idx, vec![1, 2]);
        assert!(batch
            .selected
            .windows(2)
            .all(|w| w[0].confidence >= w[1].confidence));
    }

    #[test]
    fn class_balanced_selection_uses_per_class_quota() {
        // class 0 has the four most confident samples, class 1 the rest
        let preds = [
            pred(0, 0.1),
            pred(0, 0.2),
            pred(0, 0.3),
            pred(0, 0.4),
            pred(1, 0.5),
            pred(1, 0.6),
        ];
        let batch = select_pseudo_labels(&preds, 1, 2, Selection::ClassBalanced);
        let idx: Vec<usize> = batch.selected.iter().map(|p| p.index).collect();
        assert_eq!(idx, vec![0, 1, 4]);
        let global = select_pseudo_labels(&preds, 1, 2, Selection::Global);
        assert_eq!(
            global.selected.iter().map(|p| p.index).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn split_counts_and_disjointness() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let s = generate_split(&labels, &labels, 3, &spec(1, 3, SampleCount::All)).unwrap();
        assert_eq!(s.source.len(), 30);
        assert_eq!(s.target_labeled.len(), 9);
        assert_eq!(s.target_unlabeled.len(), 21);
        for c in 0..3 {
            assert_eq!(
                s.target_labeled.iter().filter(|&&i| labels[i] == c).count(),
                3
            );
            assert_eq!(
                s.target_unlabeled
                    .iter()
                    .filter(|&&i| labels[i] == c)
                    .count(),
                7
            );
        }
        assert!(s
            .target_labeled
            .iter()
            .all(|i| !s.target_unlabeled.contains(i)));
    }

    #[test]
    fn split_is_seeded() {
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let sp = SplitSpec {
            seed: 9,
            source_per_class: SampleCount::Count(5),
            target_labeled_per_class: 2,
            target_unlabeled_per_class: SampleCount::Count(4),
        };
        let a = generate_split(&labels, &labels, 4, &sp).unwrap();
        let b = generate_split(&labels, &labels, 4, &sp).unwrap();
        assert_eq!(a, b);
        let c = generate_split(&labels, &labels, 4, &SplitSpec { seed: 10, ..sp }).unwrap();
        assert_ne!(a, c);
        assert_eq!(
            (
                a.source.len(),
                a.target_labeled.len(),
                a.target_unlabeled.len()
            ),
            (20, 8, 16)
        );
    }

    #[test]
    fn split_insufficient_samples() {
        let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let err = generate_split(&labels, &labels, 2, &spec(0, 11, SampleCount::All)).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientSamples {
                class: 0,
                needed: 11,
                available: 10
            }
        ));
        let err =
            generate_split(&labels, &labels, 2, &spec(0, 3, SampleCount::Count(8))).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientSamples {
                class: 0,
                needed: 11,
                available: 10
            }
        ));
    }

    #[test]
    fn sample_count_parsing() {
        assert_eq!("all".parse::<SampleCount>().unwrap(), SampleCount::All);
        assert_eq!("12".parse::<SampleCount>().unwrap(), SampleCount::Count(12));
        assert!("x".parse::<SampleCount>().is_err());
    }

    #[test]
    fn mean_std_conventions() {
        assert_eq!(mean_std(&[0.8]), (0.8, 0.0));
        let (m, s) = mean_std(&[0.5, 0.7]);
        assert_abs_diff_eq!(m, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.02f64.sqrt(), epsilon = 1e-15);
        assert_eq!(mean_std(&[0.9, 0.9, 0.9]).1, 0.0);
    }
}
