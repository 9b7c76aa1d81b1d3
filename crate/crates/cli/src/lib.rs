//! Command implementations behind the `cdspp` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use cdspp::dataio::{self, DatasetManifest, DomainFiles, SplitDefaults, SplitManifest};
use cdspp::ndarray::ArrayView1;
use cdspp::pipeline::{self, generate_split, run_trial, RunOptions, SampleCount, SplitSpec};
use cdspp::synthetic::{generate_task, SyntheticSpec};
use cdspp::{CdsppConfig, ErrorKind, Mode, Selection, Task};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_INSUFFICIENT_DATA: i32 = 5;

/// Heterogeneous domain adaptation with cross-domain structure preserving projection.
#[derive(Debug, Parser)]
#[command(name = "cdspp", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit on one seeded split of a dataset and write a run report.
    Run(RunArgs),
    /// Repeat seeded trials over one or more datasets and tabulate accuracy.
    Benchmark(BenchmarkArgs),
    /// Write the seeded split of a dataset without fitting.
    Split(SplitArgs),
    /// Write subspace coordinates of every sample, one per line, for plotting.
    ExportEmbedding(RunArgs),
    /// Write a seeded synthetic two-domain dataset and its manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Labelled data only.
    Sup,
    /// Iterative selective pseudo-labelling.
    Semi,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sup => Mode::Supervised,
            ModeArg::Semi => Mode::SemiSupervised,
        }
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("{s:?} is not a positive integer")),
    }
}

/// Split sizes; each overrides the manifest's `[split]` table.
#[derive(Debug, Clone, Args)]
pub struct SplitFlags {
    /// Labelled source samples per class (a count or "all").
    #[arg(long)]
    pub lss: Option<SampleCount>,
    /// Labelled target samples per class.
    #[arg(long)]
    pub lts: Option<usize>,
    /// Unlabelled target samples per class (a count or "all").
    #[arg(long)]
    pub uts: Option<SampleCount>,
    /// Random seed for the split.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    pub seed: u64,
}

impl SplitFlags {
    fn spec(&self, manifest: &DatasetManifest, seed: u64) -> SplitSpec {
        let defaults = manifest.split.unwrap_or_default();
        SplitDefaults {
            source_per_class: self.lss.unwrap_or(defaults.source_per_class),
            target_labeled_per_class: self.lts.unwrap_or(defaults.target_labeled_per_class),
            target_unlabeled_per_class: self.uts.unwrap_or(defaults.target_unlabeled_per_class),
        }
        .with_seed(seed)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelFlags {
    /// Supervised or semi-supervised adaptation.
    #[arg(long, value_enum, default_value_t = ModeArg::Semi)]
    pub mode: ModeArg,
    /// Subspace dimension [default: number of classes].
    #[arg(long = "d", value_parser = positive_usize)]
    pub dim: Option<usize>,
    /// Regularisation weight added to the constraint matrix.
    #[arg(long, default_value_t = 10.0, value_parser = positive_f64)]
    pub alpha: f64,
    /// Pseudo-labelling iterations.
    #[arg(long = "iterations", short = 'T', default_value_t = 5, value_parser = positive_usize)]
    pub iterations: usize,
    /// Per-domain PCA before fitting; the bare flag keeps 50 components.
    #[arg(long, num_args = 0..=1, default_missing_value = "50", value_parser = positive_usize)]
    pub pca: Option<usize>,
    /// Select pseudo-labels per predicted class instead of globally.
    #[arg(long)]
    pub class_balanced: bool,
    /// Fail when a class ends up without support instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

impl ModelFlags {
    fn options(&self, manifest: &DatasetManifest) -> RunOptions {
        RunOptions {
            mode: self.mode.into(),
            config: CdsppConfig {
                dim: self.dim,
                alpha: self.alpha,
                iterations: self.iterations,
                selection: if self.class_balanced {
                    Selection::ClassBalanced
                } else {
                    Selection::Global
                },
                strict_classes: self.strict,
            },
            pca_components: self.pca.or(manifest.pca_components),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Dataset manifest (TOML).
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub split: SplitFlags,
    /// Output file (report for `run`, coordinates for `export-embedding`).
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Dataset manifests; each one is a task.
    #[arg(long, required = true, num_args = 1..)]
    pub manifest: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub split: SplitFlags,
    /// Trials per task; trial i uses seed + i.
    #[arg(long, default_value_t = 10, value_parser = positive_usize)]
    pub trials: usize,
    /// Worker threads for trials.
    #[arg(long, env = "CDSPP_JOBS", default_value_t = 1, value_parser = positive_usize)]
    pub jobs: usize,
    /// Machine-readable table (CSV).
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Dataset manifest (TOML).
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub split: SplitFlags,
    /// Split manifest to write (TOML).
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Directory to write into (created if missing).
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3, value_parser = positive_usize)]
    pub classes: usize,
    #[arg(long, default_value_t = 20, value_parser = positive_usize)]
    pub source_dim: usize,
    #[arg(long, default_value_t = 12, value_parser = positive_usize)]
    pub target_dim: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 50)]
    pub source_per_class: usize,
    #[arg(long, default_value_t = 3)]
    pub target_labeled_per_class: usize,
    #[arg(long, default_value_t = 50)]
    pub target_unlabeled_per_class: usize,
}

/// A failure, tagged with the stage in which it happened.
#[derive(Debug, Error)]
#[error("{stage} failed: {source}")]
pub struct CliError {
    pub stage: &'static str,
    #[source]
    pub source: cdspp::Error,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self.source.kind() {
            ErrorKind::Usage => EXIT_USAGE,
            ErrorKind::Io => EXIT_IO,
            ErrorKind::Numeric => EXIT_NUMERIC,
            ErrorKind::InsufficientData => EXIT_INSUFFICIENT_DATA,
        }
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> Stage<T> for cdspp::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError { stage, source })
    }
}

fn io_result<T>(r: std::io::Result<T>, path: &Path, stage: &'static str) -> Result<T, CliError> {
    r.map_err(|source| CliError {
        stage,
        source: cdspp::Error::Io {
            path: path.to_path_buf(),
            source,
        },
    })
}

fn console(r: std::io::Result<()>) -> Result<(), CliError> {
    io_result(r, Path::new("<stdout>"), "write output")
}

fn load(manifest: &Path) -> Result<(DatasetManifest, Task), CliError> {
    let m = dataio::load_manifest(manifest).stage("load manifest")?;
    let task = dataio::load_task(&m).stage("load data")?;
    Ok((m, task))
}

pub fn execute(cli: Cli, out: &mut impl Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(&args, out),
        Command::Benchmark(args) => cmd_benchmark(&args, out),
        Command::Split(args) => cmd_split(&args, out),
        Command::ExportEmbedding(args) => cmd_export_embedding(&args, out),
        Command::Synth(args) => cmd_synth(&args, out),
    }
}

fn fmt_accuracy(a: Option<f64>) -> String {
    a.map_or_else(|| "n/a".to_string(), |v| format!("{:.4}", v))
}

/// Fits one seeded split and writes the report.
pub fn cmd_run(args: &RunArgs, out: &mut impl Write) -> Result<(), CliError> {
    let (manifest, task) = load(&args.manifest)?;
    let spec = args.split.spec(&manifest, args.split.seed);
    let split = generate_split(
        &task.source.labels,
        &task.target.labels,
        task.num_classes,
        &spec,
    )
    .stage("split")?;
    let options = args.model.options(&manifest);
    let (_, outcome) = run_trial(&task, &split, &options).stage("fit")?;
    let mut report = outcome.report;
    report.seed = Some(args.split.seed);
    dataio::save_report(&report, &args.output).stage("write report")?;

    console(writeln!(out, "task: {}", task.name))?;
    if let Some(init) = report
        .initial_accuracy
        .filter(|_| options.mode == Mode::SemiSupervised)
    {
        console(writeln!(out, "initial accuracy: {init:.4}"))?;
    }
    for (k, (acc, n)) in report
        .iteration_accuracy
        .iter()
        .zip(&report.selected_counts)
        .enumerate()
    {
        console(writeln!(
            out,
            "iteration {}: selected {n}, accuracy {acc:.4}",
            k + 1
        ))?;
    }
    console(writeln!(
        out,
        "final accuracy: {}",
        fmt_accuracy(report.final_accuracy)
    ))?;
    for w in &report.warnings {
        console(writeln!(out, "warning: {w}"))?;
    }
    Ok(())
}

/// Renders the benchmark table as `task,mean,std,trials` CSV with a final `Avg` row.
pub fn benchmark_csv(table: &cdspp::BenchmarkTable, trials: usize) -> String {
    let mut s = String::from("task,mean,std,trials\n");
    for r in &table.rows {
        s.push_str(&format!("{},{:?},{:?},{trials}\n", r.task, r.mean, r.std));
    }
    s.push_str(&format!("Avg,{:?},,{trials}\n", table.average));
    s
}

pub fn cmd_benchmark(args: &BenchmarkArgs, out: &mut impl Write) -> Result<(), CliError> {
    let mut tasks = Vec::new();
    let mut spec = None;
    let mut options = None;
    for path in &args.manifest {
        let (manifest, task) = load(path)?;
        // split sizes and PCA default come from the first manifest
        spec.get_or_insert_with(|| args.split.spec(&manifest, args.split.seed));
        options.get_or_insert_with(|| args.model.options(&manifest));
        tasks.push(task);
    }
    let (spec, options) = (
        spec.expect("at least one manifest"),
        options.expect("at least one manifest"),
    );
    let table = pipeline::run_benchmark(&tasks, args.trials, &spec, &options, args.jobs)
        .stage("benchmark")?;
    io_result(
        fs::write(&args.output, benchmark_csv(&table, args.trials)),
        &args.output,
        "write table",
    )?;

    let width = tasks.iter().map(|t| t.name.len()).max().unwrap_or(0).max(4);
    for r in &table.rows {
        console(writeln!(
            out,
            "{:<width$}  {:.1}({:.1})",
            r.task,
            100.0 * r.mean,
            100.0 * r.std
        ))?;
    }
    console(writeln!(
        out,
        "{:<width$}  {:.1}",
        "Avg",
        100.0 * table.average
    ))?;
    Ok(())
}

pub fn cmd_split(args: &SplitArgs, out: &mut impl Write) -> Result<(), CliError> {
    let (manifest, task) = load(&args.manifest)?;
    let spec = args.split.spec(&manifest, args.split.seed);
    let indices = generate_split(
        &task.source.labels,
        &task.target.labels,
        task.num_classes,
        &spec,
    )
    .stage("split")?;
    console(writeln!(
        out,
        "source {}, labelled target {}, unlabelled target {}",
        indices.source.len(),
        indices.target_labeled.len(),
        indices.target_unlabeled.len()
    ))?;
    let manifest = SplitManifest {
        task: task.name,
        spec,
        indices,
    };
    dataio::save_split(&manifest, &args.output).stage("write split")
}

fn embedding_line(
    domain: &str,
    index: usize,
    label: Option<usize>,
    pseudo: Option<usize>,
    prediction: Option<usize>,
    z: ArrayView1<'_, f64>,
) -> String {
    let tag = |v: Option<usize>| v.map(|l| l.to_string()).unwrap_or_default();
    let coords: Vec<String> = z.iter().map(|v| format!("{v:?}")).collect();
    format!(
        "{domain},{index},{},{},{},{}\n",
        tag(label),
        tag(pseudo),
        tag(prediction),
        coords.join(",")
    )
}

/// Writes `domain,index,label,pseudo_label,prediction,z1,...,zd` for every
/// source, labelled target and unlabelled target sample. `index` refers to
/// the row in the domain's feature file.
pub fn cmd_export_embedding(args: &RunArgs, out: &mut impl Write) -> Result<(), CliError> {
    let (manifest, task) = load(&args.manifest)?;
    let spec = args.split.spec(&manifest, args.split.seed);
    let split = generate_split(
        &task.source.labels,
        &task.target.labels,
        task.num_classes,
        &spec,
    )
    .stage("split")?;
    let options = args.model.options(&manifest);
    let (data, outcome) = run_trial(&task, &split, &options).stage("fit")?;
    let p = &outcome.projection;
    let zs = p.project_source(&data.source.features).stage("project")?;
    let zt = p.project_target(&data.target.features).stage("project")?;
    let zu = if data.unlabeled.cols() > 0 {
        Some(p.project_target(&data.unlabeled).stage("project")?)
    } else {
        None
    };

    let mut pseudo = vec![None; data.unlabeled.cols()];
    if let Some(batch) = &outcome.last_batch {
        for s in &batch.selected {
            pseudo[s.index] = Some(s.label);
        }
    }
    let mut text = String::new();
    for (j, &i) in split.source.iter().enumerate() {
        text += &embedding_line(
            "source",
            i,
            Some(data.source.labels[j]),
            None,
            None,
            zs.column(j),
        );
    }
    for (j, &i) in split.target_labeled.iter().enumerate() {
        text += &embedding_line(
            "target",
            i,
            Some(data.target.labels[j]),
            None,
            None,
            zt.column(j),
        );
    }
    if let Some(zu) = &zu {
        let truth = data.truth.reveal();
        for (j, &i) in split.target_unlabeled.iter().enumerate() {
            let pred = outcome.predictions[j].label;
            text += &embedding_line(
                "unlabeled",
                i,
                Some(truth[j]),
                pseudo[j],
                Some(pred),
                zu.column(j),
            );
        }
    }
    io_result(
        fs::write(&args.output, text),
        &args.output,
        "write embedding",
    )?;
    console(writeln!(
        out,
        "wrote {} samples in {} dimensions to {}",
        zs.cols() + zt.cols() + zu.as_ref().map_or(0, |z| z.cols()),
        p.dim(),
        args.output.display()
    ))
}

pub fn cmd_synth(args: &SynthArgs, out: &mut impl Write) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        classes: args.classes,
        source_dim: args.source_dim,
        target_dim: args.target_dim,
        noise: args.noise,
        source_per_class: args.source_per_class,
        target_labeled_per_class: args.target_labeled_per_class,
        target_unlabeled_per_class: args.target_unlabeled_per_class,
        seed: args.seed,
    };
    let task = generate_task(&spec, "synthetic");
    io_result(fs::create_dir_all(&args.dir), &args.dir, "create directory")?;
    let files = |prefix: &str, dim: usize| DomainFiles {
        features: format!("{prefix}.csv").into(),
        labels: format!("{prefix}_labels.txt").into(),
        dim,
    };
    let manifest = DatasetManifest {
        name: task.name.clone(),
        classes: spec.classes,
        pca_components: None,
        split: Some(SplitDefaults {
            source_per_class: SampleCount::All,
            target_labeled_per_class: spec.target_labeled_per_class,
            target_unlabeled_per_class: SampleCount::All,
        }),
        source: files("source", spec.source_dim),
        target: files("target", spec.target_dim),
    };
    let write_domain = |f: &DomainFiles, set: &cdspp::LabeledSet| -> Result<(), CliError> {
        dataio::save_features(&set.features, &args.dir.join(&f.features)).stage("write data")?;
        dataio::save_labels(&set.labels, &args.dir.join(&f.labels)).stage("write data")
    };
    write_domain(&manifest.source, &task.source)?;
    write_domain(&manifest.target, &task.target)?;
    let path = args.dir.join("manifest.toml");
    dataio::save_manifest(&manifest, &path).stage("write manifest")?;
    console(writeln!(out, "wrote {}", path.display()))
}
