//! Text formats: feature tables, label lists, dataset manifests, split
//! manifests and run reports.
//!
//! Feature files hold one sample per line as comma-separated decimals; in
//! memory samples become columns. Labels are one non-negative integer per
//! line. Manifests, splits and reports are TOML documents.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::linalg::FeatureMatrix;
use crate::pipeline::{RunReport, SampleCount, SplitIndices, SplitSpec, Task, REPORT_VERSION};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a feature table; `path` is only used in error messages.
pub fn parse_features(text: &str, path: &Path) -> Result<FeatureMatrix> {
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(samples.first().map_or(0, Vec::len));
        for (j, field) in line.split(',').enumerate() {
            let field = field.trim();
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                column: j + 1,
                message: format!("{field:?} is not a decimal number"),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    path: path.to_path_buf(),
                    line: line_no,
                    column: j + 1,
                });
            }
            row.push(value);
        }
        if let Some(first) = samples.first() {
            if first.len() != row.len() {
                return Err(Error::RaggedRows {
                    path: path.to_path_buf(),
                    line: line_no,
                });
            }
        }
        samples.push(row);
    }
    if samples.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "no samples".into(),
        });
    }
    FeatureMatrix::from_samples(&samples)
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    parse_features(&read(path)?, path)
}

/// Writes one sample per line using the shortest representation that parses
/// back to the identical `f64`.
pub fn format_features(m: &FeatureMatrix) -> String {
    let mut out = String::new();
    for col in m.view().columns() {
        let fields: Vec<String> = col.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn save_features(m: &FeatureMatrix, path: &Path) -> Result<()> {
    write(path, &format_features(m))
}

pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: i64 = line.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            column: 1,
            message: format!("{line:?} is not an integer"),
        })?;
        if value < 0 {
            return Err(Error::NegativeLabel {
                path: path.to_path_buf(),
                line: i + 1,
            });
        }
        labels.push(value as usize);
    }
    Ok(labels)
}

pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    parse_labels(&read(path)?, path)
}

pub fn save_labels(labels: &[usize], path: &Path) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        writeln!(out, "{l}").expect("writing to a String");
    }
    write(path, &out)
}

fn to_toml<T: Serialize>(value: &T, path: &Path) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn from_toml<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn format_report(report: &RunReport) -> Result<String> {
    to_toml(report, Path::new("<report>"))
}

pub fn save_report(report: &RunReport, path: &Path) -> Result<()> {
    write(path, &to_toml(report, path)?)
}

pub fn load_report(path: &Path) -> Result<RunReport> {
    let text = read(path)?;
    let table: toml::Table = from_toml(&text, path)?;
    let found = match table.get("version") {
        Some(toml::Value::String(v)) => v.clone(),
        Some(other) => other.to_string(),
        None => "<missing>".to_string(),
    };
    if found != REPORT_VERSION {
        return Err(Error::VersionMismatch {
            path: path.to_path_buf(),
            found,
            expected: REPORT_VERSION.into(),
        });
    }
    from_toml(&text, path)
}

/// Where one domain's samples live on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainFiles {
    pub features: PathBuf,
    pub labels: PathBuf,
    pub dim: usize,
}

/// Default per-class split sizes stored alongside a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitDefaults {
    pub source_per_class: SampleCount,
    pub target_labeled_per_class: usize,
    pub target_unlabeled_per_class: SampleCount,
}

impl SplitDefaults {
    pub fn with_seed(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            seed,
            source_per_class: self.source_per_class,
            target_labeled_per_class: self.target_labeled_per_class,
            target_unlabeled_per_class: self.target_unlabeled_per_class,
        }
    }
}

impl Default for SplitDefaults {
    fn default() -> Self {
        Self {
            source_per_class: SampleCount::Count(20),
            target_labeled_per_class: 3,
            target_unlabeled_per_class: SampleCount::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca_components: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitDefaults>,
    pub source: DomainFiles,
    pub target: DomainFiles,
}

/// Reads a manifest; relative file paths are resolved against its directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let mut m: DatasetManifest = from_toml(&read(path)?, path)?;
    if m.classes == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "classes must be at least 1".into(),
        });
    }
    let base = path.parent().unwrap_or(Path::new("."));
    for files in [&mut m.source, &mut m.target] {
        for p in [&mut files.features, &mut files.labels] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    Ok(m)
}

pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    write(path, &to_toml(manifest, path)?)
}

fn load_domain(files: &DomainFiles, classes: usize) -> Result<LabeledSet> {
    let features = load_features(&files.features)?;
    if features.rows() != files.dim {
        return Err(Error::Format {
            path: files.features.clone(),
            message: format!(
                "declared dimension {} but rows have {} values",
                files.dim,
                features.rows()
            ),
        });
    }
    let labels = load_labels(&files.labels)?;
    if labels.len() != features.cols() {
        return Err(Error::Format {
            path: files.labels.clone(),
            message: format!("{} labels for {} samples", labels.len(), features.cols()),
        });
    }
    if let Some(line) = labels.iter().position(|&l| l >= classes) {
        return Err(Error::Format {
            path: files.labels.clone(),
            message: format!(
                "label {} at line {} exceeds class count {classes}",
                labels[line],
                line + 1
            ),
        });
    }
    LabeledSet::new(features, labels)
}

/// Loads both domains named by a manifest.
pub fn load_task(manifest: &DatasetManifest) -> Result<Task> {
    Ok(Task {
        name: manifest.name.clone(),
        source: load_domain(&manifest.source, manifest.classes)?,
        target: load_domain(&manifest.target, manifest.classes)?,
        num_classes: manifest.classes,
    })
}

/// A split together with the specification that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub task: String,
    pub spec: SplitSpec,
    pub indices: SplitIndices,
}

pub fn save_split(split: &SplitManifest, path: &Path) -> Result<()> {
    write(path, &to_toml(split, path)?)
}

pub fn load_split(path: &Path) -> Result<SplitManifest> {
    from_toml(&read(path)?, path)
}
