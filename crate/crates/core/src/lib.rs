//! Cross-domain structure preserving projection (CDSPP) for heterogeneous
//! domain adaptation.
//!
//! Source and target samples live in feature spaces of different
//! dimension. CDSPP learns one linear projection per domain into a shared
//! subspace in which samples of the same class are pulled together, within
//! and across domains, by solving a single symmetric-definite generalized
//! eigenproblem. Unlabelled target samples are classified by the nearest
//! normalised class mean, and the semi-supervised mode feeds the most
//! confident of those predictions back into the fit over several rounds.
//!
//! Layout:
//!
//! * [`linalg`]: feature matrices, normalisation, PCA and eigensolvers
//! * [`graphs`]: class-consistency graphs and Laplacians
//! * [`model`]: pencil assembly, fitting, projection, objective evaluators
//! * [`classify`]: class means and nearest-mean prediction
//! * [`pipeline`]: supervised and pseudo-labelling runs, splits, benchmarks
//! * [`dataio`]: file formats
//! * [`synthetic`]: seeded fixture generator

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub use ndarray;

pub mod classify;
pub mod data;
pub mod dataio;
pub mod error;
pub mod graphs;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod synthetic;

pub use classify::{ClassMeans, Prediction};
pub use data::{GroundTruth, LabeledSet};
pub use error::{Error, ErrorKind, Result};
pub use graphs::GraphSet;
pub use linalg::{EigenResult, FeatureMatrix, PcaModel};
pub use model::{CdsppConfig, PencilSystem, ProjectionPair, Selection};
pub use pipeline::{
    BenchmarkTable, Mode, PseudoLabelBatch, RunOptions, RunOutcome, RunReport, SampleCount,
    SplitIndices, SplitSpec, Task,
};
