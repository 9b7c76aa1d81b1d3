//! Learning the pair of domain-specific projections.
//!
//! With l2-normalised source features `Xs` (`d_s × n_s`) and target features
//! `Xt` (`d_t × n_t`) the projections are the top eigenvectors of the pencil
//!
//! ```text
//! A = [ 0      S_c ]      B = [ S_s  0   ]
//!     [ S_cᵀ   0   ]          [ 0    S_t ]
//!
//! S_c = Xs W^c Xtᵀ,  S_s = Xs L^s Xsᵀ,  S_t = Xt L^t Xtᵀ
//! A P = (B + αI) P Λ
//! ```
//!
//! The objective evaluators at the bottom of this file are kept independent
//! of the solver and are used as oracles by the tests.

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{check_labels, GraphSet};
use crate::linalg::{generalized_sym_eig, normalize_columns, symmetrize, FeatureMatrix, NORM_EPS};

/// Eigenvalues at or below `RANK_EPS * λ_max` are treated as zero.
pub const RANK_EPS: f64 = 1e-10;
/// Allowed deviation from unit column norm when a caller claims normalised input.
pub const NORMALIZED_TOL: f64 = 1e-6;
/// Ratio denominators at or below this are rejected.
pub const RATIO_EPS: f64 = 1e-12;

/// How confident pseudo-labels are picked each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Top-k over the whole unlabelled pool.
    #[default]
    Global,
    /// Top fraction within each predicted class.
    ClassBalanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdsppConfig {
    /// Subspace dimension; `None` means one dimension per class.
    pub dim: Option<usize>,
    pub alpha: f64,
    /// Number of pseudo-labelling rounds.
    pub iterations: usize,
    pub selection: Selection,
    /// Fail instead of skipping classes that end up with no support.
    pub strict_classes: bool,
}

impl Default for CdsppConfig {
    fn default() -> Self {
        Self {
            dim: None,
            alpha: 10.0,
            iterations: 5,
            selection: Selection::Global,
            strict_classes: false,
        }
    }
}

impl CdsppConfig {
    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = Some(dim);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == Some(0) {
            return Err(Error::InvalidConfig(
                "subspace dimension must be at least 1".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig(
                "iteration count must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn resolved_dim(&self, num_classes: usize) -> usize {
        self.dim.unwrap_or(num_classes)
    }
}

/// The two projection matrices and the eigenvalues they were taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    /// `d_s × d`.
    pub source: Array2<f64>,
    /// `d_t × d`.
    pub target: Array2<f64>,
    pub eigenvalues: Vec<f64>,
    pub requested_dim: usize,
}

impl ProjectionPair {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// True when fewer directions than requested carried positive weight.
    pub fn is_truncated(&self) -> bool {
        self.dim() < self.requested_dim
    }

    /// `[P_s; P_t]`.
    pub fn stacked(&self) -> Array2<f64> {
        ndarray::concatenate(Axis(0), &[self.source.view(), self.target.view()])
            .expect("column counts agree")
    }

    pub fn project_source(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        project(&self.source.view(), x)
    }

    pub fn project_target(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        project(&self.target.view(), x)
    }
}

/// The pencil `(A, B)` in block form.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilSystem {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub source_dim: usize,
}

impl PencilSystem {
    fn from_blocks(cross: Array2<f64>, ss: Array2<f64>, st: Array2<f64>) -> Self {
        let (ds, dt) = cross.dim();
        let n = ds + dt;
        let mut a = Array2::zeros((n, n));
        a.slice_mut(s![..ds, ds..]).assign(&cross);
        a.slice_mut(s![ds.., ..ds]).assign(&cross.t());
        let mut b = Array2::zeros((n, n));
        b.slice_mut(s![..ds, ..ds]).assign(&symmetrize(&ss));
        b.slice_mut(s![ds.., ds..]).assign(&symmetrize(&st));
        Self {
            a,
            b,
            source_dim: ds,
        }
    }

    /// `B + αI`.
    pub fn regularized(&self, alpha: f64) -> Array2<f64> {
        let mut m = self.b.clone();
        m.diag_mut().mapv_inplace(|v| v + alpha);
        m
    }

    pub fn cross_block(&self) -> ArrayView2<'_, f64> {
        self.a.slice(s![..self.source_dim, self.source_dim..])
    }
}

fn check_normalized(x: &FeatureMatrix, which: &'static str) -> Result<()> {
    for col in x.view().columns() {
        if (col.dot(&col).sqrt() - 1.0).abs() > NORMALIZED_TOL {
            return Err(Error::NotNormalized(which));
        }
    }
    Ok(())
}

/// Builds `(A, B)` from normalised features and explicit graphs by dense products.
pub fn assemble_system(
    xs: &FeatureMatrix,
    xt: &FeatureMatrix,
    graphs: &GraphSet,
) -> Result<PencilSystem> {
    check_graph_dims(xs, xt, graphs)?;
    check_normalized(xs, "source")?;
    check_normalized(xt, "target")?;
    let (xs, xt) = (xs.view(), xt.view());
    let cross = xs.dot(&graphs.wc).dot(&xt.t());
    let ss = xs.dot(&graphs.ls).dot(&xs.t());
    let st = xt.dot(&graphs.lt).dot(&xt.t());
    Ok(PencilSystem::from_blocks(cross, ss, st))
}

/// Builds the same `(A, B)` as [`assemble_system`] directly from labels.
///
/// Class-consistency graphs are unions of cliques, so with per-class column
/// sums `m_c`:
///
/// ```text
/// S_c = Σ_c m^s_c m^tᵀ_c
/// S_s = Σ_i (n^s_{y_i} + ½ n^t_{y_i}) x_i x_iᵀ − Σ_c m^s_c m^sᵀ_c
/// ```
///
/// which costs `O(n d²)` instead of `O(n² d)` and never materialises the graphs.
pub fn assemble_from_labels(
    xs: &FeatureMatrix,
    xt: &FeatureMatrix,
    source_labels: &[usize],
    target_labels: &[usize],
    num_classes: usize,
) -> Result<PencilSystem> {
    if xs.cols() != source_labels.len() || xt.cols() != target_labels.len() {
        return Err(Error::DimensionMismatch(
            "labels do not match sample counts".into(),
        ));
    }
    check_labels(source_labels, num_classes)?;
    check_labels(target_labels, num_classes)?;
    check_normalized(xs, "source")?;
    check_normalized(xt, "target")?;

    let count = |labels: &[usize]| {
        let mut c = vec![0.0; num_classes];
        labels.iter().for_each(|&l| c[l] += 1.0);
        c
    };
    let (ns, nt) = (count(source_labels), count(target_labels));
    let class_sums = |x: &FeatureMatrix, labels: &[usize]| {
        let mut m = Array2::<f64>::zeros((x.rows(), num_classes));
        for (j, &l) in labels.iter().enumerate() {
            let mut col = m.column_mut(l);
            col += &x.column(j);
        }
        m
    };
    let (ms, mt) = (class_sums(xs, source_labels), class_sums(xt, target_labels));

    let scatter =
        |x: &FeatureMatrix, labels: &[usize], own: &[f64], other: &[f64], m: &Array2<f64>| {
            let weights =
                ndarray::Array1::from_iter(labels.iter().map(|&l| own[l] + 0.5 * other[l]));
            let weighted = &x.view() * &weights.view().insert_axis(Axis(0));
            weighted.dot(&x.view().t()) - m.dot(&m.t())
        };
    let ss = scatter(xs, source_labels, &ns, &nt, &ms);
    let st = scatter(xt, target_labels, &nt, &ns, &mt);
    let cross = ms.dot(&mt.t());
    Ok(PencilSystem::from_blocks(cross, ss, st))
}

fn check_graph_dims(xs: &FeatureMatrix, xt: &FeatureMatrix, g: &GraphSet) -> Result<()> {
    if xs.cols() != g.n_source()
        || xt.cols() != g.n_target()
        || g.wc.dim() != (g.n_source(), g.n_target())
        || g.ls.dim() != g.ws.dim()
        || g.lt.dim() != g.wt.dim()
    {
        return Err(Error::DimensionMismatch(format!(
            "features have {} source / {} target samples but graphs are {:?} / {:?}",
            xs.cols(),
            xt.cols(),
            g.ws.dim(),
            g.wt.dim()
        )));
    }
    Ok(())
}

/// Learns the projection pair from labelled source and target samples.
///
/// Features are l2-normalised here. The number of classes is taken as
/// `max label + 1` and every class below it must be present in at least one
/// domain. If fewer than the requested number of eigenvalues exceed
/// `RANK_EPS · λ_max`, the pair is truncated (see
/// [`ProjectionPair::is_truncated`]).
pub fn fit(
    xs: &FeatureMatrix,
    xt: &FeatureMatrix,
    source_labels: &[usize],
    target_labels: &[usize],
    config: &CdsppConfig,
) -> Result<ProjectionPair> {
    config.validate()?;
    if xs.cols() == 0 {
        return Err(Error::EmptyDomain("source"));
    }
    if xt.cols() == 0 {
        return Err(Error::EmptyDomain("target"));
    }
    let num_classes = source_labels
        .iter()
        .chain(target_labels)
        .max()
        .map_or(0, |m| m + 1);
    let mut present = vec![false; num_classes];
    source_labels
        .iter()
        .chain(target_labels)
        .for_each(|&l| present[l] = true);
    if let Some(c) = present.iter().position(|p| !p) {
        return Err(Error::MissingClass(c));
    }

    let xs = FeatureMatrix::new(normalize_columns(&xs.view())?)?;
    let xt = FeatureMatrix::new(normalize_columns(&xt.view())?)?;
    let system = assemble_from_labels(&xs, &xt, source_labels, target_labels, num_classes)?;
    solve_system(&system, config.alpha, config.resolved_dim(num_classes))
}

/// Solves the regularised pencil of an assembled system for `requested` directions.
pub fn solve_system(system: &PencilSystem, alpha: f64, requested: usize) -> Result<ProjectionPair> {
    let total = system.a.nrows();
    let count = requested.min(total);
    let metric = system.regularized(alpha);
    let eig = generalized_sym_eig(&system.a.view(), &metric.view(), count)?;

    let top = eig.values.first().copied().unwrap_or(0.0);
    let kept = eig
        .values
        .iter()
        .take_while(|&&v| top > 0.0 && v > RANK_EPS * top)
        .count();
    if kept == 0 {
        return Err(Error::RankDeficient {
            requested,
            available: 0,
        });
    }
    let ds = system.source_dim;
    Ok(ProjectionPair {
        source: eig.vectors.slice(s![..ds, ..kept]).to_owned(),
        target: eig.vectors.slice(s![ds.., ..kept]).to_owned(),
        eigenvalues: eig.values[..kept].to_vec(),
        requested_dim: requested,
    })
}

/// Maps samples into the subspace: normalise, project with `Pᵀ`, normalise again.
pub fn project(p: &ArrayView2<'_, f64>, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    if p.nrows() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "projection expects {} features, got {}",
            p.nrows(),
            x.rows()
        )));
    }
    let xn = normalize_columns(&x.view())?;
    let z = p.t().dot(&xn);
    for (j, col) in z.columns().into_iter().enumerate() {
        if col.dot(&col).sqrt() < NORM_EPS {
            return Err(Error::ZeroColumn(j));
        }
    }
    FeatureMatrix::new(normalize_columns(&z.view())?)
}

fn check_objective_dims(
    xs: &FeatureMatrix,
    xt: &FeatureMatrix,
    g: &GraphSet,
    ps: &ArrayView2<'_, f64>,
    pt: &ArrayView2<'_, f64>,
) -> Result<()> {
    check_graph_dims(xs, xt, g)?;
    if ps.nrows() != xs.rows() || pt.nrows() != xt.rows() || ps.ncols() != pt.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "projections {:?} / {:?} do not fit features of dimension {} / {}",
            ps.dim(),
            pt.dim(),
            xs.rows(),
            xt.rows()
        )));
    }
    Ok(())
}

fn sq_dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The pairwise objective evaluated literally as three weighted sums of
/// squared distances between projected samples.
pub fn objective_sum_form(
    xs: &FeatureMatrix,
    xt: &FeatureMatrix,
    graphs: &GraphSet,
    ps: &ArrayView2<'_, f64>,
    pt: &ArrayView2<'_, f64>,
) -> Result<f64> {
    check_objective_dims(xs, xt, graphs, ps, pt)?;
    let zs = ps.t().dot(&xs.view());
    let zt = pt.t().dot(&xt.view());
    let mut total = 0.0;
    for i in 0..zs.ncols() {
        for j in 0..zs.ncols() {
            total += sq_dist(zs.column(i), zs.column(j)) * graphs.ws[[i, j]];
        }
        for j in 0..zt.ncols() {
            total += sq_dist(zs.column(i), zt.column(j)) * graphs.wc[[i, j]];
        }
    }
    for i in 0..zt.ncols() {
        for j in 0..zt.ncols() {
            total += sq_dist(zt.column(i), zt.column(j)) * graphs.wt[[i, j]];
        }
    }
    Ok(total)
}

/// The same objective in trace form.
///
/// Expanding the three sums gives
/// `2 tr(XsᵀPsPsᵀXs(Ds−Ws)) + 2 tr(XtᵀPtPtᵀXt(Dt−Wt))` for the within-domain
/// terms and `tr(XsᵀPsPsᵀXs Dcs) + tr(XtᵀPtPtᵀXt Dct) − 2 tr(XsᵀPsPtᵀXt Wcᵀ)`
/// for the cross term, i.e.
///
/// ```text
/// 2 · [ tr(XsᵀPsPsᵀXs Ls) + tr(XtᵀPtPtᵀXt Lt) − tr(XsᵀPsPtᵀXt Wcᵀ) ]
/// ```
///
/// This returns that value, so it equals [`objective_sum_form`] exactly. The
/// overall factor 2 does not change the maximiser of the trace ratio.
pub fn objective_trace_form(
    xs: &FeatureMatrix,
    xt: &FeatureMatrix,
    graphs: &GraphSet,
    ps: &ArrayView2<'_, f64>,
    pt: &ArrayView2<'_, f64>,
) -> Result<f64> {
    check_objective_dims(xs, xt, graphs, ps, pt)?;
    let terms = TraceTerms::new(xs, xt, graphs, ps, pt);
    Ok(2.0 * (terms.source + terms.target - terms.cross))
}

struct TraceTerms {
    /// `tr(Psᵀ S_s Ps)`
    source: f64,
    /// `tr(Ptᵀ S_t Pt)`
    target: f64,
    /// `tr(Ptᵀ S_cᵀ Ps)`
    cross: f64,
}

impl TraceTerms {
    fn new(
        xs: &FeatureMatrix,
        xt: &FeatureMatrix,
        g: &GraphSet,
        ps: &ArrayView2<'_, f64>,
        pt: &ArrayView2<'_, f64>,
    ) -> Self {
        let zs = ps.t().dot(&xs.view());
        let zt = pt.t().dot(&xt.view());
        let source = (&zs * &zs.dot(&g.ls)).sum();
        let target = (&zt * &zt.dot(&g.lt)).sum();
        let cross = (&zs.t().dot(&zt) * &g.wc).sum();
        Self {
            source,
            target,
            cross,
        }
    }
}

/// `tr(Ptᵀ S_cᵀ Ps) / (tr(Psᵀ S_s Ps) + tr(Ptᵀ S_t Pt))`.
pub fn objective_ratio(
    xs: &FeatureMatrix,
    xt: &FeatureMatrix,
    graphs: &GraphSet,
    ps: &ArrayView2<'_, f64>,
    pt: &ArrayView2<'_, f64>,
) -> Result<f64> {
    regularized_objective_ratio(xs, xt, graphs, ps, pt, 0.0)
}

/// The trace ratio with `α(‖Ps‖²_F + ‖Pt‖²_F)` added to the denominator,
/// the quantity whose stationary directions solve the regularised pencil.
pub fn regularized_objective_ratio(
    xs: &FeatureMatrix,
    xt: &FeatureMatrix,
    graphs: &GraphSet,
    ps: &ArrayView2<'_, f64>,
    pt: &ArrayView2<'_, f64>,
    alpha: f64,
) -> Result<f64> {
    check_objective_dims(xs, xt, graphs, ps, pt)?;
    let terms = TraceTerms::new(xs, xt, graphs, ps, pt);
    let penalty = alpha * (ps.iter().chain(pt.iter()).map(|v| v * v).sum::<f64>());
    let denom = terms.source + terms.target + penalty;
    if !(denom > RATIO_EPS) {
        return Err(Error::DegenerateRatio(denom));
    }
    Ok(terms.cross / denom)
}

/// `Σ_ij ‖Pᵀx_i − Pᵀx_j‖² W_ij` for a single domain.
pub fn lpp_objective(
    x: &FeatureMatrix,
    w: &ArrayView2<'_, f64>,
    p: &ArrayView2<'_, f64>,
) -> Result<f64> {
    if w.dim() != (x.cols(), x.cols()) || p.nrows() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "W {:?} and P {:?} do not fit {}x{} features",
            w.dim(),
            p.dim(),
            x.rows(),
            x.cols()
        )));
    }
    let z = p.t().dot(&x.view());
    let mut total = 0.0;
    for i in 0..z.ncols() {
        for j in 0..z.ncols() {
            total += sq_dist(z.column(i), z.column(j)) * w[[i, j]];
        }
    }
    Ok(total)
}
