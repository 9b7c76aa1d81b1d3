//! Dense linear-algebra kernels.
//!
//! Everything here works on [`ndarray::Array2<f64>`] in the crate's standard
//! (row-major) layout. Feature matrices follow the samples-as-columns
//! convention: entry `(i, j)` is feature `i` of sample `j`.
//!
//! The symmetric eigensolver is a Householder tridiagonalisation followed by
//! implicit QL iterations. The generalized solver reduces `A v = λ M v` to a
//! standard symmetric problem with the Cholesky factor of `M`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Columns whose Euclidean norm falls below this are rejected by normalisation.
pub const NORM_EPS: f64 = 1e-12;
/// Relative Frobenius asymmetry tolerated by the symmetric routines.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Cholesky pivots must exceed this fraction of `trace / n`.
pub const PIVOT_FLOOR: f64 = 1e-12;
/// QL iterations allowed per eigenvalue before giving up.
pub const MAX_QL_ITERATIONS: usize = 100;
/// Covariance eigenvalues at or below `PCA_RANK_EPS * λ_max` count as zero variance.
pub const PCA_RANK_EPS: f64 = 1e-12;

/// A dense real matrix whose columns are samples and rows are features.
///
/// Requires at least one row and finite entries. A matrix may hold zero
/// samples, which is how an empty unlabelled pool is represented; operations
/// that need samples check for that themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::EmptyMatrix);
        }
        if let Some(((row, col), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { row, col });
        }
        Ok(Self { data })
    }

    /// An empty sample set with the given feature dimension.
    pub fn empty(rows: usize) -> Result<Self> {
        Self::new(Array2::zeros((rows, 0)))
    }

    /// Builds a matrix from per-sample feature vectors (one vector per column).
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let rows = samples.first().map_or(0, Vec::len);
        let mut data = Array2::zeros((rows, samples.len()));
        for (j, s) in samples.iter().enumerate() {
            if s.len() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "sample {j} has {} features, expected {rows}",
                    s.len()
                )));
            }
            for (i, &v) in s.iter().enumerate() {
                data[[i, j]] = v;
            }
        }
        Self::new(data)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.data.column(j)
    }

    /// Copies the listed samples, in order, into a new matrix.
    pub fn select_columns(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            data: self.data.select(Axis(1), indices),
        }
    }

    /// Concatenates the samples of `self` and `other`.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.rows() != other.rows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot stack {} and {} feature rows",
                self.rows(),
                other.rows()
            )));
        }
        let data = ndarray::concatenate(Axis(1), &[self.data.view(), other.data.view()])
            .expect("row counts checked");
        Ok(FeatureMatrix { data })
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: f64) -> Result<FeatureMatrix> {
        FeatureMatrix::new(&self.data * c)
    }
}

/// Eigenpairs sorted by descending eigenvalue; column `j` of `vectors`
/// belongs to `values[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

pub fn frobenius_norm(a: &ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_square(a: &ArrayView2<'_, f64>, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

/// Fails unless `‖A − Aᵀ‖_F ≤ 1e-10 · ‖A‖_F`.
pub fn check_symmetric(a: &ArrayView2<'_, f64>) -> Result<()> {
    let n = check_square(a, "matrix")?;
    let mut asym = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = a[[i, j]] - a[[j, i]];
            asym += 2.0 * d * d;
        }
    }
    let norm = frobenius_norm(a);
    let rel = if norm > 0.0 { asym.sqrt() / norm } else { 0.0 };
    if rel > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(rel));
    }
    Ok(())
}

/// Returns `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &Array2<f64>) -> Array2<f64> {
    let mut out = a.clone();
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[[i, j]] + a[[j, i]]);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}

/// Scales every column of `a` to unit Euclidean norm.
pub fn normalize_columns(a: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let mut out = a.to_owned();
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        let norm = col.dot(&col).sqrt();
        if !(norm >= NORM_EPS) {
            return Err(Error::ZeroColumn(j));
        }
        col.mapv_inplace(|v| v / norm);
    }
    Ok(out)
}

/// l2-normalises every sample of `m`.
pub fn l2_normalize_columns(m: &FeatureMatrix) -> Result<FeatureMatrix> {
    Ok(FeatureMatrix {
        data: normalize_columns(&m.view())?,
    })
}

/// Flips `v` so that its largest-magnitude entry is positive (first index wins ties).
pub fn fix_sign(mut v: ndarray::ArrayViewMut1<'_, f64>) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

/// Lower-triangular `L` with `L Lᵀ = M`.
pub fn cholesky(m: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = check_square(m, "matrix")?;
    check_symmetric(m)?;
    let trace: f64 = (0..n).map(|i| m[[i, i]]).sum();
    let floor = PIVOT_FLOOR * trace / n.max(1) as f64;
    if !(trace > 0.0) {
        return Err(Error::NotPositiveDefinite(0));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = m[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > floor) {
            return Err(Error::NotPositiveDefinite(j));
        }
        let pivot = diag.sqrt();
        l[[j, j]] = pivot;
        for i in (j + 1)..n {
            let mut s = m[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / pivot;
        }
    }
    Ok(l)
}

/// Solves `L X = B` for lower-triangular `L`.
fn solve_lower(l: &Array2<f64>, b: &ArrayView2<'_, f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut x = b.as_standard_layout().into_owned();
    for i in 0..n {
        let (done, mut rest) = x.view_mut().split_at(Axis(0), i);
        let mut row = rest.row_mut(0);
        for k in 0..i {
            row.scaled_add(-l[[i, k]], &done.row(k));
        }
        row /= l[[i, i]];
    }
    x
}

/// Solves `Lᵀ X = B` for lower-triangular `L`.
fn solve_lower_transpose(l: &Array2<f64>, b: &ArrayView2<'_, f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut x = b.as_standard_layout().into_owned();
    for i in (0..n).rev() {
        let (mut head, tail) = x.view_mut().split_at(Axis(0), i + 1);
        let mut row = head.row_mut(i);
        for k in (i + 1)..n {
            row.scaled_add(-l[[k, i]], &tail.row(k - i - 1));
        }
        row /= l[[i, i]];
    }
    x
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Values are sorted descending (stable with respect to solver order) and
/// every eigenvector is sign-fixed with [`fix_sign`].
pub fn sym_eig(m: &ArrayView2<'_, f64>) -> Result<EigenResult> {
    let n = check_square(m, "matrix")?;
    check_symmetric(m)?;
    if n == 0 {
        return Ok(EigenResult {
            values: vec![],
            vectors: Array2::zeros((0, 0)),
        });
    }
    let mut v: Vec<f64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            // lower triangle mirrored so tiny asymmetries cannot leak in
            v.push(if j <= i { m[[i, j]] } else { m[[j, i]] });
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    tridiagonal_ql(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[[i, dst]] = v[src * n + i];
        }
        fix_sign(vectors.column_mut(dst));
    }
    Ok(EigenResult { values, vectors })
}

/// Householder reduction to tridiagonal form. On exit `v` holds the
/// accumulated orthogonal transform, `d` the diagonal and `e[1..]` the
/// sub-diagonal. `v` is column-major here and in [`tridiagonal_ql`] so the
/// inner loops run over contiguous memory.
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| j * n + i;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..(n - 1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL iterations on the tridiagonal form produced by
/// [`tridiagonalize`]. Eigenvalues land in `d`, eigenvectors in the columns of `v`.
fn tridiagonal_ql(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let at = |i: usize, j: usize| j * n + i;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NoConvergence(MAX_QL_ITERATIONS));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[at(k, i + 1)];
                        v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                        v[at(k, i)] = c * v[at(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Top-`count` eigenpairs of the symmetric-definite pencil `A v = λ M v`.
///
/// Uses `M = L Lᵀ`, solves the standard problem for `L⁻¹ A L⁻ᵀ` and maps the
/// eigenvectors back with `v = L⁻ᵀ y`, so the returned vectors satisfy
/// `VᵀMV = I`.
pub fn generalized_sym_eig(
    a: &ArrayView2<'_, f64>,
    m: &ArrayView2<'_, f64>,
    count: usize,
) -> Result<EigenResult> {
    let n = check_square(a, "A")?;
    if check_square(m, "M")? != n {
        return Err(Error::DimensionMismatch(format!(
            "pencil matrices are {n}x{n} and {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if count == 0 || count > n {
        return Err(Error::InvalidConfig(format!(
            "requested {count} eigenpairs from a problem of size {n}"
        )));
    }
    check_symmetric(a)?;
    let l = cholesky(m)?;
    // C = L⁻¹ A L⁻ᵀ; A symmetric means (L⁻¹A)ᵀ = A L⁻ᵀ.
    let left = solve_lower(&l, a);
    let reduced = solve_lower(&l, &left.t());
    let reduced = symmetrize(&reduced);
    let standard = sym_eig(&reduced.view())?;

    let top = standard.vectors.slice(ndarray::s![.., ..count]);
    let mut vectors = solve_lower_transpose(&l, &top);
    for col in vectors.axis_iter_mut(Axis(1)) {
        fix_sign(col);
    }
    Ok(EigenResult {
        values: standard.values[..count].to_vec(),
        vectors,
    })
}

/// Mean vector and leading principal directions of a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `input_dim × k`, orthonormal columns ordered by explained variance.
    pub components: Array2<f64>,
    /// Sample variance (`n − 1` denominator) along each component.
    pub explained_variance: Vec<f64>,
    /// Number of components the caller asked for; larger than
    /// `components.ncols()` when the data had too few variance directions.
    pub requested: usize,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.ncols()
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.n_components() < self.requested
    }
}

/// Fits a PCA model keeping `k` components.
///
/// When there are fewer samples than features the eigenproblem is solved on
/// the `n × n` Gram matrix instead of the covariance. If fewer than `k`
/// directions have positive variance the model keeps the ones that do and
/// reports it through [`PcaModel::is_rank_deficient`].
pub fn pca_fit(m: &FeatureMatrix, k: usize) -> Result<PcaModel> {
    let (dim, n) = (m.rows(), m.cols());
    if k == 0 || n < 2 || k > dim.min(n - 1) {
        return Err(Error::InvalidConfig(format!(
            "{k} principal components requested from {dim} features and {n} samples"
        )));
    }
    let mean = m.view().mean_axis(Axis(1)).expect("n >= 2");
    let centered = &m.view() - &mean.view().insert_axis(Axis(1));
    let denom = (n - 1) as f64;

    let (variances, mut directions) = if dim <= n {
        let cov = symmetrize(&(centered.dot(&centered.t()) / denom));
        let eig = sym_eig(&cov.view())?;
        (eig.values, eig.vectors)
    } else {
        let gram = symmetrize(&(centered.t().dot(&centered) / denom));
        let eig = sym_eig(&gram.view())?;
        let lifted = centered.dot(&eig.vectors);
        (eig.values, lifted)
    };

    let top = variances.first().copied().unwrap_or(0.0);
    let available = variances
        .iter()
        .take_while(|&&v| top > 0.0 && v > PCA_RANK_EPS * top)
        .count()
        .min(k);
    if available == 0 {
        return Err(Error::RankDeficient {
            requested: k,
            available: 0,
        });
    }
    directions = directions.slice(ndarray::s![.., ..available]).to_owned();
    if dim > n {
        directions = normalize_columns(&directions.view())?;
    }
    for col in directions.axis_iter_mut(Axis(1)) {
        fix_sign(col);
    }
    Ok(PcaModel {
        mean,
        components: directions,
        explained_variance: variances[..available].to_vec(),
        requested: k,
    })
}

/// Centres `m` with the model mean and projects it onto the components.
pub fn pca_transform(model: &PcaModel, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    if m.rows() != model.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "PCA model expects {} features, got {}",
            model.input_dim(),
            m.rows()
        )));
    }
    let centered = &m.view() - &model.mean.view().insert_axis(Axis(1));
    FeatureMatrix::new(model.components.t().dot(&centered))
}
