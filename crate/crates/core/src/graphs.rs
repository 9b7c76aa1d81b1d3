//! Class-consistency graphs and the Laplacian-like matrices built from them.
//!
//! All graphs are binary: two samples are joined iff they carry the same
//! label. The within-domain graphs have a unit diagonal; the self edge adds
//! the same amount to the degree and to the adjacency, so the Laplacians do
//! not depend on it.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSet {
    /// `n_s × n_s` source similarity.
    pub ws: Array2<f64>,
    /// `n_t × n_t` target similarity.
    pub wt: Array2<f64>,
    /// `n_s × n_t` cross-domain similarity.
    pub wc: Array2<f64>,
    /// `D^s − W^s + ½ D^{cs}`.
    pub ls: Array2<f64>,
    /// `D^t − W^t + ½ D^{ct}`.
    pub lt: Array2<f64>,
}

impl GraphSet {
    pub fn from_labels(
        source_labels: &[usize],
        target_labels: &[usize],
        num_classes: usize,
    ) -> Result<Self> {
        let ws = build_within_similarity(source_labels, num_classes)?;
        let wt = build_within_similarity(target_labels, num_classes)?;
        let wc = build_cross_similarity(source_labels, target_labels)?;
        let (ls, lt) = build_laplacians(&ws, &wt, &wc)?;
        Ok(Self { ws, wt, wc, ls, lt })
    }

    pub fn n_source(&self) -> usize {
        self.ws.nrows()
    }

    pub fn n_target(&self) -> usize {
        self.wt.nrows()
    }
}

pub fn check_labels(labels: &[usize], num_classes: usize) -> Result<()> {
    match labels.iter().position(|&l| l >= num_classes) {
        Some(index) => Err(Error::LabelOutOfRange {
            index,
            label: labels[index],
            classes: num_classes,
        }),
        None => Ok(()),
    }
}

/// `out[i][j] = 1` iff `labels[i] == labels[j]`.
pub fn build_within_similarity(labels: &[usize], num_classes: usize) -> Result<Array2<f64>> {
    check_labels(labels, num_classes)?;
    let n = labels.len();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        f64::from(labels[i] == labels[j])
    }))
}

/// `out[i][j] = 1` iff `source[i] == target[j]`.
pub fn build_cross_similarity(source: &[usize], target: &[usize]) -> Result<Array2<f64>> {
    Ok(Array2::from_shape_fn(
        (source.len(), target.len()),
        |(i, j)| f64::from(source[i] == target[j]),
    ))
}

/// Returns `(L^s, L^t)`.
pub fn build_laplacians(
    ws: &Array2<f64>,
    wt: &Array2<f64>,
    wc: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let (ns, nt) = (ws.nrows(), wt.nrows());
    if ws.ncols() != ns || wt.ncols() != nt || wc.dim() != (ns, nt) {
        return Err(Error::DimensionMismatch(format!(
            "graphs W^s {:?}, W^t {:?}, W^c {:?} are inconsistent",
            ws.dim(),
            wt.dim(),
            wc.dim()
        )));
    }
    let cross_source: Array1<f64> = wc.sum_axis(ndarray::Axis(1));
    let cross_target: Array1<f64> = wc.sum_axis(ndarray::Axis(0));
    Ok((laplacian(ws, &cross_source), laplacian(wt, &cross_target)))
}

fn laplacian(w: &Array2<f64>, cross_degree: &Array1<f64>) -> Array2<f64> {
    let degree = w.sum_axis(ndarray::Axis(1));
    let mut l = -w;
    for i in 0..w.nrows() {
        l[[i, i]] += degree[i] + 0.5 * cross_degree[i];
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn within_examples() {
        assert_eq!(
            build_within_similarity(&[0, 0, 1], 2).unwrap(),
            array![[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        );
        assert_eq!(
            build_within_similarity(&[2, 2, 2], 3).unwrap(),
            Array2::from_elem((3, 3), 1.0)
        );
        assert_eq!(
            build_within_similarity(&[0, 1, 2], 3).unwrap(),
            Array2::<f64>::eye(3)
        );
        assert!(matches!(
            build_within_similarity(&[0, 3], 3),
            Err(Error::LabelOutOfRange {
                index: 1,
                label: 3,
                classes: 3
            })
        ));
    }

    #[test]
    fn cross_examples() {
        assert_eq!(
            build_cross_similarity(&[0, 1], &[0]).unwrap(),
            array![[1.0], [0.0]]
        );
        assert_eq!(
            build_cross_similarity(&[0, 1], &[2, 3]).unwrap(),
            Array2::<f64>::zeros((2, 2))
        );
        assert_eq!(
            build_cross_similarity(&[0, 1, 0], &[0, 1]).unwrap(),
            array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]
        );
    }

    #[test]
    fn laplacian_hand_values() {
        let ws = array![[1.0, 1.0], [1.0, 1.0]];
        let wt = array![[1.0]];
        let wc = array![[1.0], [0.0]];
        let (ls, lt) = build_laplacians(&ws, &wt, &wc).unwrap();
        assert_eq!(ls, array![[1.5, -1.0], [-1.0, 1.0]]);
        assert_eq!(lt, array![[0.5]]);
    }

    #[test]
    fn laplacian_without_cross_edges_is_standard() {
        let ws = build_within_similarity(&[0, 1, 0, 1], 2).unwrap();
        let wt = build_within_similarity(&[2], 3).unwrap();
        let wc = Array2::zeros((4, 1));
        let (ls, _) = build_laplacians(&ws, &wt, &wc).unwrap();
        let degree = ws.sum_axis(ndarray::Axis(1));
        assert_eq!(ls, Array2::from_diag(&degree) - &ws);
    }

    #[test]
    fn laplacian_shape_mismatch() {
        let ws = Array2::eye(2);
        let wt = Array2::eye(3);
        assert!(matches!(
            build_laplacians(&ws, &wt, &Array2::zeros((3, 2))),
            Err(Error::DimensionMismatch(_))
        ));
    }

    fn labels(max_len: usize) -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(0usize..4, 1..max_len)
    }

    proptest! {
        #[test]
        fn laplacian_row_sums_and_psd(src in labels(12), tgt in labels(8)) {
            let g = GraphSet::from_labels(&src, &tgt, 4).unwrap();
            let cross = g.wc.sum_axis(ndarray::Axis(1));
            for i in 0..src.len() {
                let row: f64 = g.ls.row(i).sum();
                prop_assert!((row - 0.5 * cross[i]).abs() < 1e-12);
            }
            for l in [&g.ls, &g.lt] {
                prop_assert_eq!(l, &l.t().to_owned());
                let eig = sym_eig(&l.view()).unwrap();
                prop_assert!(*eig.values.last().unwrap() >= -1e-10);
            }
        }

        #[test]
        fn within_similarity_relabel_invariant(src in labels(10), shift in 1usize..4) {
            let relabeled: Vec<usize> = src.iter().map(|l| (l + shift) % 4).collect();
            prop_assert_eq!(
                build_within_similarity(&src, 4).unwrap(),
                build_within_similarity(&relabeled, 4).unwrap()
            );
        }

        #[test]
        fn permuting_samples_conjugates_graphs(src in labels(10), tgt in labels(8), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut perm: Vec<usize> = (0..src.len()).collect();
            perm.shuffle(&mut rng);
            let permuted: Vec<usize> = perm.iter().map(|&p| src[p]).collect();
            let g = GraphSet::from_labels(&src, &tgt, 4).unwrap();
            let h = GraphSet::from_labels(&permuted, &tgt, 4).unwrap();
            for i in 0..src.len() {
                for j in 0..src.len() {
                    prop_assert_eq!(h.ws[[i, j]], g.ws[[perm[i], perm[j]]]);
                    prop_assert_eq!(h.ls[[i, j]], g.ls[[perm[i], perm[j]]]);
                }
                for j in 0..tgt.len() {
                    prop_assert_eq!(h.wc[[i, j]], g.wc[[perm[i], j]]);
                }
            }
            prop_assert_eq!(h.lt, g.lt);
        }
    }
}
