use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{ordered_sum, Real};
use crate::spatial::KdTree;

/// Neighbourhood size for PCA normals.
pub const DEFAULT_K_NORMALS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconMetrics<T> {
    pub acc: T,
    pub comp: T,
    pub nc: T,
}

/// Mean distance from each query point to its nearest neighbour in `tree`.
fn mean_nn_distance<T: Real>(queries: &[Vector3<T>], tree: &KdTree<'_, T>) -> T {
    let d: Vec<T> = queries.par_iter().map(|q| tree.nearest(q).expect("non-empty tree").1.sqrt()).collect();
    ordered_sum(d) / T::from_count(queries.len())
}

/// PCA normal per point from its `k` nearest neighbours (itself included), facing the origin.
pub fn estimate_normals<T: Real>(points: &[Vector3<T>], tree: &KdTree<'_, T>, k: usize) -> Vec<Vector3<T>> {
    points
        .par_iter()
        .map(|p| {
            let nb = tree.k_nearest(p, k);
            let kk = T::from_count(nb.len());
            let mean = nb.iter().fold(Vector3::zeros(), |a, &(i, _)| a + points[i]) / kk;
            let mut cov = Matrix3::zeros();
            for &(i, _) in &nb {
                let d = points[i] - mean;
                cov += d * d.transpose();
            }
            let eig = cov.symmetric_eigen();
            let n = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
            if n.dot(p) > T::zero() {
                -n
            } else {
                n
            }
        })
        .collect()
}

/// Accuracy, completeness and normal consistency of two aligned point clouds.
pub fn recon_metrics<T: Real>(pred: &[Vector3<T>], gt: &[Vector3<T>], k_normals: usize) -> Result<ReconMetrics<T>> {
    let needed = k_normals + 1;
    for len in [pred.len(), gt.len()] {
        if len < needed {
            return Err(Error::InsufficientPoints { needed, got: len });
        }
    }
    let (pt, gtree) = (KdTree::new(pred), KdTree::new(gt));
    let acc = mean_nn_distance(pred, &gtree);
    let comp = mean_nn_distance(gt, &pt);
    let (pn, gn) = (estimate_normals(pred, &pt, k_normals), estimate_normals(gt, &gtree, k_normals));
    let dots: Vec<T> = (0..pred.len())
        .into_par_iter()
        .filter_map(|i| {
            let j = gtree.nearest(&pred[i])?.0;
            let back = pt.nearest(&gt[j])?.0;
            (back == i).then(|| pn[i].dot(&gn[j]).abs())
        })
        .collect();
    let nc = if dots.is_empty() { T::zero() } else { ordered_sum(dots.iter().copied()) / T::from_count(dots.len()) };
    Ok(ReconMetrics { acc, comp, nc })
}
