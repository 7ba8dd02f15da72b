use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use thiserror::Error;

use crate::scalar::Real;
use crate::spatial::GridIndex;

/// Surface point with a unit normal facing the camera (`normal · position < 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedPoint<T: Real> {
    pub position: Vector3<T>,
    pub normal: Vector3<T>,
    /// Index of the source point in the cloud.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalError {
    #[error("need at least k = {k} points, got {n}")]
    TooFewPoints { k: usize, n: usize },
    #[error("k must be at least 3, got {0}")]
    KTooSmall(usize),
}

/// Grid cell side used for neighbor search (meters).
pub const NEIGHBOR_CELL: f64 = 0.004;

/// Per-point plane fit over the `k` nearest neighbors (the point included).
///
/// The normal is the eigenvector of the smallest eigenvalue of the neighborhood
/// scatter, flipped toward the camera at the origin. Neighborhoods whose
/// middle eigenvalue is negligible (collinear or coincident points), or whose
/// normal is exactly perpendicular to the view ray, yield `None`.
pub fn estimate_normals<T: Real>(
    points: &[Vector3<T>],
    k: usize,
) -> Result<Vec<Option<Vector3<T>>>, NormalError> {
    if k < 3 {
        return Err(NormalError::KTooSmall(k));
    }
    if points.len() < k {
        return Err(NormalError::TooFewPoints { k, n: points.len() });
    }
    let grid = GridIndex::new(points, T::lit(NEIGHBOR_CELL));
    Ok(grid.map_knn(k, |i, nbrs| {
        fit_normal(points, nbrs).and_then(|n| orient_toward_origin(n, &points[i]))
    }))
}

fn fit_normal<T: Real>(points: &[Vector3<T>], nbrs: &[usize]) -> Option<Vector3<T>> {
    let inv = T::one() / T::lit(nbrs.len() as f64);
    let centroid = nbrs.iter().fold(Vector3::zeros(), |acc, &i| acc + points[i]) * inv;
    let mut cov = Matrix3::zeros();
    for &i in nbrs {
        let d = points[i] - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov * inv);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let (smallest, middle, largest) = (order[0], eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if largest <= T::zero() || middle <= largest * T::lit(1e-6) {
        return None;
    }
    let n = eig.eigenvectors.column(smallest).into_owned();
    let norm = n.norm();
    (norm > T::zero()).then(|| n / norm)
}

fn orient_toward_origin<T: Real>(n: Vector3<T>, p: &Vector3<T>) -> Option<Vector3<T>> {
    let d = n.dot(p);
    if d < T::zero() {
        Some(n)
    } else if d > T::zero() {
        Some(-n)
    } else {
        None
    }
}

/// Points with valid normals, in cloud order.
pub fn oriented_points<T: Real>(
    points: &[Vector3<T>],
    normals: &[Option<Vector3<T>>],
    subset: impl IntoIterator<Item = usize>,
) -> Vec<OrientedPoint<T>> {
    subset
        .into_iter()
        .filter_map(|i| {
            normals[i].map(|normal| OrientedPoint {
                position: points[i],
                normal,
                index: i,
            })
        })
        .collect()
}
