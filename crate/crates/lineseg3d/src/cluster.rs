//! Incremental merging of registered world-frame segments into clusters.
//!
//! Segments arrive in keyframe order. Each one joins the first existing
//! cluster (creation order) whose representative it matches under the angle
//! and distance gates, otherwise it founds a new cluster; every assignment
//! refits the representative from the cluster's endpoint set. Clusters
//! smaller than the size gate are dropped at the end.

use nalgebra::{Matrix3, Vector3};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geom::{Frame, LineSegment3D};

/// A merged group of segments with its fitted representative.
///
/// The representative inherits the first member's keyframe id and is tagged
/// `World`. `endpoints` holds both endpoints of every member, in arrival
/// order, so `endpoints.len() == 2 * members.len()`.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub representative: LineSegment3D,
    /// Arrival indices of the member segments.
    pub members: Vec<usize>,
    pub endpoints: Vec<Vector3<f64>>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Angle between two segments' directions in degrees. With `fold` the result
/// is reduced to [0, 90°], treating segments as undirected lines; without it
/// antiparallel segments measure 180°.
pub fn angle_measure(a: &LineSegment3D, b: &LineSegment3D, fold: bool) -> Result<f64> {
    let da = a.p2 - a.p1;
    let db = b.p2 - b.p1;
    let na = da.norm();
    let nb = db.norm();
    if na <= 0.0 || nb <= 0.0 {
        return Err(Error::Degenerate("zero-length segment in angle measure"));
    }
    let alpha = (db.dot(&da) / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees();
    Ok(if fold { alpha.min(180.0 - alpha) } else { alpha })
}

/// Distance of a candidate segment `b` from a representative `a`: for each
/// endpoint of `b`, the sum of its distances to both endpoints of `a` minus
/// the length of `a` (zero exactly when the endpoint lies on `a`), taking
/// the smaller of the two.
pub fn distance_measure(a: &LineSegment3D, b: &LineSegment3D) -> f64 {
    let len_a = (a.p2 - a.p1).norm();
    let excess = |p: &Vector3<f64>| (p - a.p1).norm() + (p - a.p2).norm() - len_a;
    // non-negative by the triangle inequality; clamp rounding dust
    excess(&b.p1).min(excess(&b.p2)).max(0.0)
}

/// Index of the first cluster (creation order) whose representative passes
/// both gates, or `None` to found a new cluster.
pub fn assign(
    segment: &LineSegment3D,
    clusters: &[Cluster],
    lambda_alpha: f64,
    lambda_d: f64,
    fold: bool,
) -> Option<usize> {
    clusters.iter().position(|c| {
        match angle_measure(&c.representative, segment, fold) {
            Ok(alpha) => {
                alpha < lambda_alpha && distance_measure(&c.representative, segment) < lambda_d
            }
            Err(_) => false,
        }
    })
}

/// Refit a representative over an endpoint set: direction from the principal
/// singular vector of the centered endpoints, line through their centroid,
/// endpoints at the furthest projections on either side of the centroid.
pub fn refit_endpoints(endpoints: &[Vector3<f64>]) -> Result<(Vector3<f64>, Vector3<f64>)> {
    if endpoints.len() < 2 {
        return Err(Error::Degenerate("refit needs at least 2 endpoints"));
    }
    let centroid: Vector3<f64> = endpoints.iter().sum::<Vector3<f64>>() / endpoints.len() as f64;
    let mut scatter = Matrix3::zeros();
    for p in endpoints {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    let eig = nalgebra::SymmetricEigen::new(scatter);
    let (mut max_i, mut max_v) = (0usize, f64::NEG_INFINITY);
    for i in 0..3 {
        if eig.eigenvalues[i] > max_v {
            max_v = eig.eigenvalues[i];
            max_i = i;
        }
    }
    if max_v <= 1e-18 {
        return Err(Error::Degenerate("all cluster endpoints coincide"));
    }
    let dir: Vector3<f64> = eig.eigenvectors.column(max_i).into();
    let mut t_min = f64::INFINITY;
    let mut t_max = f64::NEG_INFINITY;
    for p in endpoints {
        let t = (p - centroid).dot(&dir);
        t_min = t_min.min(t);
        t_max = t_max.max(t);
    }
    Ok((centroid + t_min * dir, centroid + t_max * dir))
}

/// Refit a cluster's representative from its endpoint set.
pub fn refit_cluster(cluster: &Cluster) -> Result<LineSegment3D> {
    let (p1, p2) = refit_endpoints(&cluster.endpoints)?;
    LineSegment3D::new(
        p1,
        p2,
        Frame::World,
        cluster.representative.keyframe,
    )
}

/// Cluster a stream of world-frame segments in arrival order and drop
/// clusters smaller than `lambda_c`. Strictly sequential: the greedy
/// first-match assignment is order-dependent by construction.
pub fn cluster_incremental(segments: &[LineSegment3D], cfg: &Config) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    for (id, seg) in segments.iter().enumerate() {
        if seg.length() <= 0.0 {
            continue;
        }
        match assign(seg, &clusters, cfg.lambda_alpha, cfg.lambda_d, cfg.fold_angle) {
            Some(i) => {
                let cluster = &mut clusters[i];
                cluster.members.push(id);
                cluster.endpoints.push(seg.p1);
                cluster.endpoints.push(seg.p2);
                if let Ok(rep) = refit_cluster(cluster) {
                    cluster.representative = rep;
                }
            }
            None => clusters.push(Cluster {
                representative: *seg,
                members: vec![id],
                endpoints: vec![seg.p1, seg.p2],
            }),
        }
    }
    clusters.retain(|c| c.size() >= cfg.lambda_c);
    clusters
}
