//! Reconstruction evaluation: Sim(3) alignment against a ground-truth scan
//! and the distance / compactness / timing metrics.

mod kdtree;

pub use kdtree::KdTree;

use std::time::Instant;

use nalgebra::{Matrix3, Vector3};

use crate::cluster::Cluster;
use crate::config::ResolvedConfig;
use crate::error::{Error, Result};
use crate::fitter;
use crate::geom::{CameraIntrinsics, EdgeSegment, LineSegment3D, Pose, Sim3};

/// Ground-truth point cloud with a spatial index for nearest-neighbor queries.
#[derive(Debug, Clone)]
pub struct PointCloud {
    tree: KdTree,
}

impl PointCloud {
    pub fn from_points(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
            return Err(Error::Input("point cloud contains non-finite points".into()));
        }
        Ok(Self {
            tree: KdTree::build(points),
        })
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        self.tree.points()
    }

    /// Distance to the nearest cloud point.
    pub fn nearest_distance(&self, q: &Vector3<f64>) -> Option<f64> {
        self.tree.nearest(q).map(|(_, d)| d)
    }

    pub fn nearest_within(&self, q: &Vector3<f64>, radius: f64) -> Option<(usize, f64)> {
        self.tree.nearest_within(q, radius)
    }

    /// Median nearest-neighbor spacing, estimated on up to 2000 points.
    pub fn median_nn_spacing(&self) -> Option<f64> {
        let pts = self.points();
        if pts.len() < 2 {
            return None;
        }
        let stride = (pts.len() / 2000).max(1);
        let mut spacings: Vec<f64> = pts
            .iter()
            .enumerate()
            .step_by(stride)
            .filter_map(|(i, p)| self.tree.nearest_excluding(p, i).map(|(_, d)| d))
            .collect();
        if spacings.is_empty() {
            return None;
        }
        spacings.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(spacings[spacings.len() / 2])
    }
}

/// Closed-form least-squares similarity transform between paired point sets:
/// minimizes sum |dst_i - (s R src_i + t)|^2.
pub fn umeyama_sim3(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<Sim3> {
    if src.len() != dst.len() {
        return Err(Error::Alignment("point sets differ in size".into()));
    }
    let n = src.len();
    if n < 3 {
        return Err(Error::Alignment("need at least 3 point pairs".into()));
    }
    let inv_n = 1.0 / n as f64;
    let mu_src: Vector3<f64> = src.iter().sum::<Vector3<f64>>() * inv_n;
    let mu_dst: Vector3<f64> = dst.iter().sum::<Vector3<f64>>() * inv_n;

    let mut cov = Matrix3::<f64>::zeros();
    let mut var_src = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let sc = s - mu_src;
        let dc = d - mu_dst;
        cov += dc * sc.transpose();
        var_src += sc.norm_squared();
    }
    cov *= inv_n;
    var_src *= inv_n;
    if var_src <= 1e-18 {
        return Err(Error::Alignment("source points are coincident".into()));
    }

    let svd = nalgebra::SVD::new(cov, true, true);
    let u = svd.u.ok_or_else(|| Error::Alignment("SVD failed".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Alignment("SVD failed".into()))?;
    // degenerate (collinear) configurations leave the rotation under-determined
    let sv = svd.singular_values;
    if sv[1] <= 1e-12 * sv[0].max(1.0) {
        return Err(Error::Alignment(
            "degenerate (collinear) point configuration".into(),
        ));
    }
    let mut s_diag = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        s_diag.z = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&s_diag) * v_t;
    let scale = (sv.component_mul(&s_diag)).sum() / var_src;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Alignment("non-positive similarity scale".into()));
    }
    let translation = mu_dst - scale * (rotation * mu_src);
    Sim3::new(scale, rotation, translation).map_err(|e| Error::Alignment(e.to_string()))
}

/// ICP iteration trace.
#[derive(Debug, Clone)]
pub struct IcpResult {
    pub transform: Sim3,
    /// RMS of matched correspondences after each iteration's update.
    pub rms_history: Vec<f64>,
    pub iterations: usize,
}

/// Iterative closest point with a similarity transform model: alternate
/// nearest-neighbor correspondence (with a rejection radius of 5x the target
/// cloud's median spacing) and the closed-form Umeyama update, until the RMS
/// improves by less than `tol` or `max_iters` is reached.
pub fn icp_sim3(
    src: &[Vector3<f64>],
    dst: &PointCloud,
    init: &Sim3,
    max_iters: usize,
    tol: f64,
) -> Result<IcpResult> {
    if src.is_empty() || dst.is_empty() {
        return Err(Error::Alignment("empty cloud".into()));
    }
    let spacing = dst.median_nn_spacing().unwrap_or(f64::INFINITY);
    let radius = if spacing.is_finite() {
        (5.0 * spacing).max(1e-9)
    } else {
        f64::INFINITY
    };
    let mut transform = *init;
    let mut rms_history = Vec::new();
    let mut prev_rms = f64::INFINITY;
    for iter in 0..max_iters {
        let mut pairs_src = Vec::new();
        let mut pairs_dst = Vec::new();
        for p in src {
            let moved = transform.apply(p);
            if let Some((j, _)) = dst.nearest_within(&moved, radius) {
                pairs_src.push(*p);
                pairs_dst.push(dst.points()[j]);
            }
        }
        if pairs_src.len() < 3 {
            return Err(Error::Alignment(format!(
                "only {} correspondences within rejection radius {radius:.4}",
                pairs_src.len()
            )));
        }
        transform = umeyama_sim3(&pairs_src, &pairs_dst)?;
        let rms = (pairs_src
            .iter()
            .zip(&pairs_dst)
            .map(|(s, d)| (transform.apply(s) - d).norm_squared())
            .sum::<f64>()
            / pairs_src.len() as f64)
            .sqrt();
        rms_history.push(rms);
        if (prev_rms - rms).abs() < tol {
            return Ok(IcpResult {
                transform,
                rms_history,
                iterations: iter + 1,
            });
        }
        prev_rms = rms;
    }
    Ok(IcpResult {
        transform,
        rms_history,
        iterations: max_iters,
    })
}

/// Mean distance (millimeters) from aligned segment endpoints to their
/// nearest ground-truth point.
pub fn mean_vertex_distance(
    segments: &[LineSegment3D],
    gt: &PointCloud,
    align: &Sim3,
) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::Input("empty ground-truth cloud".into()));
    }
    if segments.is_empty() {
        return Err(Error::Input("no segments to evaluate".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for seg in segments {
        for p in [&seg.p1, &seg.p2] {
            let aligned = align.apply(p);
            sum += gt.nearest_distance(&aligned).expect("non-empty cloud");
            count += 1;
        }
    }
    Ok(sum / count as f64 * 1000.0)
}

/// A reconstruction whose vertices can be counted.
#[derive(Debug, Clone, Copy)]
pub enum Reconstruction<'a> {
    Cloud(&'a PointCloud),
    Segments(&'a [LineSegment3D]),
    Clusters(&'a [Cluster]),
}

/// Vertex count: cloud points, or two endpoints per segment/cluster.
pub fn count_vertices(r: Reconstruction<'_>) -> usize {
    match r {
        Reconstruction::Cloud(c) => c.len(),
        Reconstruction::Segments(s) => 2 * s.len(),
        Reconstruction::Clusters(c) => 2 * c.len(),
    }
}

/// Run the edge-aided fitter on one keyframe's chains and report the
/// wall-clock fitting time in milliseconds (chains are assumed already
/// detected; I/O and edge detection are excluded by construction).
pub fn time_keyframe_fit(
    chains: &[EdgeSegment],
    cfg: &ResolvedConfig,
    intr: &CameraIntrinsics,
    pose: &Pose,
) -> (Vec<LineSegment3D>, f64) {
    let start = Instant::now();
    let segments = fitter::fit_keyframe(chains, cfg, intr, pose);
    (segments, start.elapsed().as_secs_f64() * 1000.0)
}

/// Metrics for one method on one scene.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub method: String,
    /// Mean endpoint-to-cloud distance in millimeters, when ground truth was
    /// available.
    pub mean_distance_mm: Option<f64>,
    pub vertex_count: usize,
    /// Per-keyframe fitting time in milliseconds.
    pub per_keyframe_ms: Vec<f64>,
}

impl EvalReport {
    pub fn mean_fit_ms(&self) -> Option<f64> {
        if self.per_keyframe_ms.is_empty() {
            None
        } else {
            Some(self.per_keyframe_ms.iter().sum::<f64>() / self.per_keyframe_ms.len() as f64)
        }
    }

    pub fn to_text(&self) -> String {
        let dist = self
            .mean_distance_mm
            .map_or("n/a".to_string(), |d| format!("{d:.3} mm"));
        let ms = self
            .mean_fit_ms()
            .map_or("n/a".to_string(), |t| format!("{t:.3} ms"));
        format!(
            "method {}: mean vertex distance {}, vertices {}, mean fit time {} over {} keyframes",
            self.method,
            dist,
            self.vertex_count,
            ms,
            self.per_keyframe_ms.len()
        )
    }

    pub fn csv_header() -> &'static str {
        "method,mean_distance_mm,vertex_count,mean_fit_ms,keyframes"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.method,
            self.mean_distance_mm
                .map_or("".into(), |d| format!("{d:.6}")),
            self.vertex_count,
            self.mean_fit_ms().map_or("".into(), |t| format!("{t:.6}")),
            self.per_keyframe_ms.len()
        )
    }
}
