//! Planar total-least-squares line fitting and the local (D, Zf) frame used
//! to reduce 3D line fitting to two 2D problems.
//!
//! The image-plane line is fitted over pixel (x, y); the depth-plane line is
//! fitted over (D, Zf), where D is the distance from the chain's first pixel
//! to the pixel's projection on the axis p1->pn and Zf is the depth scaled by
//! the focal length so both coordinates share pixel-compatible units.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::geom::{CameraIntrinsics, Pixel};

/// 2D line in normal form `n . p = c`, with the RMS orthogonal residual of
/// the fit that produced it. The normal is unit length and its first nonzero
/// component is positive, so equal fits compare equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line2D {
    pub normal: Vector2<f64>,
    pub offset: f64,
    pub rms: f64,
}

impl Line2D {
    /// Orthogonal distance from a point to the line.
    #[inline]
    pub fn distance(&self, p: &Vector2<f64>) -> f64 {
        (self.normal.dot(p) - self.offset).abs()
    }

    /// Unit direction along the line (normal rotated by 90°).
    #[inline]
    pub fn direction(&self) -> Vector2<f64> {
        Vector2::new(-self.normal.y, self.normal.x)
    }
}

/// Orthogonal distance from a point to a line.
pub fn point_line_distance(p: &Vector2<f64>, line: &Line2D) -> f64 {
    line.distance(p)
}

/// Running second-moment accumulator for incremental TLS refits. Adding a
/// point and refitting are both O(1).
#[derive(Debug, Clone, Copy, Default)]
pub struct Scatter2 {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
}

impl Scatter2 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, p: Vector2<f64>) {
        self.n += 1.0;
        self.sx += p.x;
        self.sy += p.y;
        self.sxx += p.x * p.x;
        self.sxy += p.x * p.y;
        self.syy += p.y * p.y;
    }

    pub fn len(&self) -> usize {
        self.n as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0.0
    }

    /// TLS line through the accumulated points: the normal is the
    /// eigenvector of the smaller eigenvalue of the 2x2 covariance.
    pub fn fit(&self) -> Result<Line2D> {
        if self.n < 2.0 {
            return Err(Error::Degenerate("need at least 2 points for a line fit"));
        }
        let inv_n = 1.0 / self.n;
        let mx = self.sx * inv_n;
        let my = self.sy * inv_n;
        let a = self.sxx * inv_n - mx * mx;
        let b = self.sxy * inv_n - mx * my;
        let c = self.syy * inv_n - my * my;

        let half_trace = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let lambda_max = half_trace + disc;
        let lambda_min = (half_trace - disc).max(0.0);
        if lambda_max <= 1e-18 {
            return Err(Error::Degenerate("all points coincide"));
        }

        // Eigenvector of lambda_min; pick the formula with the larger norm to
        // stay away from cancellation.
        let v1 = Vector2::new(b, lambda_min - a);
        let v2 = Vector2::new(lambda_min - c, b);
        let v = if v1.norm_squared() >= v2.norm_squared() {
            v1
        } else {
            v2
        };
        let mut normal = if v.norm_squared() > 1e-30 {
            v.normalize()
        } else {
            // isotropic or axis-aligned covariance: eigenvectors are the axes
            if a <= c {
                Vector2::new(1.0, 0.0)
            } else {
                Vector2::new(0.0, 1.0)
            }
        };
        if normal.x < 0.0 || (normal.x == 0.0 && normal.y < 0.0) {
            normal = -normal;
        }
        Ok(Line2D {
            normal,
            offset: normal.dot(&Vector2::new(mx, my)),
            rms: lambda_min.sqrt(),
        })
    }
}

/// Total-least-squares 2D line fit: minimizes the total squared orthogonal
/// error over the point set.
pub fn tls_fit_line2d(points: &[Vector2<f64>]) -> Result<Line2D> {
    if points.len() < 2 {
        return Err(Error::Degenerate("need at least 2 points for a line fit"));
    }
    if points.iter().all(|p| p == &points[0]) {
        return Err(Error::Degenerate("all points coincide"));
    }
    let mut acc = Scatter2::new();
    for p in points {
        acc.push(*p);
    }
    acc.fit()
}

/// The local x-axis of the depth plane: anchored at the chain's first pixel,
/// directed toward its last pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub anchor: Vector2<f64>,
    pub dir: Vector2<f64>,
}

impl Axis {
    /// Axis parameter of an image position: signed distance of its projection
    /// from the anchor.
    #[inline]
    pub fn param(&self, pos: &Vector2<f64>) -> f64 {
        (pos - self.anchor).dot(&self.dir)
    }
}

/// Build the local frame axis from the endpoints of a chain.
pub fn build_local_frame(p1: &Pixel, pn: &Pixel) -> Result<Axis> {
    let a = p1.pos();
    let b = pn.pos();
    let d = b - a;
    let norm = d.norm();
    if norm <= 0.0 {
        return Err(Error::Degenerate("axis endpoints coincide"));
    }
    Ok(Axis {
        anchor: a,
        dir: d / norm,
    })
}

/// One pixel expressed in the depth plane: axis parameter and scaled depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSample {
    /// Distance from the axis anchor to the pixel's projection on the axis.
    pub d: f64,
    /// Depth multiplied by fx, making it commensurate with D.
    pub zf: f64,
}

impl FrameSample {
    #[inline]
    pub fn point(&self) -> Vector2<f64> {
        Vector2::new(self.d, self.zf)
    }
}

/// Depth-plane sample of a pixel, or `None` when the pixel carries no depth
/// (such pixels are treated as outliers by the fitter).
pub fn to_frame_sample(p: &Pixel, axis: &Axis, intrinsics: &CameraIntrinsics) -> Option<FrameSample> {
    p.depth.map(|z| FrameSample {
        d: axis.param(&p.pos()),
        zf: z * intrinsics.fx,
    })
}

/// Pair of fitted planar lines describing one 3D segment.
#[derive(Debug, Clone, Copy)]
pub struct PlanarFit {
    pub l_im: Line2D,
    pub l_depth: Line2D,
    pub axis: Axis,
}

impl PlanarFit {
    /// Image point on `l_im` whose axis parameter equals `d`: the intersection
    /// of l_im with the axis-normal line at parameter d.
    pub fn image_point_at(&self, d: f64) -> Result<Vector2<f64>> {
        let t = self.l_im.direction();
        let cos = t.dot(&self.axis.dir);
        if cos.abs() < 1e-9 {
            return Err(Error::Degenerate("image line perpendicular to chain axis"));
        }
        let q0 = self.l_im.offset * self.l_im.normal;
        let s = (d - (q0 - self.axis.anchor).dot(&self.axis.dir)) / cos;
        Ok(q0 + s * t)
    }

    /// Depth (meters) predicted by `l_depth` at axis parameter `d`. Fails when
    /// the depth line is vertical, i.e. depth is not a function of D.
    pub fn depth_at(&self, d: f64, intrinsics: &CameraIntrinsics) -> Result<f64> {
        let n = self.l_depth.normal;
        if n.y.abs() < 1e-9 {
            return Err(Error::Degenerate("depth line vertical: depth not a function of D"));
        }
        let zf = (self.l_depth.offset - n.x * d) / n.y;
        let z = zf / intrinsics.fx;
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::Degenerate("fitted depth not positive"));
        }
        Ok(z)
    }
}
