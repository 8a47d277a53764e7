//! Shared geometric vocabulary: pixels, edge chains, images, camera models,
//! rigid and similarity transforms, and 3D line segments.
//!
//! All types are immutable value types and safe to share across workers.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector2, Vector3};

use crate::error::{Error, Result};

/// Integer image location with an optional depth measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    /// Column, 0-based.
    pub x: u32,
    /// Row, 0-based.
    pub y: u32,
    /// Depth in meters; `None` where the semi-dense map has no value.
    pub depth: Option<f64>,
}

impl Pixel {
    pub fn new(x: u32, y: u32) -> Self {
        Self { x, y, depth: None }
    }

    pub fn with_depth(x: u32, y: u32, depth: f64) -> Self {
        Self {
            x,
            y,
            depth: Some(depth),
        }
    }

    /// Image position as a real vector.
    pub fn pos(&self) -> Vector2<f64> {
        Vector2::new(self.x as f64, self.y as f64)
    }
}

/// Ordered one-pixel-wide chain of 8-connected edge pixels from one keyframe.
#[derive(Debug, Clone, Default)]
pub struct EdgeSegment {
    pub pixels: Vec<Pixel>,
    pub keyframe: u32,
}

impl EdgeSegment {
    pub fn new(pixels: Vec<Pixel>, keyframe: u32) -> Self {
        Self { pixels, keyframe }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Check the chain invariants: non-empty, consecutive pixels 8-connected
    /// (Chebyshev distance exactly 1), no repeated pixel, depths positive.
    pub fn validate(&self) -> Result<()> {
        if self.pixels.is_empty() {
            return Err(Error::Degenerate("empty edge segment"));
        }
        let mut seen = std::collections::HashSet::with_capacity(self.pixels.len());
        for pair in self.pixels.windows(2) {
            let dx = (pair[0].x as i64 - pair[1].x as i64).abs();
            let dy = (pair[0].y as i64 - pair[1].y as i64).abs();
            if dx.max(dy) != 1 {
                return Err(Error::Degenerate("chain pixels not 8-connected"));
            }
        }
        for p in &self.pixels {
            if !seen.insert((p.x, p.y)) {
                return Err(Error::Degenerate("repeated pixel in chain"));
            }
            if let Some(z) = p.depth {
                if !(z.is_finite() && z > 0.0) {
                    return Err(Error::Degenerate("non-positive depth on chain pixel"));
                }
            }
        }
        Ok(())
    }
}

/// 8-bit grayscale image in row-major order.
#[derive(Debug, Clone)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; (width * height) as usize],
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != (width as usize) * (height as usize) {
            return Err(Error::Input(format!(
                "image buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Convert interleaved RGB8 by the luminance weights 0.299/0.587/0.114, rounded.
    pub fn from_rgb(width: u32, height: u32, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != (width as usize) * (height as usize) * 3 {
            return Err(Error::Input("rgb buffer length mismatch".into()));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|px| {
                (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64).round() as u8
            })
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.data[(y * self.width + x) as usize] = v;
    }
}

/// Sparse depth image; 0.0 (or any non-positive value) encodes "no depth here".
#[derive(Debug, Clone)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; (width * height) as usize],
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        if data.len() != (width as usize) * (height as usize) {
            return Err(Error::Input("depth buffer length mismatch".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Depth at (x, y) if a positive finite value is stored there.
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Option<f64> {
        let v = self.data[(y * self.width + x) as usize];
        (v.is_finite() && v > 0.0).then_some(v)
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, depth: f64) {
        self.data[(y * self.width + x) as usize] = depth;
    }

    #[inline]
    pub fn clear(&mut self, x: u32, y: u32) {
        self.data[(y * self.width + x) as usize] = 0.0;
    }

    /// Number of pixels carrying a depth value.
    pub fn coverage(&self) -> usize {
        self.data.iter().filter(|v| **v > 0.0).count()
    }
}

/// Pinhole camera intrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Config("focal lengths must be positive".into()));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return Err(Error::Config("cx outside image".into()));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(Error::Config("cy outside image".into()));
        }
        Ok(())
    }

    /// Project a camera-frame point with positive depth onto the image plane.
    pub fn project(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        if p.z <= 0.0 {
            return None;
        }
        Some(Vector2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Invert the pinhole projection at an image position with known depth.
    pub fn backproject(&self, pos: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (pos.x - self.cx) * depth / self.fx,
            (pos.y - self.cy) * depth / self.fy,
            depth,
        )
    }

    /// Backproject a pixel carrying a depth value.
    pub fn backproject_pixel(&self, p: &Pixel) -> Result<Vector3<f64>> {
        let depth = p.depth.ok_or(Error::Degenerate("pixel has no depth"))?;
        Ok(self.backproject(&p.pos(), depth))
    }
}

const ROTATION_TOL: f64 = 1e-6;

fn rotation_is_valid(r: &Matrix3<f64>) -> bool {
    let rtr = r.transpose() * r;
    (rtr - Matrix3::identity()).norm() < ROTATION_TOL && (r.determinant() - 1.0).abs() < ROTATION_TOL
}

/// Rigid transform, world-from-camera convention: `p_world = R * p_cam + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation_is_valid(&rotation) {
            return Err(Error::Degenerate("rotation not orthonormal with det +1"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Build from a (possibly unnormalized) quaternion given as x, y, z, w.
    pub fn from_quaternion(t: Vector3<f64>, qx: f64, qy: f64, qz: f64, qw: f64) -> Result<Self> {
        let q = Quaternion::new(qw, qx, qy, qz);
        if q.norm() < 1e-12 {
            return Err(Error::Degenerate("zero quaternion"));
        }
        let rotation = UnitQuaternion::from_quaternion(q).to_rotation_matrix();
        Ok(Self {
            rotation: *rotation.matrix(),
            translation: t,
        })
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Composition: `(self * other)(p) = self(other(p))`.
    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn is_valid(&self) -> bool {
        rotation_is_valid(&self.rotation) && self.translation.iter().all(|v| v.is_finite())
    }
}

/// Similarity transform (uniform scale, rotation, translation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sim3 {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Sim3 {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Degenerate("similarity scale must be positive"));
        }
        if !rotation_is_valid(&rotation) {
            return Err(Error::Degenerate("rotation not orthonormal with det +1"));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        let s = 1.0 / self.scale;
        Self {
            scale: s,
            rotation: rt,
            translation: -(s * (rt * self.translation)),
        }
    }

    pub fn compose(&self, other: &Sim3) -> Self {
        Self {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }
}

/// Coordinate frame a 3D segment lives in. `Camera` refers to the segment's
/// own keyframe id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Camera,
    World,
    Aligned,
}

impl Frame {
    pub fn as_str(&self) -> &'static str {
        match self {
            Frame::Camera => "camera",
            Frame::World => "world",
            Frame::Aligned => "aligned",
        }
    }
}

/// 3D line segment with provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment3D {
    pub p1: Vector3<f64>,
    pub p2: Vector3<f64>,
    pub frame: Frame,
    pub keyframe: u32,
}

impl LineSegment3D {
    /// Build a segment; fails on coincident endpoints.
    pub fn new(p1: Vector3<f64>, p2: Vector3<f64>, frame: Frame, keyframe: u32) -> Result<Self> {
        if (p2 - p1).norm() <= 0.0 {
            return Err(Error::Degenerate("zero-length 3D segment"));
        }
        Ok(Self {
            p1,
            p2,
            frame,
            keyframe,
        })
    }

    pub fn length(&self) -> f64 {
        (self.p2 - self.p1).norm()
    }

    pub fn direction(&self) -> Vector3<f64> {
        (self.p2 - self.p1).normalize()
    }

    pub fn midpoint(&self) -> Vector3<f64> {
        0.5 * (self.p1 + self.p2)
    }

    /// Map both endpoints by a rigid pose; the result is tagged `World`.
    pub fn transformed(&self, pose: &Pose) -> Self {
        Self {
            p1: pose.transform_point(&self.p1),
            p2: pose.transform_point(&self.p2),
            frame: Frame::World,
            keyframe: self.keyframe,
        }
    }

    /// Map both endpoints by a similarity transform; the result is tagged `Aligned`.
    pub fn aligned(&self, sim: &Sim3) -> Self {
        Self {
            p1: sim.apply(&self.p1),
            p2: sim.apply(&self.p2),
            frame: Frame::Aligned,
            keyframe: self.keyframe,
        }
    }

    /// Distance from a point to this segment (clamped to the endpoints).
    pub fn distance_to_point(&self, p: &Vector3<f64>) -> f64 {
        let d = self.p2 - self.p1;
        let len2 = d.norm_squared();
        if len2 <= 0.0 {
            return (p - self.p1).norm();
        }
        let t = ((p - self.p1).dot(&d) / len2).clamp(0.0, 1.0);
        (p - (self.p1 + t * d)).norm()
    }
}
