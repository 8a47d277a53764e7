//! Synthetic scenes: known 3D wireframes observed by a camera trajectory,
//! rendered to pixel chains with controllable depth noise, dropout and
//! outlier corruption.
//!
//! The renderer emits chains directly so the fitting stages can be exercised
//! independently of edge detection quality; an optional rasterized image per
//! keyframe feeds the detector for end-to-end runs.

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::{CameraIntrinsics, EdgeSegment, Frame, GrayImage, LineSegment3D, Pixel, Pose};

/// Depth corruption parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Gaussian depth noise sigma in meters.
    pub depth_sigma: f64,
    /// Fraction of chain pixels left without depth.
    pub dropout: f64,
    /// Fraction of chain pixels with grossly corrupted depth.
    pub outlier_frac: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            depth_sigma: 0.0,
            dropout: 0.0,
            outlier_frac: 0.0,
        }
    }
}

/// Ground-truth segments, a camera trajectory and noise parameters.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub segments: Vec<LineSegment3D>,
    pub trajectory: Vec<Pose>,
    pub intrinsics: CameraIntrinsics,
    pub noise: NoiseParams,
}

/// One rendered keyframe: pose, chains with per-pixel depth, and optionally a
/// rasterized grayscale image of the projected wireframe.
#[derive(Debug, Clone)]
pub struct RenderedKeyframe {
    pub index: u32,
    pub pose: Pose,
    pub chains: Vec<EdgeSegment>,
    pub image: Option<GrayImage>,
}

const Z_NEAR: f64 = 0.05;

impl SyntheticScene {
    /// The 12 edges of an axis-aligned cube centered at the origin.
    pub fn wireframe_cube(span: f64) -> Vec<LineSegment3D> {
        let h = span / 2.0;
        let corner = |i: usize| {
            Vector3::new(
                if i & 1 == 0 { -h } else { h },
                if i & 2 == 0 { -h } else { h },
                if i & 4 == 0 { -h } else { h },
            )
        };
        let edges = [
            (0, 1), (2, 3), (4, 5), (6, 7), // along x
            (0, 2), (1, 3), (4, 6), (5, 7), // along y
            (0, 4), (1, 5), (2, 6), (3, 7), // along z
        ];
        edges
            .iter()
            .map(|&(a, b)| LineSegment3D::new(corner(a), corner(b), Frame::World, 0).unwrap())
            .collect()
    }

    /// Cameras on a horizontal ring of `radius`, looking at the origin.
    pub fn orbit_trajectory(keyframes: usize, radius: f64, height: f64) -> Vec<Pose> {
        (0..keyframes)
            .map(|k| {
                let theta = k as f64 / keyframes as f64 * std::f64::consts::TAU;
                let position = Vector3::new(radius * theta.cos(), radius * theta.sin(), height);
                look_at(position, Vector3::zeros())
            })
            .collect()
    }

    /// Wireframe-cube scene on an orbiting trajectory.
    pub fn cube_scene(
        span: f64,
        keyframes: usize,
        intrinsics: CameraIntrinsics,
        noise: NoiseParams,
    ) -> Self {
        // close enough that edges fill the view, far enough that every edge
        // stays in front of the camera
        let radius = span * 1.25;
        Self {
            segments: Self::wireframe_cube(span),
            trajectory: Self::orbit_trajectory(keyframes, radius, span * 0.18),
            intrinsics,
            noise,
        }
    }

    /// Parse the plain-text scene format: `key=value` lines plus repeatable
    /// `segment=x1,y1,z1,x2,y2,z2` and optional `pose=tx,ty,tz,qx,qy,qz,qw`
    /// lines. When no poses are given, an orbit trajectory is generated from
    /// `keyframes`, `orbit_radius` and `orbit_height`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut width = 640u32;
        let mut height = 480u32;
        let (mut fx, mut fy) = (160.0f64, 160.0f64);
        let (mut cx, mut cy) = (None::<f64>, None::<f64>);
        let mut keyframes = 12usize;
        let mut orbit_radius = None::<f64>;
        let mut orbit_height = 0.0f64;
        let mut noise = NoiseParams::default();
        let mut segments: Vec<LineSegment3D> = Vec::new();
        let mut poses: Vec<Pose> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let bad = |message: String| Error::ConfigLine { line, message };
            let (key, value) = stripped
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got '{raw}'")))?;
            let key = key.trim();
            let value = value.trim();
            let nums = |v: &str, n: usize| -> Result<Vec<f64>> {
                let parts: Vec<f64> = v
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(format!("invalid number list '{v}'")))?;
                if parts.len() != n {
                    return Err(bad(format!("expected {n} numbers, got {}", parts.len())));
                }
                Ok(parts)
            };
            match key {
                "width" => width = value.parse().map_err(|_| bad("bad width".into()))?,
                "height" => height = value.parse().map_err(|_| bad("bad height".into()))?,
                "fx" => fx = nums(value, 1)?[0],
                "fy" => fy = nums(value, 1)?[0],
                "cx" => cx = Some(nums(value, 1)?[0]),
                "cy" => cy = Some(nums(value, 1)?[0]),
                "keyframes" => {
                    keyframes = value.parse().map_err(|_| bad("bad keyframes".into()))?
                }
                "orbit_radius" => orbit_radius = Some(nums(value, 1)?[0]),
                "orbit_height" => orbit_height = nums(value, 1)?[0],
                "depth_sigma" => noise.depth_sigma = nums(value, 1)?[0],
                "dropout" => noise.dropout = nums(value, 1)?[0],
                "outlier_frac" => noise.outlier_frac = nums(value, 1)?[0],
                "segment" => {
                    let v = nums(value, 6)?;
                    let seg = LineSegment3D::new(
                        Vector3::new(v[0], v[1], v[2]),
                        Vector3::new(v[3], v[4], v[5]),
                        Frame::World,
                        0,
                    )
                    .map_err(|e| bad(e.to_string()))?;
                    segments.push(seg);
                }
                "pose" => {
                    let v = nums(value, 7)?;
                    let pose =
                        Pose::from_quaternion(Vector3::new(v[0], v[1], v[2]), v[3], v[4], v[5], v[6])
                            .map_err(|e| bad(e.to_string()))?;
                    poses.push(pose);
                }
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }
        if segments.is_empty() {
            return Err(Error::Input("scene has no segments".into()));
        }
        let intrinsics = CameraIntrinsics::new(
            fx,
            fy,
            cx.unwrap_or(width as f64 / 2.0 - 0.5),
            cy.unwrap_or(height as f64 / 2.0 - 0.5),
            width,
            height,
        )?;
        let trajectory = if poses.is_empty() {
            let radius = orbit_radius.unwrap_or_else(|| {
                let extent = segments
                    .iter()
                    .flat_map(|s| [s.p1, s.p2])
                    .map(|p| p.norm())
                    .fold(0.0f64, f64::max);
                (extent * 2.5).max(1.0)
            });
            Self::orbit_trajectory(keyframes, radius, orbit_height)
        } else {
            poses
        };
        Ok(Self {
            segments,
            trajectory,
            intrinsics,
            noise,
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read scene {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Serialize to the scene text format (with an explicit trajectory).
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let i = &self.intrinsics;
        out.push_str(&format!(
            "width={}\nheight={}\nfx={}\nfy={}\ncx={}\ncy={}\n",
            i.width, i.height, i.fx, i.fy, i.cx, i.cy
        ));
        out.push_str(&format!(
            "depth_sigma={}\ndropout={}\noutlier_frac={}\n",
            self.noise.depth_sigma, self.noise.dropout, self.noise.outlier_frac
        ));
        for s in &self.segments {
            out.push_str(&format!(
                "segment={},{},{},{},{},{}\n",
                s.p1.x, s.p1.y, s.p1.z, s.p2.x, s.p2.y, s.p2.z
            ));
        }
        for p in &self.trajectory {
            let q = nalgebra::UnitQuaternion::from_matrix(&p.rotation);
            out.push_str(&format!(
                "pose={},{},{},{},{},{},{}\n",
                p.translation.x,
                p.translation.y,
                p.translation.z,
                q.i,
                q.j,
                q.k,
                q.w
            ));
        }
        out
    }
}

/// World-from-camera pose for a camera at `position` looking at `target`,
/// with the camera's +Z along the view direction and +Y pointing down-world.
pub fn look_at(position: Vector3<f64>, target: Vector3<f64>) -> Pose {
    let forward = (target - position).normalize();
    let mut up = Vector3::new(0.0, 0.0, 1.0);
    if forward.cross(&up).norm() < 1e-6 {
        up = Vector3::new(0.0, 1.0, 0.0);
    }
    let right = forward.cross(&up).normalize();
    let down = forward.cross(&right).normalize();
    let rotation = Matrix3::from_columns(&[right, down, forward]);
    Pose::new(rotation, position).expect("look_at rotation is orthonormal")
}

/// Render every keyframe of a scene. Chains and corruption are deterministic
/// in `seed`; keyframes are independently seeded so the result does not
/// depend on render order.
pub fn render_synthetic(scene: &SyntheticScene, seed: u64, rasterize: bool) -> Vec<RenderedKeyframe> {
    scene
        .trajectory
        .iter()
        .enumerate()
        .map(|(k, pose)| {
            let kf_seed = seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            render_keyframe(scene, *pose, k as u32, kf_seed, rasterize)
        })
        .collect()
}

fn render_keyframe(
    scene: &SyntheticScene,
    pose: Pose,
    index: u32,
    seed: u64,
    rasterize: bool,
) -> RenderedKeyframe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let intr = &scene.intrinsics;
    let cam_from_world = pose.inverse();
    let mut chains = Vec::new();
    let mut image = rasterize.then(|| GrayImage::from_raw(
        intr.width,
        intr.height,
        vec![30; (intr.width * intr.height) as usize],
    ).unwrap());

    for gt in &scene.segments {
        let p1 = cam_from_world.transform_point(&gt.p1);
        let p2 = cam_from_world.transform_point(&gt.p2);
        let Some(chain_pixels) = project_segment_to_chain(&p1, &p2, intr) else {
            continue;
        };
        if let Some(img) = image.as_mut() {
            for &(x, y) in &chain_pixels {
                // 3 px wide stroke so the detector sees two clean step edges
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx >= 0 && ny >= 0 && (nx as u32) < img.width && (ny as u32) < img.height
                        {
                            img.set(nx as u32, ny as u32, 220);
                        }
                    }
                }
            }
        }
        let pixels: Vec<Pixel> = chain_pixels
            .into_iter()
            .map(|(x, y)| {
                let depth = true_ray_depth(&p1, &p2, x, y, intr)
                    .and_then(|z| corrupt_depth(z, &scene.noise, &mut rng));
                Pixel { x, y, depth }
            })
            .collect();
        if pixels.len() >= 2 {
            chains.push(EdgeSegment::new(pixels, index));
        }
    }
    RenderedKeyframe {
        index,
        pose,
        chains,
        image,
    }
}

fn corrupt_depth(z: f64, noise: &NoiseParams, rng: &mut ChaCha8Rng) -> Option<f64> {
    if noise.dropout > 0.0 && rng.random::<f64>() < noise.dropout {
        return None;
    }
    let mut z = z;
    if noise.outlier_frac > 0.0 && rng.random::<f64>() < noise.outlier_frac {
        // gross corruption, uniform within ±[25%, 60%] of the true depth
        let magnitude = z * rng.random_range(0.25..0.6);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        z += sign * magnitude;
    }
    if noise.depth_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.depth_sigma).expect("sigma >= 0");
        z += normal.sample(rng);
    }
    (z > Z_NEAR).then_some(z)
}

/// Project a camera-frame segment to an integer pixel chain: clip against the
/// near plane and the image rectangle, then Bresenham-walk the projection.
/// Returns `None` for segments that are behind the camera or off-screen.
fn project_segment_to_chain(
    p1: &Vector3<f64>,
    p2: &Vector3<f64>,
    intr: &CameraIntrinsics,
) -> Option<Vec<(u32, u32)>> {
    // clip to z >= Z_NEAR in 3D
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let dz = p2.z - p1.z;
    if dz.abs() < 1e-12 {
        if p1.z < Z_NEAR {
            return None;
        }
    } else {
        let t_near = (Z_NEAR - p1.z) / dz;
        if dz > 0.0 {
            t0 = t0.max(t_near);
        } else {
            t1 = t1.min(t_near);
        }
        if t0 >= t1 {
            return None;
        }
    }
    let q1 = p1 + t0 * (p2 - p1);
    let q2 = p1 + t1 * (p2 - p1);
    let a = intr.project(&q1)?;
    let b = intr.project(&q2)?;
    let rect = (
        1.0,
        1.0,
        intr.width as f64 - 2.0,
        intr.height as f64 - 2.0,
    );
    let (a, b) = clip_segment_2d(a, b, rect)?;
    let pixels = bresenham(
        (a.x.round() as i64, a.y.round() as i64),
        (b.x.round() as i64, b.y.round() as i64),
    );
    if pixels.len() < 2 {
        return None;
    }
    Some(
        pixels
            .into_iter()
            .map(|(x, y)| (x as u32, y as u32))
            .collect(),
    )
}

/// Liang-Barsky clip of segment ab against [x0,x1]x[y0,y1].
fn clip_segment_2d(
    a: Vector2<f64>,
    b: Vector2<f64>,
    (x0, y0, x1, y1): (f64, f64, f64, f64),
) -> Option<(Vector2<f64>, Vector2<f64>)> {
    let d = b - a;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    let checks = [
        (-d.x, a.x - x0),
        (d.x, x1 - a.x),
        (-d.y, a.y - y0),
        (d.y, y1 - a.y),
    ];
    for (p, q) in checks {
        if p.abs() < 1e-12 {
            if q < 0.0 {
                return None;
            }
            continue;
        }
        let r = q / p;
        if p < 0.0 {
            t0 = t0.max(r);
        } else {
            t1 = t1.min(r);
        }
        if t0 > t1 {
            return None;
        }
    }
    Some((a + t0 * d, a + t1 * d))
}

/// 8-connected Bresenham walk between integer endpoints, inclusive.
fn bresenham(from: (i64, i64), to: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = from;
    let dx = (to.0 - x).abs();
    let dy = -(to.1 - y).abs();
    let sx = if x < to.0 { 1 } else { -1 };
    let sy = if y < to.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if (x, y) == to {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Depth of the scene point a pixel observes: the z of the closest point on
/// the camera-frame segment to the pixel's viewing ray.
fn true_ray_depth(
    p1: &Vector3<f64>,
    p2: &Vector3<f64>,
    x: u32,
    y: u32,
    intr: &CameraIntrinsics,
) -> Option<f64> {
    let ray = Vector3::new(
        (x as f64 - intr.cx) / intr.fx,
        (y as f64 - intr.cy) / intr.fy,
        1.0,
    );
    let v = p2 - p1;
    let a = v.norm_squared();
    let b = v.dot(&ray);
    let c = ray.norm_squared();
    let d0 = v.dot(p1);
    let e = ray.dot(p1);
    let den = a * c - b * b;
    let t = if den.abs() < 1e-15 {
        0.0
    } else {
        ((b * e - c * d0) / den).clamp(0.0, 1.0)
    };
    let z = (p1 + t * v).z;
    (z > Z_NEAR).then_some(z)
}

/// A scene whose single image line hides a depth discontinuity: per keyframe
/// one straight 120-pixel chain whose first 60 pixels sit at `z_near_m` and
/// the rest at `z_far_m`, plus the two generating segments. Cameras are at
/// identity, so world and camera frames coincide.
pub fn depth_step_scene(
    keyframes: usize,
    intr: &CameraIntrinsics,
    z_near_m: f64,
    z_far_m: f64,
) -> (SyntheticScene, Vec<RenderedKeyframe>) {
    let mut gt = Vec::new();
    let mut rendered = Vec::new();
    for k in 0..keyframes {
        let y = 150 + (k as u32) * 7;
        let row = y as f64;
        let near_a = intr.backproject(&Vector2::new(100.0, row), z_near_m);
        let near_b = intr.backproject(&Vector2::new(159.0, row), z_near_m);
        let far_a = intr.backproject(&Vector2::new(160.0, row), z_far_m);
        let far_b = intr.backproject(&Vector2::new(219.0, row), z_far_m);
        gt.push(LineSegment3D::new(near_a, near_b, Frame::World, k as u32).unwrap());
        gt.push(LineSegment3D::new(far_a, far_b, Frame::World, k as u32).unwrap());
        let pixels = (0..120u32)
            .map(|i| Pixel {
                x: 100 + i,
                y,
                depth: Some(if i < 60 { z_near_m } else { z_far_m }),
            })
            .collect();
        rendered.push(RenderedKeyframe {
            index: k as u32,
            pose: Pose::identity(),
            chains: vec![EdgeSegment::new(pixels, k as u32)],
            image: None,
        });
    }
    let scene = SyntheticScene {
        segments: gt,
        trajectory: vec![Pose::identity(); keyframes],
        intrinsics: *intr,
        noise: NoiseParams::default(),
    };
    (scene, rendered)
}
