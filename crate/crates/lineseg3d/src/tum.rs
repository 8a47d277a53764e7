//! TUM RGB-D sequence ingestion: rgb/depth/pose association by timestamp,
//! 16-bit depth PNG decoding (meters = raw / 5000), and the semi-density
//! mask that keeps sensor depth only at edge pixels.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geom::{CameraIntrinsics, DepthMap, EdgeSegment, GrayImage, Pose};

/// U16 depth PNG values are scaled: raw 5000 is one meter.
pub const DEPTH_SCALE: f64 = 5000.0;

/// Maximum timestamp difference for rgb/depth/pose association, seconds.
pub const ASSOCIATION_WINDOW: f64 = 0.02;

/// One associated keyframe of a sequence.
#[derive(Debug, Clone)]
pub struct Keyframe {
    pub timestamp: f64,
    pub image: GrayImage,
    /// Dense sensor depth; mask it with `mask_to_semidense` to emulate the
    /// semi-dense maps the fitter expects.
    pub depth: DepthMap,
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
    pub index: u32,
}

/// Association bookkeeping for a loaded sequence.
#[derive(Debug, Clone, Default)]
pub struct SkipReport {
    /// Frames dropped because no depth/pose was within the window or the
    /// nearest-neighbor match was not mutual.
    pub skipped_frames: usize,
    /// Frames dropped by the keyframe stride.
    pub strided_frames: usize,
}

fn read_stamped_list(path: &Path) -> Result<Vec<(f64, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let stamp: f64 = parts
            .next()
            .ok_or_else(|| parse_err(path, idx + 1, "missing timestamp"))?
            .parse()
            .map_err(|_| parse_err(path, idx + 1, "bad timestamp"))?;
        let rest = parts.collect::<Vec<_>>().join(" ");
        if rest.is_empty() {
            return Err(parse_err(path, idx + 1, "missing payload after timestamp"));
        }
        out.push((stamp, rest));
    }
    if out.is_empty() {
        return Err(Error::Input(format!("{} contains no entries", path.display())));
    }
    Ok(out)
}

fn parse_err(path: &Path, line: usize, msg: &str) -> Error {
    Error::Input(format!("{}:{line}: {msg}", path.display()))
}

/// Index of the entry with the nearest timestamp (lists are stamped in order).
fn nearest_index(stamps: &[f64], t: f64) -> usize {
    let mut i = stamps.partition_point(|s| *s < t);
    if i == stamps.len() || (i > 0 && (t - stamps[i - 1]).abs() <= (stamps[i] - t).abs()) {
        i -= 1;
    }
    i
}

/// Parse a groundtruth line payload: "tx ty tz qx qy qz qw".
fn parse_pose(payload: &str, path: &Path, line_hint: usize) -> Result<Pose> {
    let vals: Vec<f64> = payload
        .split_whitespace()
        .map(|v| v.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(path, line_hint, "bad pose number"))?;
    if vals.len() != 7 {
        return Err(parse_err(path, line_hint, "pose needs 7 values"));
    }
    Pose::from_quaternion(
        Vector3::new(vals[0], vals[1], vals[2]),
        vals[3],
        vals[4],
        vals[5],
        vals[6],
    )
}

/// Decode an 8-bit or 16-bit PNG as grayscale using the 0.299/0.587/0.114
/// luminance weights for color inputs.
pub fn load_gray_png(path: &Path) -> Result<GrayImage> {
    let img = image::open(path)
        .map_err(|e| Error::Input(format!("cannot decode {}: {e}", path.display())))?;
    let (w, h) = (img.width(), img.height());
    match img {
        image::DynamicImage::ImageLuma8(buf) => GrayImage::from_raw(w, h, buf.into_raw()),
        image::DynamicImage::ImageRgb8(buf) => GrayImage::from_rgb(w, h, buf.as_raw()),
        image::DynamicImage::ImageRgba8(buf) => {
            let rgb: Vec<u8> = buf
                .as_raw()
                .chunks_exact(4)
                .flat_map(|px| [px[0], px[1], px[2]])
                .collect();
            GrayImage::from_rgb(w, h, &rgb)
        }
        other => {
            let buf = other.to_rgb8();
            GrayImage::from_rgb(w, h, buf.as_raw())
        }
    }
}

/// Decode a 16-bit depth PNG; raw/5000 meters, raw 0 meaning no reading.
pub fn load_depth_png(path: &Path) -> Result<DepthMap> {
    let img = image::open(path)
        .map_err(|e| Error::Input(format!("cannot decode {}: {e}", path.display())))?;
    let (w, h) = (img.width(), img.height());
    let image::DynamicImage::ImageLuma16(buf) = img else {
        return Err(Error::Input(format!(
            "{} is not a 16-bit grayscale depth PNG",
            path.display()
        )));
    };
    let data = buf.into_raw().iter().map(|&v| v as f64 / DEPTH_SCALE).collect();
    DepthMap::from_raw(w, h, data)
}

/// Load a TUM RGB-D directory (rgb.txt, depth.txt, groundtruth.txt):
/// associate rgb/depth/pose by mutual nearest timestamp within 0.02 s and
/// emit every `keyframe_stride`-th associated frame.
pub fn load_tum_sequence(
    dir: &Path,
    keyframe_stride: usize,
    intrinsics: &CameraIntrinsics,
) -> Result<(Vec<Keyframe>, SkipReport)> {
    if keyframe_stride == 0 {
        return Err(Error::Config("keyframe stride must be at least 1".into()));
    }
    if !dir.is_dir() {
        return Err(Error::Input(format!("{} is not a directory", dir.display())));
    }
    let rgb = read_stamped_list(&dir.join("rgb.txt"))?;
    let depth = read_stamped_list(&dir.join("depth.txt"))?;
    let poses = read_stamped_list(&dir.join("groundtruth.txt"))?;
    let depth_stamps: Vec<f64> = depth.iter().map(|(t, _)| *t).collect();
    let rgb_stamps: Vec<f64> = rgb.iter().map(|(t, _)| *t).collect();
    let pose_stamps: Vec<f64> = poses.iter().map(|(t, _)| *t).collect();

    let mut keyframes = Vec::new();
    let mut report = SkipReport::default();
    let mut accepted = 0usize;
    for (i, (t_rgb, rgb_path)) in rgb.iter().enumerate() {
        let di = nearest_index(&depth_stamps, *t_rgb);
        let pi = nearest_index(&pose_stamps, *t_rgb);
        let mutual = nearest_index(&rgb_stamps, depth_stamps[di]) == i;
        if (depth_stamps[di] - t_rgb).abs() > ASSOCIATION_WINDOW
            || (pose_stamps[pi] - t_rgb).abs() > ASSOCIATION_WINDOW
            || !mutual
        {
            report.skipped_frames += 1;
            continue;
        }
        if !accepted.is_multiple_of(keyframe_stride) {
            accepted += 1;
            report.strided_frames += 1;
            continue;
        }
        accepted += 1;
        let image = load_gray_png(&resolve(dir, rgb_path))?;
        let depth_map = load_depth_png(&resolve(dir, &depth[di].1))?;
        if image.width != depth_map.width || image.height != depth_map.height {
            return Err(Error::Input(format!(
                "rgb {}x{} and depth {}x{} resolutions differ",
                image.width, image.height, depth_map.width, depth_map.height
            )));
        }
        let pose = parse_pose(&poses[pi].1, &dir.join("groundtruth.txt"), pi + 1)?;
        keyframes.push(Keyframe {
            timestamp: *t_rgb,
            image,
            depth: depth_map,
            pose,
            intrinsics: *intrinsics,
            index: (keyframes.len()) as u32,
        });
    }
    if keyframes.is_empty() {
        return Err(Error::Input(format!(
            "no associated frames in {} (skipped {})",
            dir.display(),
            report.skipped_frames
        )));
    }
    Ok((keyframes, report))
}

fn resolve(dir: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Emulate a semi-dense map: keep depth only at chain pixels dilated by one
/// pixel, drop it everywhere else.
pub fn mask_to_semidense(dense: &DepthMap, chains: &[EdgeSegment]) -> DepthMap {
    let mut out = DepthMap::new(dense.width, dense.height);
    for es in chains {
        for p in &es.pixels {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let nx = p.x as i64 + dx;
                    let ny = p.y as i64 + dy;
                    if nx >= 0
                        && ny >= 0
                        && (nx as u32) < dense.width
                        && (ny as u32) < dense.height
                    {
                        if let Some(z) = dense.get(nx as u32, ny as u32) {
                            out.set(nx as u32, ny as u32, z);
                        }
                    }
                }
            }
        }
    }
    out
}
