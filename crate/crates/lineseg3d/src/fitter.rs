//! Edge-aided incremental 3D line segment fitting.
//!
//! Each edge chain is scanned once. A fit attempt seeds on L consecutive
//! depth-bearing pixels, fits a line in the image plane and a line in the
//! (D, Zf) depth plane, then grows pixel by pixel: a pixel is accepted only
//! if it stays within e1 of the image line *and* e2 of the depth line, with
//! both lines refit after every acceptance (O(1) via running scatter
//! accumulators). Pixels without depth are outliers. When the outlier budget
//! is exceeded or the chain ends, a segment is emitted if more than L pixels
//! were accepted, the sets are cleared, and scanning resumes on the rest of
//! the chain. Growing both planes at once keeps the accumulated image and
//! depth errors bounded, which is what splits chains at depth discontinuities
//! instead of fitting one long wrong segment across them.

use crate::config::{OutlierMode, ResolvedConfig};
use crate::error::{Error, Result};
use crate::fit2d::{build_local_frame, to_frame_sample, Axis, FrameSample, Line2D, PlanarFit, Scatter2};
use crate::geom::{CameraIntrinsics, EdgeSegment, Frame, LineSegment3D, Pixel, Pose};

/// State of one fit attempt along a chain.
#[derive(Debug, Clone)]
pub struct FitState {
    /// Accepted pixels, in chain order.
    pub pixels: Vec<Pixel>,
    /// Depth-plane samples of the accepted pixels, parallel to `pixels`.
    pub samples: Vec<FrameSample>,
    /// Residuals (d_im, d_depth) measured against the fit that was active
    /// when each pixel was accepted; `None` for seed pixels, which are taken
    /// unconditionally.
    pub accept_residuals: Vec<Option<(f64, f64)>>,
    /// Rejected pixels of this attempt, in chain order.
    pub outliers: Vec<Pixel>,
    im_acc: Scatter2,
    depth_acc: Scatter2,
    l_im: Line2D,
    l_depth: Line2D,
    axis: Axis,
}

impl FitState {
    /// Seed from L consecutive depth-bearing pixels. The depth-plane axis is
    /// anchored at the first seed pixel, directed toward the last, and stays
    /// fixed for the whole attempt.
    fn seed(seed_pixels: &[Pixel], intr: &CameraIntrinsics) -> Result<Self> {
        let first = seed_pixels.first().ok_or(Error::Degenerate("empty seed"))?;
        let last = seed_pixels.last().unwrap();
        let axis = build_local_frame(first, last)?;
        let mut state = Self {
            pixels: Vec::new(),
            samples: Vec::new(),
            accept_residuals: Vec::new(),
            outliers: Vec::new(),
            im_acc: Scatter2::new(),
            depth_acc: Scatter2::new(),
            l_im: Line2D {
                normal: nalgebra::Vector2::new(1.0, 0.0),
                offset: 0.0,
                rms: 0.0,
            },
            l_depth: Line2D {
                normal: nalgebra::Vector2::new(1.0, 0.0),
                offset: 0.0,
                rms: 0.0,
            },
            axis,
        };
        for p in seed_pixels {
            let sample = to_frame_sample(p, &axis, intr)
                .ok_or(Error::Degenerate("seed pixel without depth"))?;
            state.accept(*p, sample, None);
        }
        state.refit()?;
        Ok(state)
    }

    fn accept(&mut self, p: Pixel, sample: FrameSample, residuals: Option<(f64, f64)>) {
        self.im_acc.push(p.pos());
        self.depth_acc.push(sample.point());
        self.pixels.push(p);
        self.samples.push(sample);
        self.accept_residuals.push(residuals);
    }

    fn refit(&mut self) -> Result<()> {
        self.l_im = self.im_acc.fit()?;
        self.l_depth = self.depth_acc.fit()?;
        Ok(())
    }

    fn planar_fit(&self) -> PlanarFit {
        PlanarFit {
            l_im: self.l_im,
            l_depth: self.l_depth,
            axis: self.axis,
        }
    }
}

/// One emitted segment with the evidence needed to audit the fit.
#[derive(Debug, Clone)]
pub struct FittedSegment {
    /// Camera-frame 3D segment.
    pub segment: LineSegment3D,
    pub accepted: Vec<Pixel>,
    /// Per accepted pixel: residuals against the fit active at acceptance
    /// time (`None` for seed pixels).
    pub accept_residuals: Vec<Option<(f64, f64)>>,
    /// Final refit of both planes.
    pub fit: PlanarFit,
}

/// Compute the 3D endpoint implied by the fitted planes at axis parameter `d`:
/// sample the image point on l_im, read the depth off l_depth, backproject.
pub(crate) fn endpoint_on_fit(
    fit: &PlanarFit,
    d: f64,
    intr: &CameraIntrinsics,
) -> Result<nalgebra::Vector3<f64>> {
    let q = fit.image_point_at(d)?;
    let z = fit.depth_at(d, intr)?;
    Ok(intr.backproject(&q, z))
}

/// Turn a completed fit attempt into a camera-frame 3D segment.
///
/// The 3D line is pinned down by backprojecting the fit at the D-parameters
/// of the first and last accepted pixels; the endpoints are the orthogonal
/// projections of those pixels' measured 3D points onto that line.
pub fn segment_from_fit(
    state: &FitState,
    intr: &CameraIntrinsics,
    keyframe: u32,
) -> Result<LineSegment3D> {
    let fit = state.planar_fit();
    let first = state.pixels.first().ok_or(Error::Degenerate("empty fit"))?;
    let last = state.pixels.last().unwrap();
    let d_first = state.samples.first().unwrap().d;
    let d_last = state.samples.last().unwrap().d;
    let a = endpoint_on_fit(&fit, d_first, intr)?;
    let b = endpoint_on_fit(&fit, d_last, intr)?;
    let dir = b - a;
    let len2 = dir.norm_squared();
    if len2 <= 1e-18 {
        return Err(Error::Degenerate("fitted 3D line collapsed to a point"));
    }
    let dir = dir / len2.sqrt();
    let project = |p: &Pixel| -> Result<nalgebra::Vector3<f64>> {
        let measured = intr.backproject_pixel(p)?;
        Ok(a + dir * (measured - a).dot(&dir))
    };
    let p1 = project(first)?;
    let p2 = project(last)?;
    LineSegment3D::new(p1, p2, Frame::Camera, keyframe)
}

/// Run the incremental fitter over one chain, returning segments plus the
/// per-pixel acceptance evidence.
pub fn fit_edge_segment_detailed(
    es: &EdgeSegment,
    cfg: &ResolvedConfig,
    intr: &CameraIntrinsics,
) -> Vec<FittedSegment> {
    let l = cfg.l;
    let chain = &es.pixels;
    let mut out = Vec::new();
    let mut start = 0usize;

    while let Some(seed_at) = find_seed(chain, start, l) {
        let Ok(mut state) = FitState::seed(&chain[seed_at..seed_at + l], intr) else {
            // degenerate seed (collinear duplicates cannot happen, but a
            // failed TLS means the window is unusable); skip past it
            start = seed_at + 1;
            continue;
        };
        let mut consecutive_outliers = 0usize;
        let mut k = seed_at + l;
        while k < chain.len() {
            let p = chain[k];
            let accepted = match to_frame_sample(&p, &state.axis, intr) {
                Some(sample) => {
                    let d_im = state.l_im.distance(&p.pos());
                    let d_depth = state.l_depth.distance(&sample.point());
                    if d_im < cfg.e1 && d_depth < cfg.e2 {
                        state.accept(p, sample, Some((d_im, d_depth)));
                        if state.refit().is_err() {
                            break;
                        }
                        true
                    } else {
                        false
                    }
                }
                None => false,
            };
            if accepted {
                consecutive_outliers = 0;
            } else {
                state.outliers.push(p);
                consecutive_outliers += 1;
                let budget_used = match cfg.base.outlier_mode {
                    OutlierMode::Consecutive => consecutive_outliers,
                    OutlierMode::Total => state.outliers.len(),
                };
                if budget_used > l {
                    k += 1;
                    break;
                }
            }
            k += 1;
        }
        if state.pixels.len() > l && state.refit().is_ok() {
            // degenerate fits (vertical depth line etc.) discard the segment
            if let Ok(segment) = segment_from_fit(&state, intr, es.keyframe) {
                out.push(FittedSegment {
                    segment,
                    accepted: state.pixels.clone(),
                    accept_residuals: state.accept_residuals.clone(),
                    fit: state.planar_fit(),
                });
            }
        }
        start = k;
    }
    out
}

/// First index >= `from` where `count` consecutive chain pixels all carry
/// depth.
fn find_seed(chain: &[Pixel], from: usize, count: usize) -> Option<usize> {
    if from >= chain.len() || chain.len() - from < count {
        return None;
    }
    let mut run = 0usize;
    for (i, p) in chain.iter().enumerate().skip(from) {
        if p.depth.is_some() {
            run += 1;
            if run == count {
                return Some(i + 1 - count);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Fit one chain, returning only the camera-frame segments.
pub fn fit_edge_segment(
    es: &EdgeSegment,
    cfg: &ResolvedConfig,
    intr: &CameraIntrinsics,
) -> Vec<LineSegment3D> {
    fit_edge_segment_detailed(es, cfg, intr)
        .into_iter()
        .map(|f| f.segment)
        .collect()
}

/// Fit every chain of a keyframe and register the segments to the world
/// frame with the keyframe pose.
pub fn fit_keyframe(
    chains: &[EdgeSegment],
    cfg: &ResolvedConfig,
    intr: &CameraIntrinsics,
    pose: &Pose,
) -> Vec<LineSegment3D> {
    chains
        .iter()
        .flat_map(|es| fit_edge_segment(es, cfg, intr))
        .map(|seg| seg.transformed(pose))
        .collect()
}
