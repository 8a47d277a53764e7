//! Edge-Drawing-style detector: Sobel gradient, anchor extraction, and
//! smart-routing walks that link anchors into contiguous one-pixel-wide
//! edge chains.
//!
//! Direction is quantized to two bins. A pixel with |Gx| >= |Gy| sits on a
//! vertical edge (the gradient is horizontal), so anchors there must beat
//! their left/right neighbors and walks proceed up/down; horizontal edges
//! are the mirror case. Junctions terminate a walk instead of branching, so
//! every chain is a simple path.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geom::{DepthMap, EdgeSegment, GrayImage, Pixel};

/// Quantized edge direction at a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeDir {
    /// Edge runs horizontally (|Gx| < |Gy|).
    Horizontal,
    /// Edge runs vertically (|Gx| >= |Gy|).
    Vertical,
}

/// Per-pixel gradient magnitude and quantized direction, plus anchor flags.
#[derive(Debug, Clone)]
pub struct GradientMap {
    pub width: u32,
    pub height: u32,
    /// |Gx| + |Gy| from the 3x3 Sobel kernels; 0 on the one-pixel border.
    pub magnitude: Vec<f64>,
    pub direction: Vec<EdgeDir>,
    /// Set by `extract_anchors`.
    pub anchors: Vec<bool>,
}

impl GradientMap {
    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        (y * self.width + x) as usize
    }

    #[inline]
    pub fn mag(&self, x: u32, y: u32) -> f64 {
        self.magnitude[self.idx(x, y)]
    }

    #[inline]
    pub fn dir(&self, x: u32, y: u32) -> EdgeDir {
        self.direction[self.idx(x, y)]
    }

    /// Construct directly from magnitude/direction buffers (used by tests and
    /// synthetic inputs).
    pub fn from_parts(
        width: u32,
        height: u32,
        magnitude: Vec<f64>,
        direction: Vec<EdgeDir>,
    ) -> Result<Self> {
        let len = (width as usize) * (height as usize);
        if magnitude.len() != len || direction.len() != len {
            return Err(Error::Input("gradient buffer length mismatch".into()));
        }
        if magnitude.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Input("gradient magnitude must be non-negative".into()));
        }
        Ok(Self {
            width,
            height,
            magnitude,
            direction,
            anchors: vec![false; len],
        })
    }
}

/// 3x3 Sobel gradient with L1 magnitude |Gx| + |Gy|. The border ring is left
/// at zero magnitude.
pub fn compute_gradient(image: &GrayImage) -> Result<GradientMap> {
    let (w, h) = (image.width, image.height);
    if w < 3 || h < 3 {
        return Err(Error::Input(format!(
            "image {w}x{h} too small for gradient (need at least 3x3)"
        )));
    }
    let len = (w as usize) * (h as usize);
    let mut magnitude = vec![0.0; len];
    let mut direction = vec![EdgeDir::Vertical; len];
    let px = |x: u32, y: u32| image.get(x, y) as f64;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
            let gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
            let i = (y * w + x) as usize;
            magnitude[i] = gx.abs() + gy.abs();
            direction[i] = if gx.abs() >= gy.abs() {
                EdgeDir::Vertical
            } else {
                EdgeDir::Horizontal
            };
        }
    }
    Ok(GradientMap {
        width: w,
        height: h,
        magnitude,
        direction,
        anchors: vec![false; len],
    })
}

/// Anchor extraction: a sampled pixel is an anchor iff its magnitude clears
/// `gradient_threshold` and strictly beats both gradient-normal neighbors by
/// at least `anchor_threshold`. Marks the flags in `g` and returns the
/// anchor coordinates in scan order.
pub fn extract_anchors(
    g: &mut GradientMap,
    gradient_threshold: f64,
    anchor_threshold: f64,
    scan_interval: u32,
) -> Result<Vec<(u32, u32)>> {
    if gradient_threshold < 0.0 || anchor_threshold < 0.0 {
        return Err(Error::Config("anchor thresholds must be non-negative".into()));
    }
    if scan_interval < 1 {
        return Err(Error::Config("scan interval must be at least 1".into()));
    }
    let (w, h) = (g.width, g.height);
    let mut anchors = Vec::new();
    g.anchors.iter_mut().for_each(|a| *a = false);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            if y % scan_interval != 0 && x % scan_interval != 0 {
                continue;
            }
            let m = g.mag(x, y);
            if m < gradient_threshold {
                continue;
            }
            let (n1, n2) = match g.dir(x, y) {
                EdgeDir::Vertical => (g.mag(x - 1, y), g.mag(x + 1, y)),
                EdgeDir::Horizontal => (g.mag(x, y - 1), g.mag(x, y + 1)),
            };
            let strict = m > n1 && m > n2;
            if strict && m - n1 >= anchor_threshold && m - n2 >= anchor_threshold {
                let i = g.idx(x, y);
                g.anchors[i] = true;
                anchors.push((x, y));
            }
        }
    }
    Ok(anchors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Walk {
    Left,
    Right,
    Up,
    Down,
}

impl Walk {
    fn is_horizontal(self) -> bool {
        matches!(self, Walk::Left | Walk::Right)
    }

    /// The three forward neighbors for this walk direction, straight first so
    /// magnitude ties prefer going straight.
    fn candidates(self, x: u32, y: u32, w: u32, h: u32) -> [Option<(u32, u32)>; 3] {
        let step = |dx: i64, dy: i64| -> Option<(u32, u32)> {
            let nx = x as i64 + dx;
            let ny = y as i64 + dy;
            (nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64)
                .then_some((nx as u32, ny as u32))
        };
        match self {
            Walk::Left => [step(-1, 0), step(-1, -1), step(-1, 1)],
            Walk::Right => [step(1, 0), step(1, -1), step(1, 1)],
            Walk::Up => [step(0, -1), step(-1, -1), step(1, -1)],
            Walk::Down => [step(0, 1), step(-1, 1), step(1, 1)],
        }
    }
}

struct Router<'a> {
    g: &'a GradientMap,
    visited: Vec<bool>,
    threshold: f64,
}

impl<'a> Router<'a> {
    fn new(g: &'a GradientMap, threshold: f64) -> Self {
        Self {
            g,
            visited: vec![false; g.magnitude.len()],
            threshold,
        }
    }

    fn best_candidate(&self, from: (u32, u32), walk: Walk) -> Option<(u32, u32)> {
        let mut best: Option<((u32, u32), f64)> = None;
        for cand in walk
            .candidates(from.0, from.1, self.g.width, self.g.height)
            .into_iter()
            .flatten()
        {
            let i = self.g.idx(cand.0, cand.1);
            if self.visited[i] {
                continue;
            }
            let m = self.g.magnitude[i];
            if m < self.threshold {
                continue;
            }
            // strictly-greater keeps the straight-first tie break
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((cand, m));
            }
        }
        best.map(|(c, _)| c)
    }

    /// Re-choose the walk direction after a quantized-direction change,
    /// heading toward the side with the stronger continuation.
    fn reorient(&self, at: (u32, u32), toward: EdgeDir) -> Walk {
        let score = |walk: Walk| -> f64 {
            walk.candidates(at.0, at.1, self.g.width, self.g.height)
                .into_iter()
                .flatten()
                .map(|(x, y)| {
                    let i = self.g.idx(x, y);
                    if self.visited[i] {
                        0.0
                    } else {
                        self.g.magnitude[i]
                    }
                })
                .fold(0.0, f64::max)
        };
        match toward {
            EdgeDir::Horizontal => {
                if score(Walk::Left) >= score(Walk::Right) {
                    Walk::Left
                } else {
                    Walk::Right
                }
            }
            EdgeDir::Vertical => {
                if score(Walk::Up) >= score(Walk::Down) {
                    Walk::Up
                } else {
                    Walk::Down
                }
            }
        }
    }

    /// Walk from `start` (already part of the chain) in direction `walk`,
    /// appending pixels until the edge fades, leaves the image, or reaches a
    /// visited pixel.
    fn walk(&mut self, start: (u32, u32), mut walk: Walk, out: &mut Vec<(u32, u32)>) {
        let mut cur = start;
        loop {
            // follow the local quantized direction, switching axis when needed
            let dir = self.g.dir(cur.0, cur.1);
            let aligned = match dir {
                EdgeDir::Horizontal => walk.is_horizontal(),
                EdgeDir::Vertical => !walk.is_horizontal(),
            };
            if !aligned {
                walk = self.reorient(cur, dir);
            }
            let Some(next) = self.best_candidate(cur, walk) else {
                return;
            };
            self.visited[self.g.idx(next.0, next.1)] = true;
            out.push(next);
            cur = next;
        }
    }
}

/// Link anchors into edge chains by greedy smart routing. Each pixel joins at
/// most one chain; chains shorter than 2 pixels are dropped.
pub fn link_edge_segments(
    g: &GradientMap,
    anchors: &[(u32, u32)],
    gradient_threshold: f64,
    keyframe: u32,
) -> Result<Vec<EdgeSegment>> {
    for &(x, y) in anchors {
        if x >= g.width || y >= g.height {
            return Err(Error::Input(format!("anchor ({x},{y}) outside image")));
        }
    }
    let mut router = Router::new(g, gradient_threshold);
    let mut segments = Vec::new();
    for &(x, y) in anchors {
        let i = g.idx(x, y);
        if router.visited[i] {
            continue;
        }
        router.visited[i] = true;
        let (first, second) = match g.dir(x, y) {
            EdgeDir::Horizontal => (Walk::Left, Walk::Right),
            EdgeDir::Vertical => (Walk::Up, Walk::Down),
        };
        let mut head = vec![(x, y)];
        router.walk((x, y), first, &mut head);
        let mut tail = Vec::new();
        router.walk((x, y), second, &mut tail);
        head.reverse();
        head.extend(tail);
        if head.len() < 2 {
            continue;
        }
        let pixels = head.into_iter().map(|(px, py)| Pixel::new(px, py)).collect();
        segments.push(EdgeSegment::new(pixels, keyframe));
    }
    Ok(segments)
}

/// Full detection pass with the thresholds from `cfg`.
pub fn detect_edges(image: &GrayImage, cfg: &Config, keyframe: u32) -> Result<Vec<EdgeSegment>> {
    let mut g = compute_gradient(image)?;
    let anchors = extract_anchors(
        &mut g,
        cfg.gradient_threshold,
        cfg.anchor_threshold,
        cfg.scan_interval,
    )?;
    link_edge_segments(&g, &anchors, cfg.gradient_threshold, keyframe)
}

/// Fill each chain pixel's depth from the map where present; chain order is
/// preserved and uncovered pixels stay depth-less.
pub fn attach_depth(segments: &[EdgeSegment], depth: &DepthMap) -> Result<Vec<EdgeSegment>> {
    for es in segments {
        for p in &es.pixels {
            if p.x >= depth.width || p.y >= depth.height {
                return Err(Error::Input(format!(
                    "chain pixel ({},{}) outside {}x{} depth map",
                    p.x, p.y, depth.width, depth.height
                )));
            }
        }
    }
    Ok(segments
        .iter()
        .map(|es| {
            let pixels = es
                .pixels
                .iter()
                .map(|p| Pixel {
                    x: p.x,
                    y: p.y,
                    depth: depth.get(p.x, p.y),
                })
                .collect();
            EdgeSegment::new(pixels, es.keyframe)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn constant_image(w: u32, h: u32, v: u8) -> GrayImage {
        GrayImage::from_raw(w, h, vec![v; (w * h) as usize]).unwrap()
    }

    /// Magnitude ridge along a column, direction Vertical everywhere.
    fn column_ridge(w: u32, h: u32, col: u32, mag: f64) -> GradientMap {
        let len = (w * h) as usize;
        let mut magnitude = vec![0.0; len];
        for y in 0..h {
            magnitude[(y * w + col) as usize] = mag;
        }
        GradientMap::from_parts(w, h, magnitude, vec![EdgeDir::Vertical; len]).unwrap()
    }

    #[test]
    fn constant_image_has_zero_gradient() {
        let g = compute_gradient(&constant_image(16, 16, 77)).unwrap();
        assert!(g.magnitude.iter().all(|m| *m == 0.0));
        let mut g = g;
        let anchors = extract_anchors(&mut g, 36.0, 8.0, 1).unwrap();
        assert!(anchors.is_empty());
    }

    #[test]
    fn vertical_step_edge_magnitude() {
        // columns >= 8 are bright: the two columns flanking the step carry
        // |Gx| = 4*255, Gy = 0 (hand-evaluated Sobel on the step pattern)
        let mut img = constant_image(16, 16, 0);
        for y in 0..16 {
            for x in 8..16 {
                img.set(x, y, 255);
            }
        }
        let g = compute_gradient(&img).unwrap();
        for y in 1..15 {
            assert_eq!(g.mag(7, y), 4.0 * 255.0);
            assert_eq!(g.mag(8, y), 4.0 * 255.0);
            assert_eq!(g.dir(7, y), EdgeDir::Vertical);
            assert_eq!(g.mag(5, y), 0.0);
            assert_eq!(g.mag(10, y), 0.0);
        }
    }

    #[test]
    fn single_bright_pixel_confined_support() {
        let mut img = constant_image(11, 11, 0);
        img.set(5, 5, 255);
        let g = compute_gradient(&img).unwrap();
        for y in 1..10u32 {
            for x in 1..10u32 {
                let inside = x.abs_diff(5) <= 1 && y.abs_diff(5) <= 1;
                if !inside {
                    assert_eq!(g.mag(x, y), 0.0, "magnitude leak at ({x},{y})");
                }
            }
        }
        assert!(g.mag(4, 5) > 0.0);
    }

    #[test]
    fn too_small_image_rejected() {
        assert!(compute_gradient(&constant_image(2, 5, 0)).is_err());
    }

    #[test]
    fn ridge_pixels_are_anchors() {
        let mut g = column_ridge(16, 16, 8, 100.0);
        let anchors = extract_anchors(&mut g, 36.0, 8.0, 1).unwrap();
        // every interior ridge pixel is a strict maximum along the normal
        assert_eq!(anchors.len(), 14);
        assert!(anchors.iter().all(|&(x, _)| x == 8));
    }

    #[test]
    fn adjacent_equal_ridges_produce_no_anchors() {
        let mut g = column_ridge(16, 16, 8, 100.0);
        for y in 0..16 {
            g.magnitude[(y * 16 + 9) as usize] = 100.0;
        }
        let anchors = extract_anchors(&mut g, 36.0, 8.0, 1).unwrap();
        assert!(anchors.is_empty());
    }

    #[test]
    fn straight_ridge_links_into_one_chain() {
        let w = 60u32;
        let h = 9u32;
        let len = (w * h) as usize;
        let mut magnitude = vec![0.0; len];
        for x in 5..55 {
            magnitude[(4 * w + x) as usize] = 100.0;
        }
        let mut g =
            GradientMap::from_parts(w, h, magnitude, vec![EdgeDir::Horizontal; len]).unwrap();
        let anchors = extract_anchors(&mut g, 36.0, 8.0, 1).unwrap();
        assert!(!anchors.is_empty());
        let segs = link_edge_segments(&g, &anchors, 36.0, 0).unwrap();
        assert_eq!(segs.len(), 1);
        let n = segs[0].len();
        assert!((48..=50).contains(&n), "ridge chain length {n}");
        segs[0].validate().unwrap();
    }

    #[test]
    fn empty_anchor_set_yields_no_segments() {
        let g = column_ridge(16, 16, 8, 100.0);
        assert!(link_edge_segments(&g, &[], 36.0, 0).unwrap().is_empty());
    }

    #[test]
    fn l_shaped_ridge_covers_pixels_once() {
        let w = 40u32;
        let h = 40u32;
        let len = (w * h) as usize;
        let mut magnitude = vec![0.0; len];
        let mut direction = vec![EdgeDir::Horizontal; len];
        let mut ridge = HashSet::new();
        // horizontal arm at row 20, columns 5..=30
        for x in 5..=30u32 {
            magnitude[(20 * w + x) as usize] = 100.0;
            ridge.insert((x, 20u32));
        }
        // vertical arm at column 30, rows 5..=20
        for y in 5..=20u32 {
            let i = (y * w + 30) as usize;
            magnitude[i] = 100.0;
            direction[i] = EdgeDir::Vertical;
            ridge.insert((30u32, y));
        }
        let mut g = GradientMap::from_parts(w, h, magnitude, direction).unwrap();
        let anchors = extract_anchors(&mut g, 36.0, 8.0, 1).unwrap();
        let segs = link_edge_segments(&g, &anchors, 36.0, 0).unwrap();
        assert!(!segs.is_empty() && segs.len() <= 2, "{} chains", segs.len());
        let mut covered = HashSet::new();
        for seg in &segs {
            seg.validate().unwrap();
            for p in &seg.pixels {
                assert!(covered.insert((p.x, p.y)), "pixel covered twice");
                assert!(ridge.contains(&(p.x, p.y)), "chain left the ridge");
            }
        }
        // the walks should recover nearly the whole ridge
        assert!(covered.len() >= ridge.len() - 4);
    }

    #[test]
    fn detection_is_deterministic() {
        let mut img = constant_image(64, 64, 10);
        for y in 0..64 {
            for x in 0..64 {
                if (x / 7 + y / 5) % 2 == 0 {
                    img.set(x, y, 200);
                }
            }
        }
        let cfg = Config::default();
        let a = detect_edges(&img, &cfg, 0).unwrap();
        let b = detect_edges(&img, &cfg, 0).unwrap();
        assert_eq!(a.len(), b.len());
        for (sa, sb) in a.iter().zip(&b) {
            assert_eq!(sa.pixels, sb.pixels);
        }
        // pixel uniqueness across all chains of the keyframe
        let mut seen = HashSet::new();
        for seg in &a {
            for p in &seg.pixels {
                assert!(seen.insert((p.x, p.y)));
            }
        }
    }

    #[test]
    fn attach_depth_fills_only_covered_pixels() {
        let chain = EdgeSegment::new((0..10).map(|x| Pixel::new(x, 3)).collect(), 0);
        let mut depth = DepthMap::new(16, 16);
        for x in 0..10u32 {
            if x % 2 == 0 {
                depth.set(x, 3, 1.0 + x as f64);
            }
        }
        let out = attach_depth(std::slice::from_ref(&chain), &depth).unwrap();
        for (i, p) in out[0].pixels.iter().enumerate() {
            if i % 2 == 0 {
                assert_eq!(p.depth, Some(1.0 + i as f64));
            } else {
                assert_eq!(p.depth, None);
            }
        }
        // full and empty maps
        let empty = DepthMap::new(16, 16);
        assert!(attach_depth(std::slice::from_ref(&chain), &empty).unwrap()[0]
            .pixels
            .iter()
            .all(|p| p.depth.is_none()));
        let mut full = DepthMap::new(16, 16);
        for y in 0..16 {
            for x in 0..16 {
                full.set(x, y, 2.0);
            }
        }
        assert!(attach_depth(&[chain], &full).unwrap()[0]
            .pixels
            .iter()
            .all(|p| p.depth == Some(2.0)));
    }

    #[test]
    fn attach_depth_rejects_resolution_mismatch() {
        let chain = EdgeSegment::new(vec![Pixel::new(20, 3), Pixel::new(21, 3)], 0);
        let depth = DepthMap::new(16, 16);
        assert!(attach_depth(&[chain], &depth).is_err());
    }
}
