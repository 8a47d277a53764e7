//! Edge detection on a rasterized synthetic wireframe: gradient, anchors,
//! and linked pixel chains.
//!
//! ```bash
//! cargo run --example detect_edges
//! ```

use lineseg3d::config::Config;
use lineseg3d::edge_detect::{compute_gradient, extract_anchors, link_edge_segments};
use lineseg3d::geom::CameraIntrinsics;
use lineseg3d::synthetic::{render_synthetic, NoiseParams, SyntheticScene};

fn main() -> lineseg3d::Result<()> {
    let intr = CameraIntrinsics::new(160.0, 160.0, 319.5, 239.5, 640, 480)?;
    let scene = SyntheticScene::cube_scene(2.0, 4, intr, NoiseParams::default());
    let frames = render_synthetic(&scene, 1, true);
    let cfg = Config::default();

    for frame in &frames {
        let image = frame.image.as_ref().expect("rasterization enabled");
        let mut gradient = compute_gradient(image)?;
        let anchors = extract_anchors(
            &mut gradient,
            cfg.gradient_threshold,
            cfg.anchor_threshold,
            cfg.scan_interval,
        )?;
        let chains = link_edge_segments(&gradient, &anchors, cfg.gradient_threshold, frame.index)?;
        let pixels: usize = chains.iter().map(|c| c.len()).sum();
        let longest = chains.iter().map(|c| c.len()).max().unwrap_or(0);
        println!(
            "keyframe {}: {} anchors -> {} chains covering {} pixels (longest {})",
            frame.index,
            anchors.len(),
            chains.len(),
            pixels,
            longest
        );
    }
    Ok(())
}
