//! Full reconstruction of a noisy synthetic wireframe room: incremental
//! two-plane fitting per keyframe, then cluster merging, then OBJ export.
//!
//! ```bash
//! cargo run --example fit_wireframe -- /tmp/wireframe.obj
//! ```

use lineseg3d::cluster::cluster_incremental;
use lineseg3d::config::Config;
use lineseg3d::fitter::fit_keyframe;
use lineseg3d::geom::{CameraIntrinsics, LineSegment3D};
use lineseg3d::synthetic::{render_synthetic, NoiseParams, SyntheticScene};

fn main() -> lineseg3d::Result<()> {
    let out_path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "wireframe.obj".to_string());

    let intr = CameraIntrinsics::new(160.0, 160.0, 319.5, 239.5, 640, 480)?;
    let noise = NoiseParams {
        depth_sigma: 0.01,
        dropout: 0.10,
        outlier_frac: 0.0,
    };
    let scene = SyntheticScene::cube_scene(5.0, 20, intr, noise);
    let cfg = Config::default();
    let resolved = cfg.resolve(&intr)?;

    let frames = render_synthetic(&scene, 11, false);
    let mut segments: Vec<LineSegment3D> = Vec::new();
    for frame in &frames {
        segments.extend(fit_keyframe(&frame.chains, &resolved, &intr, &frame.pose));
    }
    println!(
        "fitted {} segments across {} keyframes",
        segments.len(),
        frames.len()
    );

    let clusters = cluster_incremental(&segments, &cfg);
    println!(
        "merged into {} clusters (vertex compression {:.1}x)",
        clusters.len(),
        segments.len() as f64 / clusters.len().max(1) as f64
    );

    let mean_err: f64 = segments
        .iter()
        .flat_map(|s| [s.p1, s.p2])
        .map(|p| {
            scene
                .segments
                .iter()
                .map(|g| g.distance_to_point(&p))
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / (2 * segments.len()) as f64;
    println!("mean endpoint error vs ground truth: {:.1} mm", mean_err * 1000.0);

    let representatives: Vec<LineSegment3D> = clusters.iter().map(|c| c.representative).collect();
    lineseg3d::export::write_segments(
        std::path::Path::new(&out_path),
        &representatives,
        "clustered",
        lineseg3d::export::ExportFormat::Obj,
    )?;
    println!("wrote {out_path}");
    Ok(())
}
