//! Run the full pipeline on a TUM RGB-D directory: edge detection, semi-dense
//! masking, incremental fitting, clustering and OBJ export.
//!
//! ```bash
//! cargo run --example tum_pipeline -- /data/rgbd_dataset_freiburg1_room [stride]
//! ```

use lineseg3d::cluster::cluster_incremental;
use lineseg3d::config::Config;
use lineseg3d::edge_detect::{attach_depth, detect_edges};
use lineseg3d::fitter::fit_keyframe;
use lineseg3d::geom::LineSegment3D;
use lineseg3d::pipeline::default_tum_intrinsics;
use lineseg3d::tum::{load_tum_sequence, mask_to_semidense};

fn main() -> lineseg3d::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(dir) = args.next() else {
        eprintln!("usage: tum_pipeline <tum-directory> [stride]");
        eprintln!("expects rgb.txt, depth.txt and groundtruth.txt inside the directory");
        return Ok(());
    };
    let stride: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);

    let intrinsics = default_tum_intrinsics();
    let cfg = Config::default();
    let resolved = cfg.resolve(&intrinsics)?;

    let (keyframes, report) = load_tum_sequence(std::path::Path::new(&dir), stride, &intrinsics)?;
    println!(
        "loaded {} keyframes (stride {stride}, {} frames skipped by association)",
        keyframes.len(),
        report.skipped_frames
    );

    let mut segments: Vec<LineSegment3D> = Vec::new();
    for kf in &keyframes {
        let chains = detect_edges(&kf.image, &cfg, kf.index)?;
        let semidense = mask_to_semidense(&kf.depth, &chains);
        let chains = attach_depth(&chains, &semidense)?;
        let fitted = fit_keyframe(&chains, &resolved, &kf.intrinsics, &kf.pose);
        println!(
            "keyframe {:>3} @ {:.3}: {} chains, {} depth px, {} segments",
            kf.index,
            kf.timestamp,
            chains.len(),
            semidense.coverage(),
            fitted.len()
        );
        segments.extend(fitted);
    }

    let clusters = cluster_incremental(&segments, &cfg);
    println!(
        "{} segments -> {} clusters ({} vertices -> {})",
        segments.len(),
        clusters.len(),
        2 * segments.len(),
        2 * clusters.len()
    );

    let reps: Vec<LineSegment3D> = clusters.iter().map(|c| c.representative).collect();
    lineseg3d::export::write_segments(
        std::path::Path::new("tum_lines.obj"),
        &reps,
        "clustered",
        lineseg3d::export::ExportFormat::Obj,
    )?;
    println!("wrote tum_lines.obj");
    Ok(())
}
