//! Geometry serialization round-trip: OBJ, PLY and CSV writers for the same
//! segment set.
//!
//! ```bash
//! cargo run --example export_formats -- /tmp/lineseg3d_export
//! ```

use nalgebra::Vector3;

use lineseg3d::export::{
    segments_from_csv, segments_to_csv, write_ply_cloud, write_segments, ExportFormat,
};
use lineseg3d::geom::LineSegment3D;
use lineseg3d::synthetic::SyntheticScene;

fn main() -> lineseg3d::Result<()> {
    let out_dir = std::path::PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "export_demo".to_string()),
    );
    std::fs::create_dir_all(&out_dir)?;

    let segments: Vec<LineSegment3D> = SyntheticScene::wireframe_cube(1.0);

    for (format, name) in [
        (ExportFormat::Obj, "cube.obj"),
        (ExportFormat::Ply, "cube.ply"),
        (ExportFormat::Csv, "cube.csv"),
    ] {
        let path = out_dir.join(name);
        write_segments(&path, &segments, "demo", format)?;
        println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    }

    // CSV is the pipeline's interchange format and round-trips to 1e-9
    let csv = segments_to_csv(&segments, "demo");
    let parsed = segments_from_csv(&csv)?;
    let worst = segments
        .iter()
        .zip(&parsed)
        .map(|(a, (b, _))| (a.p1 - b.p1).norm().max((a.p2 - b.p2).norm()))
        .fold(0.0f64, f64::max);
    println!("csv round-trip worst endpoint error: {worst:.2e} m");

    // point clouds use PLY (ascii out, ascii/binary little-endian in)
    let cloud: Vec<Vector3<f64>> = segments
        .iter()
        .flat_map(|s| (0..=50).map(move |i| s.p1 + (i as f64 / 50.0) * (s.p2 - s.p1)))
        .collect();
    let ply = out_dir.join("cube_cloud.ply");
    write_ply_cloud(&ply, &cloud)?;
    let reread = lineseg3d::export::read_ply_cloud(&ply)?;
    println!(
        "wrote and re-read {} with {} points",
        ply.display(),
        reread.len()
    );
    Ok(())
}
