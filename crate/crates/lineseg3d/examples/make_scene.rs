//! Write synthetic scene files for the `lineseg3d` CLI.
//!
//! ```bash
//! cargo run --example make_scene -- /tmp/scenes
//! lineseg3d extract --input /tmp/scenes/cube.txt --out /tmp/run --method both --stride 1
//! ```

use lineseg3d::geom::CameraIntrinsics;
use lineseg3d::synthetic::{NoiseParams, SyntheticScene};

fn main() -> lineseg3d::Result<()> {
    let out_dir = std::path::PathBuf::from(
        std::env::args().nth(1).unwrap_or_else(|| "scenes".to_string()),
    );
    std::fs::create_dir_all(&out_dir)?;

    // the wireframe room: 5 m cube, 20 keyframes, 10 mm depth noise
    let intr = CameraIntrinsics::new(160.0, 160.0, 319.5, 239.5, 640, 480)?;
    let cube = SyntheticScene::cube_scene(
        5.0,
        20,
        intr,
        NoiseParams {
            depth_sigma: 0.01,
            dropout: 0.10,
            outlier_frac: 0.0,
        },
    );
    let cube_path = out_dir.join("cube.txt");
    std::fs::write(&cube_path, cube.serialize())?;
    println!(
        "wrote {} ({} segments, {} keyframes)",
        cube_path.display(),
        cube.segments.len(),
        cube.trajectory.len()
    );

    // a clean variant for clustering demos
    let clean = SyntheticScene::cube_scene(5.0, 20, intr, NoiseParams::default());
    let clean_path = out_dir.join("cube_clean.txt");
    std::fs::write(&clean_path, clean.serialize())?;
    println!("wrote {}", clean_path.display());

    // The scene renderer emits one chain per ground-truth segment, so a scene
    // file cannot hide a depth discontinuity inside a single chain; the
    // single-chain failure-mode comparison lives in the depth_step example.
    Ok(())
}
