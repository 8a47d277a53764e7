//! Alignment and evaluation against a ground-truth scan: recover a known
//! similarity transform by ICP, then measure endpoint-to-surface distances.
//!
//! ```bash
//! cargo run --example evaluate_alignment
//! ```

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lineseg3d::eval::{
    count_vertices, icp_sim3, mean_vertex_distance, PointCloud, Reconstruction,
};
use lineseg3d::geom::{Frame, LineSegment3D, Sim3};
use lineseg3d::synthetic::SyntheticScene;

fn main() -> lineseg3d::Result<()> {
    // ground truth: a dense sampling of a 2 m wireframe cube
    let gt_segments = SyntheticScene::wireframe_cube(2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gt_points: Vec<Vector3<f64>> = gt_segments
        .iter()
        .flat_map(|s| {
            (0..=400).map(move |i| {
                let t = i as f64 / 400.0;
                s.p1 + t * (s.p2 - s.p1)
            })
        })
        .collect();
    let gt = PointCloud::from_points(gt_points)?;
    println!(
        "ground truth: {} points, median spacing {:.1} mm",
        count_vertices(Reconstruction::Cloud(&gt)),
        gt.median_nn_spacing().unwrap_or(0.0) * 1000.0
    );

    // a reconstruction in its own coordinate frame: the cube edges with some
    // endpoint noise, displaced by an unknown similarity transform. ICP wants
    // a rough initial alignment, so keep the displacement small (the
    // correspondence rejection radius is a few median spacings).
    let unknown = Sim3::new(
        0.995,
        *nalgebra::Rotation3::from_euler_angles(0.004, -0.003, 0.008).matrix(),
        Vector3::new(0.012, -0.008, 0.015),
    )?;
    let jitter = |rng: &mut ChaCha8Rng| {
        Vector3::new(
            (rng.random::<f64>() - 0.5) * 0.01,
            (rng.random::<f64>() - 0.5) * 0.01,
            (rng.random::<f64>() - 0.5) * 0.01,
        )
    };
    let reconstruction: Vec<LineSegment3D> = gt_segments
        .iter()
        .map(|s| {
            LineSegment3D::new(
                unknown.apply(&s.p1) + jitter(&mut rng),
                unknown.apply(&s.p2) + jitter(&mut rng),
                Frame::World,
                0,
            )
            .unwrap()
        })
        .collect();

    let raw_mm = mean_vertex_distance(&reconstruction, &gt, &Sim3::identity())?;
    println!("mean vertex distance before alignment: {raw_mm:.1} mm");

    // align the endpoints to the scan and evaluate again
    let endpoints: Vec<Vector3<f64>> = reconstruction
        .iter()
        .flat_map(|s| [s.p1, s.p2])
        .collect();
    let icp = icp_sim3(&endpoints, &gt, &Sim3::identity(), 100, 1e-10)?;
    println!(
        "ICP converged in {} iterations, final rms {:.2} mm, scale {:.4}",
        icp.iterations,
        icp.rms_history.last().unwrap() * 1000.0,
        icp.transform.scale
    );

    let aligned_mm = mean_vertex_distance(&reconstruction, &gt, &icp.transform)?;
    println!(
        "mean vertex distance after alignment: {aligned_mm:.2} mm over {} vertices",
        count_vertices(Reconstruction::Segments(&reconstruction))
    );
    Ok(())
}
