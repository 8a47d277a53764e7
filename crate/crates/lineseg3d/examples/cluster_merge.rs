//! Incremental cluster merging step by step: how the angle and distance
//! gates group segments and how the representative refit extends.
//!
//! ```bash
//! cargo run --example cluster_merge
//! ```

use nalgebra::Vector3;

use lineseg3d::cluster::{angle_measure, assign, cluster_incremental, distance_measure};
use lineseg3d::config::Config;
use lineseg3d::geom::{Frame, LineSegment3D};

fn seg(p1: [f64; 3], p2: [f64; 3], kf: u32) -> LineSegment3D {
    LineSegment3D::new(Vector3::from(p1), Vector3::from(p2), Frame::World, kf).unwrap()
}

fn main() {
    let cfg = Config::default();

    // three observations of one edge (overlapping, slightly offset), one
    // perpendicular segment, one far away
    let stream = vec![
        seg([0.0, 0.0, 1.0], [0.6, 0.0, 1.0], 0),
        seg([0.4, 0.004, 1.0], [1.0, 0.004, 1.0], 1),
        seg([0.1, -0.003, 1.002], [0.9, -0.003, 1.002], 2),
        seg([0.5, 0.0, 1.0], [0.5, 0.6, 1.0], 0),
        seg([4.0, 4.0, 2.0], [4.8, 4.0, 2.0], 1),
    ];

    println!("pairwise measures against the first segment:");
    for (i, s) in stream.iter().enumerate().skip(1) {
        println!(
            "  segment {i}: angle {:6.2} deg, distance {:.4} m",
            angle_measure(&stream[0], s, cfg.fold_angle).unwrap(),
            distance_measure(&stream[0], s)
        );
    }

    // watch assignment decisions unfold
    let mut clusters: Vec<lineseg3d::cluster::Cluster> = Vec::new();
    for (i, s) in stream.iter().enumerate() {
        match assign(s, &clusters, cfg.lambda_alpha, cfg.lambda_d, cfg.fold_angle) {
            Some(cidx) => {
                println!("segment {i} joins cluster {cidx}");
                let c = &mut clusters[cidx];
                c.members.push(i);
                c.endpoints.push(s.p1);
                c.endpoints.push(s.p2);
                if let Ok(rep) = lineseg3d::cluster::refit_cluster(c) {
                    let r = &rep;
                    println!(
                        "  representative now spans {:.3} m ({:.3},{:.3},{:.3}) -> ({:.3},{:.3},{:.3})",
                        r.length(), r.p1.x, r.p1.y, r.p1.z, r.p2.x, r.p2.y, r.p2.z
                    );
                    c.representative = rep;
                }
            }
            None => {
                println!("segment {i} founds cluster {}", clusters.len());
                clusters.push(lineseg3d::cluster::Cluster {
                    representative: *s,
                    members: vec![i],
                    endpoints: vec![s.p1, s.p2],
                });
            }
        }
    }

    let mut relaxed = cfg.clone();
    relaxed.lambda_c = 1;
    let all = cluster_incremental(&stream, &relaxed);
    println!("\nwith lambda_c=1: {} clusters", all.len());
    for (i, c) in all.iter().enumerate() {
        let r = c.representative;
        println!(
            "  cluster {i}: {} members, representative ({:.3},{:.3},{:.3}) -> ({:.3},{:.3},{:.3})",
            c.size(),
            r.p1.x,
            r.p1.y,
            r.p1.z,
            r.p2.x,
            r.p2.y,
            r.p2.z
        );
    }

    let filtered = cluster_incremental(&stream, &cfg);
    println!(
        "with lambda_c={}: {} cluster(s) survive the size gate",
        cfg.lambda_c,
        filtered.len()
    );
}
