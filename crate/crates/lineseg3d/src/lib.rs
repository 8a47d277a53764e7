//! Extraction, merging and evaluation of 3D line segments from posed
//! keyframes with semi-dense depth maps.
//!
//! The pipeline stages are:
//!
//! 1. **edge_detect** – one-pixel-wide edge chains from a grayscale keyframe
//!    (gradient, anchors, smart-routing walks).
//! 2. **fitter** – incremental two-plane line growing along each chain:
//!    a pixel extends the current segment only while it stays close to both
//!    the image-plane line and the depth-plane line.
//! 3. **baseline** – the decoupled comparison method: image-only 2D segments
//!    first, then a RANSAC depth-line fit.
//! 4. **cluster** – greedy incremental merging of registered world-frame
//!    segments by angle/distance gates, with an SVD refit per cluster.
//! 5. **eval** – Sim(3) alignment (Umeyama, ICP) and distance/compactness/
//!    timing metrics against a ground-truth point cloud.
//! 6. **synthetic / tum / export** – scene generation, TUM RGB-D ingestion
//!    and OBJ/PLY/CSV geometry serialization.
//!
//! See the crate examples for one runnable program per capability, and the
//! `lineseg3d` binary for the batch extract/cluster/eval interface.

pub mod baseline;
pub mod cluster;
pub mod config;
pub mod edge_detect;
pub mod error;
pub mod eval;
pub mod export;
pub mod fit2d;
pub mod fitter;
pub mod geom;
pub mod pipeline;
pub mod synthetic;
pub mod tum;

pub use config::{Config, OutlierMode, ResolvedConfig};
pub use error::{Error, Result};
pub use geom::{
    CameraIntrinsics, DepthMap, EdgeSegment, Frame, GrayImage, LineSegment3D, Pixel, Pose, Sim3,
};
