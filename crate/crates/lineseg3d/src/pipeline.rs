//! Batch orchestration of the extract -> cluster -> evaluate pipeline, shared
//! by the CLI binary and the integration tests.
//!
//! Extraction is keyframe-parallel with an ordered merge (collect preserves
//! input order), corruption and RANSAC are seeded per keyframe, and all
//! geometry outputs are byte-deterministic for a fixed seed. Wall-clock
//! timings go to their own file since they can never be reproducible.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baseline;
use crate::cluster::{cluster_incremental, Cluster};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::{
    self, count_vertices, icp_sim3, mean_vertex_distance, umeyama_sim3, EvalReport, Reconstruction,
};
use crate::export::{self, ExportFormat};
use crate::geom::{CameraIntrinsics, EdgeSegment, LineSegment3D, Pose, Sim3};
use crate::synthetic::{render_synthetic, SyntheticScene};
use crate::tum;

/// Default TUM RGB-D (Kinect) calibration, used when none is supplied.
pub fn default_tum_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(525.0, 525.0, 319.5, 239.5, 640, 480).expect("valid default intrinsics")
}

/// Which fitting method(s) to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    EdgeAided,
    Decoupled,
    Both,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::EdgeAided => "edge_aided",
            Method::Decoupled => "decoupled",
            Method::Both => "both",
        }
    }

    fn runs_edge_aided(&self) -> bool {
        matches!(self, Method::EdgeAided | Method::Both)
    }

    fn runs_decoupled(&self) -> bool {
        matches!(self, Method::Decoupled | Method::Both)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge_aided" => Ok(Method::EdgeAided),
            "decoupled" => Ok(Method::Decoupled),
            "both" => Ok(Method::Both),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected edge_aided|decoupled|both)"
            ))),
        }
    }
}

/// Everything one extraction run needs; copied into the output directory for
/// reproducibility.
#[derive(Debug, Clone)]
pub struct RunManifest {
    /// TUM directory or synthetic scene file.
    pub input: PathBuf,
    pub config: Config,
    pub method: Method,
    pub out_dir: PathBuf,
    /// Seed for every randomized stage (scene corruption, RANSAC).
    pub seed: u64,
    /// Keyframe subsampling stride.
    pub stride: usize,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
    /// Extra geometry export alongside the segment CSV.
    pub export: Option<ExportFormat>,
    /// Camera intrinsics for TUM input (synthetic scenes carry their own).
    pub intrinsics: Option<CameraIntrinsics>,
}

impl RunManifest {
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            config: Config::default(),
            method: Method::EdgeAided,
            out_dir: out_dir.into(),
            seed: 0,
            stride: 1,
            threads: 0,
            export: None,
            intrinsics: None,
        }
    }

    fn serialize(&self) -> String {
        let intr = self
            .intrinsics
            .map(|i| format!("{},{},{},{},{},{}", i.fx, i.fy, i.cx, i.cy, i.width, i.height))
            .unwrap_or_else(|| "default".into());
        format!(
            "input={}\nmethod={}\nseed={}\nstride={}\nthreads={}\nexport={}\nintrinsics={}\n--- config ---\n{}",
            self.input.display(),
            self.method.as_str(),
            self.seed,
            self.stride,
            self.threads,
            self.export
                .map(|f| match f {
                    ExportFormat::Obj => "obj",
                    ExportFormat::Ply => "ply",
                    ExportFormat::Csv => "csv",
                })
                .unwrap_or("none"),
            intr,
            self.config.to_key_values()
        )
    }
}

/// One keyframe as loaded: synthetic scenes carry chains directly, TUM
/// keyframes still need edge detection (which runs in the parallel stage).
enum RawItem {
    Chains {
        index: u32,
        pose: Pose,
        chains: Vec<EdgeSegment>,
    },
    Keyframe(Box<tum::Keyframe>),
}

/// One keyframe ready for fitting: chains with depth attached.
struct WorkItem {
    index: u32,
    pose: Pose,
    chains: Vec<EdgeSegment>,
}

fn prepare_item(raw: RawItem, config: &Config) -> Result<WorkItem> {
    match raw {
        RawItem::Chains {
            index,
            pose,
            chains,
        } => Ok(WorkItem {
            index,
            pose,
            chains,
        }),
        RawItem::Keyframe(kf) => {
            let chains = crate::edge_detect::detect_edges(&kf.image, config, kf.index)?;
            let semidense = tum::mask_to_semidense(&kf.depth, &chains);
            let chains = crate::edge_detect::attach_depth(&chains, &semidense)?;
            Ok(WorkItem {
                index: kf.index,
                pose: kf.pose,
                chains,
            })
        }
    }
}

/// Per-method extraction result for one run.
#[derive(Debug, Clone, Default)]
pub struct MethodOutput {
    pub segments: Vec<LineSegment3D>,
    pub per_keyframe_ms: Vec<f64>,
    pub csv_path: Option<PathBuf>,
}

impl MethodOutput {
    pub fn mean_ms(&self) -> Option<f64> {
        if self.per_keyframe_ms.is_empty() {
            None
        } else {
            Some(self.per_keyframe_ms.iter().sum::<f64>() / self.per_keyframe_ms.len() as f64)
        }
    }
}

/// Summary of an extraction run.
#[derive(Debug, Clone, Default)]
pub struct ExtractSummary {
    pub keyframes: usize,
    pub edge_aided: Option<MethodOutput>,
    pub decoupled: Option<MethodOutput>,
    pub skipped_frames: usize,
}

fn per_keyframe_seed(seed: u64, index: u32) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn load_raw_items(manifest: &RunManifest) -> Result<(Vec<RawItem>, CameraIntrinsics, usize)> {
    let input = &manifest.input;
    if input.is_dir() {
        let intr = manifest.intrinsics.unwrap_or_else(default_tum_intrinsics);
        let (keyframes, report) = tum::load_tum_sequence(input, manifest.stride, &intr)?;
        let items = keyframes
            .into_iter()
            .map(|kf| RawItem::Keyframe(Box::new(kf)))
            .collect();
        Ok((items, intr, report.skipped_frames))
    } else if input.is_file() {
        let scene = SyntheticScene::from_file(input)?;
        let intr = scene.intrinsics;
        let items = render_synthetic(&scene, manifest.seed, false)
            .into_iter()
            .step_by(manifest.stride.max(1))
            .map(|kf| RawItem::Chains {
                index: kf.index,
                pose: kf.pose,
                chains: kf.chains,
            })
            .collect();
        Ok((items, intr, 0))
    } else {
        Err(Error::Input(format!(
            "input path {} is neither a TUM directory nor a scene file",
            input.display()
        )))
    }
}

fn in_thread_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Run extraction per the manifest: detect/ingest chains, fit with the
/// requested method(s), and write segment CSVs, optional exports, a timing
/// report and a manifest copy under the output directory.
pub fn cmd_extract(manifest: &RunManifest) -> Result<ExtractSummary> {
    std::fs::create_dir_all(&manifest.out_dir)
        .map_err(|e| Error::Input(format!("cannot create {}: {e}", manifest.out_dir.display())))?;
    let (raw_items, intrinsics, skipped) = load_raw_items(manifest)?;
    let resolved = manifest.config.resolve(&intrinsics)?;

    struct KeyframeResult {
        edge_aided: Vec<LineSegment3D>,
        edge_ms: f64,
        decoupled: Vec<LineSegment3D>,
        dec_ms: f64,
    }

    let run_edge = manifest.method.runs_edge_aided();
    let run_dec = manifest.method.runs_decoupled();
    let seed = manifest.seed;
    let config = &manifest.config;
    let items: Vec<WorkItem> = in_thread_pool(manifest.threads, || {
        raw_items
            .into_par_iter()
            .map(|raw| prepare_item(raw, config))
            .collect::<Result<Vec<_>>>()
    })??;
    let results: Vec<KeyframeResult> = in_thread_pool(manifest.threads, || {
        items
            .par_iter()
            .map(|item| {
                let (edge_aided, edge_ms) = if run_edge {
                    eval::time_keyframe_fit(&item.chains, &resolved, &intrinsics, &item.pose)
                } else {
                    (Vec::new(), 0.0)
                };
                let (decoupled, dec_ms) = if run_dec {
                    let mut rng = ChaCha8Rng::seed_from_u64(per_keyframe_seed(seed, item.index));
                    let start = std::time::Instant::now();
                    let segs = baseline::fit_keyframe_decoupled(
                        &item.chains,
                        &resolved,
                        &intrinsics,
                        &item.pose,
                        &mut rng,
                    );
                    (segs, start.elapsed().as_secs_f64() * 1000.0)
                } else {
                    (Vec::new(), 0.0)
                };
                KeyframeResult {
                    edge_aided,
                    edge_ms,
                    decoupled,
                    dec_ms,
                }
            })
            .collect()
    })?;

    let mut summary = ExtractSummary {
        keyframes: items.len(),
        skipped_frames: skipped,
        ..Default::default()
    };
    let mut timing = String::from("kf,method,ms\n");

    let write_method = |name: &str,
                        segments: Vec<LineSegment3D>,
                        times: Vec<f64>|
     -> Result<MethodOutput> {
        let csv_path = manifest.out_dir.join(format!("segments_{name}.csv"));
        std::fs::write(&csv_path, export::segments_to_csv(&segments, name))
            .map_err(|e| Error::Input(format!("cannot write {}: {e}", csv_path.display())))?;
        if let Some(format) = manifest.export {
            let ext = match format {
                ExportFormat::Obj => "obj",
                ExportFormat::Ply => "ply",
                ExportFormat::Csv => "csv",
            };
            if format != ExportFormat::Csv {
                let path = manifest.out_dir.join(format!("segments_{name}.{ext}"));
                export::write_segments(&path, &segments, name, format)?;
            }
        }
        Ok(MethodOutput {
            segments,
            per_keyframe_ms: times,
            csv_path: Some(csv_path),
        })
    };

    if run_edge {
        let mut segments = Vec::new();
        let mut times = Vec::with_capacity(results.len());
        for (item, r) in items.iter().zip(&results) {
            segments.extend(r.edge_aided.iter().copied());
            timing.push_str(&format!("{},edge_aided,{:.4}\n", item.index, r.edge_ms));
            times.push(r.edge_ms);
        }
        summary.edge_aided = Some(write_method("edge_aided", segments, times)?);
    }
    if run_dec {
        let mut segments = Vec::new();
        let mut times = Vec::with_capacity(results.len());
        for (item, r) in items.iter().zip(&results) {
            segments.extend(r.decoupled.iter().copied());
            timing.push_str(&format!("{},decoupled,{:.4}\n", item.index, r.dec_ms));
            times.push(r.dec_ms);
        }
        summary.decoupled = Some(write_method("decoupled", segments, times)?);
    }

    if let Some(out) = &summary.edge_aided {
        if let Some(ms) = out.mean_ms() {
            timing.push_str(&format!("# mean edge_aided ms per keyframe: {ms:.4}\n"));
        }
    }
    if let Some(out) = &summary.decoupled {
        if let Some(ms) = out.mean_ms() {
            timing.push_str(&format!("# mean decoupled ms per keyframe: {ms:.4}\n"));
        }
    }
    std::fs::write(manifest.out_dir.join("timing.txt"), timing)?;
    std::fs::write(manifest.out_dir.join("manifest.txt"), manifest.serialize())?;
    Ok(summary)
}

/// Summary of a clustering run.
#[derive(Debug, Clone)]
pub struct ClusterSummary {
    pub clusters: Vec<Cluster>,
    pub input_segments: usize,
    pub vertices_before: usize,
    pub vertices_after: usize,
    pub clusters_path: PathBuf,
}

impl ClusterSummary {
    /// Vertex compression ratio, `None` when there was no input.
    pub fn compression(&self) -> Option<f64> {
        (self.vertices_after > 0).then(|| self.vertices_before as f64 / self.vertices_after as f64)
    }

    pub fn ratio_text(&self) -> String {
        self.compression()
            .map_or("n/a".into(), |r| format!("{r:.2}x"))
    }
}

/// Cluster a segment CSV and write the cluster table (plus optional geometry
/// export of the representatives).
pub fn cmd_cluster(
    segments_csv: &Path,
    config: &Config,
    out_dir: &Path,
    export_format: Option<ExportFormat>,
) -> Result<ClusterSummary> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Input(format!("cannot create {}: {e}", out_dir.display())))?;
    let text = std::fs::read_to_string(segments_csv)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", segments_csv.display())))?;
    let rows = export::segments_from_csv(&text)?;
    let segments: Vec<LineSegment3D> = rows.iter().map(|(s, _)| *s).collect();
    let clusters = cluster_incremental(&segments, config);

    let clusters_path = out_dir.join("clusters.csv");
    std::fs::write(&clusters_path, export::clusters_to_csv(&clusters))
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", clusters_path.display())))?;
    if let Some(format) = export_format {
        if format != ExportFormat::Csv {
            let reps: Vec<LineSegment3D> = clusters.iter().map(|c| c.representative).collect();
            let ext = if format == ExportFormat::Obj { "obj" } else { "ply" };
            export::write_segments(
                &out_dir.join(format!("clusters.{ext}")),
                &reps,
                "clustered",
                format,
            )?;
        }
    }
    Ok(ClusterSummary {
        vertices_before: count_vertices(Reconstruction::Segments(&segments)),
        vertices_after: count_vertices(Reconstruction::Clusters(&clusters)),
        input_segments: segments.len(),
        clusters,
        clusters_path,
    })
}

/// How to align reconstruction coordinates to the ground-truth cloud.
#[derive(Debug, Clone)]
pub enum Alignment {
    Identity,
    /// Full ICP from an identity initialization.
    Icp,
    /// Closed-form similarity from a pairing file ("sx sy sz dx dy dz" rows).
    Pairs(PathBuf),
}

type PointPairs = (Vec<nalgebra::Vector3<f64>>, Vec<nalgebra::Vector3<f64>>);

fn read_pairs(path: &Path) -> Result<PointPairs> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Input(format!("{}:{}: bad number", path.display(), idx + 1)))?;
        if vals.len() != 6 {
            return Err(Error::Input(format!(
                "{}:{}: expected 6 values",
                path.display(),
                idx + 1
            )));
        }
        src.push(nalgebra::Vector3::new(vals[0], vals[1], vals[2]));
        dst.push(nalgebra::Vector3::new(vals[3], vals[4], vals[5]));
    }
    Ok((src, dst))
}

/// Evaluate a segment CSV (or cluster CSV) against a ground-truth PLY cloud:
/// align, then report mean vertex distance, vertex count and timing columns.
/// Returns one report per method tag present in the file.
pub fn cmd_eval(
    geometry_csv: &Path,
    gt_ply: &Path,
    alignment: &Alignment,
    out_dir: &Path,
) -> Result<Vec<EvalReport>> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Input(format!("cannot create {}: {e}", out_dir.display())))?;
    let gt = export::read_ply_cloud(gt_ply)?;
    let text = std::fs::read_to_string(geometry_csv)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", geometry_csv.display())))?;

    // either a segment csv or a cluster csv
    let groups: Vec<(String, Vec<LineSegment3D>)> = if text.starts_with(export::CLUSTER_CSV_HEADER)
    {
        vec![(
            "clustered".to_string(),
            export::cluster_representatives_from_csv(&text)?,
        )]
    } else {
        let rows = export::segments_from_csv(&text)?;
        let mut by_method: Vec<(String, Vec<LineSegment3D>)> = Vec::new();
        for (seg, method) in rows {
            match by_method.iter_mut().find(|(m, _)| *m == method) {
                Some((_, v)) => v.push(seg),
                None => by_method.push((method, vec![seg])),
            }
        }
        by_method
    };
    if groups.is_empty() {
        return Err(Error::Input(format!(
            "{} contains no segments",
            geometry_csv.display()
        )));
    }

    let mut reports = Vec::new();
    let mut text_out = String::new();
    let mut csv_out = String::from(EvalReport::csv_header());
    csv_out.push('\n');
    for (method, segments) in &groups {
        let align = match alignment {
            Alignment::Identity => Sim3::identity(),
            Alignment::Icp => {
                let endpoints: Vec<nalgebra::Vector3<f64>> = segments
                    .iter()
                    .flat_map(|s| [s.p1, s.p2])
                    .collect();
                icp_sim3(&endpoints, &gt, &Sim3::identity(), 50, 1e-9)?.transform
            }
            Alignment::Pairs(path) => {
                let (src, dst) = read_pairs(path)?;
                umeyama_sim3(&src, &dst)?
            }
        };
        let mean_mm = mean_vertex_distance(segments, &gt, &align)?;
        let report = EvalReport {
            method: method.clone(),
            mean_distance_mm: Some(mean_mm),
            vertex_count: count_vertices(Reconstruction::Segments(segments)),
            per_keyframe_ms: Vec::new(),
        };
        text_out.push_str(&report.to_text());
        text_out.push('\n');
        csv_out.push_str(&report.to_csv_row());
        csv_out.push('\n');
        reports.push(report);
    }
    std::fs::write(out_dir.join("eval.txt"), text_out)?;
    std::fs::write(out_dir.join("eval.csv"), csv_out)?;
    Ok(reports)
}
