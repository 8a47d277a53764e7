//! Thin batch CLI over the library pipeline: extract, cluster, eval.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lineseg3d::config::Config;
use lineseg3d::error::{Error, Result};
use lineseg3d::export::ExportFormat;
use lineseg3d::geom::CameraIntrinsics;
use lineseg3d::pipeline::{self, Alignment, Method, RunManifest};

#[derive(Parser)]
#[command(
    name = "lineseg3d",
    about = "3D line segment extraction, clustering and evaluation for posed keyframes with semi-dense depth"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Threshold config file (key=value); defaults match the standard
    /// parameter schedule.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fold cluster angles to [0,90°] (undirected lines).
    #[arg(long)]
    fold_angle: Option<bool>,
    /// Outlier counting mode for segment closure.
    #[arg(long, value_parser = ["consecutive", "total"])]
    outlier_mode: Option<String>,
}

impl ConfigArgs {
    fn build(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::from_file(path)?,
            None => Config::default(),
        };
        if let Some(fold) = self.fold_angle {
            cfg.fold_angle = fold;
        }
        if let Some(mode) = &self.outlier_mode {
            cfg.outlier_mode = mode.parse()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract 3D line segments from a TUM RGB-D directory or a synthetic
    /// scene file.
    Extract {
        /// TUM directory (rgb.txt/depth.txt/groundtruth.txt) or scene file.
        #[arg(long)]
        input: PathBuf,
        /// Output directory for segment CSVs, timing and the manifest copy.
        #[arg(long)]
        out: PathBuf,
        /// Fitting method to run.
        #[arg(long, default_value = "edge_aided", value_parser = ["edge_aided", "decoupled", "both"])]
        method: String,
        /// Keyframe subsampling stride.
        #[arg(long, default_value_t = 10)]
        stride: usize,
        /// Seed for randomized stages (scene corruption, RANSAC).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Extra geometry export alongside the CSV.
        #[arg(long, value_parser = ["obj", "ply", "csv"])]
        export: Option<String>,
        /// TUM camera intrinsics as fx,fy,cx,cy,width,height.
        #[arg(long)]
        intrinsics: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Merge a segment CSV into clusters and report the compression.
    Cluster {
        /// Segment CSV produced by `extract`.
        #[arg(long)]
        segments: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = ["obj", "ply"])]
        export: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate segments or clusters against a ground-truth PLY cloud.
    Eval {
        /// Segment CSV or cluster CSV.
        #[arg(long)]
        segments: PathBuf,
        /// Ground-truth point cloud (ascii or binary little-endian PLY).
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Align by ICP before measuring.
        #[arg(long, conflicts_with = "pairs")]
        icp: bool,
        /// Align by a pairing file of "sx sy sz dx dy dz" rows.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
}

fn parse_intrinsics(text: &str) -> Result<CameraIntrinsics> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad intrinsics '{text}'")))?;
    if vals.len() != 6 {
        return Err(Error::Config(
            "intrinsics need fx,fy,cx,cy,width,height".into(),
        ));
    }
    CameraIntrinsics::new(
        vals[0],
        vals[1],
        vals[2],
        vals[3],
        vals[4] as u32,
        vals[5] as u32,
    )
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract {
            input,
            out,
            method,
            stride,
            seed,
            threads,
            export,
            intrinsics,
            config,
        } => {
            let manifest = RunManifest {
                input,
                config: config.build()?,
                method: method.parse::<Method>()?,
                out_dir: out,
                seed,
                stride,
                threads,
                export: export.as_deref().map(str::parse).transpose()?,
                intrinsics: intrinsics.as_deref().map(parse_intrinsics).transpose()?,
            };
            let summary = pipeline::cmd_extract(&manifest)?;
            println!(
                "extracted {} keyframes ({} skipped by association)",
                summary.keyframes, summary.skipped_frames
            );
            for (name, output) in [
                ("edge_aided", summary.edge_aided.as_ref()),
                ("decoupled", summary.decoupled.as_ref()),
            ] {
                if let Some(o) = output {
                    println!(
                        "{name}: {} segments, mean fit {:.3} ms/keyframe -> {}",
                        o.segments.len(),
                        o.mean_ms().unwrap_or(0.0),
                        o.csv_path
                            .as_ref()
                            .map(|p| p.display().to_string())
                            .unwrap_or_default()
                    );
                }
            }
            Ok(())
        }
        Command::Cluster {
            segments,
            out,
            export,
            config,
        } => {
            let format = export
                .as_deref()
                .map(str::parse::<ExportFormat>)
                .transpose()?;
            let summary = pipeline::cmd_cluster(&segments, &config.build()?, &out, format)?;
            println!(
                "{} segments -> {} clusters; vertices {} -> {} (compression {})",
                summary.input_segments,
                summary.clusters.len(),
                summary.vertices_before,
                summary.vertices_after,
                summary.ratio_text()
            );
            Ok(())
        }
        Command::Eval {
            segments,
            gt,
            out,
            icp,
            pairs,
        } => {
            let alignment = match (icp, pairs) {
                (true, _) => Alignment::Icp,
                (false, Some(p)) => Alignment::Pairs(p),
                (false, None) => Alignment::Identity,
            };
            let reports = pipeline::cmd_eval(&segments, &gt, &alignment, &out)?;
            for r in &reports {
                println!("{}", r.to_text());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
