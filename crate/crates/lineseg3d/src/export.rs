//! Geometry serialization: segment CSV (the pipeline's interchange format),
//! OBJ and PLY polyline export, cluster CSV, and ground-truth PLY clouds.
//!
//! All writers are byte-for-byte deterministic for identical input.

use std::fmt::Write as _;
use std::io::{BufRead, Read};
use std::path::Path;

use nalgebra::Vector3;

use crate::cluster::Cluster;
use crate::error::{Error, Result};
use crate::eval::PointCloud;
use crate::geom::{Frame, LineSegment3D};

/// Geometry export formats for the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Obj,
    Ply,
    Csv,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "obj" => Ok(Self::Obj),
            "ply" => Ok(Self::Ply),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!(
                "unknown export format '{other}' (expected obj|ply|csv)"
            ))),
        }
    }
}

pub const SEGMENT_CSV_HEADER: &str = "kf_id,method,x1,y1,z1,x2,y2,z2";

/// Segment CSV: one row per segment, 9 decimal places (round-trips to 1e-9
/// for scene-scale coordinates).
pub fn segments_to_csv(segments: &[LineSegment3D], method: &str) -> String {
    let mut out = String::with_capacity(64 * segments.len() + 32);
    out.push_str(SEGMENT_CSV_HEADER);
    out.push('\n');
    for s in segments {
        let _ = writeln!(
            out,
            "{},{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
            s.keyframe, method, s.p1.x, s.p1.y, s.p1.z, s.p2.x, s.p2.y, s.p2.z
        );
    }
    out
}

/// Parse a segment CSV produced by `segments_to_csv`. Rows are world-frame;
/// malformed rows are reported with their 1-based row number.
pub fn segments_from_csv(text: &str) -> Result<Vec<(LineSegment3D, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let row = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line == SEGMENT_CSV_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Input(format!(
                "segment csv row {row}: expected 8 fields, got {}",
                fields.len()
            )));
        }
        let kf: u32 = fields[0]
            .parse()
            .map_err(|_| Error::Input(format!("segment csv row {row}: bad keyframe id")))?;
        let method = fields[1].to_string();
        let mut coords = [0.0f64; 6];
        for (i, f) in fields[2..].iter().enumerate() {
            coords[i] = f
                .parse()
                .map_err(|_| Error::Input(format!("segment csv row {row}: bad coordinate")))?;
        }
        let seg = LineSegment3D::new(
            Vector3::new(coords[0], coords[1], coords[2]),
            Vector3::new(coords[3], coords[4], coords[5]),
            Frame::World,
            kf,
        )
        .map_err(|_| Error::Input(format!("segment csv row {row}: zero-length segment")))?;
        out.push((seg, method));
    }
    Ok(out)
}

/// OBJ polylines: two `v` entries and one `l` element per segment (1-based).
pub fn segments_to_obj(segments: &[LineSegment3D]) -> String {
    let mut out = String::with_capacity(64 * segments.len() + 16);
    for s in segments {
        let _ = writeln!(out, "v {:.9} {:.9} {:.9}", s.p1.x, s.p1.y, s.p1.z);
        let _ = writeln!(out, "v {:.9} {:.9} {:.9}", s.p2.x, s.p2.y, s.p2.z);
    }
    for i in 0..segments.len() {
        let _ = writeln!(out, "l {} {}", 2 * i + 1, 2 * i + 2);
    }
    out
}

/// ASCII PLY with vertex and edge elements.
pub fn segments_to_ply(segments: &[LineSegment3D]) -> String {
    let mut out = String::with_capacity(96 * segments.len() + 256);
    let _ = write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nelement edge {}\nproperty int vertex1\nproperty int vertex2\nend_header\n",
        2 * segments.len(),
        segments.len()
    );
    for s in segments {
        let _ = writeln!(out, "{:.9} {:.9} {:.9}", s.p1.x, s.p1.y, s.p1.z);
        let _ = writeln!(out, "{:.9} {:.9} {:.9}", s.p2.x, s.p2.y, s.p2.z);
    }
    for i in 0..segments.len() {
        let _ = writeln!(out, "{} {}", 2 * i, 2 * i + 1);
    }
    out
}

pub const CLUSTER_CSV_HEADER: &str = "cluster_id,member_count,member_ids,x1,y1,z1,x2,y2,z2";

/// Cluster CSV: representative endpoints plus member ids joined by ';'.
pub fn clusters_to_csv(clusters: &[Cluster]) -> String {
    let mut out = String::with_capacity(96 * clusters.len() + 40);
    out.push_str(CLUSTER_CSV_HEADER);
    out.push('\n');
    for (i, c) in clusters.iter().enumerate() {
        let ids = c
            .members
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let r = &c.representative;
        let _ = writeln!(
            out,
            "{},{},{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
            i,
            c.size(),
            ids,
            r.p1.x,
            r.p1.y,
            r.p1.z,
            r.p2.x,
            r.p2.y,
            r.p2.z
        );
    }
    out
}

/// Read cluster representatives back as world-frame segments (for eval).
pub fn cluster_representatives_from_csv(text: &str) -> Result<Vec<LineSegment3D>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let row = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line == CLUSTER_CSV_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Input(format!(
                "cluster csv row {row}: expected 9 fields, got {}",
                fields.len()
            )));
        }
        let mut coords = [0.0f64; 6];
        for (i, f) in fields[3..].iter().enumerate() {
            coords[i] = f
                .parse()
                .map_err(|_| Error::Input(format!("cluster csv row {row}: bad coordinate")))?;
        }
        out.push(
            LineSegment3D::new(
                Vector3::new(coords[0], coords[1], coords[2]),
                Vector3::new(coords[3], coords[4], coords[5]),
                Frame::World,
                0,
            )
            .map_err(|_| Error::Input(format!("cluster csv row {row}: zero-length segment")))?,
        );
    }
    Ok(out)
}

/// Write segments in the chosen format.
pub fn write_segments(
    path: &Path,
    segments: &[LineSegment3D],
    method: &str,
    format: ExportFormat,
) -> Result<()> {
    let text = match format {
        ExportFormat::Obj => segments_to_obj(segments),
        ExportFormat::Ply => segments_to_ply(segments),
        ExportFormat::Csv => segments_to_csv(segments, method),
    };
    std::fs::write(path, text)
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// PLY point-cloud reading (ground truth scans)

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy)]
enum PlyScalar {
    F32,
    F64,
    I8,
    I16,
    I32,
    U8,
    U16,
    U32,
}

impl PlyScalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            "char" | "int8" => Self::I8,
            "short" | "int16" => Self::I16,
            "int" | "int32" => Self::I32,
            "uchar" | "uint8" => Self::U8,
            "ushort" | "uint16" => Self::U16,
            "uint" | "uint32" => Self::U32,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::F32 | Self::I32 | Self::U32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            Self::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
            Self::I8 => bytes[0] as i8 as f64,
            Self::I16 => i16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            Self::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::U8 => bytes[0] as f64,
            Self::U16 => u16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
        }
    }
}

/// Read a PLY point cloud (ascii or binary little-endian) with float or
/// double x/y/z vertex properties; extra scalar vertex properties are
/// skipped. The vertex element must come first, which holds for standard
/// scan exports.
pub fn read_ply_cloud(path: &Path) -> Result<PointCloud> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = std::io::BufReader::new(file);

    let mut format = None;
    let mut vertex_count: Option<usize> = None;
    let mut properties: Vec<(PlyScalar, String)> = Vec::new();
    let mut in_vertex_element = false;
    let mut seen_other_element_first = false;

    let mut line = String::new();
    reader
        .read_line(&mut line)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    if line.trim() != "ply" {
        return Err(Error::Input(format!("{} is not a PLY file", path.display())));
    }
    loop {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        if n == 0 {
            return Err(Error::Input(format!("{}: truncated header", path.display())));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLittleEndian),
            ["format", other, _] => {
                return Err(Error::Input(format!(
                    "{}: unsupported PLY format {other}",
                    path.display()
                )))
            }
            ["comment", ..] => {}
            ["element", "vertex", count] => {
                in_vertex_element = true;
                vertex_count = Some(count.parse().map_err(|_| {
                    Error::Input(format!("{}: bad vertex count", path.display()))
                })?);
            }
            ["element", ..] => {
                if vertex_count.is_none() {
                    seen_other_element_first = true;
                }
                in_vertex_element = false;
            }
            ["property", "list", ..] => {
                if in_vertex_element {
                    return Err(Error::Input(format!(
                        "{}: list properties on vertices are not supported",
                        path.display()
                    )));
                }
            }
            ["property", ty, name] => {
                if in_vertex_element {
                    let scalar = PlyScalar::parse(ty).ok_or_else(|| {
                        Error::Input(format!("{}: unsupported property type {ty}", path.display()))
                    })?;
                    properties.push((scalar, name.to_string()));
                }
            }
            ["end_header"] => break,
            _ => {}
        }
    }
    if seen_other_element_first {
        return Err(Error::Input(format!(
            "{}: vertex element must come first",
            path.display()
        )));
    }
    let format = format.ok_or_else(|| Error::Input(format!("{}: missing format", path.display())))?;
    let count = vertex_count
        .ok_or_else(|| Error::Input(format!("{}: missing vertex element", path.display())))?;
    let find = |name: &str| properties.iter().position(|(_, n)| n == name);
    let (xi, yi, zi) = match (find("x"), find("y"), find("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(Error::Input(format!(
                "{}: vertex element lacks x/y/z",
                path.display()
            )))
        }
    };

    let mut points = Vec::with_capacity(count);
    match format {
        PlyFormat::Ascii => {
            let mut read_rows = 0usize;
            for text_line in reader.lines() {
                if read_rows == count {
                    break;
                }
                let text_line =
                    text_line.map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
                let row = text_line.trim();
                if row.is_empty() {
                    continue;
                }
                let vals: Vec<f64> = row
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| {
                        Error::Input(format!(
                            "{}: bad vertex row {}",
                            path.display(),
                            read_rows + 1
                        ))
                    })?;
                if vals.len() < properties.len() {
                    return Err(Error::Input(format!(
                        "{}: vertex row {} too short",
                        path.display(),
                        read_rows + 1
                    )));
                }
                points.push(Vector3::new(vals[xi], vals[yi], vals[zi]));
                read_rows += 1;
            }
            if read_rows != count {
                return Err(Error::Input(format!(
                    "{}: expected {count} vertices, found {read_rows}",
                    path.display()
                )));
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let record: usize = properties.iter().map(|(s, _)| s.size()).sum();
            let mut buf = vec![0u8; record * count];
            reader
                .read_exact(&mut buf)
                .map_err(|e| Error::Input(format!("{}: truncated vertex data: {e}", path.display())))?;
            let offsets: Vec<usize> = properties
                .iter()
                .scan(0usize, |acc, (s, _)| {
                    let off = *acc;
                    *acc += s.size();
                    Some(off)
                })
                .collect();
            for r in 0..count {
                let base = r * record;
                let get = |i: usize| properties[i].0.read_le(&buf[base + offsets[i]..]);
                points.push(Vector3::new(get(xi), get(yi), get(zi)));
            }
        }
    }
    PointCloud::from_points(points)
}

/// Write an ASCII PLY point cloud (used by tests and examples).
pub fn write_ply_cloud(path: &Path, points: &[Vector3<f64>]) -> Result<()> {
    let mut out = String::with_capacity(40 * points.len() + 128);
    let _ = write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        points.len()
    );
    for p in points {
        let _ = writeln!(out, "{:.6} {:.6} {:.6}", p.x, p.y, p.z);
    }
    std::fs::write(path, out)
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}
