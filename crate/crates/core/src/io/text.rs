//! Line-oriented text formats: poses, intrinsics, sparse depth, loss traces.
//!
//! Blank lines and lines starting with `#` are ignored. Floats are written
//! with Rust's shortest round-trip formatting, so values survive exactly.

use std::fmt::Write as _;

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, PoseKind, PoseSe3};
use crate::optim::TraceEntry;
use crate::raster::SparseDepth;

/// Orthonormality tolerance for rotations read from pose files.
pub const POSE_FILE_TOLERANCE: f64 = 1e-6;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn line_err(line: usize, message: impl Into<String>) -> Error {
    Error::Line { line, message: message.into() }
}

fn parse_field<T: std::str::FromStr>(line: usize, token: &str, what: &str) -> Result<T> {
    token.parse().map_err(|_| line_err(line, format!("bad {what} {token:?}")))
}

fn fields<const N: usize>(line: usize, text: &str) -> Result<[&str; N]> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    parts
        .try_into()
        .map_err(|p: Vec<&str>| line_err(line, format!("expected {N} fields, found {}", p.len())))
}

/// One line per frame: id, then the 4×4 camera-to-world matrix row-major.
pub fn format_poses(poses: &[(u64, PoseSe3)]) -> String {
    let mut out = String::new();
    for (id, pose) in poses {
        let m = pose.to_matrix();
        write!(out, "{id}").unwrap();
        for r in 0..4 {
            for c in 0..4 {
                write!(out, " {}", m[(r, c)]).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_poses(text: &str) -> Result<Vec<(u64, PoseSe3)>> {
    content_lines(text)
        .map(|(line, l)| {
            let f = fields::<17>(line, l)?;
            let id = parse_field(line, f[0], "frame id")?;
            let mut m = Matrix4::zeros();
            for k in 0..16 {
                m[(k / 4, k % 4)] = parse_field(line, f[k + 1], "matrix entry")?;
            }
            let pose = PoseSe3::from_matrix(&m, PoseKind::CameraToWorld, POSE_FILE_TOLERANCE)
                .map_err(|e| line_err(line, e.to_string()))?;
            Ok((id, pose))
        })
        .collect()
}

pub fn format_intrinsics(k: &Intrinsics) -> String {
    format!("{} {} {} {} {} {}\n", k.fx, k.fy, k.cx, k.cy, k.width, k.height)
}

pub fn parse_intrinsics(text: &str) -> Result<Intrinsics> {
    let mut lines = content_lines(text);
    let (line, l) = lines.next().ok_or(line_err(1, "no intrinsics line"))?;
    if let Some((extra, _)) = lines.next() {
        return Err(line_err(extra, "unexpected extra line"));
    }
    let f = fields::<6>(line, l)?;
    Intrinsics::new(
        parse_field(line, f[0], "fx")?,
        parse_field(line, f[1], "fy")?,
        parse_field(line, f[2], "cx")?,
        parse_field(line, f[3], "cy")?,
        parse_field(line, f[4], "width")?,
        parse_field(line, f[5], "height")?,
    )
    .map_err(|e| line_err(line, e.to_string()))
}

/// `u v depth_m` per point, row-major order.
pub fn format_sparse(sparse: &SparseDepth) -> String {
    let mut out = String::new();
    for (u, v, d) in sparse.points() {
        writeln!(out, "{u} {v} {d}").unwrap();
    }
    out
}

pub fn parse_sparse(text: &str, width: usize, height: usize) -> Result<SparseDepth> {
    let mut points = Vec::new();
    let mut seen = vec![false; width * height];
    for (line, l) in content_lines(text) {
        let f = fields::<3>(line, l)?;
        let (u, v): (usize, usize) = (parse_field(line, f[0], "u")?, parse_field(line, f[1], "v")?);
        let d: f64 = parse_field(line, f[2], "depth")?;
        if u >= width || v >= height {
            return Err(line_err(line, format!("point ({u}, {v}) outside {width}x{height}")));
        }
        if !(d.is_finite() && d > 0.0) {
            return Err(line_err(line, format!("depth {d} is not positive")));
        }
        if std::mem::replace(&mut seen[v * width + u], true) {
            return Err(line_err(line, format!("duplicate point ({u}, {v})")));
        }
        points.push((u, v, d));
    }
    SparseDepth::from_points(width, height, &points)
}

pub const TRACE_HEADER: &str = "# step total depth photometric smoothness flow_shape normal_scale";

pub fn format_trace(trace: &[TraceEntry]) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for e in trace {
        let t = &e.terms;
        writeln!(
            out,
            "{} {:e} {:e} {:e} {:e} {:e} {:e}",
            e.step, e.total, t.depth, t.photometric, t.smoothness, t.flow_shape, t.normal_scale
        )
        .unwrap();
    }
    out
}
