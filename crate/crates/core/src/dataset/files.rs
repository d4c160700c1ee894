//! Point cloud, depth map, patch score and manifest files.
//!
//! * Cloud: `PLYLITE <n>` then `x y z k v1 .. vk` per point.
//! * Depth map: `DEPTH <view_id> <width> <height>\n` then `width*height`
//!   little-endian `f32`, row-major, nonpositive = invalid.
//! * Patch scores: `SCORES <x> <y> <patch> <F>\n` then `patch*patch*F`
//!   little-endian `f32`, row-major with channels innermost.
//! * Fused scores: `FUSED <width> <height> <F>\n`, same body layout.
//! * Manifest: one sample path per line, relative to the manifest's directory.

use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{Vec3, ViewId};
use crate::patch_inference::{Patch, ScoreGrid};
use crate::pointcloud::{DepthMap, PointCloud};

pub fn write_cloud<W: Write>(cloud: &PointCloud<f64>, mut w: W) -> Result<()> {
    writeln!(w, "PLYLITE {}", cloud.len())?;
    for (p, vis) in cloud.positions().iter().zip(cloud.visibility()) {
        write!(w, "{} {} {} {}", p.x, p.y, p.z, vis.len())?;
        for v in vis {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_cloud<R: BufRead>(r: R, traversal_id: &str) -> Result<PointCloud<f64>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::parse(1, "empty input"))??;
    let n: usize = header
        .strip_prefix("PLYLITE ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::parse(1, "expected `PLYLITE <n_points>`"))?;
    let mut positions = Vec::with_capacity(n.min(1 << 24));
    let mut visibility = Vec::with_capacity(n.min(1 << 24));
    for i in 0..n {
        let lineno = i + 2;
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(lineno, format!("expected {n} points, got {i}")))??;
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() < 4 {
            return Err(Error::parse(lineno, "expected `x y z k v1 .. vk`"));
        }
        let coord = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(lineno, format!("bad coordinate {s:?}")))
        };
        let p = Vec3::new(coord(tok[0])?, coord(tok[1])?, coord(tok[2])?);
        let k: usize = tok[3]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad visibility count {:?}", tok[3])))?;
        if tok.len() != 4 + k {
            return Err(Error::parse(lineno, format!("expected {k} view ids")));
        }
        let vis = tok[4..]
            .iter()
            .map(|s| {
                s.parse::<ViewId>()
                    .map_err(|_| Error::parse(lineno, format!("bad view id {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        positions.push(p);
        visibility.push(vis);
    }
    for (extra, line) in lines.enumerate() {
        if !line?.trim().is_empty() {
            return Err(Error::parse(n + 2 + extra, "trailing data"));
        }
    }
    PointCloud::new(traversal_id, positions, visibility)
}

fn read_header<R: Read>(r: &mut R) -> Result<String> {
    let mut bytes = Vec::new();
    let mut b = [0u8; 1];
    loop {
        if r.read(&mut b)? == 0 {
            return Err(Error::parse(1, "missing header newline"));
        }
        if b[0] == b'\n' {
            break;
        }
        bytes.push(b[0]);
        if bytes.len() > 256 {
            return Err(Error::parse(1, "header too long"));
        }
    }
    String::from_utf8(bytes).map_err(|_| Error::parse(1, "header is not UTF-8"))
}

fn read_f32_body<R: Read>(r: &mut R, count: usize) -> Result<Vec<f32>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() != count * 4 {
        return Err(Error::parse(
            2,
            format!("expected {} bytes of f32 data, found {}", count * 4, buf.len()),
        ));
    }
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_f32_body<W: Write>(w: &mut W, values: impl Iterator<Item = f32>) -> Result<()> {
    let mut buf = Vec::new();
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn header_fields<const N: usize>(header: &str, magic: &str) -> Result<[usize; N]> {
    let tok: Vec<&str> = header.split(' ').collect();
    if tok.len() != N + 1 || tok[0] != magic {
        return Err(Error::parse(1, format!("expected a `{magic}` header with {N} fields")));
    }
    let mut out = [0usize; N];
    for (slot, s) in out.iter_mut().zip(&tok[1..]) {
        *slot = s
            .parse()
            .map_err(|_| Error::parse(1, format!("bad header field {s:?}")))?;
    }
    Ok(out)
}

pub fn write_depth_map<W: Write>(dm: &DepthMap, mut w: W) -> Result<()> {
    writeln!(w, "DEPTH {} {} {}", dm.view_id, dm.width, dm.height)?;
    write_f32_body(&mut w, dm.depths().iter().copied())
}

pub fn read_depth_map<R: Read>(mut r: R) -> Result<DepthMap> {
    let [id, w, h] = header_fields::<3>(&read_header(&mut r)?, "DEPTH")?;
    let (id, w, h) = (
        u32::try_from(id).map_err(|_| Error::parse(1, "view id out of range"))?,
        u32::try_from(w).map_err(|_| Error::parse(1, "width out of range"))?,
        u32::try_from(h).map_err(|_| Error::parse(1, "height out of range"))?,
    );
    let depths = read_f32_body(&mut r, w as usize * h as usize)?;
    DepthMap::new(ViewId(id), w, h, depths)
}

/// Network scores of one inference patch at image position `(x, y)`.
pub type PatchScores = Patch<f64>;

pub fn write_patch_scores<W: Write>(p: &PatchScores, mut w: W) -> Result<()> {
    if p.scores.width() != p.scores.height() {
        return Err(Error::invalid("patch score grids are square"));
    }
    writeln!(w, "SCORES {} {} {} {}", p.x, p.y, p.scores.width(), p.scores.channels())?;
    write_f32_body(&mut w, p.scores.values().iter().map(|&v| v as f32))
}

pub fn read_patch_scores<R: Read>(mut r: R) -> Result<PatchScores> {
    let [x, y, patch, f] = header_fields::<4>(&read_header(&mut r)?, "SCORES")?;
    let values = read_f32_body(&mut r, patch * patch * f)?;
    let scores = ScoreGrid::new(patch, patch, f, values.into_iter().map(f64::from).collect())?;
    Ok(PatchScores { x, y, scores })
}

pub fn write_fused_scores<W: Write>(grid: &ScoreGrid<f64>, mut w: W) -> Result<()> {
    writeln!(w, "FUSED {} {} {}", grid.width(), grid.height(), grid.channels())?;
    write_f32_body(&mut w, grid.values().iter().map(|&v| v as f32))
}

pub fn read_fused_scores<R: Read>(mut r: R) -> Result<ScoreGrid<f64>> {
    let [w, h, f] = header_fields::<3>(&read_header(&mut r)?, "FUSED")?;
    let values = read_f32_body(&mut r, w * h * f)?;
    ScoreGrid::new(w, h, f, values.into_iter().map(f64::from).collect())
}

/// Resolved sample paths listed in a manifest.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

pub fn write_manifest<W: Write>(entries: &[String], mut w: W) -> Result<()> {
    for e in entries {
        writeln!(w, "{e}")?;
    }
    Ok(())
}
