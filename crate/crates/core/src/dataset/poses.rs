//! Poses file: one view per line, `#` starts a comment line.
//!
//! ```text
//! view_id traversal_id image_path qw qx qy qz tx ty tz fx fy cx cy width height
//! ```
//!
//! The quaternion and translation are camera-from-world; translation in
//! meters, intrinsics in pixels.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::{CameraView, Intrinsics, Quaternion, Vec3, ViewId};

const HEADER: &str = "# view_id traversal_id image_path qw qx qy qz tx ty tz fx fy cx cy width height";

/// All views of a dataset, keyed by view id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ViewCatalog {
    views: BTreeMap<ViewId, CameraView<f64>>,
}

impl ViewCatalog {
    pub fn new(views: impl IntoIterator<Item = CameraView<f64>>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for v in views {
            let id = v.view_id();
            if map.insert(id, v).is_some() {
                return Err(Error::invalid(format!("duplicate view id {id}")));
            }
        }
        Ok(Self { views: map })
    }

    pub fn get(&self, id: ViewId) -> Option<&CameraView<f64>> {
        self.views.get(&id)
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// Views in ascending id order.
    pub fn views(&self) -> impl Iterator<Item = &CameraView<f64>> {
        self.views.values()
    }

    pub fn traversal(&self, traversal_id: &str) -> Vec<CameraView<f64>> {
        self.views()
            .filter(|v| v.traversal_id() == traversal_id)
            .cloned()
            .collect()
    }

    pub fn traversal_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.views().map(|v| v.traversal_id().to_string()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn to_vec(&self) -> Vec<CameraView<f64>> {
        self.views().cloned().collect()
    }
}

pub fn read_poses<R: BufRead>(r: R) -> Result<ViewCatalog> {
    let mut views: BTreeMap<ViewId, CameraView<f64>> = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = trimmed.split_whitespace().collect();
        if tok.len() != 16 {
            return Err(Error::parse(lineno, format!("expected 16 fields, found {}", tok.len())));
        }
        let num = |k: usize| -> Result<f64> {
            tok[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(lineno, format!("bad number {:?}", tok[k])))
        };
        let dim = |k: usize| -> Result<u32> {
            tok[k]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad image dimension {:?}", tok[k])))
        };
        let id: ViewId = tok[0]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad view id {:?}", tok[0])))?;
        let q = Quaternion::new(num(3)?, num(4)?, num(5)?, num(6)?);
        let t = Vec3::new(num(7)?, num(8)?, num(9)?);
        let k = Intrinsics {
            fx: num(10)?,
            fy: num(11)?,
            cx: num(12)?,
            cy: num(13)?,
            width: dim(14)?,
            height: dim(15)?,
        };
        let view = CameraView::new(id, tok[1], tok[2], q, t, k).map_err(|e| Error::parse(lineno, e.to_string()))?;
        if views.insert(id, view).is_some() {
            return Err(Error::parse(lineno, format!("duplicate view id {id}")));
        }
    }
    Ok(ViewCatalog { views })
}

pub fn write_poses<'a, W: Write>(views: impl IntoIterator<Item = &'a CameraView<f64>>, mut w: W) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    for v in views {
        let path = v.image_path();
        if path.is_empty() || path.contains(char::is_whitespace) {
            return Err(Error::invalid(format!(
                "view {}: image path must be a nonempty token",
                v.view_id()
            )));
        }
        let q = v.rotation();
        let t = v.translation();
        let k = v.intrinsics();
        writeln!(
            w,
            "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            v.view_id(),
            v.traversal_id(),
            path,
            q.w,
            q.x,
            q.y,
            q.z,
            t.x,
            t.y,
            t.z,
            k.fx,
            k.fy,
            k.cx,
            k.cy,
            k.width,
            k.height
        )?;
    }
    Ok(())
}
