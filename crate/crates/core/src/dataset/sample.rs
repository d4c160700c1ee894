//! Correspondence samples and their text format.
//!
//! ```text
//! CORR 1 <ref_view_id> <target_view_id> <condition_tag> <N>
//! ur vr ut vt        (N lines)
//! ```
//!
//! Spaces in the condition tag are written as underscores and read back as
//! spaces, so in-memory tags may not contain underscores. Coordinates use the
//! shortest decimal that round-trips to the same `f64`.

use std::io::{BufRead, Write};

use super::poses::ViewCatalog;
use crate::error::{Error, Result};
use crate::geometry::{CameraView, Pixel, ViewId};
use crate::scalar::Scalar;

const MAGIC: &str = "CORR";
const VERSION: &str = "1";

/// One image of a correspondence sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRef {
    pub view_id: ViewId,
    pub path: String,
    /// `(width, height)` when known; enables the bounds check.
    pub size: Option<(u32, u32)>,
}

impl ImageRef {
    pub fn of_view<T: Scalar>(view: &CameraView<T>) -> Self {
        Self {
            view_id: view.view_id(),
            path: view.image_path().to_string(),
            size: Some((view.width(), view.height())),
        }
    }

    pub fn unresolved(view_id: ViewId) -> Self {
        Self {
            view_id,
            path: String::new(),
            size: None,
        }
    }

    fn contains(&self, px: &Pixel<f64>) -> bool {
        if !(px.u.is_finite() && px.v.is_finite() && px.u >= 0.0 && px.v >= 0.0) {
            return false;
        }
        match self.size {
            Some((w, h)) => px.u < w as f64 && px.v < h as f64,
            None => true,
        }
    }
}

/// A reference/target image pair with `N` matched pixel positions.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceSample {
    reference: ImageRef,
    target: ImageRef,
    condition_tag: String,
    x_ref: Vec<Pixel<f64>>,
    x_tgt: Vec<Pixel<f64>>,
}

pub fn validate_condition_tag(tag: &str) -> Result<()> {
    if tag.is_empty() {
        return Err(Error::invalid("condition tag is empty"));
    }
    if tag.contains('_') {
        return Err(Error::invalid(format!(
            "condition tag {tag:?} contains '_', which is reserved for spaces on disk"
        )));
    }
    if tag.chars().any(|c| c.is_whitespace() && c != ' ') {
        return Err(Error::invalid(format!(
            "condition tag {tag:?} contains whitespace other than spaces"
        )));
    }
    Ok(())
}

impl CorrespondenceSample {
    pub fn new(
        reference: ImageRef,
        target: ImageRef,
        condition_tag: impl Into<String>,
        x_ref: Vec<Pixel<f64>>,
        x_tgt: Vec<Pixel<f64>>,
    ) -> Result<Self> {
        let condition_tag = condition_tag.into();
        validate_condition_tag(&condition_tag)?;
        if x_ref.len() != x_tgt.len() {
            return Err(Error::invalid(format!(
                "{} reference but {} target coordinates",
                x_ref.len(),
                x_tgt.len()
            )));
        }
        for (i, (r, t)) in x_ref.iter().zip(&x_tgt).enumerate() {
            if !reference.contains(r) || !target.contains(t) {
                return Err(Error::invalid(format!("correspondence {i} lies outside its image")));
            }
        }
        Ok(Self {
            reference,
            target,
            condition_tag,
            x_ref,
            x_tgt,
        })
    }

    pub fn reference(&self) -> &ImageRef {
        &self.reference
    }

    pub fn target(&self) -> &ImageRef {
        &self.target
    }

    pub fn ref_view_id(&self) -> ViewId {
        self.reference.view_id
    }

    pub fn target_view_id(&self) -> ViewId {
        self.target.view_id
    }

    pub fn condition_tag(&self) -> &str {
        &self.condition_tag
    }

    pub fn x_ref(&self) -> &[Pixel<f64>] {
        &self.x_ref
    }

    pub fn x_tgt(&self) -> &[Pixel<f64>] {
        &self.x_tgt
    }

    /// Number of correspondences `N`.
    pub fn len(&self) -> usize {
        self.x_ref.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_ref.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Pixel<f64>, &Pixel<f64>)> {
        self.x_ref.iter().zip(&self.x_tgt)
    }

    /// Copy keeping pair `i` iff `keep(i, x_ref[i], x_tgt[i])`; order preserved.
    pub fn filtered(&self, mut keep: impl FnMut(usize, &Pixel<f64>, &Pixel<f64>) -> bool) -> Self {
        let (x_ref, x_tgt) = self
            .pairs()
            .enumerate()
            .filter(|(i, (r, t))| keep(*i, r, t))
            .map(|(_, (r, t))| (*r, *t))
            .unzip();
        Self {
            reference: self.reference.clone(),
            target: self.target.clone(),
            condition_tag: self.condition_tag.clone(),
            x_ref,
            x_tgt,
        }
    }

    /// Conventional file name: `<ref>_<target>.corr`.
    pub fn file_name(&self) -> String {
        format!("{}_{}.corr", self.reference.view_id, self.target.view_id)
    }
}

pub fn write_sample<W: Write>(sample: &CorrespondenceSample, mut w: W) -> Result<()> {
    writeln!(
        w,
        "{MAGIC} {VERSION} {} {} {} {}",
        sample.reference.view_id,
        sample.target.view_id,
        sample.condition_tag.replace(' ', "_"),
        sample.len()
    )?;
    for (r, t) in sample.pairs() {
        writeln!(w, "{} {} {} {}", r.u, r.v, t.u, t.v)?;
    }
    Ok(())
}

pub fn sample_to_string(sample: &CorrespondenceSample) -> String {
    let mut buf = Vec::new();
    write_sample(sample, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("sample text is UTF-8")
}

/// Reads one sample. With a catalog, view ids must resolve and coordinates
/// are checked against the image sizes; without one, image paths stay empty.
pub fn read_sample<R: BufRead>(r: R, catalog: Option<&ViewCatalog>) -> Result<CorrespondenceSample> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::parse(1, "empty input")),
    };
    let tokens: Vec<&str> = header.split(' ').collect();
    if tokens.len() != 6 || tokens[0] != MAGIC {
        return Err(Error::parse(
            1,
            "expected `CORR 1 <ref_view_id> <target_view_id> <condition_tag> <N>`",
        ));
    }
    if tokens[1] != VERSION {
        return Err(Error::parse(1, format!("unsupported version {}", tokens[1])));
    }
    let view = |s: &str| -> Result<ViewId> { s.parse().map_err(|_| Error::parse(1, format!("bad view id {s:?}"))) };
    let (ref_id, tgt_id) = (view(tokens[2])?, view(tokens[3])?);
    let tag = tokens[4].replace('_', " ");
    validate_condition_tag(&tag).map_err(|e| Error::parse(1, e.to_string()))?;
    let n: usize = tokens[5]
        .parse()
        .map_err(|_| Error::parse(1, format!("bad correspondence count {:?}", tokens[5])))?;

    let resolve = |id: ViewId| -> Result<ImageRef> {
        match catalog {
            Some(c) => c
                .get(id)
                .map(ImageRef::of_view)
                .ok_or_else(|| Error::parse(1, format!("view {id} not in catalog"))),
            None => Ok(ImageRef::unresolved(id)),
        }
    };
    let reference = resolve(ref_id)?;
    let target = resolve(tgt_id)?;

    let mut x_ref = Vec::with_capacity(n.min(1 << 20));
    let mut x_tgt = Vec::with_capacity(n.min(1 << 20));
    for i in 0..n {
        let lineno = i + 2;
        let line = match lines.next() {
            Some(line) => line?,
            None => return Err(Error::parse(lineno, format!("expected {n} correspondences, got {i}"))),
        };
        let vals: Vec<&str> = line.split(' ').collect();
        if vals.len() != 4 {
            return Err(Error::parse(lineno, "expected `ur vr ut vt`"));
        }
        let mut c = [0.0f64; 4];
        for (slot, s) in c.iter_mut().zip(&vals) {
            *slot = s
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(lineno, format!("bad coordinate {s:?}")))?;
        }
        let (pr, pt) = (Pixel::new(c[0], c[1]), Pixel::new(c[2], c[3]));
        if !reference.contains(&pr) || !target.contains(&pt) {
            return Err(Error::parse(lineno, "coordinate outside image bounds"));
        }
        x_ref.push(pr);
        x_tgt.push(pt);
    }
    if let Some(extra) = lines.next() {
        extra?;
        return Err(Error::parse(n + 2, "trailing data after last correspondence"));
    }
    CorrespondenceSample::new(reference, target, tag, x_ref, x_tgt)
}
