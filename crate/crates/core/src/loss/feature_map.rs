use crate::error::{Error, Result};
use crate::geometry::Pixel;
use crate::scalar::Scalar;

/// What the values of a [`FeatureMap`] represent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureKind {
    Logits,
    Probabilities,
    Features,
}

/// Dense `height x width x channels` grid, row-major with channels innermost.
///
/// Image pixel `(u, v)` reads grid cell
/// `(floor((u + 0.5) / stride), floor((v + 0.5) / stride))`, clamped to the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T = f64> {
    width: usize,
    height: usize,
    channels: usize,
    stride: usize,
    kind: FeatureKind,
    values: Vec<T>,
}

#[inline]
pub(crate) fn grid_index(coord: f64, stride: usize, dim: usize) -> usize {
    let c = ((coord + 0.5) / stride as f64).floor();
    if c.is_nan() || c < 0.0 {
        0
    } else {
        (c as usize).min(dim - 1)
    }
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        stride: usize,
        kind: FeatureKind,
        values: Vec<T>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::invalid("feature map dimensions must be positive"));
        }
        if stride == 0 {
            return Err(Error::invalid("feature map stride must be at least 1"));
        }
        if values.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "expected {} feature values, got {}",
                width * height * channels,
                values.len()
            )));
        }
        if kind == FeatureKind::Probabilities {
            let tol = T::of(1e-9);
            for (cell, v) in values.chunks_exact(channels).enumerate() {
                let sum: T = v.iter().copied().sum();
                if v.iter().any(|&p| p < T::zero()) || (sum - T::one()).abs() > tol {
                    return Err(Error::invalid(format!("cell {cell} is not a probability distribution")));
                }
            }
        }
        Ok(Self {
            width,
            height,
            channels,
            stride,
            kind,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize, stride: usize) -> Self {
        Self {
            width,
            height,
            channels,
            stride,
            kind: FeatureKind::Features,
            values: vec![T::zero(); width * height * channels],
        }
    }

    /// Zero gradient buffer with this map's shape.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.width, self.height, self.channels, self.stride)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    /// Grid cell read by an image pixel.
    pub fn cell_at(&self, px: &Pixel<f64>) -> usize {
        let col = grid_index(px.u, self.stride, self.width);
        let row = grid_index(px.v, self.stride, self.height);
        row * self.width + col
    }

    pub fn cell(&self, cell: usize) -> &[T] {
        &self.values[cell * self.channels..(cell + 1) * self.channels]
    }

    pub fn cell_mut(&mut self, cell: usize) -> &mut [T] {
        &mut self.values[cell * self.channels..(cell + 1) * self.channels]
    }

    /// Channel index of the maximum per cell; ties go to the lowest index.
    pub fn argmax(&self) -> LabelMap {
        let labels = self
            .values
            .chunks_exact(self.channels)
            .map(|v| argmax(v) as u32)
            .collect();
        LabelMap {
            width: self.width,
            height: self.height,
            stride: self.stride,
            labels,
        }
    }
}

pub(crate) fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Label assigned to pixels excluded from supervision.
pub const IGNORE_LABEL: u32 = 255;

/// Per-cell class indices with the same cell lookup as [`FeatureMap`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    stride: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, stride: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || stride == 0 {
            return Err(Error::invalid("label map dimensions must be positive"));
        }
        if labels.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            stride,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn at(&self, px: &Pixel<f64>) -> u32 {
        let col = grid_index(px.u, self.stride, self.width);
        let row = grid_index(px.v, self.stride, self.height);
        self.labels[row * self.width + col]
    }
}
