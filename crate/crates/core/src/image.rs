//! Pixel containers and the pinhole camera model.
//!
//! All grids are row-major with the origin at the top-left pixel. A pixel
//! coordinate `(x, y)` is `(column, row)`, and integer coordinates address
//! pixel centers. Multi-channel images are interleaved: the sample for
//! channel `c` of pixel `(x, y)` lives at `(y * width + x) * channels + c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-normalized floating point image with 1 or 3 interleaved channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    /// Wraps raw samples. Every sample must be finite; range is not enforced
    /// here so intermediate results (e.g. unclamped residuals) can be held.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage("zero-sized image".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "{channels} channels (expected 1 or 3)"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "data length {} != {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0 && (channels == 1 || channels == 3));
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Builds an image by evaluating `f(x, y, c)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        assert!(width > 0 && height > 0 && (channels == 1 || channels == 3));
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
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

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Mean over channels of pixel `(x, y)`.
    #[inline]
    pub fn intensity(&self, x: usize, y: usize) -> f64 {
        let base = (y * self.width + x) * self.channels;
        let px = &self.data[base..base + self.channels];
        px.iter().sum::<f64>() / self.channels as f64
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &ImageBuffer, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    pub(crate) fn check_size(&self, width: usize, height: usize, what: &str) -> Result<()> {
        if self.width == width && self.height == height {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: image is {}x{}, expected {width}x{height}",
                self.width, self.height
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Clamps every sample into `[0, 1]`.
    pub fn clamped(mut self) -> ImageBuffer {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    /// Single-channel image of per-pixel channel means.
    pub fn to_gray(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        ImageBuffer::from_fn(self.width, self.height, 1, |x, y, _| self.intensity(x, y))
    }

    /// Extracts one channel as a single-channel image.
    pub fn channel(&self, c: usize) -> ImageBuffer {
        assert!(c < self.channels);
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.iter().skip(c).step_by(self.channels).copied().collect(),
        }
    }

    /// Replicates a single-channel image into three channels.
    pub fn to_rgb(&self) -> ImageBuffer {
        if self.channels == 3 {
            return self.clone();
        }
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 3,
            data: self.data.iter().flat_map(|&v| [v, v, v]).collect(),
        }
    }
}

/// Per-pixel scene depth in meters, with an optional validity mask.
///
/// Without a mask every entry must be finite and positive. With a mask,
/// only entries flagged valid are checked; the others carry no meaning.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
    valid: Option<Vec<bool>>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_grid(width, height, data.len(), "depth")?;
        if let Some(i) = data.iter().position(|&d| !(d.is_finite() && d > 0.0)) {
            return Err(Error::InvalidDepth(format!(
                "entry {i} = {} is not a finite positive depth",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            valid: None,
        })
    }

    pub fn with_mask(width: usize, height: usize, data: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        check_grid(width, height, data.len(), "depth")?;
        check_grid(width, height, valid.len(), "depth mask")?;
        for (i, (&d, &ok)) in data.iter().zip(&valid).enumerate() {
            if ok && !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidDepth(format!(
                    "entry {i} = {d} is flagged valid but is not a finite positive depth"
                )));
            }
        }
        let valid = if valid.iter().all(|&v| v) { None } else { Some(valid) };
        Ok(Self {
            width,
            height,
            data,
            valid,
        })
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self> {
        Self::new(width, height, vec![depth; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.valid.as_deref()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn is_valid_index(&self, i: usize) -> bool {
        self.valid.as_ref().map_or(true, |m| m[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid
            .as_ref()
            .map_or(self.data.len(), |m| m.iter().filter(|&&v| v).count())
    }

    /// Depth values of valid pixels in row-major order.
    pub fn valid_values(&self) -> Vec<f64> {
        self.data
            .iter()
            .enumerate()
            .filter(|(i, _)| self.is_valid_index(*i))
            .map(|(_, &d)| d)
            .collect()
    }

    /// Multiplies every depth by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<DepthMap> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidDepth(format!("scale factor {factor}")));
        }
        let data = self.data.iter().map(|&d| d * factor).collect();
        Ok(DepthMap {
            width: self.width,
            height: self.height,
            data,
            valid: self.valid.clone(),
        })
    }
}

/// Per-pixel transmission in `(0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl TransmissionMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_grid(width, height, data.len(), "transmission")?;
        if let Some(i) = data.iter().position(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(Error::InvalidTransmission(format!(
                "entry {i} = {} outside (0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, t: f64) -> Result<Self> {
        Self::new(width, height, vec![t; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

fn check_grid(width: usize, height: usize, len: usize, what: &str) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::DimensionMismatch(format!("zero-sized {what}")));
    }
    if len != width * height {
        return Err(Error::DimensionMismatch(format!(
            "{what} data length {len} != {width}x{height}"
        )));
    }
    Ok(())
}

/// Pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    /// Square-pixel camera with the principal point at the image center and
    /// a focal length of `focal_factor * width`.
    pub fn centered(width: usize, height: usize, focal_factor: f64) -> Self {
        let f = focal_factor * width as f64;
        Self {
            fx: f,
            fy: f,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidIntrinsics(format!("{self:?}")));
        }
        Ok(())
    }

    /// Checks that the principal point lies inside a `width x height` image.
    pub fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        self.validate()?;
        let inside = (0.0..=(width as f64 - 1.0)).contains(&self.cx)
            && (0.0..=(height as f64 - 1.0)).contains(&self.cy);
        if !inside {
            return Err(Error::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {width}x{height}",
                self.cx, self.cy
            )));
        }
        Ok(())
    }

    /// Intrinsics of an image downsampled by averaging 2x2 blocks.
    pub fn halved(&self) -> Self {
        Self {
            fx: self.fx / 2.0,
            fy: self.fy / 2.0,
            cx: (self.cx - 0.5) / 2.0,
            cy: (self.cy - 0.5) / 2.0,
        }
    }

    /// Normalized ray direction `K^-1 (x, y, 1)`.
    #[inline]
    pub fn backproject(&self, x: f64, y: f64) -> [f64; 3] {
        [(x - self.cx) / self.fx, (y - self.cy) / self.fy, 1.0]
    }

    /// Pixel coordinates of a camera-frame point with positive depth.
    #[inline]
    pub fn project(&self, p: [f64; 3]) -> (f64, f64) {
        (
            self.fx * p[0] / p[2] + self.cx,
            self.fy * p[1] / p[2] + self.cy,
        )
    }
}
