//! Feature extractors for the perceptual loss.
//!
//! [`ReferenceExtractor`] is a fixed random convolution pyramid that needs
//! no weight files. [`HzfxExtractor`] runs a VGG-style stack of 3x3
//! convolutions loaded from an HZFX tensor file (format in `docs/hzfx.md`).

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// Seed of the reference extractor weights.
pub const REFERENCE_SEED: u64 = 0x5EED;

/// Channel widths of the three reference stages.
pub const REFERENCE_WIDTHS: [usize; 3] = [8, 16, 32];

/// Stabilizer of the per-position channel normalization.
const NORM_EPS: f64 = 1e-3;

/// Dense feature map, channels interleaved per position.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    fn from_image(image: &ImageBuffer) -> Self {
        let rgb = image.to_rgb();
        Self {
            width: rgb.width(),
            height: rgb.height(),
            channels: 3,
            data: rgb.into_data(),
        }
    }

    #[inline]
    fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }
}

/// A deterministic, thread-safe image-to-features map.
pub trait FeatureExtractor: Send + Sync {
    fn extract(&self, image: &ImageBuffer) -> Result<FeatureMap>;

    /// `(block, layer)` index of the returned activations.
    fn stage(&self) -> (usize, usize);
}

/// One 3x3 convolution: weights `[out][in][ky][kx]`, optional bias.
#[derive(Clone, Debug)]
struct Conv3 {
    c_in: usize,
    c_out: usize,
    weight: Vec<f64>,
    bias: Option<Vec<f64>>,
}

impl Conv3 {
    /// Convolution with edge replication, sampling every `stride` pixels,
    /// followed by ReLU.
    fn apply_relu(&self, input: &FeatureMap, stride: usize) -> FeatureMap {
        let (w, h) = (input.width, input.height);
        let (ow, oh) = (w.div_ceil(stride), h.div_ceil(stride));
        let mut out = FeatureMap::zeros(ow, oh, self.c_out);
        let mut patch = vec![0.0; self.c_in * 9];
        for oy in 0..oh {
            for ox in 0..ow {
                let (cx, cy) = ((ox * stride) as isize, (oy * stride) as isize);
                for ky in 0..3 {
                    let sy = (cy + ky as isize - 1).clamp(0, h as isize - 1) as usize;
                    for kx in 0..3 {
                        let sx = (cx + kx as isize - 1).clamp(0, w as isize - 1) as usize;
                        for ci in 0..self.c_in {
                            patch[ci * 9 + ky * 3 + kx] = input.at(sx, sy, ci);
                        }
                    }
                }
                let base = (oy * ow + ox) * self.c_out;
                for co in 0..self.c_out {
                    let k = &self.weight[co * self.c_in * 9..(co + 1) * self.c_in * 9];
                    let mut acc = self.bias.as_ref().map_or(0.0, |b| b[co]);
                    for (a, b) in k.iter().zip(&patch) {
                        acc += a * b;
                    }
                    out.data[base + co] = acc.max(0.0);
                }
            }
        }
        out
    }
}

fn normalize_positions(map: &mut FeatureMap) {
    for px in map.data.chunks_exact_mut(map.channels) {
        let n = (px.iter().map(|v| v * v).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
        for v in px {
            *v /= n;
        }
    }
}

/// Three stride-2 3x3 convolution stages of widths 8, 16 and 32 with ReLU
/// and no biases. Weights are drawn uniformly from `[-s, s]`,
/// `s = sqrt(3 / fan_in)`, by `ChaCha8Rng::seed_from_u64(0x5EED)` in
/// stage, output, input, row, column order. Every first-stage kernel is
/// then shifted to zero mean, so a global intensity offset never reaches
/// the features. Output vectors are L2-normalized per position, which
/// removes global gain as well. Gray input is replicated to RGB.
#[derive(Clone, Debug)]
pub struct ReferenceExtractor {
    stages: Vec<Conv3>,
}

impl ReferenceExtractor {
    pub fn new() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(REFERENCE_SEED);
        let mut c_in = 3;
        let mut stages = Vec::with_capacity(3);
        for (s, &c_out) in REFERENCE_WIDTHS.iter().enumerate() {
            let fan_in = c_in * 9;
            let bound = (3.0 / fan_in as f64).sqrt();
            let mut weight: Vec<f64> = (0..c_out * fan_in).map(|_| rng.gen_range(-bound..bound)).collect();
            if s == 0 {
                for k in weight.chunks_exact_mut(fan_in) {
                    let mean = k.iter().sum::<f64>() / fan_in as f64;
                    k.iter_mut().for_each(|v| *v -= mean);
                }
            }
            stages.push(Conv3 {
                c_in,
                c_out,
                weight,
                bias: None,
            });
            c_in = c_out;
        }
        Self { stages }
    }
}

impl Default for ReferenceExtractor {
    fn default() -> Self {
        Self::new()
    }
}

impl FeatureExtractor for ReferenceExtractor {
    fn extract(&self, image: &ImageBuffer) -> Result<FeatureMap> {
        let mut map = FeatureMap::from_image(image);
        for conv in &self.stages {
            map = conv.apply_relu(&map, 2);
        }
        normalize_positions(&mut map);
        Ok(map)
    }

    fn stage(&self) -> (usize, usize) {
        (3, 1)
    }
}

const HZFX_MAGIC: &[u8; 4] = b"HZFX";
const HZFX_VERSION: u32 = 1;

/// A named little-endian float32 tensor from an HZFX file.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::InvalidWeights(format!("truncated {what} at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parse an HZFX container.
pub fn parse_hzfx(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != HZFX_MAGIC {
        return Err(Error::InvalidWeights("bad magic".into()));
    }
    let version = r.u32("version")?;
    if version != HZFX_VERSION {
        return Err(Error::InvalidWeights(format!("unsupported version {version}")));
    }
    let mut tensors = Vec::new();
    while r.pos < bytes.len() {
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| Error::InvalidWeights("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("dimension")? as usize);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidWeights(format!("tensor {name} is too large")))?;
        let raw = r.take(count.checked_mul(4).unwrap_or(usize::MAX), "tensor data")?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        tensors.push(Tensor { name, dims, data });
    }
    Ok(tensors)
}

/// Serialize tensors into an HZFX container.
pub fn encode_hzfx(tensors: &[Tensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(HZFX_MAGIC);
    out.extend_from_slice(&HZFX_VERSION.to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for &d in &t.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// ImageNet channel statistics applied to the input before the first layer.
const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// VGG-style extractor: 3x3 stride-1 convolutions with bias and ReLU,
/// grouped into blocks by tensor name `<block>_<layer>.weight` /
/// `<block>_<layer>.bias`, with 2x2 max pooling between blocks. Runs up to
/// and including the ReLU of the stop layer.
#[derive(Clone, Debug)]
pub struct HzfxExtractor {
    layers: Vec<((usize, usize), Conv3)>,
    stop: (usize, usize),
}

impl HzfxExtractor {
    /// Conventional perceptual layer of a 16-layer VGG.
    pub const DEFAULT_STOP: (usize, usize) = (5, 1);

    pub fn from_file(path: impl AsRef<Path>, stop: (usize, usize)) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_tensors(parse_hzfx(&bytes)?, stop)
    }

    pub fn from_tensors(tensors: Vec<Tensor>, stop: (usize, usize)) -> Result<Self> {
        let mut weights: BTreeMap<(usize, usize), Tensor> = BTreeMap::new();
        let mut biases: BTreeMap<(usize, usize), Tensor> = BTreeMap::new();
        for t in tensors {
            let (stem, kind) = t
                .name
                .rsplit_once('.')
                .ok_or_else(|| Error::InvalidWeights(format!("unexpected tensor name {}", t.name)))?;
            let (i, j) = stem
                .split_once('_')
                .and_then(|(i, j)| Some((i.parse().ok()?, j.parse().ok()?)))
                .ok_or_else(|| Error::InvalidWeights(format!("unexpected tensor name {}", t.name)))?;
            match kind {
                "weight" => weights.insert((i, j), t),
                "bias" => biases.insert((i, j), t),
                _ => return Err(Error::InvalidWeights(format!("unexpected tensor name {}", t.name))),
            };
        }
        if !weights.contains_key(&stop) {
            return Err(Error::InvalidWeights(format!("no layer {}_{} in weights", stop.0, stop.1)));
        }
        let mut layers = Vec::new();
        let mut c_prev = 3;
        for (key, w) in weights.into_iter().filter(|(k, _)| *k <= stop) {
            if w.dims.len() != 4 || w.dims[2] != 3 || w.dims[3] != 3 {
                return Err(Error::InvalidWeights(format!("{} must be [out, in, 3, 3], got {:?}", w.name, w.dims)));
            }
            let (c_out, c_in) = (w.dims[0], w.dims[1]);
            if c_in != c_prev {
                return Err(Error::InvalidWeights(format!("{} expects {c_in} input channels, previous layer gives {c_prev}", w.name)));
            }
            let bias = match biases.remove(&key) {
                Some(b) if b.dims == [c_out] => Some(b.data.iter().map(|&v| v as f64).collect()),
                Some(b) => return Err(Error::InvalidWeights(format!("{} must be [{c_out}], got {:?}", b.name, b.dims))),
                None => None,
            };
            layers.push((
                key,
                Conv3 {
                    c_in,
                    c_out,
                    weight: w.data.iter().map(|&v| v as f64).collect(),
                    bias,
                },
            ));
            c_prev = c_out;
        }
        Ok(Self { layers, stop })
    }
}

fn max_pool2(input: &FeatureMap) -> FeatureMap {
    let (ow, oh) = ((input.width / 2).max(1), (input.height / 2).max(1));
    let mut out = FeatureMap::zeros(ow, oh, input.channels);
    for oy in 0..oh {
        for ox in 0..ow {
            for c in 0..input.channels {
                let mut m = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let sx = (2 * ox + dx).min(input.width - 1);
                        let sy = (2 * oy + dy).min(input.height - 1);
                        m = m.max(input.at(sx, sy, c));
                    }
                }
                out.data[(oy * ow + ox) * input.channels + c] = m;
            }
        }
    }
    out
}

impl FeatureExtractor for HzfxExtractor {
    fn extract(&self, image: &ImageBuffer) -> Result<FeatureMap> {
        let mut map = FeatureMap::from_image(image);
        for px in map.data.chunks_exact_mut(3) {
            for c in 0..3 {
                px[c] = (px[c] - IMAGENET_MEAN[c]) / IMAGENET_STD[c];
            }
        }
        let mut block = self.layers.first().map_or(1, |l| l.0 .0);
        for ((i, _), conv) in &self.layers {
            if *i != block {
                map = max_pool2(&map);
                block = *i;
            }
            map = conv.apply_relu(&map, 1);
        }
        Ok(map)
    }

    fn stage(&self) -> (usize, usize) {
        self.stop
    }
}
