//! File formats: PNG images, single-channel PFM grids and KITTI pose lists.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer as RawImage, Luma, Rgb};
use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::image::{DepthMap, ImageBuffer, TransmissionMap};
use crate::se3::{self, PoseSE3};

/// Reads an 8- or 16-bit grayscale or RGB PNG into unit-normalized floats.
pub fn read_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = image::guess_format(&bytes)
        .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    if format != image::ImageFormat::Png {
        return Err(Error::UnsupportedFormat(format!(
            "{}: {format:?} (expected PNG)",
            path.display()
        )));
    }
    let decoded = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, data): (usize, Vec<f64>) = match decoded {
        DynamicImage::ImageLuma8(img) => (1, img.into_raw().iter().map(|&v| v as f64 / 255.0).collect()),
        DynamicImage::ImageRgb8(img) => (3, img.into_raw().iter().map(|&v| v as f64 / 255.0).collect()),
        DynamicImage::ImageLuma16(img) => (1, img.into_raw().iter().map(|&v| v as f64 / 65535.0).collect()),
        DynamicImage::ImageRgb16(img) => (3, img.into_raw().iter().map(|&v| v as f64 / 65535.0).collect()),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: pixel layout {:?} (expected gray or RGB)",
                path.display(),
                other.color()
            )))
        }
    };
    ImageBuffer::new(w, h, channels, data)
}

/// Writes an 8-bit PNG; samples are clamped to `[0, 1]` and rounded.
pub fn write_image(image: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = image
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let (w, h) = (image.width() as u32, image.height() as u32);
    let dynamic = if image.channels() == 1 {
        DynamicImage::ImageLuma8(RawImage::<Luma<u8>, _>::from_raw(w, h, bytes).expect("size"))
    } else {
        DynamicImage::ImageRgb8(RawImage::<Rgb<u8>, _>::from_raw(w, h, bytes).expect("size"))
    };
    save_png(dynamic, path.as_ref())
}

/// Writes a 16-bit PNG; samples are clamped to `[0, 1]` and rounded.
pub fn write_image_16(image: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let words: Vec<u16> = image
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let (w, h) = (image.width() as u32, image.height() as u32);
    let dynamic = if image.channels() == 1 {
        DynamicImage::ImageLuma16(RawImage::<Luma<u16>, _>::from_raw(w, h, words).expect("size"))
    } else {
        DynamicImage::ImageRgb16(RawImage::<Rgb<u16>, _>::from_raw(w, h, words).expect("size"))
    };
    save_png(dynamic, path.as_ref())
}

fn save_png(image: DynamicImage, path: &Path) -> Result<()> {
    image
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::UnsupportedFormat(other.to_string()),
        })
}

/// Raw single-channel PFM grid, rows stored top-to-bottom in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct PfmGrid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

/// Parses a `Pf` (single channel) PFM. The sign of the scale line selects
/// byte order (negative = little-endian); rows are stored bottom-to-top.
pub fn parse_pfm(bytes: &[u8]) -> Result<PfmGrid> {
    let mut pos = 0usize;
    let mut next_token = |bytes: &[u8]| -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader("truncated PFM header".into()));
        }
        let token = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| Error::MalformedHeader("non-ASCII PFM header".into()))?
            .to_string();
        Ok(token)
    };
    let magic = next_token(bytes)?;
    match magic.as_str() {
        "Pf" => {}
        "PF" => return Err(Error::UnsupportedFormat("three-channel PFM (PF)".into())),
        other => return Err(Error::MalformedHeader(format!("bad PFM magic {other:?}"))),
    }
    let parse_dim = |s: String| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::MalformedHeader(format!("bad PFM dimension {s:?}")))
    };
    let width = parse_dim(next_token(bytes)?)?;
    let height = parse_dim(next_token(bytes)?)?;
    let scale_tok = next_token(bytes)?;
    let scale: f64 = scale_tok
        .parse()
        .ok()
        .filter(|s: &f64| s.is_finite() && *s != 0.0)
        .ok_or_else(|| Error::MalformedHeader(format!("bad PFM scale {scale_tok:?}")))?;
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let little_endian = scale < 0.0;
    let n = width * height;
    let raster = bytes
        .get(pos..)
        .filter(|r| r.len() >= n * 4)
        .ok_or_else(|| Error::MalformedHeader(format!("PFM raster shorter than {width}x{height}")))?;
    let mut data = vec![0f32; n];
    for row in 0..height {
        let dst_row = height - 1 - row;
        for x in 0..width {
            let off = (row * width + x) * 4;
            let b = [raster[off], raster[off + 1], raster[off + 2], raster[off + 3]];
            data[dst_row * width + x] = if little_endian {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
        }
    }
    Ok(PfmGrid {
        width,
        height,
        data,
    })
}

/// Serializes a little-endian `Pf` PFM (scale line `-1`).
pub fn encode_pfm(grid: &PfmGrid) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1\n", grid.width, grid.height).into_bytes();
    out.reserve(grid.data.len() * 4);
    for row in (0..grid.height).rev() {
        for v in &grid.data[row * grid.width..(row + 1) * grid.width] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn read_pfm_file(path: &Path) -> Result<PfmGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pfm(&bytes)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Reads a depth PFM. Zero and infinite entries become masked-invalid
/// pixels; negative or NaN entries are rejected.
pub fn read_depth_pfm(path: impl AsRef<Path>) -> Result<DepthMap> {
    let grid = read_pfm_file(path.as_ref())?;
    depth_from_grid(grid)
}

pub fn depth_from_grid(grid: PfmGrid) -> Result<DepthMap> {
    let mut valid = Vec::with_capacity(grid.data.len());
    let mut data = Vec::with_capacity(grid.data.len());
    for (i, &v) in grid.data.iter().enumerate() {
        if v.is_nan() || v < 0.0 {
            return Err(Error::InvalidDepth(format!("entry {i} = {v}")));
        }
        valid.push(v > 0.0 && v.is_finite());
        data.push(v as f64);
    }
    DepthMap::with_mask(grid.width, grid.height, data, valid)
}

/// Writes depth as float32; masked pixels are written as 0.
pub fn write_depth_pfm(depth: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    let data = depth
        .data()
        .iter()
        .enumerate()
        .map(|(i, &d)| if depth.is_valid_index(i) { d as f32 } else { 0.0 })
        .collect();
    let grid = PfmGrid {
        width: depth.width(),
        height: depth.height(),
        data,
    };
    write_bytes(path.as_ref(), &encode_pfm(&grid))
}

pub fn read_transmission_pfm(path: impl AsRef<Path>) -> Result<TransmissionMap> {
    let grid = read_pfm_file(path.as_ref())?;
    TransmissionMap::new(
        grid.width,
        grid.height,
        grid.data.iter().map(|&v| v as f64).collect(),
    )
}

pub fn write_transmission_pfm(t: &TransmissionMap, path: impl AsRef<Path>) -> Result<()> {
    let grid = PfmGrid {
        width: t.width(),
        height: t.height(),
        // keep the value representable as a positive f32
        data: t.data().iter().map(|&v| (v as f32).max(f32::MIN_POSITIVE)).collect(),
    };
    write_bytes(path.as_ref(), &encode_pfm(&grid))
}

/// Parses KITTI odometry poses: one row-major 3x4 matrix per line.
/// Rotations drifting by more than 1e-6 are snapped to the nearest rotation;
/// `|det - 1| > 1e-2` is rejected as non-rigid. Blank lines are skipped.
pub fn parse_kitti_poses(text: &str) -> Result<Vec<PoseSE3>> {
    let mut poses = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::MalformedLine {
                line: line_no,
                reason: e.to_string(),
            })?;
        if values.len() != 12 {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: format!("{} values (expected 12)", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: "non-finite value".into(),
            });
        }
        let m = &values;
        let mut rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let det = rotation.determinant();
        if (det - 1.0).abs() > 1e-2 {
            return Err(Error::NonRigid { line: line_no, det });
        }
        if se3::orthonormality_drift(&rotation) > se3::RIGID_TOLERANCE
            || (det - 1.0).abs() > se3::RIGID_TOLERANCE
        {
            rotation = se3::nearest_rotation(&rotation);
        }
        poses.push(PoseSE3::from_parts_unchecked(
            rotation,
            Vector3::new(m[3], m[7], m[11]),
        ));
    }
    Ok(poses)
}

pub fn read_kitti_poses(path: impl AsRef<Path>) -> Result<Vec<PoseSE3>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kitti_poses(&text)
}

/// KITTI text: twelve `{:e}` values per line.
pub fn format_kitti_poses(poses: &[PoseSE3]) -> String {
    let mut out = String::new();
    for p in poses {
        let row: Vec<String> = p.to_row_major_3x4().iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_kitti_poses(poses: &[PoseSE3], path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), format_kitti_poses(poses).as_bytes())
}

/// A KITTI odometry sequence directory: `image_2/*.png` plus a pose file.
#[derive(Clone, Debug)]
pub struct KittiSequence {
    pub frames: Vec<PathBuf>,
    pub poses: Vec<PoseSE3>,
}

impl KittiSequence {
    /// Lists the left-camera frames of `dir` and reads `poses_file`. Only
    /// metadata is validated: frame count must match the pose count.
    pub fn open(dir: impl AsRef<Path>, poses_file: impl AsRef<Path>) -> Result<Self> {
        let image_dir = dir.as_ref().join("image_2");
        let entries = fs::read_dir(&image_dir).map_err(|e| Error::io(&image_dir, e))?;
        let mut frames = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&image_dir, e))?;
            let path = entry.path();
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
                frames.push(path);
            }
        }
        frames.sort();
        let poses = read_kitti_poses(poses_file)?;
        if frames.len() != poses.len() {
            return Err(Error::LengthMismatch {
                estimated: frames.len(),
                ground_truth: poses.len(),
            });
        }
        Ok(Self { frames, poses })
    }
}
