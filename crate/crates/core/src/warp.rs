//! Inverse warping: backproject target pixels through depth, move them by
//! the relative pose and sample the source image where they land.
//!
//! `pose` maps target-camera coordinates to source-camera coordinates.

use crate::error::{Error, Result};
use crate::image::{CameraIntrinsics, DepthMap, ImageBuffer};
use crate::se3::PoseSE3;

/// Minimum depth in front of the source camera, in meters.
pub const MIN_PROJECTED_DEPTH: f64 = 1e-3;

/// Slack allowed outside the image before a coordinate counts as out of
/// bounds; coordinates inside the slack are clamped onto the border.
const BOUNDS_SLACK: f64 = 1e-9;

/// Continuous source coordinates for every target pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpField {
    width: usize,
    height: usize,
    coords: Vec<(f64, f64)>,
    valid: Vec<bool>,
}

impl WarpField {
    /// Build a field directly. Invalid entries may hold any coordinates.
    pub fn new(width: usize, height: usize, coords: Vec<(f64, f64)>, valid: Vec<bool>) -> Result<Self> {
        let n = width * height;
        if coords.len() != n || valid.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "warp field {width}x{height} with {} coords and {} flags",
                coords.len(),
                valid.len()
            )));
        }
        let (wmax, hmax) = ((width - 1) as f64, (height - 1) as f64);
        for (c, v) in coords.iter().zip(&valid) {
            if *v && !(c.0 >= 0.0 && c.0 <= wmax && c.1 >= 0.0 && c.1 <= hmax) {
                return Err(Error::InvalidImage(format!("valid coordinate {c:?} out of bounds")));
            }
        }
        Ok(Self {
            width,
            height,
            coords,
            valid,
        })
    }

    /// Every pixel maps to itself.
    pub fn identity(width: usize, height: usize) -> Self {
        let coords = (0..width * height)
            .map(|i| ((i % width) as f64, (i / width) as f64))
            .collect();
        Self {
            width,
            height,
            coords,
            valid: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn coord(&self, x: usize, y: usize) -> (f64, f64) {
        self.coords[y * self.width + x]
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn coverage(&self) -> f64 {
        self.valid.iter().filter(|&&v| v).count() as f64 / self.valid.len() as f64
    }
}

/// A synthesized target image with its validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructedView {
    pub image: ImageBuffer,
    pub valid: Vec<bool>,
    pub coverage: f64,
}

impl ReconstructedView {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Source coordinates of every target pixel under `pose`.
pub fn warp_field(
    depth_target: &DepthMap,
    pose: &PoseSE3,
    k_src: &CameraIntrinsics,
    k_tgt: &CameraIntrinsics,
) -> Result<WarpField> {
    k_src.validate()?;
    k_tgt.validate()?;
    let (w, h) = (depth_target.width(), depth_target.height());
    if w < 2 || h < 2 {
        return Err(Error::InvalidDepth(format!("depth map {w}x{h} is too small to warp")));
    }
    let (wmax, hmax) = ((w - 1) as f64, (h - 1) as f64);
    let r = pose.rotation();
    let t = pose.translation();
    let mut coords = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !depth_target.is_valid_index(i) {
                coords.push((0.0, 0.0));
                valid.push(false);
                continue;
            }
            let d = depth_target.data()[i];
            let ray = k_tgt.backproject(x as f64, y as f64);
            let p = [ray[0] * d, ray[1] * d, ray[2] * d];
            let q = [
                r[(0, 0)] * p[0] + r[(0, 1)] * p[1] + r[(0, 2)] * p[2] + t[0],
                r[(1, 0)] * p[0] + r[(1, 1)] * p[1] + r[(1, 2)] * p[2] + t[1],
                r[(2, 0)] * p[0] + r[(2, 1)] * p[1] + r[(2, 2)] * p[2] + t[2],
            ];
            if !(q[2] > MIN_PROJECTED_DEPTH) {
                coords.push((0.0, 0.0));
                valid.push(false);
                continue;
            }
            let (u, v) = k_src.project(q);
            let inside = u >= -BOUNDS_SLACK
                && u <= wmax + BOUNDS_SLACK
                && v >= -BOUNDS_SLACK
                && v <= hmax + BOUNDS_SLACK;
            if inside {
                coords.push((u.clamp(0.0, wmax), v.clamp(0.0, hmax)));
                valid.push(true);
            } else {
                coords.push((u, v));
                valid.push(false);
            }
        }
    }
    Ok(WarpField {
        width: w,
        height: h,
        coords,
        valid,
    })
}

/// Interpolation cell and weights for a coordinate in `[0, n-1]`. Exact at
/// integers: the fractional part is 0 and the left sample is returned.
#[inline]
fn cell(v: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let i0 = (v.floor() as usize).min(n - 2);
    (i0, i0 + 1, v - i0 as f64)
}

/// Bilinear value of `image` channel `c` at `(x, y)`, which must lie inside.
#[inline]
pub fn bilinear_at(image: &ImageBuffer, x: f64, y: f64, c: usize) -> f64 {
    let (x0, x1, fx) = cell(x, image.width());
    let (y0, y1, fy) = cell(y, image.height());
    let top = lerp(image.get(x0, y0, c), image.get(x1, y0, c), fx);
    let bottom = lerp(image.get(x0, y1, c), image.get(x1, y1, c), fx);
    lerp(top, bottom, fy)
}

#[inline]
fn lerp(a: f64, b: f64, f: f64) -> f64 {
    if f == 0.0 {
        a
    } else {
        (1.0 - f) * a + f * b
    }
}

/// Sample `source` at every valid field coordinate. Invalid pixels are 0.
pub fn bilinear_sample(source: &ImageBuffer, field: &WarpField) -> Result<ReconstructedView> {
    sample_impl(source, field, None)
}

/// As [`bilinear_sample`], but `source` itself carries a validity mask: a
/// sample is valid only when every neighbor with nonzero weight is valid.
pub fn bilinear_sample_masked(
    source: &ImageBuffer,
    source_valid: &[bool],
    field: &WarpField,
) -> Result<ReconstructedView> {
    if source_valid.len() != source.pixel_count() {
        return Err(Error::DimensionMismatch(format!(
            "source mask has {} entries for {} pixels",
            source_valid.len(),
            source.pixel_count()
        )));
    }
    sample_impl(source, field, Some(source_valid))
}

fn sample_impl(source: &ImageBuffer, field: &WarpField, mask: Option<&[bool]>) -> Result<ReconstructedView> {
    source.check_size(field.width, field.height, "source vs warp field")?;
    let (w, ch) = (source.width(), source.channels());
    let mut data = vec![0.0; field.coords.len() * ch];
    let mut valid = field.valid.clone();
    for (i, &(x, y)) in field.coords.iter().enumerate() {
        if !valid[i] {
            continue;
        }
        if let Some(m) = mask {
            let (x0, x1, fx) = cell(x, w);
            let (y0, y1, fy) = cell(y, source.height());
            let ok = m[y0 * w + x0]
                && (fx == 0.0 || m[y0 * w + x1])
                && (fy == 0.0 || m[y1 * w + x0])
                && (fx == 0.0 || fy == 0.0 || m[y1 * w + x1]);
            if !ok {
                valid[i] = false;
                continue;
            }
        }
        for c in 0..ch {
            data[i * ch + c] = bilinear_at(source, x, y, c);
        }
    }
    let count = valid.iter().filter(|&&v| v).count();
    Ok(ReconstructedView {
        image: ImageBuffer::new(field.width, field.height, ch, data)?,
        coverage: count as f64 / valid.len() as f64,
        valid,
    })
}

/// Synthesize the target view from `source`, target depth and pose, with
/// one camera for both views.
pub fn reconstruct_view(
    source: &ImageBuffer,
    depth_target: &DepthMap,
    pose: &PoseSE3,
    k: &CameraIntrinsics,
) -> Result<ReconstructedView> {
    let field = warp_field(depth_target, pose, k, k)?;
    bilinear_sample(source, &field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::{inverse, se3_exp, Twist};
    use proptest::prelude::*;

    fn texture(w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, 3, |x, y, c| {
            let (xf, yf) = (x as f64, y as f64);
            0.5 + 0.2 * (0.31 * xf + c as f64).sin() * (0.23 * yf).cos() + 0.1 * (0.07 * (xf + 2.0 * yf)).sin()
        })
    }

    #[test]
    fn identity_pose_is_identity_field() {
        let k = CameraIntrinsics::centered(16, 12, 0.7);
        let d = DepthMap::constant(16, 12, 7.0).unwrap();
        let f = warp_field(&d, &PoseSE3::identity(), &k, &k).unwrap();
        assert!(f.valid().iter().all(|&v| v));
        for y in 0..12 {
            for x in 0..16 {
                let (u, v) = f.coord(x, y);
                assert!((u - x as f64).abs() < 1e-12 && (v - y as f64).abs() < 1e-12);
            }
        }
        let src = texture(16, 12);
        let r = reconstruct_view(&src, &d, &PoseSE3::identity(), &k).unwrap();
        assert_eq!(r.coverage, 1.0);
        for (a, b) in r.image.data().iter().zip(src.data()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn z_translation_scales_about_principal_point() {
        let (w, h) = (21, 17);
        let k = CameraIntrinsics::centered(w, h, 0.7);
        let (d, tz) = (10.0, 2.0);
        let depth = DepthMap::constant(w, h, d).unwrap();
        // Moving the scene 2 m closer: X' = X + (0, 0, -tz).
        let pose = PoseSE3::from_translation([0.0, 0.0, -tz]);
        let f = warp_field(&depth, &pose, &k, &k).unwrap();
        let s = d / (d - tz);
        for y in 0..h {
            for x in 0..w {
                let ex = k.cx + s * (x as f64 - k.cx);
                let ey = k.cy + s * (y as f64 - k.cy);
                let inside = ex >= 0.0 && ex <= (w - 1) as f64 && ey >= 0.0 && ey <= (h - 1) as f64;
                assert_eq!(f.is_valid(x, y), inside, "({x},{y})");
                if inside {
                    let (u, v) = f.coord(x, y);
                    assert!((u - ex).abs() < 1e-9 && (v - ey).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn behind_camera_is_invalid() {
        let k = CameraIntrinsics::centered(8, 8, 0.7);
        let depth = DepthMap::constant(8, 8, 1.0).unwrap();
        let pose = PoseSE3::from_translation([0.0, 0.0, -1.0 + 5e-4]);
        let f = warp_field(&depth, &pose, &k, &k).unwrap();
        assert!(f.valid().iter().all(|&v| !v));
        let r = bilinear_sample(&texture(8, 8), &f).unwrap();
        assert_eq!(r.coverage, 0.0);
        assert!(r.image.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn masked_depth_pixels_are_invalid() {
        let k = CameraIntrinsics::centered(4, 4, 0.7);
        let mut valid = vec![true; 16];
        valid[5] = false;
        let depth = DepthMap::with_mask(4, 4, vec![3.0; 16], valid).unwrap();
        let f = warp_field(&depth, &PoseSE3::identity(), &k, &k).unwrap();
        assert!(!f.is_valid(1, 1));
        assert_eq!(f.valid().iter().filter(|&&v| v).count(), 15);
    }

    #[test]
    fn half_pixel_interpolation() {
        let src = ImageBuffer::new(2, 2, 1, vec![0.2, 0.6, 0.0, 0.0]).unwrap();
        let f = WarpField::new(2, 2, vec![(0.5, 0.0); 4], vec![true; 4]).unwrap();
        let r = bilinear_sample(&src, &f).unwrap();
        assert!(r.image.data().iter().all(|&v| (v - 0.4).abs() < 1e-15));
        assert_eq!(bilinear_at(&src, 1.0, 0.0, 0), 0.6);
        assert_eq!(bilinear_at(&src, 1.0, 1.0, 0), 0.0);
    }

    #[test]
    fn identity_field_samples_exactly() {
        let src = texture(9, 7);
        let r = bilinear_sample(&src, &WarpField::identity(9, 7)).unwrap();
        assert_eq!(r.image, src);
    }

    #[test]
    fn masked_sampling_rejects_touching_invalid_neighbors() {
        let src = texture(4, 4);
        let mut m = vec![true; 16];
        m[5] = false;
        assert!(bilinear_sample_masked(&src, &m[..4], &WarpField::identity(4, 4)).is_err());
        let f4 = WarpField::new(
            4,
            4,
            (0..16).map(|i| if i < 4 { [(0.5, 0.5), (1.0, 2.0), (2.0, 1.0), (2.5, 2.5)][i] } else { (3.0, 3.0) }).collect(),
            vec![true; 16],
        )
        .unwrap();
        let r = bilinear_sample_masked(&src, &m, &f4).unwrap();
        assert_eq!(&r.valid[..4], &[false, true, true, true]);
        // (1.0, 2.0) has zero weight on (1, 1) and is unaffected by its mask
        assert_eq!(r.image.get(1, 0, 0), src.get(1, 2, 0));
    }

    #[test]
    fn coverage_shrinks_with_translation() {
        let k = CameraIntrinsics::centered(24, 24, 0.7);
        let depth = DepthMap::constant(24, 24, 5.0).unwrap();
        let mut last = 1.0;
        for i in 0..8 {
            let pose = PoseSE3::from_translation([0.15 * i as f64, 0.05 * i as f64, 0.0]);
            let cov = warp_field(&depth, &pose, &k, &k).unwrap().coverage();
            assert!(cov <= last);
            last = cov;
        }
    }

    #[test]
    fn round_trip_through_inverse_pose() {
        let (w, h) = (48, 40);
        let k = CameraIntrinsics::centered(w, h, 0.7);
        let depth = DepthMap::constant(w, h, 8.0).unwrap();
        let pose = se3_exp(&Twist::new([0.0, 0.004, 0.002], [0.1, -0.05, 0.2]));
        let src = texture(w, h);
        let fwd = reconstruct_view(&src, &depth, &pose, &k).unwrap();
        // Depth of the forward view, seen from the moved camera, is the
        // plane depth shifted by the pose; use the exact plane for it.
        let inv = inverse(&pose);
        let back_depth_data: Vec<f64> = (0..w * h)
            .map(|i| {
                let ray = k.backproject((i % w) as f64, (i / w) as f64);
                // solve for the point on the moved plane along this ray
                let n = inv.rotation().row(2);
                let off = inv.translation()[2];
                (8.0 - off) / (n[0] * ray[0] + n[1] * ray[1] + n[2] * ray[2])
            })
            .collect();
        let back_depth = DepthMap::new(w, h, back_depth_data).unwrap();
        let field = warp_field(&back_depth, &inv, &k, &k).unwrap();
        let back = bilinear_sample_masked(&fwd.image, &fwd.valid, &field).unwrap();
        let (mut sum, mut n) = (0.0, 0usize);
        for y in 4..h - 4 {
            for x in 4..w - 4 {
                let i = y * w + x;
                if back.valid[i] {
                    for c in 0..3 {
                        sum += (back.image.get(x, y, c) - src.get(x, y, c)).abs();
                        n += 1;
                    }
                }
            }
        }
        assert!(n > 3 * (w - 8) * (h - 8) / 2);
        assert!(sum / (n as f64) < 0.02, "{}", sum / n as f64);
    }

    proptest! {
        #[test]
        fn scale_covariance(s in 0.2f64..5.0, tx in -0.3f64..0.3, tz in -0.3f64..0.3, wz in -0.03f64..0.03) {
            let k = CameraIntrinsics::centered(12, 10, 0.7);
            let d: Vec<f64> = (0..120).map(|i| 4.0 + (i % 7) as f64 * 0.5).collect();
            let depth = DepthMap::new(12, 10, d.clone()).unwrap();
            let scaled = DepthMap::new(12, 10, d.iter().map(|v| v * s).collect()).unwrap();
            let rot = [0.0, 0.0, wz];
            let a = warp_field(&depth, &PoseSE3::from_axis_angle(rot, [tx, 0.0, tz]), &k, &k).unwrap();
            let b = warp_field(&scaled, &PoseSE3::from_axis_angle(rot, [tx * s, 0.0, tz * s]), &k, &k).unwrap();
            prop_assert_eq!(a.valid(), b.valid());
            for (p, q) in a.coords().iter().zip(b.coords()) {
                prop_assert!((p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9);
            }
        }
    }
}
