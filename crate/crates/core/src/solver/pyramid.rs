//! 2x2 box-filter image pyramids with matching intrinsics.

use crate::error::Result;
use crate::image::{CameraIntrinsics, DepthMap, ImageBuffer};

/// Smallest side length a pyramid level may have.
pub const MIN_LEVEL_SIZE: usize = 12;

/// Half-resolution image: each output pixel averages a 2x2 block. An odd
/// trailing row or column is dropped.
pub fn downsample_image(image: &ImageBuffer) -> Result<ImageBuffer> {
    let (w, h) = (image.width() / 2, image.height() / 2);
    Ok(ImageBuffer::from_fn(w, h, image.channels(), |x, y, c| {
        0.25 * (image.get(2 * x, 2 * y, c)
            + image.get(2 * x + 1, 2 * y, c)
            + image.get(2 * x, 2 * y + 1, c)
            + image.get(2 * x + 1, 2 * y + 1, c))
    }))
}

/// Half-resolution validity: a block is valid only if all four inputs are.
pub fn downsample_mask(mask: &[bool], width: usize, height: usize) -> Vec<bool> {
    let (w, h) = (width / 2, height / 2);
    (0..w * h)
        .map(|i| {
            let (x, y) = (2 * (i % w), 2 * (i / w));
            mask[y * width + x] && mask[y * width + x + 1] && mask[(y + 1) * width + x] && mask[(y + 1) * width + x + 1]
        })
        .collect()
}

/// Half-resolution depth: mean of the valid samples of each block, masked
/// when none is valid.
pub fn downsample_depth(depth: &DepthMap) -> Result<DepthMap> {
    let (sw, w, h) = (depth.width(), depth.width() / 2, depth.height() / 2);
    let mut data = vec![1.0; w * h];
    let mut valid = vec![true; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut sum, mut n) = (0.0, 0);
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let i = (2 * y + dy) * sw + 2 * x + dx;
                if depth.is_valid_index(i) {
                    sum += depth.data()[i];
                    n += 1;
                }
            }
            if n == 0 {
                valid[y * w + x] = false;
            } else {
                data[y * w + x] = sum / n as f64;
            }
        }
    }
    DepthMap::with_mask(w, h, data, valid)
}

/// Number of usable levels, at most `requested`, such that the coarsest
/// level keeps both sides at or above [`MIN_LEVEL_SIZE`].
pub fn usable_levels(width: usize, height: usize, requested: usize) -> usize {
    let mut levels = 1;
    let (mut w, mut h) = (width, height);
    while levels < requested && w / 2 >= MIN_LEVEL_SIZE && h / 2 >= MIN_LEVEL_SIZE {
        w /= 2;
        h /= 2;
        levels += 1;
    }
    levels
}

/// Successive halvings of `base`, finest first, `levels` entries in total.
pub fn build<T>(base: T, levels: usize, mut down: impl FnMut(&T) -> Result<T>) -> Result<Vec<T>> {
    let mut out = vec![base];
    for _ in 1..levels {
        let next = down(out.last().unwrap())?;
        out.push(next);
    }
    Ok(out)
}

/// Intrinsics for every level, finest first.
pub fn intrinsics_levels(k: &CameraIntrinsics, levels: usize) -> Vec<CameraIntrinsics> {
    let mut out = vec![*k];
    for _ in 1..levels {
        let next = out.last().unwrap().halved();
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::PoseSE3;
    use crate::warp::warp_field;

    #[test]
    fn image_block_average() {
        let img = ImageBuffer::new(3, 2, 1, vec![0.0, 0.4, 0.9, 0.2, 0.6, 0.9]).unwrap();
        let d = downsample_image(&img).unwrap();
        assert_eq!((d.width(), d.height()), (1, 1));
        assert!((d.get(0, 0, 0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn depth_ignores_masked_samples() {
        let depth = DepthMap::with_mask(2, 2, vec![2.0, 4.0, 9.0, 9.0], vec![true, true, false, false]).unwrap();
        let d = downsample_depth(&depth).unwrap();
        assert_eq!(d.data(), &[3.0]);
        let none = DepthMap::with_mask(2, 2, vec![1.0; 4], vec![false; 4]).unwrap();
        assert_eq!(downsample_depth(&none).unwrap().valid_count(), 0);
    }

    #[test]
    fn mask_needs_full_block() {
        let m = vec![true, true, true, false, true, true, true, true];
        assert_eq!(downsample_mask(&m, 4, 2), vec![true, false]);
    }

    #[test]
    fn level_count() {
        assert_eq!(usable_levels(96, 96, 3), 3);
        assert_eq!(usable_levels(40, 40, 3), 2);
        assert_eq!(usable_levels(20, 64, 5), 1);
    }

    #[test]
    fn halved_intrinsics_track_the_warp() {
        // The same pose moves a pixel by half as many coarse pixels.
        let k = CameraIntrinsics::centered(64, 48, 0.7);
        let kh = intrinsics_levels(&k, 2)[1];
        let pose = PoseSE3::from_axis_angle([0.0, 0.01, 0.0], [0.2, 0.0, 0.0]);
        let fine = warp_field(&DepthMap::constant(64, 48, 6.0).unwrap(), &pose, &k, &k).unwrap();
        let coarse = warp_field(&DepthMap::constant(32, 24, 6.0).unwrap(), &pose, &kh, &kh).unwrap();
        let (u, v) = coarse.coord(10, 8);
        let (fu, fv) = fine.coord(20, 16);
        // coarse pixel x covers fine pixels 2x and 2x+1, centered at 2x + 0.5
        let (eu, ev) = ((fu + (fine.coord(21, 17).0 - fu) / 2.0 - 0.5) / 2.0, (fv + (fine.coord(21, 17).1 - fv) / 2.0 - 0.5) / 2.0);
        assert!((u - eu).abs() < 1e-3 && (v - ev).abs() < 1e-3, "{u} {v} vs {eu} {ev}");
    }
}
