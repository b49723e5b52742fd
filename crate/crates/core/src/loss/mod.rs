//! Self-supervised losses. Every function is pure; norms are normalized by
//! the element count so values compare across resolutions.

pub mod features;
pub mod gan;
pub mod ssim;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{DepthMap, ImageBuffer, TransmissionMap};
use crate::se3::{compose, inverse, se3_log, PoseSE3};
use crate::warp::ReconstructedView;

pub use features::{FeatureExtractor, FeatureMap, HzfxExtractor, ReferenceExtractor};
pub use gan::{
    lsgan_discriminator_loss, lsgan_generator_loss, total_gan_loss, Discriminator, GanBreakdown, HalfCycleScores,
    SharpnessDiscriminator,
};
pub use ssim::{ssim_map, SsimConfig};

/// SSIM mixing factor and the weights of the combined objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: f64,
    pub lambda_p: f64,
    pub lambda_s: f64,
    pub lambda_gan: f64,
    pub lambda_cyc: f64,
    pub lambda_gra: f64,
    pub lambda_per: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            lambda_p: 1.0,
            lambda_s: 0.1,
            lambda_gan: 0.0,
            lambda_cyc: 0.05,
            lambda_gra: 0.5,
            lambda_per: 0.05,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [
            self.lambda_p,
            self.lambda_s,
            self.lambda_gan,
            self.lambda_cyc,
            self.lambda_gra,
            self.lambda_per,
        ];
        if !(0.0..=1.0).contains(&self.alpha) || lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidConfig(format!("loss weights {self:?}")));
        }
        Ok(())
    }
}

/// Unweighted loss terms, in objective order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub photometric: f64,
    pub smoothness: f64,
    pub gan: f64,
    pub cycle: f64,
    pub gradient: f64,
    pub perceptual: f64,
}

impl LossComponents {
    fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("photometric", self.photometric),
            ("smoothness", self.smoothness),
            ("gan", self.gan),
            ("cycle", self.cycle),
            ("gradient", self.gradient),
            ("perceptual", self.perceptual),
        ]
    }
}

/// Weighted terms and their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub weighted: LossComponents,
    pub total: f64,
}

/// `lambda_p L_p + lambda_s L_s + lambda_gan L_gan + lambda_cyc L_cyc +
/// lambda_gra L_gra + lambda_per L_per`.
pub fn total_loss(components: &LossComponents, weights: &LossWeights) -> Result<LossBreakdown> {
    for (name, v) in components.named() {
        if !v.is_finite() {
            return Err(Error::NonFiniteComponent(name));
        }
    }
    let weighted = LossComponents {
        photometric: weights.lambda_p * components.photometric,
        smoothness: weights.lambda_s * components.smoothness,
        gan: weights.lambda_gan * components.gan,
        cycle: weights.lambda_cyc * components.cycle,
        gradient: weights.lambda_gra * components.gradient,
        perceptual: weights.lambda_per * components.perceptual,
    };
    let total = weighted.named().iter().map(|(_, v)| v).sum();
    Ok(LossBreakdown { weighted, total })
}

/// Regularizer over the reconstruction validity mask, added to the
/// appearance loss.
pub trait MaskPenalty: Send + Sync {
    fn penalty(&self, valid: &[bool]) -> f64;
}

impl<F> MaskPenalty for F
where
    F: Fn(&[bool]) -> f64 + Send + Sync,
{
    fn penalty(&self, valid: &[bool]) -> f64 {
        self(valid)
    }
}

/// The reconstruction with invalid pixels replaced by the target's values.
pub fn fill_invalid(recon: &ReconstructedView, target: &ImageBuffer) -> Result<ImageBuffer> {
    recon.image.check_same_shape(target, "reconstruction vs target")?;
    let ch = target.channels();
    let mut data = recon.image.data().to_vec();
    for (i, &v) in recon.valid.iter().enumerate() {
        if !v {
            data[i * ch..(i + 1) * ch].copy_from_slice(&target.data()[i * ch..(i + 1) * ch]);
        }
    }
    ImageBuffer::new(target.width(), target.height(), ch, data)
}

/// Mean over valid pixels of `alpha (1 - SSIM) / 2 + (1 - alpha) |I_hat - I|`,
/// the absolute error averaged over channels. SSIM statistics see the
/// reconstruction with invalid pixels filled from the target.
pub fn appearance_loss(recon: &ReconstructedView, target: &ImageBuffer, alpha: f64, cfg: &SsimConfig) -> Result<f64> {
    let filled = fill_invalid(recon, target)?;
    let count = recon.valid_count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let ssim = if alpha > 0.0 { Some(ssim_map(&filled, target, cfg)?) } else { None };
    let ch = target.channels();
    let mut sum = 0.0;
    for (i, _) in recon.valid.iter().enumerate().filter(|(_, v)| **v) {
        let l1 = (0..ch)
            .map(|c| (filled.data()[i * ch + c] - target.data()[i * ch + c]).abs())
            .sum::<f64>()
            / ch as f64;
        let s = ssim.as_ref().map_or(1.0, |m| m.data()[i]);
        sum += alpha * (1.0 - s) / 2.0 + (1.0 - alpha) * l1;
    }
    Ok(sum / count as f64)
}

/// [`appearance_loss`] plus a mask regularizer.
pub fn appearance_loss_with_penalty(
    recon: &ReconstructedView,
    target: &ImageBuffer,
    alpha: f64,
    cfg: &SsimConfig,
    penalty: &dyn MaskPenalty,
) -> Result<f64> {
    Ok(appearance_loss(recon, target, alpha, cfg)? + penalty.penalty(&recon.valid))
}

/// Edge-aware smoothness with forward differences: the mean of
/// `|dD/dx| exp(-|dI/dx|)` over horizontal neighbor pairs plus the same
/// vertically. Image differences are averaged over channels; pairs touching
/// masked depth are skipped.
pub fn smoothness_loss(depth: &DepthMap, image: &ImageBuffer) -> Result<f64> {
    image.check_size(depth.width(), depth.height(), "smoothness depth vs image")?;
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    let d = depth.data();
    let img = image.data();
    let image_diff = |a: usize, b: usize| {
        (0..ch).map(|c| (img[a * ch + c] - img[b * ch + c]).abs()).sum::<f64>() / ch as f64
    };
    let term = |pairs: &mut dyn Iterator<Item = (usize, usize)>| {
        let (mut sum, mut n) = (0.0, 0usize);
        for (a, b) in pairs {
            if depth.is_valid_index(a) && depth.is_valid_index(b) {
                sum += (d[b] - d[a]).abs() * (-image_diff(a, b)).exp();
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    };
    let sx = term(&mut (0..h).flat_map(|y| (0..w.saturating_sub(1)).map(move |x| (y * w + x, y * w + x + 1))));
    let sy = term(&mut (0..h.saturating_sub(1)).flat_map(|y| (0..w).map(move |x| (y * w + x, (y + 1) * w + x))));
    Ok(sx + sy)
}

fn normalized_frobenius(a: &[f64], b: &[f64]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len() as f64).sqrt()
}

/// `||I_rec - I_ori||_F / sqrt(pixels * channels)`.
pub fn haze_reconstruction_loss(reconstructed: &ImageBuffer, original: &ImageBuffer) -> Result<f64> {
    reconstructed.check_same_shape(original, "haze reconstruction")?;
    Ok(normalized_frobenius(reconstructed.data(), original.data()))
}

/// `||t_dec - t_tra||_F / sqrt(pixels)`.
pub fn aux_transmission_loss(t_dec: &TransmissionMap, t_tra: &TransmissionMap) -> Result<f64> {
    if t_dec.width() != t_tra.width() || t_dec.height() != t_tra.height() {
        return Err(Error::DimensionMismatch(format!(
            "transmission maps {}x{} vs {}x{}",
            t_dec.width(),
            t_dec.height(),
            t_tra.width(),
            t_tra.height()
        )));
    }
    Ok(normalized_frobenius(t_dec.data(), t_tra.data()))
}

/// Channel-averaged central-difference gradient at an interior pixel.
#[inline]
fn central_gradient(img: &ImageBuffer, x: usize, y: usize) -> (f64, f64) {
    let ch = img.channels();
    let (mut gx, mut gy) = (0.0, 0.0);
    for c in 0..ch {
        gx += img.get(x + 1, y, c) - img.get(x - 1, y, c);
        gy += img.get(x, y + 1, c) - img.get(x, y - 1, c);
    }
    (gx / (2.0 * ch as f64), gy / (2.0 * ch as f64))
}

/// Mean over usable interior pixels of `||grad I_hat - grad I||_2` with
/// channel-averaged central differences. With a mask, a pixel is usable
/// only if it and its four neighbors are valid.
pub fn gradient_loss(recon: &ImageBuffer, target: &ImageBuffer, mask: Option<&[bool]>) -> Result<f64> {
    recon.check_same_shape(target, "gradient loss")?;
    let (w, h) = (target.width(), target.height());
    if let Some(m) = mask {
        if m.len() != w * h {
            return Err(Error::DimensionMismatch(format!("mask of {} for {} pixels", m.len(), w * h)));
        }
    }
    let ok = |i: usize| mask.is_none_or(|m| m[i]);
    let (mut sum, mut n) = (0.0, 0usize);
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let i = y * w + x;
            if !(ok(i) && ok(i - 1) && ok(i + 1) && ok(i - w) && ok(i + w)) {
                continue;
            }
            let (ax, ay) = central_gradient(recon, x, y);
            let (bx, by) = central_gradient(target, x, y);
            sum += (ax - bx).hypot(ay - by);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / n as f64)
}

/// Sum of squared feature differences divided by the feature-map area.
pub fn perceptual_loss(recon: &ImageBuffer, target: &ImageBuffer, fx: &dyn FeatureExtractor) -> Result<f64> {
    recon.check_same_shape(target, "perceptual loss")?;
    perceptual_distance(&fx.extract(recon)?, &fx.extract(target)?)
}

/// [`perceptual_loss`] on features already extracted.
pub fn perceptual_distance(a: &FeatureMap, b: &FeatureMap) -> Result<f64> {
    if (a.width, a.height, a.channels) != (b.width, b.height, b.channels) {
        return Err(Error::ExtractorShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        )));
    }
    for m in [a, b] {
        if m.data.len() != m.width * m.height * m.channels || m.width * m.height == 0 {
            return Err(Error::ExtractorShapeMismatch(format!(
                "{} values for a {}x{}x{} map",
                m.data.len(),
                m.width,
                m.height,
                m.channels
            )));
        }
    }
    let ss: f64 = a.data.iter().zip(&b.data).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(ss / (a.width * a.height) as f64)
}

/// How two pose estimates are compared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleMetric {
    /// Norm of the twist of the relative pose `p_b^-1 p_f`.
    #[default]
    Relative,
    /// Norm of the difference of the two twists.
    RawTwist,
}

/// `||log(p_b^-1 p_f)||_2`.
pub fn cycle_pose_loss(p_f: &PoseSE3, p_b: &PoseSE3) -> Result<f64> {
    Ok(se3_log(&compose(&inverse(p_b), p_f))?.norm())
}

/// `||log p_f - log p_b||_2`.
pub fn cycle_pose_loss_raw(p_f: &PoseSE3, p_b: &PoseSE3) -> Result<f64> {
    let (a, b) = (se3_log(p_f)?, se3_log(p_b)?);
    Ok((a.as_vector() - b.as_vector()).norm())
}

pub fn cycle_loss(p_f: &PoseSE3, p_b: &PoseSE3, metric: CycleMetric) -> Result<f64> {
    match metric {
        CycleMetric::Relative => cycle_pose_loss(p_f, p_b),
        CycleMetric::RawTwist => cycle_pose_loss_raw(p_f, p_b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fog::{dehaze, synthesize_haze, FogParams};
    use crate::se3::{se3_exp, Twist};
    use proptest::prelude::*;

    fn full_view(image: ImageBuffer) -> ReconstructedView {
        let n = image.pixel_count();
        ReconstructedView {
            image,
            valid: vec![true; n],
            coverage: 1.0,
        }
    }

    fn scene(w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, 3, |x, y, c| {
            0.5 + 0.3 * (0.5 * x as f64 + 0.2 * c as f64).sin() * (0.35 * y as f64).cos()
        })
    }

    #[test]
    fn appearance_zero_on_identity() {
        let t = scene(8, 8);
        let l = appearance_loss(&full_view(t.clone()), &t, 0.85, &SsimConfig::default()).unwrap();
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn appearance_alpha_zero_is_mean_abs() {
        let t = scene(9, 7);
        let r = t.map(|v| (v * 0.9 + 0.03).min(1.0));
        let mae = r.data().iter().zip(t.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / r.data().len() as f64;
        let l = appearance_loss(&full_view(r), &t, 0.0, &SsimConfig::default()).unwrap();
        assert!((l - mae).abs() < 1e-12);
    }

    #[test]
    fn appearance_black_versus_white() {
        let black = ImageBuffer::filled(5, 5, 3, 0.0);
        let white = ImageBuffer::filled(5, 5, 3, 1.0);
        let l = appearance_loss(&full_view(black), &white, 1.0, &SsimConfig::default()).unwrap();
        let cfg = SsimConfig::default();
        let s = cfg.c1 * cfg.c2 / ((1.0 + cfg.c1) * cfg.c2);
        assert!((l - (1.0 - s) / 2.0).abs() < 1e-12);
        assert!((l - 0.49995).abs() < 1e-6);
    }

    #[test]
    fn appearance_empty_mask() {
        let t = scene(4, 4);
        let v = ReconstructedView {
            image: ImageBuffer::filled(4, 4, 3, 0.0),
            valid: vec![false; 16],
            coverage: 0.0,
        };
        assert!(matches!(appearance_loss(&v, &t, 0.85, &SsimConfig::default()), Err(Error::EmptyMask)));
    }

    #[test]
    fn appearance_penalty_is_added() {
        let t = scene(6, 6);
        let p = |m: &[bool]| m.iter().filter(|v| !**v).count() as f64;
        let mut v = full_view(t.clone());
        v.valid[3] = false;
        let l = appearance_loss_with_penalty(&v, &t, 0.85, &SsimConfig::default(), &p).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smoothness_cases() {
        let flat = ImageBuffer::filled(4, 4, 3, 0.5);
        let c = DepthMap::constant(4, 4, 3.0).unwrap();
        assert_eq!(smoothness_loss(&c, &flat).unwrap(), 0.0);
        // ramp d = 2 + 0.5 x on a flat image: each horizontal pair contributes
        // 0.5, no vertical change
        let ramp = DepthMap::new(4, 4, (0..16).map(|i| 2.0 + 0.5 * (i % 4) as f64).collect()).unwrap();
        assert!((smoothness_loss(&ramp, &flat).unwrap() - 0.5).abs() < 1e-15);
        let edge = ImageBuffer::from_fn(4, 4, 3, |x, _, _| if x < 2 { 0.0 } else { 1.0 });
        let l = smoothness_loss(&ramp, &edge).unwrap();
        let expect = (0.5 + 0.5 * (-1.0f64).exp() + 0.5) / 3.0;
        assert!((l - expect).abs() < 1e-15);
        assert!(l < 0.5);
    }

    #[test]
    fn haze_and_transmission_norms() {
        let a = scene(6, 5);
        assert_eq!(haze_reconstruction_loss(&a, &a).unwrap(), 0.0);
        let b = a.map(|v| v + 0.1);
        assert!((haze_reconstruction_loss(&a, &b).unwrap() - 0.1).abs() < 1e-12);
        let t1 = TransmissionMap::new(3, 2, vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8]).unwrap();
        let t2 = TransmissionMap::new(3, 2, vec![0.35, 0.45, 0.55, 0.65, 0.75, 0.85]).unwrap();
        assert!((aux_transmission_loss(&t1, &t2).unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(aux_transmission_loss(&t1, &t1).unwrap(), 0.0);
    }

    #[test]
    fn haze_roundtrip_recomposition() {
        let clear = scene(10, 8);
        let t = TransmissionMap::new(10, 8, (0..80).map(|i| 0.2 + 0.01 * i as f64).collect()).unwrap();
        let fog = FogParams::new([0.9, 0.92, 0.95], 0.02).unwrap();
        let hazy = synthesize_haze(&clear, &t, &fog).unwrap();
        let j = dehaze(&hazy, &t, &fog, 0.1).unwrap();
        let again = synthesize_haze(&j, &t, &fog).unwrap();
        assert!(haze_reconstruction_loss(&again, &hazy).unwrap() < 1e-6);
    }

    #[test]
    fn gradient_loss_cases() {
        let t = scene(10, 9);
        assert_eq!(gradient_loss(&t, &t, None).unwrap(), 0.0);
        let biased = t.map(|v| v + 0.07);
        assert!(gradient_loss(&biased, &t, None).unwrap() < 1e-15);
        // 16-bit quantized intensities and bias: every sum is representable
        let q = t.map(|v| (v * 65535.0).round() / 65536.0);
        let qb = q.map(|v| v + 0.0625);
        assert_eq!(gradient_loss(&qb, &q, None).unwrap(), 0.0);
        let g = 1.3;
        let gained = t.map(|v| v * g);
        let flat = ImageBuffer::filled(10, 9, 3, 0.0);
        let mean_mag = gradient_loss(&t, &flat, None).unwrap();
        let l = gradient_loss(&gained, &t, None).unwrap();
        assert!((l - (g - 1.0) * mean_mag).abs() < 1e-12);
    }

    #[test]
    fn gradient_loss_mask() {
        let t = scene(5, 5);
        let r = t.map(|v| v * 2.0);
        let mut m = vec![true; 25];
        for i in [7, 11, 13, 17] {
            m[i] = false;
        }
        // only the center (2,2) would need all of 7, 11, 13, 17; every other
        // interior pixel touches one of them
        assert!(matches!(gradient_loss(&r, &t, Some(&m)), Err(Error::EmptyMask)));
        m[7] = true;
        m[11] = true;
        m[13] = true;
        m[17] = true;
        m[0] = false;
        assert!(gradient_loss(&r, &t, Some(&m)).unwrap() > 0.0);
    }

    #[test]
    fn perceptual_basics() {
        let fx = ReferenceExtractor::new();
        let a = scene(24, 20);
        let b = ImageBuffer::from_fn(24, 20, 3, |x, y, _| ((x * 3 + y) % 7) as f64 / 7.0);
        assert_eq!(perceptual_loss(&a, &a, &fx).unwrap(), 0.0);
        let ab = perceptual_loss(&a, &b, &fx).unwrap();
        assert!(ab > 0.0);
        assert_eq!(ab, perceptual_loss(&b, &a, &fx).unwrap());
    }

    struct Broken;
    impl FeatureExtractor for Broken {
        fn extract(&self, image: &ImageBuffer) -> Result<FeatureMap> {
            Ok(FeatureMap {
                width: image.width(),
                height: image.height() + (image.data()[0] > 0.5) as usize,
                channels: 1,
                data: vec![0.0; image.pixel_count()],
            })
        }
        fn stage(&self) -> (usize, usize) {
            (1, 1)
        }
    }

    #[test]
    fn perceptual_shape_mismatch() {
        let a = ImageBuffer::filled(4, 4, 3, 0.2);
        let b = ImageBuffer::filled(4, 4, 3, 0.8);
        assert!(matches!(perceptual_loss(&a, &b, &Broken), Err(Error::ExtractorShapeMismatch(_))));
    }

    #[test]
    fn cycle_cases() {
        let p = se3_exp(&Twist::new([0.1, -0.2, 0.05], [1.0, 2.0, -0.5]));
        assert!(cycle_pose_loss(&p, &p).unwrap().abs() < 1e-12);
        let d = PoseSE3::from_translation([0.3, -0.4, 1.2]);
        assert!((cycle_pose_loss(&d, &PoseSE3::identity()).unwrap() - 1.3).abs() < 1e-12);
        let theta = 2f64.to_radians();
        let rz = PoseSE3::from_axis_angle([0.0, 0.0, theta], [0.0; 3]);
        let l = cycle_pose_loss(&rz, &PoseSE3::identity()).unwrap();
        assert!((l - theta).abs() < 1e-12);
        assert!((l - 0.034907).abs() < 1e-6);
        assert!((cycle_pose_loss_raw(&rz, &PoseSE3::identity()).unwrap() - theta).abs() < 1e-12);
    }

    #[test]
    fn total_loss_cases() {
        let w = LossWeights::default();
        assert_eq!(total_loss(&LossComponents::default(), &w).unwrap().total, 0.0);
        let ones = LossComponents {
            photometric: 1.0,
            smoothness: 1.0,
            gan: 1.0,
            cycle: 1.0,
            gradient: 1.0,
            perceptual: 1.0,
        };
        let unit = LossWeights {
            alpha: 0.85,
            lambda_p: 1.0,
            lambda_s: 1.0,
            lambda_gan: 1.0,
            lambda_cyc: 1.0,
            lambda_gra: 1.0,
            lambda_per: 1.0,
        };
        assert_eq!(total_loss(&ones, &unit).unwrap().total, 6.0);
        let listed = LossWeights {
            lambda_p: 0.85,
            ..LossWeights::default()
        };
        assert!((total_loss(&ones, &listed).unwrap().total - 1.55).abs() < 1e-12);
        assert!((total_loss(&ones, &w).unwrap().total - 1.7).abs() < 1e-12);
        let bad = LossComponents {
            cycle: f64::NAN,
            ..ones
        };
        assert!(matches!(total_loss(&bad, &w), Err(Error::NonFiniteComponent("cycle"))));
    }

    proptest! {
        #[test]
        fn cycle_is_symmetric(a in prop::array::uniform6(-0.5f64..0.5), b in prop::array::uniform6(-0.5f64..0.5)) {
            let pa = se3_exp(&Twist(a));
            let pb = se3_exp(&Twist(b));
            let l1 = cycle_pose_loss(&pa, &pb).unwrap();
            let l2 = cycle_pose_loss(&pb, &pa).unwrap();
            prop_assert!((l1 - l2).abs() < 1e-12);
        }

        #[test]
        fn total_is_linear_in_each_weight(c in prop::array::uniform6(0.0f64..5.0), k in 0usize..6, s in 0.0f64..3.0) {
            let comps = LossComponents { photometric: c[0], smoothness: c[1], gan: c[2], cycle: c[3], gradient: c[4], perceptual: c[5] };
            let base = LossWeights::default();
            let mut scaled = base;
            let slot = match k {
                0 => &mut scaled.lambda_p,
                1 => &mut scaled.lambda_s,
                2 => &mut scaled.lambda_gan,
                3 => &mut scaled.lambda_cyc,
                4 => &mut scaled.lambda_gra,
                _ => &mut scaled.lambda_per,
            };
            *slot += s;
            let diff = total_loss(&comps, &scaled).unwrap().total - total_loss(&comps, &base).unwrap().total;
            prop_assert!((diff - s * c[k]).abs() < 1e-9);
        }

        #[test]
        fn losses_are_nonnegative(seed in 0u64..1000) {
            let a = ImageBuffer::from_fn(8, 8, 3, |x, y, c| (((x * 31 + y * 17 + c * 7) as u64 ^ seed) % 97) as f64 / 96.0);
            let b = ImageBuffer::from_fn(8, 8, 3, |x, y, c| (((x * 13 + y * 5 + c * 3) as u64 ^ seed) % 89) as f64 / 88.0);
            prop_assert!(appearance_loss(&full_view(a.clone()), &b, 0.85, &SsimConfig::default()).unwrap() >= 0.0);
            prop_assert!(gradient_loss(&a, &b, None).unwrap() >= 0.0);
            prop_assert!(haze_reconstruction_loss(&a, &b).unwrap() >= 0.0);
        }
    }
}
