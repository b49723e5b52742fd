//! Least-squares adversarial losses over a pluggable discriminator.
//! Targets are 1 for real and 0 for synthesized images.

use crate::error::Result;
use crate::filter::box_mean;
use crate::image::ImageBuffer;

/// A deterministic, thread-safe image scorer.
pub trait Discriminator: Send + Sync {
    fn score(&self, image: &ImageBuffer) -> Result<f64>;
}

impl<F> Discriminator for F
where
    F: Fn(&ImageBuffer) -> f64 + Send + Sync,
{
    fn score(&self, image: &ImageBuffer) -> Result<f64> {
        Ok(self(image))
    }
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    v.sum::<f64>() / n as f64
}

/// `mean (real - 1)^2 + mean fake^2`.
pub fn lsgan_discriminator_loss(real: &[f64], fake: &[f64]) -> f64 {
    mean(real.iter().map(|r| (r - 1.0) * (r - 1.0))) + mean(fake.iter().map(|f| f * f))
}

/// `mean (fake - 1)^2`.
pub fn lsgan_generator_loss(fake: &[f64]) -> f64 {
    mean(fake.iter().map(|f| (f - 1.0) * (f - 1.0)))
}

/// Discriminator scores of one half-cycle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfCycleScores {
    pub real: f64,
    pub fake: f64,
}

/// Adversarial losses of one half-cycle and their sum over both.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GanBreakdown {
    pub generator_forward: f64,
    pub discriminator_forward: f64,
    pub generator_backward: f64,
    pub discriminator_backward: f64,
    pub total: f64,
}

/// Generator plus discriminator loss over the forward and backward half-cycles.
pub fn total_gan_loss(forward: HalfCycleScores, backward: HalfCycleScores) -> GanBreakdown {
    let gf = lsgan_generator_loss(&[forward.fake]);
    let df = lsgan_discriminator_loss(&[forward.real], &[forward.fake]);
    let gb = lsgan_generator_loss(&[backward.fake]);
    let db = lsgan_discriminator_loss(&[backward.real], &[backward.fake]);
    GanBreakdown {
        generator_forward: gf,
        discriminator_forward: df,
        generator_backward: gb,
        discriminator_backward: db,
        total: gf + df + gb + db,
    }
}

/// Untrained sharpness statistic: `1 - min(1, 2 * G(x, blur(x)))` where `G`
/// is the gradient loss and `blur` a 3x3 box filter. Sharp images score
/// lower. Only useful as a live callee for the adversarial formulas.
#[derive(Clone, Copy, Debug, Default)]
pub struct SharpnessDiscriminator;

impl Discriminator for SharpnessDiscriminator {
    fn score(&self, image: &ImageBuffer) -> Result<f64> {
        let (w, h, ch) = (image.width(), image.height(), image.channels());
        let mut blurred = vec![0.0; w * h * ch];
        for c in 0..ch {
            let b = box_mean(&image.channel(c).into_data(), w, h, 1);
            for (i, v) in b.into_iter().enumerate() {
                blurred[i * ch + c] = v;
            }
        }
        let blurred = ImageBuffer::new(w, h, ch, blurred)?;
        let g = super::gradient_loss(image, &blurred, None)?;
        Ok(1.0 - (2.0 * g).min(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discriminator_arithmetic() {
        assert_eq!(lsgan_discriminator_loss(&[1.0], &[0.0]), 0.0);
        assert_eq!(lsgan_discriminator_loss(&[0.5], &[0.5]), 0.5);
        assert_eq!(lsgan_discriminator_loss(&[0.0], &[1.0]), 2.0);
        assert_eq!(lsgan_discriminator_loss(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
    }

    #[test]
    fn generator_arithmetic() {
        assert_eq!(lsgan_generator_loss(&[1.0]), 0.0);
        assert_eq!(lsgan_generator_loss(&[0.0]), 1.0);
        assert_eq!(lsgan_generator_loss(&[0.5]), 0.25);
    }

    #[test]
    fn total_arithmetic() {
        let s = |real, fake| HalfCycleScores { real, fake };
        let fooled = total_gan_loss(s(1.0, 1.0), s(1.0, 1.0));
        assert_eq!((fooled.discriminator_forward, fooled.generator_forward, fooled.total), (1.0, 0.0, 2.0));
        let perfect = total_gan_loss(s(1.0, 0.0), s(1.0, 0.0));
        assert_eq!((perfect.discriminator_backward, perfect.generator_backward, perfect.total), (0.0, 1.0, 2.0));
        let a = total_gan_loss(s(0.3, 0.8), s(0.3, 0.8));
        let single = lsgan_generator_loss(&[0.8]) + lsgan_discriminator_loss(&[0.3], &[0.8]);
        assert_eq!(a.total, 2.0 * single);
    }

    #[test]
    fn constant_discriminator() {
        let d = |_: &ImageBuffer| 0.5;
        let img = ImageBuffer::filled(4, 4, 3, 0.3);
        let (r, f) = (d.score(&img).unwrap(), d.score(&img).unwrap());
        let b = total_gan_loss(HalfCycleScores { real: r, fake: f }, HalfCycleScores { real: r, fake: f });
        // two discriminator terms of 0.25 + 0.25, two generator terms of 0.25
        assert_eq!(b.total, 1.5);
    }

    #[test]
    fn sharpness_discriminator_prefers_smooth_images() {
        let flat = ImageBuffer::filled(12, 12, 3, 0.5);
        let checker = ImageBuffer::from_fn(12, 12, 3, |x, y, _| ((x / 2 + y / 2) % 2) as f64 * 0.3 + 0.35);
        let d = SharpnessDiscriminator;
        assert_eq!(d.score(&flat).unwrap(), 1.0);
        assert!(d.score(&checker).unwrap() < 1.0);
    }
}
