//! Homogeneous-fog image formation `I = J t + A (1 - t)`, `t = exp(-beta d)`,
//! its inversion, and dark-channel-prior estimates of `A` and `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter;
use crate::image::{DepthMap, ImageBuffer, TransmissionMap};

/// Default attenuation coefficient in 1/m.
pub const DEFAULT_BETA: f64 = 0.02;

/// Transmission assigned to masked (unknown, treated as infinitely far) depth.
const FAR_TRANSMISSION: f64 = 1e-12;

/// Background light and attenuation of a homogeneous fog.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FogParams {
    /// Per-channel airlight `A` in `(0, 1]`.
    pub airlight: [f64; 3],
    /// Attenuation coefficient `beta` in 1/m.
    pub beta: f64,
}

impl FogParams {
    pub fn new(airlight: [f64; 3], beta: f64) -> Result<Self> {
        let p = Self { airlight, beta };
        p.validate()?;
        Ok(p)
    }

    /// Achromatic airlight broadcast to every channel.
    pub fn gray(airlight: f64, beta: f64) -> Result<Self> {
        Self::new([airlight; 3], beta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.airlight.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::InvalidFog(format!(
                "airlight {:?} outside (0, 1]",
                self.airlight
            )));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidFog(format!("beta {} must be finite and >= 0", self.beta)));
        }
        Ok(())
    }

    /// Airlight for channel `c` of an image with `channels` channels; a
    /// single-channel image sees the channel mean.
    pub fn airlight_for(&self, channels: usize, c: usize) -> f64 {
        if channels == 1 {
            self.airlight.iter().sum::<f64>() / 3.0
        } else {
            self.airlight[c]
        }
    }
}

impl Default for FogParams {
    fn default() -> Self {
        Self {
            airlight: [1.0; 3],
            beta: DEFAULT_BETA,
        }
    }
}

/// Dark-channel-prior settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcpConfig {
    pub patch_radius: usize,
    /// Haze retention factor `omega`.
    pub omega: f64,
    /// Fraction of brightest dark-channel pixels considered for `A`.
    pub airlight_fraction: f64,
    pub t_floor: f64,
}

impl Default for DcpConfig {
    fn default() -> Self {
        Self {
            patch_radius: 7,
            omega: 0.95,
            airlight_fraction: 0.001,
            t_floor: 0.1,
        }
    }
}

impl DcpConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.omega > 0.0
            && self.omega <= 1.0
            && self.airlight_fraction > 0.0
            && self.airlight_fraction <= 1.0
            && self.t_floor > 0.0
            && self.t_floor < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("dark channel settings {self:?}")))
        }
    }
}

/// `t = exp(-beta d)` per pixel, unclamped. Masked depth pixels are treated
/// as infinitely far.
pub fn transmission_from_depth(depth: &DepthMap, beta: f64) -> Result<TransmissionMap> {
    transmission_impl(depth, beta, None)
}

/// As [`transmission_from_depth`], clamped below at `cfg.t_floor`.
pub fn transmission_from_depth_clamped(
    depth: &DepthMap,
    beta: f64,
    cfg: &DcpConfig,
) -> Result<TransmissionMap> {
    cfg.validate()?;
    transmission_impl(depth, beta, Some(cfg.t_floor))
}

fn transmission_impl(depth: &DepthMap, beta: f64, floor: Option<f64>) -> Result<TransmissionMap> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidFog(format!("beta {beta}")));
    }
    let lo = floor.unwrap_or(FAR_TRANSMISSION);
    let data = depth
        .data()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let t = if depth.is_valid_index(i) { (-beta * d).exp() } else { 0.0 };
            t.max(lo)
        })
        .collect();
    TransmissionMap::new(depth.width(), depth.height(), data)
}

fn check_t(image: &ImageBuffer, t: &TransmissionMap) -> Result<()> {
    image.check_size(t.width(), t.height(), "transmission vs image")
}

/// `I = J t + A (1 - t)`, clamped to `[0, 1]`.
pub fn synthesize_haze(clear: &ImageBuffer, t: &TransmissionMap, fog: &FogParams) -> Result<ImageBuffer> {
    check_t(clear, t)?;
    fog.validate()?;
    let ch = clear.channels();
    Ok(ImageBuffer::from_fn(clear.width(), clear.height(), ch, |x, y, c| {
        let tv = t.get(x, y);
        let a = fog.airlight_for(ch, c);
        (clear.get(x, y, c) * tv + a * (1.0 - tv)).clamp(0.0, 1.0)
    }))
}

/// `J = (I - A) / max(t, t_floor) + A`, clamped to `[0, 1]`.
pub fn dehaze(
    hazy: &ImageBuffer,
    t: &TransmissionMap,
    fog: &FogParams,
    t_floor: f64,
) -> Result<ImageBuffer> {
    check_t(hazy, t)?;
    fog.validate()?;
    let ch = hazy.channels();
    Ok(ImageBuffer::from_fn(hazy.width(), hazy.height(), ch, |x, y, c| {
        let a = fog.airlight_for(ch, c);
        ((hazy.get(x, y, c) - a) / t.get(x, y).max(t_floor) + a).clamp(0.0, 1.0)
    }))
}

/// Per-pixel channel minimum followed by a `(2r+1)^2` minimum filter.
pub fn dark_channel(image: &ImageBuffer, patch_radius: usize) -> Result<ImageBuffer> {
    if image.channels() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "dark channel needs 3 channels, got {}",
            image.channels()
        )));
    }
    let (w, h) = (image.width(), image.height());
    let mins: Vec<f64> = image
        .data()
        .chunks_exact(3)
        .map(|px| px[0].min(px[1]).min(px[2]))
        .collect();
    let dark = filter::min_filter(&mins, w, h, patch_radius);
    ImageBuffer::new(w, h, 1, dark)
}

/// Airlight from the brightest `airlight_fraction` of dark-channel pixels:
/// among them the pixel with the largest channel sum wins. Ties go to the
/// earlier row-major index.
pub fn estimate_background_light(hazy: &ImageBuffer, cfg: &DcpConfig) -> Result<[f64; 3]> {
    cfg.validate()?;
    let dark = dark_channel(hazy, cfg.patch_radius)?;
    let n = dark.pixel_count();
    let count = ((n as f64 * cfg.airlight_fraction).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    let d = dark.data();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
    let px = |i: usize| {
        let s = &hazy.data()[i * 3..i * 3 + 3];
        [s[0], s[1], s[2]]
    };
    let mut best = order[0];
    let mut best_sum = px(best).iter().sum::<f64>();
    for &i in &order[1..count] {
        let s = px(i).iter().sum::<f64>();
        if s > best_sum || (s == best_sum && i < best) {
            best = i;
            best_sum = s;
        }
    }
    Ok(px(best))
}

/// `t = 1 - omega * dark_channel(I / A)`, clamped to `[t_floor, 1]`.
pub fn estimate_transmission_dcp(
    hazy: &ImageBuffer,
    airlight: [f64; 3],
    cfg: &DcpConfig,
) -> Result<TransmissionMap> {
    cfg.validate()?;
    if airlight.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidAirlight(airlight));
    }
    if hazy.channels() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "transmission estimate needs 3 channels, got {}",
            hazy.channels()
        )));
    }
    let normalized = ImageBuffer::from_fn(hazy.width(), hazy.height(), 3, |x, y, c| {
        hazy.get(x, y, c) / airlight[c]
    });
    let dark = dark_channel(&normalized, cfg.patch_radius)?;
    let data = dark
        .data()
        .iter()
        .map(|&dc| (1.0 - cfg.omega * dc).clamp(cfg.t_floor, 1.0))
        .collect();
    TransmissionMap::new(hazy.width(), hazy.height(), data)
}

/// Edge-preserving guided-filter refinement of a coarse transmission map,
/// guided by the gray version of `guide`. Optional; the estimates above do
/// not call it. Output is clamped to `[t_floor, 1]`.
pub fn refine_transmission(
    t: &TransmissionMap,
    guide: &ImageBuffer,
    radius: usize,
    eps: f64,
    t_floor: f64,
) -> Result<TransmissionMap> {
    guide.check_size(t.width(), t.height(), "guide vs transmission")?;
    let (w, h) = (t.width(), t.height());
    let g = guide.to_gray().into_data();
    let p = t.data();
    let mean_g = filter::box_mean(&g, w, h, radius);
    let mean_p = filter::box_mean(p, w, h, radius);
    let gp: Vec<f64> = g.iter().zip(p).map(|(a, b)| a * b).collect();
    let gg: Vec<f64> = g.iter().map(|a| a * a).collect();
    let mean_gp = filter::box_mean(&gp, w, h, radius);
    let mean_gg = filter::box_mean(&gg, w, h, radius);
    let n = w * h;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        let cov = mean_gp[i] - mean_g[i] * mean_p[i];
        let var = mean_gg[i] - mean_g[i] * mean_g[i];
        a[i] = cov / (var + eps);
        b[i] = mean_p[i] - a[i] * mean_g[i];
    }
    let mean_a = filter::box_mean(&a, w, h, radius);
    let mean_b = filter::box_mean(&b, w, h, radius);
    let data = (0..n)
        .map(|i| (mean_a[i] * g[i] + mean_b[i]).clamp(t_floor, 1.0))
        .collect();
    TransmissionMap::new(w, h, data)
}
