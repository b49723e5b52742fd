use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::box_mean;
use crate::image::ImageBuffer;

/// Local SSIM statistics window and stabilizers for unit-range intensities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimConfig {
    pub window_radius: usize,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window_radius: 1,
            c1: 1e-4,
            c2: 9e-4,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c1 > 0.0 && self.c2 > 0.0 && self.c1.is_finite() && self.c2.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("ssim constants c1={} c2={}", self.c1, self.c2)))
        }
    }
}

/// Per-pixel SSIM with box-filter statistics, averaged over channels.
/// Returns a one-channel map with values in `[-1, 1]`.
pub fn ssim_map(a: &ImageBuffer, b: &ImageBuffer, cfg: &SsimConfig) -> Result<ImageBuffer> {
    a.check_same_shape(b, "ssim inputs")?;
    cfg.validate()?;
    let (w, h, ch) = (a.width(), a.height(), a.channels());
    let r = cfg.window_radius;
    let mut out = vec![0.0; w * h];
    for c in 0..ch {
        let pa = a.channel(c).into_data();
        let pb = b.channel(c).into_data();
        let mu_a = box_mean(&pa, w, h, r);
        let mu_b = box_mean(&pb, w, h, r);
        let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let e_aa = box_mean(&aa, w, h, r);
        let e_bb = box_mean(&bb, w, h, r);
        let e_ab = box_mean(&ab, w, h, r);
        for i in 0..w * h {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + cfg.c1) * (2.0 * cov + cfg.c2);
            let den = (ma * ma + mb * mb + cfg.c1) * (va + vb + cfg.c2);
            out[i] += (num / den).clamp(-1.0, 1.0);
        }
    }
    for v in &mut out {
        *v /= ch as f64;
    }
    ImageBuffer::new(w, h, 1, out)
}
