//! Fog a synthetic scene, estimate airlight and transmission with the dark
//! channel prior, then invert the haze with both the true and the estimated
//! transmission.
//!
//!     cargo run --example fog_model

use hazevo::fog::{dehaze, estimate_background_light, estimate_transmission_dcp, DcpConfig, FogParams};
use hazevo::image::ImageBuffer;
use hazevo::scene::{make_foggy_pair, SceneSpec};

fn mean_abs(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.data().len() as f64
}

fn main() -> hazevo::error::Result<()> {
    let mut spec = SceneSpec::random(7, 128, 96, true);
    spec.fog = Some(FogParams::new([0.85, 0.88, 0.9], 0.06)?);
    let pair = make_foggy_pair(&spec)?;
    let fog = spec.fog.unwrap();

    let cfg = DcpConfig::default();
    let a = estimate_background_light(&pair.foggy1, &cfg)?;
    let t_est = estimate_transmission_dcp(&pair.foggy1, a, &cfg)?;
    let t_err = t_est.data().iter().zip(pair.t1.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / t_est.data().len() as f64;
    println!("true airlight      {:?}", fog.airlight);
    println!("estimated airlight [{:.3}, {:.3}, {:.3}]", a[0], a[1], a[2]);
    println!("transmission mean abs error {t_err:.4}");

    let exact = dehaze(&pair.foggy1, &pair.t1, &fog, cfg.t_floor)?;
    let blind = dehaze(&pair.foggy1, &t_est, &FogParams::new(a, 0.0)?, cfg.t_floor)?;
    println!("foggy vs clear       {:.4}", mean_abs(&pair.foggy1, &pair.clear.image1));
    println!("dehazed (true t)     {:.2e}", mean_abs(&exact, &pair.clear.image1));
    println!("dehazed (estimated)  {:.4}", mean_abs(&blind, &pair.clear.image1));
    Ok(())
}
