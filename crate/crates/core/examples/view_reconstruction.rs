//! Warp the second view of a rendered pair back onto the first with the
//! ground-truth pose and depth, and show the scale freedom of the warp.
//!
//!     cargo run --example view_reconstruction

use hazevo::scene::{render_scene_pair, SceneSpec};
use hazevo::se3::PoseSE3;
use hazevo::warp::{reconstruct_view, warp_field};

fn main() -> hazevo::error::Result<()> {
    let pair = render_scene_pair(&SceneSpec::random(3, 96, 96, true))?;
    let k = pair.intrinsics;
    let view = reconstruct_view(&pair.image2, &pair.depth1, &pair.pose_gt, &k)?;

    let (mut sum, mut n) = (0.0, 0usize);
    for y in 0..96 {
        for x in 0..96 {
            let i = y * 96 + x;
            if view.valid[i] && pair.covisible[i] {
                sum += (view.image.get(x, y, 0) - pair.image1.get(x, y, 0)).abs();
                n += 1;
            }
        }
    }
    println!("coverage {:.3}, co-visible mean abs error {:.5}", view.coverage, sum / n as f64);

    let identity = reconstruct_view(&pair.image1, &pair.depth1, &PoseSE3::identity(), &k)?;
    let id_err = identity.image.data().iter().zip(pair.image1.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("identity pose max error {id_err:.2e}");

    // depth and translation scaled together leave the field unchanged
    let s = 3.5;
    let t = pair.pose_gt.translation() * s;
    let scaled_pose = PoseSE3::new(*pair.pose_gt.rotation(), t)?;
    let a = warp_field(&pair.depth1, &pair.pose_gt, &k, &k)?;
    let b = warp_field(&pair.depth1.scaled(s)?, &scaled_pose, &k, &k)?;
    let drift = a.coords().iter().zip(b.coords()).map(|(p, q)| (p.0 - q.0).abs().max((p.1 - q.1).abs())).fold(0.0, f64::max);
    println!("scale {s}: max coordinate change {drift:.2e}");
    Ok(())
}
