//! Evaluate every term of the training objective at the true pose and at a
//! perturbed one, plus the adversarial and cycle terms on their own.
//!
//!     cargo run --example loss_terms

use hazevo::loss::gan::{lsgan_discriminator_loss, lsgan_generator_loss};
use hazevo::loss::{cycle_pose_loss, ReferenceExtractor};
use hazevo::scene::{render_scene_pair, SceneSpec};
use hazevo::se3::{compose, PoseSE3};
use hazevo::solver::{Objective, SolveConfig};

fn main() -> hazevo::error::Result<()> {
    let pair = render_scene_pair(&SceneSpec::random(5, 96, 96, false))?;
    let cfg = SolveConfig {
        enable_robust: true,
        ..SolveConfig::default()
    };
    let fx = ReferenceExtractor::new();
    let obj = Objective::new(&pair.image2, None, &pair.image1, pair.intrinsics, &cfg, &fx, None)?;

    let nudge = PoseSE3::from_axis_angle([0.0, 0.01, 0.0], [0.05, 0.0, 0.0]);
    for (name, pose) in [("true pose", pair.pose_gt), ("perturbed", compose(&nudge, &pair.pose_gt))] {
        let e = obj.evaluate(&pose, &pair.depth1)?;
        let c = e.components;
        println!(
            "{name:<10} total {:.5}  photometric {:.5}  smoothness {:.5}  gradient {:.5}  perceptual {:.5}",
            e.total(),
            c.photometric,
            c.smoothness,
            c.gradient,
            c.perceptual
        );
    }

    println!("LSGAN discriminator, real = fake = 0.5: {}", lsgan_discriminator_loss(&[0.5], &[0.5]));
    println!("LSGAN generator, fake = 0.5: {}", lsgan_generator_loss(&[0.5]));
    let turn = PoseSE3::from_axis_angle([0.0, 0.0, 2f64.to_radians()], [0.0; 3]);
    println!("cycle loss of a 2 degree disagreement: {:.6}", cycle_pose_loss(&turn, &PoseSE3::identity())?);
    Ok(())
}
