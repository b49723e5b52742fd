//! Chain pairwise solves along a short rendered trajectory and report the
//! trajectory error against ground truth, whole and in five-frame snippets.
//!
//!     cargo run --release --example trajectory_eval

use hazevo::eval::{ate, ate_windowed, Alignment};
use hazevo::image::DepthMap;
use hazevo::scene::{render_scene_pair, PlaneSpec, PoseSpec, SceneSpec, TextureSpec};
use hazevo::se3::{compose, inverse, PoseSE3};
use hazevo::solver::{Solver, SolveConfig};

fn main() -> hazevo::error::Result<()> {
    let solver = Solver::new(SolveConfig::default())?;
    let step = PoseSpec {
        rotation: [0.0, 0.004, 0.0],
        translation: [0.25, 0.0, 0.1],
    };
    let mut spec = SceneSpec::random(21, 96, 96, false);
    spec.planes = vec![PlaneSpec {
        depth: 10.0,
        texture: TextureSpec { seed: 21, ..TextureSpec::default() },
        region: None,
    }];

    // camera-to-world poses; each frame sees the wall moved by one step
    let (mut gt, mut est) = (vec![PoseSE3::identity()], vec![PoseSE3::identity()]);
    for frame in 1..8 {
        spec.relative_pose = step.clone();
        spec.planes[0].texture.seed = 21 + frame;
        let pair = render_scene_pair(&spec)?;
        let depth: &DepthMap = &pair.depth1;
        let r = solver.solve_pose(&pair.image2, &pair.image1, depth, &pair.intrinsics)?;
        gt.push(compose(gt.last().unwrap(), &inverse(&pair.pose_gt)));
        est.push(compose(est.last().unwrap(), &inverse(&r.pose)));
    }
    for align in [Alignment::None, Alignment::Rigid, Alignment::Similarity] {
        let whole = ate(&est, &gt, align)?;
        let snippets = ate_windowed(&est, &gt, align, 5)?;
        println!(
            "{align:?}: whole trajectory {:.2e} ± {:.2e} m, 5-frame snippets {:.2e} ± {:.2e} m",
            whole.mean, whole.std, snippets.mean, snippets.std
        );
    }
    Ok(())
}
