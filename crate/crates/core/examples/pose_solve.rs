//! Recover the relative pose of rendered pairs with known depth.
//!
//!     cargo run --release --example pose_solve

use hazevo::eval::pose_pair_error;
use hazevo::scene::{render_scene_pair, SceneSpec};
use hazevo::solver::{Solver, SolveConfig};

fn main() -> hazevo::error::Result<()> {
    let solver = Solver::new(SolveConfig::default())?;
    for seed in 0..4 {
        let pair = render_scene_pair(&SceneSpec::random(seed, 96, 96, seed % 2 == 1))?;
        // the solver pose maps target coordinates into the source view
        let r = solver.solve_pose(&pair.image2, &pair.image1, &pair.depth1, &pair.intrinsics)?;
        let e = pose_pair_error(&r.pose, &pair.pose_gt);
        println!(
            "seed {seed}: rotation error {:.4} deg, translation direction error {:.3} deg, {} iterations, loss {:.5}",
            e.rot_error,
            e.trans_angle_error.unwrap_or(f64::NAN),
            r.iterations,
            r.final_loss.total()
        );
    }
    Ok(())
}
