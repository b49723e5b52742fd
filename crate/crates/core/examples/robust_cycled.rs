//! Solve a pair whose second frame has a changed illumination, with the
//! plain objective, with the illumination-robust terms, and with the
//! forward-backward cycle.
//!
//!     cargo run --release --example robust_cycled

use hazevo::eval::pose_pair_error;
use hazevo::scene::{apply_illumination, render_scene_pair, IlluminationSpec, LocalField, SceneSpec};
use hazevo::solver::{Solver, SolveConfig};

fn main() -> hazevo::error::Result<()> {
    let pair = render_scene_pair(&SceneSpec::random(1, 96, 96, true))?;
    let light = IlluminationSpec {
        global_gain: 1.2,
        global_bias: 0.05,
        local_field: Some(LocalField {
            seed: 1,
            scale: 32.0,
            amplitude: 0.2,
        }),
    };
    let image2 = apply_illumination(&pair.image2, &light)?;

    for (name, robust, cycle) in [("plain", false, false), ("robust", true, false), ("cycled", false, true)] {
        let cfg = SolveConfig {
            enable_robust: robust,
            enable_cycle: cycle,
            ..SolveConfig::default()
        };
        let solver = Solver::new(cfg)?;
        let r = if cycle {
            solver.solve_cycled(&pair.image1, &image2, &pair.depth1, Some(&pair.depth2), &pair.intrinsics)?
        } else {
            solver.solve_pose(&image2, &pair.image1, &pair.depth1, &pair.intrinsics)?
        };
        let e = pose_pair_error(&r.pose, &pair.pose_gt);
        let cyc = r.cycle_loss.map_or(String::new(), |c| format!(", cycle disagreement {c:.2e}"));
        println!("{name:<7} rotation error {:.4} deg, translation error {:.4}{cyc}", e.rot_error, e.trans_error);
    }
    Ok(())
}
