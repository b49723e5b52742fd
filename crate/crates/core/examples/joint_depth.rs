//! Estimate pose and a coarse depth grid together, then score the depth
//! against ground truth after median scaling.
//!
//!     cargo run --release --example joint_depth

use hazevo::eval::{depth_metrics, pose_pair_error, DepthMetrics, DEFAULT_CAP};
use hazevo::scene::{render_scene_pair, SceneSpec};
use hazevo::solver::{solve_joint, SolveConfig};

fn main() -> hazevo::error::Result<()> {
    let pair = render_scene_pair(&SceneSpec::random(11, 96, 96, true))?;
    let r = solve_joint(&pair.image2, &pair.image1, &pair.intrinsics, &SolveConfig::default())?;
    let e = pose_pair_error(&r.pose, &pair.pose_gt);
    println!("rotation error {:.3} deg, translation direction error {:.2} deg", e.rot_error, e.trans_angle_error.unwrap_or(f64::NAN));
    let m = depth_metrics(&r.depth, &pair.depth1, DEFAULT_CAP, true)?;
    println!("{}", DepthMetrics::HEADER);
    println!("{}", m.row());
    Ok(())
}
