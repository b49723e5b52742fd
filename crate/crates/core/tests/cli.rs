//! End-to-end runs of the `hazevo` binary.

use std::path::Path;
use std::process::{Command, Output};

use hazevo::image::{DepthMap, ImageBuffer};
use hazevo::io;
use hazevo::se3::PoseSE3;

fn hazevo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hazevo")).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(dir: &Path) {
    let img = ImageBuffer::from_fn(40, 30, 3, |x, y, c| ((x * 7 + y * 3 + c * 11) % 17) as f64 / 16.0);
    io::write_image(&img, dir.join("clear.png")).unwrap();
    let depth = DepthMap::new(40, 30, (0..1200).map(|i| 4.0 + (i % 40) as f64 * 0.1).collect()).unwrap();
    io::write_depth_pfm(&depth, dir.join("depth.pfm")).unwrap();
}

#[test]
fn synth_fog_with_zero_beta_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let o = hazevo(dir.path(), &["synth-fog", "clear.png", "depth.pfm", "--beta", "0", "--airlight", "0.9", "--out", "fog.png"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = io::read_image(dir.path().join("clear.png")).unwrap();
    let b = io::read_image(dir.path().join("fog.png")).unwrap();
    assert_eq!(a, b);
    let t = io::read_transmission_pfm(dir.path().join("fog.t.pfm")).unwrap();
    assert!(t.data().iter().all(|&v| v == 1.0));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("fog.fog.json")).unwrap()).unwrap();
    assert_eq!(meta["beta"], 0.0);
}

#[test]
fn fog_then_dehaze_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let d = dir.path();
    assert!(hazevo(d, &["synth-fog", "clear.png", "depth.pfm", "--beta", "0.05", "--airlight", "0.9 0.9 0.95", "--out", "fog.png"]).status.success());
    let o = hazevo(d, &["dehaze", "fog.png", "fog.t.pfm", "--airlight", "0.9,0.9,0.95", "--out", "back.png"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = io::read_image(d.join("clear.png")).unwrap();
    let b = io::read_image(d.join("back.png")).unwrap();
    let worst = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst <= 1.0 / 255.0 + 1e-9, "{worst}");
    let o = hazevo(d, &["estimate-t", "fog.png", "--out", "t.pfm"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("airlight "));
}

#[test]
fn eval_depth_perfect_row() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let o = hazevo(dir.path(), &["eval-depth", "depth.pfm", "depth.pfm", "--cap", "50", "--median-scale"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines, ["abs_rel sq_rel rmse rmse_log delta1 delta2 delta3", "0.000 0.000 0.000 0.000 1.000 1.000 1.000"]);
}

#[test]
fn eval_ate_formats_mean_and_std() {
    let dir = tempfile::tempdir().unwrap();
    let poses: Vec<PoseSE3> = (0..8).map(|i| PoseSE3::from_axis_angle([0.0, 0.01 * i as f64, 0.0], [i as f64, 0.0, 0.1 * i as f64])).collect();
    io::write_kitti_poses(&poses, dir.path().join("gt.txt")).unwrap();
    for align in ["none", "rigid", "similarity"] {
        let o = hazevo(dir.path(), &["eval-ate", "gt.txt", "gt.txt", "--align", align]);
        assert_eq!(stdout(&o).trim(), "0.000 ± 0.000");
    }
    let o = hazevo(dir.path(), &["eval-ate", "gt.txt", "gt.txt", "--window", "5"]);
    assert_eq!(stdout(&o).trim(), "0.000 ± 0.000");
}

#[test]
fn warp_reports_coverage() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let o = hazevo(dir.path(), &["warp", "clear.png", "depth.pfm", "--pose", "0 0 0 0 0 0", "--out", "w.png"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "coverage 1.000000");
    let o = hazevo(dir.path(), &["warp", "clear.png", "depth.pfm", "--pose", "-0.5 0 0 0 0.01 0", "--out", "w.png", "--intrinsics", "32 32 20 15"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    std::fs::write(dir.path().join("bad.toml"), "[solver]\nmax_iter = 3\n").unwrap();
    let o = hazevo(dir.path(), &["solve", "clear.png", "clear.png", "--depth", "depth.pfm", "--config", "bad.toml", "--out", "r.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: InvalidConfig: "), "{}", stderr(&o));
    let o = hazevo(dir.path(), &["warp", "clear.png", "depth.pfm", "--pose", "1 2 3", "--out", "w.png"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hazevo(dir.path(), &["synth-fog", "clear.png", "depth.pfm", "--beta", "-1", "--out", "f.png"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: InvalidFog: "), "{}", stderr(&o));
    let o = hazevo(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    // every depth pixel masked: nothing can be reconstructed
    io::write_depth_pfm(&DepthMap::with_mask(40, 30, vec![5.0; 1200], vec![false; 1200]).unwrap(), dir.path().join("none.pfm")).unwrap();
    let o = hazevo(dir.path(), &["solve", "clear.png", "clear.png", "--depth", "none.pfm", "--out", "r.json"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let first = stderr(&o);
    assert!(first.starts_with("error: ") && first.lines().count() == 1, "{first}");
}

#[test]
fn gen_scene_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("scene.toml"),
        "width = 48\nheight = 40\n[[planes]]\ndepth = 9.0\n[planes.texture]\nseed = 2\n[relative_pose]\nrotation = [0.0, 0.005, 0.0]\ntranslation = [0.4, 0.0, 0.1]\n[fog]\nairlight = [0.9, 0.9, 0.9]\nbeta = 0.05\n",
    )
    .unwrap();
    let o = hazevo(d, &["gen-scene", "--spec", "scene.toml", "--out", "bundle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["image1.png", "image2.png", "depth1.pfm", "depth2.pfm", "pose_gt.txt", "intrinsics.txt", "scene.json", "foggy1.png", "foggy2.png", "t1.pfm", "t2.pfm"] {
        assert!(d.join("bundle").join(f).exists(), "{f}");
    }
    let b = d.join("bundle");
    let o = hazevo(&b, &["--threads", "1", "solve", "image1.png", "image2.png", "--depth", "depth1.pfm", "--gt-pose", "pose_gt.txt", "--out", "r.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rec = hazevo::record::ResultRecord::read(b.join("r.json")).unwrap();
    let err = rec.pairs[0].pose_error.unwrap();
    assert!(err.rot_error < 0.2, "{err:?}");
    assert!(rec.timings.is_none());
    let o = hazevo(&b, &["solve", "image1.png", "image2.png", "--depth", "depth1.pfm", "--out", "t.json", "--timings"]);
    assert!(o.status.success());
    assert!(hazevo::record::ResultRecord::read(b.join("t.json")).unwrap().timings.is_some());

    std::fs::write(d.join("bad.toml"), "width = 0\nheight = 4\n").unwrap();
    let o = hazevo(d, &["gen-scene", "--spec", "bad.toml", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: InvalidSpec: "), "{}", stderr(&o));
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = hazevo(dir.path(), &["gradcheck"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 4);
}
