//! Write a foggy synthetic pair bundle to disk, as `hazevo gen-scene` does.
//!
//!     cargo run --example scene_bundle -- /tmp/scene

use hazevo::cli::write_scene_bundle;
use hazevo::fog::FogParams;
use hazevo::scene::SceneSpec;

fn main() -> hazevo::error::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "scene_bundle".into());
    let mut spec = SceneSpec::random(4, 128, 96, true);
    spec.fog = Some(FogParams::gray(0.9, 0.05)?);
    write_scene_bundle(&spec, out.as_ref())?;
    let mut names: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    println!("{out}: {}", names.join(" "));
    Ok(())
}
