//! Command-line front end. Exit codes: 0 success, 2 invalid input, 3
//! numerical failure. Failures print one line, `error: <CODE>: <message>`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::{ate, ate_windowed, depth_metrics, pose_pair_error, Alignment, DepthMetrics};
use crate::fog::{dehaze, estimate_background_light, estimate_transmission_dcp, synthesize_haze, transmission_from_depth, FogParams};
use crate::image::{CameraIntrinsics, DepthMap, ImageBuffer};
use crate::io;
use crate::loss::{appearance_loss, ReferenceExtractor};
use crate::record::{PairSummary, ResultRecord, SolveMode, Timings};
use crate::scene::{make_foggy_pair, SceneSpec, DEFAULT_FOCAL_FACTOR};
use crate::se3::PoseSE3;
use crate::solver::{analytic::gradcheck, Objective, Solver};
use crate::warp::reconstruct_view;

#[derive(Debug, Parser)]
#[command(name = "hazevo", version, about = "Foggy-weather monocular visual odometry toolkit")]
pub struct Cli {
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 or unset uses every core.
    #[arg(long, global = true, env = "HAZEVO_THREADS")]
    pub threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CameraArgs {
    /// Pinhole intrinsics "fx fy cx cy"; defaults to a centered camera with
    /// focal length 0.8 times the width.
    #[arg(long)]
    pub intrinsics: Option<String>,
}

impl CameraArgs {
    fn resolve(&self, width: usize, height: usize) -> Result<CameraIntrinsics> {
        let k = match &self.intrinsics {
            None => CameraIntrinsics::centered(width, height, DEFAULT_FOCAL_FACTOR),
            Some(text) => {
                let v = parse_numbers(text, 4, "intrinsics")?;
                CameraIntrinsics::new(v[0], v[1], v[2], v[3])?
            }
        };
        k.validate_for(width, height)?;
        Ok(k)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AlignArg {
    None,
    Rigid,
    Similarity,
}

impl From<AlignArg> for Alignment {
    fn from(a: AlignArg) -> Self {
        match a {
            AlignArg::None => Alignment::None,
            AlignArg::Rigid => Alignment::Rigid,
            AlignArg::Similarity => Alignment::Similarity,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fog a clear image from its depth map.
    SynthFog {
        clear: PathBuf,
        depth: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        /// One gray value or "r g b".
        #[arg(long, default_value = "1.0")]
        airlight: String,
        /// Foggy PNG, written at 16 bits.
        #[arg(long)]
        out: PathBuf,
        /// Transmission PFM; defaults to the output path with `.t.pfm`.
        #[arg(long)]
        t_out: Option<PathBuf>,
    },
    /// Estimate background light and transmission by the dark channel prior.
    EstimateT {
        hazy: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Invert the fog model given transmission and airlight.
    Dehaze {
        hazy: PathBuf,
        t: PathBuf,
        /// One gray value or "r g b".
        #[arg(long)]
        airlight: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        t_floor: f64,
    },
    /// Reconstruct the target view from a source image, target depth and pose.
    Warp {
        source: PathBuf,
        depth: PathBuf,
        /// "tx ty tz rx ry rz": translation, then rotation vector in radians.
        #[arg(long, allow_hyphen_values = true)]
        pose: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        camera: CameraArgs,
    },
    /// Estimate the pose from `img1` to `img2` and write a result record.
    Solve {
        img1: PathBuf,
        img2: PathBuf,
        /// Depth of `img1`; without it depth is estimated jointly.
        #[arg(long)]
        depth: Option<PathBuf>,
        /// Depth of `img2`, used by the backward half of a cycled solve.
        #[arg(long)]
        depth2: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cycled: bool,
        #[arg(long)]
        robust: bool,
        /// Ground-truth pose file (first KITTI line) for error reporting.
        #[arg(long)]
        gt_pose: Option<PathBuf>,
        /// Ground-truth depth of `img1` for depth metrics of a joint solve.
        #[arg(long)]
        gt_depth: Option<PathBuf>,
        /// Write the estimated depth as PFM.
        #[arg(long)]
        depth_out: Option<PathBuf>,
        /// Include wall-clock timings (breaks byte-identical reruns).
        #[arg(long)]
        timings: bool,
        #[command(flatten)]
        camera: CameraArgs,
    },
    /// Depth error and accuracy metrics.
    EvalDepth {
        pred: PathBuf,
        gt: PathBuf,
        #[arg(long, default_value_t = crate::eval::DEFAULT_CAP)]
        cap: f64,
        #[arg(long)]
        median_scale: bool,
    },
    /// Absolute trajectory error between KITTI pose files.
    EvalAte {
        est: PathBuf,
        gt: PathBuf,
        #[arg(long, value_enum, default_value = "similarity")]
        align: AlignArg,
        /// Evaluate snippets of this many frames.
        #[arg(long)]
        window: Option<usize>,
    },
    /// Render a synthetic scene bundle.
    GenScene {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare closed-form gradients with central differences.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Time warp, loss and solve at standard sizes.
    Bench {
        /// Image sides to time.
        #[arg(long, value_delimiter = ',', default_value = "64,96,128")]
        sizes: Vec<usize>,
    },
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_env("HAZEVO_LOG").try_init();
    if let Some(n) = cli.threads.filter(|n| *n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {e}", e.code());
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<Config> {
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = seed {
        cfg.solver.seed = s;
    }
    Ok(cfg)
}

fn parse_numbers(text: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidConfig(format!("{what} `{text}`: {e}")))?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(format!("{what} `{text}`: expected {n} finite numbers")));
    }
    Ok(v)
}

fn parse_airlight(text: &str) -> Result<[f64; 3]> {
    match parse_numbers(text, 1, "airlight") {
        Ok(v) => Ok([v[0]; 3]),
        Err(_) => {
            let v = parse_numbers(text, 3, "airlight")?;
            Ok([v[0], v[1], v[2]])
        }
    }
}

/// "tx ty tz rx ry rz".
pub fn parse_pose(text: &str) -> Result<PoseSE3> {
    let v = parse_numbers(text, 6, "pose")?;
    Ok(PoseSE3::from_axis_angle([v[3], v[4], v[5]], [v[0], v[1], v[2]]))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct FogStamp {
    beta: f64,
    airlight: [f64; 3],
    clear: String,
    depth: String,
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::SynthFog {
            clear,
            depth,
            beta,
            airlight,
            out,
            t_out,
        } => {
            let image = io::read_image(clear)?;
            let d = io::read_depth_pfm(depth)?;
            image.check_size(d.width(), d.height(), "depth vs image")?;
            let fog = FogParams::new(parse_airlight(airlight)?, *beta)?;
            let t = transmission_from_depth(&d, fog.beta)?;
            let foggy = if fog.beta == 0.0 { image } else { synthesize_haze(&image, &t, &fog)? };
            io::write_image_16(&foggy, out)?;
            io::write_transmission_pfm(&t, t_out.clone().unwrap_or_else(|| out.with_extension("t.pfm")))?;
            let stamp = FogStamp {
                beta: fog.beta,
                airlight: fog.airlight,
                clear: clear.display().to_string(),
                depth: depth.display().to_string(),
            };
            let json = serde_json::to_string_pretty(&stamp).expect("plain struct") + "\n";
            write_text(&out.with_extension("fog.json"), &json)
        }
        Command::EstimateT { hazy, out, config } => {
            let cfg = load_config(config.as_deref(), cli.seed)?;
            let image = io::read_image(hazy)?;
            let a = estimate_background_light(&image, &cfg.dcp)?;
            let t = estimate_transmission_dcp(&image, a, &cfg.dcp)?;
            io::write_transmission_pfm(&t, out)?;
            println!("airlight {:.6} {:.6} {:.6}", a[0], a[1], a[2]);
            Ok(())
        }
        Command::Dehaze {
            hazy,
            t,
            airlight,
            out,
            t_floor,
        } => {
            let image = io::read_image(hazy)?;
            let tm = io::read_transmission_pfm(t)?;
            let fog = FogParams::new(parse_airlight(airlight)?, 0.0)?;
            io::write_image(&dehaze(&image, &tm, &fog, *t_floor)?, out)
        }
        Command::Warp {
            source,
            depth,
            pose,
            out,
            camera,
        } => {
            let src = io::read_image(source)?;
            let d = io::read_depth_pfm(depth)?;
            let k = camera.resolve(d.width(), d.height())?;
            let view = reconstruct_view(&src, &d, &parse_pose(pose)?, &k)?;
            io::write_image(&view.image, out)?;
            println!("coverage {:.6}", view.coverage);
            Ok(())
        }
        Command::Solve {
            img1,
            img2,
            depth,
            depth2,
            config,
            out,
            cycled,
            robust,
            gt_pose,
            gt_depth,
            depth_out,
            timings,
            camera,
        } => {
            let start = Instant::now();
            let mut cfg = load_config(config.as_deref(), cli.seed)?;
            cfg.solver.enable_cycle |= *cycled;
            cfg.solver.enable_robust |= *robust;
            cfg.validate()?;
            let target = io::read_image(img1)?;
            let source = io::read_image(img2)?;
            let k = camera.resolve(target.width(), target.height())?;
            let solver = Solver::new(cfg.solve_config())?;
            let d1 = depth.as_ref().map(io::read_depth_pfm).transpose()?;
            let d2 = depth2.as_ref().map(io::read_depth_pfm).transpose()?;
            let (result, mode) = match (d1, cfg.solver.enable_cycle) {
                (Some(d), false) => (solver.solve_pose(&source, &target, &d, &k)?, SolveMode::Pose),
                (None, false) => (solver.solve_joint(&source, &target, &k)?, SolveMode::Joint),
                (d, true) => {
                    let d = match d {
                        Some(d) => d,
                        None => solver.solve_joint(&source, &target, &k)?.depth,
                    };
                    (solver.solve_cycled(&target, &source, &d, d2.as_ref(), &k)?, SolveMode::Cycled)
                }
            };
            let mut summary = PairSummary::from_result(&img2.display().to_string(), &img1.display().to_string(), mode, &result)?;
            if let Some(p) = gt_pose {
                let gt = io::read_kitti_poses(p)?;
                let first = gt.first().ok_or_else(|| Error::InvalidPose(format!("{} holds no pose", p.display())))?;
                summary.pose_error = Some(pose_pair_error(&result.pose, first));
            }
            let mut record = ResultRecord::new(cfg.clone());
            if let (Some(g), SolveMode::Joint) = (gt_depth, mode) {
                let gt = io::read_depth_pfm(g)?;
                record.depth_metrics = Some(depth_metrics(&result.depth, &gt, cfg.eval.cap, cfg.eval.median_scale)?);
            }
            if let Some(p) = depth_out {
                io::write_depth_pfm(&result.depth, p)?;
            }
            record.pairs.push(summary);
            if *timings {
                let ms = start.elapsed().as_secs_f64() * 1e3;
                record.timings = Some(Timings {
                    total_ms: ms,
                    per_pair_ms: vec![ms],
                });
            }
            record.write(out)?;
            let p = &record.pairs[0];
            println!(
                "twist {} converged {} iterations {} loss {:.6}",
                p.twist.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" "),
                p.converged,
                p.iterations,
                p.final_total
            );
            Ok(())
        }
        Command::EvalDepth {
            pred,
            gt,
            cap,
            median_scale,
        } => {
            let m: DepthMetrics = depth_metrics(&io::read_depth_pfm(pred)?, &io::read_depth_pfm(gt)?, *cap, *median_scale)?;
            println!("{}", DepthMetrics::HEADER);
            println!("{}", m.row());
            Ok(())
        }
        Command::EvalAte { est, gt, align, window } => {
            let (e, g) = (io::read_kitti_poses(est)?, io::read_kitti_poses(gt)?);
            let line = match window {
                Some(w) => ate_windowed(&e, &g, (*align).into(), *w)?.formatted(),
                None => ate(&e, &g, (*align).into())?.formatted(),
            };
            println!("{line}");
            Ok(())
        }
        Command::GenScene { spec, out } => {
            let text = std::fs::read_to_string(spec).map_err(|e| Error::io(spec, e))?;
            let scene: SceneSpec = toml::from_str(&text).map_err(|e| Error::InvalidSpec(e.message().to_string()))?;
            write_scene_bundle(&scene, out)
        }
        Command::Gradcheck { config } => {
            let cfg = load_config(config.as_deref(), cli.seed)?;
            let report = gradcheck(&cfg.solve_config())?;
            for c in &report.checks {
                println!(
                    "{:<22} trials {:>4} max_rel_error {:.3e} {}",
                    c.name,
                    c.trials,
                    c.max_rel_error,
                    if c.passed { "ok" } else { "FAILED" }
                );
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Error::Diverged("gradient check failed".into()))
            }
        }
        Command::Bench { sizes } => bench(sizes, cli.seed.unwrap_or(0)),
    }
}

/// `image1.png`, `image2.png` (16-bit), `depth1.pfm`, `depth2.pfm`,
/// `pose_gt.txt`, `intrinsics.txt`, `scene.json`, and with fog
/// `foggy1.png`, `foggy2.png`, `t1.pfm`, `t2.pfm`.
pub fn write_scene_bundle(scene: &SceneSpec, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let pair = make_foggy_pair(scene)?;
    let c = &pair.clear;
    io::write_image_16(&c.image1, out.join("image1.png"))?;
    io::write_image_16(&c.image2, out.join("image2.png"))?;
    io::write_depth_pfm(&c.depth1, out.join("depth1.pfm"))?;
    io::write_depth_pfm(&c.depth2, out.join("depth2.pfm"))?;
    io::write_kitti_poses(&[c.pose_gt], out.join("pose_gt.txt"))?;
    let k = c.intrinsics;
    write_text(&out.join("intrinsics.txt"), &format!("{} {} {} {}\n", k.fx, k.fy, k.cx, k.cy))?;
    let json = serde_json::to_string_pretty(scene).expect("plain struct") + "\n";
    write_text(&out.join("scene.json"), &json)?;
    if scene.fog.is_some() {
        io::write_image_16(&pair.foggy1, out.join("foggy1.png"))?;
        io::write_image_16(&pair.foggy2, out.join("foggy2.png"))?;
        io::write_transmission_pfm(&pair.t1, out.join("t1.pfm"))?;
        io::write_transmission_pfm(&pair.t2, out.join("t2.pfm"))?;
    }
    Ok(())
}

fn time_ms<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    let start = Instant::now();
    for _ in 0..repeats {
        f()?;
    }
    Ok(start.elapsed().as_secs_f64() * 1e3 / repeats as f64)
}

fn bench(sizes: &[usize], seed: u64) -> Result<()> {
    println!("{:<10} {:>10} {:>10} {:>12} {:>10}", "size", "warp_ms", "loss_ms", "objective_ms", "solve_ms");
    for &n in sizes {
        let pair = crate::scene::render_scene_pair(&SceneSpec::random(seed, n, n, true))?;
        let (src, tgt, d, k) = (&pair.image2, &pair.image1, &pair.depth1, &pair.intrinsics);
        let cfg = crate::solver::SolveConfig::default();
        let fx = ReferenceExtractor::new();
        let view = reconstruct_view(src, d, &pair.pose_gt, k)?;
        let warp = time_ms(20, || reconstruct_view(src, d, &pair.pose_gt, k))?;
        let loss = time_ms(20, || appearance_loss(&view, tgt, cfg.weights.alpha, &cfg.ssim))?;
        let obj = Objective::new(src, None, tgt, *k, &cfg, &fx, None)?;
        let objective = time_ms(20, || obj.evaluate(&pair.pose_gt, d))?;
        let solve = time_ms(1, || crate::solver::solve_pose(src, tgt, d, k, &cfg))?;
        println!("{:<10} {warp:>10.3} {loss:>10.3} {objective:>12.3} {solve:>10.1}", format!("{n}x{n}"));
    }
    Ok(())
}

/// Convenience for tests and examples: load a depth PFM and image pair.
pub fn load_pair(img1: &Path, img2: &Path, depth: &Path) -> Result<(ImageBuffer, ImageBuffer, DepthMap)> {
    Ok((io::read_image(img1)?, io::read_image(img2)?, io::read_depth_pfm(depth)?))
}
