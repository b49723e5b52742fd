//! Closed-form gradients of selected loss terms, compared against central
//! differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fog::FogParams;
use crate::image::{CameraIntrinsics, DepthMap, ImageBuffer, TransmissionMap};
use crate::loss::{aux_transmission_loss, haze_reconstruction_loss};
use crate::se3::{compose, se3_exp, PoseSE3, Twist};
use crate::warp::{bilinear_sample, warp_field, WarpField};

use super::optimize::numeric_gradient;
use super::SolveConfig;

/// Largest relative error a check may show and still pass.
pub const GRADCHECK_TOLERANCE: f64 = 1e-3;
const FD_EPS: f64 = 1e-6;
const POSE_TRIALS: usize = 100;
/// Samples closer than this to a bilinear cell boundary are left out, so
/// that probes never cross into a neighboring cell.
const CELL_MARGIN: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub name: String,
    pub trials: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub checks: Vec<GradCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn rel_error(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(n)).max(1e-12)
}

fn check(name: &str, errors: &[f64]) -> GradCheck {
    let max = errors.iter().copied().fold(0.0, f64::max);
    GradCheck {
        name: name.into(),
        trials: errors.len(),
        max_rel_error: max,
        passed: !errors.is_empty() && max < GRADCHECK_TOLERANCE,
    }
}

fn smooth_texture(rng: &mut ChaCha8Rng, w: usize, h: usize, ch: usize) -> ImageBuffer {
    let waves: Vec<[f64; 4]> = (0..4 * ch)
        .map(|_| [rng.gen_range(0.05..0.4), rng.gen_range(0.05..0.4), rng.gen_range(0.0..6.3), rng.gen_range(0.05..0.2)])
        .collect();
    ImageBuffer::from_fn(w, h, ch, |x, y, c| {
        0.5 + waves[4 * c..4 * c + 4]
            .iter()
            .map(|[a, b, p, amp]| amp * (a * x as f64 + b * y as f64 + p).sin())
            .sum::<f64>()
    })
}

/// Mean squared residual between the warped source and the target over a
/// fixed pixel set.
fn masked_residual(source: &ImageBuffer, target: &ImageBuffer, field: &WarpField, mask: &[bool]) -> Result<f64> {
    let view = bilinear_sample(source, field)?;
    let ch = target.channels();
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        for c in 0..ch {
            let r = view.image.data()[i * ch + c] - target.data()[i * ch + c];
            sum += r * r;
        }
        n += ch;
    }
    Ok(sum / n as f64)
}

/// Gradient of [`masked_residual`] with respect to a left increment
/// `exp(delta) * pose`, through projection and the bilinear interpolant.
fn residual_gradient(source: &ImageBuffer, target: &ImageBuffer, depth: &DepthMap, pose: &PoseSE3, k: &CameraIntrinsics, mask: &[bool]) -> [f64; 6] {
    let (w, ch) = (target.width(), target.channels());
    let n = (mask.iter().filter(|m| **m).count() * ch) as f64;
    let mut g = [0.0; 6];
    for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        let (px, py) = ((i % w) as f64, (i / w) as f64);
        let ray = k.backproject(px, py);
        let d = depth.data()[i];
        let p = pose.transform_point([ray[0] * d, ray[1] * d, ray[2] * d]);
        let (u, v) = k.project(p);
        let (x0, y0) = (u.floor() as usize, v.floor() as usize);
        let (fx, fy) = (u - x0 as f64, v - y0 as f64);
        // d(u, v)/dX'
        let z = p[2];
        let ju = [k.fx / z, 0.0, -k.fx * p[0] / (z * z)];
        let jv = [0.0, k.fy / z, -k.fy * p[1] / (z * z)];
        // columns of dX'/d(omega, v) = [-[X']x, I]
        let cols = [
            [0.0, -p[2], p[1]],
            [p[2], 0.0, -p[0]],
            [-p[1], p[0], 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        for c in 0..ch {
            let s = |x: usize, y: usize| source.get(x, y, c);
            let (i00, i10, i01, i11) = (s(x0, y0), s(x0 + 1, y0), s(x0, y0 + 1), s(x0 + 1, y0 + 1));
            let value = (1.0 - fy) * ((1.0 - fx) * i00 + fx * i10) + fy * ((1.0 - fx) * i01 + fx * i11);
            let di_du = (1.0 - fy) * (i10 - i00) + fy * (i11 - i01);
            let di_dv = (1.0 - fx) * (i01 - i00) + fx * (i11 - i10);
            let r = value - target.data()[i * ch + c];
            for (j, col) in cols.iter().enumerate() {
                let du: f64 = (0..3).map(|a| ju[a] * col[a]).sum();
                let dv: f64 = (0..3).map(|a| jv[a] * col[a]).sum();
                g[j] += 2.0 * r * (di_du * du + di_dv * dv) / n;
            }
        }
    }
    g
}

fn photometric_check(rng: &mut ChaCha8Rng) -> Result<GradCheck> {
    let (w, h) = (40, 30);
    let k = CameraIntrinsics::centered(w, h, 0.8);
    let source = smooth_texture(rng, w, h, 3);
    let target = smooth_texture(rng, w, h, 3);
    let depth = DepthMap::new(w, h, (0..w * h).map(|_| rng.gen_range(2.0..10.0)).collect())?;
    let mut errors = Vec::with_capacity(POSE_TRIALS);
    for _ in 0..POSE_TRIALS {
        let r: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-0.03..0.03));
        let t: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-0.2..0.2));
        let pose = PoseSE3::from_axis_angle(r, t);
        let field = warp_field(&depth, &pose, &k, &k)?;
        let mask: Vec<bool> = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                let (u, v) = field.coord(x, y);
                let interior = |f: f64| f.fract() > CELL_MARGIN && f.fract() < 1.0 - CELL_MARGIN;
                field.is_valid(x, y) && interior(u) && interior(v)
            })
            .collect();
        if mask.iter().filter(|m| **m).count() < w * h / 4 {
            continue;
        }
        let analytic = residual_gradient(&source, &target, &depth, &pose, &k, &mask);
        let f = |d: &[f64]| {
            let p = compose(&se3_exp(&Twist([d[0], d[1], d[2], d[3], d[4], d[5]])), &pose);
            warp_field(&depth, &p, &k, &k)
                .and_then(|fld| masked_residual(&source, &target, &fld, &mask))
                .unwrap_or(f64::NAN)
        };
        let numeric = numeric_gradient(&f, &[0.0; 6], &[FD_EPS; 6])?;
        errors.push(rel_error(&analytic, &numeric));
    }
    Ok(check("photometric_pose", &errors))
}

/// `J t + A (1 - t)` without clamping.
fn recompose(clear: &ImageBuffer, t: &[f64], fog: &FogParams) -> ImageBuffer {
    let ch = clear.channels();
    ImageBuffer::from_fn(clear.width(), clear.height(), ch, |x, y, c| {
        let tv = t[y * clear.width() + x];
        clear.get(x, y, c) * tv + fog.airlight_for(ch, c) * (1.0 - tv)
    })
}

fn haze_checks(rng: &mut ChaCha8Rng, trials: usize) -> Result<[GradCheck; 2]> {
    let (w, h) = (12, 10);
    let n = w * h;
    let (mut haze_err, mut aux_err) = (Vec::new(), Vec::new());
    for _ in 0..trials {
        let clear = smooth_texture(rng, w, h, 3);
        let observed = smooth_texture(rng, w, h, 3);
        let fog = FogParams::new([rng.gen_range(0.6..1.0), rng.gen_range(0.6..1.0), rng.gen_range(0.6..1.0)], 0.1)?;
        let t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let t_ref: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();

        let rec = recompose(&clear, &t, &fog);
        let loss = haze_reconstruction_loss(&rec, &observed)?;
        let denom = (3 * n) as f64 * loss;
        let analytic: Vec<f64> = (0..n)
            .map(|p| {
                (0..3)
                    .map(|c| {
                        let (x, y) = (p % w, p / w);
                        (rec.get(x, y, c) - observed.get(x, y, c)) * (clear.get(x, y, c) - fog.airlight[c])
                    })
                    .sum::<f64>()
                    / denom
            })
            .collect();
        let f = |tv: &[f64]| haze_reconstruction_loss(&recompose(&clear, tv, &fog), &observed).unwrap_or(f64::NAN);
        haze_err.push(rel_error(&analytic, &numeric_gradient(&f, &t, &vec![FD_EPS; n])?));

        let reference = TransmissionMap::new(w, h, t_ref.clone())?;
        let aux = aux_transmission_loss(&TransmissionMap::new(w, h, t.clone())?, &reference)?;
        let analytic: Vec<f64> = t.iter().zip(&t_ref).map(|(a, b)| (a - b) / (n as f64 * aux)).collect();
        let f = |tv: &[f64]| {
            TransmissionMap::new(w, h, tv.to_vec())
                .and_then(|m| aux_transmission_loss(&m, &reference))
                .unwrap_or(f64::NAN)
        };
        aux_err.push(rel_error(&analytic, &numeric_gradient(&f, &t, &vec![FD_EPS; n])?));
    }
    Ok([check("haze_reconstruction", &haze_err), check("aux_transmission", &aux_err)])
}

/// Central differences against a quadratic with a known gradient.
fn quadratic_check() -> Result<GradCheck> {
    let a = [3.0, -1.0, 0.5, 2.0];
    let f = |x: &[f64]| x.iter().zip(&a).enumerate().map(|(i, (v, c))| c * v * v + (i as f64) * v).sum::<f64>();
    let x = [0.3, -0.7, 1.1, 0.0];
    let analytic: Vec<f64> = x.iter().zip(&a).enumerate().map(|(i, (v, c))| 2.0 * c * v + i as f64).collect();
    let numeric = numeric_gradient(&f, &x, &[1e-4; 4])?;
    let err = rel_error(&analytic, &numeric);
    Ok(GradCheck {
        name: "quadratic".into(),
        trials: 1,
        max_rel_error: err,
        passed: err < 1e-6,
    })
}

/// Run every check with inputs drawn from `cfg.seed`.
pub fn gradcheck(cfg: &SolveConfig) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = vec![quadratic_check()?, photometric_check(&mut rng)?];
    checks.extend(haze_checks(&mut rng, 10)?);
    Ok(GradcheckReport { checks })
}
