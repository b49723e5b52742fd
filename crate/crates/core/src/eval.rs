//! Depth error/accuracy metrics, absolute trajectory error and per-pair pose
//! errors.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::DepthMap;
use crate::se3::PoseSE3;

/// Default depth cap in meters.
pub const DEFAULT_CAP: f64 = 50.0;
/// Predictions are clamped below at this depth.
pub const PRED_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub n_valid: usize,
    pub cap: f64,
}

impl DepthMetrics {
    pub const HEADER: &'static str = "abs_rel sq_rel rmse rmse_log delta1 delta2 delta3";

    /// The seven values to three decimals, space separated.
    pub fn row(&self) -> String {
        [self.abs_rel, self.sq_rel, self.rmse, self.rmse_log, self.delta1, self.delta2, self.delta3]
            .iter()
            .map(|v| format!("{v:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Median with the two middle values averaged for even counts.
fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Metrics over pixels where both maps are valid and `gt` lies in
/// `(0, cap]`. With `median_scale`, `pred` is first multiplied by
/// `median(gt) / median(pred)` over those pixels; predictions are then
/// clamped to `[PRED_FLOOR, cap]`.
pub fn depth_metrics(pred: &DepthMap, gt: &DepthMap, cap: f64, median_scale: bool) -> Result<DepthMetrics> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    if !(cap.is_finite() && cap > PRED_FLOOR) {
        return Err(Error::InvalidConfig(format!("depth cap {cap}")));
    }
    let idx: Vec<usize> = (0..gt.data().len())
        .filter(|&i| gt.is_valid_index(i) && pred.is_valid_index(i) && gt.data()[i] > 0.0 && gt.data()[i] <= cap)
        .collect();
    if idx.is_empty() {
        return Err(Error::NoValidPixels);
    }
    let scale = if median_scale {
        let mut g: Vec<f64> = idx.iter().map(|&i| gt.data()[i]).collect();
        let mut p: Vec<f64> = idx.iter().map(|&i| pred.data()[i]).collect();
        median(&mut g) / median(&mut p)
    } else {
        1.0
    };
    let n = idx.len() as f64;
    let (mut abs_rel, mut sq_rel, mut sq, mut sq_log) = (0.0, 0.0, 0.0, 0.0);
    let mut within = [0usize; 3];
    for &i in &idx {
        let g = gt.data()[i];
        let p = (pred.data()[i] * scale).clamp(PRED_FLOOR, cap);
        let d = p - g;
        abs_rel += d.abs() / g;
        sq_rel += d * d / g;
        sq += d * d;
        sq_log += (p.ln() - g.ln()).powi(2);
        let ratio = (p / g).max(g / p);
        for (k, w) in within.iter_mut().enumerate() {
            if ratio < 1.25f64.powi(k as i32 + 1) {
                *w += 1;
            }
        }
    }
    Ok(DepthMetrics {
        abs_rel: abs_rel / n,
        sq_rel: sq_rel / n,
        rmse: (sq / n).sqrt(),
        rmse_log: (sq_log / n).sqrt(),
        delta1: within[0] as f64 / n,
        delta2: within[1] as f64 / n,
        delta3: within[2] as f64 / n,
        n_valid: idx.len(),
        cap,
    })
}

/// How an estimated trajectory is registered to the ground truth before
/// position errors are taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    None,
    Rigid,
    #[default]
    Similarity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AteResult {
    pub mean: f64,
    /// Population standard deviation of the per-frame errors.
    pub std: f64,
    pub per_frame_errors: Vec<f64>,
    pub alignment: Alignment,
}

impl AteResult {
    /// `mean ± std` to three decimals.
    pub fn formatted(&self) -> String {
        format_mean_std(self.mean, self.std)
    }
}

pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.3} ± {std:.3}")
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Least-squares `(s, R, t)` minimizing `sum |y_i - (s R x_i + t)|^2`, with
/// `s = 1` unless `with_scale`.
pub fn umeyama(x: &[Vector3<f64>], y: &[Vector3<f64>], with_scale: bool) -> Result<(f64, Matrix3<f64>, Vector3<f64>)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<Vector3<f64>>() / n;
    let my = y.iter().sum::<Vector3<f64>>() / n;
    let var_x = x.iter().map(|p| (p - mx).norm_squared()).sum::<f64>() / n;
    if with_scale && var_x <= 1e-24 {
        return Err(Error::DegenerateTrajectory("estimated positions are all identical".into()));
    }
    let mut cov = Matrix3::zeros();
    for (a, b) in x.iter().zip(y) {
        cov += (b - my) * (a - mx).transpose();
    }
    cov /= n;
    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut s_diag = Vector3::new(1.0, 1.0, 1.0);
    if (u.determinant() * vt.determinant()) < 0.0 {
        s_diag.z = -1.0;
    }
    let r = u * Matrix3::from_diagonal(&s_diag) * vt;
    let scale = if with_scale {
        svd.singular_values.component_mul(&s_diag).sum() / var_x
    } else {
        1.0
    };
    Ok((scale, r, my - scale * r * mx))
}

/// Per-frame position error after `alignment`.
pub fn ate(estimated: &[PoseSE3], ground_truth: &[PoseSE3], alignment: Alignment) -> Result<AteResult> {
    if estimated.len() != ground_truth.len() {
        return Err(Error::LengthMismatch {
            estimated: estimated.len(),
            ground_truth: ground_truth.len(),
        });
    }
    if estimated.len() < 2 {
        return Err(Error::DegenerateTrajectory(format!("{} poses, need at least 2", estimated.len())));
    }
    let x: Vec<Vector3<f64>> = estimated.iter().map(|p| *p.translation()).collect();
    let y: Vec<Vector3<f64>> = ground_truth.iter().map(|p| *p.translation()).collect();
    let (s, r, t) = match alignment {
        Alignment::None => (1.0, Matrix3::identity(), Vector3::zeros()),
        Alignment::Rigid => umeyama(&x, &y, false)?,
        Alignment::Similarity => umeyama(&x, &y, true)?,
    };
    let errors: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (s * r * a + t - b).norm()).collect();
    let (mean, std) = mean_std(&errors);
    Ok(AteResult {
        mean,
        std,
        per_frame_errors: errors,
        alignment,
    })
}

/// ATE over short snippets of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowedAte {
    pub window: usize,
    pub snippet_means: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub alignment: Alignment,
}

impl WindowedAte {
    pub fn formatted(&self) -> String {
        format_mean_std(self.mean, self.std)
    }
}

/// ATE over every run of `window` consecutive frames, each aligned on its
/// own; mean and population std are taken over the snippet means.
pub fn ate_windowed(estimated: &[PoseSE3], ground_truth: &[PoseSE3], alignment: Alignment, window: usize) -> Result<WindowedAte> {
    if estimated.len() != ground_truth.len() {
        return Err(Error::LengthMismatch {
            estimated: estimated.len(),
            ground_truth: ground_truth.len(),
        });
    }
    if window < 2 || window > estimated.len() {
        return Err(Error::DegenerateTrajectory(format!(
            "window {window} for a trajectory of {} poses",
            estimated.len()
        )));
    }
    let snippet_means = (0..=estimated.len() - window)
        .map(|i| ate(&estimated[i..i + window], &ground_truth[i..i + window], alignment).map(|r| r.mean))
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = mean_std(&snippet_means);
    Ok(WindowedAte {
        window,
        snippet_means,
        mean,
        std,
        alignment,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    /// Angle of `R_gt^T R_est`, degrees.
    pub rot_error: f64,
    /// `|t_est - t_gt|`.
    pub trans_error: f64,
    /// Angle between the translations in degrees; absent when either is
    /// shorter than 1e-9.
    pub trans_angle_error: Option<f64>,
}

/// Angle between two vectors in degrees, by `atan2` for accuracy near 0
/// and 180.
fn vector_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

pub fn pose_pair_error(est: &PoseSE3, gt: &PoseSE3) -> PoseError {
    let d = gt.rotation().transpose() * est.rotation();
    let s = Vector3::new(d[(2, 1)] - d[(1, 2)], d[(0, 2)] - d[(2, 0)], d[(1, 0)] - d[(0, 1)]).norm() / 2.0;
    let c = (d.trace() - 1.0) / 2.0;
    let (te, tg) = (est.translation(), gt.translation());
    PoseError {
        rot_error: s.atan2(c).to_degrees(),
        trans_error: (te - tg).norm(),
        trans_angle_error: (te.norm() > 1e-9 && tg.norm() > 1e-9).then(|| vector_angle(te, tg)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map(v: &[f64]) -> DepthMap {
        DepthMap::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn perfect_and_doubled() {
        let gt = map(&[1.0, 2.0, 5.0, 10.0, 40.0]);
        let m = depth_metrics(&gt, &gt, DEFAULT_CAP, false).unwrap();
        assert_eq!(m.row(), "0.000 0.000 0.000 0.000 1.000 1.000 1.000");
        assert_eq!(m.n_valid, 5);
        let twice = gt.scaled(2.0).unwrap();
        let m = depth_metrics(&twice, &gt, 100.0, false).unwrap();
        assert!((m.abs_rel - 1.0).abs() < 1e-15);
        assert_eq!((m.delta1, m.delta2, m.delta3), (0.0, 0.0, 0.0));
        let m = depth_metrics(&twice, &gt, DEFAULT_CAP, true).unwrap();
        assert_eq!(m.row(), "0.000 0.000 0.000 0.000 1.000 1.000 1.000");
    }

    #[test]
    fn cap_and_masks() {
        let gt = DepthMap::with_mask(4, 1, vec![60.0, 5.0, 5.0, 5.0], vec![true, true, false, true]).unwrap();
        let pred = DepthMap::with_mask(4, 1, vec![1.0, 5.0, 1.0, 1.0], vec![true, true, true, false]).unwrap();
        assert_eq!(depth_metrics(&pred, &gt, DEFAULT_CAP, false).unwrap().n_valid, 1);
        let none = DepthMap::constant(3, 1, 80.0).unwrap();
        assert!(matches!(depth_metrics(&none, &none, DEFAULT_CAP, false), Err(Error::NoValidPixels)));
    }

    #[test]
    fn delta_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..200).map(|_| rng.gen_range(1.0..40.0)).collect();
        let b: Vec<f64> = (0..200).map(|_| rng.gen_range(1.0..40.0)).collect();
        let m1 = depth_metrics(&map(&a), &map(&b), DEFAULT_CAP, false).unwrap();
        let m2 = depth_metrics(&map(&b), &map(&a), DEFAULT_CAP, false).unwrap();
        assert_eq!((m1.delta1, m1.delta2, m1.delta3), (m2.delta1, m2.delta2, m2.delta3));
    }

    proptest! {
        #[test]
        fn median_scaling_ignores_global_scale(seed in 0u64..1000, s in 0.05f64..20.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt: Vec<f64> = (0..50).map(|_| rng.gen_range(1.0..30.0)).collect();
            let pred: Vec<f64> = gt.iter().map(|g| g * rng.gen_range(0.7..1.4)).collect();
            let a = depth_metrics(&map(&pred), &map(&gt), DEFAULT_CAP, true).unwrap();
            let scaled: Vec<f64> = pred.iter().map(|p| p * s).collect();
            let b = depth_metrics(&map(&scaled), &map(&gt), DEFAULT_CAP, true).unwrap();
            for (x, y) in [(a.abs_rel, b.abs_rel), (a.sq_rel, b.sq_rel), (a.rmse, b.rmse), (a.rmse_log, b.rmse_log),
                           (a.delta1, b.delta1), (a.delta2, b.delta2), (a.delta3, b.delta3)] {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    fn traj(points: &[[f64; 3]]) -> Vec<PoseSE3> {
        points.iter().map(|p| PoseSE3::from_translation(*p)).collect()
    }

    #[test]
    fn ate_basics() {
        let gt = traj(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 2.0, 0.5], [3.0, 1.0, -1.0]]);
        for a in [Alignment::None, Alignment::Rigid, Alignment::Similarity] {
            let r = ate(&gt, &gt, a).unwrap();
            assert!(r.mean < 1e-12 && r.std < 1e-12);
            assert_eq!(r.per_frame_errors.len(), 4);
        }
        assert_eq!(ate(&gt, &gt, Alignment::Similarity).unwrap().formatted(), "0.000 ± 0.000");
        let shifted = traj(&[[2.0, -1.0, 3.0], [3.0, -1.0, 3.0], [3.0, 1.0, 3.5], [5.0, 0.0, 2.0]]);
        assert!(ate(&shifted, &gt, Alignment::Rigid).unwrap().mean < 1e-12);
        assert!((ate(&shifted, &gt, Alignment::None).unwrap().mean - 14f64.sqrt()).abs() < 1e-12);
        let half = traj(&[[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.5, 1.0, 0.25], [1.5, 0.5, -0.5]]);
        assert!(ate(&half, &gt, Alignment::Similarity).unwrap().mean < 1e-12);
        assert!(matches!(ate(&gt[..3], &gt, Alignment::None), Err(Error::LengthMismatch { .. })));
        let still = traj(&[[1.0, 1.0, 1.0]; 4]);
        assert!(matches!(ate(&still, &gt, Alignment::Similarity), Err(Error::DegenerateTrajectory(_))));
    }

    #[test]
    fn windowed_ate() {
        let gt = traj(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.5, 0.0], [3.0, 1.0, 0.2], [4.0, 1.0, 0.1], [5.0, 2.0, 0.0]]);
        let w = ate_windowed(&gt, &gt, Alignment::Similarity, 5).unwrap();
        assert_eq!(w.snippet_means.len(), 2);
        assert!(w.mean < 1e-12);
        assert!(ate_windowed(&gt, &gt, Alignment::Similarity, 7).is_err());
    }

    /// Unit quaternion of a rotation matrix, by the largest-diagonal branch.
    fn quaternion(r: &Matrix3<f64>) -> [f64; 4] {
        let tr = r.trace();
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            [0.25 * s, (r[(2, 1)] - r[(1, 2)]) / s, (r[(0, 2)] - r[(2, 0)]) / s, (r[(1, 0)] - r[(0, 1)]) / s]
        } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
            let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
            [(r[(2, 1)] - r[(1, 2)]) / s, 0.25 * s, (r[(0, 1)] + r[(1, 0)]) / s, (r[(0, 2)] + r[(2, 0)]) / s]
        } else if r[(1, 1)] > r[(2, 2)] {
            let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
            [(r[(0, 2)] - r[(2, 0)]) / s, (r[(0, 1)] + r[(1, 0)]) / s, 0.25 * s, (r[(1, 2)] + r[(2, 1)]) / s]
        } else {
            let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
            [(r[(1, 0)] - r[(0, 1)]) / s, (r[(0, 2)] + r[(2, 0)]) / s, (r[(1, 2)] + r[(2, 1)]) / s, 0.25 * s]
        }
    }

    #[test]
    fn rotation_error_matches_quaternion_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let rv = |rng: &mut ChaCha8Rng| -> [f64; 3] { std::array::from_fn(|_| rng.gen_range(-1.5..1.5)) };
            let a = PoseSE3::from_axis_angle(rv(&mut rng), [0.0; 3]);
            let b = PoseSE3::from_axis_angle(rv(&mut rng), [0.0; 3]);
            let (qa, qb) = (quaternion(a.rotation()), quaternion(b.rotation()));
            let dot: f64 = qa.iter().zip(&qb).map(|(x, y)| x * y).sum();
            let oracle = 2.0 * dot.abs().min(1.0).acos().to_degrees();
            assert!((pose_pair_error(&a, &b).rot_error - oracle).abs() < 1e-6);
        }
    }

    #[test]
    fn pose_error_examples() {
        let gt = PoseSE3::from_axis_angle([0.1, 0.0, 0.0], [1.0, 0.0, 0.0]);
        let e = pose_pair_error(&gt, &gt);
        assert_eq!((e.rot_error, e.trans_error, e.trans_angle_error), (0.0, 0.0, Some(0.0)));
        let est = crate::se3::compose(&PoseSE3::from_axis_angle([0.0, 0.0, 2f64.to_radians()], [0.0; 3]), &gt);
        let est = PoseSE3::new(*est.rotation(), *gt.translation()).unwrap();
        assert!((pose_pair_error(&est, &gt).rot_error - 2.0).abs() < 1e-9);
        let zero = PoseSE3::identity();
        assert_eq!(pose_pair_error(&zero, &gt).trans_angle_error, None);
    }
}
