//! Direct minimization of the combined self-supervised loss over a relative
//! pose (a twist) and, optionally, a coarse log-depth grid.
//!
//! Poses follow the warp convention: the estimate maps target-camera
//! coordinates to source-camera coordinates.

pub mod analytic;
pub mod optimize;
pub mod pyramid;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{CameraIntrinsics, DepthMap, ImageBuffer};
use crate::loss::{
    appearance_loss, cycle_loss, fill_invalid, gradient_loss, lsgan_generator_loss, smoothness_loss, total_loss,
    CycleMetric, Discriminator, FeatureExtractor, FeatureMap, LossBreakdown, LossComponents, LossWeights,
    ReferenceExtractor, SsimConfig,
};
use crate::se3::{inverse, se3_exp, se3_log, PoseSE3, Twist};
use crate::warp::{bilinear_sample, bilinear_sample_masked, warp_field, ReconstructedView};

pub use optimize::{minimize, numeric_gradient, Descent, MinimizeOptions, MinimizeOutcome};

/// Optimizer and objective settings. Loss weights and SSIM settings live
/// in their own configuration sections and are merged in by the config
/// loader.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub descent: Descent,
    /// Iteration cap per optimization block.
    pub max_iters: usize,
    pub step_size: f64,
    pub momentum: f64,
    /// Stop when the loss falls by less than this fraction over
    /// `convergence_window` accepted steps.
    pub convergence_tol: f64,
    pub convergence_window: usize,
    pub max_halvings: usize,
    pub fd_epsilon_twist: f64,
    pub fd_epsilon_depth: f64,
    /// Side length of the log-depth control grid.
    pub depth_grid: usize,
    pub pyramid_levels: usize,
    pub seed: u64,
    pub enable_cycle: bool,
    /// Adds the gradient and perceptual terms.
    pub enable_robust: bool,
    pub cycle_metric: CycleMetric,
    /// Alternations of pose and depth blocks per pyramid level.
    pub joint_rounds: usize,
    /// Backward/forward alternations after the first forward solve.
    pub cycle_rounds: usize,
    /// Below this coverage of the synthesized previous image the cycle term
    /// is switched off for the round.
    pub min_cycle_coverage: f64,
    /// Starting depth of the control grid, in meters.
    pub initial_depth: f64,
    #[serde(skip)]
    pub weights: LossWeights,
    #[serde(skip)]
    pub ssim: SsimConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            descent: Descent::Bfgs,
            max_iters: 300,
            step_size: 1e-2,
            momentum: 0.9,
            convergence_tol: 1e-6,
            convergence_window: 10,
            max_halvings: 20,
            fd_epsilon_twist: 1e-4,
            fd_epsilon_depth: 1e-3,
            depth_grid: 8,
            pyramid_levels: 3,
            seed: 0,
            enable_cycle: false,
            enable_robust: false,
            cycle_metric: CycleMetric::Relative,
            joint_rounds: 3,
            cycle_rounds: 2,
            min_cycle_coverage: 0.3,
            initial_depth: 10.0,
            weights: LossWeights::default(),
            ssim: SsimConfig::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.step_size,
            self.convergence_tol,
            self.fd_epsilon_twist,
            self.fd_epsilon_depth,
            self.initial_depth,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || !(0.0..1.0).contains(&self.momentum)
            || !(0.0..=1.0).contains(&self.min_cycle_coverage)
            || self.max_iters == 0
            || self.convergence_window == 0
            || self.depth_grid < 2
            || self.pyramid_levels == 0
            || self.joint_rounds == 0
        {
            return Err(Error::InvalidConfig(format!("solver settings {self:?}")));
        }
        self.weights.validate()?;
        self.ssim.validate()
    }

    fn minimize_options(&self, max_iters: usize) -> MinimizeOptions {
        MinimizeOptions {
            descent: self.descent,
            max_iters,
            step_size: self.step_size,
            momentum: self.momentum,
            tol: self.convergence_tol,
            window: self.convergence_window,
            max_halvings: self.max_halvings,
        }
    }
}

/// Loss terms at one parameter point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Unweighted terms.
    pub components: LossComponents,
    pub breakdown: LossBreakdown,
    pub coverage: f64,
}

impl Evaluation {
    pub fn total(&self) -> f64 {
        self.breakdown.total
    }

    fn with_cycle(mut self, cycle: f64, weights: &LossWeights) -> Result<Self> {
        self.components.cycle = cycle;
        self.breakdown = total_loss(&self.components, weights)?;
        Ok(self)
    }
}

/// Which parameters an optimization segment moved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Pose,
    Depth,
    Backward,
}

/// One accepted point of the optimization. Totals never increase within a
/// segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub segment: usize,
    pub block: Block,
    /// Pyramid level, 0 is full resolution.
    pub level: usize,
    pub iteration: usize,
    pub total: f64,
    /// Weighted terms.
    pub terms: LossComponents,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    /// Forward estimate.
    pub pose: PoseSE3,
    /// Backward estimate, expressed in the forward direction.
    pub pose_backward: Option<PoseSE3>,
    pub depth: DepthMap,
    pub loss_trace: Vec<TraceEntry>,
    /// Accepted steps over all segments.
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: Evaluation,
    /// Disagreement between the forward and backward estimates.
    pub cycle_loss: Option<f64>,
}

/// `K x K` log-depth control points spanning the image corners.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthGrid {
    pub size: usize,
    pub log_depth: Vec<f64>,
}

impl DepthGrid {
    pub fn constant(size: usize, depth: f64) -> Self {
        Self {
            size,
            log_depth: vec![depth.ln(); size * size],
        }
    }

    pub fn new(size: usize, log_depth: Vec<f64>) -> Result<Self> {
        if size < 2 || log_depth.len() != size * size || log_depth.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDepth(format!(
                "grid of side {size} with {} finite log-depths",
                log_depth.len()
            )));
        }
        Ok(Self { size, log_depth })
    }

    /// Bilinear upsampling of the log-depth, then exponentiation.
    pub fn upsample(&self, width: usize, height: usize) -> Result<DepthMap> {
        let n = self.size;
        let sx = (n - 1) as f64 / (width.max(2) - 1) as f64;
        let sy = (n - 1) as f64 / (height.max(2) - 1) as f64;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            let gy = y as f64 * sy;
            let y0 = (gy.floor() as usize).min(n - 2);
            let fy = gy - y0 as f64;
            for x in 0..width {
                let gx = x as f64 * sx;
                let x0 = (gx.floor() as usize).min(n - 2);
                let fx = gx - x0 as f64;
                let g = |i: usize, j: usize| self.log_depth[j * n + i];
                let top = (1.0 - fx) * g(x0, y0) + fx * g(x0 + 1, y0);
                let bottom = (1.0 - fx) * g(x0, y0 + 1) + fx * g(x0 + 1, y0 + 1);
                data.push(((1.0 - fy) * top + fy * bottom).exp());
            }
        }
        DepthMap::new(width, height, data)
    }
}

/// Smallest feature-map side at which the perceptual term is evaluated.
pub const MIN_FEATURE_SIDE: usize = 8;

/// The combined loss for one source/target pair at one resolution.
pub struct Objective<'a> {
    source: &'a ImageBuffer,
    source_valid: Option<&'a [bool]>,
    target: &'a ImageBuffer,
    k: CameraIntrinsics,
    weights: LossWeights,
    ssim: SsimConfig,
    robust: bool,
    extractor: &'a dyn FeatureExtractor,
    discriminator: Option<&'a dyn Discriminator>,
    target_features: Option<FeatureMap>,
}

impl<'a> Objective<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        source: &'a ImageBuffer,
        source_valid: Option<&'a [bool]>,
        target: &'a ImageBuffer,
        k: CameraIntrinsics,
        cfg: &SolveConfig,
        extractor: &'a dyn FeatureExtractor,
        discriminator: Option<&'a dyn Discriminator>,
    ) -> Result<Self> {
        source.check_same_shape(target, "source vs target")?;
        let robust = cfg.enable_robust;
        // too few feature positions carry no usable structure; coarse
        // pyramid levels then run without the perceptual term
        let target_features = if robust && cfg.weights.lambda_per > 0.0 {
            Some(extractor.extract(target)?).filter(|f| f.width.min(f.height) >= MIN_FEATURE_SIDE)
        } else {
            None
        };
        Ok(Self {
            source,
            source_valid,
            target,
            k,
            weights: cfg.weights,
            ssim: cfg.ssim,
            robust,
            extractor,
            discriminator,
            target_features,
        })
    }

    pub fn reconstruct(&self, pose: &PoseSE3, depth: &DepthMap) -> Result<ReconstructedView> {
        let field = warp_field(depth, pose, &self.k, &self.k)?;
        match self.source_valid {
            Some(m) => bilinear_sample_masked(self.source, m, &field),
            None => bilinear_sample(self.source, &field),
        }
    }

    pub fn evaluate(&self, pose: &PoseSE3, depth: &DepthMap) -> Result<Evaluation> {
        self.target.check_size(depth.width(), depth.height(), "depth vs target")?;
        let recon = self.reconstruct(pose, depth)?;
        if recon.valid_count() == 0 {
            return Err(Error::EmptyMask);
        }
        let w = &self.weights;
        let mut c = LossComponents {
            photometric: appearance_loss(&recon, self.target, w.alpha, &self.ssim)?,
            ..LossComponents::default()
        };
        if w.lambda_s > 0.0 {
            let values = depth.valid_values();
            let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
            c.smoothness = smoothness_loss(&depth.scaled(1.0 / mean)?, self.target)?;
        }
        let needs_fill = self.target_features.is_some() || (self.discriminator.is_some() && w.lambda_gan > 0.0);
        let filled = if needs_fill { Some(fill_invalid(&recon, self.target)?) } else { None };
        if self.robust {
            if w.lambda_gra > 0.0 {
                c.gradient = gradient_loss(&recon.image, self.target, Some(&recon.valid))?;
            }
            if let (Some(tf), Some(img)) = (&self.target_features, &filled) {
                c.perceptual = crate::loss::perceptual_distance(&self.extractor.extract(img)?, tf)?;
            }
        }
        if let (Some(d), Some(img)) = (self.discriminator, &filled) {
            if w.lambda_gan > 0.0 {
                c.gan = lsgan_generator_loss(&[d.score(img)?]);
            }
        }
        Ok(Evaluation {
            components: c,
            breakdown: total_loss(&c, w)?,
            coverage: recon.coverage,
        })
    }
}

/// The combined loss at full resolution for a twist and a log-depth grid,
/// using the reference feature extractor and no discriminator.
pub fn objective(
    source: &ImageBuffer,
    target: &ImageBuffer,
    twist: &Twist,
    log_depth_grid: &DepthGrid,
    k: &CameraIntrinsics,
    cfg: &SolveConfig,
) -> Result<Evaluation> {
    let fx = ReferenceExtractor::new();
    let obj = Objective::new(source, None, target, *k, cfg, &fx, None)?;
    let depth = log_depth_grid.upsample(target.width(), target.height())?;
    obj.evaluate(&se3_exp(twist), &depth)
}

/// Images, depths and intrinsics for every pyramid level, finest first.
struct Levels {
    sources: Vec<ImageBuffer>,
    targets: Vec<ImageBuffer>,
    depths: Option<Vec<DepthMap>>,
    ks: Vec<CameraIntrinsics>,
}

impl Levels {
    fn new(source: &ImageBuffer, target: &ImageBuffer, depth: Option<&DepthMap>, k: &CameraIntrinsics, requested: usize) -> Result<Self> {
        let n = pyramid::usable_levels(target.width(), target.height(), requested);
        Ok(Self {
            sources: pyramid::build(source.clone(), n, pyramid::downsample_image)?,
            targets: pyramid::build(target.clone(), n, pyramid::downsample_image)?,
            depths: depth.map(|d| pyramid::build(d.clone(), n, pyramid::downsample_depth)).transpose()?,
            ks: pyramid::intrinsics_levels(k, n),
        })
    }

    fn count(&self) -> usize {
        self.targets.len()
    }
}

/// Drives the solves; holds the feature extractor and optional
/// discriminator the objective uses.
pub struct Solver<'a> {
    cfg: SolveConfig,
    reference: ReferenceExtractor,
    extractor: Option<&'a dyn FeatureExtractor>,
    discriminator: Option<&'a dyn Discriminator>,
}

struct Run {
    trace: Vec<TraceEntry>,
    iterations: usize,
}

impl Run {
    fn new() -> Self {
        Self {
            trace: Vec::new(),
            iterations: 0,
        }
    }

    fn record(&mut self, block: Block, level: usize, evals: Vec<Evaluation>) {
        let segment = self.trace.last().map_or(0, |e| e.segment + 1);
        self.iterations += evals.len().saturating_sub(1);
        for (i, e) in evals.into_iter().enumerate() {
            self.trace.push(TraceEntry {
                segment,
                block,
                level,
                iteration: i,
                total: e.total(),
                terms: e.breakdown.weighted,
            });
        }
    }
}

/// Rotations in radians and translations in units of `depth`, so that
/// each coordinate moves the image by a comparable number of pixels.
fn twist_scale(depth: f64) -> [f64; 6] {
    [1.0, 1.0, 1.0, depth, depth, depth]
}

fn median_depth(depth: &DepthMap) -> f64 {
    let mut v = depth.valid_values();
    if v.is_empty() {
        return 1.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn twist_of(p: &[f64]) -> Twist {
    Twist([p[0], p[1], p[2], p[3], p[4], p[5]])
}

impl<'a> Solver<'a> {
    pub fn new(cfg: SolveConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            reference: ReferenceExtractor::new(),
            extractor: None,
            discriminator: None,
        })
    }

    pub fn with_extractor(mut self, extractor: &'a dyn FeatureExtractor) -> Self {
        self.extractor = Some(extractor);
        self
    }

    pub fn with_discriminator(mut self, discriminator: &'a dyn Discriminator) -> Self {
        self.discriminator = Some(discriminator);
        self
    }

    pub fn config(&self) -> &SolveConfig {
        &self.cfg
    }

    fn extractor(&self) -> &dyn FeatureExtractor {
        self.extractor.unwrap_or(&self.reference)
    }

    fn objective<'b>(&'b self, source: &'b ImageBuffer, valid: Option<&'b [bool]>, target: &'b ImageBuffer, k: CameraIntrinsics) -> Result<Objective<'b>> {
        Objective::new(source, valid, target, k, &self.cfg, self.extractor(), self.discriminator)
    }

    /// Minimize `eval` over `x0` and append the accepted points to the trace.
    /// The descent runs in coordinates `x / scale`; finite-difference steps
    /// stay `eps` in the units of `x`.
    #[allow(clippy::too_many_arguments)]
    fn run_block<F>(&self, run: &mut Run, block: Block, level: usize, x0: &[f64], scale: &[f64], eps: f64, max_iters: usize, eval: F) -> Result<MinimizeOutcome>
    where
        F: Fn(&[f64]) -> Result<Evaluation> + Sync,
    {
        eval(x0)?;
        let to_x = |y: &[f64]| -> Vec<f64> { y.iter().zip(scale).map(|(a, c)| a * c).collect() };
        let f = |y: &[f64]| eval(&to_x(y)).map_or(f64::INFINITY, |e| e.total());
        let y0: Vec<f64> = x0.iter().zip(scale).map(|(a, c)| a / c).collect();
        let eps: Vec<f64> = scale.iter().map(|c| eps / c).collect();
        let mut out = minimize(&f, &y0, &eps, &self.cfg.minimize_options(max_iters))?;
        out.x = to_x(&out.x);
        out.points = out.points.iter().map(|p| to_x(p)).collect();
        let evals = out.points.par_iter().map(|p| eval(p)).collect::<Result<Vec<_>>>()?;
        run.record(block, level, evals);
        Ok(out)
    }

    /// Pose with depth held fixed, coarse to fine, from the identity.
    pub fn solve_pose(&self, source: &ImageBuffer, target: &ImageBuffer, depth: &DepthMap, k: &CameraIntrinsics) -> Result<SolveResult> {
        self.solve_pose_from(source, target, depth, k, &PoseSE3::identity())
    }

    /// As [`Solver::solve_pose`], starting from `init`.
    pub fn solve_pose_from(
        &self,
        source: &ImageBuffer,
        target: &ImageBuffer,
        depth: &DepthMap,
        k: &CameraIntrinsics,
        init: &PoseSE3,
    ) -> Result<SolveResult> {
        target.check_size(depth.width(), depth.height(), "depth vs target")?;
        k.validate_for(target.width(), target.height())?;
        let levels = Levels::new(source, target, Some(depth), k, self.cfg.pyramid_levels)?;
        let depths = levels.depths.as_ref().expect("depth given");
        let mut x = se3_log(init)?.0.to_vec();
        let mut run = Run::new();
        let mut converged = false;
        for l in (0..levels.count()).rev() {
            let obj = self.objective(&levels.sources[l], None, &levels.targets[l], levels.ks[l])?;
            let eval = |p: &[f64]| obj.evaluate(&se3_exp(&twist_of(p)), &depths[l]);
            match self.run_block(&mut run, Block::Pose, l, &x, &twist_scale(median_depth(&depths[l])), self.cfg.fd_epsilon_twist, self.cfg.max_iters, eval) {
                Ok(out) => {
                    x = out.x;
                    converged = out.converged;
                }
                Err(e) if l > 0 => log::debug!("skipping pyramid level {l}: {e}"),
                Err(e) => return Err(e),
            }
        }
        let pose = se3_exp(&twist_of(&x));
        let final_loss = self.objective(source, None, target, *k)?.evaluate(&pose, depth)?;
        Ok(SolveResult {
            pose,
            pose_backward: None,
            depth: depth.clone(),
            loss_trace: run.trace,
            iterations: run.iterations,
            converged,
            final_loss,
            cycle_loss: None,
        })
    }

    /// Pose and a log-depth grid, alternating blocks. The returned depth is
    /// divided by its median and the translation by the same factor.
    pub fn solve_joint(&self, source: &ImageBuffer, target: &ImageBuffer, k: &CameraIntrinsics) -> Result<SolveResult> {
        k.validate_for(target.width(), target.height())?;
        let grid = DepthGrid::constant(self.cfg.depth_grid, self.cfg.initial_depth);
        let (pose, grid, run, converged) = self.joint_blocks(source, None, target, k, &PoseSE3::identity(), grid, Block::Pose)?;
        let depth = grid.upsample(target.width(), target.height())?;
        let mut values = depth.valid_values();
        values.sort_by(f64::total_cmp);
        let median = values[values.len() / 2];
        let depth = depth.scaled(1.0 / median)?;
        let t = pose.translation() / median;
        let pose = PoseSE3::new(*pose.rotation(), t)?;
        let final_loss = self.objective(source, None, target, *k)?.evaluate(&pose, &depth)?;
        Ok(SolveResult {
            pose,
            pose_backward: None,
            depth,
            loss_trace: run.trace,
            iterations: run.iterations,
            converged,
            final_loss,
            cycle_loss: None,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn joint_blocks(
        &self,
        source: &ImageBuffer,
        source_valid: Option<&[bool]>,
        target: &ImageBuffer,
        k: &CameraIntrinsics,
        init: &PoseSE3,
        mut grid: DepthGrid,
        pose_block: Block,
    ) -> Result<(PoseSE3, DepthGrid, Run, bool)> {
        let levels = Levels::new(source, target, None, k, if source_valid.is_some() { 1 } else { self.cfg.pyramid_levels })?;
        let per_block = (self.cfg.max_iters / self.cfg.joint_rounds).max(1);
        let mut x = se3_log(init)?.0.to_vec();
        let mut run = Run::new();
        let mut converged = false;
        for l in (0..levels.count()).rev() {
            let (w, h) = (levels.targets[l].width(), levels.targets[l].height());
            let obj = self.objective(&levels.sources[l], source_valid, &levels.targets[l], levels.ks[l])?;
            for _ in 0..self.cfg.joint_rounds {
                let depth = grid.upsample(w, h)?;
                let eval = |p: &[f64]| obj.evaluate(&se3_exp(&twist_of(p)), &depth);
                let pose_out = match self.run_block(&mut run, pose_block, l, &x, &twist_scale(median_depth(&depth)), self.cfg.fd_epsilon_twist, per_block, eval) {
                    Ok(o) => o,
                    Err(e) if l > 0 => {
                        log::debug!("skipping pyramid level {l}: {e}");
                        break;
                    }
                    Err(e) => return Err(e),
                };
                x = pose_out.x;
                let pose = se3_exp(&twist_of(&x));
                let n = grid.size;
                let eval = |g: &[f64]| obj.evaluate(&pose, &DepthGrid::new(n, g.to_vec())?.upsample(w, h)?);
                let grid_out = self.run_block(&mut run, Block::Depth, l, &grid.log_depth, &vec![1.0; n * n], self.cfg.fd_epsilon_depth, per_block, eval)?;
                grid.log_depth = grid_out.x;
                converged = pose_out.converged && grid_out.converged;
            }
        }
        Ok((se3_exp(&twist_of(&x)), grid, run, converged))
    }

    /// Forward and backward half-cycles coupled by the pose-consistency
    /// term. The forward half estimates the pose from `previous` (target,
    /// with `depth_previous`) to `current` (source) and synthesizes the
    /// previous frame from `current`. The backward half reconstructs
    /// `current` from that synthesized frame, with `depth_current` or, when
    /// absent, a control grid estimated alongside. Each block sees the
    /// other's latest pose as a constant.
    pub fn solve_cycled(
        &self,
        previous: &ImageBuffer,
        current: &ImageBuffer,
        depth_previous: &DepthMap,
        depth_current: Option<&DepthMap>,
        k: &CameraIntrinsics,
    ) -> Result<SolveResult> {
        let forward = self.solve_pose(current, previous, depth_previous, k)?;
        let mut trace = forward.loss_trace;
        let mut iterations = forward.iterations;
        let mut converged = forward.converged;
        let mut p_f = forward.pose;
        let mut p_b = p_f;
        let lambda = self.cfg.weights.lambda_cyc;
        let metric = self.cfg.cycle_metric;
        let mut grid = DepthGrid::constant(self.cfg.depth_grid, median_depth(depth_previous));
        let fwd_obj = self.objective(current, None, previous, *k)?;
        let mut cycle_weight = lambda;
        for round in 0..self.cfg.cycle_rounds.max(1) {
            let synthesized = fwd_obj.reconstruct(&p_f, depth_previous)?;
            cycle_weight = if synthesized.coverage < self.cfg.min_cycle_coverage { 0.0 } else { lambda };
            let bwd_obj = self.objective(&synthesized.image, Some(&synthesized.valid), current, *k)?;
            let coupled = |e: Evaluation, fwd: &PoseSE3, bwd: &PoseSE3| -> Result<Evaluation> {
                let c = if cycle_weight > 0.0 { cycle_loss(fwd, bwd, metric)? } else { 0.0 };
                let w = LossWeights {
                    lambda_cyc: cycle_weight,
                    ..self.cfg.weights
                };
                e.with_cycle(c, &w)
            };
            let init = inverse(&p_b);
            let pf_fixed = p_f;
            let mut run = Run::new();
            let q = match depth_current {
                Some(d) => {
                    let eval = |p: &[f64]| {
                        let q = se3_exp(&twist_of(p));
                        coupled(bwd_obj.evaluate(&q, d)?, &pf_fixed, &inverse(&q))
                    };
                    let out = self.run_block(&mut run, Block::Backward, 0, &se3_log(&init)?.0, &twist_scale(median_depth(d)), self.cfg.fd_epsilon_twist, self.cfg.max_iters, eval)?;
                    se3_exp(&twist_of(&out.x))
                }
                None => {
                    let (q, g, r, _) = self.joint_blocks(&synthesized.image, Some(&synthesized.valid), current, k, &init, grid.clone(), Block::Backward)?;
                    grid = g;
                    run = r;
                    q
                }
            };
            p_b = inverse(&q);
            append(&mut trace, run.trace);
            iterations += run.iterations;
            if lambda == 0.0 || round + 1 == self.cfg.cycle_rounds.max(1) && cycle_weight == 0.0 {
                break;
            }
            let pb_fixed = p_b;
            let eval = |p: &[f64]| {
                let pose = se3_exp(&twist_of(p));
                coupled(fwd_obj.evaluate(&pose, depth_previous)?, &pose, &pb_fixed)
            };
            let mut run = Run::new();
            let out = self.run_block(&mut run, Block::Pose, 0, &se3_log(&p_f)?.0, &twist_scale(median_depth(depth_previous)), self.cfg.fd_epsilon_twist, self.cfg.max_iters, eval)?;
            p_f = se3_exp(&twist_of(&out.x));
            converged = out.converged;
            append(&mut trace, run.trace);
            iterations += run.iterations;
        }
        let disagreement = cycle_loss(&p_f, &p_b, metric)?;
        let w = LossWeights {
            lambda_cyc: cycle_weight,
            ..self.cfg.weights
        };
        let final_loss = fwd_obj.evaluate(&p_f, depth_previous)?.with_cycle(disagreement, &w)?;
        Ok(SolveResult {
            pose: p_f,
            pose_backward: Some(p_b),
            depth: depth_previous.clone(),
            loss_trace: trace,
            iterations,
            converged,
            final_loss,
            cycle_loss: Some(disagreement),
        })
    }
}

fn append(trace: &mut Vec<TraceEntry>, more: Vec<TraceEntry>) {
    let offset = trace.last().map_or(0, |e| e.segment + 1);
    trace.extend(more.into_iter().map(|mut e| {
        e.segment += offset;
        e
    }));
}

/// [`Solver::solve_pose`] with the reference feature extractor.
pub fn solve_pose(source: &ImageBuffer, target: &ImageBuffer, depth: &DepthMap, k: &CameraIntrinsics, cfg: &SolveConfig) -> Result<SolveResult> {
    Solver::new(cfg.clone())?.solve_pose(source, target, depth, k)
}

/// [`Solver::solve_joint`] with the reference feature extractor.
pub fn solve_joint(source: &ImageBuffer, target: &ImageBuffer, k: &CameraIntrinsics, cfg: &SolveConfig) -> Result<SolveResult> {
    Solver::new(cfg.clone())?.solve_joint(source, target, k)
}

/// [`Solver::solve_cycled`] with the reference feature extractor.
pub fn solve_cycled(
    previous: &ImageBuffer,
    current: &ImageBuffer,
    depth_previous: &DepthMap,
    depth_current: Option<&DepthMap>,
    k: &CameraIntrinsics,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    Solver::new(cfg.clone())?.solve_cycled(previous, current, depth_previous, depth_current, k)
}
