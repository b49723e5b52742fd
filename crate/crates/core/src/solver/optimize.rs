//! Derivative-free-input minimization: central-difference gradients feed a
//! BFGS or momentum descent with backtracking line search, with a compass
//! search over the coordinate axes when no gradient step decreases `f`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Descent rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Descent {
    /// Quasi-Newton inverse-Hessian updates.
    #[default]
    Bfgs,
    /// Heavy-ball gradient descent.
    Momentum,
}

/// Central differences `(f(x + e_i) - f(x - e_i)) / 2 e_i` for every
/// coordinate. Probes run in parallel and are combined in coordinate order.
pub fn numeric_gradient<F>(f: &F, x: &[f64], eps: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if eps.len() != x.len() || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidConfig("finite-difference steps must be positive, one per parameter".into()));
    }
    let probes: Vec<f64> = (0..2 * x.len())
        .into_par_iter()
        .map(|k| {
            let (i, sign) = (k / 2, if k % 2 == 0 { 1.0 } else { -1.0 });
            let mut p = x.to_vec();
            p[i] += sign * eps[i];
            f(&p)
        })
        .collect();
    if probes.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    Ok((0..x.len()).map(|i| (probes[2 * i] - probes[2 * i + 1]) / (2.0 * eps[i])).collect())
}

/// Whether every probe of the last gradient returned exactly `f(x)`.
fn probes_flat<F>(f: &F, x: &[f64], eps: &[f64], fx: f64) -> bool
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    (0..2 * x.len()).into_par_iter().all(|k| {
        let mut p = x.to_vec();
        p[k / 2] += if k % 2 == 0 { eps[k / 2] } else { -eps[k / 2] };
        f(&p) == fx
    })
}

#[derive(Clone, Copy, Debug)]
pub struct MinimizeOptions {
    pub descent: Descent,
    pub max_iters: usize,
    pub step_size: f64,
    pub momentum: f64,
    pub tol: f64,
    pub window: usize,
    pub max_halvings: usize,
}

#[derive(Clone, Debug)]
pub struct MinimizeOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    /// Objective after every accepted step, starting with the initial value.
    pub values: Vec<f64>,
    /// Parameters after every accepted step, aligned with `values`.
    pub points: Vec<Vec<f64>>,
    pub converged: bool,
    /// No step was possible and every probe equalled the current value.
    pub flat: bool,
}

const ARMIJO_C: f64 = 1e-4;
/// After a failed line search the gradient is re-probed with steps this much
/// wider, up to `MAX_WIDENINGS` times in a row.
const WIDEN_FACTOR: f64 = 10.0;
const MAX_WIDENINGS: usize = 3;
/// Compass-search scales, as multiples of the finite-difference steps,
/// tried largest first once gradient steps are exhausted.
const COMPASS_SCALES: [f64; 4] = [1000.0, 100.0, 10.0, 1.0];

/// The best of `x +- s eps_i e_i` over every axis `i`, for the largest scale
/// `s` that improves on `fx`. Ties go to the lower probe index.
fn compass_step<F>(f: &F, x: &[f64], eps: &[f64], fx: f64) -> Option<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    for scale in COMPASS_SCALES {
        let probes: Vec<(Vec<f64>, f64)> = (0..2 * x.len())
            .into_par_iter()
            .map(|k| {
                let mut p = x.to_vec();
                p[k / 2] += if k % 2 == 0 { scale * eps[k / 2] } else { -scale * eps[k / 2] };
                let v = f(&p);
                (p, v)
            })
            .collect();
        let best = probes
            .into_iter()
            .filter(|(_, v)| v.is_finite() && *v < fx)
            .reduce(|a, b| if b.1 < a.1 { b } else { a });
        if best.is_some() {
            return best;
        }
    }
    None
}

/// Minimize `f` from `x0`. `f` must return a non-finite value (typically
/// `f64::INFINITY`) where it is undefined; such trial points are rejected.
pub fn minimize<F>(f: &F, x0: &[f64], eps: &[f64], opts: &MinimizeOptions) -> Result<MinimizeOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::Diverged("objective is not finite at the initial point".into()));
    }
    let mut out = MinimizeOutcome {
        x: x.clone(),
        f: fx,
        values: vec![fx],
        points: vec![x.clone()],
        converged: false,
        flat: false,
    };
    if n == 0 {
        out.converged = true;
        return Ok(out);
    }
    let mut g = match numeric_gradient(f, &x, eps) {
        Ok(g) => g,
        Err(Error::NonFiniteObjective) => return Ok(out),
        Err(e) => return Err(e),
    };
    let mut h: Vec<f64> = Vec::new();
    // whether the curvature model / velocity holds no history
    let mut fresh = true;
    let mut velocity = vec![0.0; n];
    let mut widen = 0;
    for _ in 0..opts.max_iters {
        let gnorm = norm(&g);
        if gnorm == 0.0 {
            out.flat = probes_flat(f, &x, eps, fx);
            out.converged = !out.flat;
            log::debug!("zero gradient after {} steps at f = {fx}", out.values.len() - 1);
            break;
        }
        let mut accepted = None;
        loop {
            if fresh {
                h = scaled_identity(n, opts.step_size / gnorm);
                velocity.iter_mut().for_each(|v| *v = 0.0);
            }
            let mut dir: Vec<f64> = match opts.descent {
                Descent::Bfgs => (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect(),
                Descent::Momentum => (0..n).map(|i| opts.momentum * velocity[i] - opts.step_size * g[i]).collect(),
            };
            if dot(&dir, &g) >= 0.0 {
                dir = g.iter().map(|v| -v * opts.step_size / gnorm).collect();
            }
            let slope = dot(&dir, &g);
            let mut alpha = 1.0;
            for _ in 0..=opts.max_halvings {
                let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
                let ft = f(&trial);
                if ft.is_finite() && ft < fx && ft <= fx + ARMIJO_C * alpha * slope {
                    accepted = Some((trial, ft, alpha, dir.clone()));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() || fresh {
                break;
            }
            fresh = true;
        }
        let Some((xn, fnew, alpha, dir)) = accepted else {
            if widen < MAX_WIDENINGS {
                // the local gradient sees interpolation kinks; probe wider
                widen += 1;
                let wide: Vec<f64> = eps.iter().map(|e| e * WIDEN_FACTOR.powi(widen as i32)).collect();
                match numeric_gradient(f, &x, &wide) {
                    Ok(gw) => {
                        g = gw;
                        fresh = true;
                        continue;
                    }
                    Err(Error::NonFiniteObjective) => {}
                    Err(e) => return Err(e),
                }
            }
            let Some((xn, fnew)) = compass_step(f, &x, eps, fx) else {
                out.flat = probes_flat(f, &x, eps, fx);
                out.converged = !out.flat;
                log::debug!("no descent after {} steps at f = {fx}, |g| = {gnorm}", out.values.len() - 1);
                break;
            };
            // a kink blocks gradient steps; take the axis move and restart the
            // curvature model from there
            widen = 0;
            g = match numeric_gradient(f, &xn, eps) {
                Ok(v) => v,
                Err(Error::NonFiniteObjective) => vec![0.0; n],
                Err(e) => return Err(e),
            };
            fresh = true;
            x = xn;
            fx = fnew;
            out.values.push(fx);
            out.points.push(x.clone());
            if window_converged(&out.values, opts) {
                out.converged = true;
                break;
            }
            continue;
        };
        widen = 0;
        let gn = match numeric_gradient(f, &xn, eps) {
            Ok(v) => v,
            Err(Error::NonFiniteObjective) => {
                x = xn;
                fx = fnew;
                out.values.push(fx);
                out.points.push(x.clone());
                break;
            }
            Err(e) => return Err(e),
        };
        let s: Vec<f64> = dir.iter().map(|d| alpha * d).collect();
        match opts.descent {
            Descent::Bfgs => {
                let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * norm(&s) * norm(&y) {
                    if fresh {
                        h = scaled_identity(n, sy / dot(&y, &y));
                    }
                    bfgs_update(&mut h, &s, &y, sy);
                    fresh = false;
                }
            }
            Descent::Momentum => {
                velocity = s.clone();
                fresh = false;
            }
        }
        x = xn;
        fx = fnew;
        g = gn;
        out.values.push(fx);
        out.points.push(x.clone());
        if window_converged(&out.values, opts) {
            out.converged = true;
            break;
        }
    }
    out.x = x;
    out.f = fx;
    Ok(out)
}

/// Relative decrease over the last `window` accepted steps at most `tol`.
fn window_converged(values: &[f64], opts: &MinimizeOptions) -> bool {
    let k = values.len() - 1;
    if k < opts.window {
        return false;
    }
    let (old, now) = (values[k - opts.window], values[k]);
    let done = old - now <= opts.tol * old.abs();
    if done {
        log::debug!("converged after {k} steps at f = {now}");
    }
    done
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn scaled_identity(n: usize, s: f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = s;
    }
    m
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
