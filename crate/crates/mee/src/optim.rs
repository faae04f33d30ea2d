//! Projected gradient descent over the coefficient ball.
//!
//! One engine serves the entropy objective, the least-squares baseline, and
//! the oracle's population targets. Each iteration takes a trial step
//! (spectral Barzilai-Borwein after the first), projects onto the ball, and
//! backtracks until the Armijo sufficient-decrease condition holds, so
//! accepted steps never increase the objective.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::MeeError;
use crate::hypothesis::{norm2, project_to_ball};
use crate::seed::{child_seed, tag};

/// Settings for the multi-start projected-gradient minimizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    /// Number of restarts; the origin is always restart 0.
    pub restarts: u32,
    pub max_iterations: u32,
    /// Convergence threshold on the projected-gradient norm.
    pub gradient_tolerance: f64,
    /// Step tried on the first iteration of each restart.
    pub initial_step: f64,
    /// Backtracking shrink factor, in (0, 1).
    pub shrink: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Seeds the non-origin restart points.
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iterations: 2000,
            gradient_tolerance: 1e-8,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            seed: 0,
        }
    }
}

impl OptimizerSettings {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: u32) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn validate(&self) -> Result<(), MeeError> {
        if self.restarts < 1 {
            return Err(MeeError::invalid("restarts", "must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(MeeError::invalid("max_iterations", "must be positive"));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(MeeError::invalid("gradient_tolerance", "must be positive"));
        }
        if !(self.initial_step > 0.0) {
            return Err(MeeError::invalid("initial_step", "must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(MeeError::invalid("shrink", "must lie in (0, 1)"));
        }
        if !(self.armijo > 0.0) {
            return Err(MeeError::invalid("armijo", "must be positive"));
        }
        Ok(())
    }
}

/// Result of one multi-start minimization.
#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub point: Vec<f64>,
    pub objective: f64,
    pub iterations: u64,
    pub restart: u32,
    pub converged: bool,
    /// Accepted objective values of the winning restart, first entry is the
    /// starting value. Non-increasing by construction.
    pub objective_trace: Vec<f64>,
}

struct RestartOutcome {
    point: Vec<f64>,
    objective: f64,
    iterations: u64,
    converged: bool,
    trace: Vec<f64>,
}

pub(crate) type ObjectiveFn<'a> = &'a dyn Fn(&[f64]) -> Result<f64, MeeError>;
pub(crate) type GradientFn<'a> = &'a dyn Fn(&[f64]) -> Result<Vec<f64>, MeeError>;

const MIN_STEP: f64 = 1e-18;
const MAX_STEP: f64 = 1e12;
const MAX_BACKTRACKS: u32 = 80;

/// Minimize `f` over the Euclidean ball of `radius` in dimension `d`.
///
/// Objective evaluations may fail (e.g. a nonpositive information
/// potential); a failure during line search is treated as an infinitely bad
/// point and the step shrinks. A failure at every restart's initial point
/// aborts with that error.
pub(crate) fn minimize_in_ball(
    d: usize,
    radius: f64,
    settings: &OptimizerSettings,
    f: ObjectiveFn<'_>,
    grad: GradientFn<'_>,
) -> Result<MinimizeOutcome, MeeError> {
    settings.validate()?;
    let mut best: Option<(RestartOutcome, u32)> = None;
    let mut first_error: Option<MeeError> = None;

    for r in 0..settings.restarts {
        let x0 = if r == 0 {
            vec![0.0; d]
        } else {
            random_ball_point(
                d,
                radius,
                child_seed(settings.seed, &[tag::RESTART, r as u64]),
            )
        };
        match run_restart(x0, radius, settings, f, grad) {
            Ok(out) => {
                let better = match &best {
                    None => true,
                    Some((cur, _)) => {
                        let key_new = (out.objective, norm2(&out.point));
                        let key_cur = (cur.objective, norm2(&cur.point));
                        match key_new.0.total_cmp(&key_cur.0) {
                            std::cmp::Ordering::Less => true,
                            std::cmp::Ordering::Greater => false,
                            std::cmp::Ordering::Equal => {
                                key_new.1.total_cmp(&key_cur.1) == std::cmp::Ordering::Less
                            }
                        }
                    }
                };
                if better {
                    best = Some((out, r));
                }
            }
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }

    match best {
        Some((out, restart)) => Ok(MinimizeOutcome {
            point: out.point,
            objective: out.objective,
            iterations: out.iterations,
            restart,
            converged: out.converged,
            objective_trace: out.trace,
        }),
        None => Err(first_error.unwrap_or_else(|| MeeError::invalid("restarts", "none executed"))),
    }
}

pub(crate) fn random_ball_point(d: usize, radius: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // isotropic direction from normals, radius from u^(1/d)
    let mut v: Vec<f64> = (0..d)
        .map(|_| {
            // Box-Muller keeps us off rand_distr here and fully deterministic
            let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect();
    let n = norm2(&v);
    if n == 0.0 {
        return vec![0.0; d];
    }
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / d as f64);
    for c in &mut v {
        *c *= r / n;
    }
    v
}

fn run_restart(
    mut x: Vec<f64>,
    radius: f64,
    settings: &OptimizerSettings,
    f: ObjectiveFn<'_>,
    grad: GradientFn<'_>,
) -> Result<RestartOutcome, MeeError> {
    let mut fx = f(&x)?;
    let mut trace = vec![fx];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None; // (x, grad) of previous iterate
    let mut last_step = settings.initial_step;
    let mut converged = false;
    let mut iterations = 0u64;

    for _ in 0..settings.max_iterations {
        let g = grad(&x)?;
        // projected-gradient mapping with unit step; zero iff stationary
        let pg: f64 = {
            let moved: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - gi).collect();
            let proj = project_to_ball(&moved, radius);
            x.iter()
                .zip(&proj)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        if pg <= settings.gradient_tolerance {
            converged = true;
            break;
        }

        let mut step = match &prev {
            None => settings.initial_step,
            Some((px, pgrad)) => {
                let mut sy = 0.0;
                let mut ss = 0.0;
                for k in 0..x.len() {
                    let s = x[k] - px[k];
                    let y = g[k] - pgrad[k];
                    sy += s * y;
                    ss += s * s;
                }
                if sy > 0.0 && ss > 0.0 {
                    (ss / sy).clamp(MIN_STEP, MAX_STEP)
                } else {
                    (last_step * 2.0).clamp(MIN_STEP, MAX_STEP)
                }
            }
        };

        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let candidate: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
            let candidate = project_to_ball(&candidate, radius);
            let dir_dot: f64 = g
                .iter()
                .zip(candidate.iter().zip(&x))
                .map(|(gi, (ci, xi))| gi * (ci - xi))
                .sum();
            if dir_dot >= 0.0 {
                // projection removed all descent at this step size
                step *= settings.shrink;
                if step < MIN_STEP {
                    break;
                }
                continue;
            }
            let fc = match f(&candidate) {
                Ok(v) if v.is_finite() => v,
                _ => {
                    step *= settings.shrink;
                    if step < MIN_STEP {
                        break;
                    }
                    continue;
                }
            };
            if fc <= fx + settings.armijo * dir_dot {
                prev = Some((std::mem::replace(&mut x, candidate), g.clone()));
                fx = fc;
                trace.push(fx);
                last_step = step;
                accepted = true;
                break;
            }
            step *= settings.shrink;
            if step < MIN_STEP {
                break;
            }
        }
        iterations += 1;
        if !accepted {
            // no acceptable step left; treat as converged-as-far-as-possible
            break;
        }
    }

    Ok(RestartOutcome {
        point: x,
        objective: fx,
        iterations,
        converged,
        trace,
    })
}
