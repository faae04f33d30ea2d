//! Windowing functions for Parzen density estimation and the entropy
//! objective.
//!
//! A windowing function `G` is defined on `[0, inf)`, is twice continuously
//! differentiable, has one-sided derivative `G'(0) = -1`, and its
//! `(1+t)`-weighted first and second derivatives stay bounded. Validation
//! probes these conditions on a log-spaced grid; it reports violations but
//! never aborts, so callers decide what to do with a bad window.

use std::fmt;
use std::sync::Arc;

type WindowFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Number of log-spaced probe points on `(0, PROBE_MAX]`; `t = 0` is probed
/// separately.
const PROBE_POINTS: usize = 10_000;
const PROBE_MIN: f64 = 1e-6;
const PROBE_MAX: f64 = 1e6;

/// Tolerance on `|G'(0) + 1|`.
const NORMALIZATION_TOL: f64 = 1e-8;
/// Step for the one-sided difference at `t = 0` (the domain ends there).
const ONE_SIDED_STEP: f64 = 1e-6;
/// Agreement required between the one-sided difference and `deriv1(0)`.
const ONE_SIDED_TOL: f64 = 1e-4;
/// Relative agreement required between central differences and the claimed
/// derivatives on the probe grid.
const CENTRAL_DIFF_TOL: f64 = 1e-5;
/// Below this magnitude both the claimed derivative and the difference
/// quotient are treated as zero (the Gaussian window underflows long before
/// the grid ends).
const TINY_FLOOR: f64 = 1e-250;

/// A windowing function with its first two derivatives and decay constant.
///
/// Immutable after construction and safe to share across threads.
#[derive(Clone)]
pub struct WindowingFunction {
    name: String,
    eval: WindowFn,
    deriv1: WindowFn,
    deriv2: WindowFn,
    value_at_zero: f64,
    decay_constant: f64,
}

impl fmt::Debug for WindowingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WindowingFunction")
            .field("name", &self.name)
            .field("value_at_zero", &self.value_at_zero)
            .field("decay_constant", &self.decay_constant)
            .finish()
    }
}

impl WindowingFunction {
    /// Build a window from its evaluation map, two derivatives, and a decay
    /// constant declared by the caller.
    pub fn new(
        name: impl Into<String>,
        eval: WindowFn,
        deriv1: WindowFn,
        deriv2: WindowFn,
        decay_constant: f64,
    ) -> Self {
        let value_at_zero = eval(0.0);
        Self {
            name: name.into(),
            eval,
            deriv1,
            deriv2,
            value_at_zero,
            decay_constant,
        }
    }

    /// Like [`WindowingFunction::new`] but with the decay constant estimated
    /// as the grid supremum of the weighted derivative magnitudes.
    pub fn with_grid_constant(
        name: impl Into<String>,
        eval: WindowFn,
        deriv1: WindowFn,
        deriv2: WindowFn,
    ) -> Self {
        let c = grid_decay_constant(deriv1.as_ref(), deriv2.as_ref());
        Self::new(name, eval, deriv1, deriv2, c)
    }

    /// The Gaussian window `G(t) = exp(-t)`.
    ///
    /// Its weighted derivatives `(1+t) e^{-t}` peak at `t = 0`, so the decay
    /// constant is exactly 1.
    pub fn gaussian() -> Self {
        Self::new(
            "gaussian",
            Arc::new(|t: f64| (-t).exp()),
            Arc::new(|t: f64| -(-t).exp()),
            Arc::new(|t: f64| (-t).exp()),
            1.0,
        )
    }

    /// The rational window `G(t) = 1/(1+t)`, a non-exponential decay that
    /// still meets every windowing condition. `(1+t)|G''| = 2/(1+t)^2` peaks
    /// at 2.
    pub fn rational() -> Self {
        Self::new(
            "rational",
            Arc::new(|t: f64| 1.0 / (1.0 + t)),
            Arc::new(|t: f64| {
                let u = 1.0 + t;
                -1.0 / (u * u)
            }),
            Arc::new(|t: f64| {
                let u = 1.0 + t;
                2.0 / (u * u * u)
            }),
            2.0,
        )
    }

    /// Look up a built-in window by its config name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "gaussian" => Some(Self::gaussian()),
            "rational" => Some(Self::rational()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn deriv1(&self, t: f64) -> f64 {
        (self.deriv1)(t)
    }

    pub fn deriv2(&self, t: f64) -> f64 {
        (self.deriv2)(t)
    }

    pub fn value_at_zero(&self) -> f64 {
        self.value_at_zero
    }

    pub fn decay_constant(&self) -> f64 {
        self.decay_constant
    }
}

/// The probe grid: `t = 0` plus `PROBE_POINTS` log-spaced points on
/// `[PROBE_MIN, PROBE_MAX]`.
pub fn probe_grid() -> Vec<f64> {
    let mut g = Vec::with_capacity(PROBE_POINTS + 1);
    g.push(0.0);
    let lo = PROBE_MIN.log10();
    let hi = PROBE_MAX.log10();
    for i in 0..PROBE_POINTS {
        let e = lo + (hi - lo) * i as f64 / (PROBE_POINTS - 1) as f64;
        g.push(10f64.powf(e));
    }
    g
}

/// Grid supremum of `max((1+t)|G'(t)|, (1+t)|G''(t)|)`.
pub fn grid_decay_constant(deriv1: &dyn Fn(f64) -> f64, deriv2: &dyn Fn(f64) -> f64) -> f64 {
    let mut sup: f64 = 0.0;
    for t in probe_grid() {
        let w = 1.0 + t;
        sup = sup.max((w * deriv1(t)).abs());
        sup = sup.max((w * deriv2(t)).abs());
    }
    sup
}

/// The windowing condition a probe violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// `G'(0)` is not -1.
    Normalization,
    /// `(1+t)|G'(t)|` exceeds the declared decay constant.
    WeightedDeriv1Bound,
    /// `(1+t)|G''(t)|` exceeds the declared decay constant.
    WeightedDeriv2Bound,
    /// `deriv1` disagrees with finite differences of `eval`.
    Deriv1Mismatch,
    /// `deriv2` disagrees with finite differences of `eval`.
    Deriv2Mismatch,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Normalization => "derivative normalization G'(0) = -1",
            Condition::WeightedDeriv1Bound => "(1+t)|G'(t)| <= decay constant",
            Condition::WeightedDeriv2Bound => "(1+t)|G''(t)| <= decay constant",
            Condition::Deriv1Mismatch => "deriv1 consistency with finite differences",
            Condition::Deriv2Mismatch => "deriv2 consistency with finite differences",
        };
        f.write_str(s)
    }
}

/// One violated condition together with the worst offending probe point.
#[derive(Debug, Clone)]
pub struct Violation {
    pub condition: Condition,
    pub worst_t: f64,
    /// Observed magnitude at `worst_t` (excess, mismatch, or raw value
    /// depending on the condition).
    pub observed: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "violated: {} (worst at t = {:.6e}, observed {:.6e})",
            self.condition, self.worst_t, self.observed
        )
    }
}

/// Validation outcome: a possibly empty list of violations.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "no violations")
        } else {
            for v in &self.violations {
                writeln!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

/// Tracks the worst excess over the grid for one condition.
struct WorstCase {
    excess: f64,
    t: f64,
    observed: f64,
}

impl WorstCase {
    fn new() -> Self {
        Self {
            excess: 0.0,
            t: 0.0,
            observed: 0.0,
        }
    }

    fn update(&mut self, excess: f64, t: f64, observed: f64) {
        if excess > self.excess {
            self.excess = excess;
            self.t = t;
            self.observed = observed;
        }
    }

    fn into_violation(self, condition: Condition) -> Option<Violation> {
        (self.excess > 0.0).then_some(Violation {
            condition,
            worst_t: self.t,
            observed: self.observed,
        })
    }
}

/// Relative deviation between a claimed derivative and the best central
/// difference over a ladder of steps. Trying several steps makes one rule
/// work for both exponential decays (which want small absolute steps) and
/// rational decays (which want steps proportional to `1+t`).
fn central_diff_deviation(
    eval: &dyn Fn(f64) -> f64,
    t: f64,
    exact: f64,
    order: u8,
    steps: &[f64],
) -> f64 {
    let mut best = f64::INFINITY;
    for &rel in steps {
        let s = rel * (1.0 + t);
        if t - s <= 0.0 {
            continue;
        }
        let fd = match order {
            1 => (eval(t + s) - eval(t - s)) / (2.0 * s),
            _ => (eval(t + s) - 2.0 * eval(t) + eval(t - s)) / (s * s),
        };
        if exact.abs() <= TINY_FLOOR && fd.abs() <= TINY_FLOOR {
            return 0.0;
        }
        let dev = (fd - exact).abs() / exact.abs().max(TINY_FLOOR);
        best = best.min(dev);
    }
    if best.is_finite() {
        best
    } else {
        0.0 // no admissible step (t too close to 0); skip the probe
    }
}

/// Validate a window against the probe grid. The report is empty iff the
/// normalization, weighted-derivative bounds, and derivative-consistency
/// checks all hold.
pub fn validate_window(w: &WindowingFunction) -> ValidationReport {
    let mut violations = Vec::new();

    // Normalization at zero, checked on deriv1 directly and against a
    // one-sided difference of eval.
    let d0 = w.deriv1(0.0);
    if !((d0 + 1.0).abs() <= NORMALIZATION_TOL) {
        violations.push(Violation {
            condition: Condition::Normalization,
            worst_t: 0.0,
            observed: d0,
        });
    }
    let fd0 = (w.eval(ONE_SIDED_STEP) - w.eval(0.0)) / ONE_SIDED_STEP;
    let mut worst_d1 = WorstCase::new();
    let dev0 = (fd0 - d0).abs() / d0.abs().max(1.0);
    if !(dev0 <= ONE_SIDED_TOL) {
        worst_d1.update(dev0 / ONE_SIDED_TOL, 0.0, dev0);
    }

    let bound = w.decay_constant() * (1.0 + 1e-12) + 1e-300;
    let mut worst_b1 = WorstCase::new();
    let mut worst_b2 = WorstCase::new();
    let mut worst_d2 = WorstCase::new();
    let d1_steps = [1e-7, 1e-6, 1e-5, 1e-4];
    let d2_steps = [3e-6, 1e-5, 1e-4, 1e-3];

    for t in probe_grid() {
        let weight = 1.0 + t;
        let d1 = w.deriv1(t);
        let d2 = w.deriv2(t);
        let w1 = (weight * d1).abs();
        let w2 = (weight * d2).abs();
        if !(w1 <= bound) {
            worst_b1.update(w1 - bound, t, w1);
        }
        if !(w2 <= bound) {
            worst_b2.update(w2 - bound, t, w2);
        }
        if t > 0.0 {
            let dev1 = central_diff_deviation(w.eval.as_ref(), t, d1, 1, &d1_steps);
            if !(dev1 <= CENTRAL_DIFF_TOL) {
                worst_d1.update(dev1, t, dev1);
            }
            // Second differences below t ~ 1e-3 are rounding-dominated for
            // any step that keeps t - s positive; the one-sided check at
            // t = 0 covers that neighborhood.
            if t >= 1e-3 {
                let dev2 = central_diff_deviation(w.eval.as_ref(), t, d2, 2, &d2_steps);
                if !(dev2 <= CENTRAL_DIFF_TOL) {
                    worst_d2.update(dev2, t, dev2);
                }
            }
        }
    }

    violations.extend(worst_b1.into_violation(Condition::WeightedDeriv1Bound));
    violations.extend(worst_b2.into_violation(Condition::WeightedDeriv2Bound));
    violations.extend(worst_d1.into_violation(Condition::Deriv1Mismatch));
    violations.extend(worst_d2.into_violation(Condition::Deriv2Mismatch));

    ValidationReport { violations }
}
