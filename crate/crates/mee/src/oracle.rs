//! Ground-truth distribution models and Monte-Carlo / closed-form evaluation
//! of the population functionals the learner is judged against: the noise
//! second moment, variance distances, the information error and its
//! symmetrized least-squares companion, pairwise excess kernels, and the
//! best-in-class target predictors.
//!
//! Determinism: every estimator draws from a `ChaCha8` stream seeded by the
//! caller, so identical `(seed, count)` arguments reproduce identical
//! estimates bit for bit. Pair-based estimators use disjoint pairs, giving
//! independent terms and honest standard errors.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};

use crate::error::MeeError;
use crate::hypothesis::{HypothesisSpace, Predictor};
use crate::learner::Sample;
use crate::optim::{minimize_in_ball, OptimizerSettings};
use crate::stats::{NeumaierSum, RunningMoments};
use crate::windowing::WindowingFunction;

/// Marginal law of the explanatory variable.
#[derive(Debug, Clone)]
pub enum XLaw {
    /// Uniform on `[-1, 1]^dim`.
    Uniform { dim: usize },
}

impl XLaw {
    pub fn dim(&self) -> usize {
        match self {
            XLaw::Uniform { dim } => *dim,
        }
    }

    pub(crate) fn draw_into(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        out.clear();
        match self {
            XLaw::Uniform { dim } => {
                for _ in 0..*dim {
                    out.push(2.0 * rng.random::<f64>() - 1.0);
                }
            }
        }
    }
}

/// Boxed regression map used by [`RegressionFn::Custom`].
pub type RegressionValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The regression function.
#[derive(Clone)]
pub enum RegressionFn {
    /// `intercept + slope * x_1`.
    Affine { intercept: f64, slope: f64 },
    /// `sin(pi x_1)`.
    SinePi,
    /// Arbitrary function with a caller-supplied sup-norm bound.
    Custom {
        name: String,
        f: RegressionValueFn,
        sup: f64,
    },
}

impl fmt::Debug for RegressionFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl RegressionFn {
    pub fn name(&self) -> String {
        match self {
            RegressionFn::Affine { intercept, slope } => format!("affine({intercept},{slope})"),
            RegressionFn::SinePi => "sine".to_string(),
            RegressionFn::Custom { name, .. } => name.clone(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            RegressionFn::Affine { intercept, slope } => intercept + slope * x[0],
            RegressionFn::SinePi => (std::f64::consts::PI * x[0]).sin(),
            RegressionFn::Custom { f, .. } => f(x),
        }
    }

    /// Sup norm over the input domain.
    pub fn sup(&self) -> f64 {
        match self {
            RegressionFn::Affine { intercept, slope } => intercept.abs() + slope.abs(),
            RegressionFn::SinePi => 1.0,
            RegressionFn::Custom { sup, .. } => *sup,
        }
    }
}

/// Conditional noise law with `E[eps | X] = 0`.
#[derive(Debug, Clone)]
pub enum NoiseLaw {
    None,
    Gaussian {
        sigma: f64,
    },
    /// Uniform on `[-halfwidth, halfwidth]`; outputs stay bounded.
    Uniform {
        halfwidth: f64,
    },
    /// Student-t with `nu` degrees of freedom; heavy tailed for small `nu`.
    StudentT {
        nu: f64,
    },
}

impl NoiseLaw {
    pub fn name(&self) -> String {
        match self {
            NoiseLaw::None => "none".to_string(),
            NoiseLaw::Gaussian { sigma } => format!("gaussian({sigma})"),
            NoiseLaw::Uniform { halfwidth } => format!("uniform({halfwidth})"),
            NoiseLaw::StudentT { nu } => format!("student_t({nu})"),
        }
    }

    /// Exact noise variance when finite.
    pub fn variance(&self) -> Option<f64> {
        match self {
            NoiseLaw::None => Some(0.0),
            NoiseLaw::Gaussian { sigma } => Some(sigma * sigma),
            NoiseLaw::Uniform { halfwidth } => Some(halfwidth * halfwidth / 3.0),
            NoiseLaw::StudentT { nu } => (*nu > 2.0).then(|| nu / (nu - 2.0)),
        }
    }
}

/// Stand-in for "all moments finite" when schedules only consume
/// `min(q - 1, 3)`.
const UNBOUNDED_MOMENT_Q: f64 = 1e9;

enum NoiseSampler {
    None,
    Gaussian(Normal<f64>),
    Uniform { halfwidth: f64 },
    StudentT(StudentT<f64>),
}

/// Synthetic data-generating law: X marginal, regression function, and noise.
///
/// `moment_q` records the largest usable moment exponent (for Student-t
/// noise, slightly below the degrees of freedom); `bound_m` is set when the
/// outputs are almost surely bounded.
pub struct DistributionModel {
    x_law: XLaw,
    regression: RegressionFn,
    noise: NoiseLaw,
    sampler: NoiseSampler,
    pub moment_q: f64,
    pub bound_m: Option<f64>,
}

impl fmt::Debug for DistributionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DistributionModel")
            .field("x_law", &self.x_law)
            .field("regression", &self.regression.name())
            .field("noise", &self.noise.name())
            .field("moment_q", &self.moment_q)
            .field("bound_m", &self.bound_m)
            .finish()
    }
}

impl DistributionModel {
    pub fn new(x_law: XLaw, regression: RegressionFn, noise: NoiseLaw) -> Result<Self, MeeError> {
        let sampler = match &noise {
            NoiseLaw::None => NoiseSampler::None,
            NoiseLaw::Gaussian { sigma } => {
                if !(*sigma > 0.0) {
                    return Err(MeeError::invalid("sigma", "must be positive"));
                }
                NoiseSampler::Gaussian(
                    Normal::new(0.0, *sigma)
                        .map_err(|e| MeeError::invalid("sigma", e.to_string()))?,
                )
            }
            NoiseLaw::Uniform { halfwidth } => {
                if !(*halfwidth > 0.0) {
                    return Err(MeeError::invalid("halfwidth", "must be positive"));
                }
                NoiseSampler::Uniform {
                    halfwidth: *halfwidth,
                }
            }
            NoiseLaw::StudentT { nu } => {
                if !(*nu > 2.0) {
                    return Err(MeeError::invalid(
                        "nu",
                        "need nu > 2 so the noise has finite variance",
                    ));
                }
                NoiseSampler::StudentT(
                    StudentT::new(*nu).map_err(|e| MeeError::invalid("nu", e.to_string()))?,
                )
            }
        };
        let sup = regression.sup();
        let (moment_q, bound_m) = match &noise {
            NoiseLaw::None => (UNBOUNDED_MOMENT_Q, Some(sup)),
            NoiseLaw::Uniform { halfwidth } => (UNBOUNDED_MOMENT_Q, Some(sup + halfwidth)),
            NoiseLaw::Gaussian { .. } => (UNBOUNDED_MOMENT_Q, None),
            NoiseLaw::StudentT { nu } => (nu - 0.1, None),
        };
        Ok(Self {
            x_law,
            regression,
            noise,
            sampler,
            moment_q,
            bound_m,
        })
    }

    pub fn x_law(&self) -> &XLaw {
        &self.x_law
    }

    pub fn regression(&self) -> &RegressionFn {
        &self.regression
    }

    pub fn noise(&self) -> &NoiseLaw {
        &self.noise
    }

    pub fn input_dim(&self) -> usize {
        self.x_law.dim()
    }

    pub fn regression_value(&self, x: &[f64]) -> f64 {
        self.regression.value(x)
    }

    fn draw_noise(&self, rng: &mut ChaCha8Rng) -> f64 {
        match &self.sampler {
            NoiseSampler::None => 0.0,
            NoiseSampler::Gaussian(n) => n.sample(rng),
            NoiseSampler::Uniform { halfwidth } => halfwidth * (2.0 * rng.random::<f64>() - 1.0),
            NoiseSampler::StudentT(t) => t.sample(rng),
        }
    }

    /// Draw one observation: x coordinates first, then the noise.
    fn draw_observation(&self, rng: &mut ChaCha8Rng, xbuf: &mut Vec<f64>) -> f64 {
        self.x_law.draw_into(rng, xbuf);
        self.regression_value(xbuf) + self.draw_noise(rng)
    }
}

/// Draw `m` i.i.d. observations, deterministic in the seed.
pub fn generate_sample(model: &DistributionModel, m: usize, seed: u64) -> Result<Sample, MeeError> {
    if m == 0 {
        return Err(MeeError::invalid("m", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    let mut buf = Vec::with_capacity(model.input_dim());
    for _ in 0..m {
        let y = model.draw_observation(&mut rng, &mut buf);
        xs.push(buf.clone());
        ys.push(y);
    }
    Sample::new(xs, ys)
}

/// A Monte-Carlo estimate with its standard error and the number of
/// independent terms (draws or disjoint pairs) behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub value: f64,
    pub std_error: f64,
    pub count: u64,
}

fn require_count(name: &'static str, n: usize) -> Result<(), MeeError> {
    if n < 1000 {
        return Err(MeeError::invalid(name, "need at least 1000 MC terms"));
    }
    Ok(())
}

/// Linear part of a predictor (offset excluded). Pair differences built from
/// it are exactly invariant under constant shifts of the predictor.
fn linear_value(
    space: &HypothesisSpace,
    p: &Predictor,
    x: &[f64],
    buf: &mut Vec<f64>,
) -> Result<f64, MeeError> {
    space.dictionary().eval_features(x, buf)?;
    if p.coefficients.len() != buf.len() {
        return Err(MeeError::DimensionMismatch {
            expected: buf.len(),
            got: p.coefficients.len(),
        });
    }
    let mut acc = 0.0;
    for (c, v) in p.coefficients.iter().zip(buf.iter()) {
        acc += c * v;
    }
    Ok(acc)
}

/// Expected squared noise `E[(y - f_rho(x))^2]`, the irreducible half of the
/// symmetrized least-squares error.
pub fn noise_variance(
    model: &DistributionModel,
    n_mc: usize,
    seed: u64,
) -> Result<MCEstimate, MeeError> {
    require_count("n_mc", n_mc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = Vec::new();
    let mut mom = RunningMoments::new();
    for _ in 0..n_mc {
        let y = model.draw_observation(&mut rng, &mut buf);
        let e = y - model.regression_value(&buf);
        mom.push(e * e);
    }
    Ok(MCEstimate {
        value: mom.mean(),
        std_error: mom.std_error(),
        count: mom.count(),
    })
}

/// Monte-Carlo estimate of `Var[f(X) - f_rho(X)]` over X draws: mean of
/// squares minus square of mean, with a delta-method standard error.
pub fn variance_distance(
    f: &Predictor,
    space: &HypothesisSpace,
    model: &DistributionModel,
    n_mc: usize,
    seed: u64,
) -> Result<MCEstimate, MeeError> {
    require_count("n_mc", n_mc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xbuf = Vec::new();
    let mut vals = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        model.x_law.draw_into(&mut rng, &mut xbuf);
        let v = space.evaluate(f, &xbuf)? - model.regression_value(&xbuf);
        vals.push(v);
    }
    Ok(variance_estimate(&vals))
}

/// Plug-in variance of `vals` with a delta-method standard error.
fn variance_estimate(vals: &[f64]) -> MCEstimate {
    let n = vals.len() as f64;
    let mut sum = NeumaierSum::new();
    for &v in vals {
        sum.add(v);
    }
    let mean = sum.value() / n;
    let mut m2 = NeumaierSum::new();
    let mut m4 = NeumaierSum::new();
    for &v in vals {
        let d = v - mean;
        m2.add(d * d);
        m4.add(d * d * d * d);
    }
    let var = (m2.value() / n).max(0.0);
    let mu4 = m4.value() / n;
    let se = ((mu4 - var * var).max(0.0) / n).sqrt();
    MCEstimate {
        value: var,
        std_error: se,
        count: vals.len() as u64,
    }
}

/// Streams pair differences `D = (y - y') - (f(x) - f(x'))` for the linear
/// part of a predictor; constants cancel identically.
struct PairSampler<'a> {
    model: &'a DistributionModel,
    space: &'a HypothesisSpace,
    f: &'a Predictor,
    rng: ChaCha8Rng,
    xbuf: Vec<f64>,
    fbuf: Vec<f64>,
}

impl<'a> PairSampler<'a> {
    fn new(
        model: &'a DistributionModel,
        space: &'a HypothesisSpace,
        f: &'a Predictor,
        seed: u64,
    ) -> Self {
        Self {
            model,
            space,
            f,
            rng: ChaCha8Rng::seed_from_u64(seed),
            xbuf: Vec::new(),
            fbuf: Vec::new(),
        }
    }

    fn next_diff(&mut self) -> Result<f64, MeeError> {
        let y1 = self.model.draw_observation(&mut self.rng, &mut self.xbuf);
        let l1 = linear_value(self.space, self.f, &self.xbuf, &mut self.fbuf)?;
        let y2 = self.model.draw_observation(&mut self.rng, &mut self.xbuf);
        let l2 = linear_value(self.space, self.f, &self.xbuf, &mut self.fbuf)?;
        Ok((y1 - y2) - (l1 - l2))
    }
}

/// Information error: disjoint-pair Monte-Carlo average of
/// `-h^2 G(D^2 / (2 h^2))`.
pub fn information_error(
    f: &Predictor,
    space: &HypothesisSpace,
    model: &DistributionModel,
    h: f64,
    window: &WindowingFunction,
    n_pairs: usize,
    seed: u64,
) -> Result<MCEstimate, MeeError> {
    require_count("n_pairs", n_pairs)?;
    let h2 = h * h;
    let inv = 1.0 / (2.0 * h2);
    let mut pairs = PairSampler::new(model, space, f, seed);
    let mut mom = RunningMoments::new();
    for _ in 0..n_pairs {
        let d = pairs.next_diff()?;
        mom.push(-h2 * window.eval(d * d * inv));
    }
    Ok(MCEstimate {
        value: mom.mean(),
        std_error: mom.std_error(),
        count: mom.count(),
    })
}

/// All-pairs variant of [`information_error`]: draws `n_obs` observations
/// and averages the kernel over every ordered off-diagonal pair. Kept as a
/// cross-check; the standard error comes from the variance of the
/// per-observation conditional means.
pub fn information_error_all_pairs(
    f: &Predictor,
    space: &HypothesisSpace,
    model: &DistributionModel,
    h: f64,
    window: &WindowingFunction,
    n_obs: usize,
    seed: u64,
) -> Result<MCEstimate, MeeError> {
    require_count("n_obs", n_obs)?;
    let h2 = h * h;
    let inv = 1.0 / (2.0 * h2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xbuf = Vec::new();
    let mut fbuf = Vec::new();
    let mut diffs = Vec::with_capacity(n_obs);
    for _ in 0..n_obs {
        let y = model.draw_observation(&mut rng, &mut xbuf);
        let l = linear_value(space, f, &xbuf, &mut fbuf)?;
        diffs.push(y - l);
    }
    let mut total = NeumaierSum::new();
    let mut row_means = Vec::with_capacity(n_obs);
    for i in 0..n_obs {
        let mut row = NeumaierSum::new();
        for j in 0..n_obs {
            if i == j {
                continue;
            }
            let d = diffs[i] - diffs[j];
            row.add(-h2 * window.eval(d * d * inv));
        }
        let mean_i = row.value() / (n_obs - 1) as f64;
        row_means.push(mean_i);
        total.add(mean_i);
    }
    let value = total.value() / n_obs as f64;
    let mut g = RunningMoments::new();
    for &m in &row_means {
        g.push(m);
    }
    // var(U) ~ 4 sigma_1^2 / n for a degree-2 U-statistic
    let se = (4.0 * g.sample_variance() / n_obs as f64).sqrt();
    Ok(MCEstimate {
        value,
        std_error: se,
        count: n_obs as u64,
    })
}

/// Symmetrized least-squares error: disjoint-pair average of `D^2`.
pub fn sym_ls_error(
    f: &Predictor,
    space: &HypothesisSpace,
    model: &DistributionModel,
    n_pairs: usize,
    seed: u64,
) -> Result<MCEstimate, MeeError> {
    require_count("n_pairs", n_pairs)?;
    let mut pairs = PairSampler::new(model, space, f, seed);
    let mut mom = RunningMoments::new();
    for _ in 0..n_pairs {
        let d = pairs.next_diff()?;
        mom.push(d * d);
    }
    Ok(MCEstimate {
        value: mom.mean(),
        std_error: mom.std_error(),
        count: mom.count(),
    })
}

/// The pairwise excess kernel
/// `-h^2 G(D_f^2/(2h^2)) + h^2 G(D_rho^2/(2h^2))`, where `D_f` uses the
/// predictor and `D_rho` the regression function. Symmetric in its two
/// observations, zero on the diagonal, and identically zero when the
/// predictor matches the regression function.
pub fn u_kernel(
    f: &Predictor,
    space: &HypothesisSpace,
    z: (&[f64], f64),
    zp: (&[f64], f64),
    model: &DistributionModel,
    h: f64,
    window: &WindowingFunction,
) -> Result<f64, MeeError> {
    let mut fbuf = Vec::new();
    let l = linear_value(space, f, z.0, &mut fbuf)?;
    let lp = linear_value(space, f, zp.0, &mut fbuf)?;
    let r = model.regression_value(z.0);
    let rp = model.regression_value(zp.0);
    let ydiff = z.1 - zp.1;
    let df = ydiff - (l - lp);
    let dr = ydiff - (r - rp);
    let h2 = h * h;
    let inv = 1.0 / (2.0 * h2);
    Ok(-h2 * window.eval(df * df * inv) + h2 * window.eval(dr * dr * inv))
}

/// Off-diagonal average of [`u_kernel`] over the sample: an unbiased
/// estimate of the excess information error of `f`.
pub fn u_statistic(
    f: &Predictor,
    space: &HypothesisSpace,
    sample: &Sample,
    model: &DistributionModel,
    h: f64,
    window: &WindowingFunction,
) -> Result<f64, MeeError> {
    let m = sample.len();
    if m < 2 {
        return Err(MeeError::invalid("sample", "need m >= 2 observations"));
    }
    // both function values precomputed per observation
    let mut fbuf = Vec::new();
    let mut fdiffs = Vec::with_capacity(m);
    let mut rdiffs = Vec::with_capacity(m);
    for i in 0..m {
        let x = sample.x(i);
        fdiffs.push(sample.y(i) - linear_value(space, f, x, &mut fbuf)?);
        rdiffs.push(sample.y(i) - model.regression_value(x));
    }
    let h2 = h * h;
    let inv = 1.0 / (2.0 * h2);
    let mut acc = NeumaierSum::new();
    for i in 0..m {
        for j in i + 1..m {
            let df = fdiffs[i] - fdiffs[j];
            let dr = rdiffs[i] - rdiffs[j];
            let u = -h2 * window.eval(df * df * inv) + h2 * window.eval(dr * dr * inv);
            acc.add(2.0 * u); // both ordered pairs
        }
    }
    Ok(acc.value() / (m * (m - 1)) as f64)
}

/// Disjoint-pair Monte-Carlo mean of the excess kernel: estimates
/// `E^{(h)}(f) - E^{(h)}(f_rho)` with both terms on common draws.
pub fn excess_info_error(
    f: &Predictor,
    space: &HypothesisSpace,
    model: &DistributionModel,
    h: f64,
    window: &WindowingFunction,
    n_pairs: usize,
    seed: u64,
) -> Result<MCEstimate, MeeError> {
    require_count("n_pairs", n_pairs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xbuf = Vec::new();
    let mut x1 = Vec::new();
    let mut mom = RunningMoments::new();
    for _ in 0..n_pairs {
        let y1 = model.draw_observation(&mut rng, &mut xbuf);
        x1.clear();
        x1.extend_from_slice(&xbuf);
        let y2 = model.draw_observation(&mut rng, &mut xbuf);
        let u = u_kernel(f, space, (&x1, y1), (&xbuf, y2), model, h, window)?;
        mom.push(u);
    }
    Ok(MCEstimate {
        value: mom.mean(),
        std_error: mom.std_error(),
        count: mom.count(),
    })
}

/// Residuals `R(h) = E^{(h)}(f) + h^2 G(0) - C_rho - Var[f - f_rho]` for a
/// list of scaling parameters under common random numbers: the same pair
/// differences feed every `h`, and the identity `C_rho + Var = E[D^2]/2`
/// folds the subtraction into each Monte-Carlo term, so the small residual
/// is never formed as a difference of large averages.
pub fn residual_decay_curve(
    f: &Predictor,
    space: &HypothesisSpace,
    model: &DistributionModel,
    hs: &[f64],
    window: &WindowingFunction,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<MCEstimate>, MeeError> {
    require_count("n_pairs", n_pairs)?;
    if hs.is_empty() {
        return Err(MeeError::invalid("hs", "need at least one h"));
    }
    let mut pairs = PairSampler::new(model, space, f, seed);
    let mut diffs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        diffs.push(pairs.next_diff()?);
    }
    let g0 = window.value_at_zero();
    let mut out = Vec::with_capacity(hs.len());
    for &h in hs {
        if !(h > 0.0) {
            return Err(MeeError::invalid("h", "must be positive"));
        }
        let h2 = h * h;
        let inv = 1.0 / (2.0 * h2);
        let mut mom = RunningMoments::new();
        for &d in &diffs {
            let t = d * d * inv;
            // -h^2 (G(t) - G(0) + t), the Taylor remainder of the window
            mom.push(-h2 * (window.eval(t) - g0 + t));
        }
        out.push(MCEstimate {
            value: mom.mean(),
            std_error: mom.std_error(),
            count: mom.count(),
        });
    }
    Ok(out)
}

/// Best-in-class targets of a hypothesis space.
#[derive(Debug, Clone)]
pub struct ApproxTargets {
    /// Approximation error: the variance objective at its minimizer.
    pub approx_error: MCEstimate,
    /// Minimizer of the fixed-draw variance distance.
    pub variance_minimizer: Predictor,
    /// Minimizer of the fixed-draw information error at the given `h`.
    pub info_error_minimizer: Predictor,
}

/// Approximate the approximation error and the two candidate target
/// functions by minimizing fixed-draw Monte-Carlo objectives over the ball
/// with the projected-gradient machinery.
///
/// Both objectives share one set of pair draws seeded by `seed` (the same
/// stream [`sym_ls_error`] and [`information_error`] consume for that seed
/// and count). The variance objective is the pair form
/// `mean(D^2)/2 - mean(N^2)/2`, where `D` is the predictor pair difference
/// and `N` the regression-function one: unbiased for `Var[f - f_rho]`, and
/// sharing its quadratic part with the information objective exactly, so the
/// gap between the two minimizers is the pure windowing correction rather
/// than Monte-Carlo noise.
pub fn approx_error_and_targets(
    space: &HypothesisSpace,
    model: &DistributionModel,
    h: f64,
    window: &WindowingFunction,
    n_mc: usize,
    seed: u64,
    settings: &OptimizerSettings,
) -> Result<ApproxTargets, MeeError> {
    require_count("n_mc", n_mc)?;
    let d = space.dim();
    if d > 10 {
        return Err(MeeError::invalid(
            "space",
            "target optimization supports at most 10 coefficients",
        ));
    }

    // fixed pair draws; same stream as PairSampler on this seed
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xbuf = Vec::new();
    let mut fbuf = Vec::new();
    let mut fbuf2 = Vec::new();
    let mut fdiff = Vec::with_capacity(n_mc * d);
    let mut ydiff = Vec::with_capacity(n_mc);
    let mut noise_sq = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let y1 = model.draw_observation(&mut rng, &mut xbuf);
        let r1 = model.regression_value(&xbuf);
        space.dictionary().eval_features(&xbuf, &mut fbuf)?;
        let y2 = model.draw_observation(&mut rng, &mut xbuf);
        let r2 = model.regression_value(&xbuf);
        space.dictionary().eval_features(&xbuf, &mut fbuf2)?;
        for k in 0..d {
            fdiff.push(fbuf[k] - fbuf2[k]);
        }
        let yd = y1 - y2;
        ydiff.push(yd);
        let nd = yd - (r1 - r2);
        noise_sq.push(nd * nd);
    }
    let n = n_mc as f64;
    let noise_half_msq = {
        let mut acc = NeumaierSum::new();
        for &v in &noise_sq {
            acc.add(v);
        }
        acc.value() / (2.0 * n)
    };

    let pair_diffs = |c: &[f64], out: &mut Vec<f64>| {
        out.clear();
        for i in 0..n_mc {
            let mut fd = 0.0;
            for k in 0..d {
                fd += c[k] * fdiff[i * d + k];
            }
            out.push(ydiff[i] - fd);
        }
    };

    // Var[f - f_rho] = E[D^2]/2 - E[N^2]/2 on the shared pairs
    let var_objective = |c: &[f64]| -> Result<f64, MeeError> {
        let mut ds = Vec::new();
        pair_diffs(c, &mut ds);
        let mut acc = NeumaierSum::new();
        for &dv in &ds {
            acc.add(dv * dv);
        }
        Ok(acc.value() / (2.0 * n) - noise_half_msq)
    };
    let var_gradient = |c: &[f64]| -> Result<Vec<f64>, MeeError> {
        let mut ds = Vec::new();
        pair_diffs(c, &mut ds);
        let mut g = vec![0.0; d];
        for i in 0..n_mc {
            for k in 0..d {
                g[k] -= ds[i] * fdiff[i * d + k];
            }
        }
        for v in &mut g {
            *v /= n;
        }
        Ok(g)
    };

    let var_out = minimize_in_ball(d, space.radius(), settings, &var_objective, &var_gradient)
        .map_err(|e| MeeError::TargetFailed {
            target: "variance",
            source: Box::new(e),
        })?;
    let variance_minimizer = Predictor::new(var_out.point.clone());

    // approximation error with an honest per-pair standard error
    let approx_error = {
        let mut ds = Vec::new();
        pair_diffs(&var_out.point, &mut ds);
        let mut mom = RunningMoments::new();
        for (dv, nsq) in ds.iter().zip(&noise_sq) {
            mom.push((dv * dv - nsq) / 2.0);
        }
        MCEstimate {
            value: mom.mean(),
            std_error: mom.std_error(),
            count: mom.count(),
        }
    };

    let h2 = h * h;
    let inv = 1.0 / (2.0 * h2);
    let info_objective = |c: &[f64]| -> Result<f64, MeeError> {
        let mut ds = Vec::new();
        pair_diffs(c, &mut ds);
        let mut acc = NeumaierSum::new();
        for &dv in &ds {
            acc.add(window.eval(dv * dv * inv));
        }
        Ok(-h2 * acc.value() / n)
    };
    let info_gradient = |c: &[f64]| -> Result<Vec<f64>, MeeError> {
        let mut ds = Vec::new();
        pair_diffs(c, &mut ds);
        let mut g = vec![0.0; d];
        for i in 0..n_mc {
            let s = window.deriv1(ds[i] * ds[i] * inv) * ds[i];
            for k in 0..d {
                g[k] += s * fdiff[i * d + k];
            }
        }
        for v in &mut g {
            *v /= n;
        }
        Ok(g)
    };

    let info_out = minimize_in_ball(d, space.radius(), settings, &info_objective, &info_gradient)
        .map_err(|e| MeeError::TargetFailed {
        target: "information",
        source: Box::new(e),
    })?;

    Ok(ApproxTargets {
        approx_error,
        variance_minimizer,
        info_error_minimizer: Predictor::new(info_out.point),
    })
}

/// Closed forms and quadrature for the Gaussian-window, Gaussian-noise case
/// at the regression function, used to cross-check the Monte-Carlo path.
pub mod analytic {
    /// Information error at the regression function under Gaussian noise of
    /// scale `sigma` and the Gaussian window: `-h^3 / sqrt(h^2 + 2 sigma^2)`.
    pub fn gaussian_info_error(h: f64, sigma: f64) -> f64 {
        -h.powi(3) / (h * h + 2.0 * sigma * sigma).sqrt()
    }

    /// Residual `R(h) = E^{(h)}(f_rho) + h^2 - sigma^2`; decays like
    /// `-(3/2) sigma^4 / h^2`.
    pub fn gaussian_residual(h: f64, sigma: f64) -> f64 {
        gaussian_info_error(h, sigma) + h * h - sigma * sigma
    }

    /// Composite-Simpson evaluation of the same information error as a 1-D
    /// integral over the pair difference `Z ~ N(0, 2 sigma^2)`.
    pub fn gaussian_info_error_quadrature(h: f64, sigma: f64, panels: usize) -> f64 {
        let s = (2.0f64).sqrt() * sigma; // std of the pair difference
        let half = 12.0 * s;
        let n = panels.max(8) & !1usize; // even
        let step = 2.0 * half / n as f64;
        let norm = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
        let term = |z: f64| {
            -h * h * (-z * z / (2.0 * h * h)).exp() * norm * (-z * z / (2.0 * s * s)).exp()
        };
        let mut acc = term(-half) + term(half);
        for i in 1..n {
            let z = -half + step * i as f64;
            acc += term(z) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * step / 3.0
    }
}
