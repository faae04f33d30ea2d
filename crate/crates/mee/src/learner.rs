//! The empirical minimum-error-entropy learner: objective, analytic
//! gradient, projected-gradient minimization with multi-start, a
//! least-squares baseline, and the constant-adjusted estimator.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::entropy::{empirical_renyi2, information_potential, ErrorVector};
use crate::error::MeeError;
use crate::hypothesis::{HypothesisSpace, Predictor};
use crate::optim::{minimize_in_ball, MinimizeOutcome, OptimizerSettings};
use crate::stats::{solve_spd, NeumaierSum};
use crate::windowing::WindowingFunction;

/// Labeled sample `{(x_i, y_i)}` with a fixed input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    input_dim: usize,
    xs: Vec<f64>, // row-major, len = m * input_dim
    ys: Vec<f64>,
}

impl Sample {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self, MeeError> {
        if xs.len() != ys.len() {
            return Err(MeeError::invalid("sample", "x and y counts differ"));
        }
        if xs.is_empty() {
            return Err(MeeError::invalid("sample", "must be non-empty"));
        }
        let input_dim = xs[0].len();
        if input_dim == 0 {
            return Err(MeeError::invalid(
                "sample",
                "inputs must have dimension >= 1",
            ));
        }
        let mut flat = Vec::with_capacity(xs.len() * input_dim);
        for row in &xs {
            if row.len() != input_dim {
                return Err(MeeError::DimensionMismatch {
                    expected: input_dim,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(MeeError::NonFinite("sample inputs"));
            }
            flat.extend_from_slice(row);
        }
        if ys.iter().any(|v| !v.is_finite()) {
            return Err(MeeError::NonFinite("sample outputs"));
        }
        Ok(Self {
            input_dim,
            xs: flat,
            ys,
        })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Write as headered tabular text: columns `x_1..x_n,y`.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (1..=self.input_dim)
            .map(|k| format!("x_{k}"))
            .chain(std::iter::once("y".to_string()))
            .collect();
        writeln!(file, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut fields: Vec<String> = self.x(i).iter().map(|v| format!("{v}")).collect();
            fields.push(format!("{}", self.y(i)));
            writeln!(file, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self, MeeError> {
        let file = std::fs::File::open(path)
            .map_err(|e| MeeError::invalid("sample file", format!("{}: {e}", path.display())))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| MeeError::invalid("sample file", "empty file"))?
            .map_err(|e| MeeError::invalid("sample file", e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.last() != Some(&"y") || cols.len() < 2 {
            return Err(MeeError::invalid(
                "sample file",
                "expected header x_1..x_n,y",
            ));
        }
        let dim = cols.len() - 1;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| MeeError::invalid("sample file", e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != dim + 1 {
                return Err(MeeError::invalid(
                    "sample file",
                    format!(
                        "row {} has {} fields, expected {}",
                        lineno + 2,
                        fields.len(),
                        dim + 1
                    ),
                ));
            }
            let mut row = Vec::with_capacity(dim);
            for f in &fields[..dim] {
                row.push(f.parse::<f64>().map_err(|e| {
                    MeeError::invalid("sample file", format!("row {}: {e}", lineno + 2))
                })?);
            }
            xs.push(row);
            ys.push(fields[dim].parse::<f64>().map_err(|e| {
                MeeError::invalid("sample file", format!("row {}: {e}", lineno + 2))
            })?);
        }
        Sample::new(xs, ys)
    }
}

/// One entropy-minimization problem instance.
#[derive(Clone)]
pub struct MeeProblem<'a> {
    pub sample: &'a Sample,
    pub space: &'a HypothesisSpace,
    pub h: f64,
    pub window: &'a WindowingFunction,
}

impl<'a> MeeProblem<'a> {
    pub fn new(
        sample: &'a Sample,
        space: &'a HypothesisSpace,
        h: f64,
        window: &'a WindowingFunction,
    ) -> Result<Self, MeeError> {
        if sample.input_dim() != space.input_dim() {
            return Err(MeeError::DimensionMismatch {
                expected: space.input_dim(),
                got: sample.input_dim(),
            });
        }
        if sample.len() < 2 {
            return Err(MeeError::invalid("sample", "need m >= 2 observations"));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(MeeError::invalid("h", "must be positive"));
        }
        Ok(Self {
            sample,
            space,
            h,
            window,
        })
    }
}

/// Residual vector `e_i = y_i - f(x_i)`; the offset participates in the
/// evaluation.
pub fn residuals(
    p: &Predictor,
    space: &HypothesisSpace,
    sample: &Sample,
) -> Result<ErrorVector, MeeError> {
    let mut vals = Vec::with_capacity(sample.len());
    for i in 0..sample.len() {
        vals.push(sample.y(i) - space.evaluate(p, sample.x(i))?);
    }
    ErrorVector::new(vals)
}

/// The training objective: empirical quadratic Renyi entropy of the
/// residuals.
pub fn mee_objective(p: &Predictor, prob: &MeeProblem<'_>) -> Result<f64, MeeError> {
    let errs = residuals(p, prob.space, prob.sample)?;
    empirical_renyi2(&errs, prob.h, prob.window)
}

/// Analytic gradient of [`mee_objective`] with respect to the coefficients:
/// with pair differences `D_ij = e_i - e_j`,
///
/// `dJ/dc_k = -(1/IP) (1/(m^2 h^3)) sum_ij G'(D_ij^2/(2h^2)) D_ij (phi_k(x_j) - phi_k(x_i))`.
///
/// The constant-feature component vanishes term by term, so translation
/// directions get an exactly zero gradient.
pub fn mee_gradient(p: &Predictor, prob: &MeeProblem<'_>) -> Result<Vec<f64>, MeeError> {
    let phi = feature_matrix(prob.space, prob.sample)?;
    let errs = residuals(p, prob.space, prob.sample)?;
    let ip = information_potential(&errs, prob.h, prob.window)?;
    if !(ip > 0.0) {
        return Err(MeeError::NonpositivePotential(ip));
    }
    Ok(gradient_from_residuals(
        errs.values(),
        &phi,
        prob.space.dim(),
        prob.h,
        prob.window,
        ip,
    ))
}

/// Row-major feature matrix of the sample.
fn feature_matrix(space: &HypothesisSpace, sample: &Sample) -> Result<Vec<f64>, MeeError> {
    let d = space.dim();
    let mut phi = Vec::with_capacity(sample.len() * d);
    let mut buf = Vec::with_capacity(d);
    for i in 0..sample.len() {
        space.dictionary().eval_features(sample.x(i), &mut buf)?;
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(MeeError::NonFinite("feature values"));
        }
        phi.extend_from_slice(&buf);
    }
    Ok(phi)
}

fn gradient_from_residuals(
    r: &[f64],
    phi: &[f64],
    d: usize,
    h: f64,
    window: &WindowingFunction,
    ip: f64,
) -> Vec<f64> {
    let m = r.len();
    let inv2h2 = 1.0 / (2.0 * h * h);
    let mut grad = vec![0.0; d];
    for i in 0..m {
        for j in i + 1..m {
            let dr = r[i] - r[j];
            let s = window.deriv1(dr * dr * inv2h2) * dr;
            if s == 0.0 {
                continue;
            }
            let (pi, pj) = (&phi[i * d..(i + 1) * d], &phi[j * d..(j + 1) * d]);
            for k in 0..d {
                grad[k] += s * (pj[k] - pi[k]);
            }
        }
    }
    // ordered pairs double the i<j sum
    let scale = -2.0 / (ip * (m * m) as f64 * h * h * h);
    for g in &mut grad {
        *g *= scale;
    }
    grad
}

/// Diagnostics attached to a fitted predictor.
#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    pub objective: f64,
    pub iterations: u64,
    pub restart: u32,
    pub converged: bool,
    /// Objective values accepted by the winning restart, non-increasing.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub predictor: Predictor,
    pub diagnostics: FitDiagnostics,
}

/// Fit the entropy minimizer by projected gradient descent with multi-start.
///
/// Restart 0 starts at the origin; the rest start at seeded points of the
/// ball. The best restart wins by objective, then smaller coefficient norm,
/// then lower restart index. The returned predictor has offset 0 and lies in
/// the ball.
pub fn minimize_mee(
    prob: &MeeProblem<'_>,
    settings: &OptimizerSettings,
) -> Result<FitResult, MeeError> {
    let phi = feature_matrix(prob.space, prob.sample)?;
    let d = prob.space.dim();
    let ys = prob.sample.ys();
    let h = prob.h;
    let window = prob.window;

    let resid = |c: &[f64]| -> Vec<f64> {
        let m = ys.len();
        let mut r = Vec::with_capacity(m);
        for i in 0..m {
            let mut acc = 0.0;
            for k in 0..d {
                acc += c[k] * phi[i * d + k];
            }
            r.push(ys[i] - acc);
        }
        r
    };

    let objective = |c: &[f64]| -> Result<f64, MeeError> {
        let errs = ErrorVector::new(resid(c))?;
        empirical_renyi2(&errs, h, window)
    };
    let gradient = |c: &[f64]| -> Result<Vec<f64>, MeeError> {
        let errs = ErrorVector::new(resid(c))?;
        let ip = information_potential(&errs, h, window)?;
        if !(ip > 0.0) {
            return Err(MeeError::NonpositivePotential(ip));
        }
        Ok(gradient_from_residuals(
            errs.values(),
            &phi,
            d,
            h,
            window,
            ip,
        ))
    };

    let out = minimize_in_ball(d, prob.space.radius(), settings, &objective, &gradient)?;
    Ok(fit_result_from(out))
}

fn fit_result_from(out: MinimizeOutcome) -> FitResult {
    FitResult {
        predictor: Predictor::new(out.point),
        diagnostics: FitDiagnostics {
            objective: out.objective,
            iterations: out.iterations,
            restart: out.restart,
            converged: out.converged,
            objective_trace: out.objective_trace,
        },
    }
}

/// Classical least squares over the same coefficient ball, for comparison
/// experiments. Uses the closed-form normal-equations solution when it lies
/// inside the ball, otherwise the projected-gradient machinery.
pub fn least_squares_baseline(
    sample: &Sample,
    space: &HypothesisSpace,
    settings: &OptimizerSettings,
) -> Result<Predictor, MeeError> {
    if sample.input_dim() != space.input_dim() {
        return Err(MeeError::DimensionMismatch {
            expected: space.input_dim(),
            got: sample.input_dim(),
        });
    }
    let phi = feature_matrix(space, sample)?;
    let d = space.dim();
    let m = sample.len();
    let ys = sample.ys();

    // normal equations (1/m) Phi^T Phi c = (1/m) Phi^T y
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    for i in 0..m {
        let row = &phi[i * d..(i + 1) * d];
        for p in 0..d {
            b[p] += row[p] * ys[i];
            for q in 0..=p {
                a[p * d + q] += row[p] * row[q];
            }
        }
    }
    let mf = m as f64;
    for p in 0..d {
        b[p] /= mf;
        for q in 0..=p {
            a[p * d + q] /= mf;
            a[q * d + p] = a[p * d + q];
        }
    }

    if let Some(c) = solve_spd(&a, &b, d) {
        if c.iter().all(|v| v.is_finite())
            && c.iter().map(|v| v * v).sum::<f64>().sqrt() <= space.radius()
        {
            return Ok(Predictor::new(c));
        }
    }

    // Gram matrix singular or solution outside the ball: minimize the mean
    // squared residual by projected gradient from the origin (plus restarts).
    let objective = |c: &[f64]| -> Result<f64, MeeError> {
        let mut acc = NeumaierSum::new();
        for i in 0..m {
            let mut pred = 0.0;
            for k in 0..d {
                pred += c[k] * phi[i * d + k];
            }
            let e = ys[i] - pred;
            acc.add(e * e);
        }
        Ok(acc.value() / mf)
    };
    let gradient = |c: &[f64]| -> Result<Vec<f64>, MeeError> {
        let mut g = vec![0.0; d];
        for i in 0..m {
            let mut pred = 0.0;
            for k in 0..d {
                pred += c[k] * phi[i * d + k];
            }
            let e = pred - ys[i];
            for k in 0..d {
                g[k] += 2.0 * e * phi[i * d + k];
            }
        }
        for v in &mut g {
            *v /= mf;
        }
        Ok(g)
    };
    let out = minimize_in_ball(d, space.radius(), settings, &objective, &gradient)?;
    Ok(Predictor::new(out.point))
}

/// Clamp an output value to `[-sqrt(m), sqrt(m)]`.
pub fn project_output(y: f64, m: usize) -> f64 {
    let bound = (m as f64).sqrt();
    y.clamp(-bound, bound)
}

/// The computable mean-adjustment quantity
/// `(1/m) sum_i [f(x_i) - proj_sqrt(m)(y_i)]`.
pub fn mean_adjustment(
    p: &Predictor,
    space: &HypothesisSpace,
    sample: &Sample,
) -> Result<f64, MeeError> {
    let m = sample.len();
    let mut acc = NeumaierSum::new();
    for i in 0..m {
        let f = space.evaluate(p, sample.x(i))?;
        acc.add(f - project_output(sample.y(i), m));
    }
    Ok(acc.value() / m as f64)
}

/// The constant-adjusted estimator: same coefficients, offset shifted down
/// by the mean adjustment.
pub fn adjusted_estimator(
    f_z: &Predictor,
    space: &HypothesisSpace,
    sample: &Sample,
) -> Result<Predictor, MeeError> {
    let adj = mean_adjustment(f_z, space, sample)?;
    Ok(Predictor::with_offset(
        f_z.coefficients.clone(),
        f_z.offset - adj,
    ))
}

/// Exhaustive 1-D grid search over `[-radius, radius]`, a brute-force
/// cross-check for one-dimensional coefficient spaces.
pub fn grid_search_1d(
    objective: impl Fn(f64) -> Result<f64, MeeError>,
    radius: f64,
    points: usize,
) -> Result<(f64, f64), MeeError> {
    if points < 2 {
        return Err(MeeError::invalid("points", "need at least 2 grid points"));
    }
    let mut best_c = 0.0;
    let mut best_f = f64::INFINITY;
    for i in 0..points {
        let c = -radius + 2.0 * radius * i as f64 / (points - 1) as f64;
        let f = objective(c)?;
        if f < best_f || (f == best_f && c.abs() < best_c) {
            best_f = f;
            best_c = c;
        }
    }
    Ok((best_c, best_f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::Dictionary;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn poly_space(degree: usize, radius: f64) -> HypothesisSpace {
        HypothesisSpace::new(Dictionary::polynomial(degree), radius).unwrap()
    }

    fn gaussian() -> WindowingFunction {
        WindowingFunction::gaussian()
    }

    #[test]
    fn residuals_examples() {
        let space = poly_space(1, 10.0);
        let sample = Sample::new(vec![vec![0.0], vec![1.0]], vec![1.0, 3.0]).unwrap();

        let zero = Predictor::zeros(2);
        let r = residuals(&zero, &space, &sample).unwrap();
        assert_eq!(r.values(), &[1.0, 3.0]);

        // f(x) = 2x on {(0,1),(1,3)} -> residuals (1, 1)
        let p = Predictor::new(vec![0.0, 2.0]);
        let r = residuals(&p, &space, &sample).unwrap();
        assert_eq!(r.values(), &[1.0, 1.0]);

        // perfect fit
        let fit = Predictor::new(vec![1.0, 2.0]);
        let r = residuals(&fit, &space, &sample).unwrap();
        assert_eq!(r.values(), &[0.0, 0.0]);
    }

    #[test]
    fn objective_examples() {
        let space = poly_space(1, 10.0);
        let sample = Sample::new(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0]).unwrap();
        let w = gaussian();
        let prob = MeeProblem::new(&sample, &space, 1.0, &w).unwrap();

        // exact fit -> all residuals zero -> objective 0 at h = 1
        let fit = Predictor::new(vec![0.0, 1.0]);
        assert_eq!(mee_objective(&fit, &prob).unwrap(), 0.0);

        // zero predictor -> residuals (0, 1)
        let zero = Predictor::zeros(2);
        let obj = mee_objective(&zero, &prob).unwrap();
        let expected = -((1.0 + (-0.5f64).exp()) / 2.0).ln();
        assert!((obj - expected).abs() < 1e-15);
        assert!((obj - 0.2190702).abs() < 1e-6);
    }

    #[test]
    fn objective_offset_invariance_exact() {
        // dyadic sample and coefficients keep every residual exact
        let space = poly_space(2, 50.0);
        let sample = Sample::new(
            vec![vec![0.5], vec![-0.25], vec![0.125], vec![1.0]],
            vec![0.75, -1.5, 2.0, 0.0625],
        )
        .unwrap();
        let w = gaussian();
        let prob = MeeProblem::new(&sample, &space, 2.0, &w).unwrap();
        let base = Predictor::new(vec![0.5, -1.25, 0.75]);
        let shifted = Predictor::with_offset(base.coefficients.clone(), 3.265625);
        let a = mee_objective(&base, &prob).unwrap();
        let b = mee_objective(&shifted, &prob).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn gradient_zero_for_equal_residuals() {
        let space = poly_space(1, 10.0);
        // y = 2 + x exactly realizable; residuals all zero
        let sample =
            Sample::new(vec![vec![-0.5], vec![0.0], vec![0.5]], vec![1.5, 2.0, 2.5]).unwrap();
        let w = gaussian();
        let prob = MeeProblem::new(&sample, &space, 1.0, &w).unwrap();
        let g = mee_gradient(&Predictor::new(vec![2.0, 1.0]), &prob).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_constant_component_exactly_zero() {
        let space = poly_space(2, 10.0);
        let sample = Sample::new(
            vec![vec![-0.75], vec![0.3], vec![0.9], vec![-0.1]],
            vec![0.2, -1.3, 0.8, 2.1],
        )
        .unwrap();
        let w = gaussian();
        let prob = MeeProblem::new(&sample, &space, 1.5, &w).unwrap();
        let g = mee_gradient(&Predictor::new(vec![0.4, -0.6, 1.1]), &prob).unwrap();
        assert_eq!(g[0], 0.0);
    }

    fn central_difference_gradient(p: &Predictor, prob: &MeeProblem<'_>, step: f64) -> Vec<f64> {
        let mut g = Vec::with_capacity(p.coefficients.len());
        for k in 0..p.coefficients.len() {
            let mut up = p.clone();
            up.coefficients[k] += step;
            let mut dn = p.clone();
            dn.coefficients[k] -= step;
            g.push(
                (mee_objective(&up, prob).unwrap() - mee_objective(&dn, prob).unwrap())
                    / (2.0 * step),
            );
        }
        g
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..20 {
            let d = rng.random_range(1..=4usize);
            let m = rng.random_range(4..=20usize);
            let space = poly_space(d, 10.0);
            let xs: Vec<Vec<f64>> = (0..m)
                .map(|_| vec![2.0 * rng.random::<f64>() - 1.0])
                .collect();
            let ys: Vec<f64> = (0..m).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
            let sample = Sample::new(xs, ys).unwrap();
            let w = gaussian();
            let h = 1.0 + 3.0 * rng.random::<f64>();
            let prob = MeeProblem::new(&sample, &space, h, &w).unwrap();
            let c: Vec<f64> = (0..=d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let p = Predictor::new(c);
            let ga = mee_gradient(&p, &prob).unwrap();
            let gf = central_difference_gradient(&p, &prob, 1e-5);
            let num: f64 = ga
                .iter()
                .zip(&gf)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den: f64 = gf.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
            assert!(num / den <= 1e-5, "relative gradient error {}", num / den);
        }
    }

    #[test]
    fn minimize_recovers_noiseless_target_up_to_constant() {
        // f*(x) = 0.5 - 1.25 x inside the ball; noiseless sample
        let space = poly_space(1, 4.0);
        let m = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<Vec<f64>> = (0..m)
            .map(|_| vec![2.0 * rng.random::<f64>() - 1.0])
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 - 1.25 * x[0]).collect();
        let sample = Sample::new(xs.clone(), ys).unwrap();
        let w = gaussian();
        let prob = MeeProblem::new(&sample, &space, 1.0, &w).unwrap();
        let fit = minimize_mee(&prob, &OptimizerSettings::default()).unwrap();

        let target = Predictor::new(vec![0.5, -1.25]);
        let obj_target = mee_objective(&target, &prob).unwrap();
        assert!(
            fit.diagnostics.objective <= obj_target + 1e-8,
            "objective {} vs target {}",
            fit.diagnostics.objective,
            obj_target
        );

        // distance to {f* + c}: variance of (fit - f*) over a probe grid
        let mut vals = Vec::new();
        for i in 0..201 {
            let x = [-1.0 + 0.01 * i as f64];
            vals.push(
                space.evaluate(&fit.predictor, &x).unwrap() - space.evaluate(&target, &x).unwrap(),
            );
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        assert!(var <= 1e-3, "variance distance {var}");
    }

    #[test]
    fn minimize_matches_grid_search_in_1d() {
        // single-feature space {x}; compare against an exhaustive grid
        let dict =
            Dictionary::new("slope-only", 1, vec![std::sync::Arc::new(|x: &[f64]| x[0])]).unwrap();
        let space = HypothesisSpace::new(dict, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = 24;
        let xs: Vec<Vec<f64>> = (0..m)
            .map(|_| vec![2.0 * rng.random::<f64>() - 1.0])
            .collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 1.4 * x[0] + 0.3 * (rng.random::<f64>() - 0.5))
            .collect();
        let sample = Sample::new(xs, ys).unwrap();
        let w = gaussian();
        let prob = MeeProblem::new(&sample, &space, 2.0, &w).unwrap();

        let fit = minimize_mee(&prob, &OptimizerSettings::default()).unwrap();
        let (_, grid_obj) = grid_search_1d(
            |c| mee_objective(&Predictor::new(vec![c]), &prob),
            space.radius(),
            100_000,
        )
        .unwrap();
        assert!(
            fit.diagnostics.objective <= grid_obj + 1e-6,
            "optimizer {} vs grid {}",
            fit.diagnostics.objective,
            grid_obj
        );
    }

    #[test]
    fn degenerate_flat_sample_returns_origin() {
        // two identical observations: every pair difference is zero for any
        // coefficients, the objective is flat, the tie-break picks the origin
        let space = poly_space(1, 2.0);
        let sample = Sample::new(vec![vec![0.5], vec![0.5]], vec![1.0, 1.0]).unwrap();
        let w = gaussian();
        let prob = MeeProblem::new(&sample, &space, 1.0, &w).unwrap();
        let fit = minimize_mee(&prob, &OptimizerSettings::default()).unwrap();
        assert_eq!(fit.predictor.coefficients, vec![0.0, 0.0]);
    }

    #[test]
    fn minimize_is_deterministic() {
        let space = poly_space(2, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let xs: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![2.0 * rng.random::<f64>() - 1.0])
            .collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 0.2 + x[0] - 0.5 * x[0] * x[0] + 0.1 * (rng.random::<f64>() - 0.5))
            .collect();
        let sample = Sample::new(xs, ys).unwrap();
        let w = gaussian();
        let prob = MeeProblem::new(&sample, &space, 1.5, &w).unwrap();
        let s = OptimizerSettings::default().with_seed(5);
        let a = minimize_mee(&prob, &s).unwrap();
        let b = minimize_mee(&prob, &s).unwrap();
        let bits =
            |p: &Predictor| -> Vec<u64> { p.coefficients.iter().map(|v| v.to_bits()).collect() };
        assert_eq!(bits(&a.predictor), bits(&b.predictor));
        assert_eq!(
            a.diagnostics.objective.to_bits(),
            b.diagnostics.objective.to_bits()
        );
    }

    #[test]
    fn fitted_predictor_stays_in_ball() {
        let space = poly_space(1, 0.25); // tight ball forces the boundary
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<Vec<f64>> = (0..25)
            .map(|_| vec![2.0 * rng.random::<f64>() - 1.0])
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x[0]).collect();
        let sample = Sample::new(xs, ys).unwrap();
        let w = gaussian();
        let prob = MeeProblem::new(&sample, &space, 1.0, &w).unwrap();
        let fit = minimize_mee(&prob, &OptimizerSettings::default()).unwrap();
        assert!(fit.predictor.coefficient_norm() <= space.radius() + 1e-9);
        assert!(space.contains(&fit.predictor));
    }

    #[test]
    fn trace_never_increases() {
        let space = poly_space(2, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![2.0 * rng.random::<f64>() - 1.0])
            .collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x[0] + 0.3 * (rng.random::<f64>() - 0.5))
            .collect();
        let sample = Sample::new(xs, ys).unwrap();
        let w = gaussian();
        let prob = MeeProblem::new(&sample, &space, 1.0, &w).unwrap();
        let fit = minimize_mee(&prob, &OptimizerSettings::default()).unwrap();
        for w in fit.diagnostics.objective_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn least_squares_examples() {
        let settings = OptimizerSettings::default();

        // noiseless realizable data
        let space = poly_space(1, 10.0);
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![-1.0 + 0.2 * i as f64]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.7 - 0.4 * x[0]).collect();
        let sample = Sample::new(xs, ys).unwrap();
        let p = least_squares_baseline(&sample, &space, &settings).unwrap();
        let rss: f64 = (0..sample.len())
            .map(|i| {
                let e = sample.y(i) - space.evaluate(&p, sample.x(i)).unwrap();
                e * e
            })
            .sum();
        assert!(rss <= 1e-16, "rss {rss}");

        // constant-only dictionary -> sample mean
        let const_space = poly_space(0, 10.0);
        let sample2 =
            Sample::new(vec![vec![0.1], vec![0.5], vec![0.9]], vec![1.0, 2.0, 6.0]).unwrap();
        let p2 = least_squares_baseline(&sample2, &const_space, &settings).unwrap();
        assert!((p2.coefficients[0] - 3.0).abs() < 1e-12);

        // two-point line fit through (0,0), (1,1) -> coefficients (0, 1)
        let sample3 = Sample::new(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0]).unwrap();
        let p3 = least_squares_baseline(&sample3, &space, &settings).unwrap();
        assert!(p3.coefficients[0].abs() < 1e-12);
        assert!((p3.coefficients[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_projected_when_outside_ball() {
        let space = poly_space(1, 0.5);
        let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![-1.0 + i as f64 / 5.5]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 5.0 * x[0]).collect();
        let sample = Sample::new(xs, ys).unwrap();
        let p = least_squares_baseline(&sample, &space, &OptimizerSettings::default()).unwrap();
        assert!(p.coefficient_norm() <= space.radius() + 1e-9);
    }

    #[test]
    fn project_output_examples() {
        assert_eq!(project_output(5.0, 4), 2.0);
        assert_eq!(project_output(-1.0, 4), -1.0);
        assert_eq!(project_output(-9.0, 4), -2.0);
    }

    #[test]
    fn mean_adjustment_examples() {
        let space = poly_space(0, 10.0);

        // p = 0, all |y| <= sqrt(m) -> adjustment is -mean(y)
        let sample =
            Sample::new(vec![vec![0.0], vec![0.3], vec![0.6]], vec![1.0, -0.5, 0.7]).unwrap();
        let adj = mean_adjustment(&Predictor::zeros(1), &space, &sample).unwrap();
        let mean_y = (1.0 - 0.5 + 0.7) / 3.0;
        assert!((adj + mean_y).abs() < 1e-15);

        // perfect fit with bounded outputs -> 0
        let sample2 = Sample::new(vec![vec![0.0], vec![0.5]], vec![1.0, 1.0]).unwrap();
        let adj2 = mean_adjustment(&Predictor::new(vec![1.0]), &space, &sample2).unwrap();
        assert_eq!(adj2, 0.0);

        // f = 1, y = (10, 10), m = 2: both clamp to sqrt(2)
        let sample3 = Sample::new(vec![vec![0.0], vec![0.5]], vec![10.0, 10.0]).unwrap();
        let adj3 = mean_adjustment(&Predictor::new(vec![1.0]), &space, &sample3).unwrap();
        assert!((adj3 - (1.0 - 2.0f64.sqrt())).abs() < 1e-15);
        assert!((adj3 + 0.414214).abs() < 1e-6);
    }

    #[test]
    fn adjusted_estimator_examples() {
        let space = poly_space(1, 10.0);
        let sample = Sample::new(vec![vec![0.0], vec![1.0]], vec![0.25, 1.25]).unwrap();

        // realizable noiseless data with bounded y: adjustment recovers f_rho
        let fit = Predictor::new(vec![0.25, 1.0]);
        let adj = mean_adjustment(&fit, &space, &sample).unwrap();
        assert_eq!(adj, 0.0);
        let tilde = adjusted_estimator(&fit, &space, &sample).unwrap();
        assert_eq!(tilde.offset, 0.0);
        assert_eq!(tilde.coefficients, fit.coefficients);

        // translation consistency: shifting by a constant absorbed in the
        // constant feature cancels in the adjusted estimator
        let shift = 0.5;
        let shifted = Predictor::new(vec![0.25 + shift, 1.0]);
        let t1 = adjusted_estimator(&fit, &space, &sample).unwrap();
        let t2 = adjusted_estimator(&shifted, &space, &sample).unwrap();
        for x in [0.0, 0.25, 1.0] {
            let a = space.evaluate(&t1, &[x]).unwrap();
            let b = space.evaluate(&t2, &[x]).unwrap();
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn adjusted_estimator_recovers_regression_probe_norm() {
        // noiseless realizable data, |y| <= sqrt(m)
        let space = poly_space(1, 5.0);
        let m = 25;
        let xs: Vec<Vec<f64>> = (0..m)
            .map(|i| vec![-1.0 + 2.0 * i as f64 / (m - 1) as f64])
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 + 0.9 * x[0]).collect();
        let sample = Sample::new(xs, ys).unwrap();
        let w = gaussian();
        let prob = MeeProblem::new(&sample, &space, 1.0, &w).unwrap();
        let fit = minimize_mee(&prob, &OptimizerSettings::default()).unwrap();
        let tilde = adjusted_estimator(&fit.predictor, &space, &sample).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..101 {
            let x = [-1.0 + 0.02 * i as f64];
            let gap = space.evaluate(&tilde, &x).unwrap() - (0.3 + 0.9 * x[0]);
            worst = worst.max(gap.abs());
        }
        assert!(worst <= 1e-3, "sup gap {worst}");
    }

    #[test]
    fn sample_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample.csv");
        let sample = Sample::new(
            vec![vec![0.125], vec![-0.75], vec![1.0]],
            vec![2.5, -0.0625, 1e-7],
        )
        .unwrap();
        sample.write_csv(&path).unwrap();
        let back = Sample::read_csv(&path).unwrap();
        assert_eq!(sample, back);
    }
}
