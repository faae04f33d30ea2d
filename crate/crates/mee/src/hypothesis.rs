//! Compact hypothesis spaces: finite feature dictionaries with a Euclidean
//! coefficient ball, predictor evaluation, and ball projection.
//!
//! The coefficient ball stands in for the compact function classes of the
//! theory; projection onto it is closed-form, which is what the optimizer
//! needs.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::MeeError;

/// A single feature map on the input domain.
pub type Feature = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Number of probe points used to estimate sup norms on the input domain.
const SUP_PROBE_POINTS: usize = 10_001;

/// An ordered list of feature functions on `[-1, 1]^n`.
#[derive(Clone)]
pub struct Dictionary {
    name: String,
    input_dim: usize,
    features: Vec<Feature>,
}

impl fmt::Debug for Dictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dictionary")
            .field("name", &self.name)
            .field("input_dim", &self.input_dim)
            .field("len", &self.features.len())
            .finish()
    }
}

impl Dictionary {
    pub fn new(
        name: impl Into<String>,
        input_dim: usize,
        features: Vec<Feature>,
    ) -> Result<Self, MeeError> {
        if input_dim == 0 {
            return Err(MeeError::invalid("input_dim", "must be at least 1"));
        }
        if features.is_empty() {
            return Err(MeeError::invalid(
                "features",
                "dictionary must be non-empty",
            ));
        }
        Ok(Self {
            name: name.into(),
            input_dim,
            features,
        })
    }

    /// Monomials `{1, x, ..., x^degree}` on `[-1, 1]`.
    pub fn polynomial(degree: usize) -> Self {
        let features: Vec<Feature> = (0..=degree as i32)
            .map(|k| -> Feature { Arc::new(move |x: &[f64]| x[0].powi(k)) })
            .collect();
        Self {
            name: format!("polynomial({degree})"),
            input_dim: 1,
            features,
        }
    }

    /// `{1, cos(pi x), sin(pi x), ..., cos(k pi x), sin(k pi x)}` on `[-1, 1]`.
    pub fn trigonometric(order: usize) -> Self {
        let mut features: Vec<Feature> = vec![Arc::new(|_: &[f64]| 1.0)];
        for k in 1..=order {
            let kf = k as f64;
            features.push(Arc::new(move |x: &[f64]| {
                (kf * std::f64::consts::PI * x[0]).cos()
            }));
            features.push(Arc::new(move |x: &[f64]| {
                (kf * std::f64::consts::PI * x[0]).sin()
            }));
        }
        Self {
            name: format!("trig({order})"),
            input_dim: 1,
            features,
        }
    }

    /// Fixed Gaussian radial bumps on an equispaced grid over `[-1, 1]`.
    pub fn gaussian_bumps(count: usize) -> Self {
        let count = count.max(1);
        let width = if count > 1 { 2.0 / count as f64 } else { 1.0 };
        let inv2w2 = 1.0 / (2.0 * width * width);
        let features: Vec<Feature> = (0..count)
            .map(|j| -> Feature {
                let center = if count > 1 {
                    -1.0 + 2.0 * j as f64 / (count - 1) as f64
                } else {
                    0.0
                };
                Arc::new(move |x: &[f64]| {
                    let d = x[0] - center;
                    (-d * d * inv2w2).exp()
                })
            })
            .collect();
        Self {
            name: format!("gauss({count})"),
            input_dim: 1,
            features,
        }
    }

    /// Look up a preset by config name and degree parameter.
    pub fn by_name(name: &str, degree: usize) -> Result<Self, MeeError> {
        match name {
            "polynomial" => Ok(Self::polynomial(degree)),
            "trig" => Ok(Self::trigonometric(degree)),
            "gauss" => Ok(Self::gaussian_bumps(degree)),
            other => Err(MeeError::invalid(
                "dictionary",
                format!("unknown dictionary `{other}` (expected polynomial|trig|gauss)"),
            )),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Number of features `d`.
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, k: usize) -> &Feature {
        &self.features[k]
    }

    /// Evaluate all features at `x` into `out` (cleared first).
    pub fn eval_features(&self, x: &[f64], out: &mut Vec<f64>) -> Result<(), MeeError> {
        if x.len() != self.input_dim {
            return Err(MeeError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        out.clear();
        for f in &self.features {
            out.push(f(x));
        }
        Ok(())
    }

    /// Probe points for sup-norm estimation: a uniform grid in one dimension,
    /// seeded uniform draws otherwise.
    fn probe_points(&self) -> Vec<Vec<f64>> {
        if self.input_dim == 1 {
            (0..SUP_PROBE_POINTS)
                .map(|i| vec![-1.0 + 2.0 * i as f64 / (SUP_PROBE_POINTS - 1) as f64])
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(sup_probe_seed());
            (0..SUP_PROBE_POINTS)
                .map(|_| {
                    (0..self.input_dim)
                        .map(|_| 2.0 * rng.random::<f64>() - 1.0)
                        .collect()
                })
                .collect()
        }
    }
}

// Fixed internal seed for multi-dimensional sup probes.
fn sup_probe_seed() -> u64 {
    0x9d0f_3b1c_27e4_a551
}

/// A dictionary together with a Euclidean coefficient bound: the compact
/// search set for empirical risk minimization.
#[derive(Debug, Clone)]
pub struct HypothesisSpace {
    dictionary: Dictionary,
    radius: f64,
    sup_bound: f64,
}

impl HypothesisSpace {
    pub fn new(dictionary: Dictionary, radius: f64) -> Result<Self, MeeError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(MeeError::invalid(
                "radius",
                format!("must be positive and finite, got {radius}"),
            ));
        }
        let sup_bound = estimate_sup_bound(&dictionary, radius)?;
        Ok(Self {
            dictionary,
            radius,
            sup_bound,
        })
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn dim(&self) -> usize {
        self.dictionary.len()
    }

    pub fn input_dim(&self) -> usize {
        self.dictionary.input_dim()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Estimated `sup_{f in H} ||f||_inf`, recorded for reporting.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// `sum_k c_k phi_k(x) + offset`.
    pub fn evaluate(&self, p: &Predictor, x: &[f64]) -> Result<f64, MeeError> {
        if x.len() != self.input_dim() {
            return Err(MeeError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if p.coefficients.len() != self.dim() {
            return Err(MeeError::DimensionMismatch {
                expected: self.dim(),
                got: p.coefficients.len(),
            });
        }
        let mut acc = 0.0;
        for (c, f) in p.coefficients.iter().zip(&self.dictionary.features) {
            acc += c * f(x);
        }
        Ok(acc + p.offset)
    }

    /// Whether the coefficient vector sits in the ball (with a small slack
    /// for projection round-off).
    pub fn contains(&self, p: &Predictor) -> bool {
        p.coefficients.len() == self.dim() && norm2(&p.coefficients) <= self.radius + 1e-9
    }
}

/// Estimate `sup_{||c|| <= R} sup_x |f(x)|`. At each probe point the extremal
/// coefficient direction gives `R * ||phi(x)||_2`.
fn estimate_sup_bound(dictionary: &Dictionary, radius: f64) -> Result<f64, MeeError> {
    let mut buf = Vec::with_capacity(dictionary.len());
    let mut sup: f64 = 0.0;
    for x in dictionary.probe_points() {
        dictionary.eval_features(&x, &mut buf)?;
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(MeeError::NonFinite("dictionary feature values"));
        }
        sup = sup.max(norm2(&buf));
    }
    Ok(radius * sup)
}

/// A point of the hypothesis space: coefficients plus an additive constant.
/// The offset exists so the constant-adjusted estimator is a first-class
/// predictor; training always operates at offset zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub coefficients: Vec<f64>,
    pub offset: f64,
}

impl Predictor {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self {
            coefficients,
            offset: 0.0,
        }
    }

    pub fn with_offset(coefficients: Vec<f64>, offset: f64) -> Self {
        Self {
            coefficients,
            offset,
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(vec![0.0; d])
    }

    pub fn coefficient_norm(&self) -> f64 {
        norm2(&self.coefficients)
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Project a coefficient vector onto the ball of the given radius: identity
/// inside, radial rescaling outside.
pub fn project_to_ball(c: &[f64], radius: f64) -> Vec<f64> {
    let n = norm2(c);
    if n <= radius {
        c.to_vec()
    } else {
        let s = radius / n;
        c.iter().map(|v| v * s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluate_zero_predictor() {
        let space = HypothesisSpace::new(Dictionary::polynomial(3), 2.0).unwrap();
        let p = Predictor::zeros(4);
        for x in [-1.0, 0.0, 0.7] {
            assert_eq!(space.evaluate(&p, &[x]).unwrap(), 0.0);
        }
    }

    #[test]
    fn evaluate_constant_feature() {
        let space = HypothesisSpace::new(Dictionary::polynomial(2), 2.0).unwrap();
        let p = Predictor::new(vec![1.0, 0.0, 0.0]);
        for x in [-0.5, 0.0, 1.0] {
            assert_eq!(space.evaluate(&p, &[x]).unwrap(), 1.0);
        }
    }

    #[test]
    fn evaluate_affine_by_hand() {
        // coefficients (2, 3) on {1, x} at x = 0.5 -> 3.5
        let space = HypothesisSpace::new(Dictionary::polynomial(1), 5.0).unwrap();
        let p = Predictor::new(vec![2.0, 3.0]);
        assert_eq!(space.evaluate(&p, &[0.5]).unwrap(), 3.5);
    }

    #[test]
    fn evaluate_dimension_mismatch() {
        let space = HypothesisSpace::new(Dictionary::polynomial(1), 5.0).unwrap();
        let p = Predictor::new(vec![2.0, 3.0]);
        assert!(matches!(
            space.evaluate(&p, &[0.5, 0.5]),
            Err(MeeError::DimensionMismatch { .. })
        ));
        let short = Predictor::new(vec![1.0]);
        assert!(space.evaluate(&short, &[0.5]).is_err());
    }

    #[test]
    fn projection_examples() {
        let c = vec![0.3, -0.4];
        assert_eq!(project_to_ball(&c, 1.0), c);
        let p = project_to_ball(&[3.0, 4.0], 1.0);
        assert!((p[0] - 0.6).abs() < 1e-15);
        assert!((p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sup_bound_dominates_single_features() {
        for dict in [
            Dictionary::polynomial(3),
            Dictionary::trigonometric(2),
            Dictionary::gaussian_bumps(5),
        ] {
            let radius = 1.75;
            let space = HypothesisSpace::new(dict, radius).unwrap();
            // sup over the ball dominates R * max_k sup |phi_k|
            let mut buf = Vec::new();
            let mut single_sup: f64 = 0.0;
            for i in 0..101 {
                let x = [-1.0 + 0.02 * i as f64];
                space.dictionary().eval_features(&x, &mut buf).unwrap();
                for v in &buf {
                    single_sup = single_sup.max(v.abs());
                }
            }
            assert!(space.sup_bound() >= radius * single_sup - 1e-12);
        }
    }

    proptest! {
        #[test]
        fn projection_contracts_and_is_idempotent(
            c in proptest::collection::vec(-100.0f64..100.0, 1..6),
            radius in 0.1f64..10.0,
        ) {
            let p = project_to_ball(&c, radius);
            prop_assert!(norm2(&p) <= radius * (1.0 + 1e-12));
            prop_assert!(norm2(&p) <= norm2(&c) * (1.0 + 1e-12));
            let pp = project_to_ball(&p, radius);
            for (a, b) in p.iter().zip(&pp) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
            if norm2(&c) <= radius {
                prop_assert_eq!(&p, &c);
            }
        }

        #[test]
        fn evaluate_is_linear_in_coefficients(
            c1 in proptest::collection::vec(-2.0f64..2.0, 3),
            c2 in proptest::collection::vec(-2.0f64..2.0, 3),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            x in -1.0f64..1.0,
        ) {
            let space = HypothesisSpace::new(Dictionary::polynomial(2), 100.0).unwrap();
            let mixed: Vec<f64> = c1.iter().zip(&c2).map(|(u, v)| a * u + b * v).collect();
            let lhs = space.evaluate(&Predictor::new(mixed), &[x]).unwrap();
            let rhs = a * space.evaluate(&Predictor::new(c1), &[x]).unwrap()
                + b * space.evaluate(&Predictor::new(c2), &[x]).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }
}
