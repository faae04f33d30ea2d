//! Experiment configuration: a JSON config file with nested sections,
//! dotted-path `key=value` overrides, and the bandwidth schedule presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::MeeError;
use crate::hypothesis::{Dictionary, HypothesisSpace};
use crate::optim::OptimizerSettings;
use crate::oracle::{DistributionModel, NoiseLaw, RegressionFn, XLaw};
use crate::windowing::WindowingFunction;

/// Top-level experiment configuration. Unset sections fall back to defaults;
/// runner-specific sections (`gen`, `fit`, `probes`) are optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub hypothesis: HypothesisSpec,
    #[serde(default = "default_window")]
    pub window: String,
    #[serde(default)]
    pub h_schedule: HSchedule,
    #[serde(default)]
    pub m_list: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub mc: McSettings,
    /// Probe predictors (coefficient vectors) for the h-decay sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<Vec<f64>>>,
    /// Number of seeded probe predictors when `probes` is absent.
    #[serde(default = "default_probe_count")]
    pub probe_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen: Option<GenSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSpec>,
}

fn default_window() -> String {
    "gaussian".to_string()
}

fn default_trials() -> u32 {
    1
}

fn default_probe_count() -> u32 {
    3
}

impl ExperimentConfig {
    pub fn window(&self) -> Result<WindowingFunction, MeeError> {
        WindowingFunction::by_name(&self.window).ok_or_else(|| {
            MeeError::invalid(
                "window",
                format!(
                    "unknown window `{}` (expected gaussian|rational)",
                    self.window
                ),
            )
        })
    }

    /// Structural validation shared by all runners.
    pub fn validate(&self) -> Result<(), MeeError> {
        if self.trials < 1 {
            return Err(MeeError::invalid("trials", "must be at least 1"));
        }
        for w in self.m_list.windows(2) {
            if w[1] <= w[0] {
                return Err(MeeError::invalid("m_list", "must be strictly increasing"));
            }
        }
        if self.m_list.iter().any(|&m| m < 2) {
            return Err(MeeError::invalid("m_list", "sample sizes must be >= 2"));
        }
        self.h_schedule.validate()?;
        self.optimizer.validate()?;
        self.mc.validate()?;
        self.window()?;
        if let Some(probes) = &self.probes {
            if probes.is_empty() {
                return Err(MeeError::invalid("probes", "must be non-empty when given"));
            }
        }
        Ok(())
    }
}

/// Data-generating model section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub x: XSpec,
    pub f_rho: FRhoSpec,
    pub noise: NoiseSpec,
}

impl ModelSpec {
    pub fn build(&self) -> Result<DistributionModel, MeeError> {
        DistributionModel::new(self.x.build()?, self.f_rho.build(), self.noise.build())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XSpec {
    #[serde(default = "default_law")]
    pub law: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_law() -> String {
    "uniform".to_string()
}

fn default_dim() -> usize {
    1
}

impl Default for XSpec {
    fn default() -> Self {
        Self {
            law: default_law(),
            dim: default_dim(),
        }
    }
}

impl XSpec {
    fn build(&self) -> Result<XLaw, MeeError> {
        match self.law.as_str() {
            "uniform" => Ok(XLaw::Uniform { dim: self.dim }),
            other => Err(MeeError::invalid(
                "x.law",
                format!("unknown X law `{other}` (expected uniform)"),
            )),
        }
    }
}

/// Regression-function presets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FRhoSpec {
    Affine {
        #[serde(default)]
        intercept: f64,
        #[serde(default = "default_slope")]
        slope: f64,
    },
    Sine,
}

fn default_slope() -> f64 {
    1.0
}

impl FRhoSpec {
    fn build(&self) -> RegressionFn {
        match self {
            FRhoSpec::Affine { intercept, slope } => RegressionFn::Affine {
                intercept: *intercept,
                slope: *slope,
            },
            FRhoSpec::Sine => RegressionFn::SinePi,
        }
    }
}

/// Noise presets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    None,
    Gaussian { sigma: f64 },
    Uniform { halfwidth: f64 },
    StudentT { nu: f64 },
}

impl NoiseSpec {
    fn build(&self) -> NoiseLaw {
        match self {
            NoiseSpec::None => NoiseLaw::None,
            NoiseSpec::Gaussian { sigma } => NoiseLaw::Gaussian { sigma: *sigma },
            NoiseSpec::Uniform { halfwidth } => NoiseLaw::Uniform {
                halfwidth: *halfwidth,
            },
            NoiseSpec::StudentT { nu } => NoiseLaw::StudentT { nu: *nu },
        }
    }
}

/// Hypothesis-space section: dictionary preset plus coefficient radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisSpec {
    pub dictionary: String,
    #[serde(default = "default_degree")]
    pub degree: usize,
    pub radius: f64,
}

fn default_degree() -> usize {
    1
}

impl HypothesisSpec {
    pub fn build(&self) -> Result<HypothesisSpace, MeeError> {
        HypothesisSpace::new(
            Dictionary::by_name(&self.dictionary, self.degree)?,
            self.radius,
        )
    }
}

/// Bandwidth schedule: a preset formula in the sample size or an explicit
/// list of values.
///
/// Presets (`p` is the capacity exponent of the hypothesis space):
/// - `bounded`: `h = m^(1/(2(1+p)))`
/// - `moment`:  `h = m^(1/((1+p) min(q-1, 3)))` with `q` from the model
/// - `auto`:    `bounded` when the model outputs are bounded, else `moment`
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HSchedule {
    Preset {
        preset: SchedulePreset,
        #[serde(default = "default_p")]
        p: f64,
    },
    Explicit {
        explicit: Vec<f64>,
    },
}

fn default_p() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulePreset {
    Auto,
    Bounded,
    Moment,
}

impl Default for HSchedule {
    fn default() -> Self {
        HSchedule::Preset {
            preset: SchedulePreset::Auto,
            p: default_p(),
        }
    }
}

impl HSchedule {
    pub fn validate(&self) -> Result<(), MeeError> {
        match self {
            HSchedule::Preset { p, .. } => {
                if !(*p > 0.0) {
                    return Err(MeeError::invalid("h_schedule.p", "must be positive"));
                }
            }
            HSchedule::Explicit { explicit } => {
                if explicit.is_empty() {
                    return Err(MeeError::invalid(
                        "h_schedule.explicit",
                        "must be non-empty",
                    ));
                }
                if explicit.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
                    return Err(MeeError::invalid(
                        "h_schedule.explicit",
                        "entries must be positive",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Bandwidth for the `m_index`-th sample size of `m_count` in a sweep.
    pub fn h_for(
        &self,
        m: usize,
        m_index: usize,
        m_count: usize,
        model: &DistributionModel,
    ) -> Result<f64, MeeError> {
        match self {
            HSchedule::Preset { preset, p } => {
                let mf = m as f64;
                let bounded = matches!(preset, SchedulePreset::Bounded)
                    || (matches!(preset, SchedulePreset::Auto) && model.bound_m.is_some());
                if bounded {
                    Ok(mf.powf(1.0 / (2.0 * (1.0 + p))))
                } else {
                    let q = model.moment_q;
                    let exponent = (1.0 + p) * (q - 1.0).min(3.0);
                    Ok(mf.powf(1.0 / exponent))
                }
            }
            HSchedule::Explicit { explicit } => {
                if explicit.len() == 1 {
                    Ok(explicit[0])
                } else if explicit.len() == m_count {
                    Ok(explicit[m_index])
                } else {
                    Err(MeeError::invalid(
                        "h_schedule.explicit",
                        format!(
                            "need 1 or {} entries to pair with m_list, got {}",
                            m_count,
                            explicit.len()
                        ),
                    ))
                }
            }
        }
    }

    /// The explicit h grid, when this schedule is one (used by the h sweep).
    pub fn explicit(&self) -> Option<&[f64]> {
        match self {
            HSchedule::Explicit { explicit } => Some(explicit),
            HSchedule::Preset { .. } => None,
        }
    }
}

/// Monte-Carlo budget for the oracle evaluations inside runners.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    /// X draws behind variance and L2 distances.
    pub n_mc: usize,
    /// Disjoint pairs behind information-error style estimates.
    pub n_pairs: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            n_mc: 200_000,
            n_pairs: 200_000,
        }
    }
}

impl McSettings {
    fn validate(&self) -> Result<(), MeeError> {
        if self.n_mc < 1000 || self.n_pairs < 1000 {
            return Err(MeeError::invalid("mc", "budgets must be at least 1000"));
        }
        Ok(())
    }
}

/// `gen` subcommand section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub m: usize,
}

/// `fit` subcommand section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    /// Path to a sample CSV produced by `gen` (or hand-written).
    pub sample: String,
    /// Explicit bandwidth; defaults to the schedule applied to the sample
    /// size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

/// Load a config file, apply `key=value` overrides (dotted paths), then an
/// optional master-seed override, and validate.
pub fn load_config(
    path: &Path,
    overrides: &[String],
    seed_override: Option<u64>,
) -> Result<ExperimentConfig, MeeError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MeeError::invalid("config", format!("{}: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| MeeError::invalid("config", format!("{}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(MeeError::invalid("config", "top level must be an object"));
    }
    for ov in overrides {
        apply_override(&mut value, ov)?;
    }
    if let Some(seed) = seed_override {
        value["master_seed"] = serde_json::json!(seed);
    }
    let cfg: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| MeeError::invalid("config", e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Apply one `a.b.c=value` override; the value parses as JSON when possible
/// and falls back to a string.
fn apply_override(root: &mut serde_json::Value, spec: &str) -> Result<(), MeeError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| MeeError::invalid("override", format!("`{spec}` is not key=value")))?;
    if path.is_empty() {
        return Err(MeeError::invalid("override", "empty key path"));
    }
    let parsed: serde_json::Value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = cur.as_object_mut().ok_or_else(|| {
            MeeError::invalid(
                "override",
                format!("`{path}`: `{part}` does not address an object"),
            )
        })?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), parsed);
            return Ok(());
        }
        cur = map
            .entry(part.to_string())
            .or_insert_with(|| serde_json::json!({}));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config_json() -> serde_json::Value {
        serde_json::json!({
            "model": {
                "f_rho": {"name": "affine", "intercept": 0.3, "slope": 1.2},
                "noise": {"name": "gaussian", "sigma": 0.5}
            },
            "hypothesis": {"dictionary": "polynomial", "degree": 1, "radius": 5.0},
            "m_list": [100, 400],
            "trials": 2,
            "master_seed": 7
        })
    }

    fn write_config(v: &serde_json::Value) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), serde_json::to_string_pretty(v).unwrap()).unwrap();
        f
    }

    #[test]
    fn parses_and_validates() {
        let f = write_config(&base_config_json());
        let cfg = load_config(f.path(), &[], None).unwrap();
        assert_eq!(cfg.m_list, vec![100, 400]);
        assert_eq!(cfg.window, "gaussian");
        assert_eq!(cfg.optimizer.restarts, 8);
        cfg.model.build().unwrap();
        cfg.hypothesis.build().unwrap();
    }

    #[test]
    fn overrides_apply_after_parse() {
        let f = write_config(&base_config_json());
        let cfg = load_config(
            f.path(),
            &[
                "model.noise.sigma=0.25".into(),
                "trials=5".into(),
                "window=rational".into(),
            ],
            Some(99),
        )
        .unwrap();
        assert_eq!(cfg.trials, 5);
        assert_eq!(cfg.master_seed, 99);
        assert_eq!(cfg.window, "rational");
        match cfg.model.noise {
            NoiseSpec::Gaussian { sigma } => assert_eq!(sigma, 0.25),
            ref other => panic!("unexpected noise {other:?}"),
        }
    }

    #[test]
    fn rejects_non_increasing_m_list() {
        let mut v = base_config_json();
        v["m_list"] = serde_json::json!([400, 100]);
        let f = write_config(&v);
        assert!(load_config(f.path(), &[], None).is_err());
    }

    #[test]
    fn rejects_unknown_window() {
        let f = write_config(&base_config_json());
        let err = load_config(f.path(), &["window=sinc".into()], None).unwrap_err();
        assert!(err.to_string().contains("window"));
    }

    #[test]
    fn schedule_presets() {
        let bounded_model = DistributionModel::new(
            XLaw::Uniform { dim: 1 },
            RegressionFn::SinePi,
            NoiseLaw::Uniform { halfwidth: 1.0 },
        )
        .unwrap();
        let heavy_model = DistributionModel::new(
            XLaw::Uniform { dim: 1 },
            RegressionFn::SinePi,
            NoiseLaw::StudentT { nu: 2.5 },
        )
        .unwrap();
        let p = 0.5;
        let auto = HSchedule::Preset {
            preset: SchedulePreset::Auto,
            p,
        };
        // bounded outputs: m^(1/(2(1+p))) = m^(1/3)
        let h = auto.h_for(1000, 0, 1, &bounded_model).unwrap();
        assert!((h - 1000f64.powf(1.0 / 3.0)).abs() < 1e-12);
        // heavy tails: q = 2.4 -> exponent (1.5)(1.4) = 2.1
        let h = auto.h_for(1000, 0, 1, &heavy_model).unwrap();
        assert!((h - 1000f64.powf(1.0 / 2.1)).abs() < 1e-12);
        // large q caps at min(q-1, 3) = 3
        let gauss_model = DistributionModel::new(
            XLaw::Uniform { dim: 1 },
            RegressionFn::SinePi,
            NoiseLaw::Gaussian { sigma: 1.0 },
        )
        .unwrap();
        let moment = HSchedule::Preset {
            preset: SchedulePreset::Moment,
            p,
        };
        let h = moment.h_for(512, 0, 1, &gauss_model).unwrap();
        assert!((h - 512f64.powf(1.0 / 4.5)).abs() < 1e-12);
    }

    #[test]
    fn explicit_schedule_pairs_with_m_list() {
        let model = DistributionModel::new(
            XLaw::Uniform { dim: 1 },
            RegressionFn::SinePi,
            NoiseLaw::None,
        )
        .unwrap();
        let sched = HSchedule::Explicit {
            explicit: vec![2.0, 4.0, 8.0],
        };
        assert_eq!(sched.h_for(100, 1, 3, &model).unwrap(), 4.0);
        assert!(sched.h_for(100, 0, 2, &model).is_err());
        let single = HSchedule::Explicit {
            explicit: vec![1.5],
        };
        assert_eq!(single.h_for(100, 2, 5, &model).unwrap(), 1.5);
    }
}
