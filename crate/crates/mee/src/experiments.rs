//! Reproducible experiment runners: consistency sweeps over the sample
//! size, bandwidth-decay sweeps, paired comparisons against least squares,
//! and mean-adjustment accuracy checks.
//!
//! Trials run concurrently; each one derives its own seeds from the master
//! seed, and records are sorted by `(m, trial)` before writing, so outputs
//! do not depend on scheduling. Failed trials are logged and counted in the
//! summary while the sweep continues.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::MeeError;
use crate::hypothesis::{HypothesisSpace, Predictor};
use crate::learner::{
    adjusted_estimator, least_squares_baseline, mean_adjustment, minimize_mee, MeeProblem,
};
use crate::optim::random_ball_point;
use crate::oracle::{generate_sample, residual_decay_curve, DistributionModel};
use crate::seed::{child_seed, tag};
use crate::stats::{linear_fit, median, quantile, NeumaierSum};
use crate::windowing::WindowingFunction;

/// One completed trial. The wall time stays out of the CSV so reruns with
/// the same seed are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub m: usize,
    pub trial: u32,
    pub seed: u64,
    pub h: f64,
    /// Monte-Carlo `Var[f_z - f_rho]` and its standard error.
    pub var_fz: f64,
    pub var_fz_se: f64,
    /// `L2(rho_X)` distance of the adjusted estimator to the regression
    /// function, on the same draws.
    pub l2_ftilde: f64,
    /// The computable adjustment quantity `(1/m) sum [f_z(x_i) - proj(y_i)]`.
    pub adjust_quantity: f64,
    /// Monte-Carlo `E[f_z - f_rho]`.
    pub mean_gap_mc: f64,
    /// `|adjust_quantity - mean_gap_mc|`.
    pub adjust_error: f64,
    /// Least-squares baseline distances on the same sample and draws.
    pub ls_var: f64,
    pub ls_var_se: f64,
    pub ls_l2: f64,
    /// Outputs clipped by the `sqrt(m)` projection.
    pub clipped: u64,
    pub objective: f64,
    pub iterations: u64,
    pub restart: u32,
    pub converged: bool,
    #[serde(skip)]
    pub wall_time_ms: u64,
}

/// A trial that could not complete.
#[derive(Debug, Clone, Serialize)]
pub struct TrialFailure {
    pub m: usize,
    pub trial: u32,
    pub error: String,
}

/// Per-sample-size summary of a consistency or comparison sweep.
#[derive(Debug, Clone, Serialize)]
pub struct MSummary {
    pub m: usize,
    pub h: f64,
    pub n_ok: u32,
    pub n_failed: u32,
    pub median_var_fz: f64,
    pub q90_var_fz: f64,
    pub median_l2_ftilde: f64,
    pub q90_l2_ftilde: f64,
    pub median_adjust_error: f64,
    pub q90_adjust_error: f64,
    pub median_ls_var: f64,
    pub q90_ls_var: f64,
    /// Trials where the entropy fit beat least squares on `var` (and the
    /// reverse); reported without asserting dominance either way.
    pub mee_wins: u32,
    pub ls_wins: u32,
}

/// Per-sample-size summary of the mean-adjustment check.
#[derive(Debug, Clone, Serialize)]
pub struct AdjustSummary {
    pub m: usize,
    pub n_ok: u32,
    pub median_adjust_error: f64,
    pub q90_adjust_error: f64,
    pub clipped_total: u64,
    /// `median(m/4) / median(m)` when `m/4` is also in the sweep.
    pub ratio_from_quarter: Option<f64>,
}

/// One residual evaluation of the h-decay sweep.
#[derive(Debug, Clone, Serialize)]
pub struct HDecayRecord {
    pub probe: usize,
    pub h: f64,
    pub residual: f64,
    pub residual_se: f64,
    /// False when the residual sits within 3 standard errors of zero, where
    /// a fitted slope would be unreliable.
    pub above_noise_floor: bool,
}

/// Fitted log-log slope for one probe predictor.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeSummary {
    pub probe: usize,
    pub slope: f64,
    pub intercept: f64,
    pub points_used: usize,
    pub reliable: bool,
}

#[derive(Debug)]
pub struct SweepOutput {
    pub trials: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    pub summary: Vec<MSummary>,
}

#[derive(Debug)]
pub struct AdjustOutput {
    pub trials: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    pub summary: Vec<AdjustSummary>,
}

#[derive(Debug)]
pub struct HDecayOutput {
    pub points: Vec<HDecayRecord>,
    pub summary: Vec<SlopeSummary>,
}

struct RunContext {
    model: DistributionModel,
    space: HypothesisSpace,
    window: WindowingFunction,
}

fn build_context(cfg: &ExperimentConfig) -> Result<RunContext, MeeError> {
    cfg.validate()?;
    Ok(RunContext {
        model: cfg.model.build()?,
        space: cfg.hypothesis.build()?,
        window: cfg.window()?,
    })
}

fn run_one_trial(
    cfg: &ExperimentConfig,
    ctx: &RunContext,
    m_index: usize,
    m: usize,
    trial: u32,
) -> Result<TrialRecord, MeeError> {
    let started = Instant::now();
    let master = cfg.master_seed;
    let key = [m_index as u64, trial as u64];
    let sample_seed = child_seed(master, &[tag::SAMPLE, key[0], key[1]]);
    let fit_seed = child_seed(master, &[tag::FIT, key[0], key[1]]);
    let mc_seed = child_seed(master, &[tag::MC, key[0], key[1]]);

    let h = cfg
        .h_schedule
        .h_for(m, m_index, cfg.m_list.len(), &ctx.model)?;
    let sample = generate_sample(&ctx.model, m, sample_seed)?;
    let prob = MeeProblem::new(&sample, &ctx.space, h, &ctx.window)?;

    let settings = cfg.optimizer.clone().with_seed(fit_seed);
    let fit = minimize_mee(&prob, &settings)?;
    let adjust_quantity = mean_adjustment(&fit.predictor, &ctx.space, &sample)?;
    let f_tilde = adjusted_estimator(&fit.predictor, &ctx.space, &sample)?;

    let ls_settings = cfg
        .optimizer
        .clone()
        .with_seed(child_seed(fit_seed, &[tag::FIT]));
    let ls = least_squares_baseline(&sample, &ctx.space, &ls_settings)?;

    let bound = (m as f64).sqrt();
    let clipped = sample.ys().iter().filter(|y| y.abs() > bound).count() as u64;

    // One X stream feeds every distance so the L2 identity
    // l2^2 = var + (mean - adj)^2 holds on the empirical measure.
    let n_mc = cfg.mc.n_mc;
    let mut rng = ChaCha8Rng::seed_from_u64(mc_seed);
    let mut xbuf = Vec::new();
    let mut v_mee = Vec::with_capacity(n_mc);
    let mut v_ls = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        ctx.model.x_law().draw_into(&mut rng, &mut xbuf);
        let rho = ctx.model.regression_value(&xbuf);
        v_mee.push(ctx.space.evaluate(&fit.predictor, &xbuf)? - rho);
        v_ls.push(ctx.space.evaluate(&ls, &xbuf)? - rho);
    }
    let (mee_mean, mee_var, mee_var_se) = mean_and_variance(&v_mee);
    let (_, ls_var, ls_var_se) = mean_and_variance(&v_ls);
    let l2_ftilde = {
        let mut acc = NeumaierSum::new();
        for &v in &v_mee {
            let e = v + f_tilde.offset; // f_tilde - f_rho = v - adjust
            acc.add(e * e);
        }
        (acc.value() / n_mc as f64).sqrt()
    };
    let ls_l2 = {
        let mut acc = NeumaierSum::new();
        for &v in &v_ls {
            acc.add(v * v);
        }
        (acc.value() / n_mc as f64).sqrt()
    };

    let record = TrialRecord {
        m,
        trial,
        seed: sample_seed,
        h,
        var_fz: mee_var,
        var_fz_se: mee_var_se,
        l2_ftilde,
        adjust_quantity,
        mean_gap_mc: mee_mean,
        adjust_error: (adjust_quantity - mee_mean).abs(),
        ls_var,
        ls_var_se,
        ls_l2,
        clipped,
        objective: fit.diagnostics.objective,
        iterations: fit.diagnostics.iterations,
        restart: fit.diagnostics.restart,
        converged: fit.diagnostics.converged,
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    for (name, v) in [
        ("var_fz", record.var_fz),
        ("l2_ftilde", record.l2_ftilde),
        ("adjust_error", record.adjust_error),
        ("ls_var", record.ls_var),
        ("objective", record.objective),
    ] {
        if !v.is_finite() {
            return Err(MeeError::invalid("record", format!("{name} is not finite")));
        }
    }
    Ok(record)
}

fn mean_and_variance(vals: &[f64]) -> (f64, f64, f64) {
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
    let se = ((m4.value() / n - var * var).max(0.0) / n).sqrt();
    (mean, var, se)
}

/// Run every `(m, trial)` task of the config. Trials execute in parallel
/// and the outcome is independent of scheduling.
fn run_trials(cfg: &ExperimentConfig) -> Result<(Vec<TrialRecord>, Vec<TrialFailure>), MeeError> {
    let ctx = build_context(cfg)?;
    if cfg.m_list.is_empty() {
        return Err(MeeError::invalid("m_list", "must be non-empty for sweeps"));
    }
    let mut tasks = Vec::new();
    for (mi, &m) in cfg.m_list.iter().enumerate() {
        for t in 0..cfg.trials {
            tasks.push((mi, m, t));
        }
    }
    let outcomes: Vec<Result<TrialRecord, TrialFailure>> = tasks
        .par_iter()
        .map(|&(mi, m, t)| {
            run_one_trial(cfg, &ctx, mi, m, t).map_err(|e| {
                log::warn!("trial (m={m}, trial={t}) failed: {e}");
                TrialFailure {
                    m,
                    trial: t,
                    error: e.to_string(),
                }
            })
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    records.sort_by_key(|r| (r.m, r.trial));
    failures.sort_by_key(|f| (f.m, f.trial));
    Ok((records, failures))
}

fn summarize_by_m(
    cfg: &ExperimentConfig,
    records: &[TrialRecord],
    failures: &[TrialFailure],
) -> Vec<MSummary> {
    let mut out = Vec::new();
    for &m in &cfg.m_list {
        let group: Vec<&TrialRecord> = records.iter().filter(|r| r.m == m).collect();
        let n_failed = failures.iter().filter(|f| f.m == m).count() as u32;
        if group.is_empty() {
            continue;
        }
        let col =
            |f: &dyn Fn(&TrialRecord) -> f64| -> Vec<f64> { group.iter().map(|r| f(r)).collect() };
        let var = col(&|r| r.var_fz);
        let l2 = col(&|r| r.l2_ftilde);
        let adj = col(&|r| r.adjust_error);
        let lsv = col(&|r| r.ls_var);
        let mee_wins = group.iter().filter(|r| r.var_fz < r.ls_var).count() as u32;
        out.push(MSummary {
            m,
            h: group[0].h,
            n_ok: group.len() as u32,
            n_failed,
            median_var_fz: median(&var),
            q90_var_fz: quantile(&var, 0.9),
            median_l2_ftilde: median(&l2),
            q90_l2_ftilde: quantile(&l2, 0.9),
            median_adjust_error: median(&adj),
            q90_adjust_error: quantile(&adj, 0.9),
            median_ls_var: median(&lsv),
            q90_ls_var: quantile(&lsv, 0.9),
            mee_wins,
            ls_wins: group.len() as u32 - mee_wins,
        });
    }
    out
}

/// Consistency sweep: fit on growing sample sizes and report oracle
/// distances with per-size medians and 0.9 quantiles.
pub fn run_consistency_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput, MeeError> {
    let (trials, failures) = run_trials(cfg)?;
    let summary = summarize_by_m(cfg, &trials, &failures);
    Ok(SweepOutput {
        trials,
        failures,
        summary,
    })
}

/// Paired comparison: identical samples feed the entropy learner and the
/// least-squares baseline; records carry both sets of distances. No
/// dominance is asserted here, analysis belongs to the report.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<SweepOutput, MeeError> {
    run_consistency_sweep(cfg)
}

/// Mean-adjustment accuracy check: how well the computable adjustment
/// quantity tracks `E[f_z - f_rho]` as `m` grows, with the ratio of medians
/// across each quadrupling of `m`.
pub fn run_mean_adjustment_check(cfg: &ExperimentConfig) -> Result<AdjustOutput, MeeError> {
    if cfg.m_list.len() < 3 {
        return Err(MeeError::invalid(
            "m_list",
            "mean-adjustment check needs at least 3 sample sizes",
        ));
    }
    let (trials, failures) = run_trials(cfg)?;
    let mut summary = Vec::new();
    let mut medians: Vec<(usize, f64)> = Vec::new();
    for &m in &cfg.m_list {
        let group: Vec<&TrialRecord> = trials.iter().filter(|r| r.m == m).collect();
        if group.is_empty() {
            continue;
        }
        let adj: Vec<f64> = group.iter().map(|r| r.adjust_error).collect();
        let med = median(&adj);
        let ratio_from_quarter = (m % 4 == 0)
            .then_some(m / 4)
            .and_then(|q| medians.iter().find(|(mm, _)| *mm == q))
            .map(|(_, prev)| prev / med);
        medians.push((m, med));
        summary.push(AdjustSummary {
            m,
            n_ok: group.len() as u32,
            median_adjust_error: med,
            q90_adjust_error: quantile(&adj, 0.9),
            clipped_total: group.iter().map(|r| r.clipped).sum(),
            ratio_from_quarter,
        });
    }
    Ok(AdjustOutput {
        trials,
        failures,
        summary,
    })
}

/// Bandwidth-decay sweep: windowing residuals `R(h)` for a fixed probe set
/// of predictors under common random numbers, with fitted log-log slopes.
pub fn run_h_decay_sweep(cfg: &ExperimentConfig) -> Result<HDecayOutput, MeeError> {
    let ctx = build_context(cfg)?;
    let hs = cfg.h_schedule.explicit().ok_or_else(|| {
        MeeError::invalid(
            "h_schedule",
            "the h sweep needs an explicit h list (h_schedule.explicit)",
        )
    })?;
    if hs.len() < 4 {
        return Err(MeeError::invalid(
            "h_schedule.explicit",
            "need at least 4 h values",
        ));
    }
    let (lo, hi) = hs.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &h| {
        (lo.min(h), hi.max(h))
    });
    if hi / lo < 8.0 {
        return Err(MeeError::invalid(
            "h_schedule.explicit",
            "h values must span at least an 8x range",
        ));
    }

    let d = ctx.space.dim();
    let probes: Vec<Predictor> = match &cfg.probes {
        Some(lists) => {
            let mut v = Vec::new();
            for c in lists {
                if c.len() != d {
                    return Err(MeeError::DimensionMismatch {
                        expected: d,
                        got: c.len(),
                    });
                }
                v.push(Predictor::new(c.clone()));
            }
            v
        }
        None => (0..cfg.probe_count.max(1))
            .map(|k| {
                Predictor::new(random_ball_point(
                    d,
                    ctx.space.radius(),
                    child_seed(cfg.master_seed, &[tag::PROBE, k as u64]),
                ))
            })
            .collect(),
    };

    let curves: Vec<Result<Vec<crate::oracle::MCEstimate>, MeeError>> = probes
        .par_iter()
        .enumerate()
        .map(|(k, f)| {
            residual_decay_curve(
                f,
                &ctx.space,
                &ctx.model,
                hs,
                &ctx.window,
                cfg.mc.n_pairs,
                child_seed(cfg.master_seed, &[tag::PAIRS, k as u64]),
            )
        })
        .collect();

    let mut points = Vec::new();
    let mut summary = Vec::new();
    for (k, curve) in curves.into_iter().enumerate() {
        let curve = curve?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut all_above = true;
        for (est, &h) in curve.iter().zip(hs) {
            let above = est.value.abs() > 3.0 * est.std_error && est.value != 0.0;
            all_above &= above;
            points.push(HDecayRecord {
                probe: k,
                h,
                residual: est.value,
                residual_se: est.std_error,
                above_noise_floor: above,
            });
            if est.value != 0.0 {
                xs.push(h.ln());
                ys.push(est.value.abs().ln());
            }
        }
        let (slope, intercept, used) = if xs.len() >= 2 {
            let (s, i) = linear_fit(&xs, &ys);
            (s, i, xs.len())
        } else {
            log::warn!("probe {k}: residuals at or below the noise floor, slope unreliable");
            (0.0, 0.0, xs.len())
        };
        summary.push(SlopeSummary {
            probe: k,
            slope,
            intercept,
            points_used: used,
            reliable: all_above && used == hs.len(),
        });
    }
    Ok(HDecayOutput { points, summary })
}

/// Serialize records to CSV with a header row; field order is the struct
/// declaration order.
pub fn write_csv<T: Serialize>(path: &Path, records: &[T]) -> Result<(), MeeError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| MeeError::invalid("output", format!("{}: {e}", path.display())))?;
    for r in records {
        w.serialize(r)
            .map_err(|e| MeeError::invalid("output", e.to_string()))?;
    }
    w.flush()
        .map_err(|e| MeeError::invalid("output", e.to_string()))?;
    Ok(())
}

impl SweepOutput {
    /// Write `trials.csv` and `summary.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), MeeError> {
        write_csv(&dir.join("trials.csv"), &self.trials)?;
        write_csv(&dir.join("summary.csv"), &self.summary)
    }
}

impl AdjustOutput {
    pub fn write_to(&self, dir: &Path) -> Result<(), MeeError> {
        write_csv(&dir.join("trials.csv"), &self.trials)?;
        write_csv(&dir.join("summary.csv"), &self.summary)
    }
}

impl HDecayOutput {
    pub fn write_to(&self, dir: &Path) -> Result<(), MeeError> {
        write_csv(&dir.join("trials.csv"), &self.points)?;
        write_csv(&dir.join("summary.csv"), &self.summary)
    }
}
