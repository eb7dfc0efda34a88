//! Batched SQPRT simulation: direct and importance-sampled error estimates,
//! stopping-time statistics and runtime invariant monitors.
//!
//! Trial `i` under hypothesis `h` draws from stream `2i + h` of the master
//! seed, and every reduction runs in trial-index order. A batch is therefore
//! bit-identical for any number of worker threads.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::increment_bound;
use crate::engine::{thresholds_for, Decision, SqprtParams, Strategy, TrialKernel, TrialOutcome};
use crate::error::{Error, Result};
use crate::io::sig12;
use crate::model::StatePair;
use crate::rng::{mix_seed, stream_rng};

/// Slack added to every monitor comparison.
pub const MONITOR_TOL: f64 = 1e-9;

/// Two-sided 95% normal quantile used for Wilson intervals.
const WILSON_Z: f64 = 1.959963984540054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypotheses {
    H0,
    H1,
    Both,
}

impl Hypotheses {
    fn includes(self, h: u8) -> bool {
        matches!((self, h), (Hypotheses::Both, _) | (Hypotheses::H0, 0) | (Hypotheses::H1, 1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    /// Trials per simulated hypothesis.
    pub trials: u64,
    pub seed: u64,
    /// Sample budget used for the exceedance fractions `P(T > n)`.
    pub n: u64,
    pub hypotheses: Hypotheses,
    pub record_trajectories: bool,
}

impl BatchConfig {
    pub fn new(trials: u64, seed: u64, n: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::OutOfRange("at least one trial is required".into()));
        }
        Ok(BatchConfig {
            trials,
            seed,
            n,
            hypotheses: Hypotheses::Both,
            record_trajectories: false,
        })
    }
}

/// A sample mean with its standard error. `events` counts the nonzero
/// summands; binomial estimates also carry a Wilson 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub samples: u64,
    pub events: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wilson: Option<[f64; 2]>,
}

impl Estimate {
    /// Mean and sample-variance standard error; a single sample has `se = 0`.
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Ok(Estimate {
            value: mean,
            se,
            samples: xs.len() as u64,
            events: xs.iter().filter(|&&x| x != 0.0).count() as u64,
            wilson: None,
        })
    }

    pub fn binomial(successes: u64, trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::EmptyInput);
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let se = if trials > 1 { (p * (1.0 - p) / (n - 1.0)).sqrt() } else { 0.0 };
        let z2 = WILSON_Z * WILSON_Z;
        let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
        let half = WILSON_Z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Ok(Estimate {
            value: p,
            se,
            samples: trials,
            events: successes,
            wilson: Some([(centre - half).max(0.0), (centre + half).min(1.0)]),
        })
    }

    pub fn relative_se(&self) -> f64 {
        if self.value > 0.0 {
            self.se / self.value
        } else {
            0.0
        }
    }

    /// `value ≤ bound·(1 + 3·relSE)`.
    pub fn within_bound(&self, bound: f64) -> bool {
        self.value <= bound * (1.0 + 3.0 * self.relative_se())
    }
}

/// Counts of monitor failures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violations {
    /// `|Z_k| > C`.
    pub increment_bound: u64,
    /// POVM choice disagrees with the strategy.
    pub policy: u64,
    /// Running sum inconsistent, early exit from `(−A, B)`, or wrong decision.
    pub stopping_rule: u64,
    /// Terminal overshoot beyond `C`.
    pub overshoot: u64,
}

impl Violations {
    pub fn total(&self) -> u64 {
        self.increment_bound + self.policy + self.stopping_rule + self.overshoot
    }

    fn absorb(&mut self, other: Violations) {
        self.increment_bound += other.increment_bound;
        self.policy += other.policy;
        self.stopping_rule += other.stopping_rule;
        self.overshoot += other.overshoot;
    }
}

/// Checks one recorded trajectory against the increment bound `c`, the
/// strategy and the stopping rule.
pub fn check_trajectory(
    trial: &TrialOutcome,
    c: f64,
    strategy: &Strategy,
    params: &SqprtParams,
) -> Result<Violations> {
    let steps = trial.trajectory.as_deref().ok_or(Error::NoTrajectories)?;
    let mut v = Violations::default();
    let mut s_prev = 0.0;
    let last = steps.len();
    if last as u64 != trial.stopping_time {
        v.stopping_rule += 1;
    }
    for (i, step) in steps.iter().enumerate() {
        if step.z.abs() > c + MONITOR_TOL {
            v.increment_bound += 1;
        }
        let expected = match strategy {
            Strategy::AdaptiveTwoPoint { .. } if step.k == 1 => None,
            Strategy::AdaptiveTwoPoint { .. } => Some(if s_prev >= 0.0 { 0 } else { 1 }),
            _ => strategy.scheduled_index(step.k),
        };
        if step.k != i as u64 + 1 || expected.is_some_and(|j| j != step.povm_index) {
            v.policy += 1;
        }
        let inside = step.s > -params.a && step.s < params.b;
        if step.s != s_prev + step.z || (i + 1 < last && !inside) {
            v.stopping_rule += 1;
        }
        s_prev = step.s;
    }
    let s_t = trial.terminal_statistic;
    let decision_ok = match trial.decision {
        Decision::H0 => s_t >= params.b,
        Decision::H1 => s_t <= -params.a,
        Decision::Truncated => s_t > -params.a && s_t < params.b && trial.hit_cap,
    };
    if !decision_ok || (last > 0 && s_t != s_prev) {
        v.stopping_rule += 1;
    }
    let overshoot = match trial.decision {
        Decision::H0 => s_t - params.b,
        Decision::H1 => -params.a - s_t,
        Decision::Truncated => 0.0,
    };
    if overshoot > c + MONITOR_TOL {
        v.overshoot += 1;
    }
    Ok(v)
}

/// Monitor report over a set of recorded trials, with `C` taken from `pair`.
pub fn monitor_invariants(
    outcomes: &[TrialOutcome],
    pair: &StatePair,
    strategy: &Strategy,
    params: &SqprtParams,
) -> Result<Violations> {
    if outcomes.is_empty() {
        return Err(Error::NoTrajectories);
    }
    let c = increment_bound(pair)?.c;
    let mut total = Violations::default();
    for t in outcomes {
        total.absorb(check_trajectory(t, c, strategy, params)?);
    }
    Ok(total)
}

fn importance_weights(outcomes: &[TrialOutcome], target: Decision, sign: f64) -> Result<Estimate> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let truncated = outcomes.iter().filter(|t| t.decision == Decision::Truncated).count();
    if truncated > 0 {
        return Err(Error::TruncatedPresent(truncated));
    }
    let weights: Vec<f64> = outcomes
        .iter()
        .map(|t| {
            if t.decision == target {
                (sign * t.terminal_statistic).exp()
            } else {
                0.0
            }
        })
        .collect();
    Estimate::from_samples(&weights)
}

/// `β̂ = mean of 1{decide 0}·e^{−S_T}` over trials run under `ρ₀`.
pub fn importance_beta(outcomes_under_h0: &[TrialOutcome]) -> Result<Estimate> {
    importance_weights(outcomes_under_h0, Decision::H0, -1.0)
}

/// `α̂ = mean of 1{decide 1}·e^{S_T}` over trials run under `ρ₁`.
pub fn importance_alpha(outcomes_under_h1: &[TrialOutcome]) -> Result<Estimate> {
    importance_weights(outcomes_under_h1, Decision::H1, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchEstimate {
    pub trials: u64,
    pub n: u64,
    pub a: f64,
    pub b: f64,
    pub t_max: u64,
    pub increment_bound: f64,
    /// Fraction of `ρ₀` trials deciding `ρ₁`.
    pub alpha_hat: Option<Estimate>,
    /// Fraction of `ρ₁` trials deciding `ρ₀`.
    pub beta_hat: Option<Estimate>,
    /// Change-of-measure estimate of `α` from `ρ₁` trials.
    pub alpha_hat_is: Option<Estimate>,
    /// Change-of-measure estimate of `β` from `ρ₀` trials.
    pub beta_hat_is: Option<Estimate>,
    pub mean_t0: Option<Estimate>,
    pub mean_t1: Option<Estimate>,
    pub exceedance_0: Option<f64>,
    pub exceedance_1: Option<f64>,
    pub truncated_0: u64,
    pub truncated_1: u64,
    pub truncated_count: u64,
    pub violations: Violations,
    /// False when every trial of some simulated hypothesis hit the step cap.
    pub usable: bool,
}

impl BatchEstimate {
    /// `log(1/β̂_IS) / E₀[T]`.
    pub fn slope_0(&self) -> Option<f64> {
        slope(self.beta_hat_is.as_ref()?, self.mean_t0.as_ref()?)
    }

    /// `log(1/α̂_IS) / E₁[T]`.
    pub fn slope_1(&self) -> Option<f64> {
        slope(self.alpha_hat_is.as_ref()?, self.mean_t1.as_ref()?)
    }
}

fn slope(err: &Estimate, mean_t: &Estimate) -> Option<f64> {
    (err.value > 0.0 && mean_t.value > 0.0).then(|| -err.value.ln() / mean_t.value)
}

/// Full batch result; trial outcomes carry trajectories only when the
/// configuration asked for them.
#[derive(Clone, Debug)]
pub struct BatchRun {
    pub estimate: BatchEstimate,
    pub outcomes_h0: Vec<TrialOutcome>,
    pub outcomes_h1: Vec<TrialOutcome>,
}

struct HypothesisSummary {
    direct_error: Estimate,
    is_error: Option<Estimate>,
    mean_t: Estimate,
    exceedance: f64,
    truncated: u64,
}

type Estimator = fn(&[TrialOutcome]) -> Result<Estimate>;

fn summarize(outcomes: &[TrialOutcome], h: u8, n: u64) -> Result<HypothesisSummary> {
    let (wrong, is): (Decision, Estimator) = if h == 0 {
        (Decision::H1, importance_beta)
    } else {
        (Decision::H0, importance_alpha)
    };
    let errors = outcomes.iter().filter(|t| t.decision == wrong).count() as u64;
    let stopped: Vec<TrialOutcome> = outcomes
        .iter()
        .filter(|t| t.decision != Decision::Truncated)
        .cloned()
        .collect();
    let truncated = (outcomes.len() - stopped.len()) as u64;
    let is_error = if stopped.is_empty() { None } else { Some(is(&stopped)?) };
    let times: Vec<f64> = outcomes.iter().map(|t| t.stopping_time as f64).collect();
    let exceed = outcomes.iter().filter(|t| t.hit_cap || t.stopping_time > n).count();
    Ok(HypothesisSummary {
        direct_error: Estimate::binomial(errors, outcomes.len() as u64)?,
        is_error,
        mean_t: Estimate::from_samples(&times)?,
        exceedance: exceed as f64 / outcomes.len() as f64,
        truncated,
    })
}

/// Runs `config.trials` independent tests under each requested hypothesis.
pub fn run_batch_detailed(
    pair: &StatePair,
    strategy: &Strategy,
    params: &SqprtParams,
    config: &BatchConfig,
) -> Result<BatchRun> {
    if config.trials == 0 {
        return Err(Error::OutOfRange("at least one trial is required".into()));
    }
    let c = increment_bound(pair)?.c;
    let mut violations = Violations::default();
    let mut outcomes: [Vec<TrialOutcome>; 2] = [Vec::new(), Vec::new()];
    for h in 0..2u8 {
        if !config.hypotheses.includes(h) {
            continue;
        }
        let truth = if h == 0 { &pair.rho0 } else { &pair.rho1 };
        let kernel = TrialKernel::new(truth, pair, strategy)?;
        let results: Vec<(TrialOutcome, Violations)> = (0..config.trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(config.seed, 2 * i + h as u64);
                let mut trial = kernel.run(params, &mut rng, true);
                let v = check_trajectory(&trial, c, strategy, params).expect("trajectory recorded");
                if !config.record_trajectories {
                    trial.trajectory = None;
                }
                (trial, v)
            })
            .collect();
        let mut list = Vec::with_capacity(results.len());
        for (trial, v) in results {
            violations.absorb(v);
            list.push(trial);
        }
        outcomes[h as usize] = list;
    }
    let s0 = (!outcomes[0].is_empty())
        .then(|| summarize(&outcomes[0], 0, config.n))
        .transpose()?;
    let s1 = (!outcomes[1].is_empty())
        .then(|| summarize(&outcomes[1], 1, config.n))
        .transpose()?;
    let usable = [&s0, &s1]
        .iter()
        .all(|s| s.as_ref().is_none_or(|s| s.is_error.is_some()));
    let truncated_0 = s0.as_ref().map_or(0, |s| s.truncated);
    let truncated_1 = s1.as_ref().map_or(0, |s| s.truncated);
    let estimate = BatchEstimate {
        trials: config.trials,
        n: config.n,
        a: params.a,
        b: params.b,
        t_max: params.t_max,
        increment_bound: c,
        alpha_hat: s0.as_ref().map(|s| s.direct_error),
        beta_hat: s1.as_ref().map(|s| s.direct_error),
        alpha_hat_is: s1.as_ref().and_then(|s| s.is_error),
        beta_hat_is: s0.as_ref().and_then(|s| s.is_error),
        mean_t0: s0.as_ref().map(|s| s.mean_t),
        mean_t1: s1.as_ref().map(|s| s.mean_t),
        exceedance_0: s0.as_ref().map(|s| s.exceedance),
        exceedance_1: s1.as_ref().map(|s| s.exceedance),
        truncated_0,
        truncated_1,
        truncated_count: truncated_0 + truncated_1,
        violations,
        usable,
    };
    let [outcomes_h0, outcomes_h1] = outcomes;
    Ok(BatchRun {
        estimate,
        outcomes_h0,
        outcomes_h1,
    })
}

pub fn run_batch(
    pair: &StatePair,
    strategy: &Strategy,
    params: &SqprtParams,
    config: &BatchConfig,
) -> Result<BatchEstimate> {
    Ok(run_batch_detailed(pair, strategy, params, config)?.estimate)
}

/// One row of an exponent sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub seed: u64,
    pub estimate: BatchEstimate,
    pub slope_0: Option<f64>,
    pub slope_1: Option<f64>,
}

/// Batches at thresholds `A_n`, `B_n` for each `n`, given the measured
/// relative entropies `d_m_10 = D_M(ρ₁‖ρ₀)` and `d_m_01 = D_M(ρ₀‖ρ₁)`.
/// The batch for `n` uses seed `mix_seed(seed, n)`.
#[allow(clippy::too_many_arguments)]
pub fn exponent_sweep(
    pair: &StatePair,
    strategy: &Strategy,
    d_m_10: f64,
    d_m_01: f64,
    n_values: &[u64],
    tau: f64,
    trials: u64,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if n_values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n values must be strictly ascending".into()));
    }
    n_values
        .iter()
        .map(|&n| {
            let params = thresholds_for(n, tau, d_m_10, d_m_01)?;
            let row_seed = mix_seed(seed, n);
            let config = BatchConfig::new(trials, row_seed, n)?;
            let estimate = run_batch(pair, strategy, &params, &config)?;
            Ok(SweepRow {
                n,
                seed: row_seed,
                slope_0: estimate.slope_0(),
                slope_1: estimate.slope_1(),
                estimate,
            })
        })
        .collect()
}

/// Writes the sweep table with header
/// `n,a,b,alpha_is,alpha_is_se,beta_is,beta_is_se,mean_t0,mean_t1,exceed0,exceed1,truncated`.
pub fn write_sweep_csv<W: Write>(out: &mut W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(
        out,
        "n,a,b,alpha_is,alpha_is_se,beta_is,beta_is_se,mean_t0,mean_t1,exceed0,exceed1,truncated"
    )?;
    let val = |e: &Option<Estimate>| sig12(e.map_or(f64::NAN, |e| e.value));
    let se = |e: &Option<Estimate>| sig12(e.map_or(f64::NAN, |e| e.se));
    for row in rows {
        let e = &row.estimate;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.n,
            sig12(e.a),
            sig12(e.b),
            val(&e.alpha_hat_is),
            se(&e.alpha_hat_is),
            val(&e.beta_hat_is),
            se(&e.beta_hat_is),
            val(&e.mean_t0),
            val(&e.mean_t1),
            sig12(e.exceedance_0.unwrap_or(f64::NAN)),
            sig12(e.exceedance_1.unwrap_or(f64::NAN)),
            e.truncated_count
        )?;
    }
    Ok(())
}
