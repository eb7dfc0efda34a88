//! One sequential quantum probability ratio test (SQPRT).
//!
//! At step `k` a POVM is chosen by the strategy, one copy of the unknown
//! state is measured, and the log-likelihood increment
//! `Z_k = log Tr[ρ₀ M_k(X_k)] − log Tr[ρ₁ M_k(X_k)]` is added to
//! `S_k = Σ_{j≤k} Z_j`. The test stops at the first `k` with
//! `S_k ∉ (−A, B)`, declaring `ρ₀` when `S_k ≥ B` and `ρ₁` when `S_k ≤ −A`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::{measured_relative_entropy_between, relative_entropy, OptimizerOptions};
use crate::error::{Error, Result};
use crate::model::{born_distribution, DensityMatrix, Povm, StatePair};

/// Floor on the default step cap.
pub const MIN_STEP_CAP: u64 = 10_000;

/// Thresholds `A`, `B` (nats) and the simulator's step cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqprtParams {
    pub a: f64,
    pub b: f64,
    pub t_max: u64,
}

impl SqprtParams {
    pub fn new(a: f64, b: f64, t_max: u64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::OutOfRange(format!("thresholds must be positive, got A = {a}, B = {b}")));
        }
        if t_max == 0 {
            return Err(Error::OutOfRange("step cap must be at least 1".into()));
        }
        Ok(SqprtParams { a, b, t_max })
    }

    /// Thresholds with the default step cap for drift `d_m`.
    pub fn with_default_cap(a: f64, b: f64, d_m: f64) -> Result<Self> {
        Self::new(a, b, default_step_cap(a, b, d_m))
    }
}

/// `max(10⁴, ⌈50·max(A, B) / max(d_m, 10⁻⁶)⌉)`.
pub fn default_step_cap(a: f64, b: f64, d_m: f64) -> u64 {
    let raw = (50.0 * a.max(b) / d_m.max(1e-6)).ceil();
    if raw.is_finite() && raw < u64::MAX as f64 {
        (raw as u64).max(MIN_STEP_CAP)
    } else {
        u64::MAX
    }
}

/// `A_n = n(D_M(ρ₁‖ρ₀) − τ)`, `B_n = n(D_M(ρ₀‖ρ₁) − τ)`.
pub fn thresholds_for(n: u64, tau: f64, d_m_10: f64, d_m_01: f64) -> Result<SqprtParams> {
    if n == 0 {
        return Err(Error::OutOfRange("n must be at least 1".into()));
    }
    let limit = d_m_10.min(d_m_01);
    if tau.is_nan() || tau <= 0.0 || tau >= limit {
        return Err(Error::TauTooLarge { tau, limit });
    }
    let n = n as f64;
    SqprtParams::with_default_cap(n * (d_m_10 - tau), n * (d_m_01 - tau), limit)
}

/// Measurement policy.
#[derive(Clone, Debug)]
pub enum Strategy {
    /// `m*₀` while `S_{k−1} ≥ 0`, `m*₁` otherwise; a fair coin at `k = 1`.
    AdaptiveTwoPoint { m_star_0: Povm, m_star_1: Povm },
    Fixed(Povm),
    /// Deterministic time sharing: block `j` is used `r_j` times per period.
    Cyclic(Vec<(Povm, u32)>),
}

impl Strategy {
    pub fn adaptive(m_star_0: Povm, m_star_1: Povm) -> Result<Self> {
        if m_star_0.dim() != m_star_1.dim() {
            return Err(Error::DimensionMismatch("adaptive POVMs differ in dimension".into()));
        }
        Ok(Strategy::AdaptiveTwoPoint { m_star_0, m_star_1 })
    }

    /// Cyclic schedule; labels of block `j` are prefixed with `"j:"` so the
    /// outcome sets stay disjoint.
    pub fn cyclic(blocks: Vec<(Povm, u32)>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("cyclic schedule needs at least one block".into()));
        }
        let d = blocks[0].0.dim();
        if blocks.iter().any(|(m, _)| m.dim() != d) {
            return Err(Error::DimensionMismatch("cyclic POVMs differ in dimension".into()));
        }
        if blocks.iter().any(|&(_, r)| r == 0) {
            return Err(Error::InvalidArgument("cyclic counts must be positive".into()));
        }
        Ok(Strategy::Cyclic(
            blocks
                .into_iter()
                .enumerate()
                .map(|(j, (m, r))| (m.with_label_prefix(&format!("{}:", j + 1)), r))
                .collect(),
        ))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Strategy::AdaptiveTwoPoint { .. } => "adaptive_two_point",
            Strategy::Fixed(_) => "fixed",
            Strategy::Cyclic(_) => "cyclic",
        }
    }

    pub fn povms(&self) -> Vec<&Povm> {
        match self {
            Strategy::AdaptiveTwoPoint { m_star_0, m_star_1 } => vec![m_star_0, m_star_1],
            Strategy::Fixed(m) => vec![m],
            Strategy::Cyclic(blocks) => blocks.iter().map(|(m, _)| m).collect(),
        }
    }

    pub fn povm(&self, index: usize) -> &Povm {
        self.povms()[index]
    }

    pub fn dim(&self) -> usize {
        self.povms()[0].dim()
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, Strategy::AdaptiveTwoPoint { .. })
    }

    /// POVM index at step `k` for non-adaptive strategies.
    pub fn scheduled_index(&self, k: u64) -> Option<usize> {
        match self {
            Strategy::AdaptiveTwoPoint { .. } => None,
            Strategy::Fixed(_) => Some(0),
            Strategy::Cyclic(blocks) => {
                let q: u64 = blocks.iter().map(|&(_, r)| r as u64).sum();
                // remainder 0 belongs to the last block
                let pos = (k - 1) % q + 1;
                let mut cum = 0u64;
                for (j, &(_, r)) in blocks.iter().enumerate() {
                    cum += r as u64;
                    if pos <= cum {
                        return Some(j);
                    }
                }
                unreachable!("position within one period")
            }
        }
    }
}

/// `m*₀` maximizes `D(P_{ρ₀,m}‖P_{ρ₁,m})`, `m*₁` maximizes the reverse.
pub fn build_adaptive_strategy(pair: &StatePair, opts: &OptimizerOptions) -> Result<Strategy> {
    let d = relative_entropy(&pair.rho0, &pair.rho1)?;
    if d <= 1e-12 {
        return Err(Error::NotDistinguishable(d));
    }
    let m0 = measured_relative_entropy_between(&pair.rho0, &pair.rho1, opts)?;
    let m1 = measured_relative_entropy_between(&pair.rho1, &pair.rho0, opts)?;
    Strategy::adaptive(m0.povm, m1.povm)
}

/// Index of the POVM used at step `k` given `S_{k−1}`.
pub fn next_povm(strategy: &Strategy, k: u64, s_prev: f64, rng: &mut impl Rng) -> usize {
    match strategy {
        Strategy::AdaptiveTwoPoint { .. } => {
            if k == 1 {
                if rng.random::<f64>() < 0.5 {
                    0
                } else {
                    1
                }
            } else if s_prev >= 0.0 {
                0
            } else {
                1
            }
        }
        _ => strategy.scheduled_index(k).expect("non-adaptive schedule"),
    }
}

/// `log Tr[ρ₀ m(x)] − log Tr[ρ₁ m(x)]`.
pub fn increment(povm: &Povm, outcome: usize, pair: &StatePair) -> Result<f64> {
    if outcome >= povm.len() {
        return Err(Error::OutOfRange(format!("outcome {outcome} of {}", povm.len())));
    }
    if povm.dim() != pair.dim() {
        return Err(Error::DimensionMismatch("POVM and states differ in dimension".into()));
    }
    if povm.element_is_zero(outcome) {
        return Err(Error::ZeroProbabilityOutcome(outcome));
    }
    let e = &povm.elements()[outcome];
    let p0 = pair.rho0.matrix().trace_product_re(e);
    let p1 = pair.rho1.matrix().trace_product_re(e);
    if !(p0 > 0.0 && p1 > 0.0) {
        return Err(Error::ZeroProbabilityOutcome(outcome));
    }
    Ok(p0.ln() - p1.ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    H0,
    H1,
    Truncated,
}

/// One recorded step of a trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub k: u64,
    pub povm_index: usize,
    pub outcome: usize,
    pub z: f64,
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub stopping_time: u64,
    pub decision: Decision,
    pub terminal_statistic: f64,
    pub hit_cap: bool,
    pub trajectory: Option<Vec<Step>>,
}

struct OutcomeTable {
    cdf: Vec<f64>,
    increments: Vec<f64>,
    fallback: usize,
}

impl OutcomeTable {
    fn sample(&self, u: f64) -> usize {
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.fallback)
    }
}

/// Precomputed sampling and increment tables for one (true state, pair,
/// strategy) combination; shared read-only across trials.
pub struct TrialKernel<'a> {
    strategy: &'a Strategy,
    tables: Vec<OutcomeTable>,
}

impl<'a> TrialKernel<'a> {
    pub fn new(true_state: &DensityMatrix, pair: &StatePair, strategy: &'a Strategy) -> Result<Self> {
        if true_state.dim() != pair.dim() || strategy.dim() != pair.dim() {
            return Err(Error::DimensionMismatch(
                "true state, hypotheses and strategy must share a dimension".into(),
            ));
        }
        let mut tables = Vec::new();
        for povm in strategy.povms() {
            let mut probs = born_distribution(true_state, povm)?;
            let mut increments = Vec::with_capacity(povm.len());
            for (x, p) in probs.iter_mut().enumerate() {
                match increment(povm, x, pair) {
                    Ok(z) => increments.push(z),
                    Err(Error::ZeroProbabilityOutcome(_)) => {
                        *p = 0.0;
                        increments.push(f64::NAN);
                    }
                    Err(e) => return Err(e),
                }
            }
            let total: f64 = probs.iter().sum();
            if total <= 0.0 {
                return Err(Error::ZeroProbabilityOutcome(0));
            }
            let mut acc = 0.0;
            let cdf: Vec<f64> = probs
                .iter()
                .map(|p| {
                    acc += p / total;
                    acc
                })
                .collect();
            let fallback = probs.iter().rposition(|&p| p > 0.0).expect("positive mass");
            tables.push(OutcomeTable {
                cdf,
                increments,
                fallback,
            });
        }
        Ok(TrialKernel { strategy, tables })
    }

    /// Runs one test to its stopping time or the step cap.
    pub fn run(&self, params: &SqprtParams, rng: &mut impl Rng, record: bool) -> TrialOutcome {
        let mut s = 0.0;
        let mut trajectory = record.then(Vec::new);
        let mut k = 0;
        while k < params.t_max {
            k += 1;
            let idx = next_povm(self.strategy, k, s, rng);
            let table = &self.tables[idx];
            let x = table.sample(rng.random::<f64>());
            let z = table.increments[x];
            s += z;
            if let Some(t) = trajectory.as_mut() {
                t.push(Step {
                    k,
                    povm_index: idx,
                    outcome: x,
                    z,
                    s,
                });
            }
            let decision = if s >= params.b {
                Some(Decision::H0)
            } else if s <= -params.a {
                Some(Decision::H1)
            } else {
                None
            };
            if let Some(decision) = decision {
                return TrialOutcome {
                    stopping_time: k,
                    decision,
                    terminal_statistic: s,
                    hit_cap: false,
                    trajectory,
                };
            }
        }
        TrialOutcome {
            stopping_time: k,
            decision: Decision::Truncated,
            terminal_statistic: s,
            hit_cap: true,
            trajectory,
        }
    }
}

/// Convenience wrapper building a kernel for a single trial.
pub fn run_trial(
    true_state: &DensityMatrix,
    pair: &StatePair,
    strategy: &Strategy,
    params: &SqprtParams,
    rng: &mut impl Rng,
    record_trajectory: bool,
) -> Result<TrialOutcome> {
    Ok(TrialKernel::new(true_state, pair, strategy)?.run(params, rng, record_trajectory))
}

/// Writes trajectory rows `trial_id,k,povm_index,outcome,z_k,s_k`.
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    trials: &[(u64, &TrialOutcome)],
    strategy: &Strategy,
) -> std::io::Result<()> {
    writeln!(out, "trial_id,k,povm_index,outcome,z_k,s_k")?;
    for (id, trial) in trials {
        for step in trial.trajectory.iter().flatten() {
            let label = &strategy.povm(step.povm_index).labels()[step.outcome];
            writeln!(
                out,
                "{id},{},{},{label},{:e},{:e}",
                step.k, step.povm_index, step.z, step.s
            )?;
        }
    }
    Ok(())
}
