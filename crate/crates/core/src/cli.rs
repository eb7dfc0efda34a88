//! Command-line front end.
//!
//! Every command writes deterministic artifacts: JSON reports carry the crate
//! version and the resolved configuration, and every CSV gets a sidecar
//! `<stem>.meta.json` with the same information so the CSV itself keeps its
//! fixed header. Optimizer randomness uses `mix_seed(seed, 1)` and trial
//! randomness `mix_seed(seed, 2)`, so a single `--seed` controls everything.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::divergence::{
    increment_bound, max_relative_entropy, measured_relative_entropy_between, relative_entropy,
    MeasurementOptimum, OptimizerOptions,
};
use crate::divergence::optimizer::OptimizerMeta;
use crate::engine::{thresholds_for, write_trajectory_csv, SqprtParams, Strategy, TrialOutcome};
use crate::error::{Error, Result};
use crate::io::{parse_povm, parse_state_pair, povm_to_value};
use crate::model::{qubit_family, Povm, StatePair};
use crate::montecarlo::{
    exponent_sweep, run_batch_detailed, write_sweep_csv, BatchConfig, BatchEstimate, Hypotheses,
};
use crate::regions::{
    adaptive_region, block_rates, nonadaptive_region, sumrate_sweep, theta_grid, write_region_csv,
    write_sumrate_csv, write_supports_csv, BlockRates, RegionPolygon, DEFAULT_ANGLES,
};
use crate::rng::mix_seed;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable read for the worker cap when `--threads` is absent.
pub const THREADS_ENV: &str = "SQHT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sqht", version, about = "Sequential quantum hypothesis testing toolkit")]
pub struct Cli {
    /// Worker thread cap; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Relative entropies, measured relative entropies and optimal PVMs.
    Divergence(DivergenceArgs),
    /// Batch simulation of the sequential test at thresholds A_n, B_n.
    Simulate(SimulateArgs),
    /// Batches over several sample budgets n, written as CSV.
    Sweep(SweepArgs),
    /// Adaptive or non-adaptive error-exponent region, written as CSV.
    Region(RegionArgs),
    /// Adaptive and non-adaptive sum rates over a theta grid for the qubit family.
    Sumrate(SumrateArgs),
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Qubit,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct StateArgs {
    /// State-pair JSON file.
    #[arg(long, conflicts_with = "family")]
    pub states: Option<PathBuf>,
    /// Built-in family instead of a file.
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    #[arg(long, requires = "family")]
    pub r0: Option<f64>,
    #[arg(long, requires = "family")]
    pub r1: Option<f64>,
    #[arg(long, requires = "family")]
    pub theta: Option<f64>,
}

impl StateArgs {
    pub fn load(&self) -> Result<StatePair> {
        match (&self.states, self.family) {
            (Some(path), None) => parse_state_pair(&read(path)?),
            (None, Some(Family::Qubit)) => {
                let need = |v: Option<f64>, name: &str| {
                    v.ok_or_else(|| Error::InvalidArgument(format!("--family qubit needs --{name}")))
                };
                qubit_family(need(self.r0, "r0")?, need(self.r1, "r1")?, need(self.theta, "theta")?)
                    .map_err(|e| match e {
                        Error::NotFullSupport { min_eigenvalue } => Error::validation(
                            "full support",
                            format!("minimum eigenvalue {min_eigenvalue:.3e}"),
                        ),
                        other => other,
                    })
            }
            _ => Err(Error::InvalidArgument("give exactly one of --states or --family".into())),
        }
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct OptimizerArgs {
    /// Master seed for all randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random restarts per measurement optimization.
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
}

impl OptimizerArgs {
    fn options(&self) -> Result<OptimizerOptions> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("--restarts must be at least 1".into()));
        }
        Ok(OptimizerOptions::default()
            .with_seed(mix_seed(self.seed, 1))
            .with_restarts(self.restarts))
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct DivergenceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub states: StateArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub optimizer: OptimizerArgs,
    /// Also report per-copy measured rates on l-fold tensor powers.
    #[arg(long, default_value_t = 1)]
    pub block: u32,
    /// Report values in bits instead of nats.
    #[arg(long)]
    pub bits: bool,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ThresholdArgs {
    /// Margin below the measured relative entropies, in nats.
    #[arg(long, conflicts_with = "tau_frac")]
    pub tau: Option<f64>,
    /// Margin as a fraction of min(D_M); used when --tau is absent (default 0.1).
    #[arg(long)]
    pub tau_frac: Option<f64>,
    /// Test strategy: adaptive, fixed:<source> or cyclic:<source,...>:<r1,...>.
    /// A source is optimal01, optimal10, computational or a POVM JSON file.
    #[arg(long, default_value = "adaptive")]
    pub strategy: String,
    /// Trials per hypothesis.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Step cap override.
    #[arg(long)]
    pub t_max: Option<u64>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub states: StateArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub optimizer: OptimizerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub test: ThresholdArgs,
    /// Sample budget n.
    #[arg(long, default_value_t = 20)]
    pub n: u64,
    #[arg(long, value_enum, default_value_t = HypothesisArg::Both)]
    pub hypothesis: HypothesisArg,
    /// Write every trajectory to this CSV; trial_id is 2·index + hypothesis.
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisArg {
    #[value(name = "0")]
    H0,
    #[value(name = "1")]
    H1,
    Both,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub states: StateArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub optimizer: OptimizerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub test: ThresholdArgs,
    /// Ascending sample budgets.
    #[arg(long, value_delimiter = ',', default_value = "20,40,80")]
    pub n_values: Vec<u64>,
    /// CSV output; the sidecar metadata goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RegionMode {
    Adaptive,
    Nonadaptive,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct RegionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub states: StateArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub optimizer: OptimizerArgs,
    #[arg(long, value_enum, default_value_t = RegionMode::Adaptive)]
    pub mode: RegionMode,
    /// Number of supporting half-planes for the non-adaptive region.
    #[arg(long, default_value_t = DEFAULT_ANGLES)]
    pub angles: usize,
    /// Directory receiving region.csv, supports.csv and region.meta.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SumrateArgs {
    #[arg(long, default_value_t = 0.98)]
    pub r0: f64,
    #[arg(long, default_value_t = 0.98)]
    pub r1: f64,
    #[arg(long, default_value_t = 0.05)]
    pub theta_min: f64,
    #[arg(long, default_value_t = 1.57)]
    pub theta_max: f64,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub optimizer: OptimizerArgs,
    /// Directory receiving sumrate.csv and sumrate.meta.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// A failed command: exit code plus the single stderr line.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub tag: String,
    pub message: String,
}

impl Failure {
    pub fn line(&self) -> String {
        format!("error[{}]: {}", self.tag, self.message.replace('\n', " "))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_user_error() { 2 } else { 3 },
            tag: e.tag().to_string(),
            message: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::Io(format!("stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

/// `dir/name.csv` to `dir/name.meta.json`.
fn sidecar(path: &Path) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.meta.json"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

#[derive(Serialize)]
struct Directional {
    #[serde(rename = "rho0||rho1")]
    forward: f64,
    #[serde(rename = "rho1||rho0")]
    reverse: f64,
}

#[derive(Serialize)]
struct Header<'a, C: Serialize> {
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: &'a C,
}

#[derive(Serialize)]
struct DivergenceOutput<'a> {
    #[serde(flatten)]
    header: Header<'a, DivergenceArgs>,
    label: String,
    dim: usize,
    unit: &'static str,
    d_quantum: Directional,
    d_measured: Directional,
    d_max: Directional,
    increment_bound: f64,
    optimal_pvm: OptimalPvms,
    optimizer: OptimizerMetas,
    #[serde(skip_serializing_if = "Option::is_none")]
    block_rates: Option<BlockRates>,
}

#[derive(Serialize)]
struct OptimalPvms {
    #[serde(rename = "rho0||rho1")]
    forward: serde_json::Value,
    #[serde(rename = "rho1||rho0")]
    reverse: serde_json::Value,
}

#[derive(Serialize)]
struct OptimizerMetas {
    #[serde(rename = "rho0||rho1")]
    forward: OptimizerMeta,
    #[serde(rename = "rho1||rho0")]
    reverse: OptimizerMeta,
}

fn cmd_divergence(args: &DivergenceArgs) -> Result<()> {
    let pair = args.states.load()?;
    let opts = args.optimizer.options()?;
    if args.block == 0 {
        return Err(Error::InvalidArgument("--block must be at least 1".into()));
    }
    let m01 = measured_relative_entropy_between(&pair.rho0, &pair.rho1, &opts)?;
    let m10 = measured_relative_entropy_between(&pair.rho1, &pair.rho0, &opts)?;
    let scale = if args.bits { 1.0 / std::f64::consts::LN_2 } else { 1.0 };
    let dir = |a: f64, b: f64| Directional {
        forward: a * scale,
        reverse: b * scale,
    };
    let block = if args.block > 1 {
        let r = block_rates(&pair, args.block, &opts)?;
        Some(BlockRates {
            rate_01: r.rate_01 * scale,
            rate_10: r.rate_10 * scale,
            ceiling_01: r.ceiling_01 * scale,
            ceiling_10: r.ceiling_10 * scale,
            ..r
        })
    } else {
        None
    };
    let report = DivergenceOutput {
        header: Header {
            version: VERSION,
            command: "divergence",
            seed: args.optimizer.seed,
            config: args,
        },
        label: pair.label.clone(),
        dim: pair.dim(),
        unit: if args.bits { "bits" } else { "nats" },
        d_quantum: dir(
            relative_entropy(&pair.rho0, &pair.rho1)?,
            relative_entropy(&pair.rho1, &pair.rho0)?,
        ),
        d_measured: dir(m01.value, m10.value),
        d_max: dir(
            max_relative_entropy(&pair.rho0, &pair.rho1)?,
            max_relative_entropy(&pair.rho1, &pair.rho0)?,
        ),
        increment_bound: increment_bound(&pair)?.c * scale,
        optimal_pvm: OptimalPvms {
            forward: povm_to_value(&m01.povm),
            reverse: povm_to_value(&m10.povm),
        },
        optimizer: OptimizerMetas {
            forward: m01.meta,
            reverse: m10.meta,
        },
        block_rates: block,
    };
    emit(args.out.as_deref(), &to_json(&report))
}

/// Both measured-relative-entropy optima, needed for thresholds and strategies.
struct Optima {
    m01: MeasurementOptimum,
    m10: MeasurementOptimum,
}

impl Optima {
    fn compute(pair: &StatePair, opts: &OptimizerOptions) -> Result<Self> {
        Ok(Optima {
            m01: measured_relative_entropy_between(&pair.rho0, &pair.rho1, opts)?,
            m10: measured_relative_entropy_between(&pair.rho1, &pair.rho0, opts)?,
        })
    }

    fn tau(&self, test: &ThresholdArgs) -> Result<f64> {
        match (test.tau, test.tau_frac) {
            (Some(t), _) => Ok(t),
            (None, frac) => {
                let frac = frac.unwrap_or(0.1);
                if !(frac > 0.0 && frac < 1.0) {
                    return Err(Error::OutOfRange(format!("--tau-frac must lie in (0, 1), got {frac}")));
                }
                Ok(frac * self.m01.value.min(self.m10.value))
            }
        }
    }

    fn thresholds(&self, n: u64, tau: f64, t_max: Option<u64>) -> std::result::Result<SqprtParams, Failure> {
        let params = thresholds_for(n, tau, self.m10.value, self.m01.value).map_err(|e| {
            let mut f = Failure::from(e);
            f.message = format!(
                "{}; D_M(rho0||rho1) = {}, D_M(rho1||rho0) = {}",
                f.message, self.m01.value, self.m10.value
            );
            f
        })?;
        match t_max {
            Some(cap) => Ok(SqprtParams::new(params.a, params.b, cap)?),
            None => Ok(params),
        }
    }
}

fn povm_source(source: &str, pair: &StatePair, optima: &Optima) -> Result<Povm> {
    match source {
        "optimal01" => Ok(optima.m01.povm.clone()),
        "optimal10" => Ok(optima.m10.povm.clone()),
        "computational" => Ok(Povm::computational(pair.dim())),
        path => {
            let m = parse_povm(&read(Path::new(path))?)?;
            if m.dim() != pair.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "POVM {path} has dimension {}, states have {}",
                    m.dim(),
                    pair.dim()
                )));
            }
            Ok(m)
        }
    }
}

/// Parses `adaptive`, `fixed:<source>` or `cyclic:<source,...>:<r1,...>`.
fn parse_strategy(descriptor: &str, pair: &StatePair, optima: &Optima) -> Result<Strategy> {
    if descriptor == "adaptive" {
        return Strategy::adaptive(optima.m01.povm.clone(), optima.m10.povm.clone());
    }
    if let Some(source) = descriptor.strip_prefix("fixed:") {
        return Ok(Strategy::Fixed(povm_source(source, pair, optima)?));
    }
    if let Some(rest) = descriptor.strip_prefix("cyclic:") {
        let (sources, counts) = rest
            .rsplit_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("cyclic strategy needs counts: {descriptor}")))?;
        let sources: Vec<&str> = sources.split(',').collect();
        let counts: Vec<u32> = counts
            .split(',')
            .map(|c| {
                c.trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad cyclic count {c:?}")))
            })
            .collect::<Result<_>>()?;
        if sources.len() != counts.len() {
            return Err(Error::InvalidArgument(format!(
                "{} POVM sources but {} counts",
                sources.len(),
                counts.len()
            )));
        }
        let blocks = sources
            .iter()
            .zip(counts)
            .map(|(s, r)| Ok((povm_source(s, pair, optima)?, r)))
            .collect::<Result<Vec<_>>>()?;
        return Strategy::cyclic(blocks);
    }
    Err(Error::InvalidArgument(format!("unknown strategy {descriptor:?}")))
}

#[derive(Serialize)]
struct Thresholds {
    tau: f64,
    #[serde(rename = "A_n")]
    a_n: f64,
    #[serde(rename = "B_n")]
    b_n: f64,
    t_max: u64,
}

#[derive(Serialize)]
struct Checks {
    alpha_is_within_bound: Option<bool>,
    beta_is_within_bound: Option<bool>,
    slope_0: Option<f64>,
    slope_1: Option<f64>,
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    #[serde(flatten)]
    header: Header<'a, SimulateArgs>,
    trial_seed: u64,
    strategy: &'static str,
    d_measured: Directional,
    thresholds: Thresholds,
    estimate: BatchEstimate,
    checks: Checks,
}

fn cmd_simulate(args: &SimulateArgs) -> std::result::Result<(), Failure> {
    let pair = args.states.load()?;
    let opts = args.optimizer.options()?;
    let optima = Optima::compute(&pair, &opts)?;
    let tau = optima.tau(&args.test)?;
    let params = optima.thresholds(args.n, tau, args.test.t_max)?;
    let strategy = parse_strategy(&args.test.strategy, &pair, &optima)?;
    let trial_seed = mix_seed(args.optimizer.seed, 2);
    let mut config = BatchConfig::new(args.test.trials, trial_seed, args.n)?;
    config.hypotheses = match args.hypothesis {
        HypothesisArg::H0 => Hypotheses::H0,
        HypothesisArg::H1 => Hypotheses::H1,
        HypothesisArg::Both => Hypotheses::Both,
    };
    config.record_trajectories = args.trajectories.is_some();
    let run = run_batch_detailed(&pair, &strategy, &params, &config)?;
    if let Some(path) = &args.trajectories {
        let tagged: Vec<(u64, &TrialOutcome)> = run
            .outcomes_h0
            .iter()
            .enumerate()
            .map(|(i, t)| (2 * i as u64, t))
            .chain(run.outcomes_h1.iter().enumerate().map(|(i, t)| (2 * i as u64 + 1, t)))
            .collect();
        let bytes = csv_bytes(|buf| write_trajectory_csv(buf, &tagged, &strategy));
        write_file(path, &bytes)?;
    }
    let est = run.estimate;
    let checks = Checks {
        alpha_is_within_bound: est.alpha_hat_is.map(|e| e.within_bound((-params.a).exp())),
        beta_is_within_bound: est.beta_hat_is.map(|e| e.within_bound((-params.b).exp())),
        slope_0: est.slope_0(),
        slope_1: est.slope_1(),
    };
    let report = SimulateOutput {
        header: Header {
            version: VERSION,
            command: "simulate",
            seed: args.optimizer.seed,
            config: args,
        },
        trial_seed,
        strategy: strategy.kind(),
        d_measured: Directional {
            forward: optima.m01.value,
            reverse: optima.m10.value,
        },
        thresholds: Thresholds {
            tau,
            a_n: params.a,
            b_n: params.b,
            t_max: params.t_max,
        },
        estimate: est,
        checks,
    };
    Ok(emit(args.out.as_deref(), &to_json(&report))?)
}

#[derive(Serialize)]
struct SweepMeta<'a> {
    #[serde(flatten)]
    header: Header<'a, SweepArgs>,
    trial_seed: u64,
    strategy: &'static str,
    tau: f64,
    d_measured: Directional,
    rows: Vec<SweepMetaRow>,
}

#[derive(Serialize)]
struct SweepMetaRow {
    n: u64,
    seed: u64,
    slope_0: Option<f64>,
    slope_1: Option<f64>,
    violations: u64,
}

fn cmd_sweep(args: &SweepArgs) -> std::result::Result<(), Failure> {
    let pair = args.states.load()?;
    let opts = args.optimizer.options()?;
    let optima = Optima::compute(&pair, &opts)?;
    let tau = optima.tau(&args.test)?;
    for &n in &args.n_values {
        optima.thresholds(n, tau, None)?;
    }
    if args.test.t_max.is_some() {
        return Err(Error::InvalidArgument("sweep uses the default step cap".into()).into());
    }
    let strategy = parse_strategy(&args.test.strategy, &pair, &optima)?;
    let trial_seed = mix_seed(args.optimizer.seed, 2);
    let rows = exponent_sweep(
        &pair,
        &strategy,
        optima.m10.value,
        optima.m01.value,
        &args.n_values,
        tau,
        args.test.trials,
        trial_seed,
    )?;
    write_file(&args.out, &csv_bytes(|buf| write_sweep_csv(buf, &rows)))?;
    let meta = SweepMeta {
        header: Header {
            version: VERSION,
            command: "sweep",
            seed: args.optimizer.seed,
            config: args,
        },
        trial_seed,
        strategy: strategy.kind(),
        tau,
        d_measured: Directional {
            forward: optima.m01.value,
            reverse: optima.m10.value,
        },
        rows: rows
            .iter()
            .map(|r| SweepMetaRow {
                n: r.n,
                seed: r.seed,
                slope_0: r.slope_0,
                slope_1: r.slope_1,
                violations: r.estimate.violations.total(),
            })
            .collect(),
    };
    Ok(write_file(&sidecar(&args.out), to_json(&meta).as_bytes())?)
}

#[derive(Serialize)]
struct RegionMeta<'a> {
    #[serde(flatten)]
    header: Header<'a, RegionArgs>,
    kind: &'static str,
    vertices: usize,
    area: f64,
    extent: [f64; 2],
}

fn cmd_region(args: &RegionArgs) -> Result<()> {
    let pair = args.states.load()?;
    let opts = args.optimizer.options()?;
    let region: RegionPolygon = match args.mode {
        RegionMode::Adaptive => adaptive_region(&pair, &opts)?,
        RegionMode::Nonadaptive => nonadaptive_region(&pair, args.angles, &opts)?,
    };
    ensure_dir(&args.out_dir)?;
    let region_csv = args.out_dir.join("region.csv");
    write_file(&region_csv, &csv_bytes(|b| write_region_csv(b, &region)))?;
    write_file(
        &args.out_dir.join("supports.csv"),
        &csv_bytes(|b| write_supports_csv(b, &region.supports)),
    )?;
    let meta = RegionMeta {
        header: Header {
            version: VERSION,
            command: "region",
            seed: args.optimizer.seed,
            config: args,
        },
        kind: region.kind.name(),
        vertices: region.vertices.len(),
        area: region.area(),
        extent: region.extent(),
    };
    write_file(&sidecar(&region_csv), to_json(&meta).as_bytes())
}

#[derive(Serialize)]
struct SumrateMeta<'a> {
    #[serde(flatten)]
    header: Header<'a, SumrateArgs>,
    rows: usize,
    max_gap: f64,
}

fn cmd_sumrate(args: &SumrateArgs) -> Result<()> {
    let opts = args.optimizer.options()?;
    let grid = theta_grid(args.theta_min, args.theta_max, args.points)?;
    let rows = sumrate_sweep(args.r0, args.r1, &grid, &opts).map_err(|e| match e {
        Error::NotFullSupport { min_eigenvalue } => {
            Error::validation("full support", format!("minimum eigenvalue {min_eigenvalue:.3e}"))
        }
        other => other,
    })?;
    ensure_dir(&args.out_dir)?;
    let csv = args.out_dir.join("sumrate.csv");
    write_file(&csv, &csv_bytes(|b| write_sumrate_csv(b, &rows)))?;
    let meta = SumrateMeta {
        header: Header {
            version: VERSION,
            command: "sumrate",
            seed: args.optimizer.seed,
            config: args,
        },
        rows: rows.len(),
        max_gap: rows.iter().map(|r| r.f - r.g).fold(f64::NEG_INFINITY, f64::max),
    };
    write_file(&sidecar(&csv), to_json(&meta).as_bytes())
}

fn thread_cap(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(0),
    }
}

/// Runs a parsed command inside a pool capped at the requested thread count.
pub fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let threads = thread_cap(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::from(Error::InvalidArgument(format!("thread pool: {e}"))))?;
    pool.install(|| match &cli.command {
        Command::Divergence(a) => Ok(cmd_divergence(a)?),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Region(a) => Ok(cmd_region(a)?),
        Command::Sumrate(a) => Ok(cmd_sumrate(a)?),
    })
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{}", f.line());
            f.code
        }
    }
}
