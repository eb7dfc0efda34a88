//! Acceptance gate: runs the ten acceptance criteria and prints one
//! PASS/FAIL line per criterion. Every tolerance, sample size and runtime
//! budget is pinned below. The process exits non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use sqht::divergence::{
    classical_kl, max_relative_entropy, measured_relative_entropy, measured_relative_entropy_between,
    qubit_grid_oracle, relative_entropy, OptimizerOptions,
};
use sqht::engine::{build_adaptive_strategy, SqprtParams};
use sqht::matrix::{hermitian_eig, matrix_inv_sqrt_eig, ComplexMatrix, C64};
use sqht::model::{born_distribution, qubit_family, DensityMatrix, Povm, StatePair};
use sqht::montecarlo::{exponent_sweep, run_batch, BatchConfig, SweepRow};
use sqht::regions::{adaptive_region, block_rates, nonadaptive_region, sumrate_sweep, theta_grid};
use sqht::rng::stream_rng;

// criterion 1
const COMMUTING_MEASURED_TOL: f64 = 1e-6;
const COMMUTING_DMAX_TOL: f64 = 1e-10;
const C1_BUDGET: Duration = Duration::from_secs(5);
// criterion 2
const ORACLE_PAIRS: u64 = 20;
const ORACLE_RESOLUTION: usize = 100_000;
const ORACLE_TOL: f64 = 1e-6;
const C2_BUDGET: Duration = Duration::from_secs(60);
// criterion 3
const CHAIN_PAIRS: u64 = 50;
const CHAIN_TOL: f64 = 1e-9;
const POVMS_PER_PAIR: u64 = 5;
const POVM_KL_TOL: f64 = 1e-6;
// criterion 4
const GAP_FACTOR: f64 = 10.0;
const SUMRATE_POINTS: usize = 50;
const SUMRATE_THETA_MIN: f64 = 0.05;
const SUMRATE_THETA_MAX: f64 = 1.57;
const SUMRATE_SLACK: f64 = 2e-6;
const C4_BUDGET: Duration = Duration::from_secs(600);
// criterion 5
const REGION_ANGLES: usize = 64;
const CONTAINMENT_TOL: f64 = 1e-6;
// criteria 6 and 7
const SWEEP_N: [u64; 3] = [20, 40, 80];
const SWEEP_TRIALS: u64 = 100_000;
const TAU_FRACTION: f64 = 0.1;
const SWEEP_SEED: u64 = 2024;
const SLOPE_REL_TOL: f64 = 0.15;
const C6_BUDGET: Duration = Duration::from_secs(600);
// criterion 8
const WALD_THRESHOLD: f64 = 2.0;
const WALD_TRIALS: u64 = 100_000;
const WALD_SEED: u64 = 77;
const WALD_SIGMAS: f64 = 3.0;
const MIN_EVENTS: u64 = 100;
// criterion 9
const BLOCK_TOL: f64 = 1e-6;
const C9_BUDGET: Duration = Duration::from_secs(300);

/// Qubit example used for the sum-rate and region checks.
const R0: f64 = 0.98;
const R1: f64 = 0.98;
const THETA: f64 = 1.57;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn example_pair() -> StatePair {
    qubit_family(R0, R1, THETA).unwrap()
}

fn diag_pair() -> StatePair {
    StatePair::new(
        DensityMatrix::from_diagonal(&[0.6, 0.4]).unwrap(),
        DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap(),
        "diag",
    )
    .unwrap()
}

fn within_budget(start: Instant, budget: Duration) -> (bool, String) {
    let took = start.elapsed();
    (took <= budget, format!("{:.1}s of {}s", took.as_secs_f64(), budget.as_secs()))
}

fn commuting_exactness() -> Verdict {
    let start = Instant::now();
    let pair = diag_pair();
    let opts = OptimizerOptions::default();
    let (p, q) = ([0.6, 0.4], [0.3, 0.7]);
    let kl01 = classical_kl(&p, &q).unwrap();
    let kl10 = classical_kl(&q, &p).unwrap();
    let m01 = measured_relative_entropy(&pair, &opts).unwrap().value;
    let m10 = measured_relative_entropy_between(&pair.rho1, &pair.rho0, &opts).unwrap().value;
    let x01 = max_relative_entropy(&pair.rho0, &pair.rho1).unwrap();
    let x10 = max_relative_entropy(&pair.rho1, &pair.rho0).unwrap();
    let errs = [
        (m01 - kl01).abs(),
        (m10 - kl10).abs(),
        (x01 - 2f64.ln()).abs(),
        (x10 - (7.0f64 / 4.0).ln()).abs(),
    ];
    let (in_time, t) = within_budget(start, C1_BUDGET);
    verdict(
        errs[0] <= COMMUTING_MEASURED_TOL
            && errs[1] <= COMMUTING_MEASURED_TOL
            && errs[2] <= COMMUTING_DMAX_TOL
            && errs[3] <= COMMUTING_DMAX_TOL
            && in_time,
        format!("D_M errors {:.1e}/{:.1e}, D_max errors {:.1e}/{:.1e}, {t}", errs[0], errs[1], errs[2], errs[3]),
    )
}

fn bloch_state(r: [f64; 3]) -> DensityMatrix {
    let m = ComplexMatrix::new(
        2,
        2,
        vec![
            C64::new((1.0 + r[2]) / 2.0, 0.0),
            C64::new(r[0] / 2.0, -r[1] / 2.0),
            C64::new(r[0] / 2.0, r[1] / 2.0),
            C64::new((1.0 - r[2]) / 2.0, 0.0),
        ],
    )
    .unwrap();
    DensityMatrix::new(m).unwrap()
}

fn random_bloch(rng: &mut impl Rng) -> [f64; 3] {
    // uniform direction, radius up to 0.95 so both states keep full support
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let rad = 0.95 * rng.random::<f64>();
    let s = (1.0 - z * z).sqrt();
    [rad * s * phi.cos(), rad * s * phi.sin(), rad * z]
}

fn oracle_agreement() -> Verdict {
    let start = Instant::now();
    let opts = OptimizerOptions::default();
    let mut pairs: Vec<StatePair> = (0..ORACLE_PAIRS)
        .map(|i| {
            let mut rng = stream_rng(101, i);
            let a = bloch_state(random_bloch(&mut rng));
            let b = bloch_state(random_bloch(&mut rng));
            StatePair::new(a, b, format!("random-{i}")).unwrap()
        })
        .collect();
    pairs.push(example_pair());
    let mut worst = 0.0f64;
    for pair in &pairs {
        let opt = measured_relative_entropy(pair, &opts).unwrap().value;
        let oracle = qubit_grid_oracle(pair, ORACLE_RESOLUTION).unwrap();
        worst = worst.max((opt - oracle).abs());
    }
    let (in_time, t) = within_budget(start, C2_BUDGET);
    verdict(
        worst <= ORACLE_TOL && in_time,
        format!("{} pairs, worst |optimizer - oracle| = {worst:.2e}, {t}", pairs.len()),
    )
}

fn random_complex(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let entries = (0..rows * cols)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    ComplexMatrix::new(rows, cols, entries).unwrap()
}

fn random_state(rng: &mut impl Rng, d: usize) -> DensityMatrix {
    let g = random_complex(rng, d, d);
    let gg = g.matmul(&g.adjoint());
    let tr = gg.trace().re;
    let mixed = gg
        .scale(0.95 / tr)
        .add(&ComplexMatrix::identity(d).scale(0.05 / d as f64))
        .hermitian_part();
    DensityMatrix::new(mixed).unwrap()
}

/// `S^{-1/2} A_k S^{-1/2}` with `A_k = B_k B_k†` and `S = Σ A_k`.
fn random_povm(rng: &mut impl Rng, d: usize, outcomes: usize) -> Povm {
    let raw: Vec<ComplexMatrix> = (0..outcomes)
        .map(|_| {
            let b = random_complex(rng, d, d);
            b.matmul(&b.adjoint()).hermitian_part()
        })
        .collect();
    let sum = raw.iter().skip(1).fold(raw[0].clone(), |acc, m| acc.add(m));
    let s = matrix_inv_sqrt_eig(&hermitian_eig(&sum).unwrap()).unwrap();
    let elements = raw.iter().map(|a| s.matmul(a).matmul(&s).hermitian_part()).collect();
    Povm::new((0..outcomes).map(|k| k.to_string()).collect(), elements).unwrap()
}

fn ordering_chain() -> Verdict {
    let opts = OptimizerOptions::default();
    let mut failures = Vec::new();
    let mut worst_povm_gap = f64::NEG_INFINITY;
    for i in 0..CHAIN_PAIRS {
        let mut rng = stream_rng(202, i);
        let d = if i % 2 == 0 { 2 } else { 3 };
        let pair = StatePair::new(random_state(&mut rng, d), random_state(&mut rng, d), "random").unwrap();
        let dm = measured_relative_entropy(&pair, &opts).unwrap().value;
        let dq = relative_entropy(&pair.rho0, &pair.rho1).unwrap();
        let dx = max_relative_entropy(&pair.rho0, &pair.rho1).unwrap();
        if !(0.0 <= dm && dm <= dq + CHAIN_TOL && dq <= dx + CHAIN_TOL) {
            failures.push(format!("pair {i}: {dm} / {dq} / {dx}"));
        }
        for _ in 0..POVMS_PER_PAIR {
            let k = rng.random_range(2..=5);
            let m = random_povm(&mut rng, d, k);
            let p0 = born_distribution(&pair.rho0, &m).unwrap();
            let p1 = born_distribution(&pair.rho1, &m).unwrap();
            let kl = classical_kl(&p0, &p1).unwrap();
            worst_povm_gap = worst_povm_gap.max(kl - dm);
            if kl > dm + POVM_KL_TOL {
                failures.push(format!("pair {i}: POVM KL {kl} above D_M {dm}"));
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{CHAIN_PAIRS} pairs, max(POVM KL - D_M) = {worst_povm_gap:.3e}{}",
            failures.first().map_or(String::new(), |f| format!(", first failure: {f}"))
        ),
    )
}

fn sumrate_gap() -> Verdict {
    let start = Instant::now();
    let opts = OptimizerOptions::default();
    let grid = theta_grid(SUMRATE_THETA_MIN, SUMRATE_THETA_MAX, SUMRATE_POINTS).unwrap();
    let rows = sumrate_sweep(R0, R1, &grid, &opts).unwrap();
    let at_example = rows.iter().find(|r| r.theta == THETA).copied().unwrap();
    let at_small = sumrate_sweep(R0, R1, &[0.3], &opts).unwrap()[0];
    let gap = at_example.f - at_example.g;
    let small_gap = at_small.f - at_small.g;
    let ordered = rows.iter().all(|r| r.f >= r.g - SUMRATE_SLACK);
    let (in_time, t) = within_budget(start, C4_BUDGET);
    verdict(
        gap > GAP_FACTOR * opts.tolerance && ordered && gap > small_gap && in_time,
        format!(
            "f - g = {gap:.6} at theta 1.57 vs {small_gap:.6} at 0.3, f >= g on all {} points: {ordered}, {t}",
            rows.len()
        ),
    )
}

fn region_containment() -> Verdict {
    let pair = example_pair();
    let opts = OptimizerOptions::default();
    let rect = adaptive_region(&pair, &opts).unwrap();
    let hull = nonadaptive_region(&pair, REGION_ANGLES, &opts).unwrap();
    let [cx, cy] = rect.vertices[2];
    let inside = hull
        .vertices
        .iter()
        .all(|v| v[0] >= -CONTAINMENT_TOL && v[1] >= -CONTAINMENT_TOL && v[0] <= cx + CONTAINMENT_TOL && v[1] <= cy + CONTAINMENT_TOL);
    let corner_excess = hull.max_support_excess(cx, cy);
    verdict(
        inside && corner_excess > 0.0 && hull.supports.len() >= REGION_ANGLES,
        format!(
            "{} vertices inside rectangle: {inside}, corner violates a support by {corner_excess:.4}",
            hull.vertices.len()
        ),
    )
}

fn adaptive_sweep() -> (Vec<SweepRow>, f64, Duration) {
    let start = Instant::now();
    let pair = example_pair();
    let opts = OptimizerOptions::default();
    let d01 = measured_relative_entropy(&pair, &opts).unwrap().value;
    let d10 = measured_relative_entropy_between(&pair.rho1, &pair.rho0, &opts).unwrap().value;
    let strategy = build_adaptive_strategy(&pair, &opts).unwrap();
    let tau = TAU_FRACTION * d01.min(d10);
    let rows = exponent_sweep(&pair, &strategy, d10, d01, &SWEEP_N, tau, SWEEP_TRIALS, SWEEP_SEED).unwrap();
    (rows, d01, start.elapsed())
}

fn error_bounds(rows: &[SweepRow], took: Duration) -> Verdict {
    let mut ok = took <= C6_BUDGET;
    let mut parts = Vec::new();
    for row in rows {
        let e = &row.estimate;
        let alpha = e.alpha_hat_is.unwrap();
        let beta = e.beta_hat_is.unwrap();
        let a_ok = alpha.within_bound((-e.a).exp());
        let b_ok = beta.within_bound((-e.b).exp());
        let v = e.violations.total();
        ok &= a_ok && b_ok && v == 0 && e.usable;
        parts.push(format!(
            "n={}: alpha_IS*e^A={:.3} beta_IS*e^B={:.3} violations={v}",
            row.n,
            alpha.value * e.a.exp(),
            beta.value * e.b.exp()
        ));
    }
    parts.push(format!("{:.1}s of {}s", took.as_secs_f64(), C6_BUDGET.as_secs()));
    verdict(ok, parts.join(", "))
}

fn exponent_recovery(rows: &[SweepRow], d01: f64) -> Verdict {
    let last = rows.last().unwrap();
    let slope = last.slope_0.unwrap();
    let rel = (slope - d01).abs() / d01;
    let row80 = rows.iter().find(|r| r.n == 80).unwrap();
    let ratio = row80.estimate.mean_t0.unwrap().value / 80.0;
    let e0: Vec<f64> = rows.iter().map(|r| r.estimate.exceedance_0.unwrap()).collect();
    let e1: Vec<f64> = rows.iter().map(|r| r.estimate.exceedance_1.unwrap()).collect();
    let decreasing = |e: &[f64]| e.windows(2).all(|w| w[1] < w[0]);
    verdict(
        rel <= SLOPE_REL_TOL && ratio <= 1.0 && decreasing(&e0) && decreasing(&e1),
        format!(
            "slope {slope:.4} vs D_M {d01:.4} ({:.1}%), E0[T]/n at n=80 = {ratio:.3}, exceedance0 {e0:.3?}, exceedance1 {e1:.3?}",
            100.0 * rel
        ),
    )
}

fn wald_cross_check() -> Verdict {
    let pair = example_pair();
    let opts = OptimizerOptions::default();
    let strategy = build_adaptive_strategy(&pair, &opts).unwrap();
    let d_m = measured_relative_entropy(&pair, &opts).unwrap().value;
    let params = SqprtParams::with_default_cap(WALD_THRESHOLD, WALD_THRESHOLD, d_m).unwrap();
    let config = BatchConfig::new(WALD_TRIALS, WALD_SEED, 1).unwrap();
    let est = run_batch(&pair, &strategy, &params, &config).unwrap();
    let direct = est.beta_hat.unwrap();
    let is = est.beta_hat_is.unwrap();
    let combined = (direct.se.powi(2) + is.se.powi(2)).sqrt();
    let diff = (direct.value - is.value).abs();
    verdict(
        direct.events >= MIN_EVENTS && is.events >= MIN_EVENTS && diff <= WALD_SIGMAS * combined,
        format!(
            "direct {:.5} ({} events) vs IS {:.5} ({} events), |diff| = {:.2} combined SE",
            direct.value,
            direct.events,
            is.value,
            is.events,
            diff / combined
        ),
    )
}

fn block_rate_bounds() -> Verdict {
    let start = Instant::now();
    let pair = example_pair();
    let opts = OptimizerOptions::default();
    let one = block_rates(&pair, 1, &opts).unwrap();
    let two = block_rates(&pair, 2, &opts).unwrap();
    let ok = two.rate_01 >= one.rate_01 - BLOCK_TOL
        && two.rate_10 >= one.rate_10 - BLOCK_TOL
        && two.rate_01 <= two.ceiling_01 + BLOCK_TOL
        && two.rate_10 <= two.ceiling_10 + BLOCK_TOL;
    let (in_time, t) = within_budget(start, C9_BUDGET);
    verdict(
        ok && in_time,
        format!(
            "l=2 rates {:.6}/{:.6}, l=1 rates {:.6}/{:.6}, ceilings {:.6}/{:.6}, {t}",
            two.rate_01, two.rate_10, one.rate_01, one.rate_10, two.ceiling_01, two.ceiling_10
        ),
    )
}

const STATES: [&str; 8] = ["--family", "qubit", "--r0", "0.98", "--r1", "0.98", "--theta", "1.57"];

fn cli_commands() -> Vec<(Vec<&'static str>, Vec<&'static str>)> {
    let with_states = |rest: &[&'static str]| {
        let mut v = rest[..1].to_vec();
        v.extend(STATES);
        v.extend(&rest[1..]);
        v
    };
    vec![
        (with_states(&["divergence", "--block", "2", "--out", "div.json"]), vec!["div.json"]),
        (
            with_states(&["simulate", "--n", "20", "--trials", "2000", "--seed", "7", "--out", "sim.json", "--trajectories", "traj.csv"]),
            vec!["sim.json", "traj.csv"],
        ),
        (
            with_states(&["sweep", "--n-values", "10,20", "--trials", "2000", "--seed", "3", "--out", "sweep.csv"]),
            vec!["sweep.csv", "sweep.meta.json"],
        ),
        (
            with_states(&["region", "--mode", "nonadaptive", "--angles", "16", "--out-dir", "region"]),
            vec!["region/region.csv", "region/supports.csv", "region/region.meta.json"],
        ),
        (
            vec!["sumrate", "--points", "5", "--out-dir", "sumrate"],
            vec!["sumrate/sumrate.csv", "sumrate/sumrate.meta.json"],
        ),
    ]
}

fn run_cli(dir: &Path, args: &[&str], threads: &str) -> bool {
    std::fs::create_dir_all(dir).unwrap();
    Command::new(env!("CARGO_BIN_EXE_sqht"))
        .current_dir(dir)
        .args(args)
        .args(["--threads", threads])
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn cli_determinism() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let mut artifacts = 0;
    for (i, (args, outputs)) in cli_commands().iter().enumerate() {
        let runs = [("a", "1"), ("b", "1"), ("c", "4")];
        for (tag, threads) in runs {
            if !run_cli(&root.path().join(format!("{i}{tag}")), args, threads) {
                mismatches.push(format!("{} failed", args[0]));
            }
        }
        for out in outputs {
            let read = |tag: &str| std::fs::read(root.path().join(format!("{i}{tag}")).join(out)).ok();
            let first = read("a");
            artifacts += 1;
            if first.is_none() || first != read("b") || first != read("c") {
                mismatches.push(format!("{} differs", out));
            }
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "{artifacts} artifacts from 5 commands, runs with --threads 1, 1, 4{}",
            mismatches.first().map_or(String::new(), |m| format!(", {m}"))
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut record = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let v = f();
        println!("criterion {id:>2} {} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((id, name, v));
    };
    record(1, "commuting exactness", &mut commuting_exactness);
    record(2, "oracle agreement", &mut oracle_agreement);
    record(3, "ordering chain", &mut ordering_chain);
    record(4, "adaptive vs non-adaptive gap", &mut sumrate_gap);
    record(5, "region containment", &mut region_containment);
    let (rows, d01, took) = adaptive_sweep();
    record(6, "error bounds", &mut || error_bounds(&rows, took));
    record(7, "exponent recovery", &mut || exponent_recovery(&rows, d01));
    record(8, "change-of-measure cross-check", &mut wald_cross_check);
    record(9, "block rates", &mut block_rate_bounds);
    record(10, "determinism", &mut cli_determinism);
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
