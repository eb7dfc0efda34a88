//! Multi-start gradient ascent over the unitary group.
//!
//! A measurement is described by a unitary `W` whose rows `w_x` define
//! rank-one elements `m(x) = w_x† w_x`. For states `A`, `B` the outcome
//! probabilities are the diagonals `p = diag(W A W†)` and `q = diag(W B W†)`.
//! Rank-one POVMs with more outcomes than the state dimension are handled by
//! padding `A` and `B` with zeros: the first `d` columns of `W` then form an
//! isometry and its rows give the POVM.
//!
//! The ascent works in the chart `H ↦ exp(iH)·W` around the current point,
//! where `H` is Hermitian (`n²` real parameters). At `H = 0` the gradient of
//! a separable objective `Σ_x φ(p_x, q_x)` is
//! `G = i[Ã, diag(∂φ/∂p)] + i[B̃, diag(∂φ/∂q)]` with `Ã = W A W†`, and
//! the update is `W ← exp(iηG)·W` with a step size adapted by success.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::{hermitian_eig, unitary_exp_eig, ComplexMatrix, C64};
use crate::rng::stream_rng;

/// Below this, both probabilities of an outcome are treated as zero.
pub const ZERO_PROB_GUARD: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Number of random starting points (explicit warm starts are extra).
    pub restarts: usize,
    /// Minimum objective gain over `window` accepted steps.
    pub tolerance: f64,
    pub window: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            restarts: 20,
            tolerance: 1e-10,
            window: 50,
            max_iterations: 20_000,
            seed: 0,
        }
    }
}

impl OptimizerOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    /// Same options with twice the restarts (used for tensor-power states).
    pub fn doubled(&self) -> Self {
        self.clone().with_restarts(self.restarts * 2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerMeta {
    pub restarts: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Separable objective `Σ_x φ(p_x, q_x)`.
pub trait DiagonalObjective: Sync {
    fn value(&self, p: &[f64], q: &[f64]) -> f64;
    /// Writes `∂φ/∂p_x` and `∂φ/∂q_x`.
    fn partials(&self, p: &[f64], q: &[f64], dp: &mut [f64], dq: &mut [f64]);
}

/// `w_pq·KL(p‖q) + w_qp·KL(q‖p)`.
#[derive(Clone, Copy, Debug)]
pub struct WeightedKl {
    pub w_pq: f64,
    pub w_qp: f64,
}

fn both_negligible(p: f64, q: f64) -> bool {
    p < ZERO_PROB_GUARD && q < ZERO_PROB_GUARD
}

impl DiagonalObjective for WeightedKl {
    fn value(&self, p: &[f64], q: &[f64]) -> f64 {
        p.iter()
            .zip(q)
            .filter(|(&a, &b)| !both_negligible(a, b))
            .map(|(&a, &b)| {
                let (a, b) = (a.max(f64::MIN_POSITIVE), b.max(f64::MIN_POSITIVE));
                let r = (a / b).ln();
                self.w_pq * a * r - self.w_qp * b * r
            })
            .sum()
    }

    fn partials(&self, p: &[f64], q: &[f64], dp: &mut [f64], dq: &mut [f64]) {
        for x in 0..p.len() {
            if both_negligible(p[x], q[x]) {
                dp[x] = 0.0;
                dq[x] = 0.0;
                continue;
            }
            let (a, b) = (p[x].max(f64::MIN_POSITIVE), q[x].max(f64::MIN_POSITIVE));
            let r = (a / b).ln();
            dp[x] = self.w_pq * (r + 1.0) - self.w_qp * b / a;
            dq[x] = -self.w_pq * a / b + self.w_qp * (1.0 - r);
        }
    }
}

/// Objective landscape over `n × n` unitaries for a pair of Hermitian
/// matrices of the same size.
pub struct Landscape<'a, O: DiagonalObjective> {
    a: &'a ComplexMatrix,
    b: &'a ComplexMatrix,
    objective: &'a O,
}

/// Cached evaluation at one point.
pub struct Point {
    pub w: ComplexMatrix,
    pub value: f64,
    a_rot: ComplexMatrix,
    b_rot: ComplexMatrix,
    p: Vec<f64>,
    q: Vec<f64>,
}

fn diag_re(m: &ComplexMatrix) -> Vec<f64> {
    (0..m.rows()).map(|i| m.get(i, i).re).collect()
}

impl<'a, O: DiagonalObjective> Landscape<'a, O> {
    pub fn new(a: &'a ComplexMatrix, b: &'a ComplexMatrix, objective: &'a O) -> Self {
        assert_eq!(a.rows(), b.rows());
        Landscape { a, b, objective }
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn evaluate(&self, w: ComplexMatrix) -> Point {
        let a_rot = self.a.conjugate_by(&w);
        let b_rot = self.b.conjugate_by(&w);
        let p = diag_re(&a_rot);
        let q = diag_re(&b_rot);
        let value = self.objective.value(&p, &q);
        Point {
            w,
            value,
            a_rot,
            b_rot,
            p,
            q,
        }
    }

    /// Hermitian gradient `G` in the chart `exp(iH)·W` at `H = 0`; the
    /// directional derivative along Hermitian `E` is `Tr[E G]`.
    pub fn gradient(&self, point: &Point) -> ComplexMatrix {
        let n = self.dim();
        let mut dp = vec![0.0; n];
        let mut dq = vec![0.0; n];
        self.objective.partials(&point.p, &point.q, &mut dp, &mut dq);
        let i = C64::new(0.0, 1.0);
        let mut entries = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                entries.push(
                    i * (point.a_rot.get(j, k) * (dp[k] - dp[j])
                        + point.b_rot.get(j, k) * (dq[k] - dq[j])),
                );
            }
        }
        ComplexMatrix::new(n, n, entries).expect("finite gradient").hermitian_part()
    }
}

pub struct AscentResult {
    pub w: ComplexMatrix,
    pub value: f64,
    pub converged: bool,
    pub gradient_norm: f64,
    pub iterations: usize,
}

const MAX_ROTATION: f64 = 1.0;

/// Adaptive-step gradient ascent from one starting unitary.
pub fn ascend<O: DiagonalObjective>(
    landscape: &Landscape<'_, O>,
    start: ComplexMatrix,
    opts: &OptimizerOptions,
) -> AscentResult {
    let mut point = landscape.evaluate(start);
    let mut history = vec![point.value];
    let mut eta: f64 = 0.1;
    let mut converged = false;
    let mut gradient_norm = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let g = landscape.gradient(&point);
        gradient_norm = g.frobenius_norm();
        if gradient_norm < 1e-13 {
            converged = true;
            break;
        }
        let eig = hermitian_eig(&g).expect("gradient is Hermitian");
        eta = eta.min(MAX_ROTATION / gradient_norm);
        let mut accepted = false;
        while eta * gradient_norm > 1e-16 {
            let candidate = landscape.evaluate(unitary_exp_eig(&eig, eta).matmul(&point.w));
            if candidate.value > point.value {
                point = candidate;
                eta = (eta * 1.5).min(MAX_ROTATION / gradient_norm);
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            // no ascent direction left at machine precision
            converged = true;
            break;
        }
        history.push(point.value);
        if history.len() > opts.window {
            let past = history[history.len() - 1 - opts.window];
            if point.value - past < opts.tolerance {
                converged = true;
                break;
            }
        }
    }
    AscentResult {
        value: point.value,
        w: point.w,
        converged,
        gradient_norm,
        iterations,
    }
}

/// `exp(iH)` for a random Hermitian `H` with entries uniform in `[-π, π]`.
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let mut entries = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        entries[j * n + j] = C64::new(rng.random_range(-1.0..1.0), 0.0);
        for k in (j + 1)..n {
            let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            entries[j * n + k] = z;
            entries[k * n + j] = z.conj();
        }
    }
    let h = ComplexMatrix::new(n, n, entries).expect("finite");
    unitary_exp_eig(&hermitian_eig(&h).expect("Hermitian"), std::f64::consts::PI)
}

pub struct UnitaryOptimum {
    pub w: ComplexMatrix,
    pub value: f64,
    pub meta: OptimizerMeta,
}

/// Runs the ascent from every warm start and from `opts.restarts` seeded
/// random unitaries, in parallel, and keeps the best (lowest index on ties).
pub fn maximize<O: DiagonalObjective>(
    landscape: &Landscape<'_, O>,
    warm_starts: Vec<ComplexMatrix>,
    opts: &OptimizerOptions,
) -> UnitaryOptimum {
    let n = landscape.dim();
    let warm = warm_starts.len();
    let total = warm + opts.restarts;
    let results: Vec<AscentResult> = (0..total)
        .into_par_iter()
        .map(|r| {
            let start = if r < warm {
                warm_starts[r].clone()
            } else {
                random_unitary(n, &mut stream_rng(opts.seed, (r - warm) as u64))
            };
            ascend(landscape, start, opts)
        })
        .collect();
    let mut best = 0;
    for (r, res) in results.iter().enumerate() {
        if res.value > results[best].value {
            best = r;
        }
    }
    let winner = results.into_iter().nth(best).expect("at least one start");
    UnitaryOptimum {
        meta: OptimizerMeta {
            restarts: total,
            converged: winner.converged,
            gradient_norm: winner.gradient_norm,
            iterations: winner.iterations,
        },
        w: winner.w,
        value: winner.value,
    }
}

/// Zero-pads an `d × d` Hermitian matrix to `n × n`.
pub fn pad(m: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let d = m.rows();
    let mut entries = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..d {
        for j in 0..d {
            entries[i * n + j] = m.get(i, j);
        }
    }
    ComplexMatrix::new(n, n, entries).expect("finite")
}

/// Embeds a `d × d` unitary as the block `diag(u, I)` of size `n`.
pub fn embed_unitary(u: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let d = u.rows();
    let mut out = pad(u, n);
    if n > d {
        let mut entries = out.to_row_major();
        for i in d..n {
            entries[i * n + i] = C64::new(1.0, 0.0);
        }
        out = ComplexMatrix::new(n, n, entries).expect("finite");
    }
    out
}

/// First `d` columns of `w`.
pub fn leading_columns(w: &ComplexMatrix, d: usize) -> ComplexMatrix {
    let n = w.rows();
    let entries = (0..n).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| w.get(i, j)).collect();
    ComplexMatrix::new(n, d, entries).expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::qubit_family;

    fn hermitian_basis(n: usize) -> Vec<ComplexMatrix> {
        let mut out = Vec::new();
        for j in 0..n {
            for k in j..n {
                let mut e = vec![C64::new(0.0, 0.0); n * n];
                if j == k {
                    e[j * n + j] = C64::new(1.0, 0.0);
                    out.push(ComplexMatrix::new(n, n, e).unwrap());
                } else {
                    let mut s = e.clone();
                    s[j * n + k] = C64::new(1.0, 0.0);
                    s[k * n + j] = C64::new(1.0, 0.0);
                    out.push(ComplexMatrix::new(n, n, s).unwrap());
                    e[j * n + k] = C64::new(0.0, 1.0);
                    e[k * n + j] = C64::new(0.0, -1.0);
                    out.push(ComplexMatrix::new(n, n, e).unwrap());
                }
            }
        }
        out
    }

    fn check_gradient(a: &ComplexMatrix, b: &ComplexMatrix, objective: &WeightedKl, seed: u64) {
        let n = a.rows();
        let land = Landscape::new(a, b, objective);
        let mut rng = stream_rng(seed, 0);
        for _ in 0..10 {
            let w = random_unitary(n, &mut rng);
            let point = land.evaluate(w.clone());
            let g = land.gradient(&point);
            let h = 1e-5;
            let basis = hermitian_basis(n);
            assert_eq!(basis.len(), n * n);
            for e in basis {
                let eig = hermitian_eig(&e).unwrap();
                let plus = land.evaluate(unitary_exp_eig(&eig, h).matmul(&w)).value;
                let minus = land.evaluate(unitary_exp_eig(&eig, -h).matmul(&w)).value;
                let fd = (plus - minus) / (2.0 * h);
                let analytic = e.trace_product_re(&g);
                let scale = analytic.abs().max(fd.abs()).max(1e-3);
                assert!(
                    (fd - analytic).abs() <= 1e-5 * scale,
                    "fd {fd} vs analytic {analytic}"
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences_pvm() {
        let pair = qubit_family(0.9, 0.7, 1.2).unwrap();
        let obj = WeightedKl { w_pq: 1.0, w_qp: 0.0 };
        check_gradient(pair.rho0.matrix(), pair.rho1.matrix(), &obj, 1);
    }

    #[test]
    fn gradient_matches_finite_differences_padded() {
        let pair = qubit_family(0.98, 0.98, 1.57).unwrap();
        let obj = WeightedKl { w_pq: 0.7, w_qp: 1.3 };
        let a = pad(pair.rho0.matrix(), 4);
        let b = pad(pair.rho1.matrix(), 4);
        check_gradient(&a, &b, &obj, 2);
    }

    #[test]
    fn ascent_never_decreases() {
        let pair = qubit_family(0.9, 0.7, 1.2).unwrap();
        let obj = WeightedKl { w_pq: 1.0, w_qp: 1.0 };
        let land = Landscape::new(pair.rho0.matrix(), pair.rho1.matrix(), &obj);
        let start = random_unitary(2, &mut stream_rng(5, 0));
        let initial = land.evaluate(start.clone()).value;
        let res = ascend(&land, start, &OptimizerOptions::default());
        assert!(res.value >= initial);
        assert!(res.converged);
    }

    #[test]
    fn embedding_is_unitary() {
        let u = random_unitary(2, &mut stream_rng(3, 0));
        let w = embed_unitary(&u, 4);
        let defect = w.matmul(&w.adjoint()).sub(&ComplexMatrix::identity(4)).frobenius_norm();
        assert!(defect < 1e-12);
        assert_eq!(leading_columns(&w, 2).cols(), 2);
    }
}
