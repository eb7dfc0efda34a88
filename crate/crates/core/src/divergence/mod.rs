//! Quantum, measured and max relative entropies, and the weighted
//! single-measurement objective behind the non-adaptive region.
//!
//! All quantities are in nats.

pub mod optimizer;
pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{hermitian_eig, matrix_inv_sqrt_eig, ComplexMatrix};
use crate::model::{born_distribution, DensityMatrix, Povm, StatePair};
use optimizer::{
    embed_unitary, leading_columns, maximize, pad, Landscape, OptimizerMeta, WeightedKl,
    ZERO_PROB_GUARD,
};

pub use optimizer::OptimizerOptions;
pub use oracle::qubit_grid_oracle;

/// Classical Kullback–Leibler divergence `Σ p log(p/q)`, with `0·log 0 = 0`.
pub fn classical_kl(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "distributions of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mut total = 0.0;
    for (x, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a <= 0.0 || (a < ZERO_PROB_GUARD && b < ZERO_PROB_GUARD) {
            continue;
        }
        if b <= 0.0 || (b < ZERO_PROB_GUARD && a >= ZERO_PROB_GUARD) {
            return Err(Error::SupportViolation { index: x, p: a, q: b });
        }
        total += a * (a / b).ln();
    }
    Ok(total)
}

/// `Tr[a (log a − log b)]`.
pub fn relative_entropy(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch("states of different dimension".into()));
    }
    let diff = a.log()?.sub(&b.log()?);
    Ok(a.matrix().trace_product_re(&diff).max(0.0))
}

/// `D(ρ₀‖ρ₁)`.
pub fn quantum_relative_entropy(pair: &StatePair) -> Result<f64> {
    relative_entropy(&pair.rho0, &pair.rho1)
}

/// `D_max(a‖b) = log λ_max(b^{-1/2} a b^{-1/2})`.
pub fn max_relative_entropy(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch("states of different dimension".into()));
    }
    a.require_full_support()?;
    b.require_full_support()?;
    let s = matrix_inv_sqrt_eig(b.eig())?;
    let sandwiched = s.matmul(a.matrix()).matmul(&s).hermitian_part();
    Ok(hermitian_eig(&sandwiched)?.max_eigenvalue().ln().max(0.0))
}

/// Increment bound `C = max{D_max(ρ₀‖ρ₁), D_max(ρ₁‖ρ₀)}`:
/// every log-likelihood increment satisfies `|Z| ≤ C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementBound {
    pub c: f64,
}

pub fn increment_bound(pair: &StatePair) -> Result<IncrementBound> {
    let c = max_relative_entropy(&pair.rho0, &pair.rho1)?
        .max(max_relative_entropy(&pair.rho1, &pair.rho0)?);
    Ok(IncrementBound { c })
}

/// Optimum of a measurement problem: value plus the measurement attaining it.
#[derive(Clone, Debug)]
pub struct MeasurementOptimum {
    pub value: f64,
    pub povm: Povm,
    pub meta: OptimizerMeta,
}

fn log_ratio_basis(a: &DensityMatrix, b: &DensityMatrix) -> Result<ComplexMatrix> {
    let diff = a.log()?.sub(&b.log()?);
    Ok(hermitian_eig(&diff)?.eigenvectors.adjoint())
}

/// `D_M(a‖b)`: best classical KL over rank-1 PVMs with `d` outcomes.
pub fn measured_relative_entropy_between(
    a: &DensityMatrix,
    b: &DensityMatrix,
    opts: &OptimizerOptions,
) -> Result<MeasurementOptimum> {
    measured_relative_entropy_with_starts(a, b, &[], opts)
}

/// [`measured_relative_entropy_between`] with extra rank-1 PVM warm starts.
pub fn measured_relative_entropy_with_starts(
    a: &DensityMatrix,
    b: &DensityMatrix,
    warm: &[&Povm],
    opts: &OptimizerOptions,
) -> Result<MeasurementOptimum> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch("states of different dimension".into()));
    }
    a.require_full_support()?;
    b.require_full_support()?;
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    let objective = WeightedKl { w_pq: 1.0, w_qp: 0.0 };
    let landscape = Landscape::new(a.matrix(), b.matrix(), &objective);
    let mut starts = vec![log_ratio_basis(a, b)?];
    for m in warm {
        if m.dim() != a.dim() || m.len() != a.dim() {
            return Err(Error::DimensionMismatch("warm start must be a rank-1 PVM".into()));
        }
        starts.push(pvm_rows(m));
    }
    let best = maximize(&landscape, starts, opts);
    let povm = Povm::from_isometry_rows(&best.w)?;
    Ok(MeasurementOptimum {
        value: best.value.max(0.0),
        povm,
        meta: best.meta,
    })
}

/// `D_M(ρ₀‖ρ₁)`.
pub fn measured_relative_entropy(
    pair: &StatePair,
    opts: &OptimizerOptions,
) -> Result<MeasurementOptimum> {
    measured_relative_entropy_between(&pair.rho0, &pair.rho1, opts)
}

/// `t₀·D(P_{ρ₁,m}‖P_{ρ₀,m}) + t₁·D(P_{ρ₀,m}‖P_{ρ₁,m})`.
pub fn weighted_objective(m: &Povm, pair: &StatePair, t0: f64, t1: f64) -> Result<f64> {
    if t0 < 0.0 || t1 < 0.0 {
        return Err(Error::OutOfRange("weights must be nonnegative".into()));
    }
    let p0 = born_distribution(&pair.rho0, m)?;
    let p1 = born_distribution(&pair.rho1, m)?;
    let mut total = 0.0;
    if t0 > 0.0 {
        total += t0 * classical_kl(&p1, &p0)?;
    }
    if t1 > 0.0 {
        total += t1 * classical_kl(&p0, &p1)?;
    }
    Ok(total)
}

/// Maximizes the weighted objective over rank-1 POVMs with `d²` outcomes,
/// warm-started from the given PVMs (embedded as `d` of the `d²` outcomes).
pub fn optimize_g_with_starts(
    pair: &StatePair,
    t0: f64,
    t1: f64,
    warm: &[&Povm],
    opts: &OptimizerOptions,
) -> Result<MeasurementOptimum> {
    if t0 < 0.0 || t1 < 0.0 || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::OutOfRange("weights must be finite and nonnegative".into()));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    let d = pair.dim();
    let n = d * d;
    let a = pad(pair.rho0.matrix(), n);
    let b = pad(pair.rho1.matrix(), n);
    let objective = WeightedKl { w_pq: t1, w_qp: t0 };
    let landscape = Landscape::new(&a, &b, &objective);
    let mut starts = Vec::with_capacity(warm.len());
    for m in warm {
        if m.dim() != d || m.len() != d {
            return Err(Error::DimensionMismatch("warm start must be a rank-1 PVM".into()));
        }
        starts.push(embed_unitary(&pvm_rows(m), n));
    }
    let best = maximize(&landscape, starts, opts);
    let povm = Povm::from_isometry_rows(&leading_columns(&best.w, d))?;
    Ok(MeasurementOptimum {
        value: best.value.max(0.0),
        povm,
        meta: best.meta,
    })
}

/// `g(t₀, t₁)`, warm-started from both measured-relative-entropy optimizers
/// so the result never falls below the best single PVM they find.
pub fn optimize_g(
    pair: &StatePair,
    t0: f64,
    t1: f64,
    opts: &OptimizerOptions,
) -> Result<MeasurementOptimum> {
    let m01 = measured_relative_entropy(pair, opts)?;
    let m10 = measured_relative_entropy_between(&pair.rho1, &pair.rho0, opts)?;
    optimize_g_with_starts(pair, t0, t1, &[&m01.povm, &m10.povm], opts)
}

/// Measurement rows `w_x` of a rank-1 PVM (`m(x) = w_x† w_x`).
fn pvm_rows(m: &Povm) -> ComplexMatrix {
    let d = m.dim();
    let mut entries = Vec::with_capacity(d * d);
    for e in m.elements() {
        // the element is |u⟩⟨u|; its top eigenvector is u
        let eig = hermitian_eig(e).expect("element is Hermitian");
        let u = eig.eigenvector(d - 1);
        entries.extend(u.iter().map(|z| z.conj()));
    }
    ComplexMatrix::new(d, d, entries).expect("finite")
}

/// One direction of divergences between two states.
#[derive(Clone, Debug)]
pub struct DivergenceReport {
    pub d_quantum: f64,
    pub d_measured: f64,
    pub d_max: f64,
    pub optimal_pvm: Povm,
    pub optimizer_meta: OptimizerMeta,
}

impl DivergenceReport {
    pub fn compute(a: &DensityMatrix, b: &DensityMatrix, opts: &OptimizerOptions) -> Result<Self> {
        let measured = measured_relative_entropy_between(a, b, opts)?;
        Ok(DivergenceReport {
            d_quantum: relative_entropy(a, b)?,
            d_measured: measured.value,
            d_max: max_relative_entropy(a, b)?,
            optimal_pvm: measured.povm,
            optimizer_meta: measured.meta,
        })
    }
}
