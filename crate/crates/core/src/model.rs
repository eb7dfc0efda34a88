//! Validated quantum objects: density matrices, POVMs, Born-rule
//! distributions, tensor powers and the two-parameter qubit family used in
//! the worked example.

use crate::error::{Error, Result};
use crate::matrix::{
    hermitian_eig, kron_with_cap, matrix_log_eig, ComplexMatrix, HermitianEig, C64,
    DEFAULT_DIM_CAP, HERMITIAN_TOL,
};

/// Tolerance on `|Tr ρ − 1|`.
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted for a state.
pub const PSD_TOL: f64 = 1e-12;
/// A state has full support iff its minimum eigenvalue exceeds this.
pub const FULL_SUPPORT_TOL: f64 = 1e-9;
/// Tolerance on `‖Σ_x m(x) − I‖_F`.
pub const COMPLETENESS_TOL: f64 = 1e-9;
/// Most negative eigenvalue accepted for a POVM element.
pub const ELEMENT_PSD_TOL: f64 = 1e-10;
/// Frobenius norm below which a POVM element counts as zero.
pub const ZERO_ELEMENT_TOL: f64 = 1e-12;
/// Born probabilities in `[-CLIP_TOL, 0)` are clipped to zero.
pub const CLIP_TOL: f64 = 1e-12;

/// A density matrix with its cached spectrum.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    eig: HermitianEig,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::validation(
                "dimension",
                format!("{}x{} state is not square", matrix.rows(), matrix.cols()),
            ));
        }
        if !matrix.is_hermitian() {
            return Err(Error::validation(
                "hermitian",
                format!("‖ρ − ρ†‖_F = {:.3e}", matrix.hermiticity_defect()),
            ));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::validation("trace", format!("Tr ρ = {:.12}", tr.re)));
        }
        let matrix = matrix.hermitian_part();
        let eig = hermitian_eig(&matrix)?;
        if eig.min_eigenvalue() < -PSD_TOL {
            return Err(Error::validation(
                "positive semidefinite",
                format!("min eigenvalue {:.3e}", eig.min_eigenvalue()),
            ));
        }
        Ok(DensityMatrix { matrix, eig })
    }

    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_diagonal(probs))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self::new(ComplexMatrix::identity(d).scale(1.0 / d as f64)).expect("I/d is a state")
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn eig(&self) -> &HermitianEig {
        &self.eig
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig.min_eigenvalue()
    }

    pub fn has_full_support(&self) -> bool {
        self.min_eigenvalue() > FULL_SUPPORT_TOL
    }

    pub fn require_full_support(&self) -> Result<()> {
        if self.has_full_support() {
            Ok(())
        } else {
            Err(Error::NotFullSupport {
                min_eigenvalue: self.min_eigenvalue(),
            })
        }
    }

    /// Matrix logarithm; requires full support.
    pub fn log(&self) -> Result<ComplexMatrix> {
        self.require_full_support()?;
        matrix_log_eig(&self.eig)
    }

    /// `u ρ u†` for a unitary `u`.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Result<Self> {
        Self::new(self.matrix.conjugate_by(u))
    }
}

/// A finite POVM with opaque outcome labels.
#[derive(Clone, Debug)]
pub struct Povm {
    labels: Vec<String>,
    elements: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(labels: Vec<String>, elements: Vec<ComplexMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::validation("outcomes", "POVM has no outcomes"));
        }
        if labels.len() != elements.len() {
            return Err(Error::validation(
                "outcomes",
                format!("{} labels for {} elements", labels.len(), elements.len()),
            ));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(Error::validation("outcomes", "duplicate outcome labels"));
        }
        let d = elements[0].rows();
        let mut sum = ComplexMatrix::zeros(d, d);
        for (x, m) in elements.iter().enumerate() {
            if m.rows() != d || m.cols() != d {
                return Err(Error::validation(
                    "dimension",
                    format!("element {x} is {}x{}, expected {d}x{d}", m.rows(), m.cols()),
                ));
            }
            if m.hermiticity_defect() > HERMITIAN_TOL {
                return Err(Error::validation(
                    "hermitian",
                    format!("element {x} defect {:.3e}", m.hermiticity_defect()),
                ));
            }
            let lmin = hermitian_eig(m)?.min_eigenvalue();
            if lmin < -ELEMENT_PSD_TOL {
                return Err(Error::validation(
                    "positive semidefinite",
                    format!("element {x} min eigenvalue {lmin:.3e}"),
                ));
            }
            sum = sum.add(m);
        }
        let defect = sum.sub(&ComplexMatrix::identity(d)).frobenius_norm();
        if defect > COMPLETENESS_TOL {
            return Err(Error::validation(
                "completeness",
                format!("‖Σ m(x) − I‖_F = {defect:.3e}"),
            ));
        }
        Ok(Povm {
            labels,
            elements: elements.into_iter().map(|m| m.hermitian_part()).collect(),
        })
    }

    fn numbered_labels(n: usize) -> Vec<String> {
        (0..n).map(|x| x.to_string()).collect()
    }

    /// Rank-1 PVM onto the columns of a unitary matrix.
    pub fn from_basis(u: &ComplexMatrix) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::DimensionMismatch("basis matrix must be square".into()));
        }
        let d = u.rows();
        let elements = (0..d)
            .map(|j| {
                let col: Vec<C64> = (0..d).map(|i| u.get(i, j)).collect();
                ComplexMatrix::outer(&col)
            })
            .collect();
        Self::new(Self::numbered_labels(d), elements)
    }

    /// Rank-1 POVM `m(x) = v_x† v_x` from the rows `v_x` of an isometry.
    pub fn from_isometry_rows(v: &ComplexMatrix) -> Result<Self> {
        let n = v.rows();
        let d = v.cols();
        let elements = (0..n)
            .map(|x| {
                let w: Vec<C64> = (0..d).map(|j| v.get(x, j).conj()).collect();
                ComplexMatrix::outer(&w)
            })
            .collect();
        Self::new(Self::numbered_labels(n), elements)
    }

    pub fn computational(d: usize) -> Self {
        Self::from_basis(&ComplexMatrix::identity(d)).expect("identity basis")
    }

    /// The uninformative single-outcome POVM `{I}`.
    pub fn trivial(d: usize) -> Self {
        Self::new(vec!["I".into()], vec![ComplexMatrix::identity(d)]).expect("{I} is a POVM")
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].rows()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn element_is_zero(&self, x: usize) -> bool {
        self.elements[x].frobenius_norm() < ZERO_ELEMENT_TOL
    }

    /// Same POVM with every label prefixed, for building disjoint unions of
    /// outcome sets.
    pub fn with_label_prefix(&self, prefix: &str) -> Povm {
        Povm {
            labels: self.labels.iter().map(|l| format!("{prefix}{l}")).collect(),
            elements: self.elements.clone(),
        }
    }

    /// Product measurement `m ⊗ n` with labels `"a|b"`.
    pub fn tensor(&self, other: &Povm) -> Result<Povm> {
        let mut labels = Vec::with_capacity(self.len() * other.len());
        let mut elements = Vec::with_capacity(self.len() * other.len());
        for (la, a) in self.labels.iter().zip(&self.elements) {
            for (lb, b) in other.labels.iter().zip(&other.elements) {
                labels.push(format!("{la}|{lb}"));
                elements.push(kron_with_cap(a, b, DEFAULT_DIM_CAP)?);
            }
        }
        Povm::new(labels, elements)
    }

    /// `u m(x) u†` for every element.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Result<Povm> {
        Povm::new(
            self.labels.clone(),
            self.elements.iter().map(|m| m.conjugate_by(u)).collect(),
        )
    }
}

/// Born-rule distribution `P(x) = Tr[ρ m(x)]`.
pub fn born_distribution(rho: &DensityMatrix, m: &Povm) -> Result<Vec<f64>> {
    if rho.dim() != m.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} vs POVM dimension {}",
            rho.dim(),
            m.dim()
        )));
    }
    let mut probs: Vec<f64> = m
        .elements()
        .iter()
        .map(|e| rho.matrix().trace_product_re(e))
        .collect();
    for p in probs.iter_mut() {
        if *p < 0.0 && *p >= -CLIP_TOL {
            *p = 0.0;
        }
        *p = p.clamp(0.0, 1.0);
    }
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        for p in probs.iter_mut() {
            *p /= total;
        }
    }
    Ok(probs)
}

/// Pair of hypotheses `ρ₀` vs `ρ₁`, both of full support.
#[derive(Clone, Debug)]
pub struct StatePair {
    pub rho0: DensityMatrix,
    pub rho1: DensityMatrix,
    pub label: String,
}

impl StatePair {
    pub fn new(rho0: DensityMatrix, rho1: DensityMatrix, label: impl Into<String>) -> Result<Self> {
        if rho0.dim() != rho1.dim() {
            return Err(Error::validation(
                "dimension",
                format!("rho0 is {}-dimensional, rho1 is {}", rho0.dim(), rho1.dim()),
            ));
        }
        for (name, rho) in [("rho0", &rho0), ("rho1", &rho1)] {
            if !rho.has_full_support() {
                return Err(Error::validation(
                    "full support",
                    format!("{name} min eigenvalue {:.3e}", rho.min_eigenvalue()),
                ));
            }
        }
        Ok(StatePair {
            rho0,
            rho1,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.rho0.dim()
    }

    /// `(ρ₁, ρ₀)`.
    pub fn swapped(&self) -> StatePair {
        StatePair {
            rho0: self.rho1.clone(),
            rho1: self.rho0.clone(),
            label: format!("{} (swapped)", self.label),
        }
    }

    /// `‖[ρ₀, ρ₁]‖_F`.
    pub fn commutator_norm(&self) -> f64 {
        self.rho0.matrix().commutator(self.rho1.matrix()).frobenius_norm()
    }

    pub fn tensor_power(&self, l: u32) -> Result<StatePair> {
        StatePair::new(
            tensor_power(&self.rho0, l)?,
            tensor_power(&self.rho1, l)?,
            format!("{}^⊗{l}", self.label),
        )
    }

    /// Conjugates both states by the same unitary.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Result<StatePair> {
        StatePair::new(self.rho0.conjugated(u)?, self.rho1.conjugated(u)?, self.label.clone())
    }
}

/// `ρ^⊗l` under the default dimension cap.
pub fn tensor_power(rho: &DensityMatrix, l: u32) -> Result<DensityMatrix> {
    tensor_power_with_cap(rho, l, DEFAULT_DIM_CAP)
}

pub fn tensor_power_with_cap(rho: &DensityMatrix, l: u32, cap: usize) -> Result<DensityMatrix> {
    if l == 0 {
        return Err(Error::OutOfRange("tensor power must be at least 1".into()));
    }
    let dim = (rho.dim() as u128).checked_pow(l).unwrap_or(u128::MAX);
    if dim > cap as u128 {
        return Err(Error::Overflow {
            dim: usize::try_from(dim).unwrap_or(usize::MAX),
            cap,
        });
    }
    let mut acc = rho.matrix().clone();
    for _ in 1..l {
        acc = kron_with_cap(&acc, rho.matrix(), cap)?;
    }
    DensityMatrix::new(acc)
}

/// The qubit family `ρᵢ = rᵢ|ψᵢ⟩⟨ψᵢ| + (1 − rᵢ)I/2` with
/// `|ψᵢ⟩ = cos(θ/4)|0⟩ + (−1)^i sin(θ/4)|1⟩`.
pub fn qubit_family(r0: f64, r1: f64, theta: f64) -> Result<StatePair> {
    for (name, r) in [("r0", r0), ("r1", r1)] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::OutOfRange(format!("{name} = {r} not in [0, 1]")));
        }
    }
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::OutOfRange(format!("theta = {theta} not in [0, π]")));
    }
    let (c, s) = ((theta / 4.0).cos(), (theta / 4.0).sin());
    let state = |r: f64, sign: f64| -> Result<DensityMatrix> {
        let psi = [C64::new(c, 0.0), C64::new(sign * s, 0.0)];
        let m = ComplexMatrix::outer(&psi)
            .scale(r)
            .add(&ComplexMatrix::identity(2).scale((1.0 - r) / 2.0));
        DensityMatrix::new(m)
    };
    let rho0 = state(r0, 1.0)?;
    let rho1 = state(r1, -1.0)?;
    for rho in [&rho0, &rho1] {
        rho.require_full_support()?;
    }
    StatePair::new(rho0, rho1, format!("qubit(r0={r0}, r1={r1}, theta={theta})"))
}
