//! JSON documents for state pairs and POVMs.
//!
//! A state-pair document is an object with `dim`, `rho0`, `rho1` and an
//! optional `label`. Each matrix is a `dim × dim` nested array whose entries
//! are `[re, im]` pairs. Instead of explicit matrices a document may carry
//! `"family": {"type": "qubit", "r0": .., "r1": .., "theta": ..}`.
//!
//! POVM documents use `{"outcomes": [labels], "elements": [matrices]}` with
//! the same matrix encoding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64};
use crate::model::{qubit_family, DensityMatrix, Povm, StatePair};

type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatePairDoc {
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho0: Option<RawMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho1: Option<RawMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<FamilyDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum FamilyDoc {
    Qubit { r0: f64, r1: f64, theta: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PovmDoc {
    outcomes: Vec<String>,
    elements: Vec<RawMatrix>,
}

fn decode_matrix(raw: &RawMatrix, dim: usize, name: &str) -> Result<ComplexMatrix> {
    if raw.len() != dim || raw.iter().any(|row| row.len() != dim) {
        return Err(Error::Schema(format!("{name} must be a {dim}x{dim} array")));
    }
    let entries: Vec<C64> = raw
        .iter()
        .flat_map(|row| row.iter().map(|&[re, im]| C64::new(re, im)))
        .collect();
    ComplexMatrix::new(dim, dim, entries).map_err(|e| Error::Schema(format!("{name}: {e}")))
}

fn encode_matrix(m: &ComplexMatrix) -> RawMatrix {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| {
                    let z = m.get(i, j);
                    [z.re, z.im]
                })
                .collect()
        })
        .collect()
}

/// Parses and validates a state-pair document.
pub fn parse_state_pair(document: &str) -> Result<StatePair> {
    let doc: StatePairDoc =
        serde_json::from_str(document).map_err(|e| Error::Schema(e.to_string()))?;
    if doc.dim == 0 {
        return Err(Error::Schema("dim must be positive".into()));
    }
    let pair = match (doc.family, doc.rho0, doc.rho1) {
        (Some(FamilyDoc::Qubit { r0, r1, theta }), None, None) => {
            if doc.dim != 2 {
                return Err(Error::Schema("qubit family requires dim = 2".into()));
            }
            match qubit_family(r0, r1, theta) {
                Err(Error::NotFullSupport { min_eigenvalue }) => {
                    return Err(Error::validation(
                        "full support",
                        format!("qubit family state has min eigenvalue {min_eigenvalue:.3e}"),
                    ))
                }
                other => other?,
            }
        }
        (None, Some(r0), Some(r1)) => {
            let rho0 = DensityMatrix::new(decode_matrix(&r0, doc.dim, "rho0")?)?;
            let rho1 = DensityMatrix::new(decode_matrix(&r1, doc.dim, "rho1")?)?;
            StatePair::new(rho0, rho1, "")?
        }
        _ => {
            return Err(Error::Schema(
                "expected either `family` or both `rho0` and `rho1`".into(),
            ))
        }
    };
    Ok(match doc.label {
        Some(label) => StatePair { label, ..pair },
        None => pair,
    })
}

/// Serializes a pair with explicit matrices.
pub fn state_pair_to_json(pair: &StatePair) -> String {
    let doc = StatePairDoc {
        dim: pair.dim(),
        rho0: Some(encode_matrix(pair.rho0.matrix())),
        rho1: Some(encode_matrix(pair.rho1.matrix())),
        label: Some(pair.label.clone()),
        family: None,
    };
    serde_json::to_string_pretty(&doc).expect("state pair serializes")
}

pub fn parse_povm(document: &str) -> Result<Povm> {
    let doc: PovmDoc = serde_json::from_str(document).map_err(|e| Error::Schema(e.to_string()))?;
    let dim = doc.elements.first().map_or(0, |m| m.len());
    if dim == 0 {
        return Err(Error::Schema("POVM needs at least one non-empty element".into()));
    }
    let elements = doc
        .elements
        .iter()
        .enumerate()
        .map(|(x, raw)| decode_matrix(raw, dim, &format!("elements[{x}]")))
        .collect::<Result<Vec<_>>>()?;
    Povm::new(doc.outcomes, elements)
}

pub fn povm_to_json(m: &Povm) -> String {
    let doc = PovmDoc {
        outcomes: m.labels().to_vec(),
        elements: m.elements().iter().map(encode_matrix).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("POVM serializes")
}

/// JSON value form of a POVM, for embedding in reports.
pub fn povm_to_value(m: &Povm) -> serde_json::Value {
    serde_json::to_value(PovmDoc {
        outcomes: m.labels().to_vec(),
        elements: m.elements().iter().map(encode_matrix).collect(),
    })
    .expect("POVM serializes")
}

/// Twelve significant digits in scientific notation, as used by every CSV
/// the crate writes. Non-finite values print as `nan`, `inf` or `-inf`.
pub fn sig12(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}
