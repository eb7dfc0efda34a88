//! Brute-force measured relative entropy for qubits.
//!
//! A qubit PVM is fixed by a Bloch axis `n`, with outcome probabilities
//! `(1 ± r·n)/2` for a state with Bloch vector `r`. The oracle sweeps three
//! great circles of axes: the x–z circle (real measurement vectors
//! `(cos φ, sin φ)`), the y–z circle (vectors `(cos φ, i sin φ)`), and the
//! circle in the plane spanned by the two Bloch vectors. Tilting an axis out
//! of that plane only shrinks both projections by a common factor, which is
//! a noisier version of the in-plane measurement, so the third circle
//! contains the optimum. The best grid point is refined by one
//! golden-section pass over the neighbouring grid cells.
//!
//! Nothing here shares code with the gradient optimizer.

use crate::error::{Error, Result};
use crate::model::{DensityMatrix, StatePair};

type Vec3 = [f64; 3];

pub fn bloch_vector(rho: &DensityMatrix) -> Vec3 {
    let m = rho.matrix();
    let off = m.get(0, 1);
    [2.0 * off.re, -2.0 * off.im, m.get(0, 0).re - m.get(1, 1).re]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn binary_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a > 0.0 { a * (a / b).ln() } else { 0.0 };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

struct Circle {
    e1: Vec3,
    e2: Vec3,
}

impl Circle {
    fn axis(&self, psi: f64) -> Vec3 {
        let (s, c) = psi.sin_cos();
        [
            c * self.e1[0] + s * self.e2[0],
            c * self.e1[1] + s * self.e2[1],
            c * self.e1[2] + s * self.e2[2],
        ]
    }
}

fn plane_circle(r0: Vec3, r1: Vec3) -> Circle {
    let z = [0.0, 0.0, 1.0];
    let e1 = if norm(r0) > 1e-12 {
        scale(r0, 1.0 / norm(r0))
    } else if norm(r1) > 1e-12 {
        scale(r1, 1.0 / norm(r1))
    } else {
        z
    };
    let mut e2 = sub(r1, scale(e1, dot(r1, e1)));
    if norm(e2) <= 1e-12 {
        // collinear Bloch vectors: any perpendicular direction
        let helper = if e1[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        e2 = sub(helper, scale(e1, dot(helper, e1)));
    }
    Circle {
        e1,
        e2: scale(e2, 1.0 / norm(e2)),
    }
}

/// Max over `resolution` grid angles per circle of the binary KL, refined by
/// golden-section search around the best grid angle.
pub fn qubit_grid_oracle(pair: &StatePair, resolution: usize) -> Result<f64> {
    if pair.dim() != 2 {
        return Err(Error::WrongDimension(pair.dim()));
    }
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let r0 = bloch_vector(&pair.rho0);
    let r1 = bloch_vector(&pair.rho1);
    let circles = [
        Circle { e1: [0.0, 0.0, 1.0], e2: [1.0, 0.0, 0.0] },
        Circle { e1: [0.0, 0.0, 1.0], e2: [0.0, 1.0, 0.0] },
        plane_circle(r0, r1),
    ];
    let objective = |c: &Circle, psi: f64| {
        let n = c.axis(psi);
        binary_kl((1.0 + dot(r0, n)) / 2.0, (1.0 + dot(r1, n)) / 2.0)
    };
    // axes n and −n give the same PVM, so half a turn covers every circle
    let step = std::f64::consts::PI / resolution as f64;
    let mut best = (f64::NEG_INFINITY, 0usize, 0.0f64);
    for (ci, c) in circles.iter().enumerate() {
        for k in 0..resolution {
            let psi = k as f64 * step;
            let v = objective(c, psi);
            if v > best.0 {
                best = (v, ci, psi);
            }
        }
    }
    let (grid_value, ci, psi) = best;
    let c = &circles[ci];
    let refined = golden_section_max(|x| objective(c, x), psi - step, psi + step, 1e-13);
    Ok(grid_value.max(refined))
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    f1.max(f2)
}
