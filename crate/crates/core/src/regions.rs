//! Achievable error-exponent regions.
//!
//! Adaptive strategies reach the full rectangle
//! `[0, D_M(ρ₁‖ρ₀)] × [0, D_M(ρ₀‖ρ₁)]`. Non-adaptive strategies reach the
//! convex set cut out by the supporting half-planes
//! `t₀R₀ + t₁R₁ ≤ g(t₀, t₁)`, which is computed here by clipping the axis box
//! against one half-plane per sweep angle.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{
    measured_relative_entropy_between, measured_relative_entropy_with_starts, optimize_g,
    optimize_g_with_starts, relative_entropy, OptimizerOptions,
};
use crate::error::{Error, Result};
use crate::io::sig12;
use crate::model::{qubit_family, StatePair};
use crate::rng::mix_seed;

/// Default number of supporting half-planes.
pub const DEFAULT_ANGLES: usize = 64;

/// Supports whose `g` is below this are treated as zero.
pub const DEGENERATE_TOL: f64 = 1e-9;

const VERTEX_MERGE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    AdaptiveRectangle,
    NonadaptiveHull,
}

impl RegionKind {
    pub fn name(self) -> &'static str {
        match self {
            RegionKind::AdaptiveRectangle => "adaptive_rectangle",
            RegionKind::NonadaptiveHull => "nonadaptive_hull",
        }
    }
}

/// Half-plane `t0·R₀ + t1·R₁ ≤ g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub t0: f64,
    pub t1: f64,
    pub g: f64,
}

impl Support {
    /// `t0·r0 + t1·r1 − g`; positive when the point lies outside.
    pub fn excess(&self, r0: f64, r1: f64) -> f64 {
        self.t0 * r0 + self.t1 * r1 - self.g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPolygon {
    pub kind: RegionKind,
    /// Counterclockwise vertices `(R₀, R₁)` starting at the origin.
    pub vertices: Vec<[f64; 2]>,
    pub supports: Vec<Support>,
}

impl RegionPolygon {
    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        let twice: f64 = (0..n)
            .map(|i| {
                let (p, q) = (v[i], v[(i + 1) % n]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum();
        twice / 2.0
    }

    /// Largest coordinate of any vertex in each direction.
    pub fn extent(&self) -> [f64; 2] {
        self.vertices
            .iter()
            .fold([0.0f64, 0.0f64], |acc, v| [acc[0].max(v[0]), acc[1].max(v[1])])
    }

    /// Largest violation of the stored supports at `(r0, r1)`.
    pub fn max_support_excess(&self, r0: f64, r1: f64) -> f64 {
        self.supports
            .iter()
            .map(|s| s.excess(r0, r1))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Rectangle with corner `(D_M(ρ₁‖ρ₀), D_M(ρ₀‖ρ₁))`.
pub fn adaptive_region(pair: &StatePair, opts: &OptimizerOptions) -> Result<RegionPolygon> {
    let r0 = measured_relative_entropy_between(&pair.rho1, &pair.rho0, opts)?.value;
    let r1 = measured_relative_entropy_between(&pair.rho0, &pair.rho1, opts)?.value;
    Ok(RegionPolygon {
        kind: RegionKind::AdaptiveRectangle,
        vertices: dedupe(vec![[0.0, 0.0], [r0, 0.0], [r0, r1], [0.0, r1]]),
        supports: vec![
            Support { t0: 1.0, t1: 0.0, g: r0 },
            Support { t0: 0.0, t1: 1.0, g: r1 },
        ],
    })
}

/// Sweep angles `i·π/(2n)` for `i = 1..n−1`. The grids are nested: the
/// angles for `n` are a subset of those for any multiple of `n`.
pub fn sweep_angles(n_angles: usize) -> Vec<f64> {
    (1..n_angles)
        .map(|i| i as f64 / n_angles as f64 * std::f64::consts::FRAC_PI_2)
        .collect()
}

/// Optimizer seed for the support with weights `(t0, t1)`, so a given
/// direction gets the same `g` whatever grid it belongs to.
fn support_seed(opts: &OptimizerOptions, t0: f64, t1: f64) -> u64 {
    mix_seed(opts.seed, t0.to_bits() ^ t1.to_bits().rotate_left(32))
}

/// Intersection of the supports `g(cos θ, sin θ)` over the sweep angles with
/// the box from the axis supports `g(1, 0)` and `g(0, 1)`.
pub fn nonadaptive_region(
    pair: &StatePair,
    n_angles: usize,
    opts: &OptimizerOptions,
) -> Result<RegionPolygon> {
    if n_angles < 8 {
        return Err(Error::OutOfRange(format!("n_angles must be at least 8, got {n_angles}")));
    }
    let m01 = measured_relative_entropy_between(&pair.rho0, &pair.rho1, opts)?;
    let m10 = measured_relative_entropy_between(&pair.rho1, &pair.rho0, opts)?;
    let warm = [&m01.povm, &m10.povm];
    let mut weights = vec![(1.0, 0.0)];
    weights.extend(sweep_angles(n_angles).into_iter().map(|th| (th.cos(), th.sin())));
    weights.push((0.0, 1.0));
    let supports: Vec<Support> = weights
        .par_iter()
        .map(|&(t0, t1)| {
            let o = opts.clone().with_seed(support_seed(opts, t0, t1));
            let g = optimize_g_with_starts(pair, t0, t1, &warm, &o)?.value;
            Ok(Support { t0, t1, g })
        })
        .collect::<Result<_>>()?;
    if supports.iter().all(|s| s.g < DEGENERATE_TOL) {
        return Err(Error::DegenerateRegion);
    }
    let gx = supports[0].g;
    let gy = supports[supports.len() - 1].g;
    let mut poly = vec![[0.0, 0.0], [gx, 0.0], [gx, gy], [0.0, gy]];
    for s in &supports[1..supports.len() - 1] {
        poly = clip(&poly, s);
    }
    Ok(RegionPolygon {
        kind: RegionKind::NonadaptiveHull,
        vertices: dedupe(poly),
        supports,
    })
}

/// One Sutherland–Hodgman pass keeping `excess ≤ 0`.
fn clip(poly: &[[f64; 2]], s: &Support) -> Vec<[f64; 2]> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let ep = s.excess(p[0], p[1]);
        let eq = s.excess(q[0], q[1]);
        if ep <= 0.0 {
            out.push(p);
        }
        if (ep < 0.0 && eq > 0.0) || (ep > 0.0 && eq < 0.0) {
            let t = ep / (ep - eq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn dedupe(poly: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let close = |a: [f64; 2], b: [f64; 2]| {
        (a[0] - b[0]).abs() <= VERTEX_MERGE_TOL && (a[1] - b[1]).abs() <= VERTEX_MERGE_TOL
    };
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(poly.len());
    for v in poly {
        if out.last().is_none_or(|&last| !close(last, v)) {
            out.push(v);
        }
    }
    while out.len() > 1 && close(out[0], out[out.len() - 1]) {
        out.pop();
    }
    out
}

/// Per-copy measured rates on `l`-fold tensor powers, with the single-copy
/// quantum relative entropies as ceilings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRates {
    pub l: u32,
    pub rate_01: f64,
    pub rate_10: f64,
    pub ceiling_01: f64,
    pub ceiling_10: f64,
}

/// Block rates. For `l ≥ 2` the optimizer uses twice the restarts and is
/// also warm-started from the `l`-fold product of the single-copy optima.
pub fn block_rates(pair: &StatePair, l: u32, opts: &OptimizerOptions) -> Result<BlockRates> {
    if l == 0 {
        return Err(Error::OutOfRange("block length must be at least 1".into()));
    }
    let power = pair.tensor_power(l)?;
    let ceiling_01 = relative_entropy(&pair.rho0, &pair.rho1)?;
    let ceiling_10 = relative_entropy(&pair.rho1, &pair.rho0)?;
    if l == 1 {
        return Ok(BlockRates {
            l,
            rate_01: measured_relative_entropy_between(&pair.rho0, &pair.rho1, opts)?.value,
            rate_10: measured_relative_entropy_between(&pair.rho1, &pair.rho0, opts)?.value,
            ceiling_01,
            ceiling_10,
        });
    }
    let single_01 = measured_relative_entropy_between(&pair.rho0, &pair.rho1, opts)?.povm;
    let single_10 = measured_relative_entropy_between(&pair.rho1, &pair.rho0, opts)?.povm;
    let product = |m: &crate::model::Povm| -> Result<crate::model::Povm> {
        let mut acc = m.clone();
        for _ in 1..l {
            acc = acc.tensor(m)?;
        }
        Ok(acc)
    };
    let p01 = product(&single_01)?;
    let p10 = product(&single_10)?;
    let doubled = opts.doubled();
    let rate_01 =
        measured_relative_entropy_with_starts(&power.rho0, &power.rho1, &[&p01], &doubled)?.value;
    let rate_10 =
        measured_relative_entropy_with_starts(&power.rho1, &power.rho0, &[&p10], &doubled)?.value;
    Ok(BlockRates {
        l,
        rate_01: rate_01 / l as f64,
        rate_10: rate_10 / l as f64,
        ceiling_01,
        ceiling_10,
    })
}

/// Sum rates at one value of `θ`: `f = D_M(ρ₁‖ρ₀) + D_M(ρ₀‖ρ₁)` for adaptive
/// strategies and `g = g(1, 1)` for non-adaptive ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumRate {
    pub theta: f64,
    pub f: f64,
    pub g: f64,
}

pub fn sumrate_sweep(r0: f64, r1: f64, thetas: &[f64], opts: &OptimizerOptions) -> Result<Vec<SumRate>> {
    thetas
        .par_iter()
        .map(|&theta| {
            let pair = qubit_family(r0, r1, theta)?;
            let f = measured_relative_entropy_between(&pair.rho1, &pair.rho0, opts)?.value
                + measured_relative_entropy_between(&pair.rho0, &pair.rho1, opts)?.value;
            let g = optimize_g(&pair, 1.0, 1.0, opts)?.value;
            Ok(SumRate { theta, f, g })
        })
        .collect()
}

/// `points` values evenly spaced over `[lo, hi]` (both ends included).
pub fn theta_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 || !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::InvalidArgument(format!("bad theta grid [{lo}, {hi}] with {points} points")));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect())
}

pub fn write_sumrate_csv<W: Write>(out: &mut W, rows: &[SumRate]) -> std::io::Result<()> {
    writeln!(out, "theta,f,g")?;
    for r in rows {
        writeln!(out, "{},{},{}", sig12(r.theta), sig12(r.f), sig12(r.g))?;
    }
    Ok(())
}

pub fn write_region_csv<W: Write>(out: &mut W, region: &RegionPolygon) -> std::io::Result<()> {
    writeln!(out, "kind,vertex_index,r0,r1")?;
    for (i, v) in region.vertices.iter().enumerate() {
        writeln!(out, "{},{i},{},{}", region.kind.name(), sig12(v[0]), sig12(v[1]))?;
    }
    Ok(())
}

pub fn write_supports_csv<W: Write>(out: &mut W, supports: &[Support]) -> std::io::Result<()> {
    writeln!(out, "t0,t1,g")?;
    for s in supports {
        writeln!(out, "{},{},{}", sig12(s.t0), sig12(s.t1), sig12(s.g))?;
    }
    Ok(())
}
