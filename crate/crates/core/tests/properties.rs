//! Randomized properties across modules.

use proptest::prelude::*;
use sqht::divergence::optimizer::random_unitary;
use sqht::divergence::{
    max_relative_entropy, measured_relative_entropy, measured_relative_entropy_between, optimize_g,
    relative_entropy, OptimizerOptions,
};
use sqht::engine::{build_adaptive_strategy, run_trial, Decision, SqprtParams, Strategy as TestStrategy};
use sqht::matrix::{ComplexMatrix, C64};
use sqht::model::{DensityMatrix, Povm, StatePair};
use sqht::montecarlo::{monitor_invariants, run_batch_detailed, BatchConfig};
use sqht::regions::{adaptive_region, nonadaptive_region};
use sqht::rng::stream_rng;

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

/// Bloch vectors inside the ball of radius 0.9.
fn bloch() -> impl Strategy<Value = [f64; 3]> {
    (-1.0f64..1.0, 0.0f64..std::f64::consts::TAU, 0.0f64..0.9).prop_map(|(z, phi, rad)| {
        let s = (1.0 - z * z).sqrt();
        [rad * s * phi.cos(), rad * s * phi.sin(), rad * z]
    })
}

fn qubit_pair() -> impl Strategy<Value = StatePair> {
    (bloch(), bloch()).prop_map(|(a, b)| StatePair::new(bloch_state(a), bloch_state(b), "prop").unwrap())
}

fn distinct_pair() -> impl Strategy<Value = StatePair> {
    qubit_pair().prop_filter("states must differ", |p| {
        p.rho0.matrix().sub(p.rho1.matrix()).frobenius_norm() > 0.1
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unitary_invariance(pair in qubit_pair(), seed in 0u64..1000) {
        let opts = OptimizerOptions::default();
        let u = random_unitary(2, &mut stream_rng(seed, 0));
        let rotated = pair.conjugated(&u).unwrap();
        let d = relative_entropy(&pair.rho0, &pair.rho1).unwrap();
        let d_rot = relative_entropy(&rotated.rho0, &rotated.rho1).unwrap();
        prop_assert!((d - d_rot).abs() < 1e-9);
        let m = measured_relative_entropy(&pair, &opts).unwrap().value;
        let m_rot = measured_relative_entropy(&rotated, &opts).unwrap().value;
        prop_assert!((m - m_rot).abs() < 1e-7);
        let x = max_relative_entropy(&pair.rho0, &pair.rho1).unwrap();
        let x_rot = max_relative_entropy(&rotated.rho0, &rotated.rho1).unwrap();
        prop_assert!((x - x_rot).abs() < 1e-9);
    }

    #[test]
    fn sum_rate_bounds(pair in qubit_pair()) {
        let opts = OptimizerOptions::default();
        let f = measured_relative_entropy(&pair, &opts).unwrap().value
            + measured_relative_entropy_between(&pair.rho1, &pair.rho0, &opts).unwrap().value;
        let g = optimize_g(&pair, 1.0, 1.0, &opts).unwrap().value;
        let ceiling = relative_entropy(&pair.rho0, &pair.rho1).unwrap()
            + relative_entropy(&pair.rho1, &pair.rho0).unwrap();
        prop_assert!(g <= f + 2e-6);
        prop_assert!(f <= ceiling + 1e-6);
    }

    #[test]
    fn weighted_objective_is_homogeneous(pair in qubit_pair(), t in 0.05f64..1.5, c in 0.5f64..3.0) {
        let opts = OptimizerOptions::default();
        let g = optimize_g(&pair, t, 1.0, &opts).unwrap().value;
        let scaled = optimize_g(&pair, c * t, c, &opts).unwrap().value;
        prop_assert!((scaled - c * g).abs() <= 1e-6 * c.max(1.0) * g.max(1.0));
    }

    #[test]
    fn increments_respect_the_bound(pair in distinct_pair(), seed in 0u64..1000) {
        let opts = OptimizerOptions::default();
        let strategy = build_adaptive_strategy(&pair, &opts).unwrap();
        let params = SqprtParams::new(3.0, 2.0, 5000).unwrap();
        let mut config = BatchConfig::new(50, seed, 10).unwrap();
        config.record_trajectories = true;
        let run = run_batch_detailed(&pair, &strategy, &params, &config).unwrap();
        prop_assert_eq!(run.estimate.violations.total(), 0);
        let v = monitor_invariants(&run.outcomes_h1, &pair, &strategy, &params).unwrap();
        prop_assert_eq!(v.total(), 0);
    }

    #[test]
    fn first_crossing_and_overshoot(pair in distinct_pair(), seed in 0u64..1000, a in 0.5f64..4.0, b in 0.5f64..4.0) {
        let strategy = TestStrategy::Fixed(Povm::computational(2));
        let c = sqht::divergence::increment_bound(&pair).unwrap().c;
        let params = SqprtParams::new(a, b, 2000).unwrap();
        let t = run_trial(&pair.rho0, &pair, &strategy, &params, &mut stream_rng(seed, 1), true).unwrap();
        let steps = t.trajectory.as_ref().unwrap();
        for s in &steps[..steps.len() - 1] {
            prop_assert!(s.s > -a && s.s < b);
        }
        match t.decision {
            Decision::H0 => prop_assert!(t.terminal_statistic >= b && t.terminal_statistic - b <= c + 1e-9),
            Decision::H1 => prop_assert!(t.terminal_statistic <= -a && -a - t.terminal_statistic <= c + 1e-9),
            Decision::Truncated => prop_assert_eq!(t.stopping_time, 2000),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn nonadaptive_region_inside_rectangle(pair in distinct_pair()) {
        let opts = OptimizerOptions::default();
        let rect = adaptive_region(&pair, &opts).unwrap();
        let hull = nonadaptive_region(&pair, 16, &opts).unwrap();
        let [cx, cy] = rect.vertices[2];
        for v in &hull.vertices {
            prop_assert!(v[0] >= -1e-12 && v[1] >= -1e-12);
            prop_assert!(v[0] <= cx + 1e-6 && v[1] <= cy + 1e-6);
            prop_assert!(hull.max_support_excess(v[0], v[1]) <= 1e-6);
        }
        let fine = nonadaptive_region(&pair, 64, &opts).unwrap();
        prop_assert!(fine.area() <= hull.area() + 1e-9);
    }
}

#[test]
fn hull_vertices_saturate_two_supports_or_touch_an_axis() {
    let pair = sqht::model::qubit_family(0.98, 0.98, 1.57).unwrap();
    let hull = nonadaptive_region(&pair, 64, &OptimizerOptions::default()).unwrap();
    for v in &hull.vertices {
        let tight = hull.supports.iter().filter(|s| s.excess(v[0], v[1]).abs() <= 1e-6).count();
        let on_axis = v[0].abs() <= 1e-12 || v[1].abs() <= 1e-12;
        assert!(tight >= 2 || on_axis, "vertex {v:?} saturates {tight} supports");
    }
}

#[test]
fn hull_orientation_is_counterclockwise() {
    let pair = sqht::model::qubit_family(0.9, 0.7, 1.2).unwrap();
    let hull = nonadaptive_region(&pair, 32, &OptimizerOptions::default()).unwrap();
    let n = hull.vertices.len();
    for i in 0..n {
        let (p, q, r) = (hull.vertices[i], hull.vertices[(i + 1) % n], hull.vertices[(i + 2) % n]);
        let cross = (q[0] - p[0]) * (r[1] - q[1]) - (q[1] - p[1]) * (r[0] - q[0]);
        assert!(cross >= -1e-12, "turn at vertex {} is clockwise", (i + 1) % n);
    }
    assert!(hull.area() > 0.0);
}

#[test]
fn qutrit_adaptive_test_runs_clean() {
    let rho0 = DensityMatrix::from_diagonal(&[0.5, 0.3, 0.2]).unwrap();
    let u = random_unitary(3, &mut stream_rng(4, 4));
    let rho1 = DensityMatrix::from_diagonal(&[0.2, 0.2, 0.6]).unwrap().conjugated(&u).unwrap();
    let pair = StatePair::new(rho0, rho1, "qutrit").unwrap();
    let strategy = build_adaptive_strategy(&pair, &OptimizerOptions::default()).unwrap();
    let params = SqprtParams::new(4.0, 4.0, 10_000).unwrap();
    let est = sqht::montecarlo::run_batch(&pair, &strategy, &params, &BatchConfig::new(2000, 9, 40).unwrap()).unwrap();
    assert_eq!(est.violations.total(), 0);
    assert!(est.usable);
    assert!(est.alpha_hat_is.unwrap().within_bound((-4.0f64).exp()));
}
