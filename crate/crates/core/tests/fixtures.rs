//! Frozen regression values. The Monte Carlo numbers were recorded after the
//! invariant monitors and analytic bounds passed on the same run; the
//! sum-rate values come from the measurement optimizer and agree with an
//! independent grid search.

use sqht::divergence::{classical_kl, OptimizerOptions};
use sqht::engine::{thresholds_for, Strategy};
use sqht::model::{DensityMatrix, Povm, StatePair};
use sqht::montecarlo::{run_batch, BatchConfig};
use sqht::regions::sumrate_sweep;

const REL: f64 = 1e-9;

fn close(actual: f64, expected: f64, rel: f64) -> bool {
    (actual - expected).abs() <= rel * expected.abs().max(1e-300)
}

#[test]
fn diag_pair_fixed_eigenbasis_batch() {
    let pair = StatePair::new(
        DensityMatrix::from_diagonal(&[0.6, 0.4]).unwrap(),
        DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap(),
        "diag",
    )
    .unwrap();
    let kl01 = classical_kl(&[0.6, 0.4], &[0.3, 0.7]).unwrap();
    let kl10 = classical_kl(&[0.3, 0.7], &[0.6, 0.4]).unwrap();
    let params = thresholds_for(40, 0.05, kl10, kl01).unwrap();
    let strategy = Strategy::Fixed(Povm::computational(2));
    let est = run_batch(&pair, &strategy, &params, &BatchConfig::new(100_000, 42, 40).unwrap()).unwrap();

    let alpha = est.alpha_hat.unwrap();
    assert!(alpha.within_bound((-params.a).exp()));
    assert!(est.beta_hat.unwrap().within_bound((-params.b).exp()));
    assert_eq!(est.violations.total(), 0);

    assert_eq!(alpha.events, 380);
    assert_eq!(est.beta_hat.unwrap().events, 247);
    assert!(close(est.alpha_hat_is.unwrap().value, 0.0037420059437412415, REL));
    assert!(close(est.beta_hat_is.unwrap().value, 0.002493359902202543, REL));
    assert!(close(est.mean_t0.unwrap().value, 31.09345, REL));
    assert!(close(est.mean_t1.unwrap().value, 30.35045, REL));
    assert_eq!(est.exceedance_0, Some(0.22341));
    assert_eq!(est.exceedance_1, Some(0.21097));

    // classical sequential test: the exponent slope recovers KL(p0‖p1)
    let slope = est.slope_0().unwrap();
    assert!((slope - kl01).abs() / kl01 < 0.15);
}

#[test]
fn sum_rate_curve() {
    let frozen = [
        (0.05, 2.40486145815e-3, 2.40098020629e-3),
        (0.639387755102, 4.73860138956e-1, 3.92162669505e-1),
        (1.25979591837, 2.16994461475, 1.58963919408),
        (1.57, 3.44694392366, 2.53341297775),
    ];
    let thetas: Vec<f64> = frozen.iter().map(|r| r.0).collect();
    let rows = sumrate_sweep(0.98, 0.98, &thetas, &OptimizerOptions::default()).unwrap();
    for (row, (theta, f, g)) in rows.iter().zip(frozen) {
        assert!(close(row.f, f, 1e-9), "f at {theta}: {}", row.f);
        assert!(close(row.g, g, 1e-8), "g at {theta}: {}", row.g);
    }
}
