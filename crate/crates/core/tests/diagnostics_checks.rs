use magshield::diagnostics::{gaussian_tail_check, TailCheckConfig};
use magshield::sampling::{sample, InitialDatum};

fn datum(lambda: f64) -> InitialDatum {
    InitialDatum {
        lambda,
        total_charge: 1.0,
        cutoff_n: f64::INFINITY,
        box_min: [0.5, 0.0, 0.0],
        box_max: [1.5, 1.0, 1.0],
    }
}

#[test]
fn maxwellian_ensemble_fits_its_own_rate() {
    for (lambda, n, seed) in [(1.0, 10_000, 1), (1.0, 100_000, 2), (2.5, 50_000, 3)] {
        let ps = sample(&datum(lambda), n, seed).unwrap();
        let rep = gaussian_tail_check(&ps, &TailCheckConfig::default()).unwrap();
        assert!(
            (rep.lambda1 - lambda).abs() < 0.1 * lambda,
            "lambda {lambda}, n {n}: fitted {}",
            rep.lambda1
        );
        assert!(rep.passed, "worst ratio {}", rep.worst_ratio);
        assert!(rep.tail.len() >= 10);
    }
}
