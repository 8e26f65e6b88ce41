use cfmimo::channel::{CMat, CVec, RcsModel};
use cfmimo::rng::{cn01, stream, Purpose};
use cfmimo::sense_perf::{
    bessel_i0, bessel_i0e, detection_threshold, glrt_statistic, link_detection_mc, marcum_q1, pd_aggregate,
    pd_single, phi_matrix, DetectionConfig, LinkSetup, PhiMode,
};
use cfmimo::Complex64;
use proptest::prelude::*;

fn grid() -> impl Iterator<Item = f64> {
    (0..=32).map(|i| 0.25 * i as f64)
}

#[test]
fn marcum_identities() {
    for a in grid() {
        assert!((marcum_q1(a, 0.0) - 1.0).abs() < 1e-14);
        for b in grid() {
            if a == 0.0 {
                assert!((marcum_q1(0.0, b) - (-b * b / 2.0).exp()).abs() < 1e-13);
            }
            // Q(a,b) + Q(b,a) = 1 + exp(-(a²+b²)/2) I0(ab)
            let lhs = marcum_q1(a, b) + marcum_q1(b, a);
            let rhs = 1.0 + (-(a - b).powi(2) / 2.0).exp() * bessel_i0e(a * b);
            assert!((lhs - rhs).abs() < 1e-12, "a {a} b {b}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn marcum_is_monotone() {
    for a in grid() {
        let mut prev = f64::INFINITY;
        for b in grid() {
            let q = marcum_q1(a, b);
            assert!((0.0..=1.0).contains(&q));
            assert!(q <= prev + 1e-15, "not decreasing in b at a {a} b {b}");
            prev = q;
        }
    }
    for b in grid() {
        let mut prev = -1.0;
        for a in grid() {
            let q = marcum_q1(a, b);
            assert!(q >= prev - 1e-15, "not increasing in a at a {a} b {b}");
            prev = q;
        }
    }
}

#[test]
fn i0_is_increasing_and_scaled_form_agrees() {
    let mut prev = 0.0;
    for i in 0..=400 {
        let x = 0.1 * i as f64;
        let v = bessel_i0(x);
        assert!(v >= 1.0 && v > prev);
        let e = bessel_i0e(x);
        assert!(((e * x.exp()) - v).abs() <= 1e-13 * v);
        prev = v;
    }
}

#[test]
fn pd_matches_a_rician_envelope_simulation() {
    let scnr: f64 = 10.0;
    for p_fa in [1e-2f64, 1e-4] {
        let eta = (-p_fa.ln()).sqrt();
        let mut rng = stream(301, Purpose::MonteCarlo, (1e4 * p_fa) as u64);
        let trials = 1_000_000;
        let m = Complex64::new(scnr.sqrt(), 0.0);
        let hits = (0..trials).filter(|_| (m + cn01(&mut rng)).norm() > eta).count();
        let mc = hits as f64 / trials as f64;
        let pd = pd_single(scnr, p_fa);
        assert!((mc - pd).abs() < 2e-3, "p_fa {p_fa}: mc {mc} formula {pd}");
    }
}

#[test]
fn echo_simulation_matches_the_formula() {
    let (n, p_fa) = (6, 1e-2);
    let phi = CMat::identity(n, n);
    for scnr_db in [0.0, 5.0, 10.0] {
        let scnr = 10f64.powf(scnr_db / 10.0);
        let setup = LinkSetup::new(n, scnr, 0.4, 1.0, RcsModel::FixedAmplitude);
        let det = setup.detector(&phi, p_fa).unwrap();
        let mut rng = stream(302, Purpose::MonteCarlo, scnr_db as u64);
        let trials = 100_000;
        let mc = link_detection_mc(&setup, &det, trials, &mut rng) as f64 / trials as f64;
        let pd = pd_single(scnr, p_fa);
        let se = (pd * (1.0 - pd) / trials as f64).sqrt().max(1e-4);
        assert!((mc - pd).abs() < 4.0 * se, "{scnr_db} dB: mc {mc} formula {pd}");
    }
}

#[test]
fn no_target_gives_false_alarm_rate() {
    let (n, p_fa) = (4, 0.05);
    assert!((pd_single(0.0, p_fa) - p_fa).abs() < 1e-15);
    let phi = CMat::identity(n, n);
    let setup = LinkSetup::new(n, 10.0, 0.5, 0.0, RcsModel::SwerlingI);
    let det = setup.detector(&phi, p_fa).unwrap();
    let mut rng = stream(303, Purpose::MonteCarlo, 0);
    let trials = 100_000;
    let rate = link_detection_mc(&setup, &det, trials, &mut rng) as f64 / trials as f64;
    let se = (p_fa * (1.0 - p_fa) / trials as f64).sqrt();
    assert!((rate - p_fa).abs() < 4.0 * se, "rate {rate}");
}

#[test]
fn strong_targets_are_found() {
    assert!(pd_single(100.0, 1e-2) > 0.99);
    assert!(pd_single(1e6, 1e-6) > 0.999_999);
}

#[test]
fn threshold_round_trip() {
    for (p_fa, s2) in [(0.1, 1.0), (1e-3, 2.5), (1e-8, 0.01)] {
        let eta = detection_threshold(&DetectionConfig::new(p_fa, s2).unwrap());
        let back = (-eta * eta / s2).exp();
        assert!((back - p_fa).abs() <= 1e-12 * p_fa);
    }
    assert!(DetectionConfig::new(0.0, 1.0).is_err());
    assert!(DetectionConfig::new(0.1, 0.0).is_err());
}

#[test]
fn gaussian_compression_keeps_the_false_alarm_rate() {
    let (n, p_fa) = (5, 0.1);
    let mut rng = stream(304, Purpose::MonteCarlo, 0);
    let phi = phi_matrix(PhiMode::Gaussian, n, &mut rng);
    assert!(phi.iter().all(|z| z.im == 0.0));
    let setup = LinkSetup::new(n, 1.0, 0.0, 0.0, RcsModel::SwerlingI).without_target();
    let det = setup.detector(&phi, p_fa).unwrap();
    let trials = 50_000;
    let rate = link_detection_mc(&setup, &det, trials, &mut rng) as f64 / trials as f64;
    let se = (p_fa * (1.0 - p_fa) / trials as f64).sqrt();
    assert!((rate - p_fa).abs() < 4.0 * se, "rate {rate}");
}

#[test]
fn singular_disturbance_is_an_error() {
    let y = CVec::from_element(2, Complex64::new(1.0, 0.0));
    let sigma = CMat::zeros(2, 2);
    assert!(glrt_statistic(&y, &y, &sigma, &CMat::identity(2, 2)).is_err());
    assert!(pd_aggregate(&[], 0.1).is_err());
}

proptest! {
    #[test]
    fn aggregate_pd_never_drops(
        scnrs in prop::collection::vec(0.0f64..30.0, 1..8),
        extra in 0.0f64..30.0,
        bump in 0.0f64..5.0,
        p_fa in 1e-6f64..0.5,
    ) {
        let base = pd_aggregate(&scnrs, p_fa).unwrap();
        let mut more = scnrs.clone();
        more.push(extra);
        prop_assert!(pd_aggregate(&more, p_fa).unwrap() >= base - 1e-12);
        let mut bumped = scnrs.clone();
        bumped[0] += bump;
        prop_assert!(pd_aggregate(&bumped, p_fa).unwrap() >= base - 1e-12);
        prop_assert!(base >= p_fa - 1e-12 && base <= 1.0);
    }
}
