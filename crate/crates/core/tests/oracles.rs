mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use common::*;
use diqkd_core::certify::{beta_max, entropy_lipschitz_constant};
use diqkd_core::entropy::conditional_state;
use diqkd_core::hard_bound::c_star_sq;
use diqkd_core::keyrate::{key_joint, key_rate, simulate, simulate_with, ExperimentSetup, KeyLoss, Method};
use diqkd_core::{BellDiagonalWeights, BellTest, TVector, WeightOrdering};
use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_setup(rng: &mut ChaCha8Rng) -> ExperimentSetup {
    let mut a = || rng.gen_range(-PI..PI);
    let (a0, a1, b0, b1, b2) = (a(), a(), a(), a(), a());
    ExperimentSetup {
        theta: rng.gen_range(0.0..FRAC_PI_4),
        a0,
        a1,
        b0,
        b1,
        b2,
        eta: rng.gen_range(0.5..1.0),
        p: rng.gen_range(0.0..0.5),
    }
}

fn povm_check(s: &ExperimentSetup) {
    let psi = state(s.theta);
    let corr = |a: f64, b: f64| correlator(&joint(&psi, &lossy_povm(a, s.eta, false), &lossy_povm(b, s.eta, false)));
    let x = corr(s.a0, s.b0) + corr(s.a0, s.b1);
    let y = corr(s.a1, s.b0) - corr(s.a1, s.b1);
    let sim = simulate(s).unwrap();
    assert!((sim.x_raw - x).abs() < 1e-12, "{s:?}: X {} vs {x}", sim.x_raw);
    assert!((sim.y_raw - y).abs() < 1e-12, "{s:?}: Y {} vs {y}", sim.y_raw);

    for (loss, keep) in [(KeyLoss::Binned, false), (KeyLoss::ThirdOutcome, true)] {
        let raw = joint(&psi, &lossy_povm(s.a0, s.eta, false), &lossy_povm(s.b2, s.eta, keep));
        let flipped: Vec<Vec<f64>> = (0..2)
            .map(|a| (0..raw[0].len()).map(|b| (1.0 - s.p) * raw[a][b] + s.p * raw[1 - a][b]).collect())
            .collect();
        let lib = key_joint(s, loss);
        for a in 0..2 {
            for b in 0..flipped[0].len() {
                assert!((lib[a][b] - flipped[a][b]).abs() < 1e-12, "{s:?} {loss:?}");
            }
        }
        let h = simulate_with(s, loss).unwrap().h_ab;
        assert!((h - cond_entropy(&flipped)).abs() < 1e-10, "{s:?} {loss:?}: {h}");
        if !keep {
            let qber = flipped[0][1] + flipped[1][0];
            assert!((sim.qber - qber).abs() < 1e-12);
        }
    }
}

#[test]
fn simulate_matches_povm_model() {
    let mut s = ExperimentSetup::chsh_singlet(0.9);
    povm_check(&s);
    s.p = 0.05;
    povm_check(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        povm_check(&random_setup(&mut rng));
    }
}

#[test]
fn perfect_detectors_give_two_qubit_correlators() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let mut s = random_setup(&mut rng);
        s.eta = 1.0;
        let e = |a: f64, b: f64| a.cos() * b.cos() + (2.0 * s.theta).sin() * a.sin() * b.sin();
        let sim = simulate(&s).unwrap();
        assert!((sim.x_raw - e(s.a0, s.b0) - e(s.a0, s.b1)).abs() < 1e-12);
        assert!((sim.y_raw - e(s.a1, s.b0) + e(s.a1, s.b1)).abs() < 1e-12);
    }
}

#[test]
fn xy_rate_dominates_chsh_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut nonlocal = 0;
    for _ in 0..300 {
        let mut s = ExperimentSetup::chsh_singlet(rng.gen_range(0.85..1.0));
        s.theta = rng.gen_range(0.3..FRAC_PI_4);
        for a in [&mut s.a0, &mut s.a1, &mut s.b0, &mut s.b1, &mut s.b2] {
            *a += rng.gen_range(-0.4..0.4);
        }
        s.p = rng.gen_range(0.0..0.2);
        if simulate(&s).unwrap().corr.is_nonlocal() {
            nonlocal += 1;
        }
        let chsh = key_rate(&s, Method::CHSH_NOISY).unwrap();
        let xy = key_rate(&s, Method::XY_NOISY).unwrap();
        assert!(xy >= chsh - 1e-9, "{s:?}: {xy} < {chsh}");
    }
    assert!(nonlocal > 100, "{nonlocal}");
}

#[test]
fn beta_max_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..6 {
        let tz = rng.gen_range(0.0..1.0);
        let tx = rng.gen_range(0.0..tz);
        let phi = rng.gen_range(0.0..FRAC_PI_2);
        let omega = rng.gen_range(0.0..FRAC_PI_2);
        let lib = beta_max(&TVector::new(tz, tx, tx).unwrap(), phi, &BellTest::new(omega).unwrap());
        let brute = brute_beta_max(tz, tx, phi, omega);
        assert!((lib - brute).abs() < 1e-6, "T = ({tz}, {tx}), phi = {phi}, omega = {omega}: {lib} vs {brute}");
    }
}

#[test]
fn beta_max_continuity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..2000 {
        let omega = rng.gen_range(0.0..FRAC_PI_2);
        let test = BellTest::new(omega).unwrap();
        let tz = rng.gen_range(0.0..1.0);
        let tx = rng.gen_range(0.0..tz);
        let phi = rng.gen_range(0.0..FRAC_PI_2);
        let d: f64 = 1e-3;
        let tz2 = (tz + rng.gen_range(-d..d) as f64).clamp(0.0, 1.0);
        let tx2 = (tx + rng.gen_range(-d..d) as f64).clamp(0.0, tz2);
        let phi2 = phi + rng.gen_range(-d..d);
        let b1 = beta_max(&TVector::new(tz, tx, tx).unwrap(), phi, &test);
        let b2 = beta_max(&TVector::new(tz2, tx2, tx2).unwrap(), phi2, &test);
        let allowed = (tz - tz2).abs() + (tx - tx2).abs() + test.cos() * (phi - phi2).abs() + 1e-9;
        assert!((b1 - b2).abs() <= allowed);
    }
}

/// cos² of the smallest key angle at which β_max reaches β, by scan and bisection.
fn c_star_sq_oracle(tz: f64, tx: f64, omega: f64, beta: f64) -> f64 {
    let reach = |phi: f64| brute_beta_max(tz, tx, phi, omega) >= beta;
    if reach(0.0) {
        return 1.0;
    }
    let n = 64;
    let mut lo = 0.0;
    let mut hi = FRAC_PI_2;
    for k in 1..=n {
        let phi = FRAC_PI_2 * k as f64 / n as f64;
        if reach(phi) {
            hi = phi;
            break;
        }
        lo = phi;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if reach(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (0.5 * (lo + hi)).cos().powi(2)
}

#[test]
fn c_star_matches_angle_oracle() {
    let omega = 3.0 * PI / 8.0;
    let test = BellTest::new(omega).unwrap();
    let (c2, s2) = (omega.cos().powi(2), omega.sin().powi(2));
    for (tz, tx) in [(0.9, 0.3), (1.0, 0.5), (0.7, 0.1)] {
        let t = TVector::new(tz, tx, tx).unwrap();
        let lo = s2 * tz * tz;
        let hi = s2 * tz * tz + c2 * tx * tx;
        for u in [0.25, 0.5, 0.75] {
            let beta = (lo + u * (hi - lo)).sqrt();
            let lib = c_star_sq(&t, &test, beta).unwrap();
            let oracle = c_star_sq_oracle(tz, tx, omega, beta);
            assert!((lib - oracle).abs() < 1e-6, "T = ({tz}, {tx}), beta = {beta}: {lib} vs {oracle}");
        }
        // Below the band the key angle is free.
        let beta = (0.5 * (c2 * tz * tz + s2 * tx * tx + lo)).sqrt();
        assert_eq!(c_star_sq_oracle(tz, tx, omega, beta), 1.0);
        assert_eq!(c_star_sq(&t, &test, beta).unwrap(), 1.0);
    }
}

fn random_weights(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let mut l = [0.0; 4];
    for v in l.iter_mut() {
        *v = -rng.gen_range(1e-12f64..1.0).ln();
    }
    let s: f64 = l.iter().sum();
    let mut l = l.map(|v| v / s);
    if l[0] + l[1] < l[2] + l[3] {
        l = [l[2], l[3], l[0], l[1]];
    }
    [l[0].max(l[1]), l[0].min(l[1]), l[2].max(l[3]), l[2].min(l[3])]
}

#[test]
fn entropy_lipschitz_spot_check() {
    let lam = entropy_lipschitz_constant(4);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let l1 = random_weights(&mut rng);
        let l2 = random_weights(&mut rng);
        let rho = Matrix4::from_diagonal(&l1.into());
        let sigma = Matrix4::from_diagonal(&l2.into());
        let a = root_fidelity(&rho, &sigma).acos();
        assert!((matrix_entropy(&rho) - matrix_entropy(&sigma)).abs() <= lam * a + 1e-9);

        let w = BellDiagonalWeights::new(l1, WeightOrdering::PairMass).unwrap();
        let rho = conditional_state(&w, rng.gen_range(0.0..FRAC_PI_2), rng.gen_range(0.0..1.0)).rho;
        let sigma = conditional_state(&w, rng.gen_range(0.0..FRAC_PI_2), rng.gen_range(0.0..1.0)).rho;
        let a = root_fidelity(&rho, &sigma).acos();
        assert!((matrix_entropy(&rho) - matrix_entropy(&sigma)).abs() <= lam * a + 1e-9);
    }
}
