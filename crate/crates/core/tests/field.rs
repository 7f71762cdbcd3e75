use mch_lab::evolve::random_perturbation;
use mch_lab::field::{lyapunov, sample, semidistance, ChargeCoefficients, PeriodicField, PeriodicGrid};
use mch_lab::wave::WaveParams;
use proptest::prelude::*;
use std::f64::consts::PI;

fn reference() -> (WaveParams<f64>, PeriodicGrid<f64>) {
    let w = WaveParams::new(0.5, 6.0 * PI).unwrap();
    (w, PeriodicGrid::new(w.period, 128).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn semidistance_vanishes_on_the_orbit(s in -30.0f64..30.0) {
        let (w, g) = reference();
        let u = PeriodicField::from_wave(&w, g).unwrap().shifted(s);
        let r = semidistance(&u, &w).unwrap();
        prop_assert!(r.rho < 1e-8);
        let y = (s.rem_euclid(w.period) - r.shift).abs();
        prop_assert!(y < 1e-6 || (y - w.period).abs() < 1e-6);
    }

    #[test]
    fn semidistance_is_shift_invariant(s in -30.0f64..30.0, seed in 0u64..1000) {
        let (w, g) = reference();
        let phi = PeriodicField::from_wave(&w, g).unwrap();
        let u = phi.combine(1.0, &random_perturbation(g, 5, seed).unwrap(), 0.01).unwrap();
        let a = semidistance(&u, &w).unwrap().rho;
        let b = semidistance(&u.shifted(s), &w).unwrap().rho;
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(a <= 0.01 + 1e-12);
    }

    #[test]
    fn functionals_are_translation_invariant(s in -10.0f64..10.0, seed in 0u64..1000) {
        let (_, g) = reference();
        let u = random_perturbation(g, 12, seed).unwrap();
        let a = u.functionals();
        let b = u.shifted(s).functionals();
        prop_assert!((a.energy - b.energy).abs() < 1e-13);
        prop_assert!((a.momentum - b.momentum).abs() < 1e-13);
        prop_assert!((a.mass - b.mass).abs() < 1e-13);
        prop_assert!((2.0 * a.momentum - u.h1_norm().powi(2)).abs() < 1e-12);
    }
}

#[test]
fn functionals_of_a_cosine() {
    // u = α + β cos x on [0, 2π): every integral is a finite trigonometric sum.
    let g = PeriodicGrid::new(2.0 * PI, 32).unwrap();
    let (alpha, beta) = (0.3, 0.7);
    let u = sample(|x| alpha + beta * x.cos(), g).unwrap();
    let f = u.functionals();
    let l = 2.0 * PI;
    let u4 = l * (alpha.powi(4) + 3.0 * alpha * alpha * beta * beta + 3.0 / 8.0 * beta.powi(4));
    let uux2 = l * alpha * beta * beta / 2.0;
    assert!((f.energy + u4 / 4.0 + uux2 / 2.0).abs() < 1e-13);
    assert!((f.momentum - 0.5 * l * (alpha * alpha + beta * beta)).abs() < 1e-13);
    assert!((f.mass - l * alpha).abs() < 1e-13);
}

#[test]
fn lyapunov_functional_is_quadratic_near_the_wave() {
    let (w, g) = reference();
    let phi = PeriodicField::from_wave(&w, g).unwrap();
    let q = ChargeCoefficients { d_constant_dk: 1.0, dc_dk: 1.0 };
    assert!(lyapunov(&phi, &w, 1.0, q).unwrap().abs() < 1e-12);
    let v = random_perturbation(g, 4, 3).unwrap();
    let b1 = lyapunov(&phi.combine(1.0, &v, 1e-3).unwrap(), &w, 1.0, q).unwrap();
    let b2 = lyapunov(&phi.combine(1.0, &v, 5e-4).unwrap(), &w, 1.0, q).unwrap();
    let ratio = b1 / b2;
    assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
}
