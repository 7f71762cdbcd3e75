use mch_lab::field::{PeriodicField, PeriodicGrid};
use mch_lab::indices::{sample_wave, wave_operator};
use mch_lab::linop::{self, PairingOptions, Tolerance};
use mch_lab::wave::{validity, WaveParams};
use nalgebra::DVector;
use proptest::prelude::*;
use std::f64::consts::PI;

fn valid_point() -> impl Strategy<Value = (f64, f64)> {
    (0.1f64..0.8, 3.0 * PI..10.0 * PI).prop_filter("valid wave", |&(k, l)| validity(k, l, 256).all_ok)
}

#[test]
fn constant_case_closed_forms() {
    let n = 128;
    let g = PeriodicGrid::new(2.0 * PI, n).unwrap();
    let l = linop::assemble_l(&PeriodicField::constant(g, -1.0), &PeriodicField::constant(g, 0.0), 1.0).unwrap();
    let mut expected: Vec<f64> = (-(n as i64) / 2 + 1..=n as i64 / 2 - 1).map(|m| 2.0 * (m * m) as f64 - 2.0).collect();
    // The Nyquist cosine carries the symbol of |m| = n/2.
    expected.push(2.0 * (n * n / 4) as f64 - 2.0);
    expected.sort_by(f64::total_cmp);
    let full = linop::spectrum(&l, Tolerance::default()).unwrap();
    let got = full.eigenvalues.real().unwrap();
    assert!(got.iter().zip(&expected).all(|(a, b)| (a - b).abs() < 1e-8 * b.abs().max(1.0)));
    let restricted = linop::restricted_spectrum(&l, Tolerance::default()).unwrap();
    assert_eq!(restricted.dimension(), n - 1);
    assert!(restricted.eigenvalues.real().unwrap().iter().zip(&expected[1..]).all(|(a, b)| (a - b).abs() < 1e-8 * b.abs().max(1.0)));
    assert_eq!((restricted.n_neg, restricted.z_dim), (0, 2));

    let a = linop::evolution_from(&l).unwrap();
    let ev = linop::restricted_spectrum(&a, Tolerance::default()).unwrap();
    for z in ev.eigenvalues.complex() {
        assert!(z.re.abs() < 1e-8 * z.im.abs().max(1.0));
    }
}

#[test]
fn reference_wave_counts_and_kernel() {
    let w = WaveParams::new(0.5, 6.0 * PI).unwrap();
    let s = sample_wave(&w, 256).unwrap();
    let l = linop::assemble_l(&s.phi, &s.phi2, w.c).unwrap();
    let rep = linop::spectrum(&l, Tolerance::default()).unwrap();
    assert_eq!((rep.n_neg, rep.z_dim), (1, 1));
    assert_eq!(rep.n_neg + rep.z_dim + rep.n_pos, 256);
    let lphi1 = l.apply(&s.phi1).unwrap();
    assert!(lphi1.l2_norm() / s.phi1.l2_norm() < 1e-6);
    assert!(s.phi1.mean().abs() < 1e-12);
    let p = linop::inv_one_pairing(&l, PairingOptions::default()).unwrap();
    assert!(p.residual < 1e-8);
}

#[test]
fn refinement_stability() {
    let w = WaveParams::new(0.5, 6.0 * PI).unwrap();
    let coarse = wave_operator(&w, 256).unwrap();
    let fine = wave_operator(&w, 512).unwrap();
    let a = linop::spectrum(&coarse, Tolerance::default()).unwrap();
    let b = linop::spectrum(&fine, Tolerance::default()).unwrap();
    let (a, b) = (a.eigenvalues.real().unwrap(), b.eigenvalues.real().unwrap());
    for i in 0..5 {
        assert!((a[i] - b[i]).abs() < 1e-8, "eigenvalue {i}: {} vs {}", a[i], b[i]);
    }
    let pa = linop::inv_one_pairing(&coarse, PairingOptions::default()).unwrap().value;
    let pb = linop::inv_one_pairing(&fine, PairingOptions::default()).unwrap().value;
    assert!((pa - pb).abs() < 1e-6 * pa.abs());
}

#[test]
fn evolution_operator_on_constants() {
    let w = WaveParams::new(0.4, 5.0 * PI).unwrap();
    let s = sample_wave(&w, 128).unwrap();
    let l = linop::assemble_l(&s.phi, &s.phi2, w.c).unwrap();
    let a = linop::evolution_from(&l).unwrap();
    let ones = DVector::from_element(128, 1.0);
    let got = a.matrix() * &ones;
    let q: Vec<f64> = s.phi.values().iter().zip(s.phi2.values()).map(|(&p, &pp)| w.c - 3.0 * p * p + pp).collect();
    let dq = PeriodicField::from_values(*s.phi.grid(), q).unwrap().derivative(1).unwrap();
    for (x, y) in got.iter().zip(dq.values()) {
        assert!((x - y).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn symmetric_and_consistent((k, l) in valid_point()) {
        let w = WaveParams::new(k, l).unwrap();
        let op = wave_operator(&w, 128).unwrap();
        let m = op.matrix();
        prop_assert!((m - m.transpose()).amax() < 1e-10);
        prop_assert!(op.pre_symmetrization_defect() < 1e-8 * m.amax().max(1.0));
    }

    #[test]
    fn counts_insensitive_to_tolerance((k, l) in valid_point()) {
        let w = WaveParams::new(k, l).unwrap();
        let op = wave_operator(&w, 128).unwrap();
        let counts: Vec<(usize, usize)> = [1e-11, 1e-10, 1e-9, 1e-8, 1e-7]
            .iter()
            .map(|&t| {
                let r = linop::spectrum(&op, Tolerance::Relative(t)).unwrap();
                (r.n_neg, r.z_dim)
            })
            .collect();
        prop_assert!(counts.iter().all(|&c| c == (1, 1)), "{counts:?}");
    }

    #[test]
    fn hamiltonian_symmetry((k, l) in valid_point()) {
        let w = WaveParams::new(k, l).unwrap();
        let s = sample_wave(&w, 64).unwrap();
        let a = linop::assemble_dxl(&s.phi, &s.phi2, w.c).unwrap();
        let ev = linop::spectrum(&a, Tolerance::default()).unwrap().eigenvalues.complex();
        for z in &ev {
            let mirror = -z.conj();
            let d = ev.iter().map(|y| (y - mirror).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-6 * z.norm().max(1.0));
        }
    }
}
