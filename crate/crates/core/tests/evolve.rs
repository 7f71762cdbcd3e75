use mch_lab::evolve::{self, EvolutionConfig, OrbitConfig, Terminated};
use mch_lab::field::{PeriodicField, PeriodicGrid};
use mch_lab::indices::sample_wave;
use mch_lab::linop;
use mch_lab::wave::WaveParams;
use std::f64::consts::{PI, TAU};

fn perturbed_wave(n: usize) -> (WaveParams<f64>, PeriodicField<f64>) {
    let w = WaveParams::new(0.5, 6.0 * PI).unwrap();
    let g = PeriodicGrid::new(w.period, n).unwrap();
    let phi = PeriodicField::from_wave(&w, g).unwrap();
    let bump = evolve::random_perturbation(g, 6, 11).unwrap();
    (w, phi.combine(1.0, &bump, 0.05).unwrap())
}

#[test]
fn translation_equivariance() {
    let (_, u0) = perturbed_wave(128);
    let cfg = EvolutionConfig::new(0.02, 1.0);
    let s = 0.37 * u0.grid().spacing() + 1.3;
    let (a, _) = evolve::run(&u0, &cfg).unwrap();
    let (b, _) = evolve::run(&u0.shifted(s), &cfg).unwrap();
    let lhs = b.last().unwrap().u.clone();
    let rhs = a.last().unwrap().u.shifted(s);
    assert!(lhs.try_sub(&rhs).unwrap().max_abs() < 1e-8);
}

#[test]
fn mean_is_conserved() {
    let (_, u0) = perturbed_wave(128);
    let (snaps, rep) = evolve::run(&u0, &EvolutionConfig::new(0.02, 2.0)).unwrap();
    assert_eq!(rep.terminated, Terminated::Completed);
    let v0 = u0.integrate();
    for s in &snaps {
        assert!((s.u.integrate() - v0).abs() < 1e-12 * v0.abs().max(1.0));
    }
}

#[test]
fn wave_is_transported() {
    let w = WaveParams::new(0.5, 6.0 * PI).unwrap();
    let g = PeriodicGrid::new(w.period, 128).unwrap();
    let phi = PeriodicField::from_wave(&w, g).unwrap();
    let mut cfg = EvolutionConfig::new(0.02, 1.0);
    cfg.monitor_every = 5;
    let (snaps, rep) = evolve::run_against(&phi, &w, &cfg).unwrap();
    for s in &snaps {
        let exact = phi.shifted(-w.c * s.t);
        assert!(s.u.try_sub(&exact).unwrap().max_abs() < 1e-5);
    }
    assert_eq!(rep.times.len(), rep.rho.len());
    assert!(rep.rho.iter().all(|&r| (0.0..1e-8).contains(&r)));
    assert_eq!(rep.drift_e[0], 0.0);
}

#[test]
fn unperturbed_orbit_stays_on_orbit() {
    let w = WaveParams::new(0.5, 6.0 * PI).unwrap();
    let g = PeriodicGrid::new(w.period, 128).unwrap();
    let cfg = OrbitConfig { evolution: EvolutionConfig::new(0.05, 5.0), bandwidth: 8, instability_factor: 20.0 };
    let rep = evolve::orbital_experiment(&w, g, 0.0, 1, &cfg).unwrap();
    assert_eq!(rep.terminated, Terminated::Completed);
    assert!(rep.sup_rho() < 1e-8);
    assert!(evolve::orbital_experiment(&w, g, -1e-3, 1, &cfg).is_err());
}

#[test]
fn linearized_constant_case_is_isometric() {
    let g = PeriodicGrid::new(TAU, 128).unwrap();
    let l = linop::assemble_l(&PeriodicField::constant(g, -1.0), &PeriodicField::constant(g, 0.0), 1.0).unwrap();
    let a = linop::evolution_from(&l).unwrap();
    let v0 = evolve::random_perturbation(g, 4, 3).unwrap();
    let r = evolve::linearized_run_matrix(&a, &v0, 10.0).unwrap();
    assert!((r.final_log_norm - r.initial_norm.ln()).abs() < 1e-8);
}

#[test]
fn kernel_direction_is_frozen_by_linear_flow() {
    let w = WaveParams::new(0.5, 6.0 * PI).unwrap();
    let s = sample_wave(&w, 128).unwrap();
    let r = evolve::linearized_run(&s.phi1, &w, 5.0).unwrap();
    let end = PeriodicField::from_values(*s.phi1.grid(), r.final_state).unwrap();
    assert!(end.try_sub(&s.phi1).unwrap().l2_norm() < 1e-6 * s.phi1.l2_norm());
}
