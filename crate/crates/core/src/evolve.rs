//! Time integration of the equation in its smoothed Hamiltonian form
//!
//! ```text
//! u_t = ∂ₓ(1 − ∂ₓ²)⁻¹ (u u_xx + u_x²/2 − u³),
//! ```
//!
//! whose right side differentiates back to `u u_xxx + 2u_x u_xx − 3u²u_x`.
//! Products are formed on a refined grid and truncated, so the cubic term is
//! alias free. Classical RK4 advances the state; the conserved functionals
//! monitor the run.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{semidistance, Functionals, PeriodicField, PeriodicGrid};
use crate::fourier::{self, Transform};
use crate::linop::{self, OperatorMatrix};
use crate::num::Real;
use crate::wave::WaveParams;

/// Largest relative drift of `E`, `F`, `V` before a run is declared unstable.
pub const DEFAULT_DRIFT_LIMIT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolutionConfig<T> {
    /// Requested step; shortened so an integer number of steps lands on
    /// `t_end`.
    pub dt: T,
    pub t_end: T,
    /// Refinement factor of the product grid, at least 2.
    pub dealias_pad: usize,
    /// Steps between diagnostics.
    pub monitor_every: usize,
    /// Largest `‖u‖∞` tolerated.
    pub blowup_threshold: T,
    /// Largest relative drift tolerated.
    pub drift_limit: T,
}

impl<T: Real> EvolutionConfig<T> {
    pub fn new(dt: T, t_end: T) -> Self {
        Self {
            dt,
            t_end,
            dealias_pad: 2,
            monitor_every: 10,
            blowup_threshold: T::lit(1e6),
            drift_limit: T::lit(DEFAULT_DRIFT_LIMIT),
        }
    }

    /// `dt = ½(L/n) / max(1, ‖u₀‖∞ + c)`.
    pub fn default_dt(u0: &PeriodicField<T>, c: T) -> T {
        let g = u0.grid();
        T::lit(0.5) * g.spacing() / T::one().max(u0.max_abs() + c.mag())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.finite() {
            return Err(Error::Domain(format!("time step {} must be positive", self.dt)));
        }
        if !(self.t_end >= T::zero()) || !self.t_end.finite() {
            return Err(Error::Domain(format!("horizon {} must be non-negative", self.t_end)));
        }
        if self.dealias_pad < 2 {
            return Err(Error::Domain(format!("dealias_pad = {} must be at least 2", self.dealias_pad)));
        }
        if self.monitor_every == 0 {
            return Err(Error::Domain("monitor_every must be at least 1".into()));
        }
        if !(self.blowup_threshold > T::zero()) || !(self.drift_limit > T::zero()) {
            return Err(Error::Domain("blow-up threshold and drift limit must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps and the step actually used.
    pub fn schedule(&self) -> (usize, T) {
        let raw = (self.t_end / self.dt).to_f64_lossy();
        let steps = (raw - 1e-9).ceil().max(0.0) as usize;
        if steps == 0 {
            (0, self.dt)
        } else {
            (steps, self.t_end / T::from_usize_lossy(steps))
        }
    }
}

/// Evaluator of the right side on a fixed grid.
pub struct Rhs<T: Real> {
    n: usize,
    big: usize,
    coarse: Transform<T>,
    fine: Transform<T>,
    kappa: Vec<T>,
}

impl<T: Real> Rhs<T> {
    pub fn new(grid: &PeriodicGrid<T>, dealias_pad: usize) -> Result<Self> {
        if dealias_pad < 2 {
            return Err(Error::Domain(format!("dealias_pad = {dealias_pad} must be at least 2")));
        }
        let n = grid.len();
        Ok(Self {
            n,
            big: dealias_pad * n,
            coarse: Transform::new(n),
            fine: Transform::new(dealias_pad * n),
            kappa: grid.wavenumbers(),
        })
    }

    /// Right side at nodal values `u`. A non-finite result is a numerical
    /// error (the blow-up signal).
    pub fn eval(&self, u: &[T]) -> Result<Vec<T>> {
        let n = self.n;
        let nyq = n / 2;
        let amps = self.coarse.analyze(u);
        let d = |order: u32| -> Vec<Complex<T>> {
            amps.iter()
                .enumerate()
                .map(|(i, &a)| a * fourier::derivative_symbol(self.kappa[i], order, i == nyq))
                .collect()
        };
        let v = self.fine.synthesize(&fourier::pad(&amps, self.big));
        let vx = self.fine.synthesize(&fourier::pad(&d(1), self.big));
        let vxx = self.fine.synthesize(&fourier::pad(&d(2), self.big));
        let half = T::lit(0.5);
        let g: Vec<T> = (0..self.big).map(|i| v[i] * vxx[i] + half * vx[i] * vx[i] - v[i] * v[i] * v[i]).collect();
        let mut gh = fourier::truncate(&self.fine.analyze(&g), n);
        for (i, a) in gh.iter_mut().enumerate() {
            let k = self.kappa[i];
            *a = if i == nyq {
                Complex::new(T::zero(), T::zero())
            } else {
                *a * Complex::new(T::zero(), k / (T::one() + k * k))
            };
        }
        let out = self.coarse.synthesize(&gh);
        if out.iter().any(|x| !x.finite()) {
            return Err(Error::Numerical("non-finite right-hand side (blow-up)".into()));
        }
        Ok(out)
    }

    /// One classical RK4 step.
    pub fn rk4_step(&self, u: &[T], dt: T) -> Result<Vec<T>> {
        let half = T::lit(0.5) * dt;
        let axpy = |base: &[T], s: T, k: &[T]| -> Vec<T> { base.iter().zip(k).map(|(&b, &x)| b + s * x).collect() };
        let k1 = self.eval(u)?;
        let k2 = self.eval(&axpy(u, half, &k1))?;
        let k3 = self.eval(&axpy(u, half, &k2))?;
        let k4 = self.eval(&axpy(u, dt, &k3))?;
        let sixth = dt / T::lit(6.0);
        Ok((0..u.len())
            .map(|i| u[i] + sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]))
            .collect())
    }
}

/// `∂ₓ(1 − ∂ₓ²)⁻¹(u u_xx + u_x²/2 − u³)` with the default dealiasing.
pub fn rhs<T: Real>(u: &PeriodicField<T>) -> Result<PeriodicField<T>> {
    let r = Rhs::new(u.grid(), 2)?;
    PeriodicField::from_values(*u.grid(), r.eval(u.values())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminated {
    Completed,
    Blowup,
    InstabilityDetected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRunReport<T> {
    pub times: Vec<T>,
    /// `ρ(u(t), φ)`; empty for runs without a reference wave.
    pub rho: Vec<T>,
    pub drift_e: Vec<T>,
    pub drift_f: Vec<T>,
    pub drift_v: Vec<T>,
    pub terminated: Terminated,
    pub reason: Option<String>,
    pub dt: T,
    pub steps: usize,
}

impl<T: Real> StabilityRunReport<T> {
    /// Largest relative drift over the run, per functional `(E, F, V)`.
    pub fn max_drifts(&self) -> [T; 3] {
        let m = |v: &[T]| crate::num::max_abs(v);
        [m(&self.drift_e), m(&self.drift_f), m(&self.drift_v)]
    }

    pub fn sup_rho(&self) -> T {
        crate::num::max_abs(&self.rho)
    }
}

/// A monitored state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub t: T,
    pub u: PeriodicField<T>,
}

/// Drift relative to `|x₀|`, or absolute when `x₀ = 0`.
fn drift<T: Real>(x: T, x0: T) -> T {
    let d = (x - x0).mag();
    if x0 == T::zero() {
        d
    } else {
        d / x0.mag()
    }
}

struct Monitor<'a, T: Real> {
    reference: Option<&'a WaveParams<T>>,
    rho_limit: Option<T>,
}

fn integrate<T: Real>(
    u0: &PeriodicField<T>,
    cfg: &EvolutionConfig<T>,
    monitor: Monitor<'_, T>,
) -> Result<(Vec<Snapshot<T>>, StabilityRunReport<T>)> {
    cfg.validate()?;
    let grid = *u0.grid();
    let stepper = Rhs::new(&grid, cfg.dealias_pad)?;
    let (steps, dt) = cfg.schedule();
    let f0 = u0.functionals();
    let mut report = StabilityRunReport {
        times: Vec::new(),
        rho: Vec::new(),
        drift_e: Vec::new(),
        drift_f: Vec::new(),
        drift_v: Vec::new(),
        terminated: Terminated::Completed,
        reason: None,
        dt,
        steps: 0,
    };
    let mut snaps = Vec::new();
    let mut record = |t: T, u: &PeriodicField<T>, report: &mut StabilityRunReport<T>| -> Result<Option<Terminated>> {
        let f: Functionals<T> = u.functionals();
        let de = drift(f.energy, f0.energy);
        let df = drift(f.momentum, f0.momentum);
        let dv = drift(f.mass, f0.mass);
        report.times.push(t);
        report.drift_e.push(de);
        report.drift_f.push(df);
        report.drift_v.push(dv);
        snaps.push(Snapshot { t, u: u.clone() });
        if let Some(w) = monitor.reference {
            let rho = semidistance(u, w)?.rho;
            report.rho.push(rho);
            if let Some(limit) = monitor.rho_limit {
                if rho > limit {
                    report.reason = Some(format!("ρ = {rho:e} exceeded {limit:e} at t = {t}"));
                    return Ok(Some(Terminated::InstabilityDetected));
                }
            }
        }
        let worst = de.max(df).max(dv);
        if !(worst <= cfg.drift_limit) {
            report.reason = Some(format!("conserved-quantity drift {worst:e} at t = {t} (time step unstable)"));
            return Ok(Some(Terminated::Blowup));
        }
        Ok(None)
    };

    let mut u = u0.values().to_vec();
    if let Some(stop) = record(T::zero(), u0, &mut report)? {
        report.terminated = stop;
        return Ok((snaps, report));
    }
    for step in 1..=steps {
        let next = match stepper.rk4_step(&u, dt) {
            Ok(v) => v,
            Err(Error::Numerical(msg)) => {
                report.terminated = Terminated::Blowup;
                report.reason = Some(msg);
                report.steps = step - 1;
                return Ok((snaps, report));
            }
            Err(e) => return Err(e),
        };
        u = next;
        report.steps = step;
        let sup = crate::num::max_abs(&u);
        let t = dt * T::from_usize_lossy(step);
        if !(sup <= cfg.blowup_threshold) {
            report.terminated = Terminated::Blowup;
            report.reason = Some(format!("‖u‖∞ = {sup:e} exceeded {:e} at t = {t}", cfg.blowup_threshold));
            return Ok((snaps, report));
        }
        if step % cfg.monitor_every == 0 || step == steps {
            let field = PeriodicField::from_values(grid, u.clone())?;
            if let Some(stop) = record(t, &field, &mut report)? {
                report.terminated = stop;
                return Ok((snaps, report));
            }
        }
    }
    Ok((snaps, report))
}

/// Integrates from `u0` to `cfg.t_end`, sampling every `monitor_every`
/// steps and at the final time. Blow-up and drift explosion end the run and
/// are recorded in the report.
pub fn run<T: Real>(u0: &PeriodicField<T>, cfg: &EvolutionConfig<T>) -> Result<(Vec<Snapshot<T>>, StabilityRunReport<T>)> {
    integrate(u0, cfg, Monitor { reference: None, rho_limit: None })
}

/// As [`run`], also sampling `ρ(u(t), φ)` against `wave`.
pub fn run_against<T: Real>(
    u0: &PeriodicField<T>,
    wave: &WaveParams<T>,
    cfg: &EvolutionConfig<T>,
) -> Result<(Vec<Snapshot<T>>, StabilityRunReport<T>)> {
    integrate(u0, cfg, Monitor { reference: Some(wave), rho_limit: None })
}

/// Outcome of a linearized run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport<T> {
    /// `log(‖v(T)‖/‖v(0)‖)/T` in `L²`.
    pub growth_rate: T,
    pub t_end: T,
    pub dt: T,
    pub steps: u64,
    pub initial_norm: T,
    /// `log ‖v(T)‖`, kept in log form to survive large growth.
    pub final_log_norm: T,
    #[serde(skip)]
    pub final_state: Vec<T>,
}

/// Integrates `v_t = A v` with RK4 up to `t_end`.
///
/// The one-step map `R = Σ_{j≤4} (hA)^j/j!` is formed once and raised to the
/// step count by repeated squaring, rescaling as it goes. The step is
/// `2/√(‖A‖₁‖A‖∞)`, inside the RK4 stability region for every eigenvalue.
pub fn linearized_run_matrix<T: Real>(a: &OperatorMatrix<T>, v0: &PeriodicField<T>, t_end: T) -> Result<GrowthReport<T>> {
    if v0.grid() != a.grid() {
        return Err(Error::Data("initial datum and operator live on different grids".into()));
    }
    if !(t_end > T::zero()) || !t_end.finite() {
        return Err(Error::Domain(format!("horizon {t_end} must be positive")));
    }
    let mean = v0.mean();
    let v0 = v0.map(|x| x - mean)?;
    let initial_norm = v0.l2_norm();
    if !(initial_norm > T::zero()) {
        return Err(Error::Data("initial datum vanishes after projection to zero mean".into()));
    }
    let m = a.matrix();
    let n = m.nrows();
    let norm1 = (0..n).fold(T::zero(), |s, j| s.max(m.column(j).iter().fold(T::zero(), |t, &x| t + x.mag())));
    let norm_inf = (0..n).fold(T::zero(), |s, i| s.max(m.row(i).iter().fold(T::zero(), |t, &x| t + x.mag())));
    let bound = (norm1 * norm_inf).sqrt().max(T::machine_eps());
    let raw_steps = (t_end * bound / T::lit(2.0)).to_f64_lossy().ceil().max(1.0);
    if raw_steps > 1e15 {
        return Err(Error::Domain(format!("{raw_steps:e} steps needed; horizon too long")));
    }
    let steps = raw_steps as u64;
    let dt = t_end / T::lit(raw_steps);

    let ha = m * dt;
    let mut term = DMatrix::<T>::identity(n, n);
    let mut r = DMatrix::<T>::identity(n, n);
    for j in 1..=4 {
        term = &term * &ha / T::from_usize_lossy(j);
        r += &term;
    }

    let mut v = DVector::from_column_slice(v0.values());
    let mut log_norm = T::zero();
    let mut power = r;
    let mut power_log = T::zero();
    let mut remaining = steps;
    while remaining > 0 {
        if remaining & 1 == 1 {
            v = &power * v;
            let s = v.amax();
            if !(s > T::zero()) || !s.finite() {
                return Err(Error::Numerical("linearized propagation lost the state".into()));
            }
            v /= s;
            log_norm += s.ln() + power_log;
        }
        remaining >>= 1;
        if remaining > 0 {
            power = &power * &power;
            let s = power.amax();
            if !(s > T::zero()) || !s.finite() {
                return Err(Error::Numerical("propagator squaring overflowed".into()));
            }
            power /= s;
            power_log = T::lit(2.0) * power_log + s.ln();
        }
    }
    let final_field = PeriodicField::from_values(*v0.grid(), v.as_slice().to_vec())?;
    let final_log_norm = log_norm + final_field.l2_norm().ln();
    Ok(GrowthReport {
        growth_rate: (final_log_norm - initial_norm.ln()) / t_end,
        t_end,
        dt,
        steps,
        initial_norm,
        final_log_norm,
        final_state: v.iter().map(|&x| x * log_norm.exp()).collect(),
    })
}

/// Linearized flow `v_t = ∂ₓ𝓛 v` about `wave`, with `v0` projected to zero
/// mean.
pub fn linearized_run<T: Real>(v0: &PeriodicField<T>, wave: &WaveParams<T>, t_end: T) -> Result<GrowthReport<T>> {
    let s = crate::indices::sample_wave(wave, v0.grid().len())?;
    let a = linop::assemble_dxl(&s.phi, &s.phi2, wave.c)?;
    linearized_run_matrix(&a, v0, t_end)
}

/// Settings of the orbital experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitConfig<T> {
    pub evolution: EvolutionConfig<T>,
    /// Highest Fourier mode of the perturbation.
    pub bandwidth: usize,
    /// The run stops once `ρ > instability_factor·δ`.
    pub instability_factor: T,
}

/// Seeded band-limited field with modes `0..=bandwidth`, normalized to unit
/// `H¹` norm.
pub fn random_perturbation<T: Real>(grid: PeriodicGrid<T>, bandwidth: usize, seed: u64) -> Result<PeriodicField<T>> {
    if bandwidth == 0 || bandwidth >= grid.len() / 2 {
        return Err(Error::Domain(format!("bandwidth {bandwidth} must lie in 1..{}", grid.len() / 2)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (0..=bandwidth).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let base = T::two_pi() / grid.period();
    let values = grid
        .nodes()
        .into_iter()
        .map(|x| {
            coeffs.iter().enumerate().fold(T::zero(), |s, (m, &(a, b))| {
                let th = base * T::from_usize_lossy(m) * x;
                s + T::lit(a) * th.cos() + T::lit(b) * th.sin()
            })
        })
        .collect();
    let w = PeriodicField::from_values(grid, values)?;
    let norm = w.h1_norm();
    Ok(w.scaled(T::one() / norm))
}

/// Evolves `φ + δw` and samples `ρ(u(t), φ)`. The instability check is
/// skipped for `δ = 0`.
pub fn orbital_experiment<T: Real>(
    wave: &WaveParams<T>,
    grid: PeriodicGrid<T>,
    delta: T,
    seed: u64,
    cfg: &OrbitConfig<T>,
) -> Result<StabilityRunReport<T>> {
    if !(delta >= T::zero()) || !delta.finite() {
        return Err(Error::Domain(format!("perturbation size δ = {delta} must be non-negative")));
    }
    let phi = PeriodicField::from_wave(wave, grid)?;
    let w = random_perturbation(grid, cfg.bandwidth, seed)?;
    let u0 = phi.combine(T::one(), &w, delta)?;
    let limit = (delta > T::zero()).then(|| cfg.instability_factor * delta);
    let (_, report) = integrate(&u0, &cfg.evolution, Monitor { reference: Some(wave), rho_limit: limit })?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn constants_are_equilibria() {
        let g = PeriodicGrid::new(TAU, 32).unwrap();
        let r = rhs(&PeriodicField::constant(g, 0.7)).unwrap();
        assert!(r.max_abs() < 1e-15);
        let (snaps, rep) = run(&PeriodicField::constant(g, -0.4), &EvolutionConfig::new(0.1, 1.0)).unwrap();
        assert_eq!(rep.terminated, Terminated::Completed);
        assert!(snaps.last().unwrap().u.values().iter().all(|&v| (v + 0.4).abs() < 1e-15));
        assert!(rep.max_drifts().iter().all(|&d| d < 1e-15));
    }

    #[test]
    fn smoothing_symbol() {
        // About u ≡ κ the bracket is linear in a small mode ε cos(mx):
        // ε(−κm² − 3κ²) cos(mx) + O(ε²), then ∂ₓ(1 − ∂ₓ²)⁻¹ maps cos(mx) to
        // −m sin(mx)/(1 + m²).
        let g = PeriodicGrid::new(TAU, 64).unwrap();
        let (kappa, eps, m) = (0.5, 1e-7, 3.0);
        let u = crate::field::sample(|x| kappa + eps * (m * x).cos(), g).unwrap();
        let r = rhs(&u).unwrap();
        for (j, &v) in r.values().iter().enumerate() {
            let x = g.node(j);
            let expected = eps * (kappa * m * m + 3.0 * kappa * kappa) * m / (1.0 + m * m) * (m * x).sin();
            assert!((v - expected).abs() < 1e-13, "{v} vs {expected}");
        }
    }

    #[test]
    fn schedule_lands_on_horizon() {
        let cfg = EvolutionConfig::new(0.3, 1.0);
        let (steps, dt) = cfg.schedule();
        assert_eq!(steps, 4);
        assert!((dt * steps as f64 - 1.0).abs() < 1e-15);
        assert_eq!(EvolutionConfig::new(0.25, 1.0).schedule().0, 4);
    }

    #[test]
    fn invalid_configuration() {
        let g = PeriodicGrid::new(TAU, 16).unwrap();
        let u = PeriodicField::constant(g, 0.0);
        let mut cfg = EvolutionConfig::new(0.1, 1.0);
        cfg.dealias_pad = 1;
        assert!(matches!(run(&u, &cfg), Err(Error::Domain(_))));
        assert!(matches!(run(&u, &EvolutionConfig::new(-0.1, 1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn blowup_is_recorded() {
        let g = PeriodicGrid::new(TAU, 32).unwrap();
        let u = crate::field::sample(|x| 3.0 * x.cos(), g).unwrap();
        let mut cfg = EvolutionConfig::new(0.5, 20.0);
        cfg.monitor_every = 1;
        let (_, rep) = run(&u, &cfg).unwrap();
        assert_eq!(rep.terminated, Terminated::Blowup);
        assert!(rep.reason.is_some());
    }

    #[test]
    fn kernel_direction_is_stationary() {
        let w = WaveParams::new(0.5, 6.0 * PI).unwrap();
        let s = crate::indices::sample_wave(&w, 64).unwrap();
        let rep = linearized_run(&s.phi1, &w, 5.0).unwrap();
        let end = PeriodicField::from_values(*s.phi1.grid(), rep.final_state.clone()).unwrap();
        let err = end.try_sub(&s.phi1).unwrap().l2_norm() / s.phi1.l2_norm();
        assert!(err < 1e-6, "relative departure {err}");
    }

    #[test]
    fn perturbation_is_seeded_and_normalized() {
        let g = PeriodicGrid::new(6.0 * PI, 64).unwrap();
        let a = random_perturbation(g, 6, 7).unwrap();
        let b = random_perturbation(g, 6, 7).unwrap();
        let c = random_perturbation(g, 6, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((a.h1_norm() - 1.0).abs() < 1e-12);
    }
}
