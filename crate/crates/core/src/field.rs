//! Uniform periodic grids, Fourier calculus and the conserved functionals.
//!
//! Inner products and norms follow the energy space `H¹_per`:
//! `‖v‖² = ∫₀^L v² + v_x² dx`, i.e. `2F(v)`.

use rustfft::num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{self, Transform};
use crate::num::Real;
use crate::wave::WaveParams;

/// Refinement factor used when integrating polynomial nonlinearities; the
/// quartic terms of `E` are then integrated exactly for trigonometric data.
const QUADRATURE_PAD: usize = 3;

/// `n` equispaced nodes `x_j = jL/n` on `[0, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicGrid<T> {
    period: T,
    n: usize,
}

impl<T: Real> PeriodicGrid<T> {
    pub const MIN_NODES: usize = 16;

    pub fn new(period: T, n: usize) -> Result<Self> {
        if !(period > T::zero()) || !period.finite() {
            return Err(Error::Domain(format!("grid period {period} must be positive")));
        }
        if n < Self::MIN_NODES || n % 2 != 0 {
            return Err(Error::Domain(format!("grid size {n} must be even and at least {}", Self::MIN_NODES)));
        }
        Ok(Self { period, n })
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> T {
        self.period / T::from_usize_lossy(self.n)
    }

    pub fn node(&self, j: usize) -> T {
        self.spacing() * T::from_usize_lossy(j)
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<T> {
        fourier::wavenumbers(self.n, self.period)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self != other {
            return Err(Error::Data(format!(
                "fields live on different grids (L = {}, n = {} vs L = {}, n = {})",
                self.period, self.n, other.period, other.n
            )));
        }
        Ok(())
    }
}

/// Real samples of an `L`-periodic function on a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField<T> {
    grid: PeriodicGrid<T>,
    values: Vec<T>,
}

/// Samples `f` at the grid nodes.
pub fn sample<T: Real, F: Fn(T) -> T>(f: F, grid: PeriodicGrid<T>) -> Result<PeriodicField<T>> {
    PeriodicField::from_values(grid, grid.nodes().into_iter().map(f).collect())
}

/// The conserved quantities `(E, F, V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Functionals<T> {
    /// `E(u) = −∫ u⁴/4 + u u_x²/2`.
    pub energy: T,
    /// `F(u) = ½∫ u² + u_x²`.
    pub momentum: T,
    /// `V(u) = ∫ u`.
    pub mass: T,
}

impl<T: Real> Functionals<T> {
    /// Augmented functional `G = E + cF − AV`.
    pub fn augmented(&self, c: T, constant: T) -> T {
        self.energy + c * self.momentum - constant * self.mass
    }
}

/// Coefficients of `Q(u) = (dA/dk) V(u) − (dc/dk) F(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChargeCoefficients<T> {
    pub d_constant_dk: T,
    pub dc_dk: T,
}

impl<T: Real> ChargeCoefficients<T> {
    pub fn charge(&self, f: &Functionals<T>) -> T {
        self.d_constant_dk * f.mass - self.dc_dk * f.momentum
    }
}

/// Result of the orbit distance minimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Semidistance<T> {
    pub rho: T,
    /// Minimizing `y` in `‖u − φ(· + y)‖`, reduced to `[0, L)`.
    pub shift: T,
}

impl<T: Real> PeriodicField<T> {
    pub fn from_values(grid: PeriodicGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Data(format!("{} samples for a grid of {} nodes", values.len(), grid.len())));
        }
        if let Some(j) = values.iter().position(|v| !v.finite()) {
            return Err(Error::Data(format!("non-finite sample at node {j}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: PeriodicGrid<T>, value: T) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    /// The sampled wave profile `φ` of `wave` on `grid`.
    pub fn from_wave(wave: &WaveParams<T>, grid: PeriodicGrid<T>) -> Result<Self> {
        check_period(wave, &grid)?;
        sample(|x| wave.profile(x).phi, grid)
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub(crate) fn with_values(&self, values: Vec<T>) -> Self {
        Self { grid: self.grid, values }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::from_values(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `alpha·self + beta·other`, for fields on the same grid.
    pub fn combine(&self, alpha: T, other: &Self, beta: T) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(&x, &y)| alpha * x + beta * y).collect()))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.combine(T::one(), other, -T::one())
    }

    pub fn scaled(&self, s: T) -> Self {
        self.with_values(self.values.iter().map(|&v| v * s).collect())
    }

    pub fn amplitudes(&self) -> Vec<Complex<T>> {
        Transform::new(self.grid.len()).analyze(&self.values)
    }

    /// Spectral derivative of order 1, 2 or 3.
    pub fn derivative(&self, order: u32) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::Domain(format!("derivative order {order} not in {{1, 2, 3}}")));
        }
        let n = self.grid.len();
        let t = Transform::new(n);
        let kappa = self.grid.wavenumbers();
        let mut amps = t.analyze(&self.values);
        for (i, a) in amps.iter_mut().enumerate() {
            *a *= fourier::derivative_symbol(kappa[i], order, i == n / 2);
        }
        Ok(self.with_values(t.synthesize(&amps)))
    }

    /// Translate `u(· + s)` by Fourier phase multiplication (exact for
    /// band-limited data; the Nyquist cosine keeps only its even part).
    pub fn shifted(&self, s: T) -> Self {
        let n = self.grid.len();
        let t = Transform::new(n);
        let kappa = self.grid.wavenumbers();
        let mut amps = t.analyze(&self.values);
        for (i, a) in amps.iter_mut().enumerate() {
            if i == n / 2 {
                *a = a.scale((kappa[i] * s).cos());
            } else {
                *a *= Complex::new((kappa[i] * s).cos(), (kappa[i] * s).sin());
            }
        }
        self.with_values(t.synthesize(&amps))
    }

    /// Trapezoid rule `(L/n) Σ u_j`.
    pub fn integrate(&self) -> T {
        self.grid.spacing() * self.values.iter().fold(T::zero(), |s, &v| s + v)
    }

    pub fn mean(&self) -> T {
        self.integrate() / self.grid.period()
    }

    /// `L²` pairing with trapezoid weights.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.grid.check_same(&other.grid)?;
        Ok(self.grid.spacing() * self.values.iter().zip(&other.values).fold(T::zero(), |s, (&x, &y)| s + x * y))
    }

    pub fn l2_norm(&self) -> T {
        self.inner(self).expect("same grid").sqrt()
    }

    /// `‖u‖_{H¹} = √(∫u² + u_x²)` via Parseval.
    pub fn h1_norm(&self) -> T {
        let kappa = self.grid.wavenumbers();
        let amps = self.amplitudes();
        h1_weighted_sum(&amps, &kappa).sqrt() * self.grid.period().sqrt()
    }

    pub fn max_abs(&self) -> T {
        crate::num::max_abs(&self.values)
    }

    /// Values of `u` and `u_x` spectrally interpolated onto `pad·n` nodes.
    fn refined(&self, pad: usize) -> (Vec<T>, Vec<T>) {
        let n = self.grid.len();
        let big = pad * n;
        let t = Transform::new(n);
        let fine = Transform::new(big);
        let kappa = self.grid.wavenumbers();
        let amps = t.analyze(&self.values);
        let d_amps: Vec<_> = amps
            .iter()
            .enumerate()
            .map(|(i, &a)| a * fourier::derivative_symbol(kappa[i], 1, i == n / 2))
            .collect();
        (fine.synthesize(&fourier::pad(&amps, big)), fine.synthesize(&fourier::pad(&d_amps, big)))
    }

    /// `(E, F, V)` with `u_x` from spectral differentiation. Integrals are
    /// taken on a 3× refined grid so the quartic integrands carry no
    /// aliasing error.
    pub fn functionals(&self) -> Functionals<T> {
        let (u, ux) = self.refined(QUADRATURE_PAD);
        let h = self.grid.period() / T::from_usize_lossy(u.len());
        let half = T::lit(0.5);
        let quarter = T::lit(0.25);
        let (mut e, mut f, mut v) = (T::zero(), T::zero(), T::zero());
        for (&w, &wx) in u.iter().zip(&ux) {
            e -= quarter * w.powi(4) + half * w * wx * wx;
            f += half * (w * w + wx * wx);
            v += w;
        }
        Functionals { energy: e * h, momentum: f * h, mass: v * h }
    }

    /// `G(u) = E(u) + cF(u) − AV(u)`.
    pub fn augmented(&self, c: T, constant: T) -> T {
        self.functionals().augmented(c, constant)
    }
}

fn check_period<T: Real>(wave: &WaveParams<T>, grid: &PeriodicGrid<T>) -> Result<()> {
    let tol = T::lit(1e-12) * wave.period.mag().max(T::one());
    if (wave.period - grid.period()).mag() > tol {
        return Err(Error::Domain(format!(
            "grid period {} differs from wave period {}",
            grid.period(),
            wave.period
        )));
    }
    Ok(())
}

/// `Σ_m w_m |z_m|²` with `w_m = 1 + κ_m²` and weight ½ on the Nyquist cosine.
fn h1_weighted_sum<T: Real>(amps: &[Complex<T>], kappa: &[T]) -> T {
    let n = amps.len();
    amps.iter().zip(kappa).enumerate().fold(T::zero(), |s, (i, (a, &k))| {
        let w = if i == n / 2 { T::lit(0.5) } else { T::one() + k * k };
        s + w * a.norm_sqr()
    })
}

/// `B(u) = G(u) − G(φ) + N (Q(u) − Q(φ))²` with `G` built from the wave's
/// speed and integration constant.
pub fn lyapunov<T: Real>(
    u: &PeriodicField<T>,
    wave: &WaveParams<T>,
    weight: T,
    q: ChargeCoefficients<T>,
) -> Result<T> {
    if !(weight > T::zero()) {
        return Err(Error::Domain(format!("Lyapunov weight N = {weight} must be positive")));
    }
    let phi = PeriodicField::from_wave(wave, *u.grid())?;
    let fu = u.functionals();
    let fp = phi.functionals();
    let c = wave.c;
    let a = wave.integration_constant;
    let dq = q.charge(&fu) - q.charge(&fp);
    Ok(fu.augmented(c, a) - fp.augmented(c, a) + weight * dq * dq)
}

/// `ρ(u, φ) = inf_y ‖u − φ(· + y)‖_{H¹}`.
///
/// A coarse scan over the `n` grid shifts (one FFT of the weighted
/// cross-spectrum) brackets the minimizer, then golden-section search refines
/// it to `|Δy| < 1e−10·L`.
pub fn semidistance<T: Real>(u: &PeriodicField<T>, wave: &WaveParams<T>) -> Result<Semidistance<T>> {
    let grid = *u.grid();
    let phi = PeriodicField::from_wave(wave, grid)?;
    let n = grid.len();
    let period = grid.period();
    let kappa = grid.wavenumbers();
    let t = Transform::new(n);
    let uh = t.analyze(u.values());
    let ph = t.analyze(phi.values());
    let nyq = n / 2;
    let weight = |i: usize| if i == nyq { T::lit(0.5) } else { T::one() + kappa[i] * kappa[i] };

    let objective = |y: T| -> T {
        let mut s = T::zero();
        for i in 0..n {
            let rot = if i == nyq {
                Complex::new((kappa[i] * y).cos(), T::zero())
            } else {
                Complex::new((kappa[i] * y).cos(), (kappa[i] * y).sin())
            };
            s += weight(i) * (uh[i] - ph[i] * rot).norm_sqr();
        }
        s * period
    };

    // Coarse scan: at grid shifts y_j = jL/n every phase factor is an n-th
    // root of unity, so the cross term is a single inverse DFT.
    let own: T = (0..n).fold(T::zero(), |s, i| s + weight(i) * (uh[i].norm_sqr() + ph[i].norm_sqr()));
    let cross_spec: Vec<Complex<T>> = (0..n).map(|i| uh[i].conj() * ph[i] * weight(i)).collect();
    let cross = t.synthesize(&cross_spec);
    let (mut best, mut best_val) = (0usize, T::lit(f64::INFINITY));
    for (j, &cr) in cross.iter().enumerate() {
        let val = own - T::lit(2.0) * cr;
        if val < best_val {
            best_val = val;
            best = j;
        }
    }

    let h = grid.spacing();
    let centre = grid.node(best);
    let (mut lo, mut hi) = (centre - h, centre + h);
    let ratio = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    let target = T::lit(1e-10) * period;
    let mut guard = 0;
    while hi - lo > target && guard < 200 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = objective(x2);
        }
        guard += 1;
    }
    let mut y = (lo + hi) * T::lit(0.5);
    let mut val = objective(y);
    // the bracket endpoints can beat the interior when the minimum sits on a
    // grid shift
    for cand in [centre, lo, hi] {
        let v = objective(cand);
        if v < val {
            val = v;
            y = cand;
        }
    }
    let mut shift = y % period;
    if shift < T::zero() {
        shift += period;
    }
    Ok(Semidistance { rho: val.max(T::zero()).sqrt(), shift })
}
