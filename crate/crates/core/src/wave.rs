//! Explicit dnoidal/snoidal periodic traveling waves of the modified
//! Camassa–Holm equation and their dependence on the modulus `k`.
//!
//! For fixed period `L` and modulus `k` the profile is
//!
//! ```text
//! φ(x) = a + b (dn²(2K(k)x/L; k) − E(k)/K(k))
//! ```
//!
//! and it solves `(φ − c)φ″ + φ′²/2 − φ³ + cφ = A`.

use serde::Serialize;

use crate::elliptic::{complete_ke, jacobi};
use crate::error::{Error, Result};
use crate::num::Real;

/// The parameters `(k, L, a, b, c, A)` of one exact periodic wave.
///
/// Values are fixed at construction; build new ones with [`WaveParams::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveParams<T> {
    /// Elliptic modulus (not the parameter `k²`).
    pub k: T,
    /// Spatial period `L`.
    pub period: T,
    /// Mean level: `(1/L)∫φ = a`.
    pub a: T,
    /// Dnoidal amplitude, always negative.
    pub b: T,
    /// Wave speed.
    pub c: T,
    /// Integration constant `A` of the profile ODE.
    pub integration_constant: T,
    /// `K(k)`.
    pub kk: T,
    /// `E(k)`.
    pub ee: T,
}

/// Offset and amplitude of the equivalent snoidal form `φ = α + β sn²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnoidalParams<T> {
    pub alpha: T,
    pub beta: T,
}

/// Diagnostic margins for the existence conditions of a wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityReport<T> {
    pub discriminant: T,
    pub discriminant_ok: bool,
    /// `c² − 3c + 32π⁴/L⁴`; must be negative.
    pub ineq_i_value: T,
    /// `max_x (φ − c)` over the sample grid; must be negative.
    pub ineq_ii_margin: T,
    pub all_ok: bool,
}

/// Profile value and first two derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint<T> {
    pub phi: T,
    pub phi1: T,
    pub phi2: T,
}

/// `Δ(k, L) = 9L⁴ − 2048 K⁴ (1 − k² + k⁴)`.
pub fn discriminant<T: Real>(k: T, period: T, kk: T) -> T {
    let k2 = k * k;
    T::lit(9.0) * period.powi(4) - T::lit(2048.0) * kk.powi(4) * (T::one() - k2 + k2 * k2)
}

impl<T: Real> WaveParams<T> {
    /// Builds the wave for `0 < k < 1` and period `L`.
    pub fn new(k: T, period: T) -> Result<Self> {
        if !(k > T::zero() && k < T::one()) {
            return Err(Error::Domain(format!("modulus k = {k} must lie in (0, 1)")));
        }
        Self::build(k, period)
    }

    /// The `k → 0⁺` limit: a constant state `φ ≡ a` with `K = E = π/2`.
    pub fn constant_limit(period: T) -> Result<Self> {
        Self::build(T::zero(), period)
    }

    fn build(k: T, period: T) -> Result<Self> {
        if !(period > T::zero()) || !period.finite() {
            return Err(Error::Domain(format!("period L = {period} must be positive")));
        }
        let (kk, ee) = complete_ke(k)?;
        let disc = discriminant(k, period, kk);
        if !(disc > T::zero()) {
            return Err(Error::Domain(format!(
                "period too small for this modulus: discriminant 9L⁴ − 2048K⁴(1 − k² + k⁴) = {disc:e} ≤ 0 at k = {k}, L = {period}"
            )));
        }
        let k2 = k * k;
        let l2 = period * period;
        let q = T::one() - k2 + k2 * k2;
        // (3L²/2 − √Δ/2) rewritten without the cancellation between its terms.
        let lift = T::lit(512.0) * kk.powi(4) * q / (T::lit(1.5) * l2 + T::lit(0.5) * disc.sqrt());
        let c = lift / l2;
        let b = -T::lit(32.0) * kk * kk / l2;
        let a = -(-T::lit(32.0) * (T::lit(2.0) - k2) * kk * kk + T::lit(96.0) * ee * kk + lift)
            / (T::lit(3.0) * l2);
        let mut wave = Self { k, period, a, b, c, integration_constant: T::zero(), kk, ee };
        wave.integration_constant = wave.integration_constant_from_ode();
        Ok(wave)
    }

    /// `A` from the profile ODE evaluated at `x = 0`, where `φ′ = 0`.
    fn integration_constant_from_ode(&self) -> T {
        let p = self.profile(T::zero());
        (p.phi - self.c) * p.phi2 + p.phi1 * p.phi1 * T::lit(0.5) - p.phi.powi(3) + self.c * p.phi
    }

    /// The closed form of `A(k, L)` from the existence lemma, kept as an
    /// independent cross-check of [`WaveParams::integration_constant`].
    pub fn integration_constant_closed_form(&self) -> T {
        let (k, kk, l) = (self.k, self.kk, self.period);
        let k2 = k * k;
        let q = T::one() - k2 + k2 * k2;
        let k4 = kk.powi(4);
        let l4 = l.powi(4);
        let l6 = l.powi(6);
        let root = (T::lit(9.0) * l4 - T::lit(2048.0) * q * k4).sqrt();
        let sextic = (-T::lit(16384.0) - T::lit(16384.0) * k2.powi(3)
            + T::lit(24576.0) * k2
            + T::lit(24576.0) * k2 * k2)
            * kk.powi(6);
        ((T::lit(9.0) * l4 - T::lit(1280.0) * q * k4) * root
            + sextic
            + T::lit(6912.0) * l * l * q * k4
            - T::lit(27.0) * l6)
            / (T::lit(27.0) * l6)
    }

    /// Scale factor `2K/L` of the elliptic argument.
    pub fn argument_scale(&self) -> T {
        T::lit(2.0) * self.kk / self.period
    }

    pub fn profile(&self, x: T) -> ProfilePoint<T> {
        let w = self.argument_scale();
        let k2 = self.k * self.k;
        // k < 1 − 1e−12 was checked when the parameters were built
        let j = jacobi(w * x, self.k).expect("validated modulus");
        let (sn, cn, dn) = (j.sn, j.cn, j.dn);
        let phi = self.a + self.b * (dn * dn - self.ee / self.kk);
        let phi1 = -T::lit(2.0) * self.b * k2 * sn * cn * dn * w;
        let phi2 = -T::lit(2.0) * self.b * k2 * (cn * cn * dn * dn - sn * sn * dn * dn - k2 * sn * sn * cn * cn) * w * w;
        ProfilePoint { phi, phi1, phi2 }
    }

    /// Profile via the snoidal form `α + β sn²(2Kx/L)`.
    pub fn profile_snoidal(&self, x: T) -> T {
        let s = self.snoidal_form();
        let sn = jacobi(self.argument_scale() * x, self.k).expect("validated modulus").sn;
        s.alpha + s.beta * sn * sn
    }

    pub fn snoidal_form(&self) -> SnoidalParams<T> {
        SnoidalParams {
            alpha: self.a + self.b * (T::one() - self.ee / self.kk),
            beta: -self.b * self.k * self.k,
        }
    }

    /// Uniform sample nodes `x_j = jL/n`.
    pub fn nodes(&self, n: usize) -> impl Iterator<Item = T> + '_ {
        let h = self.period / T::from_usize_lossy(n);
        (0..n).map(move |j| h * T::from_usize_lossy(j))
    }

    /// `max_j |(φ − c)φ″ + φ′²/2 − φ³ + cφ − A|` on `n` uniform nodes.
    pub fn ode_residual(&self, n: usize) -> T {
        self.ode_residual_with_constant(n, self.integration_constant)
    }

    /// As [`WaveParams::ode_residual`] with an arbitrary integration constant.
    pub fn ode_residual_with_constant(&self, n: usize, constant: T) -> T {
        self.nodes(n)
            .map(|x| {
                let p = self.profile(x);
                ((p.phi - self.c) * p.phi2 + p.phi1 * p.phi1 * T::lit(0.5) - p.phi.powi(3) + self.c * p.phi
                    - constant)
                    .mag()
            })
            .fold(T::zero(), |m, r| m.max(r))
    }
}

/// Evaluates the existence conditions at `(k, L)` without failing.
pub fn validity<T: Real>(k: T, period: T, n: usize) -> ValidityReport<T> {
    let nan = T::lit(f64::NAN);
    let disc = complete_ke(k).map(|(kk, _)| discriminant(k, period, kk)).unwrap_or(nan);
    let wave = if k == T::zero() { WaveParams::constant_limit(period) } else { WaveParams::new(k, period) };
    match wave {
        Ok(w) => {
            let ineq_i = w.c * w.c - T::lit(3.0) * w.c + T::lit(32.0) * T::pi().powi(4) / period.powi(4);
            let margin = w
                .nodes(n.max(1))
                .map(|x| w.profile(x).phi - w.c)
                .fold(T::lit(f64::NEG_INFINITY), |m, v| m.max(v));
            ValidityReport {
                discriminant: disc,
                discriminant_ok: true,
                ineq_i_value: ineq_i,
                ineq_ii_margin: margin,
                all_ok: ineq_i < T::zero() && margin < T::zero(),
            }
        }
        Err(_) => ValidityReport {
            discriminant: disc,
            discriminant_ok: false,
            ineq_i_value: nan,
            ineq_ii_margin: nan,
            all_ok: false,
        },
    }
}

/// `d/dk` of `(a, b, c, A)` at fixed period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamDerivatives<T> {
    pub da_dk: T,
    pub db_dk: T,
    pub dc_dk: T,
    pub d_constant_dk: T,
}

/// Result of a Richardson-extrapolated central difference in `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct KDerivative<T, const N: usize> {
    /// Extrapolated derivative at step `h/2` (the reported value).
    pub value: [T; N],
    /// Extrapolated derivative at step `h`.
    pub coarse: [T; N],
    /// Per-component `|coarse − value|`.
    pub change: [T; N],
}

/// Relative change allowed between the `h` and `h/2` extrapolations.
pub const CONSISTENCY_TOLERANCE: f64 = 0.01;

/// Differentiates a vector-valued function of `k` at fixed period.
///
/// Central differences at `h` and `2h` are combined by one Richardson step
/// (`(4D(h) − D(2h))/3`), and the whole estimate is repeated with `h/2`. The
/// two results must agree to [`CONSISTENCY_TOLERANCE`] relative, up to a
/// round-off floor, or an accuracy error is returned. The stencil spans
/// `[k − 2h, k + 2h]`; `f` is expected to fail outside its domain.
pub fn k_derivative<T: Real, const N: usize, F>(k: T, h: T, f: F) -> Result<KDerivative<T, N>>
where
    F: Fn(T) -> Result<[T; N]>,
{
    if !(h > T::zero()) {
        return Err(Error::Domain(format!("finite-difference step h = {h} must be positive")));
    }
    if !(k - T::lit(2.0) * h > T::zero() && k + T::lit(2.0) * h < T::one()) {
        return Err(Error::Domain(format!("stencil [k − 2h, k + 2h] around k = {k} leaves (0, 1)")));
    }
    let offsets = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
    let mut samples = [[T::zero(); N]; 6];
    for (slot, &o) in samples.iter_mut().zip(&offsets) {
        *slot = f(k + T::lit(o) * h)?;
    }
    let [m2, m1, mh, ph, p1, p2] = samples;
    let mut value = [T::zero(); N];
    let mut coarse = [T::zero(); N];
    let mut change = [T::zero(); N];
    for i in 0..N {
        let d_2h = (p2[i] - m2[i]) / (T::lit(4.0) * h);
        let d_h = (p1[i] - m1[i]) / (T::lit(2.0) * h);
        let d_half = (ph[i] - mh[i]) / h;
        coarse[i] = (T::lit(4.0) * d_h - d_2h) / T::lit(3.0);
        value[i] = (T::lit(4.0) * d_half - d_h) / T::lit(3.0);
        change[i] = (coarse[i] - value[i]).mag();
        let scale = samples.iter().fold(T::zero(), |m, s| m.max(s[i].mag()));
        let floor = T::lit(1e3) * T::machine_eps() * scale / h;
        if change[i] > T::lit(CONSISTENCY_TOLERANCE) * value[i].mag() + floor {
            return Err(Error::Accuracy(format!(
                "k-derivative component {i} at k = {k} changed by {:e} (value {:e}) under h → h/2",
                change[i], value[i]
            )));
        }
    }
    Ok(KDerivative { value, coarse, change })
}

/// `d/dk (a, b, c, A)` at fixed period, see [`k_derivative`].
pub fn params_dk<T: Real>(k: T, period: T, h: T) -> Result<ParamDerivatives<T>> {
    let d = k_derivative(k, h, |kk| {
        let w = WaveParams::new(kk, period)?;
        Ok([w.a, w.b, w.c, w.integration_constant])
    })?;
    let [da_dk, db_dk, dc_dk, d_constant_dk] = d.value;
    Ok(ParamDerivatives { da_dk, db_dk, dc_dk, d_constant_dk })
}

/// Default finite-difference step: small relative to `k` so the stencil stays
/// inside `(0, 1)` for small moduli.
pub fn default_step<T: Real>(k: T) -> T {
    T::lit(1e-3).min(k / T::lit(10.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_limit_values() {
        let w = WaveParams::constant_limit(2.0 * PI).unwrap();
        assert!((w.a + 1.0).abs() < 1e-14);
        assert!((w.b + 2.0).abs() < 1e-14);
        assert!((w.c - 1.0).abs() < 1e-14);
        assert!(w.integration_constant.abs() < 1e-14);
        let p = w.profile(1.3);
        assert!((p.phi - w.a).abs() < 1e-14 && p.phi1 == 0.0);
        let s = w.snoidal_form();
        assert_eq!(s.beta, 0.0);
        assert!((s.alpha - w.a).abs() < 1e-14);
        assert!(w.ode_residual(64) < 1e-13);
        let v = validity(0.0, 2.0 * PI, 64);
        assert!(v.ineq_i_value.abs() < 1e-12);
    }

    #[test]
    fn literal_parameter_formulas_agree() {
        for &(k, l) in &[(0.5, 6.0 * PI), (0.1, 5.0 * PI), (0.3, 4.0 * PI)] {
            let w = WaveParams::new(k, l).unwrap();
            let (kk, ee) = complete_ke(k).unwrap();
            let s = (9.0 * l.powi(4) - 2048.0 * kk.powi(4) + 2048.0 * kk.powi(4) * k * k
                - 2048.0 * kk.powi(4) * k.powi(4))
            .sqrt();
            let a = -1.0 / (3.0 * l * l)
                * (-32.0 * (2.0 - k * k) * kk * kk + 96.0 * ee * kk + 1.5 * l * l - 0.5 * s);
            let c = (1.5 * l * l - 0.5 * s) / (l * l);
            assert!((w.a - a).abs() < 1e-11, "{} vs {}", w.a, a);
            assert!((w.c - c).abs() < 1e-11);
        }
    }

    #[test]
    fn b_at_reference_point() {
        let w = WaveParams::new(0.5, 6.0 * PI).unwrap();
        let kk = 1.685_750_354_812_596_f64;
        assert!((w.b + 32.0 * kk * kk / (36.0 * PI * PI)).abs() < 1e-14);
        assert!((w.b + 0.2559).abs() < 1e-4);
    }

    #[test]
    fn small_period_is_rejected() {
        let e = WaveParams::new(0.9, PI).unwrap_err();
        assert!(e.to_string().contains("period too small"));
        let v = validity(0.9, PI, 64);
        assert!(!v.discriminant_ok && !v.all_ok);
        assert!(matches!(WaveParams::new(0.0, 6.0), Err(Error::Domain(_))));
        assert!(matches!(WaveParams::new(0.5, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn residual_reacts_to_shifted_constant() {
        let w = WaveParams::new(0.5, 6.0 * PI).unwrap();
        assert!(w.ode_residual(512) < 1e-8);
        let r = w.ode_residual_with_constant(512, w.integration_constant + 1.0);
        assert!((r - 1.0).abs() < 1e-8);
    }

    #[test]
    fn minimum_at_origin() {
        let w = WaveParams::new(0.6, 5.0 * PI).unwrap();
        let p0 = w.profile(0.0).phi;
        assert!((p0 - (w.a + w.b * (1.0 - w.ee / w.kk))).abs() < 1e-15);
        assert!(w.nodes(200).all(|x| w.profile(x).phi >= p0 - 1e-15));
    }

    #[test]
    fn analytic_db_dk() {
        let (k, l) = (0.5, 6.0 * PI);
        let d = params_dk(k, l, 1e-3).unwrap();
        let kk = complete_ke(k).unwrap().0;
        let dk = crate::elliptic::complete_k_derivative(k).unwrap();
        let exact = -64.0 * kk * dk / (l * l);
        assert!((d.db_dk - exact).abs() < 1e-9 * exact.abs(), "{} vs {}", d.db_dk, exact);
    }

    #[test]
    fn dc_dk_vanishes_at_small_modulus() {
        let l = 6.0 * PI;
        let d1 = params_dk(0.02, l, 1e-3).unwrap().dc_dk.abs();
        let d2 = params_dk(0.2, l, 1e-3).unwrap().dc_dk.abs();
        assert!(d1 < 1e-3 * d2, "{d1} vs {d2}");
    }

    #[test]
    fn stencil_outside_domain() {
        assert!(matches!(params_dk(0.001, 6.0 * PI, 1e-3), Err(Error::Domain(_))));
        // k + 2h crosses into Δ ≤ 0 for this short period
        let l = 2.0 * PI;
        let mut k = 0.05;
        while WaveParams::new(k + 0.01, l).is_ok() {
            k += 0.01;
        }
        assert!(params_dk(k, l, 5e-3).is_err());
    }
}
