//! FFT plumbing shared by the field, operator and evolution modules.
//!
//! Amplitude convention: `analyze` returns `v̂_m` such that
//! `v_j = Σ_m v̂_m exp(iκ_m x_j)`, stored in FFT order
//! `m = 0, 1, …, n/2 − 1, −n/2, …, −1`. Index `n/2` is the Nyquist mode,
//! which on a real grid is the cosine `(−1)^j`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::num::Real;

#[derive(Clone)]
pub struct Transform<T: Real> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> Transform<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// Normalized Fourier amplitudes of real samples.
    pub fn analyze(&self, values: &[T]) -> Vec<Complex<T>> {
        debug_assert_eq!(values.len(), self.n);
        let scale = T::one() / T::from_usize_lossy(self.n);
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v * scale, T::zero())).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Real part of `Σ_m v̂_m exp(iκ_m x_j)`.
    pub fn synthesize(&self, amps: &[Complex<T>]) -> Vec<T> {
        debug_assert_eq!(amps.len(), self.n);
        let mut buf = amps.to_vec();
        self.inverse.process(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}

/// Signed integer frequency stored at FFT index `i`.
pub fn frequency(i: usize, n: usize) -> isize {
    if i < n / 2 {
        i as isize
    } else {
        i as isize - n as isize
    }
}

/// Angular wavenumbers `κ_m = 2πm/L` in FFT order (Nyquist carries `−πn/L`).
pub fn wavenumbers<T: Real>(n: usize, period: T) -> Vec<T> {
    let base = T::two_pi() / period;
    (0..n).map(|i| base * T::lit(frequency(i, n) as f64)).collect()
}

/// Multiplier for the `order`-th derivative at FFT index `i`. The Nyquist
/// mode is zeroed for odd orders and keeps `−(πn/L)²` style symbols for even
/// ones.
pub fn derivative_symbol<T: Real>(kappa: T, order: u32, nyquist: bool) -> Complex<T> {
    if nyquist && order % 2 == 1 {
        return Complex::new(T::zero(), T::zero());
    }
    let ik = Complex::new(T::zero(), kappa);
    let mut s = Complex::new(T::one(), T::zero());
    for _ in 0..order {
        s *= ik;
    }
    s
}

/// Zero-pads `n` amplitudes to a grid of `big` points, splitting the Nyquist
/// amplitude evenly between `±n/2` so the result stays real.
pub fn pad<T: Real>(amps: &[Complex<T>], big: usize) -> Vec<Complex<T>> {
    let n = amps.len();
    assert!(big >= n && n % 2 == 0);
    let mut out = vec![Complex::new(T::zero(), T::zero()); big];
    let h = n / 2;
    out[..h].copy_from_slice(&amps[..h]);
    for m in 1..h {
        out[big - m] = amps[n - m];
    }
    if big == n {
        out[h] = amps[h];
    } else {
        let half = amps[h] * T::lit(0.5);
        out[h] = half;
        out[big - h] = half;
    }
    out
}

/// Inverse of [`pad`]: keeps frequencies `|m| < n/2` and folds `±n/2` into the
/// coarse Nyquist amplitude.
pub fn truncate<T: Real>(amps: &[Complex<T>], n: usize) -> Vec<Complex<T>> {
    let big = amps.len();
    assert!(big >= n && n % 2 == 0);
    let h = n / 2;
    let mut out = vec![Complex::new(T::zero(), T::zero()); n];
    out[..h].copy_from_slice(&amps[..h]);
    for m in 1..h {
        out[n - m] = amps[big - m];
    }
    out[h] = if big == n { amps[h] } else { amps[h] + amps[big - h] };
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analyze_synthesize_roundtrip() {
        let t = Transform::<f64>::new(16);
        let v: Vec<f64> = (0..16).map(|j| (j as f64 * 0.7).sin() + 0.1 * j as f64).collect();
        let back = t.synthesize(&t.analyze(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn pad_then_truncate_is_identity() {
        let t = Transform::<f64>::new(8);
        let v: Vec<f64> = (0..8).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } + j as f64).collect();
        let a = t.analyze(&v);
        let back = truncate(&pad(&a, 24), 8);
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn padded_nyquist_is_cosine() {
        let t = Transform::<f64>::new(8);
        let v: Vec<f64> = (0..8).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let fine = Transform::<f64>::new(16).synthesize(&pad(&t.analyze(&v), 16));
        for (j, f) in fine.iter().enumerate() {
            let x = std::f64::consts::TAU * j as f64 / 16.0;
            assert!((f - (4.0 * x).cos()).abs() < 1e-14);
        }
    }
}
