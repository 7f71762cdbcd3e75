//! Independent reference values computed by direct quadrature.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) + adapt(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `eps`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    let f = &f as &dyn Fn(f64) -> f64;
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(a, b, fa, fm, fb);
    adapt(f, a, b, fa, fm, fb, whole, eps, 50)
}

/// Incomplete integral of the first kind `F(θ; k)`.
pub fn incomplete_k(theta: f64, k: f64) -> f64 {
    integrate(|t| 1.0 / (1.0 - k * k * t.sin().powi(2)).sqrt(), 0.0, theta, 1e-14)
}

pub fn complete_k(k: f64) -> f64 {
    incomplete_k(FRAC_PI_2, k)
}

pub fn complete_e(k: f64) -> f64 {
    integrate(|t| (1.0 - k * k * t.sin().powi(2)).sqrt(), 0.0, FRAC_PI_2, 1e-14)
}

/// `max_j |f_j|` of a sampled function.
pub fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}
