//! Complete elliptic integrals and Jacobi elliptic functions.
//!
//! **Convention:** every function here takes the *modulus* `k`, never the
//! parameter `m = k²`. `K(k) = ∫₀^{π/2} dθ / √(1 − k² sin²θ)`.
//!
//! All routines are built on the arithmetic–geometric mean (AGM), which
//! converges quadratically.

use crate::error::{Error, Result};
use crate::num::Real;

const MAX_LEVELS: usize = 40;

/// Moduli above `1 − MODULUS_CEILING_GAP` are rejected by [`complete_k`] and
/// [`jacobi`]: `K` diverges logarithmically at `k = 1`.
pub const MODULUS_CEILING_GAP: f64 = 1e-12;

/// Elliptic modulus `k ∈ [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Modulus<T>(T);

impl<T: Real> Modulus<T> {
    /// Validates `0 ≤ k < 1 − 1e−12`.
    pub fn new(k: T) -> Result<Self> {
        check_open(k)?;
        Ok(Self(k))
    }

    pub fn value(self) -> T {
        self.0
    }

    /// Complementary modulus `k′ = √(1 − k²)`.
    pub fn complement(self) -> T {
        complementary(self.0)
    }
}

fn complementary<T: Real>(k: T) -> T {
    ((T::one() - k) * (T::one() + k)).sqrt()
}

fn check_open<T: Real>(k: T) -> Result<()> {
    if !k.finite() || k < T::zero() {
        return Err(Error::Domain(format!("modulus k = {k} must lie in [0, 1)")));
    }
    if k >= T::one() - T::lit(MODULUS_CEILING_GAP) {
        return Err(Error::Domain(format!(
            "modulus k = {k} too close to 1 (K(k) diverges logarithmically)"
        )));
    }
    Ok(())
}

/// AGM ladder starting from (1, k′, k). Returns the final `a_N` together with
/// `Σ 2^{n−1} c_n²`, from which both `K` and `E` follow.
fn agm_ladder<T: Real>(k: T) -> Result<(T, T)> {
    let mut a = T::one();
    let mut b = complementary(k);
    let mut c = k;
    let mut weight = T::lit(0.5);
    let mut sum = weight * c * c;
    let tol = T::machine_eps();
    for _ in 0..MAX_LEVELS {
        if c.mag() <= tol * a {
            return Ok((a, sum));
        }
        let a_next = (a + b) * T::lit(0.5);
        c = (a - b) * T::lit(0.5);
        b = (a * b).sqrt();
        a = a_next;
        weight *= T::lit(2.0);
        sum += weight * c * c;
    }
    Err(Error::Numerical(format!("AGM did not converge for k = {k}")))
}

/// Complete elliptic integral of the first kind `K(k)` for `0 ≤ k < 1`.
pub fn complete_k<T: Real>(k: T) -> Result<T> {
    check_open(k)?;
    let (a, _) = agm_ladder(k)?;
    Ok(T::FRAC_PI_2() / a)
}

/// Complete elliptic integral of the second kind `E(k)` for `0 ≤ k ≤ 1`.
pub fn complete_e<T: Real>(k: T) -> Result<T> {
    if !k.finite() || k < T::zero() || k > T::one() {
        return Err(Error::Domain(format!("modulus k = {k} must lie in [0, 1]")));
    }
    if k == T::one() {
        return Ok(T::one());
    }
    let (a, sum) = agm_ladder(k)?;
    let kk = T::FRAC_PI_2() / a;
    Ok(kk * (T::one() - sum))
}

/// Both complete integrals from a single AGM ladder.
pub fn complete_ke<T: Real>(k: T) -> Result<(T, T)> {
    check_open(k)?;
    let (a, sum) = agm_ladder(k)?;
    let kk = T::FRAC_PI_2() / a;
    Ok((kk, kk * (T::one() - sum)))
}

/// `dK/dk = (E − k′²K) / (k k′²)`, with the limit 0 at `k = 0`.
pub fn complete_k_derivative<T: Real>(k: T) -> Result<T> {
    let (kk, ee) = complete_ke(k)?;
    if k == T::zero() {
        return Ok(T::zero());
    }
    let kc2 = (T::one() - k) * (T::one() + k);
    Ok((ee - kc2 * kk) / (k * kc2))
}

/// Jacobi elliptic functions `(sn, cn, dn)` of argument `u` and modulus `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobi<T> {
    pub sn: T,
    pub cn: T,
    pub dn: T,
}

/// Evaluates `sn(u;k)`, `cn(u;k)`, `dn(u;k)` by the descending AGM scheme.
///
/// `dn` is recovered as `√(1 − k² sn²)`, which is positive for real `u` and
/// avoids the 0/0 form of the ratio formula near `u = K`.
pub fn jacobi<T: Real>(u: T, k: T) -> Result<Jacobi<T>> {
    check_open(k)?;
    if !u.finite() {
        return Err(Error::Domain(format!("argument u = {u} is not finite")));
    }
    let mut a = [T::zero(); MAX_LEVELS + 1];
    let mut c = [T::zero(); MAX_LEVELS + 1];
    a[0] = T::one();
    c[0] = k;
    let mut b = complementary(k);
    let tol = T::machine_eps();
    let mut levels = 0;
    while c[levels].mag() > tol {
        if levels == MAX_LEVELS {
            return Err(Error::Numerical(format!("Jacobi AGM did not converge for k = {k}")));
        }
        let (an, bn) = (a[levels], b);
        a[levels + 1] = (an + bn) * T::lit(0.5);
        c[levels + 1] = (an - bn) * T::lit(0.5);
        b = (an * bn).sqrt();
        levels += 1;
    }
    let mut phi = T::lit(2.0).powi(levels as i32) * a[levels] * u;
    for n in (1..=levels).rev() {
        phi = (phi + (c[n] / a[n] * phi.sin()).asin()) * T::lit(0.5);
    }
    let sn = phi.sin();
    let cn = phi.cos();
    let dn = (T::one() - k * k * sn * sn).max(T::zero()).sqrt();
    Ok(Jacobi { sn, cn, dn })
}
