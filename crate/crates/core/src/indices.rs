//! Stability indices along the wave family.
//!
//! * `I = (dA/dk)(dV/dk) − (dc/dk)(dF/dk)` at fixed period, and its grid scan;
//! * the Morse counts of 𝓛 on the full space and on the zero-mean subspace
//!   `Y₀`, linked through the sign of `⟨𝓛⁻¹1, 1⟩`;
//! * the zero-mean branch `a(k, L*(k)) = 0`, `d″(c)` along it and the
//!   Hamiltonian Krein index `K_Ham = n(𝓛|_{Y₀}) − n(D)` with `D = −d″(c)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{sample, PeriodicField, PeriodicGrid};
use crate::linop::{self, OperatorMatrix, PairingOptions, SpectralReport, Tolerance};
use crate::num::Real;
use crate::wave::{self, validity, WaveParams};

/// Grid used to sample `φ` when a quadrature of the profile is needed.
pub const DEFAULT_SAMPLES: usize = 256;
/// `|⟨w,1⟩| ≤ PAIRING_ZERO·‖w‖‖1‖` counts as a vanishing pairing.
pub const PAIRING_ZERO: f64 = 1e-8;
/// `|D|` below this is treated as zero.
pub const D_ZERO: f64 = 1e-10;
/// Smallest `|dc/dk|` accepted when reparametrizing by the speed.
pub const SPEED_SLOPE_FLOOR: f64 = 1e-10;
/// Tolerance on `|a(k, L*)|` for the zero-mean root.
pub const ZERO_MEAN_TOL: f64 = 1e-10;

/// `(dA/dk, dc/dk, dV/dk, dF/dk)` at fixed period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexComponents<T> {
    pub d_constant_dk: T,
    pub dc_dk: T,
    pub dv_dk: T,
    pub df_dk: T,
}

impl<T: Real> IndexComponents<T> {
    pub fn index(&self) -> T {
        self.d_constant_dk * self.dv_dk - self.dc_dk * self.df_dk
    }
}

/// One evaluation of `I`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexSample<T> {
    pub k: T,
    #[serde(rename = "L")]
    pub period: T,
    /// NaN on invalid cells.
    pub index: T,
    pub valid: bool,
    pub components: Option<IndexComponents<T>>,
    /// `I` with `dV/dk` differentiated from the quadrature of `φ` instead of
    /// `L·da/dk`.
    pub index_quadrature: T,
    /// `|I(h) − I(h/2)| / |I|`.
    pub consistency: T,
    /// Why the cell is invalid, if it is.
    pub note: Option<String>,
    /// The cell is a valid wave but its derivatives failed the step-halving
    /// gate.
    pub fd_failure: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexOptions<T> {
    /// Finite-difference step; `None` uses [`wave::default_step`].
    pub step: Option<T>,
    /// Samples for `F(φ)` and the validity margin.
    pub samples: usize,
}

impl<T: Real> Default for IndexOptions<T> {
    fn default() -> Self {
        Self { step: None, samples: DEFAULT_SAMPLES }
    }
}

fn sampled_profile<T: Real>(w: &WaveParams<T>, n: usize) -> Result<PeriodicField<T>> {
    PeriodicField::from_wave(w, PeriodicGrid::new(w.period, n)?)
}

fn check_valid<T: Real>(k: T, period: T, n: usize) -> Result<()> {
    let v = validity(k, period, n);
    if v.all_ok {
        return Ok(());
    }
    Err(Error::Domain(format!(
        "(k, L) = ({k}, {period}) is not a valid wave: discriminant {:e}, inequality (i) {:e}, max(φ − c) {:e}",
        v.discriminant, v.ineq_i_value, v.ineq_ii_margin
    )))
}

/// Evaluates `I` at `(k, L)`.
///
/// Every stencil point must be a valid wave; otherwise a domain error is
/// returned.
pub fn stability_index<T: Real>(k: T, period: T, opts: IndexOptions<T>) -> Result<IndexSample<T>> {
    let h = opts.step.unwrap_or_else(|| wave::default_step(k));
    let n = opts.samples;
    check_valid(k, period, n)?;
    let d = wave::k_derivative(k, h, |kk| {
        check_valid(kk, period, n)?;
        let w = WaveParams::new(kk, period)?;
        let f = sampled_profile(&w, n)?.functionals();
        Ok([w.a, w.c, w.integration_constant, f.momentum, f.mass])
    })?;
    let component = |v: &[T; 5]| IndexComponents {
        d_constant_dk: v[2],
        dc_dk: v[1],
        dv_dk: period * v[0],
        df_dk: v[3],
    };
    let fine = component(&d.value);
    let coarse = component(&d.coarse);
    let index = fine.index();
    let index_quadrature = fine.d_constant_dk * d.value[4] - fine.dc_dk * fine.df_dk;
    let consistency = (coarse.index() - index).mag() / index.mag();
    Ok(IndexSample {
        k,
        period,
        index,
        valid: true,
        components: Some(fine),
        index_quadrature,
        consistency,
        note: None,
        fd_failure: false,
    })
}

fn invalid_cell<T: Real>(k: T, period: T, err: Error) -> IndexSample<T> {
    let nan = T::lit(f64::NAN);
    IndexSample {
        k,
        period,
        index: nan,
        valid: false,
        components: None,
        index_quadrature: nan,
        consistency: nan,
        fd_failure: matches!(err, Error::Accuracy(_)),
        note: Some(err.to_string()),
    }
}

/// Aggregate of a scan over its valid cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary<T> {
    pub min_index: T,
    pub max_index: T,
    pub count_positive: usize,
    pub count_invalid: usize,
    pub count_valid: usize,
    /// Invalid cells caused by the step-halving gate rather than the wave.
    pub count_fd_failures: usize,
    pub max_consistency: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexScan<T> {
    /// Row-major in `k`, then `L`.
    pub cells: Vec<IndexSample<T>>,
    pub summary: ScanSummary<T>,
}

/// Axis of a scan: `k_i = k_min + (i + 1)(k_max − k_min)/n_k` (left-open,
/// so `(0.01, 0.2]` never touches its left end) and `L_j` evenly spaced on
/// the closed interval.
pub fn scan_axes<T: Real>(k_range: (T, T), l_range: (T, T), nk: usize, nl: usize) -> (Vec<T>, Vec<T>) {
    let dk = (k_range.1 - k_range.0) / T::from_usize_lossy(nk);
    let ks = (0..nk).map(|i| k_range.0 + T::from_usize_lossy(i + 1) * dk).collect();
    let ls = if nl == 1 {
        vec![l_range.0]
    } else {
        let dl = (l_range.1 - l_range.0) / T::from_usize_lossy(nl - 1);
        (0..nl).map(|j| l_range.0 + T::from_usize_lossy(j) * dl).collect()
    };
    (ks, ls)
}

/// Evaluates [`stability_index`] on an `nk × nL` grid in parallel.
///
/// Cells that are invalid or whose derivatives fail the step-halving gate
/// are marked invalid with a note; the scan itself only fails on malformed
/// ranges.
pub fn index_scan<T: Real>(
    k_range: (T, T),
    l_range: (T, T),
    nk: usize,
    nl: usize,
    opts: IndexOptions<T>,
) -> Result<IndexScan<T>> {
    let (k0, k1) = k_range;
    let (l0, l1) = l_range;
    if !(k0 >= T::zero() && k1 > k0 && k1 < T::one()) {
        return Err(Error::Domain(format!("k range ({k0}, {k1}] must lie in (0, 1)")));
    }
    if !(l0 > T::zero() && l1 >= l0 && l1.finite()) {
        return Err(Error::Domain(format!("L range [{l0}, {l1}] must be positive and ordered")));
    }
    if nk == 0 || nl == 0 {
        return Err(Error::Domain("scan resolution must be at least 1×1".into()));
    }
    let (ks, ls) = scan_axes(k_range, l_range, nk, nl);
    let points: Vec<(T, T)> = ks.iter().flat_map(|&k| ls.iter().map(move |&l| (k, l))).collect();
    let cells: Vec<IndexSample<T>> = points
        .par_iter()
        .map(|&(k, l)| stability_index(k, l, opts).unwrap_or_else(|e| invalid_cell(k, l, e)))
        .collect();
    let summary = summarize(&cells);
    Ok(IndexScan { cells, summary })
}

fn summarize<T: Real>(cells: &[IndexSample<T>]) -> ScanSummary<T> {
    let valid: Vec<&IndexSample<T>> = cells.iter().filter(|c| c.valid).collect();
    let (mut lo, mut hi, mut worst) = (T::lit(f64::INFINITY), T::lit(f64::NEG_INFINITY), T::zero());
    for c in &valid {
        lo = lo.min(c.index);
        hi = hi.max(c.index);
        worst = worst.max(c.consistency);
    }
    if valid.is_empty() {
        lo = T::lit(f64::NAN);
        hi = T::lit(f64::NAN);
    }
    ScanSummary {
        min_index: lo,
        max_index: hi,
        count_positive: valid.iter().filter(|c| c.index > T::zero()).count(),
        count_invalid: cells.len() - valid.len(),
        count_valid: valid.len(),
        count_fd_failures: cells.iter().filter(|c| c.fd_failure).count(),
        max_consistency: worst,
    }
}

/// `φ`, `φ″` and `φ′` of a wave sampled on `n` nodes.
pub struct SampledWave<T> {
    pub phi: PeriodicField<T>,
    pub phi1: PeriodicField<T>,
    pub phi2: PeriodicField<T>,
}

pub fn sample_wave<T: Real>(w: &WaveParams<T>, n: usize) -> Result<SampledWave<T>> {
    let grid = PeriodicGrid::new(w.period, n)?;
    Ok(SampledWave {
        phi: PeriodicField::from_wave(w, grid)?,
        phi1: sample(|x| w.profile(x).phi1, grid)?,
        phi2: sample(|x| w.profile(x).phi2, grid)?,
    })
}

/// Assembles 𝓛 for the wave on `n` nodes.
pub fn wave_operator<T: Real>(w: &WaveParams<T>, n: usize) -> Result<OperatorMatrix<T>> {
    let s = sample_wave(w, n)?;
    linop::assemble_l(&s.phi, &s.phi2, w.c)
}

/// `|cos ∠(v, φ′)|` for the kernel vector of a self-adjoint report.
pub fn kernel_alignment<T: Real>(report: &SpectralReport<T>, phi1: &PeriodicField<T>) -> Result<T> {
    let [mode] = report.kernel_modes.as_slice() else {
        return Err(Error::Rank(format!("expected a simple kernel, found dimension {}", report.kernel_modes.len())));
    };
    let v = PeriodicField::from_values(*phi1.grid(), mode.vector.clone())?;
    Ok(v.inner(phi1)?.mag() / (v.l2_norm() * phi1.l2_norm()))
}

/// Sign class of the pairing `⟨𝓛⁻¹1, 1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingSign {
    Negative,
    Zero,
    Positive,
}

impl PairingSign {
    /// `n(⟨𝓛⁻¹1,1⟩)`.
    pub fn n(self) -> usize {
        usize::from(self == PairingSign::Negative)
    }

    /// `z(⟨𝓛⁻¹1,1⟩)`.
    pub fn z(self) -> usize {
        usize::from(self == PairingSign::Zero)
    }
}

/// Classifies the pairing against the relative threshold [`PAIRING_ZERO`].
pub fn pairing_sign<T: Real>(p: &linop::Pairing<T>, grid: &PeriodicGrid<T>) -> PairingSign {
    let w = (p.solution.iter().fold(T::zero(), |s, &x| s + x * x) * grid.spacing()).sqrt();
    let threshold = T::lit(PAIRING_ZERO) * w * grid.period().sqrt();
    if p.value.mag() <= threshold {
        PairingSign::Zero
    } else if p.value < T::zero() {
        PairingSign::Negative
    } else {
        PairingSign::Positive
    }
}

/// Both sides of the counting identities
/// `n(𝓛|_{Y₀}) = n(𝓛) − n(p) − z(p)` and `z(𝓛|_{Y₀}) = z(𝓛) + z(p)` with
/// `p = ⟨𝓛⁻¹1, 1⟩`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorseReport<T> {
    pub n_l: usize,
    pub z_l: usize,
    pub n_l_y0: usize,
    pub z_l_y0: usize,
    pub pairing: T,
    pub pairing_sign: PairingSign,
    pub predicted_n_l_y0: i64,
    pub predicted_z_l_y0: usize,
    pub negative_identity_holds: bool,
    pub kernel_identity_holds: bool,
    pub tol: T,
}

impl<T: Real> MorseReport<T> {
    pub fn holds(&self) -> bool {
        self.negative_identity_holds && self.kernel_identity_holds
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseOptions<T> {
    pub tol: Tolerance<T>,
    /// Deflate a multi-dimensional kernel (the constant state) instead of
    /// requiring `z(𝓛) = 1`.
    pub allow_degenerate_kernel: bool,
}

impl<T: Real> Default for MorseOptions<T> {
    fn default() -> Self {
        Self { tol: Tolerance::default(), allow_degenerate_kernel: false }
    }
}

/// Evaluates the counting identities for an assembled 𝓛. The left sides
/// come from the restricted spectrum; the right sides from the full spectrum
/// and the deflated pairing.
pub fn morse_from_operator<T: Real>(l: &OperatorMatrix<T>, opts: MorseOptions<T>) -> Result<MorseReport<T>> {
    let full = linop::spectrum(l, opts.tol)?;
    if full.z_dim != 1 && !opts.allow_degenerate_kernel {
        return Err(Error::Precondition(format!("the identity assumes z(𝓛) = 1, found {}", full.z_dim)));
    }
    let restricted = linop::restricted_spectrum(l, opts.tol)?;
    let pairing = linop::inv_one_pairing(
        l,
        PairingOptions { tol: opts.tol, allow_degenerate_kernel: opts.allow_degenerate_kernel },
    )?;
    let sign = pairing_sign(&pairing, l.grid());
    let predicted_n = full.n_neg as i64 - sign.n() as i64 - sign.z() as i64;
    let predicted_z = full.z_dim + sign.z();
    Ok(MorseReport {
        n_l: full.n_neg,
        z_l: full.z_dim,
        n_l_y0: restricted.n_neg,
        z_l_y0: restricted.z_dim,
        pairing: pairing.value,
        pairing_sign: sign,
        predicted_n_l_y0: predicted_n,
        predicted_z_l_y0: predicted_z,
        negative_identity_holds: predicted_n == restricted.n_neg as i64,
        kernel_identity_holds: predicted_z == restricted.z_dim,
        tol: full.tol,
    })
}

/// The counting identities for the wave at `(k, L)` on `n` nodes.
pub fn morse_check<T: Real>(k: T, period: T, n: usize, tol: Tolerance<T>) -> Result<MorseReport<T>> {
    check_valid(k, period, n)?;
    let w = WaveParams::new(k, period)?;
    let l = wave_operator(&w, n)?;
    morse_from_operator(&l, MorseOptions { tol, allow_degenerate_kernel: false })
}

/// Root `L*` of `L ↦ a(k, L)` in `bracket`, or `None` if `a` keeps its sign.
///
/// The bracket must lie where the wave formulas exist (positive
/// discriminant). If the endpoints share a sign, the bracket is sampled at
/// 64 interior points and the first sign change is refined.
pub fn zero_mean_period<T: Real>(k: T, bracket: (T, T)) -> Result<Option<T>> {
    let (lo, hi) = bracket;
    if !(lo > T::zero() && hi > lo && hi.finite()) {
        return Err(Error::Domain(format!("period bracket [{lo}, {hi}] must be positive and ordered")));
    }
    let mean = |l: T| -> Result<T> {
        WaveParams::new(k, l)
            .map(|w| w.a)
            .map_err(|e| Error::Domain(format!("bracket [{lo}, {hi}] leaves the existence domain: {e}")))
    };
    let probes = 64;
    let mut left = lo;
    let mut f_left = mean(lo)?;
    mean(hi)?;
    for i in 1..=probes {
        let right = lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(probes);
        let f_right = mean(right)?;
        if f_left == T::zero() {
            return Ok(Some(left));
        }
        if f_left * f_right <= T::zero() {
            return bisect(mean, left, right, f_left).map(Some);
        }
        left = right;
        f_left = f_right;
    }
    Ok(None)
}

fn bisect<T: Real>(f: impl Fn(T) -> Result<T>, mut lo: T, mut hi: T, mut f_lo: T) -> Result<T> {
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        let f_mid = f(mid)?;
        if f_mid.mag() < T::lit(ZERO_MEAN_TOL) && (hi - lo) < T::lit(1e-12) * hi {
            return Ok(mid);
        }
        if f_mid == T::zero() {
            return Ok(mid);
        }
        if (f_lo < T::zero()) == (f_mid < T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::machine_eps() * hi {
            break;
        }
    }
    let mid = (lo + hi) * T::lit(0.5);
    let f_mid = f(mid)?;
    if f_mid.mag() < T::lit(ZERO_MEAN_TOL) {
        Ok(mid)
    } else {
        Err(Error::Numerical(format!("bisection stalled with |a| = {:e}", f_mid.mag())))
    }
}

/// `d′(c)` and `d″(c)` along the zero-mean branch, each by two routes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DSecond<T> {
    pub k: T,
    /// `L*(k)`.
    pub period: T,
    pub c: T,
    pub dc_dk: T,
    /// `F(φ)`, the value `d′(c)` takes by the critical-point argument.
    pub d_prime_chain: T,
    /// `(dd/dk)/(dc/dk)` by differencing `d = E + cF`.
    pub d_prime_fd: T,
    /// `(dF/dk)/(dc/dk)`.
    pub d_second_chain: T,
    /// `d/dk` of `d_prime_fd`, divided by `dc/dk`.
    pub d_second_fd: T,
    /// `|chain − fd| / |chain|` for `d′`.
    pub prime_discrepancy: T,
    /// `|chain − fd| / |chain|` for `d″`.
    pub second_discrepancy: T,
}

struct BranchPoint<T> {
    c: T,
    momentum: T,
    d: T,
}

fn branch_point<T: Real>(k: T, bracket: (T, T), n: usize) -> Result<BranchPoint<T>> {
    let l = zero_mean_period(k, bracket)?
        .ok_or_else(|| Error::Unavailable(format!("no zero-mean period in [{}, {}] at k = {k}", bracket.0, bracket.1)))?;
    let w = WaveParams::new(k, l)?;
    let f = sampled_profile(&w, n)?.functionals();
    Ok(BranchPoint { c: w.c, momentum: f.momentum, d: f.energy + w.c * f.momentum })
}

/// Computes `d″(c)` on the zero-mean branch through `k`.
pub fn d_second<T: Real>(k: T, bracket: (T, T), n: usize, step: Option<T>) -> Result<DSecond<T>> {
    let period = zero_mean_period(k, bracket)?
        .ok_or_else(|| Error::Unavailable(format!("no zero-mean period in [{}, {}] at k = {k}", bracket.0, bracket.1)))?;
    let h = step.unwrap_or_else(|| wave::default_step(k));
    let centre = branch_point(k, bracket, n)?;
    let first = wave::k_derivative(k, h, |kk| {
        let p = branch_point(kk, bracket, n)?;
        Ok([p.c, p.momentum, p.d])
    })?;
    let [dc_dk, df_dk, dd_dk] = first.value;
    if dc_dk.mag() < T::lit(SPEED_SLOPE_FLOOR) {
        return Err(Error::SingularParametrization(format!("dc/dk = {dc_dk:e} along the branch at k = {k}")));
    }
    let d_prime_fd = dd_dk / dc_dk;
    let second = wave::k_derivative(k, h, |kk| {
        let inner = wave::k_derivative(kk, h, |kkk| {
            let p = branch_point(kkk, bracket, n)?;
            Ok([p.c, p.d])
        })?;
        Ok([inner.value[1] / inner.value[0]])
    })?;
    let d_second_chain = df_dk / dc_dk;
    let d_second_fd = second.value[0] / dc_dk;
    Ok(DSecond {
        k,
        period,
        c: centre.c,
        dc_dk,
        d_prime_chain: centre.momentum,
        d_prime_fd,
        d_second_chain,
        d_second_fd,
        prime_discrepancy: (centre.momentum - d_prime_fd).mag() / centre.momentum.mag(),
        second_discrepancy: (d_second_chain - d_second_fd).mag() / d_second_chain.mag(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Stable,
    Unstable,
    Indeterminate,
}

/// Inputs of the Krein count, see [`classify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KreinInputs<T> {
    pub n_l: usize,
    pub z_l: usize,
    /// `n(𝓛|_{Y₀})` from the restricted spectrum.
    pub n_l_y0: usize,
    pub pairing_sign: PairingSign,
    /// `D = −d″(c)`.
    pub d: T,
}

/// `K_Ham = n(𝓛|_{Y₀}) − n(D)` and its reading. Returns the index (when it
/// can be formed) with the classification and, for indeterminate cases, the
/// reason.
pub fn classify<T: Real>(x: &KreinInputs<T>) -> (Option<i64>, Classification, Option<String>) {
    let n_d = i64::from(x.d < T::zero());
    let k_ham = x.n_l_y0 as i64 - n_d;
    let indeterminate = |why: String| (Some(k_ham), Classification::Indeterminate, Some(why));
    if !x.d.finite() || x.d.mag() < T::lit(D_ZERO) {
        return (None, Classification::Indeterminate, Some(format!("D = {} is numerically zero", x.d)));
    }
    if x.pairing_sign == PairingSign::Zero {
        return indeterminate("⟨𝓛⁻¹1, 1⟩ vanishes".into());
    }
    if x.z_l != 1 {
        return indeterminate(format!("z(𝓛) = {} ≠ 1", x.z_l));
    }
    if x.n_l != 1 {
        return indeterminate(format!("n(𝓛) = {} ≠ 1", x.n_l));
    }
    match k_ham {
        0 => (Some(0), Classification::Stable, None),
        1 => (Some(1), Classification::Unstable, None),
        _ => indeterminate(format!("K_Ham = {k_ham} outside {{0, 1}}")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KreinReport<T> {
    pub k: T,
    /// `L*(k)`, absent when the branch does not cross the bracket.
    #[serde(rename = "L")]
    pub period: Option<T>,
    pub valid: bool,
    pub n_l: Option<usize>,
    pub z_l: Option<usize>,
    pub n_l_y0: Option<usize>,
    pub z_l_y0: Option<usize>,
    /// `n(𝓛) − n(p) − z(p)`.
    pub n_l_y0_predicted: Option<i64>,
    pub pairing: Option<T>,
    #[serde(rename = "D")]
    pub d: Option<T>,
    pub d_second: Option<DSecond<T>>,
    pub k_ham: Option<i64>,
    pub classification: Classification,
    pub reason: Option<String>,
}

impl<T: Real> KreinReport<T> {
    fn indeterminate(k: T, period: Option<T>, reason: String) -> Self {
        Self {
            k,
            period,
            valid: false,
            n_l: None,
            z_l: None,
            n_l_y0: None,
            z_l_y0: None,
            n_l_y0_predicted: None,
            pairing: None,
            d: None,
            d_second: None,
            k_ham: None,
            classification: Classification::Indeterminate,
            reason: Some(reason),
        }
    }
}

/// Krein count on the zero-mean branch through `k`.
///
/// A missing branch or a singular speed parametrization yields an
/// indeterminate report rather than an error. Waves on the branch that fail
/// the validity inequalities are reported with their counts but classified
/// indeterminate: 𝓛 is then not elliptic.
pub fn krein_index<T: Real>(k: T, bracket: (T, T), n: usize, tol: Tolerance<T>) -> Result<KreinReport<T>> {
    let Some(period) = zero_mean_period(k, bracket)? else {
        return Ok(KreinReport::indeterminate(k, None, "zero-mean branch absent from the bracket".into()));
    };
    let ds = match d_second(k, bracket, n, None) {
        Ok(ds) => ds,
        Err(e @ (Error::Unavailable(_) | Error::SingularParametrization(_))) => {
            return Ok(KreinReport::indeterminate(k, Some(period), e.to_string()));
        }
        Err(e) => return Err(e),
    };
    let w = WaveParams::new(k, period)?;
    let valid = validity(k, period, n).all_ok;
    let l = wave_operator(&w, n)?;
    let full = linop::spectrum(&l, tol)?;
    let restricted = linop::restricted_spectrum(&l, tol)?;
    let pairing = linop::inv_one_pairing(&l, PairingOptions { tol, allow_degenerate_kernel: true })?;
    let sign = pairing_sign(&pairing, l.grid());
    let d = -ds.d_second_chain;
    let (k_ham, mut classification, mut reason) = classify(&KreinInputs {
        n_l: full.n_neg,
        z_l: full.z_dim,
        n_l_y0: restricted.n_neg,
        pairing_sign: sign,
        d,
    });
    if !valid && classification != Classification::Indeterminate {
        classification = Classification::Indeterminate;
        reason = Some("wave on the branch violates the validity inequalities".into());
    }
    Ok(KreinReport {
        k,
        period: Some(period),
        valid,
        n_l: Some(full.n_neg),
        z_l: Some(full.z_dim),
        n_l_y0: Some(restricted.n_neg),
        z_l_y0: Some(restricted.z_dim),
        n_l_y0_predicted: Some(full.n_neg as i64 - sign.n() as i64 - sign.z() as i64),
        pairing: Some(pairing.value),
        d: Some(d),
        d_second: Some(ds),
        k_ham,
        classification,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn index_negative_at_reference_points() {
        for &(k, l) in &[(0.1, 5.0 * PI), (0.5, 8.0 * PI)] {
            let s = stability_index(k, l, IndexOptions::default()).unwrap();
            assert!(s.valid && s.index < 0.0, "I({k}, {l}) = {}", s.index);
            assert!(s.consistency < 0.01);
            let c = s.components.unwrap();
            assert_eq!(s.index, c.d_constant_dk * c.dv_dk - c.dc_dk * c.df_dk);
        }
    }

    #[test]
    fn expanded_form_agrees() {
        let s = stability_index(0.3, 5.0 * PI, IndexOptions::default()).unwrap();
        let c = s.components.unwrap();
        let scale = (c.d_constant_dk * c.dv_dk).abs().max((c.dc_dk * c.df_dk).abs());
        assert!((s.index - s.index_quadrature).abs() <= 1e-10 * scale.max(1.0));
    }

    #[test]
    fn single_cell_scan_matches_point() {
        let scan = index_scan((0.4, 0.5), (6.0 * PI, 6.0 * PI), 1, 1, IndexOptions::default()).unwrap();
        let s = stability_index(0.5, 6.0 * PI, IndexOptions::default()).unwrap();
        assert_eq!(scan.cells.len(), 1);
        assert_eq!(scan.cells[0], s);
        assert_eq!(scan.summary.count_valid, 1);
    }

    #[test]
    fn invalid_point_is_a_domain_error() {
        assert!(matches!(stability_index(0.8, 10.0 * PI, IndexOptions::default()), Err(Error::Domain(_))));
        let scan = index_scan((0.7, 0.8), (10.0 * PI, 10.0 * PI), 1, 1, IndexOptions::default()).unwrap();
        assert!(!scan.cells[0].valid && scan.cells[0].index.is_nan());
        assert_eq!(scan.summary.count_invalid, 1);
    }

    #[test]
    fn no_zero_mean_branch_at_small_modulus() {
        assert_eq!(zero_mean_period(0.1, (3.0 * PI, 20.0 * PI)).unwrap(), None);
        assert!(matches!(zero_mean_period(0.5, (0.5, 20.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_mean_root_near_unit_modulus() {
        let l = zero_mean_period(0.99, (15.0, 40.0)).unwrap().expect("branch");
        assert!(WaveParams::<f64>::new(0.99, l).unwrap().a.abs() < ZERO_MEAN_TOL);
        let phi = sampled_profile(&WaveParams::<f64>::new(0.99, l).unwrap(), 512).unwrap();
        assert!(phi.mean().abs() < 1e-9);
    }

    #[test]
    fn classification_table() {
        let base = KreinInputs { n_l: 1, z_l: 1, n_l_y0: 1, pairing_sign: PairingSign::Positive, d: -1.0 };
        assert_eq!(classify(&base).1, Classification::Stable);
        let unstable = KreinInputs { d: 1.0, ..base };
        assert_eq!(classify(&unstable), (Some(1), Classification::Unstable, None));
        let cautionary = KreinInputs { n_l_y0: 0, pairing_sign: PairingSign::Negative, d: 1.0, ..base };
        assert_eq!(classify(&cautionary).1, Classification::Stable);
        assert_eq!(classify(&KreinInputs { d: 0.0, ..base }).1, Classification::Indeterminate);
        assert_eq!(classify(&KreinInputs { pairing_sign: PairingSign::Zero, ..base }).1, Classification::Indeterminate);
        assert_eq!(classify(&KreinInputs { n_l_y0: 3, ..base }).1, Classification::Indeterminate);
    }

    #[test]
    fn krein_without_branch_is_indeterminate() {
        let r = krein_index(0.1, (3.0 * PI, 20.0 * PI), 64, Tolerance::default()).unwrap();
        assert_eq!(r.classification, Classification::Indeterminate);
        assert!(r.period.is_none() && r.k_ham.is_none());
        assert!(matches!(d_second(0.1, (3.0 * PI, 20.0 * PI), 64, None), Err(Error::Unavailable(_))));
    }
}
