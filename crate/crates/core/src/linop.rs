//! Dense discretizations of the linearized operator
//!
//! ```text
//! 𝓛 = (φ − c)∂ₓ² + φ′∂ₓ + c − 3φ² + φ″
//! ```
//!
//! and of the Hamiltonian evolution operator `∂ₓ𝓛`.
//!
//! The matrix acts on nodal values. It is the Fourier–Galerkin projection of
//! 𝓛 onto the modes `|m| < n/2`: derivatives are spectral, and the
//! coefficient products are formed on a 2× refined grid so they carry no
//! aliasing error. The direct form above then coincides with the divergence
//! form `∂ₓ((φ − c)∂ₓ·) + c − 3φ² + φ″`, and the nodal matrix is symmetric
//! up to round-off. The Nyquist cosine `(−1)^j`, which a real first
//! derivative cannot resolve, is kept as a decoupled mode with the
//! constant-coefficient symbol `−⟨φ − c⟩(πn/L)² + ⟨c − 3φ² + φ″⟩`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rustfft::num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{PeriodicField, PeriodicGrid};
use crate::fourier::{self, Transform};
use crate::num::Real;

/// Refinement factor for forming coefficient products.
const PRODUCT_PAD: usize = 2;
/// Pre-symmetrization defect allowed, relative to `max(1, max |M_ij|)`.
pub const ASYMMETRY_GATE: f64 = 1e-8;
/// Default relative zero tolerance (times the spectral radius).
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-9;
/// Number of lowest eigenpairs retained in a report.
const KEPT_MODES: usize = 6;
const EIGEN_MAX_ITER: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// The symmetric operator 𝓛.
    SelfadjointL,
    /// The product `∂ₓ𝓛`.
    EvolutionDxL,
}

/// How the zero-eigenvalue threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance<T> {
    /// Multiple of the spectral radius.
    Relative(T),
    Absolute(T),
}

impl<T: Real> Default for Tolerance<T> {
    fn default() -> Self {
        Tolerance::Relative(T::lit(DEFAULT_RELATIVE_TOL))
    }
}

impl<T: Real> Tolerance<T> {
    fn resolve(self, radius: T) -> Result<T> {
        let t = match self {
            Tolerance::Relative(r) => r * radius,
            Tolerance::Absolute(a) => a,
        };
        if !(t > T::zero()) {
            return Err(Error::Domain(format!("zero tolerance {t} must be positive")));
        }
        Ok(t)
    }
}

/// A dense operator on the nodal values of a periodic grid.
#[derive(Debug)]
pub struct OperatorMatrix<T: Real> {
    matrix: DMatrix<T>,
    grid: PeriodicGrid<T>,
    kind: OperatorKind,
    asymmetry: T,
    eigen: OnceLock<std::result::Result<SymmetricEigen<T, nalgebra::Dyn>, Error>>,
}

impl<T: Real> Clone for OperatorMatrix<T> {
    fn clone(&self) -> Self {
        Self {
            matrix: self.matrix.clone(),
            grid: self.grid,
            kind: self.kind,
            asymmetry: self.asymmetry,
            eigen: OnceLock::new(),
        }
    }
}

impl<T: Real> OperatorMatrix<T> {
    /// Wraps an arbitrary matrix, e.g. for tests of the spectral routines.
    /// Self-adjoint matrices are symmetrized.
    pub fn from_matrix(matrix: DMatrix<T>, grid: PeriodicGrid<T>, kind: OperatorKind) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(Error::Data(format!(
                "matrix is {}×{} but the grid has {} nodes",
                matrix.nrows(),
                matrix.ncols(),
                grid.len()
            )));
        }
        let asymmetry = max_asymmetry(&matrix);
        let matrix = match kind {
            OperatorKind::SelfadjointL => symmetrize(matrix),
            OperatorKind::EvolutionDxL => matrix,
        };
        Ok(Self { matrix, grid, kind, asymmetry, eigen: OnceLock::new() })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// `max |M − Mᵀ|` before symmetrization.
    pub fn pre_symmetrization_defect(&self) -> T {
        self.asymmetry
    }

    pub fn apply(&self, v: &PeriodicField<T>) -> Result<PeriodicField<T>> {
        if v.grid() != &self.grid {
            return Err(Error::Data("field and operator live on different grids".into()));
        }
        let out = &self.matrix * DVector::from_column_slice(v.values());
        PeriodicField::from_values(self.grid, out.as_slice().to_vec())
    }

    fn symmetric_eigen(&self) -> Result<&SymmetricEigen<T, nalgebra::Dyn>> {
        if self.kind != OperatorKind::SelfadjointL {
            return Err(Error::Precondition("operator is not self-adjoint".into()));
        }
        self.eigen
            .get_or_init(|| {
                SymmetricEigen::try_new(self.matrix.clone(), T::machine_eps(), EIGEN_MAX_ITER)
                    .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

fn max_asymmetry<T: Real>(m: &DMatrix<T>) -> T {
    let n = m.nrows();
    let mut d = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            d = d.max((m[(i, j)] - m[(j, i)]).mag());
        }
    }
    d
}

fn symmetrize<T: Real>(m: DMatrix<T>) -> DMatrix<T> {
    let t = m.transpose();
    (m + t) * T::lit(0.5)
}

/// Coefficients of 𝓛 interpolated onto the refined product grid.
struct Coefficients<T> {
    principal: Vec<T>,
    drift: Vec<T>,
    potential: Vec<T>,
    nyquist_symbol: T,
}

fn coefficients<T: Real>(phi: &PeriodicField<T>, phi2: &PeriodicField<T>, c: T) -> Result<Coefficients<T>> {
    let grid = *phi.grid();
    let n = grid.len();
    let big = PRODUCT_PAD * n;
    let coarse = Transform::new(n);
    let fine = Transform::new(big);
    let phi1 = phi.derivative(1)?;
    let up = |f: &PeriodicField<T>| fine.synthesize(&fourier::pad(&coarse.analyze(f.values()), big));
    let (p0, p1, p2) = (up(phi), up(&phi1), up(phi2));
    let principal: Vec<T> = p0.iter().map(|&p| p - c).collect();
    let potential: Vec<T> = p0.iter().zip(&p2).map(|(&p, &pp)| c - T::lit(3.0) * p * p + pp).collect();
    let mean = |v: &[T]| v.iter().fold(T::zero(), |s, &x| s + x) / T::from_usize_lossy(v.len());
    let kn = T::pi() * T::from_usize_lossy(n) / grid.period();
    let nyquist_symbol = -mean(&principal) * kn * kn + mean(&potential);
    Ok(Coefficients { principal, drift: p1, potential, nyquist_symbol })
}

/// Discretizes 𝓛 for profile samples `φ`, `φ″` and speed `c`.
///
/// Fails with an assembly error when the Galerkin matrix of the direct form
/// is not symmetric to [`ASYMMETRY_GATE`], which happens when `φ` is not
/// resolved by the grid.
pub fn assemble_l<T: Real>(phi: &PeriodicField<T>, phi2: &PeriodicField<T>, c: T) -> Result<OperatorMatrix<T>> {
    if phi.grid() != phi2.grid() {
        return Err(Error::Data("φ and φ″ sampled on different grids".into()));
    }
    let grid = *phi.grid();
    let n = grid.len();
    let big = PRODUCT_PAD * n;
    let coarse = Transform::new(n);
    let fine = Transform::new(big);
    let kappa = grid.wavenumbers();
    let coef = coefficients(phi, phi2, c)?;
    let nyq = n / 2;
    let zero = Complex::new(T::zero(), T::zero());

    let mut m = DMatrix::<T>::zeros(n, n);
    let mut unit = vec![T::zero(); n];
    for j in 0..n {
        unit.iter_mut().for_each(|u| *u = T::zero());
        unit[j] = T::one();
        let mut amps = coarse.analyze(&unit);
        amps[nyq] = zero;
        let d1: Vec<_> = amps.iter().enumerate().map(|(i, &a)| a * fourier::derivative_symbol(kappa[i], 1, i == nyq)).collect();
        let d2: Vec<_> = amps.iter().enumerate().map(|(i, &a)| a * fourier::derivative_symbol(kappa[i], 2, i == nyq)).collect();
        let v = fine.synthesize(&fourier::pad(&amps, big));
        let v1 = fine.synthesize(&fourier::pad(&d1, big));
        let v2 = fine.synthesize(&fourier::pad(&d2, big));
        let r: Vec<T> = (0..big)
            .map(|i| coef.principal[i] * v2[i] + coef.drift[i] * v1[i] + coef.potential[i] * v[i])
            .collect();
        let mut out = fourier::truncate(&fine.analyze(&r), n);
        out[nyq] = zero;
        let col = coarse.synthesize(&out);
        let sign_j = if j % 2 == 0 { T::one() } else { -T::one() };
        for (i, &x) in col.iter().enumerate() {
            let sign_i = if i % 2 == 0 { T::one() } else { -T::one() };
            m[(i, j)] = x + coef.nyquist_symbol * sign_i * sign_j / T::from_usize_lossy(n);
        }
    }

    let defect = max_asymmetry(&m);
    let scale = m.amax().max(T::one());
    if !(defect <= T::lit(ASYMMETRY_GATE) * scale) {
        return Err(Error::Assembly(format!(
            "direct and divergence forms disagree: asymmetry {defect:e} (scale {scale:e})"
        )));
    }
    let mut op = OperatorMatrix::from_matrix(m, grid, OperatorKind::SelfadjointL)?;
    op.asymmetry = defect;
    Ok(op)
}

/// Fourier first-derivative matrix on nodal values (Nyquist mode zeroed).
pub fn derivative_matrix<T: Real>(grid: &PeriodicGrid<T>) -> DMatrix<T> {
    let n = grid.len();
    let t = Transform::new(n);
    let kappa = grid.wavenumbers();
    let mut d = DMatrix::<T>::zeros(n, n);
    let mut unit = vec![T::zero(); n];
    for j in 0..n {
        unit.iter_mut().for_each(|u| *u = T::zero());
        unit[j] = T::one();
        let amps: Vec<_> = t
            .analyze(&unit)
            .iter()
            .enumerate()
            .map(|(i, &a)| a * fourier::derivative_symbol(kappa[i], 1, i == n / 2))
            .collect();
        for (i, x) in t.synthesize(&amps).into_iter().enumerate() {
            d[(i, j)] = x;
        }
    }
    d
}

/// `∂ₓ𝓛` as the product of the derivative matrix and the symmetrized 𝓛.
pub fn assemble_dxl<T: Real>(phi: &PeriodicField<T>, phi2: &PeriodicField<T>, c: T) -> Result<OperatorMatrix<T>> {
    let l = assemble_l(phi, phi2, c)?;
    evolution_from(&l)
}

/// `∂ₓ𝓛` from an already assembled 𝓛.
pub fn evolution_from<T: Real>(l: &OperatorMatrix<T>) -> Result<OperatorMatrix<T>> {
    if l.kind != OperatorKind::SelfadjointL {
        return Err(Error::Precondition("expected the self-adjoint operator".into()));
    }
    let d = derivative_matrix(&l.grid);
    OperatorMatrix::from_matrix(d * &l.matrix, l.grid, OperatorKind::EvolutionDxL)
}

/// Eigenvalues of a report: real for 𝓛, complex for `∂ₓ𝓛`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Eigenvalues<T> {
    Real(Vec<T>),
    /// `[re, im]` pairs.
    Complex(Vec<[T; 2]>),
}

impl<T: Real> Eigenvalues<T> {
    pub fn len(&self) -> usize {
        match self {
            Eigenvalues::Real(v) => v.len(),
            Eigenvalues::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn real(&self) -> Option<&[T]> {
        match self {
            Eigenvalues::Real(v) => Some(v),
            Eigenvalues::Complex(_) => None,
        }
    }

    pub fn complex(&self) -> Vec<Complex<T>> {
        match self {
            Eigenvalues::Real(v) => v.iter().map(|&x| Complex::new(x, T::zero())).collect(),
            Eigenvalues::Complex(v) => v.iter().map(|p| Complex::new(p[0], p[1])).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridInfo<T> {
    #[serde(rename = "L")]
    pub period: T,
    pub n: usize,
}

/// One eigenpair of a self-adjoint report.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode<T> {
    pub value: T,
    pub vector: Vec<T>,
}

/// Eigenvalues with Morse counts.
///
/// For the self-adjoint kind `n_neg`, `z_dim` and `n_pos` count eigenvalues
/// below `−tol`, within `tol` of zero and above `tol`. For the evolution kind
/// the same classification applies to real parts, so `z_dim` counts
/// eigenvalues on the imaginary axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport<T> {
    pub kind: OperatorKind,
    pub eigenvalues: Eigenvalues<T>,
    pub n_neg: usize,
    pub z_dim: usize,
    pub n_pos: usize,
    pub tol: T,
    pub spectral_radius: T,
    /// Distance from zero to the nearest eigenvalue outside the kernel.
    pub kernel_gap: T,
    pub max_real_part: T,
    pub grid: GridInfo<T>,
    #[serde(skip)]
    pub lowest_modes: Vec<Mode<T>>,
    #[serde(skip)]
    pub kernel_modes: Vec<Mode<T>>,
}

impl<T: Real> SpectralReport<T> {
    /// Number of eigenvalues in the report.
    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }
}

fn real_report<T: Real>(
    values: &[T],
    vectors: Option<&DMatrix<T>>,
    tol: Tolerance<T>,
    grid: GridInfo<T>,
) -> Result<SpectralReport<T>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite eigenvalues"));
    let sorted: Vec<T> = order.iter().map(|&i| values[i]).collect();
    let radius = crate::num::max_abs(&sorted);
    let tol = tol.resolve(radius)?;
    let n_neg = sorted.iter().filter(|&&l| l < -tol).count();
    let z_dim = sorted.iter().filter(|&&l| l.mag() <= tol).count();
    let n_pos = sorted.len() - n_neg - z_dim;
    let kernel_gap =
        sorted.iter().filter(|&&l| l.mag() > tol).fold(T::lit(f64::INFINITY), |m, &l| m.min(l.mag()));
    let mode = |i: usize| Mode {
        value: values[i],
        vector: vectors.map(|v| v.column(i).iter().copied().collect()).unwrap_or_default(),
    };
    let lowest_modes = order.iter().take(KEPT_MODES).map(|&i| mode(i)).collect();
    let kernel_modes = order.iter().filter(|&&i| values[i].mag() <= tol).map(|&i| mode(i)).collect();
    Ok(SpectralReport {
        kind: OperatorKind::SelfadjointL,
        max_real_part: sorted.last().copied().unwrap_or(T::zero()),
        eigenvalues: Eigenvalues::Real(sorted),
        n_neg,
        z_dim,
        n_pos,
        tol,
        spectral_radius: radius,
        kernel_gap,
        grid,
        lowest_modes,
        kernel_modes,
    })
}

fn complex_report<T: Real>(m: DMatrix<T>, tol: Tolerance<T>, grid: GridInfo<T>) -> Result<SpectralReport<T>> {
    let schur = Schur::try_new(m, T::machine_eps(), EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let mut ev: Vec<Complex<T>> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite eigenvalues"));
    let radius = ev.iter().fold(T::zero(), |m, z| m.max(modulus(z)));
    let tol = tol.resolve(radius)?;
    let n_neg = ev.iter().filter(|z| z.re < -tol).count();
    let z_dim = ev.iter().filter(|z| z.re.mag() <= tol).count();
    let n_pos = ev.len() - n_neg - z_dim;
    let kernel_gap = ev.iter().map(modulus).filter(|&r| r > tol).fold(T::lit(f64::INFINITY), |m, r| m.min(r));
    let max_real_part = ev.iter().fold(T::lit(f64::NEG_INFINITY), |m, z| m.max(z.re));
    Ok(SpectralReport {
        kind: OperatorKind::EvolutionDxL,
        eigenvalues: Eigenvalues::Complex(ev.iter().map(|z| [z.re, z.im]).collect()),
        n_neg,
        z_dim,
        n_pos,
        tol,
        spectral_radius: radius,
        kernel_gap,
        max_real_part,
        grid,
        lowest_modes: Vec::new(),
        kernel_modes: Vec::new(),
    })
}

fn modulus<T: Real>(z: &Complex<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

fn grid_info<T: Real>(g: &PeriodicGrid<T>) -> GridInfo<T> {
    GridInfo { period: g.period(), n: g.len() }
}

/// Full dense spectrum with Morse counts.
pub fn spectrum<T: Real>(m: &OperatorMatrix<T>, tol: Tolerance<T>) -> Result<SpectralReport<T>> {
    match m.kind {
        OperatorKind::SelfadjointL => {
            let eig = m.symmetric_eigen()?;
            real_report(eig.eigenvalues.as_slice(), Some(&eig.eigenvectors), tol, grid_info(&m.grid))
        }
        OperatorKind::EvolutionDxL => complex_report(m.matrix.clone(), tol, grid_info(&m.grid)),
    }
}

/// Orthonormal (discrete) basis of the zero-mean subspace: the real Fourier
/// modes `m = 1, …, n/2` as columns of an `n × (n − 1)` matrix.
pub fn zero_mean_basis<T: Real>(n: usize) -> DMatrix<T> {
    let mut b = DMatrix::<T>::zeros(n, n - 1);
    let scale = (T::lit(2.0) / T::from_usize_lossy(n)).sqrt();
    let mut col = 0;
    for m in 1..n / 2 {
        for j in 0..n {
            let theta = T::two_pi() * T::from_usize_lossy(m * j % n) / T::from_usize_lossy(n);
            b[(j, col)] = scale * theta.cos();
            b[(j, col + 1)] = scale * theta.sin();
        }
        col += 2;
    }
    let nyq = T::one() / T::from_usize_lossy(n).sqrt();
    for j in 0..n {
        b[(j, col)] = if j % 2 == 0 { nyq } else { -nyq };
    }
    b
}

/// Spectrum of the operator compressed to the zero-mean subspace `Y₀`.
///
/// For 𝓛 this is `P𝓛P` on `Y₀`; for `∂ₓ𝓛` the range already lies in `Y₀`,
/// so the compression carries every eigenvalue of `∂ₓ𝓛|_{Y₀}`.
pub fn restricted_spectrum<T: Real>(m: &OperatorMatrix<T>, tol: Tolerance<T>) -> Result<SpectralReport<T>> {
    let b = zero_mean_basis::<T>(m.grid.len());
    let r = b.transpose() * &m.matrix * &b;
    match m.kind {
        OperatorKind::SelfadjointL => {
            let r = symmetrize(r);
            let eig = SymmetricEigen::try_new(r, T::machine_eps(), EIGEN_MAX_ITER)
                .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
            let lifted = &b * &eig.eigenvectors;
            real_report(eig.eigenvalues.as_slice(), Some(&lifted), tol, grid_info(&m.grid))
        }
        OperatorKind::EvolutionDxL => complex_report(r, tol, grid_info(&m.grid)),
    }
}

/// Options for [`inv_one_pairing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingOptions<T> {
    pub tol: Tolerance<T>,
    /// Deflate a kernel of any dimension instead of requiring `z(𝓛) = 1`.
    pub allow_degenerate_kernel: bool,
}

impl<T: Real> Default for PairingOptions<T> {
    fn default() -> Self {
        Self { tol: Tolerance::default(), allow_degenerate_kernel: false }
    }
}

/// `⟨𝓛⁻¹1, 1⟩` together with the diagnostics of the deflated solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pairing<T> {
    pub value: T,
    pub kernel_dim: usize,
    /// `max |𝓛w − (1 − Π_ker 1)|`.
    pub residual: T,
    /// `|⟨1, ker⟩|`: the constant must be orthogonal to the kernel.
    pub kernel_overlap: T,
    #[serde(skip)]
    pub solution: Vec<T>,
}

/// Solves `𝓛w = 1` on the orthogonal complement of the numerical kernel and
/// returns `⟨w, 1⟩` in `L²(0, L)`.
pub fn inv_one_pairing<T: Real>(m: &OperatorMatrix<T>, opts: PairingOptions<T>) -> Result<Pairing<T>> {
    let eig = m.symmetric_eigen()?;
    let n = m.grid.len();
    let values = eig.eigenvalues.as_slice();
    let radius = crate::num::max_abs(values);
    let tol = opts.tol.resolve(radius)?;
    let kernel: Vec<usize> = (0..n).filter(|&i| values[i].mag() <= tol).collect();
    if kernel.len() != 1 && !opts.allow_degenerate_kernel {
        return Err(Error::Rank(format!("numerical kernel has dimension {} (tol {tol:e}), expected 1", kernel.len())));
    }
    let ones = DVector::<T>::from_element(n, T::one());
    let mut w = DVector::<T>::zeros(n);
    let mut target = ones.clone();
    let mut overlap = T::zero();
    for i in 0..n {
        let v = eig.eigenvectors.column(i);
        let proj = v.dot(&ones);
        if kernel.contains(&i) {
            target -= v * proj;
            overlap = overlap.max(proj.mag() / T::from_usize_lossy(n).sqrt());
        } else {
            w += v * (proj / values[i]);
        }
    }
    let residual = (&m.matrix * &w - target).amax();
    let value = m.grid.spacing() * w.sum();
    Ok(Pairing { value, kernel_dim: kernel.len(), residual, kernel_overlap: overlap, solution: w.as_slice().to_vec() })
}
