//! Composite Hilbert-space bookkeeping.
//!
//! The simulator works in the product space
//!
//! ```text
//!   internal (2)  ⊗  cavity photon (2)  ⊗  trap (n_trap)
//! ```
//!
//! with the trap index varying fastest, i.e. basis state `|v, p, n>` sits at
//! flat index `(v * 2 + p) * n_trap + n`. The internal space holds the ground
//! and excited states of the cooled transition, the cavity space holds the
//! vacuum and the one-photon state, and the trap space holds the lowest
//! `n_trap` harmonic-oscillator levels.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Dense complex matrix used throughout the crate.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex vector used throughout the crate.
pub type CVector = DVector<Complex64>;

/// Complex one.
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
/// Complex zero.
pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Imaginary unit.
pub const C_I: Complex64 = Complex64::new(0.0, 1.0);

/// Hermiticity tolerance for validated density matrices (maximum element-wise
/// deviation is measured against this).
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Trace tolerance for validated density matrices.
pub const TRACE_TOL: f64 = 1e-8;
/// Eigenvalue floor for validated density matrices; small negative eigenvalues
/// above this floor are tolerated as round-off.
pub const EIGENVALUE_FLOOR: f64 = -1e-8;

/// Shape of the composite space.
///
/// The internal and cavity factors are fixed at dimension two by the model
/// (one cooled transition, at most one photon); only the trap truncation is
/// configurable. Equality of layouts is used as the dimension-compatibility
/// check throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertLayout {
    n_trap: usize,
}

impl HilbertLayout {
    /// Internal (vibrational two-level) factor dimension.
    pub const N_VIB: usize = 2;
    /// Cavity-photon factor dimension (vacuum and one photon).
    pub const N_PHOTON: usize = 2;

    /// Create a layout with `n_trap` trap levels. At least two levels are
    /// required for a sideband to exist.
    pub fn new(n_trap: usize) -> Result<Self> {
        if n_trap < 2 {
            return Err(Error::InvalidLayout(format!(
                "n_trap must be at least 2, got {n_trap}"
            )));
        }
        Ok(Self { n_trap })
    }

    /// Number of trap levels retained.
    pub fn n_trap(&self) -> usize {
        self.n_trap
    }

    /// Internal factor dimension (always 2).
    pub fn n_vib(&self) -> usize {
        Self::N_VIB
    }

    /// Cavity factor dimension (always 2).
    pub fn n_photon(&self) -> usize {
        Self::N_PHOTON
    }

    /// Total composite dimension `2 * 2 * n_trap`.
    pub fn dim(&self) -> usize {
        Self::N_VIB * Self::N_PHOTON * self.n_trap
    }

    /// Flat index of `|v, p, n>` (trap index fastest).
    ///
    /// `v` is the internal index (0 = ground, 1 = excited), `p` the photon
    /// number, `n` the trap level.
    pub fn index(&self, v: usize, p: usize, n: usize) -> usize {
        debug_assert!(v < Self::N_VIB && p < Self::N_PHOTON && n < self.n_trap);
        (v * Self::N_PHOTON + p) * self.n_trap + n
    }
}

impl Default for HilbertLayout {
    /// Default truncation: five trap levels (d = 20), the working size used
    /// for all production runs.
    fn default() -> Self {
        Self { n_trap: 5 }
    }
}

/// Elementary operators lifted to the full composite space.
///
/// `sigma` is the internal lowering operator `|g><e|`, `a` the photon
/// annihilator, `b` the trap annihilator; each one acts as the identity on the
/// other two factors. `identity` is the full-space identity.
#[derive(Debug, Clone)]
pub struct ElementaryOps {
    pub sigma: CMatrix,
    pub sigma_dag: CMatrix,
    pub a: CMatrix,
    pub a_dag: CMatrix,
    pub b: CMatrix,
    pub b_dag: CMatrix,
    pub identity: CMatrix,
}

/// Two-level lowering operator `|0><1|`.
fn lowering2() -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 1)] = C_ONE;
    m
}

/// Truncated harmonic-oscillator annihilator: `b[n-1, n] = sqrt(n)`.
fn lowering_n(dim: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    m
}

/// Embed `op`, acting on one factor, into the full space.
///
/// `slot` selects the factor: 0 = internal, 1 = photon, 2 = trap. The
/// Kronecker order `internal ⊗ photon ⊗ trap` matches the flat indexing of
/// [`HilbertLayout::index`] (trap fastest).
fn embed(layout: &HilbertLayout, op: &CMatrix, slot: usize) -> CMatrix {
    let id2 = CMatrix::identity(2, 2);
    let idt = CMatrix::identity(layout.n_trap(), layout.n_trap());
    match slot {
        0 => op.kronecker(&id2).kronecker(&idt),
        1 => id2.kronecker(op).kronecker(&idt),
        2 => id2.kronecker(&id2).kronecker(op),
        _ => unreachable!("slot must be 0, 1, or 2"),
    }
}

/// Build the elementary operators on the composite space described by
/// `layout`.
pub fn build_elementary(layout: &HilbertLayout) -> ElementaryOps {
    let low2 = lowering2();
    let lowt = lowering_n(layout.n_trap());
    let sigma = embed(layout, &low2, 0);
    let a = embed(layout, &low2, 1);
    let b = embed(layout, &lowt, 2);
    ElementaryOps {
        sigma_dag: sigma.adjoint(),
        a_dag: a.adjoint(),
        b_dag: b.adjoint(),
        sigma,
        a,
        b,
        identity: CMatrix::identity(layout.dim(), layout.dim()),
    }
}

/// A validated density matrix on a known layout.
///
/// Construction checks hermiticity (max element deviation below
/// [`HERMITICITY_TOL`]), unit trace (within [`TRACE_TOL`]), and positivity
/// (smallest eigenvalue at or above [`EIGENVALUE_FLOOR`]). Use
/// [`DensityMatrix::new_unchecked`] only for matrices already known valid,
/// e.g. intermediate propagation states that are re-validated at sample
/// times.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: CMatrix,
    layout: HilbertLayout,
}

impl DensityMatrix {
    /// Validate `matrix` against the density-matrix contract and wrap it.
    pub fn new(matrix: CMatrix, layout: HilbertLayout) -> Result<Self> {
        let d = layout.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: matrix.nrows(),
            });
        }
        let herm = hermiticity_deviation(&matrix);
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "hermiticity deviation {herm:.3e} exceeds {HERMITICITY_TOL:.1e}"
            )));
        }
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace {tr} deviates from 1 beyond {TRACE_TOL:.1e}"
            )));
        }
        let min_eig = min_symmetric_eigenvalue(&matrix);
        if min_eig < EIGENVALUE_FLOOR {
            return Err(Error::InvalidDensityMatrix(format!(
                "smallest eigenvalue {min_eig:.3e} below floor {EIGENVALUE_FLOOR:.1e}"
            )));
        }
        Ok(Self { matrix, layout })
    }

    /// Wrap without validation. The caller asserts the contract holds.
    pub fn new_unchecked(matrix: CMatrix, layout: HilbertLayout) -> Self {
        Self { matrix, layout }
    }

    /// Backing matrix.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Consume and return the backing matrix.
    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Layout this state lives on.
    pub fn layout(&self) -> HilbertLayout {
        self.layout
    }

    /// Trace (should be 1 up to round-off).
    pub fn trace(&self) -> Complex64 {
        trace(&self.matrix)
    }

    /// Smallest eigenvalue of the Hermitian part; negative values beyond
    /// [`EIGENVALUE_FLOOR`] indicate a corrupted state.
    pub fn min_eigenvalue(&self) -> f64 {
        min_symmetric_eigenvalue(&self.matrix)
    }

    /// Pure state `|v, p, n><v, p, n|`.
    pub fn fock(layout: HilbertLayout, v: usize, p: usize, n: usize) -> Result<Self> {
        if v >= layout.n_vib() || p >= layout.n_photon() || n >= layout.n_trap() {
            return Err(Error::InvalidParams(format!(
                "fock indices ({v}, {p}, {n}) outside layout"
            )));
        }
        let d = layout.dim();
        let mut m = CMatrix::zeros(d, d);
        let i = layout.index(v, p, n);
        m[(i, i)] = C_ONE;
        Ok(Self { matrix: m, layout })
    }

    /// Internal ground state, cavity vacuum, and a truncated thermal trap
    /// distribution with untruncated mean occupation `mean_n`, renormalized on
    /// the retained levels.
    ///
    /// For `mean_n = 0` this is the motional ground state.
    pub fn ground_thermal(layout: HilbertLayout, mean_n: f64) -> Result<Self> {
        if !(mean_n >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "thermal mean occupation must be non-negative, got {mean_n}"
            )));
        }
        let weights = thermal_weights(mean_n, layout.n_trap());
        let d = layout.dim();
        let mut m = CMatrix::zeros(d, d);
        for (n, w) in weights.iter().enumerate() {
            let i = layout.index(0, 0, n);
            m[(i, i)] = Complex64::new(*w, 0.0);
        }
        Ok(Self { matrix: m, layout })
    }
}

/// Boltzmann weights of a thermal oscillator state with mean occupation
/// `mean_n`, truncated to `n_levels` levels and renormalized.
///
/// The untruncated distribution is geometric, `p_n ∝ r^n` with
/// `r = mean_n / (mean_n + 1)`; truncation redistributes the tail mass
/// proportionally over the retained levels.
pub fn thermal_weights(mean_n: f64, n_levels: usize) -> Vec<f64> {
    if mean_n == 0.0 {
        let mut w = vec![0.0; n_levels];
        w[0] = 1.0;
        return w;
    }
    let r = mean_n / (mean_n + 1.0);
    let mut w: Vec<f64> = (0..n_levels).map(|n| r.powi(n as i32)).collect();
    let norm: f64 = w.iter().sum();
    for x in &mut w {
        *x /= norm;
    }
    w
}

/// Largest element magnitude, `max_{r,c} |m[r,c]|`.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Trace of a square matrix.
pub fn trace(m: &CMatrix) -> Complex64 {
    let mut t = C_ZERO;
    for i in 0..m.nrows().min(m.ncols()) {
        t += m[(i, i)];
    }
    t
}

/// Maximum element-wise deviation from hermiticity, `max |m - m†|`.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            dev = dev.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    dev
}

/// Smallest eigenvalue of the Hermitian part `(m + m†) / 2`.
pub fn min_symmetric_eigenvalue(m: &CMatrix) -> f64 {
    let herm = (m + m.adjoint()).scale(0.5);
    let eigs = herm.symmetric_eigenvalues();
    eigs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Trap-level populations `p_n = sum_{v,p} <v,p,n| rho |v,p,n>`, i.e. the
/// diagonal of the partial trace over internal and cavity factors.
pub fn partial_trace_trap(rho: &CMatrix, layout: &HilbertLayout) -> Result<Vec<f64>> {
    let d = layout.dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho.nrows(),
        });
    }
    let mut pops = vec![0.0; layout.n_trap()];
    for (n, pop) in pops.iter_mut().enumerate() {
        let mut acc = 0.0;
        for v in 0..layout.n_vib() {
            for p in 0..layout.n_photon() {
                let i = layout.index(v, p, n);
                acc += rho[(i, i)].re;
            }
        }
        *pop = acc;
    }
    Ok(pops)
}

/// Internal excited-state population `Tr[ |e><e| rho ]`.
pub fn excited_population(rho: &CMatrix, layout: &HilbertLayout) -> f64 {
    let mut acc = 0.0;
    for p in 0..layout.n_photon() {
        for n in 0..layout.n_trap() {
            acc += rho[(layout.index(1, p, n), layout.index(1, p, n))].re;
        }
    }
    acc
}

/// Cavity photon number `Tr[ a†a rho ]`.
pub fn photon_population(rho: &CMatrix, layout: &HilbertLayout) -> f64 {
    let mut acc = 0.0;
    for v in 0..layout.n_vib() {
        for n in 0..layout.n_trap() {
            acc += rho[(layout.index(v, 1, n), layout.index(v, 1, n))].re;
        }
    }
    acc
}

/// Mean trap occupation `<n> = sum_n n p_n`.
pub fn mean_trap_occupation(rho: &CMatrix, layout: &HilbertLayout) -> Result<f64> {
    let pops = partial_trace_trap(rho, layout)?;
    Ok(pops.iter().enumerate().map(|(n, p)| n as f64 * p).sum())
}

/// Column-stack a square matrix into a vector (column-major order), the
/// convention under which `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`]: reshape a length-`d²` vector into a `d × d`
/// matrix.
pub fn devectorize(v: &CVector) -> Result<CMatrix> {
    let len = v.len();
    let d = (len as f64).sqrt().round() as usize;
    if d * d != len {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: len,
        });
    }
    Ok(CMatrix::from_column_slice(d, d, v.as_slice()))
}

/// Trace of a product, `Tr[A B]`, evaluated without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    let mut t = C_ZERO;
    // Tr[A B] = Σ_{i,k} A[i,k] B[k,i]
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            t += a[(i, k)] * b[(k, i)];
        }
    }
    t
}
