//! Physical model: parameters, Hamiltonian, dissipators, Liouvillian.
//!
//! All frequencies and rates are expressed in units of the trap frequency
//! `nu` (so the trap term contributes `b†b + 1/2` with unit prefactor), and
//! `hbar = 1`. The drive and cavity couplings act on the internal lowering
//! operator `sigma = |g><e|`; the geometry enters through the molecule's
//! position in the cavity standing wave (`phi`) and the angles between the
//! trap axis and the laser (`theta_l`) and cavity (`theta_c`) wave vectors.
//!
//! In the frame rotating at the drive frequency the Hamiltonian is
//!
//! ```text
//!   H = -delta |e><e|  +  (b†b + 1/2)  -  delta_c a†a
//!       + [ (Omega + g cos(phi) a†) sigma + h.c. ]
//!       + [ eta (i Omega cos(theta_l) - g cos(theta_c) sin(phi) a†) sigma
//!           + h.c. ] (b + b†)
//! ```
//!
//! where the last line is the first order of the Lamb-Dicke expansion and is
//! the only term coupling the trap motion to the internal/cavity dynamics.
//! Dissipation enters through cavity decay at rate `kappa` (jump operator
//! `a`) and internal relaxation at rate `gamma` (jump operator `sigma`), each
//! in Lindblad form.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::hilbert::{
    build_elementary, hermiticity_deviation, vectorize, CMatrix, HilbertLayout, C_I, C_ONE,
};
use crate::{Error, Result};

/// Lamb-Dicke parameter above which the first-order expansion is considered
/// unreliable; [`ModelParams::validate`] emits a warning past this point.
pub const LAMB_DICKE_WARN: f64 = 0.3;

/// Model parameters in trap-frequency units.
///
/// `delta` is the laser detuning from the internal transition, `delta_c` the
/// cavity detuning from the drive, `omega` the Rabi frequency of the direct
/// drive, `g` the vacuum Rabi coupling, `kappa` and `gamma` the cavity and
/// internal relaxation rates, and `eta` the Lamb-Dicke parameter of the trap.
/// `nu_si` stores the trap angular frequency in SI units (rad/s) purely for
/// converting extracted rates back to laboratory units.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub delta: f64,
    pub delta_c: f64,
    pub omega: f64,
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub eta: f64,
    pub phi: f64,
    pub theta_l: f64,
    pub theta_c: f64,
    pub nu_si: f64,
    pub layout: HilbertLayout,
}

impl ModelParams {
    /// Reference working point: the carbonyl sulfide nu3 stretch mode in the
    /// default trap/cavity configuration (trap frequency 2π × 350 kHz, cavity
    /// linewidth 2π × 5 MHz, g = 0.41 nu, eta = 0.02, all geometry angles at
    /// π/4). Detunings and drive strength are the free knobs.
    pub fn cos_reference(omega: f64, delta: f64, delta_c: f64) -> Self {
        let nu_si = 2.0 * std::f64::consts::PI * 350.0e3;
        Self {
            delta,
            delta_c,
            omega,
            g: 0.41,
            kappa: 100.0 / 7.0, // 2π × 5 MHz in units of nu
            gamma: 424.0 / nu_si,
            eta: 0.02,
            phi: std::f64::consts::FRAC_PI_4,
            theta_l: std::f64::consts::FRAC_PI_4,
            theta_c: std::f64::consts::FRAC_PI_4,
            nu_si,
            layout: HilbertLayout::default(),
        }
    }

    /// Check parameter ranges. Hard violations (negative rates or couplings,
    /// non-positive `nu_si`) are errors; questionable-but-legal settings are
    /// returned as warnings (currently: Lamb-Dicke parameter beyond
    /// [`LAMB_DICKE_WARN`]).
    pub fn validate(&self) -> Result<Vec<String>> {
        for (name, value) in [
            ("omega", self.omega),
            ("g", self.g),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("eta", self.eta),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        for (name, value) in [
            ("delta", self.delta),
            ("delta_c", self.delta_c),
            ("phi", self.phi),
            ("theta_l", self.theta_l),
            ("theta_c", self.theta_c),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite, got {value}"
                )));
            }
        }
        if !(self.nu_si > 0.0) {
            return Err(Error::InvalidParams(format!(
                "nu_si must be positive, got {}",
                self.nu_si
            )));
        }
        let mut warnings = Vec::new();
        if self.eta > LAMB_DICKE_WARN {
            warnings.push(format!(
                "Lamb-Dicke parameter eta = {} exceeds {LAMB_DICKE_WARN}; the first-order \
                 expansion of the trap coupling is unreliable",
                self.eta
            ));
        }
        Ok(warnings)
    }

    /// Fastest rate entering the integrator step-size guard:
    /// `max(kappa, 1, g, omega)` (the 1 is the trap frequency itself).
    pub fn guard_rate(&self) -> f64 {
        self.kappa.max(1.0).max(self.g).max(self.omega)
    }
}

/// A Lindblad jump operator with its rate.
#[derive(Debug, Clone)]
pub struct JumpOperator {
    pub operator: CMatrix,
    pub rate: f64,
    pub label: &'static str,
}

/// Which space a Liouvillian acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiouvillianKind {
    /// Full composite space (internal ⊗ cavity ⊗ trap) with the first-order
    /// trap coupling included.
    Full,
    /// Reduced internal ⊗ cavity space (dimension 4) with the trap factor and
    /// the first-order coupling dropped; the zeroth-order generator used by
    /// the perturbative rate formulas.
    Reduced,
}

/// Dense matrix representation of a Lindblad generator acting on
/// column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct LiouvillianMatrix {
    matrix: CMatrix,
    kind: LiouvillianKind,
    dim: usize,
    guard_rate: f64,
}

impl LiouvillianMatrix {
    /// Wrap an externally assembled superoperator.
    ///
    /// Escape hatch for custom generators (and for fault-injection in tests);
    /// only the shape is checked, the caller is responsible for the Lindblad
    /// structure. `guard_rate` feeds the integrator step guard.
    pub fn from_raw(
        matrix: CMatrix,
        kind: LiouvillianKind,
        dim: usize,
        guard_rate: f64,
    ) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: matrix.nrows(),
            });
        }
        if !(guard_rate > 0.0) {
            return Err(Error::InvalidParams(format!(
                "guard_rate must be positive, got {guard_rate}"
            )));
        }
        Ok(Self {
            matrix,
            kind,
            dim,
            guard_rate,
        })
    }

    /// Superoperator matrix (`dim² × dim²`).
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Which space this generator acts on.
    pub fn kind(&self) -> LiouvillianKind {
        self.kind
    }

    /// Hilbert-space dimension `dim` (the matrix is `dim² × dim²`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fastest rate in the generator, used by the integrator step guard.
    pub fn guard_rate(&self) -> f64 {
        self.guard_rate
    }
}

/// Build the full-space Hamiltonian. `include_first_order` toggles the
/// first-order Lamb-Dicke coupling (the `(b + b†)` line); with it off the
/// trap factor is strictly decoupled, which is useful for convergence and
/// conservation checks.
pub fn build_hamiltonian(params: &ModelParams, include_first_order: bool) -> CMatrix {
    let ops = build_elementary(&params.layout);
    let d = params.layout.dim();

    let proj_e = &ops.sigma_dag * &ops.sigma;
    let trap = &ops.b_dag * &ops.b + CMatrix::identity(d, d).scale(0.5);
    let photon = &ops.a_dag * &ops.a;

    let mut h = proj_e.scale(-params.delta) + trap + photon.scale(-params.delta_c);

    // Zeroth order: carrier drive and cavity exchange.
    let drive = &ops.identity.scale(params.omega) + &ops.a_dag.scale(params.g * params.phi.cos());
    let v0 = &drive * &ops.sigma;
    h += &v0 + v0.adjoint();

    if include_first_order {
        // First order in eta: sideband coupling through laser and cavity
        // field gradients along the trap axis.
        let coeff_laser = C_I * Complex64::new(params.eta * params.omega * params.theta_l.cos(), 0.0);
        let coeff_cav =
            Complex64::new(-params.eta * params.g * params.theta_c.cos() * params.phi.sin(), 0.0);
        let k_op = &ops.identity * coeff_laser + &ops.a_dag * coeff_cav;
        let v1 = &k_op * &ops.sigma * (&ops.b + &ops.b_dag);
        h += &v1 + v1.adjoint();
    }
    h
}

/// The two Lindblad channels: cavity decay (`a`, rate `kappa`) and internal
/// relaxation (`sigma`, rate `gamma`), on the full space.
pub fn build_dissipators(params: &ModelParams) -> Vec<JumpOperator> {
    let ops = build_elementary(&params.layout);
    vec![
        JumpOperator {
            operator: ops.a,
            rate: params.kappa,
            label: "cavity",
        },
        JumpOperator {
            operator: ops.sigma,
            rate: params.gamma,
            label: "internal",
        },
    ]
}

/// Elementary operators on the reduced internal ⊗ cavity space (dimension 4,
/// photon index fastest, consistent with the full-space ordering with the
/// trap factor removed): `(sigma, a)`.
pub fn reduced_ops() -> (CMatrix, CMatrix) {
    let mut low2 = CMatrix::zeros(2, 2);
    low2[(0, 1)] = C_ONE;
    let id2 = CMatrix::identity(2, 2);
    let sigma = low2.kronecker(&id2);
    let a = id2.kronecker(&low2);
    (sigma, a)
}

/// Zeroth-order Hamiltonian on the reduced space: detunings plus carrier and
/// cavity couplings, no trap term.
pub fn reduced_hamiltonian(params: &ModelParams) -> CMatrix {
    let (sigma, a) = reduced_ops();
    let a_dag = a.adjoint();
    let mut h = (sigma.adjoint() * &sigma).scale(-params.delta)
        + (&a_dag * &a).scale(-params.delta_c);
    let drive = CMatrix::identity(4, 4).scale(params.omega) + a_dag.scale(params.g * params.phi.cos());
    let v0 = &drive * &sigma;
    h += &v0 + v0.adjoint();
    h
}

/// Reduced-space jump operators (same channels as [`build_dissipators`]).
pub fn reduced_dissipators(params: &ModelParams) -> Vec<JumpOperator> {
    let (sigma, a) = reduced_ops();
    vec![
        JumpOperator {
            operator: a,
            rate: params.kappa,
            label: "cavity",
        },
        JumpOperator {
            operator: sigma,
            rate: params.gamma,
            label: "internal",
        },
    ]
}

/// Internal part of the first-order trap coupling on the reduced space:
///
/// ```text
///   V1 = eta (i Omega cos(theta_l) - g cos(theta_c) sin(phi) a†) sigma + h.c.
/// ```
///
/// This is the operator whose correlation spectrum at `-/+ nu` yields the
/// cooling and heating rates; the `(b + b†)` factor it multiplies in the full
/// Hamiltonian is accounted for by the rate-equation ladder weights.
pub fn reduced_first_order_coupling(params: &ModelParams) -> CMatrix {
    let (sigma, a) = reduced_ops();
    let coeff_laser = C_I * Complex64::new(params.eta * params.omega * params.theta_l.cos(), 0.0);
    let coeff_cav =
        Complex64::new(-params.eta * params.g * params.theta_c.cos() * params.phi.sin(), 0.0);
    let k_op = CMatrix::identity(4, 4) * coeff_laser + a.adjoint() * coeff_cav;
    let v1 = &k_op * &sigma;
    &v1 + v1.adjoint()
}

/// Right-hand side of the master equation evaluated directly on matrices:
/// `-i [H, rho] + sum_j (r_j/2) (2 X rho X† - X†X rho - rho X†X)`.
///
/// This is the definitional form; the superoperator construction and the
/// structured fast path are both tested against it.
pub fn lindblad_rhs_direct(h: &CMatrix, jumps: &[JumpOperator], rho: &CMatrix) -> CMatrix {
    let mut out = (h * rho - rho * h) * (-C_I);
    for j in jumps {
        if j.rate == 0.0 {
            continue;
        }
        let x_rho_xd = &j.operator * rho * j.operator.adjoint();
        let xdx = j.operator.adjoint() * &j.operator;
        out += (x_rho_xd.scale(2.0) - &xdx * rho - rho * &xdx).scale(j.rate / 2.0);
    }
    out
}

/// Assemble the dense superoperator for `H` and a set of jump operators,
/// acting on column-stacked matrices:
///
/// ```text
///   L = -i (I ⊗ H - Hᵀ ⊗ I)
///       + sum_j (r_j/2) [ 2 conj(X_j) ⊗ X_j - I ⊗ X_j†X_j - (X_j†X_j)ᵀ ⊗ I ]
/// ```
pub fn superoperator(h: &CMatrix, jumps: &[JumpOperator]) -> CMatrix {
    let d = h.nrows();
    let id = CMatrix::identity(d, d);
    let mut l = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-C_I);
    for j in jumps {
        if j.rate == 0.0 {
            continue;
        }
        let x = &j.operator;
        let xdx = x.adjoint() * x;
        let conj_x = x.map(|z| z.conj());
        l += (conj_x.kronecker(x).scale(2.0)
            - id.kronecker(&xdx)
            - xdx.transpose().kronecker(&id))
        .scale(j.rate / 2.0);
    }
    l
}

/// Build the Liouvillian of the requested kind for `params`.
///
/// `Full` includes the first-order trap coupling; `Reduced` is the
/// zeroth-order generator on the internal ⊗ cavity space.
pub fn build_liouvillian(params: &ModelParams, kind: LiouvillianKind) -> Result<LiouvillianMatrix> {
    params.validate()?;
    let (matrix, dim) = match kind {
        LiouvillianKind::Full => {
            let h = build_hamiltonian(params, true);
            let jumps = build_dissipators(params);
            (superoperator(&h, &jumps), params.layout.dim())
        }
        LiouvillianKind::Reduced => {
            let h = reduced_hamiltonian(params);
            let jumps = reduced_dissipators(params);
            (superoperator(&h, &jumps), 4)
        }
    };
    Ok(LiouvillianMatrix {
        matrix,
        kind,
        dim,
        guard_rate: params.guard_rate(),
    })
}

/// Maximum residual of the trace functional under the generator,
/// `max_k |(tᵀ L)_k|` where `t = vec(I)`. Exactly zero for a trace-preserving
/// generator; used as a construction sanity check.
pub fn trace_preservation_residual(l: &LiouvillianMatrix) -> f64 {
    let d = l.dim;
    let m = &l.matrix;
    let mut worst: f64 = 0.0;
    for col in 0..d * d {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..d {
            acc += m[(i * (d + 1), col)];
        }
        worst = worst.max(acc.norm());
    }
    worst
}

/// Hermiticity-preservation check: for random Hermitian `rho`, `L vec(rho)`
/// must devectorize to a Hermitian matrix. Returns the worst deviation over
/// the supplied states.
pub fn hermiticity_preservation_residual(l: &LiouvillianMatrix, states: &[CMatrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for rho in states {
        let v = vectorize(rho);
        let lv = &l.matrix * v;
        let m = crate::hilbert::devectorize(&lv).expect("square by construction");
        worst = worst.max(hermiticity_deviation(&m));
    }
    worst
}

/// Eigenvalue real parts of a complex matrix via its real embedding.
///
/// `M = A + iB` is embedded as `[[A, -B], [B, A]]`, whose real spectrum is
/// the union of the spectra of `M` and its conjugate; the real parts of the
/// `2n` embedded eigenvalues therefore cover those of `M` (each twice).
pub fn embedded_real_spectrum(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    let mut real = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let z = m[(r, c)];
            real[(r, c)] = z.re;
            real[(r, c + n)] = -z.im;
            real[(r + n, c)] = z.im;
            real[(r + n, c + n)] = z.re;
        }
    }
    real.complex_eigenvalues().iter().map(|z| z.re).collect()
}

/// Largest eigenvalue real part of a complex matrix (see
/// [`embedded_real_spectrum`]). For a Lindblad generator this must be
/// non-positive up to round-off.
pub fn max_eigenvalue_real_part(m: &CMatrix) -> f64 {
    embedded_real_spectrum(m)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}
