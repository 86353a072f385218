//! Closed-loop three-level atom: Hamiltonians, spectra, dark states and the
//! optical Bloch equations.
//!
//! Basis ordering is (|1⟩, |2⟩, |3⟩), indices 0..3. The probe couples 1↔3,
//! the pump 2↔3 and the control field 1↔2; all Rabi magnitudes and decay
//! rates are in units of the probe coherence decay γ13. The three field
//! phases survive only as the gauge-invariant loop phase
//! `Φ = φ12 + φ23 − φ13`, which in the reduced frame sits on the 1↔2
//! coupling.
//!
//! Two routes to the steady-state probe coherence coexist deliberately:
//! the weak-probe closed form [`weak_probe_coherence`] and the full dense
//! solve [`steady_state`]. The latter is the numerical oracle that bounds
//! the validity of the former.

use crate::{C64, Error, Result};
use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Rabi magnitudes and phases of the three coupling fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub omega12: f64,
    pub omega23: f64,
    pub omega13: f64,
    pub phi12: f64,
    pub phi23: f64,
    pub phi13: f64,
}

impl CouplingConfig {
    pub fn new(omega12: f64, omega23: f64, omega13: f64, phi12: f64, phi23: f64, phi13: f64) -> Result<Self> {
        for (field, v) in [("omega12", omega12), ("omega23", omega23), ("omega13", omega13)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Invalid {
                    field: match field {
                        "omega12" => "omega12",
                        "omega23" => "omega23",
                        _ => "omega13",
                    },
                    message: format!("Rabi magnitude must be finite and ≥ 0, got {v}"),
                });
            }
        }
        for (field, v) in [("phi12", phi12), ("phi23", phi23), ("phi13", phi13)] {
            if !v.is_finite() {
                return Err(Error::Invalid {
                    field: match field {
                        "phi12" => "phi12",
                        "phi23" => "phi23",
                        _ => "phi13",
                    },
                    message: "phase must be finite".into(),
                });
            }
        }
        Ok(Self { omega12, omega23, omega13, phi12, phi23, phi13 })
    }

    /// Magnitudes only, zero phases.
    pub fn from_magnitudes(omega12: f64, omega23: f64, omega13: f64) -> Result<Self> {
        Self::new(omega12, omega23, omega13, 0.0, 0.0, 0.0)
    }

    /// Same magnitudes with the loop phase placed entirely on φ12.
    pub fn with_loop_phase(mut self, phi: f64) -> Self {
        self.phi12 = phi;
        self.phi23 = 0.0;
        self.phi13 = 0.0;
        self
    }

    /// Gauge-invariant loop phase `Φ = φ12 + φ23 − φ13`, wrapped to `[0, 2π)`.
    pub fn loop_phase(&self) -> f64 {
        crate::wrap_2pi(self.phi12 + self.phi23 - self.phi13)
    }

    pub fn sum_sq(&self) -> f64 {
        self.omega12 * self.omega12 + self.omega23 * self.omega23 + self.omega13 * self.omega13
    }
}

/// Decay and decoherence rates, in units of γ13.
///
/// `gamma_decay` is the spontaneous rate Γ feeding each of |1⟩ and |2⟩ from
/// |3⟩ (total population decay of |3⟩ is 2Γ); the `gammaij` are coherence
/// decay rates with γ13 = 1 by convention.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationConfig {
    pub gamma_decay: f64,
    pub gamma12: f64,
    pub gamma13: f64,
    pub gamma23: f64,
}

impl RelaxationConfig {
    pub fn new(gamma_decay: f64, gamma12: f64, gamma13: f64, gamma23: f64) -> Result<Self> {
        for (field, v) in [
            ("gamma_decay", gamma_decay),
            ("gamma12", gamma12),
            ("gamma13", gamma13),
            ("gamma23", gamma23),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid {
                    field: match field {
                        "gamma_decay" => "gamma_decay",
                        "gamma12" => "gamma12",
                        "gamma13" => "gamma13",
                        _ => "gamma23",
                    },
                    message: format!("rate must be finite and > 0, got {v}"),
                });
            }
        }
        if gamma12 >= 0.1 * gamma13 {
            log::warn!(
                "gamma12 = {gamma12} is not small against gamma13 = {gamma13}; \
                 outside the regime of interest"
            );
        }
        Ok(Self { gamma_decay, gamma12, gamma13, gamma23 })
    }

    /// Defaults used throughout: Γ = 0.5, γ12 = 1e−3, γ13 = 1,
    /// γ23 = (γ13 + γ12)/2.
    pub fn paper_defaults() -> Self {
        let gamma13 = 1.0;
        let gamma12 = 1e-3;
        Self { gamma_decay: 0.5, gamma12, gamma13, gamma23: 0.5 * (gamma13 + gamma12) }
    }
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self::paper_defaults()
    }
}

/// Power-broadened width of the weak-probe response,
/// `Γ_eff = γ12 + Ω23²/γ13`. Distinct from the spontaneous decay Γ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveWidth {
    pub gamma_eff: f64,
}

impl EffectiveWidth {
    pub fn new(relax: &RelaxationConfig, omega23: f64) -> Self {
        Self { gamma_eff: relax.gamma12 + omega23 * omega23 / relax.gamma13 }
    }
}

/// A 3×3 density matrix, validated Hermitian with unit trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(pub Matrix3<C64>);

impl DensityMatrix {
    pub const HERMITICITY_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-12;

    pub fn new(m: Matrix3<C64>) -> Result<Self> {
        let herm = (m - m.adjoint()).norm();
        if herm > Self::HERMITICITY_TOL {
            return Err(Error::Invalid {
                field: "rho",
                message: format!("not Hermitian: ‖ρ − ρ†‖ = {herm:.3e}"),
            });
        }
        let trace = m.trace();
        if (trace - C64::new(1.0, 0.0)).norm() > Self::TRACE_TOL {
            return Err(Error::Invalid { field: "rho", message: format!("trace {trace} ≠ 1") });
        }
        Ok(Self(m))
    }

    /// Pure ground state |1⟩⟨1|.
    pub fn ground() -> Self {
        let mut m = Matrix3::zeros();
        m[(0, 0)] = C64::new(1.0, 0.0);
        Self(m)
    }

    /// Fully mixed state.
    pub fn mixed() -> Self {
        Self(Matrix3::from_diagonal_element(C64::new(1.0 / 3.0, 0.0)))
    }

    /// Eigenvalues of the (Hermitian) matrix, ascending.
    pub fn eigenvalues(&self) -> [f64; 3] {
        hermitian_eigenvalues(&self.0)
    }

    /// Smallest eigenvalue; physical states satisfy `min_eigenvalue ≥ −1e−10`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

/// Eigenvalues of a Hermitian 3×3 complex matrix via the closed-form cubic.
fn hermitian_eigenvalues(m: &Matrix3<C64>) -> [f64; 3] {
    // Shift to zero trace, then reuse the depressed-cubic solver:
    // λ³ − pλ − q with p = tr(A²)/2 and q = det A for traceless Hermitian A.
    let shift = m.trace().re / 3.0;
    let a = m - Matrix3::from_diagonal_element(C64::new(shift, 0.0));
    let p = (a * a).trace().re / 2.0;
    let q = a.determinant().re;
    let mut ev = depressed_cubic_roots(p, q);
    for v in &mut ev {
        *v += shift;
    }
    ev
}

/// Full-frame Hamiltonian with explicit phases on all three couplings.
pub fn build_hamiltonian_full(config: &CouplingConfig) -> Matrix3<C64> {
    let mut h = Matrix3::zeros();
    h[(0, 1)] = C64::from_polar(config.omega12, config.phi12);
    h[(0, 2)] = C64::from_polar(config.omega13, config.phi13);
    h[(1, 2)] = C64::from_polar(config.omega23, config.phi23);
    h[(1, 0)] = h[(0, 1)].conj();
    h[(2, 0)] = h[(0, 2)].conj();
    h[(2, 1)] = h[(1, 2)].conj();
    h
}

/// Gauge-reduced Hamiltonian: the single surviving phase `e^{iΦ}` sits on the
/// (1,2) element, all other couplings real.
pub fn build_hamiltonian_reduced(config: &CouplingConfig) -> Matrix3<C64> {
    let phi = config.loop_phase();
    let mut h = Matrix3::zeros();
    h[(0, 1)] = C64::from_polar(config.omega12, phi);
    h[(0, 2)] = C64::new(config.omega13, 0.0);
    h[(1, 2)] = C64::new(config.omega23, 0.0);
    h[(1, 0)] = h[(0, 1)].conj();
    h[(2, 0)] = h[(0, 2)].conj();
    h[(2, 1)] = h[(1, 2)].conj();
    h
}

/// Roots of `λ³ − p λ − q = 0` with three real solutions (p ≥ 0), ascending.
fn depressed_cubic_roots(p: f64, q: f64) -> [f64; 3] {
    if p <= 0.0 {
        // Reachable only for the all-zero coupling: triple root at 0.
        return [0.0, 0.0, 0.0];
    }
    let a = p / 3.0;
    let sqrt_a = a.sqrt();
    // cos(3φ) = q / (2 a^{3/2}); clamp against rounding at degenerate roots.
    let c = (q / (2.0 * a * sqrt_a)).clamp(-1.0, 1.0);
    let phi = c.acos() / 3.0;
    let mut roots = [
        2.0 * sqrt_a * phi.cos(),
        2.0 * sqrt_a * (phi - 2.0 * PI / 3.0).cos(),
        2.0 * sqrt_a * (phi - 4.0 * PI / 3.0).cos(),
    ];
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots
}

/// The three eigenvalues of the loop Hamiltonian, ascending, from the
/// characteristic cubic `Λ(ΣΩ² − Λ²) + 2 Ω12 Ω23 Ω13 cos Φ = 0` solved by
/// the trigonometric method.
pub fn eigen_spectrum(config: &CouplingConfig) -> [f64; 3] {
    let p = config.sum_sq();
    let q = 2.0 * config.omega12 * config.omega23 * config.omega13 * config.loop_phase().cos();
    depressed_cubic_roots(p, q)
}

/// Residual of one eigenvalue in the characteristic cubic, relative to the
/// coefficient scale.
pub fn spectrum_residual(config: &CouplingConfig, lambda: f64) -> f64 {
    let p = config.sum_sq();
    let q = 2.0 * config.omega12 * config.omega23 * config.omega13 * config.loop_phase().cos();
    let raw = lambda * (p - lambda * lambda) + q;
    let scale = p * p.sqrt() + q.abs();
    if scale == 0.0 {
        raw.abs()
    } else {
        raw.abs() / scale
    }
}

/// Tolerance on `|cos Φ|` for the dark-state condition `Φ = (2n+1)π/2`.
pub const DARK_STATE_COS_TOL: f64 = 1e-9;

/// Zero-eigenvalue dark state, defined when `cos Φ = 0`.
///
/// For `Φ = π/2` this is `(−iΩ23, iΩ13, Ω12)/√(ΣΩ²)`; the `Φ = 3π/2` branch
/// conjugates the phase convention. The global phase is fixed by keeping the
/// |3⟩ amplitude real and non-negative.
pub fn dark_state(config: &CouplingConfig) -> Result<Vector3<C64>> {
    let phi = config.loop_phase();
    if phi.cos().abs() > DARK_STATE_COS_TOL {
        return Err(Error::NoDarkState { cos_phi: phi.cos() });
    }
    let norm_sq = config.sum_sq();
    if norm_sq == 0.0 {
        return Err(Error::Invalid {
            field: "omega",
            message: "all-zero Rabi vector has no dark state".into(),
        });
    }
    let n = norm_sq.sqrt();
    let sign = if phi.sin() >= 0.0 { 1.0 } else { -1.0 };
    Ok(Vector3::new(
        C64::new(0.0, -sign * config.omega23 / n),
        C64::new(0.0, sign * config.omega13 / n),
        C64::new(config.omega12 / n, 0.0),
    ))
}

/// Right-hand side of the optical Bloch equations in the gauge-reduced frame,
/// `ρ̇ = −i[H̃, ρ] + relaxation`.
///
/// `H̃` is the reduced Hamiltonian with the 1↔2 coupling entering as
/// `−Ω12 e^{iΦ}`. That sign convention is the unique one whose weak-probe
/// steady state reproduces [`weak_probe_coherence`] with both terms as
/// written there; with `+Ω12 e^{iΦ}` the loop-scattering term of the
/// coherence comes out negated, which swaps every bright/dark lobe.
///
/// Relaxation: Γρ33 feeds each of ρ̇11 and ρ̇22 (total decay 2Γ out of |3⟩),
/// the γij damp the coherences. `ρ̇33` is set by trace conservation
/// `ρ̇33 = −ρ̇11 − ρ̇22` and the lower triangle by conjugation `ρ̇ji = ρ̇ij*`.
pub fn bloch_rhs(rho: &Matrix3<C64>, config: &CouplingConfig, relax: &RelaxationConfig) -> Matrix3<C64> {
    let mut h = build_hamiltonian_reduced(config);
    h[(0, 1)] = -h[(0, 1)];
    h[(1, 0)] = -h[(1, 0)];
    let comm = h * rho - rho * h;
    let g = relax.gamma_decay;
    let r33 = rho[(2, 2)];

    let minus_i = C64::new(0.0, -1.0);
    let d11 = minus_i * comm[(0, 0)] + g * r33;
    let d22 = minus_i * comm[(1, 1)] + g * r33;
    let d12 = minus_i * comm[(0, 1)] - relax.gamma12 * rho[(0, 1)];
    let d13 = minus_i * comm[(0, 2)] - relax.gamma13 * rho[(0, 2)];
    let d23 = minus_i * comm[(1, 2)] - relax.gamma23 * rho[(1, 2)];

    let mut d = Matrix3::zeros();
    d[(0, 0)] = d11;
    d[(1, 1)] = d22;
    d[(2, 2)] = -d11 - d22;
    d[(0, 1)] = d12;
    d[(0, 2)] = d13;
    d[(1, 2)] = d23;
    d[(1, 0)] = d12.conj();
    d[(2, 0)] = d13.conj();
    d[(2, 1)] = d23.conj();
    d
}

const REAL_VARS: usize = 8;

fn rho_from_vars(x: &SVector<f64, REAL_VARS>) -> Matrix3<C64> {
    let mut m = Matrix3::zeros();
    m[(0, 0)] = C64::new(x[0], 0.0);
    m[(1, 1)] = C64::new(x[1], 0.0);
    m[(2, 2)] = C64::new(1.0 - x[0] - x[1], 0.0);
    m[(0, 1)] = C64::new(x[2], x[3]);
    m[(0, 2)] = C64::new(x[4], x[5]);
    m[(1, 2)] = C64::new(x[6], x[7]);
    m[(1, 0)] = m[(0, 1)].conj();
    m[(2, 0)] = m[(0, 2)].conj();
    m[(2, 1)] = m[(1, 2)].conj();
    m
}

fn vars_from_matrix(m: &Matrix3<C64>) -> SVector<f64, REAL_VARS> {
    SVector::from([
        m[(0, 0)].re,
        m[(1, 1)].re,
        m[(0, 1)].re,
        m[(0, 1)].im,
        m[(0, 2)].re,
        m[(0, 2)].im,
        m[(1, 2)].re,
        m[(1, 2)].im,
    ])
}

/// Steady state of the Bloch equations with unit trace, by dense linear
/// algebra over the 8 independent real variables
/// (ρ11, ρ22, Re/Im ρ12, Re/Im ρ13, Re/Im ρ23).
///
/// The affine map `x ↦ vars(bloch_rhs(ρ(x)))` is extracted column by column
/// from [`bloch_rhs`] itself, so the solved system is exactly the implemented
/// equations, not a re-derivation. All-fields-off input is rank deficient;
/// the documented tie-break returns ρ = diag(1, 0, 0).
pub fn steady_state(config: &CouplingConfig, relax: &RelaxationConfig) -> Result<DensityMatrix> {
    if config.omega12 == 0.0 && config.omega23 == 0.0 && config.omega13 == 0.0 {
        return Ok(DensityMatrix::ground());
    }
    let rhs_vars =
        |x: &SVector<f64, REAL_VARS>| vars_from_matrix(&bloch_rhs(&rho_from_vars(x), config, relax));

    let b = rhs_vars(&SVector::zeros());
    let mut a = SMatrix::<f64, REAL_VARS, REAL_VARS>::zeros();
    for k in 0..REAL_VARS {
        let mut e = SVector::<f64, REAL_VARS>::zeros();
        e[k] = 1.0;
        a.set_column(k, &(rhs_vars(&e) - b));
    }
    let lu = a.lu();
    let x = lu.solve(&(-b)).ok_or(Error::SingularSystem("steady_state Bloch solve"))?;
    let rho = rho_from_vars(&x);
    let residual = bloch_rhs(&rho, config, relax).norm();
    if residual > 1e-10 {
        return Err(Error::SingularSystem("steady_state residual above 1e-10"));
    }
    DensityMatrix::new(rho)
}

/// Lab-frame linear response of the probe coherence to a complex probe
/// amplitude: `γ13 ρ13 = [i γ12 Ω + Ω12 Ω23 e^{i(φ12+φ23)}] / Γ_eff`.
pub fn probe_response(
    probe: C64,
    omega12: f64,
    omega23: f64,
    phi12_plus_phi23: f64,
    relax: &RelaxationConfig,
) -> C64 {
    let gamma_eff = EffectiveWidth::new(relax, omega23).gamma_eff;
    (C64::i() * relax.gamma12 * probe + omega12 * omega23 * C64::from_polar(1.0, phi12_plus_phi23))
        / (relax.gamma13 * gamma_eff)
}

/// Weak-probe probe coherence,
/// `ρ13 = [i γ12 Ω13 + Ω12 Ω23 e^{iΦ}] / (γ13 Γ_eff)`,
/// with `Γ_eff = γ12 + Ω23²/γ13`.
pub fn weak_probe_coherence(config: &CouplingConfig, relax: &RelaxationConfig) -> C64 {
    if config.omega23 > 0.0 && config.omega13 / config.omega23 > 0.1 {
        log::warn!(
            "weak-probe formula applied at Ω13/Ω23 = {:.3}; accuracy degrades above 0.1",
            config.omega13 / config.omega23
        );
    }
    probe_response(
        C64::new(config.omega13, 0.0),
        config.omega12,
        config.omega23,
        config.loop_phase(),
        relax,
    )
}
