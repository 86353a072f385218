//! Eigenstructure over the phase torus and dark-state holonomy.
//!
//! The two controllable phase combinations `u = φ12 + φ23` and `v = φ13`
//! parametrize a torus; the Hamiltonian depends on them only through
//! `Φ = u − v`. Dark states exist on the lines `u − v ≡ π/2, 3π/2`, two
//! disjoint non-contractible loops of homology class (1,1).
//!
//! Transporting the dark state once around a loop by rotating the |1⟩ and
//! |2⟩ amplitude phases through 2π,
//!
//! ```text
//! |D(θ)⟩ = (−i Ω23 e^{iθ}, i Ω13 e^{iθ}, Ω12) / √(ΣΩ²)
//! ```
//!
//! returns it with the geometric phase
//! `γ_B = −2π (Ω23² + Ω13²)/(Ω12² + Ω23² + Ω13²)`, the dynamical phase
//! vanishing because `H′|D⟩ = 0` along the whole path. Three independent
//! routes to γ_B live here: the closed form, a gauge-invariant discrete
//! Wilson loop of state overlaps, and time-dependent adiabatic integration
//! of the Schrödinger equation with the rotating Hamiltonian.

use crate::atomcore::{build_hamiltonian_reduced, dark_state, eigen_spectrum, CouplingConfig};
use crate::{C64, Error, Result};
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// A point on the phase torus: `u = φ12 + φ23 mod 2π`, `v = φ13 mod 2π`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub u: f64,
    pub v: f64,
}

impl TorusPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u: crate::wrap_2pi(u), v: crate::wrap_2pi(v) }
    }

    /// Distance on the flat torus metric.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        let du = crate::circle_distance(self.u, other.u);
        let dv = crate::circle_distance(self.v, other.v);
        (du * du + dv * dv).sqrt()
    }
}

/// Eigenvalue sheets over a `(u, v)` grid, sorted per point.
#[derive(Clone, Debug)]
pub struct SpectrumSurface {
    pub resolution: usize,
    /// Three sheets, each `resolution × resolution`, row-major in `v` then `u`.
    pub sheets: [Vec<f64>; 3],
    /// Interpolated zeros of the middle sheet, one point per crossing.
    pub zero_set: Vec<TorusPoint>,
}

impl SpectrumSurface {
    pub fn value(&self, sheet: usize, iu: usize, iv: usize) -> f64 {
        self.sheets[sheet][iv * self.resolution + iu]
    }

    pub fn axis(&self, k: usize) -> f64 {
        k as f64 / self.resolution as f64 * TAU
    }
}

/// Eigenvalue sheets of the loop Hamiltonian over the phase torus,
/// `Φ = u − v` at each grid point.
pub fn spectrum_surface(magnitudes: &CouplingConfig, resolution: usize) -> Result<SpectrumSurface> {
    if resolution < 16 {
        return Err(Error::Invalid { field: "resolution", message: format!("must be ≥ 16, got {resolution}") });
    }
    let n = resolution;
    let per_point: Vec<[f64; 3]> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (iu, iv) = (idx % n, idx / n);
            let u = iu as f64 / n as f64 * TAU;
            let v = iv as f64 / n as f64 * TAU;
            let c = CouplingConfig { phi12: u, phi23: 0.0, phi13: v, ..*magnitudes };
            eigen_spectrum(&c)
        })
        .collect();
    let mut sheets = [vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]];
    for (idx, ev) in per_point.iter().enumerate() {
        for s in 0..3 {
            sheets[s][idx] = ev[s];
        }
    }
    // Zero crossings of the middle sheet along u-rows, linearly interpolated.
    let mut zero_set = Vec::new();
    for iv in 0..n {
        let v = iv as f64 / n as f64 * TAU;
        for iu in 0..n {
            let a = sheets[1][iv * n + iu];
            let b = sheets[1][iv * n + (iu + 1) % n];
            if a == 0.0 {
                zero_set.push(TorusPoint::new(iu as f64 / n as f64 * TAU, v));
            } else if a * b < 0.0 {
                let t = a / (a - b);
                zero_set.push(TorusPoint::new((iu as f64 + t) / n as f64 * TAU, v));
            }
        }
    }
    Ok(SpectrumSurface { resolution: n, sheets, zero_set })
}

/// One closed polyline on the torus.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TorusLoop {
    pub points: Vec<TorusPoint>,
    /// Homology class: winding numbers around the u and v cycles.
    pub winding: (i64, i64),
}

impl TorusLoop {
    fn diagonal(offset: f64, resolution: usize) -> Self {
        let points = (0..resolution)
            .map(|k| {
                let u = k as f64 / resolution as f64 * TAU;
                TorusPoint::new(u, u - offset)
            })
            .collect();
        Self { points, winding: (1, 1) }
    }

    /// Winding numbers recomputed from the stored points.
    pub fn measured_winding(&self) -> (i64, i64) {
        let mut wu = 0.0;
        let mut wv = 0.0;
        let n = self.points.len();
        for k in 0..n {
            let a = self.points[k];
            let b = self.points[(k + 1) % n];
            wu += crate::wrap_pi(b.u - a.u);
            wv += crate::wrap_pi(b.v - a.v);
        }
        ((wu / TAU).round() as i64, (wv / TAU).round() as i64)
    }
}

/// The two dark-state manifolds `u − v ≡ π/2` and `u − v ≡ 3π/2` as closed
/// polylines; they never intersect (constant separation π in `u − v`).
pub fn dark_manifold(resolution: usize) -> Result<[TorusLoop; 2]> {
    if resolution < 3 {
        return Err(Error::Invalid { field: "resolution", message: format!("must be ≥ 3, got {resolution}") });
    }
    Ok([TorusLoop::diagonal(PI / 2.0, resolution), TorusLoop::diagonal(3.0 * PI / 2.0, resolution)])
}

/// Closed-form Berry phase for one 2π rotation of the dark-state path,
/// `γ_B = −2π (Ω23² + Ω13²)/ΣΩ²`. Raw (not wrapped).
pub fn berry_phase_closed(magnitudes: &CouplingConfig) -> Result<f64> {
    let total = magnitudes.sum_sq();
    if total == 0.0 {
        return Err(Error::Invalid { field: "omega", message: "zero Rabi vector has no Berry phase".into() });
    }
    let num = magnitudes.omega23 * magnitudes.omega23 + magnitudes.omega13 * magnitudes.omega13;
    Ok(-TAU * num / total)
}

/// Dark state at path parameter θ: the |1⟩ and |2⟩ amplitudes carry `e^{iθ}`.
pub fn dark_state_at(magnitudes: &CouplingConfig, theta: f64) -> Result<Vector3<C64>> {
    let base = dark_state(&magnitudes.with_loop_phase(PI / 2.0))?;
    let rot = C64::from_polar(1.0, theta);
    Ok(Vector3::new(base[0] * rot, base[1] * rot, base[2]))
}

/// Gauge-invariant discrete holonomy: `−arg ∏_k ⟨D(θ_k)|D(θ_{k+1})⟩` over the
/// closed path `θ_k = 2πk/n`. Insensitive to any per-sample global phase.
pub fn berry_phase_wilson(magnitudes: &CouplingConfig, n_samples: usize) -> Result<f64> {
    if n_samples < 100 {
        return Err(Error::Invalid { field: "n_samples", message: format!("must be ≥ 100, got {n_samples}") });
    }
    let mut product = C64::new(1.0, 0.0);
    let mut prev = dark_state_at(magnitudes, 0.0)?;
    for k in 1..=n_samples {
        let theta = k as f64 / n_samples as f64 * TAU;
        let next = dark_state_at(magnitudes, theta)?;
        product *= prev.dotc(&next);
        // Renormalize the running product to dodge underflow on long paths.
        let norm = product.norm();
        if norm > 0.0 {
            product /= norm;
        }
        prev = next;
    }
    Ok(-product.arg())
}

/// Result record of a holonomy computation.
///
/// `gamma_closed` and `gamma_wilson` are always filled; the evolution fields
/// are populated by [`adiabatic_evolve`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BerryResult {
    /// Closed-form holonomy, raw (not wrapped).
    pub gamma_closed: f64,
    /// Discrete Wilson-loop holonomy, in `(−π, π]`.
    pub gamma_wilson: f64,
    /// Geometric phase accumulated by time evolution, in `(−π, π]`.
    pub gamma_evolved: f64,
    /// Separately integrated dynamical phase `−∫⟨ψ|H|ψ⟩dt`.
    pub dynamical_phase: f64,
    /// Final overlap `|⟨D(2π)|ψ(T)⟩|²`.
    pub adiabatic_fidelity: f64,
    /// Samples along the loop (Wilson) or time steps (evolution).
    pub loop_samples: usize,
    /// Largest per-step norm drift before renormalization.
    pub norm_drift_max: f64,
    /// Downsampled per-step norm drift diagnostics.
    pub norm_drift: Vec<f64>,
    /// True when the evolution left the adiabatic regime (fidelity < 0.99).
    pub diabatic: bool,
}

impl BerryResult {
    /// Both holonomies reduced to `[0, 2π)`.
    pub fn wrapped(&self) -> (f64, f64) {
        (crate::wrap_2pi(self.gamma_closed), crate::wrap_2pi(self.gamma_wilson))
    }
}

/// Fidelity threshold below which the evolution is flagged diabatic.
pub const ADIABATIC_FIDELITY_THRESHOLD: f64 = 0.99;

/// Hamiltonian of the rotated configuration: the 1↔3 and 2↔3 couplings carry
/// `e^{iθ(t)}` (both beams' phases rotate together), keeping `Φ = π/2` and
/// `|D(θ)⟩` in the kernel at every θ.
pub fn rotated_hamiltonian(magnitudes: &CouplingConfig, theta: f64) -> Matrix3<C64> {
    rotated_hamiltonian_offset(magnitudes, theta, 0.0)
}

/// As [`rotated_hamiltonian`] but with the loop phase held at `π/2 + offset`,
/// modelling an imperfect dark-state preparation.
pub fn rotated_hamiltonian_offset(magnitudes: &CouplingConfig, theta: f64, offset: f64) -> Matrix3<C64> {
    let mut h = build_hamiltonian_reduced(&magnitudes.with_loop_phase(PI / 2.0 + offset));
    let rot = C64::from_polar(1.0, theta);
    h[(0, 2)] *= rot;
    h[(1, 2)] *= rot;
    h[(2, 0)] = h[(0, 2)].conj();
    h[(2, 1)] = h[(1, 2)].conj();
    h
}

/// Integrate `i dψ/dt = H(θ(t)) ψ` over one loop `θ: 0 → 2π` with a linear
/// ramp `θ(t) = 2πt/T`, fixed-step RK4 and per-step renormalization.
///
/// Returns the full [`BerryResult`]: fidelity against `|D(2π)⟩`, accumulated
/// geometric phase `arg⟨D(2π)|ψ(T)⟩ − dynamical`, and the dynamical phase
/// `−∫⟨ψ|H|ψ⟩dt` integrated alongside. A diabatic outcome (fidelity below
/// [`ADIABATIC_FIDELITY_THRESHOLD`]) is flagged, not fatal.
pub fn adiabatic_evolve(magnitudes: &CouplingConfig, total_time: f64, n_steps: usize) -> Result<BerryResult> {
    adiabatic_evolve_offset(magnitudes, 0.0, total_time, n_steps)
}

/// [`adiabatic_evolve`] with the loop phase held at `π/2 + phase_offset`
/// while the start and target states stay on the exact dark manifold. Used
/// to measure the protocol's sensitivity to preparation error.
pub fn adiabatic_evolve_offset(
    magnitudes: &CouplingConfig,
    phase_offset: f64,
    total_time: f64,
    n_steps: usize,
) -> Result<BerryResult> {
    if !(total_time.is_finite() && total_time > 0.0) {
        return Err(Error::Invalid { field: "total_time", message: format!("must be > 0, got {total_time}") });
    }
    if n_steps < 16 {
        return Err(Error::Invalid { field: "n_steps", message: format!("must be ≥ 16, got {n_steps}") });
    }
    let dt = total_time / n_steps as f64;
    let omega_ramp = TAU / total_time;
    let mut psi = dark_state_at(magnitudes, 0.0)?;
    let mut dynamical = 0.0;
    let minus_i = C64::new(0.0, -1.0);
    let rhs = |t: f64, v: &Vector3<C64>| -> Vector3<C64> {
        let h = rotated_hamiltonian_offset(magnitudes, omega_ramp * t, phase_offset);
        (h * v).map(|x| minus_i * x)
    };
    let drift_stride = (n_steps / 1024).max(1);
    let mut norm_drift = Vec::with_capacity(n_steps / drift_stride + 1);
    let mut norm_drift_max = 0.0f64;
    for k in 0..n_steps {
        let t = k as f64 * dt;
        // Dynamical phase by the trapezoid rule on ⟨ψ|H|ψ⟩.
        let h0 = rotated_hamiltonian_offset(magnitudes, omega_ramp * t, phase_offset);
        let h1 = rotated_hamiltonian_offset(magnitudes, omega_ramp * (t + dt), phase_offset);
        let e0 = psi.dotc(&(h0 * psi)).re;

        let k1 = rhs(t, &psi);
        let k2 = rhs(t + 0.5 * dt, &(psi + k1 * C64::new(0.5 * dt, 0.0)));
        let k3 = rhs(t + 0.5 * dt, &(psi + k2 * C64::new(0.5 * dt, 0.0)));
        let k4 = rhs(t + dt, &(psi + k3 * C64::new(dt, 0.0)));
        psi += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);

        let norm = psi.norm();
        let drift = (norm - 1.0).abs();
        norm_drift_max = norm_drift_max.max(drift);
        if k % drift_stride == 0 {
            norm_drift.push(drift);
        }
        psi /= C64::new(norm, 0.0);

        let e1 = psi.dotc(&(h1 * psi)).re;
        dynamical -= 0.5 * (e0 + e1) * dt;
    }
    let target = dark_state_at(magnitudes, TAU)?;
    let overlap = target.dotc(&psi);
    let fidelity = overlap.norm_sqr();
    let total_phase = overlap.arg();
    let gamma_evolved = crate::wrap_pi(total_phase - dynamical);
    let gamma_closed = berry_phase_closed(magnitudes)?;
    let gamma_wilson = berry_phase_wilson(magnitudes, 10_000)?;
    Ok(BerryResult {
        gamma_closed,
        gamma_wilson,
        gamma_evolved,
        dynamical_phase: dynamical,
        adiabatic_fidelity: fidelity,
        loop_samples: n_steps,
        norm_drift_max,
        norm_drift,
        diabatic: fidelity < ADIABATIC_FIDELITY_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mags(o12: f64, o23: f64, o13: f64) -> CouplingConfig {
        CouplingConfig::from_magnitudes(o12, o23, o13).unwrap()
    }

    #[test]
    fn surface_zero_set_on_diagonals() {
        let s = spectrum_surface(&mags(0.1, 5.0, 0.1), 48).unwrap();
        assert!(!s.zero_set.is_empty());
        for p in &s.zero_set {
            let phi = crate::wrap_2pi(p.u - p.v);
            let d = crate::circle_distance(phi, PI / 2.0).min(crate::circle_distance(phi, 3.0 * PI / 2.0));
            assert!(d < 0.35, "zero at Φ = {phi}");
        }
        // Sheets sum to zero and are diagonal-translation invariant.
        for iu in 0..48 {
            for iv in 0..48 {
                let sum: f64 = (0..3).map(|k| s.value(k, iu, iv)).sum();
                assert!(sum.abs() < 1e-10);
                for k in 0..3 {
                    assert!((s.value(k, iu, iv) - s.value(k, (iu + 7) % 48, (iv + 7) % 48)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn equal_magnitudes_touch_at_n_pi() {
        let s = spectrum_surface(&mags(1.0, 1.0, 1.0), 64).unwrap();
        // At Φ = 0 (u = v) the two lower sheets coincide.
        let gap = (0..64).map(|k| (s.value(1, k, k) - s.value(0, k, k)).abs()).fold(f64::INFINITY, f64::min);
        assert!(gap < 1e-10);
        // Unequal magnitudes keep the sheets apart everywhere.
        let s2 = spectrum_surface(&mags(0.1, 5.0, 0.1), 64).unwrap();
        let gap2 =
            (0..64 * 64).map(|i| (s2.sheets[1][i] - s2.sheets[0][i]).abs()).fold(f64::INFINITY, f64::min);
        assert!(gap2 > 1e-3);
    }

    #[test]
    fn manifold_loops_disjoint_and_noncontractible() {
        let loops = dark_manifold(100).unwrap();
        for l in &loops {
            assert_eq!(l.measured_winding(), (1, 1));
            assert_eq!(l.points.len(), 100);
        }
        let mut min_sep = f64::INFINITY;
        for a in &loops[0].points {
            for b in &loops[1].points {
                min_sep = min_sep.min(a.distance(b));
            }
        }
        // Separation π in u−v means ≥ π/√2 on the torus metric.
        assert!(min_sep >= PI / 2.0f64.sqrt() - 0.1, "separation {min_sep}");
    }

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(
            berry_phase_closed(&mags(1.0, 1.0, 1.0)).unwrap(),
            -4.0 * PI / 3.0,
            epsilon = 1e-14
        );
        // Open-Λ limit: −2π ≡ 0 mod 2π.
        let open = berry_phase_closed(&mags(0.0, 1.3, 0.6)).unwrap();
        assert_relative_eq!(open, -TAU, epsilon = 1e-14);
        // No transverse amplitude, no holonomy.
        assert_eq!(berry_phase_closed(&mags(2.0, 0.0, 0.0)).unwrap(), 0.0);
        assert!(berry_phase_closed(&mags(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn wilson_converges_to_closed_form() {
        let m = mags(1.0, 1.0, 1.0);
        let closed = crate::wrap_2pi(berry_phase_closed(&m).unwrap());
        let w = crate::wrap_2pi(berry_phase_wilson(&m, 10_000).unwrap());
        assert!(crate::circle_distance(w, closed) < 1e-4);
        assert_relative_eq!(w, 2.0 * PI / 3.0, epsilon = 1e-4);
        // At least linear convergence across decades of n.
        let errs: Vec<f64> = [100usize, 1000, 10_000]
            .iter()
            .map(|&n| crate::circle_distance(crate::wrap_2pi(berry_phase_wilson(&m, n).unwrap()), closed))
            .collect();
        assert!(errs[0] > 8.0 * errs[1].max(1e-15));
        assert!(errs[1] > 8.0 * errs[2].max(1e-15));
    }

    #[test]
    fn wilson_gauge_invariance_and_reversal() {
        use rand::{Rng, SeedableRng};
        let m = mags(0.5, 1.0, 2.0);
        let n = 400;
        let base = berry_phase_wilson(&m, n).unwrap();

        // Random per-sample global phases cancel in the overlap product
        // (endpoint phases must match since θ = 0 and θ = 2π are the same
        // physical sample).
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let mut product = C64::new(1.0, 0.0);
        let phase0: f64 = rng.gen_range(0.0..TAU);
        let mut prev = dark_state_at(&m, 0.0).unwrap().map(|x| x * C64::from_polar(1.0, phase0));
        for k in 1..=n {
            let theta = k as f64 / n as f64 * TAU;
            let g: f64 = if k == n { phase0 } else { rng.gen_range(0.0..TAU) };
            let next = dark_state_at(&m, theta).unwrap().map(|x| x * C64::from_polar(1.0, g));
            product *= prev.dotc(&next);
            product /= C64::new(product.norm(), 0.0);
            prev = next;
        }
        assert!((crate::wrap_pi(-product.arg() - base)).abs() < 1e-12);

        // Reversed orientation negates the holonomy.
        let mut rev = C64::new(1.0, 0.0);
        let mut p = dark_state_at(&m, TAU).unwrap();
        for k in (0..n).rev() {
            let theta = k as f64 / n as f64 * TAU;
            let nx = dark_state_at(&m, theta).unwrap();
            rev *= p.dotc(&nx);
            p = nx;
        }
        assert!((crate::wrap_pi(-rev.arg() + base)).abs() < 1e-12);
    }

    #[test]
    fn berry_connection_is_constant_along_path() {
        // Central-difference connection i⟨D|∂θD⟩ should not vary with θ.
        let m = mags(0.7, 1.3, 0.4);
        let h = 1e-5;
        let mut samples = Vec::new();
        for k in 0..64 {
            let th = k as f64 / 64.0 * TAU;
            let plus = dark_state_at(&m, th + h).unwrap();
            let minus = dark_state_at(&m, th - h).unwrap();
            let deriv = (plus - minus) / C64::new(2.0 * h, 0.0);
            let conn = (C64::i() * dark_state_at(&m, th).unwrap().dotc(&deriv)).re;
            samples.push(conn);
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let sd = (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / samples.len() as f64).sqrt();
        assert!(sd < 1e-10, "connection std {sd}");
        // The constant equals γ_B / 2π.
        let expect = berry_phase_closed(&m).unwrap() / TAU;
        assert_relative_eq!(mean, expect, max_relative = 1e-6);
    }

    #[test]
    fn holonomy_depends_on_ratios_only() {
        let a = mags(0.8, 1.1, 0.3);
        let b = mags(0.8 * 3.7, 1.1 * 3.7, 0.3 * 3.7);
        assert!((berry_phase_closed(&a).unwrap() - berry_phase_closed(&b).unwrap()).abs() < 1e-12);
        let wa = berry_phase_wilson(&a, 500).unwrap();
        let wb = berry_phase_wilson(&b, 500).unwrap();
        assert!((wa - wb).abs() < 1e-12);
    }

    #[test]
    fn rotated_hamiltonian_annihilates_dark_state() {
        let m = mags(0.6, 1.7, 0.9);
        for k in 0..12 {
            let th = k as f64 / 12.0 * TAU;
            let h = rotated_hamiltonian(&m, th);
            let d = dark_state_at(&m, th).unwrap();
            assert!((h * d).norm() < 1e-12);
        }
        // Gap at Φ = π/2 is √(ΣΩ²).
        let ev = eigen_spectrum(&m.with_loop_phase(PI / 2.0));
        assert_relative_eq!(ev[2], m.sum_sq().sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn adiabatic_loop_recovers_closed_form() {
        // Shortened loop for the unit test; the acceptance suite runs the
        // full T = 2000 point.
        let m = mags(1.0, 1.0, 1.0);
        let r = adiabatic_evolve(&m, 200.0, 20_000).unwrap();
        assert!(r.adiabatic_fidelity > 0.999, "fidelity {}", r.adiabatic_fidelity);
        assert!(!r.diabatic);
        let expect = crate::wrap_2pi(r.gamma_closed);
        assert!(
            crate::circle_distance(crate::wrap_2pi(r.gamma_evolved), expect) < 5e-2,
            "evolved {} closed {}",
            r.gamma_evolved,
            r.gamma_closed
        );
        assert!(r.dynamical_phase.abs() < 1e-2);
        assert!(r.norm_drift_max < 1e-10);
    }

    #[test]
    fn fast_loop_is_flagged_diabatic() {
        let m = mags(1.0, 1.0, 1.0);
        let r = adiabatic_evolve(&m, 1.5, 4_000).unwrap();
        assert!(r.diabatic, "fidelity {}", r.adiabatic_fidelity);
        assert!(r.adiabatic_fidelity < 0.99);
    }

    #[test]
    fn open_lambda_loop_has_trivial_holonomy() {
        let m = mags(0.0, 1.0, 1.0);
        let r = adiabatic_evolve(&m, 300.0, 30_000).unwrap();
        let wrapped = crate::wrap_2pi(r.gamma_evolved);
        assert!(wrapped.min(TAU - wrapped) < 1e-2, "evolved {wrapped}");
        assert!(r.adiabatic_fidelity > 0.999);
    }
}
