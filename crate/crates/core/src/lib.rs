//! Simulation library for a three-level atomic system driven in a closed loop
//! by structured light.
//!
//! A Laguerre-Gaussian probe, a Gaussian (or vortex) pump and a uniform
//! control field couple the levels cyclically, leaving one gauge-invariant
//! loop phase `Φ = φ12 + φ23 − φ13` that cannot be transformed away. The
//! crate computes how that phase imprints bright/dark lobes on the
//! transmitted probe, maps the eigenstructure over the phase torus, and
//! simulates a dark-state Berry-phase measurement protocol end to end.
//!
//! Modules follow the processing pipeline:
//!
//! - [`beamlab`] — LG mode evaluation and field-grid sampling
//! - [`atomcore`] — Hamiltonians, spectra, dark states, Bloch equations
//! - [`propagate`] — probe transmission, intensity/phase maps, lobe analysis
//! - [`holonomy`] — torus spectra, Wilson loops, adiabatic evolution
//! - [`protocol`] — the four-stage Berry-phase measurement simulation
//! - [`artifacts`] — run configs, file formats, manifests
//! - [`acceptance`] — the validation suite exposed to tests and the CLI

pub mod acceptance;
pub mod artifacts;
pub mod atomcore;
pub mod beamlab;
pub mod error;
pub mod holonomy;
pub mod propagate;
pub mod protocol;

pub use error::{Error, Result};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;

/// Wrap an angle to `[0, 2π)`.
pub fn wrap_2pi(angle: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = angle.rem_euclid(tau);
    // rem_euclid can return exactly TAU for tiny negative inputs.
    if w >= tau {
        w - tau
    } else {
        w
    }
}

/// Wrap an angle to `(−π, π]`.
pub fn wrap_pi(angle: f64) -> f64 {
    let w = wrap_2pi(angle);
    if w > std::f64::consts::PI {
        w - std::f64::consts::TAU
    } else {
        w
    }
}

/// Distance between two angles on the circle, in `[0, π]`.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    wrap_pi(a - b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn wrapping() {
        assert_eq!(wrap_2pi(0.0), 0.0);
        assert!((wrap_2pi(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!((wrap_pi(3.0 * PI) - PI).abs() < 1e-12);
        assert!(wrap_2pi(-1e-20) < TAU);
        assert!((circle_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
    }
}
