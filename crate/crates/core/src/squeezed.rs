//! Atom in broadband minimum-uncertainty squeezed light (the free-field reference):
//!
//! `ρ̇ = (1 − η) D[σ]ρ + (η/4L) D[(L + 1)σ − (L − 1)σ†]ρ`
//!
//! where `L` is the X-quadrature spectrum of the input (`L < 1` squeezed,
//! `L > 1` anti-squeezed) and `1/L` that of Y.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::generator::{AtomModel, BlochGenerator, RateSet};
use crate::pauli::{dissipator, AtomOperator, AtomState, Tangent};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezedBathGenerator {
    eta: f64,
    l: f64,
    bloch: BlochGenerator,
}

fn check_params(eta: f64, l: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(domain("eta", eta, "mode-matching must lie in [0, 1]"));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(domain("L", l, "quadrature spectrum must be positive"));
    }
    Ok(())
}

/// Jump operator `(L + 1)σ − (L − 1)σ†` of the squeezed input.
pub fn squeezed_jump(l: f64) -> AtomOperator {
    AtomOperator::lowering() * (l + 1.0) - AtomOperator::raising() * (l - 1.0)
}

pub fn squeezed_superoperator(eta: f64, l: f64, s: &AtomState) -> Tangent {
    let sigma = AtomOperator::lowering();
    dissipator(&sigma, s) * (1.0 - eta) + dissipator(&squeezed_jump(l), s) * (eta / (4.0 * l))
}

pub fn build_squeezed_generator(eta: f64, l: f64) -> Result<SqueezedBathGenerator> {
    check_params(eta, l)?;
    let bloch = BlochGenerator::from_superoperator(|s| squeezed_superoperator(eta, l, s));
    Ok(SqueezedBathGenerator { eta, l, bloch })
}

impl SqueezedBathGenerator {
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn l(&self) -> f64 {
        self.l
    }
}

fn closed_form_rates(eta: f64, l: f64) -> RateSet {
    let gamma_x = 0.5 * ((1.0 - eta) + eta * l);
    let gamma_y = 0.5 * ((1.0 - eta) + eta / l);
    RateSet {
        gamma_x,
        gamma_y,
        gamma_z: gamma_x + gamma_y,
        c: 1.0,
    }
}

/// `γx = ½[(1 − η) + ηL]`, `γy = ½[(1 − η) + η/L]`, `γz = γx + γy`, `C = 1`.
pub fn squeezed_rates(eta: f64, l: f64) -> Result<RateSet> {
    check_params(eta, l)?;
    Ok(closed_form_rates(eta, l))
}

impl AtomModel for SqueezedBathGenerator {
    fn rates(&self) -> RateSet {
        closed_form_rates(self.eta, self.l)
    }

    fn bloch(&self) -> BlochGenerator {
        self.bloch
    }

    fn mode_matching(&self) -> f64 {
        self.eta
    }
}

/// Conventional `(N, M)` with `L = 2N + 2M + 1`, `M² = N(N + 1)`, `sign M = sign(L − 1)`.
///
/// Writing `L = e^{−2r}` gives `N = sinh²r = (1 − L)²/(4L)` and
/// `M = −sinh r cosh r = (L² − 1)/(4L)`.
pub fn nm_from_l(l: f64) -> Result<(f64, f64)> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(domain("L", l, "quadrature spectrum must be positive"));
    }
    let n = (1.0 - l) * (1.0 - l) / (4.0 * l);
    let m = (l * l - 1.0) / (4.0 * l);
    Ok((n, m))
}

/// Steady state `(0, 0, −1/(γx + γy))`.
pub fn free_steady_state(eta: f64, l: f64) -> Result<AtomState> {
    squeezed_rates(eta, l)?.steady_state()
}

/// Rate report of the free-squeezing model, including `N` and `M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FreeRateReport {
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub gamma_z: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub z_ss: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

impl FreeRateReport {
    pub fn new(eta: f64, l: f64) -> Result<Self> {
        let r = squeezed_rates(eta, l)?;
        let (n, m) = nm_from_l(l)?;
        Ok(FreeRateReport {
            gamma_x: r.gamma_x,
            gamma_y: r.gamma_y,
            gamma_z: r.gamma_z,
            c: r.c,
            z_ss: r.steady_z()?,
            l,
            n,
            m,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_input_gives_natural_rates() {
        let r = squeezed_rates(0.8, 1.0).unwrap();
        assert_eq!((r.gamma_x, r.gamma_y, r.gamma_z, r.c), (0.5, 0.5, 1.0, 1.0));
    }

    #[test]
    fn figure_point_rates() {
        let r = squeezed_rates(0.8, 0.05).unwrap();
        assert!((r.gamma_x - 0.12).abs() < 1e-15);
        assert!((r.gamma_y - 8.1).abs() < 1e-12);
        assert!((r.gamma_z - 8.22).abs() < 1e-12);
        assert_eq!(r.c, 1.0);
    }

    #[test]
    fn nm_examples() {
        assert_eq!(nm_from_l(1.0).unwrap(), (0.0, 0.0));
        let (n, m) = nm_from_l(0.05).unwrap();
        assert!((n - 4.5125).abs() < 1e-12 && (m + 4.9875).abs() < 1e-12);
        let (n, m) = nm_from_l(9.0).unwrap();
        assert!(m > 0.0);
        assert!((2.0 * n + 2.0 * m + 1.0 - 9.0).abs() < 1e-12);
        assert!((m * m - n * (n + 1.0)).abs() < 1e-12);
        assert!(nm_from_l(0.0).is_err());
    }

    #[test]
    fn steady_states() {
        assert_eq!(free_steady_state(0.8, 1.0).unwrap(), AtomState::GROUND);
        assert!((free_steady_state(0.8, 0.05).unwrap().z + 1.0 / 8.22).abs() < 1e-12);
        assert_eq!(free_steady_state(0.0, 0.05).unwrap(), AtomState::GROUND);
    }

    #[test]
    fn rejects_nonpositive_l() {
        assert!(build_squeezed_generator(0.8, 0.0).is_err());
        assert!(build_squeezed_generator(0.8, -1.0).is_err());
        assert!(build_squeezed_generator(1.5, 0.5).is_err());
    }
}
