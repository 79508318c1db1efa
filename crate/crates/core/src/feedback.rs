//! Markovian homodyne-feedback master equation
//!
//! `ρ̇ = D[σ]ρ − iλ[½σy, σρ + ρσ†] + (λ²/ηε) D[½σy]ρ`
//!
//! obtained in the limit of a loop delay much shorter than the atomic lifetime.
//! Every quantity is in units where the longitudinal decay rate is one.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::generator::{AtomModel, BlochGenerator, RateSet};
use crate::pauli::{dissipator, AtomOperator, AtomState, Tangent, C64};

/// Feedback master equation with strength `λ`, mode-matching `η` and detector efficiency `ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeedbackGenerator {
    lambda: f64,
    eta: f64,
    eps: f64,
    bloch: BlochGenerator,
}

pub(crate) fn check_params(lambda: f64, eta: f64, eps: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(domain("eta", eta, "mode-matching must lie in (0, 1]"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(domain("eps", eps, "detector efficiency must lie in (0, 1]"));
    }
    if !lambda.is_finite() || lambda <= -eta {
        return Err(domain("lambda", lambda, "feedback strength must exceed -eta"));
    }
    Ok(())
}

/// Right-hand side of the feedback master equation evaluated term by term.
pub fn feedback_superoperator(lambda: f64, eta: f64, eps: f64, s: &AtomState) -> Tangent {
    let sigma = AtomOperator::lowering();
    let half_sy = AtomOperator::sigma_y() * 0.5;
    let rho = s.to_operator();
    let jump = sigma * rho + rho * sigma.adjoint();
    let cross = half_sy.commutator(&jump) * C64::new(0.0, -lambda);
    dissipator(&sigma, s) + cross.to_tangent() + dissipator(&half_sy, s) * (lambda * lambda / (eta * eps))
}

/// Build the generator; rejects `η ∉ (0,1]`, `ε ∉ (0,1]` and `λ ≤ −η`.
/// Positive `λ` (noise-increasing feedback) is allowed.
pub fn build_generator(lambda: f64, eta: f64, eps: f64) -> Result<FeedbackGenerator> {
    check_params(lambda, eta, eps)?;
    let bloch = BlochGenerator::from_superoperator(|s| feedback_superoperator(lambda, eta, eps, s));
    Ok(FeedbackGenerator { lambda, eta, eps, bloch })
}

impl FeedbackGenerator {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl AtomModel for FeedbackGenerator {
    fn rates(&self) -> RateSet {
        closed_form_rates(self.lambda, self.eta, self.eps)
    }

    fn bloch(&self) -> BlochGenerator {
        self.bloch
    }

    fn mode_matching(&self) -> f64 {
        self.eta
    }
}

fn closed_form_rates(lambda: f64, eta: f64, eps: f64) -> RateSet {
    let gamma_x = 0.5 * (1.0 + 2.0 * lambda + lambda * lambda / (eta * eps));
    let gamma_y = 0.5;
    RateSet {
        gamma_x,
        gamma_y,
        gamma_z: gamma_x + gamma_y,
        c: 1.0 + lambda,
    }
}

/// Closed-form decay rates: `γx = ½[1 + 2λ + λ²/(ηε)]`, `γy = ½`, `γz = γx + γy`, `C = 1 + λ`.
pub fn rates(lambda: f64, eta: f64, eps: f64) -> Result<RateSet> {
    check_params(lambda, eta, eps)?;
    Ok(closed_form_rates(lambda, eta, eps))
}

/// `γx = ½[(1 − η) + η·S]` from the in-loop squeezing `S` at low frequency.
pub fn rates_from_squeezing(s: f64, eta: f64) -> f64 {
    0.5 * ((1.0 - eta) + eta * s)
}

/// Feedback strength minimising `γx`: `λ = −ηε`.
pub fn optimal_lambda(eta: f64, eps: f64) -> f64 {
    -eta * eps
}

/// Steady state `x = y = 0`, `z = −1 + λ²/[2ηε(1 + λ) + λ²]`.
pub fn steady_state(lambda: f64, eta: f64, eps: f64) -> Result<AtomState> {
    let r = rates(lambda, eta, eps)?;
    if !(r.gamma_z > 0.0) {
        return Err(domain("gamma_z", r.gamma_z, "unphysical parameters: no steady state"));
    }
    let l2 = lambda * lambda;
    Ok(AtomState::new(0.0, 0.0, -1.0 + l2 / (2.0 * eta * eps * (1.0 + lambda) + l2)))
}

/// Exact evolution of the Bloch vector under the feedback master equation.
pub fn evolve(gen: &FeedbackGenerator, s0: &AtomState, t: f64) -> Result<AtomState> {
    if !(t >= 0.0) {
        return Err(domain("t", t, "evolution time must be nonnegative"));
    }
    Ok(gen.rates().evolve(s0, t))
}

/// Rate and steady-state report, serialized with keys `gamma_x, gamma_y, gamma_z, C, z_ss`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub gamma_z: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub z_ss: f64,
}

impl RateReport {
    pub fn new(r: &RateSet) -> Result<Self> {
        Ok(RateReport {
            gamma_x: r.gamma_x,
            gamma_y: r.gamma_y,
            gamma_z: r.gamma_z,
            c: r.c,
            z_ss: r.steady_z()?,
        })
    }
}
