//! Two-time correlations and the fluorescence spectrum into the unmatched vacuum modes.
//!
//! The spectrum is normalized as
//!
//! `P(ω) = (1 − η)/(2π) · Re ∫₀^∞ e^{iωτ} <σ†(τ)σ(0)>_ss dτ`,
//!
//! which for the Bloch equations `ẋ = −γx x`, `ẏ = −γy y`, `ż = −γz z − C` gives
//!
//! `P(ω) = (1 − η)(γz − C)/(8πγz) · [γx/(γx² + ω²) + γy/(γy² + ω²)]`.
//!
//! Reading the definition as a two-sided stationary transform
//! `∫_{−∞}^{∞}` instead would double every value; the one-sided form above is
//! the one used throughout.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::feedback::{self, FeedbackGenerator, RateReport};
use crate::generator::{AtomModel, RateSet};
use crate::pauli::{AtomOperator, C64};
use crate::squeezed::{self, FreeRateReport, SqueezedBathGenerator};

/// Values on an ordered grid of angular frequencies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub value: Vec<f64>,
    /// Normalization tag, always `"one-sided-transform"`.
    pub convention: &'static str,
}

pub const ONE_SIDED: &str = "one-sided-transform";

impl Spectrum {
    pub fn new(omega: Vec<f64>, value: Vec<f64>) -> Self {
        Spectrum { omega, value, convention: ONE_SIDED }
    }

    /// Trapezoidal integral over the grid.
    pub fn integrate(&self) -> f64 {
        self.omega
            .windows(2)
            .zip(self.value.windows(2))
            .map(|(w, v)| 0.5 * (w[1] - w[0]) * (v[0] + v[1]))
            .sum()
    }

    pub fn max_abs_diff(&self, other: &Spectrum) -> f64 {
        self.value
            .iter()
            .zip(&other.value)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Value at `ω = 0` if the grid contains it.
    pub fn at_zero(&self) -> Option<f64> {
        self.omega.iter().position(|w| *w == 0.0).map(|k| self.value[k])
    }
}

/// `n` points evenly spaced on `[lo, hi]`, endpoints included.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let mid = (n - 1) as f64;
    (0..n)
        .map(|k| {
            // symmetric construction keeps ω = 0 exact on symmetric grids
            let a = (mid - k as f64) / mid;
            let b = k as f64 / mid;
            let w = a * lo + b * hi;
            if 2 * k + 1 == n && lo == -hi {
                0.0
            } else {
                w
            }
        })
        .collect()
}

/// Grid `ω = s·tan θ` with `θ` uniform on `(−π/2, π/2)`: dense near the line
/// centre, reaching `|ω| ≈ 2ns/π` in the wings.
pub fn tangent_grid(scale: f64, n: usize) -> Vec<f64> {
    let half = std::f64::consts::FRAC_PI_2;
    (0..n)
        .map(|k| {
            let theta = -half + std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
            scale * theta.tan()
        })
        .collect()
}

/// `c(τ) = <σ†(τ)σ(0)>_ss = ¼(1 + z_ss)(e^{−γx τ} + e^{−γy τ})`.
pub fn correlation(rates: &RateSet, z_ss: f64, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(domain("tau", tau, "correlation delay must be nonnegative"));
    }
    Ok(0.25 * (1.0 + z_ss) * ((-rates.gamma_x * tau).exp() + (-rates.gamma_y * tau).exp()))
}

/// Total emitted flux `∫P dω = (1 − η)(γz − C)/(4γz)`.
pub fn total_flux(rates: &RateSet, eta: f64) -> f64 {
    (1.0 - eta) * (rates.gamma_z - rates.c) / (4.0 * rates.gamma_z)
}

fn spectral_weight(rates: &RateSet, eta: f64) -> Result<f64> {
    let excess = rates.gamma_z - rates.c;
    if excess < -1e-12 * rates.gamma_z.abs().max(1.0) || !(rates.gamma_z > 0.0) {
        return Err(domain(
            "gamma_z - C",
            excess,
            "negative spectral weight: parameters do not describe a physical steady state",
        ));
    }
    Ok((1.0 - eta) * excess.max(0.0) / (8.0 * std::f64::consts::PI * rates.gamma_z))
}

/// Closed-form two-Lorentzian spectrum.
pub fn analytic_power_spectrum(rates: &RateSet, eta: f64, grid: &[f64]) -> Result<Spectrum> {
    let w = spectral_weight(rates, eta)?;
    let (gx, gy) = (rates.gamma_x, rates.gamma_y);
    let value = grid
        .iter()
        .map(|o| w * (gx / (gx * gx + o * o) + gy / (gy * gy + o * o)))
        .collect();
    Ok(Spectrum::new(grid.to_vec(), value))
}

/// `<σ†(τ)σ(0)>_ss` on `τ_k = k·dτ`, `k = 0..=n`, by the quantum regression
/// theorem: propagate `σρ_ss` with the model's Bloch generator and take the
/// `σ†` trace.
pub fn regression_correlation<M: AtomModel>(model: &M, dtau: f64, n: usize) -> Result<Vec<C64>> {
    let bloch = model.bloch();
    let rho_ss = bloch.fixed_point()?;
    let b = AtomOperator::lowering() * rho_ss.to_operator();
    // coefficient vector (2b0, 2bx, 2by, 2bz) evolves like (1, x, y, z)
    let mut v = [b.a0 * 2.0, b.ax * 2.0, b.ay * 2.0, b.az * 2.0];
    let step = bloch.propagator(dtau);
    let mut out = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        // Tr[σ†(b0 + b·σ)] = bx + i by
        out.push((v[1] + C64::i() * v[2]) * 0.5);
        let mut next = [C64::new(0.0, 0.0); 4];
        for (r, nx) in next.iter_mut().enumerate() {
            for (c, vc) in v.iter().enumerate() {
                *nx += *vc * step[(r, c)];
            }
        }
        v = next;
    }
    Ok(out)
}

/// Resolution demanded by [`numerical_power_spectrum`]: `τ_max·min γ ≥ 20`
/// and `dτ·max(γ, |ω|) ≤ 0.05`.
pub fn required_resolution(rates: &RateSet, grid: &[f64]) -> (f64, f64) {
    let slow = rates.gamma_x.min(rates.gamma_y);
    let fast = grid
        .iter()
        .map(|w| w.abs())
        .fold(rates.gamma_x.max(rates.gamma_y), f64::max);
    (20.0 / slow, 0.05 / fast)
}

/// One-sided transform of the regression correlation by trapezoidal quadrature
/// on `[0, τ_max]` plus the analytic integral of an exponential fitted to the last
/// two samples.
pub fn numerical_power_spectrum<M: AtomModel + Sync>(
    model: &M,
    grid: &[f64],
    tau_max: f64,
    dtau: f64,
) -> Result<Spectrum> {
    let rates = model.rates();
    let eta = model.mode_matching();
    let (need_tau, need_dtau) = required_resolution(&rates, grid);
    if !(tau_max >= need_tau && dtau <= need_dtau && dtau > 0.0) {
        return Err(Error::UnderResolved {
            tau_max_required: need_tau,
            dtau_required: need_dtau,
        });
    }
    let n = (tau_max / dtau).ceil() as usize;
    let c = regression_correlation(model, dtau, n)?;
    let t_end = n as f64 * dtau;
    let (last, prev) = (c[n], c[n - 1]);
    let kappa = if last.norm() > 0.0 && prev.norm() > 0.0 {
        Some((prev / last).ln() / dtau)
    } else {
        None
    };
    let pref = (1.0 - eta) / (2.0 * std::f64::consts::PI);
    let value = grid
        .par_iter()
        .map(|&w| {
            let rot = C64::from_polar(1.0, w * dtau);
            let mut phase = C64::new(1.0, 0.0);
            let mut acc = c[0] * 0.5;
            for ck in &c[1..n] {
                phase *= rot;
                acc += ck * phase;
            }
            let end_phase = C64::from_polar(1.0, w * t_end);
            acc += last * end_phase * 0.5;
            let mut integral = acc * dtau;
            if let Some(k) = kappa {
                if k.re > 0.0 {
                    integral += last * end_phase / (k - C64::new(0.0, w));
                }
            }
            pref * integral.re
        })
        .collect();
    Ok(Spectrum::new(grid.to_vec(), value))
}

/// Rates of the two models at the comparison point.
#[derive(Clone, Debug, Serialize)]
pub struct Fig2Rates {
    pub eta: f64,
    pub eps: f64,
    pub lambda: f64,
    /// Low-frequency in-loop squeezing, equal to the free-field `L`.
    pub squeezing: f64,
    pub in_loop: RateReport,
    pub free: FreeRateReport,
}

/// Fluorescence spectra of the optimally fed-back atom and of the atom in the
/// equally squeezed free field, on `ω ∈ [−3, 3]` (1201 points).
#[derive(Clone, Debug, Serialize)]
pub struct Fig2Report {
    pub rates: Fig2Rates,
    pub in_loop: Spectrum,
    pub free: Spectrum,
    /// Natural-width Lorentzian `½/(¼ + ω²)` scaled by `natural_scale`.
    pub natural: Spectrum,
    pub natural_scale: f64,
    pub in_loop_numerical: Spectrum,
    pub free_numerical: Spectrum,
}

pub const FIG2_POINTS: usize = 1201;
pub const FIG2_OMEGA_MAX: f64 = 3.0;

impl Fig2Report {
    /// `max |numerical − analytic|` over both curves.
    pub fn numerical_deviation(&self) -> f64 {
        self.in_loop
            .max_abs_diff(&self.in_loop_numerical)
            .max(self.free.max_abs_diff(&self.free_numerical))
    }
}

/// Builds both models at `λ = −ηε`, `L = S = 1 + 2λ/η + λ²/(η²ε)`.
pub fn fig2_report(eta: f64, eps: f64) -> Result<Fig2Report> {
    let lambda = feedback::optimal_lambda(eta, eps);
    let s = crate::loop_field::squeezing_from_lambda(lambda, eta, eps)?;
    let fb: FeedbackGenerator = feedback::build_generator(lambda, eta, eps)?;
    let free: SqueezedBathGenerator = squeezed::build_squeezed_generator(eta, s)?;
    let grid = linear_grid(-FIG2_OMEGA_MAX, FIG2_OMEGA_MAX, FIG2_POINTS);

    let in_loop = analytic_power_spectrum(&fb.rates(), eta, &grid)?;
    let free_spec = analytic_power_spectrum(&free.rates(), eta, &grid)?;
    let p0 = in_loop.at_zero().unwrap_or(0.0);
    let natural_scale = p0 / 2.0;
    let natural = Spectrum::new(
        grid.clone(),
        grid.iter().map(|w| natural_scale * 0.5 / (0.25 + w * w)).collect(),
    );

    let numerics = |rates: &RateSet| {
        let (need_tau, need_dtau) = required_resolution(rates, &grid);
        (3.0 * need_tau, (0.04 * need_dtau / 0.05).min(2e-3))
    };
    let (t1, d1) = numerics(&fb.rates());
    let (t2, d2) = numerics(&free.rates());
    let in_loop_numerical = numerical_power_spectrum(&fb, &grid, t1, d1)?;
    let free_numerical = numerical_power_spectrum(&free, &grid, t2, d2)?;

    Ok(Fig2Report {
        rates: Fig2Rates {
            eta,
            eps,
            lambda,
            squeezing: s,
            in_loop: RateReport::new(&fb.rates())?,
            free: FreeRateReport::new(eta, s)?,
        },
        in_loop,
        free: free_spec,
        natural,
        natural_scale,
        in_loop_numerical,
        free_numerical,
    })
}
