//! Electro-optic feedback loop without the atom.
//!
//! The homodyne current `I = √ε X + √(1−ε) ξε` is filtered by a normalized
//! kernel `h(s)` supported on `[0, τ]` and fed back to the modulators with
//! low-frequency round-loop gain `g`. With `h̃(ω) = ∫ h(s) e^{iωs} ds`:
//!
//! * in-loop X spectrum `S_in(ω) = [1 + g²|h̃|²(1/ε − 1)] / |1 − g h̃|²`
//! * photocurrent spectrum `S_hom(ω) = 1 / |1 − g h̃|²`
//!
//! The photocurrent form follows from the white-noise decomposition
//! `Ĩ = [√ε ξ̃ν + √(1−ε) ξ̃ε]/(1 − g h̃)`. Its checks are the limit
//! `S_hom → 0` as `g → −∞`, `S_hom(∞) = 1` and the Monte-Carlo loop.
//!
//! A loop that is stable in continuous time can still be unstable once the
//! current is sampled: the sample-and-hold adds about half a step of lag, which
//! matters when `|g|` is large and the margin is thin. [`discrete_stability`]
//! applies the Nyquist test to the sampled loop.

use std::f64::consts::PI;

use rand::SeedableRng;
use rustfft::FftPlanner;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::pauli::C64;

/// Support length used by [`LoopFilter::single_pole`], in units of the time constant.
pub const SINGLE_POLE_SUPPORT: f64 = 30.0;

/// Shape of the normalized loop kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FilterShape {
    /// `h(s) = 1/τ`.
    Rectangular,
    /// Truncated decaying exponential `h(s) ∝ e^{−s/T}` on `[0, τ]`.
    Exponential { time_constant: f64 },
    /// Piecewise-constant kernel on equal bins of `[0, τ]`.
    Sampled { values: Vec<f64> },
}

/// Normalized loop kernel `h(s) ≥ 0` on `[0, τ]`, `∫ h = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopFilter {
    pub tau: f64,
    pub shape: FilterShape,
}

impl LoopFilter {
    pub fn rectangular(tau: f64) -> Result<Self> {
        Self::new(tau, FilterShape::Rectangular)
    }

    pub fn exponential(tau: f64, time_constant: f64) -> Result<Self> {
        Self::new(tau, FilterShape::Exponential { time_constant })
    }

    /// Single-pole low-pass `e^{−s/T}/T`, truncated at `SINGLE_POLE_SUPPORT·T`.
    pub fn single_pole(time_constant: f64) -> Result<Self> {
        Self::exponential(SINGLE_POLE_SUPPORT * time_constant, time_constant)
    }

    /// Piecewise-constant kernel; `values` are rescaled so that `∫ h = 1`.
    pub fn sampled(tau: f64, values: Vec<f64>) -> Result<Self> {
        Self::new(tau, FilterShape::Sampled { values })
    }

    pub fn new(tau: f64, shape: FilterShape) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(domain("tau", tau, "filter delay must be positive and finite"));
        }
        let shape = match shape {
            FilterShape::Exponential { time_constant } => {
                if !(time_constant > 0.0 && time_constant.is_finite()) {
                    return Err(domain("time_constant", time_constant, "must be positive"));
                }
                FilterShape::Exponential { time_constant }
            }
            FilterShape::Sampled { values } => {
                if values.is_empty() {
                    return Err(domain("values", 0.0, "sampled filter needs at least one bin"));
                }
                if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                    return Err(domain("values", *v, "filter samples must be finite and nonnegative"));
                }
                let total: f64 = values.iter().sum::<f64>() * tau / values.len() as f64;
                if !(total > 0.0) {
                    return Err(domain("values", total, "filter must have positive area"));
                }
                FilterShape::Sampled {
                    values: values.iter().map(|v| v / total).collect(),
                }
            }
            FilterShape::Rectangular => FilterShape::Rectangular,
        };
        Ok(LoopFilter { tau, shape })
    }

    /// Kernel value `h(s)`; zero outside `[0, τ]`.
    pub fn density(&self, s: f64) -> f64 {
        if !(0.0..=self.tau).contains(&s) {
            return 0.0;
        }
        match &self.shape {
            FilterShape::Rectangular => 1.0 / self.tau,
            FilterShape::Exponential { time_constant } => {
                let a = 1.0 / time_constant;
                a * (-a * s).exp() / (-(-a * self.tau).exp_m1())
            }
            FilterShape::Sampled { values } => {
                let n = values.len();
                let k = ((s / self.tau) * n as f64).floor() as usize;
                values[k.min(n - 1)]
            }
        }
    }

    /// Cumulative area `∫₀^s h`.
    pub fn cumulative(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= self.tau {
            return 1.0;
        }
        match &self.shape {
            FilterShape::Rectangular => s / self.tau,
            FilterShape::Exponential { time_constant } => {
                let a = 1.0 / time_constant;
                (-a * s).exp_m1() / (-a * self.tau).exp_m1()
            }
            FilterShape::Sampled { values } => {
                let n = values.len();
                let width = self.tau / n as f64;
                let full = ((s / width).floor() as usize).min(n);
                let mut acc: f64 = values[..full].iter().sum::<f64>() * width;
                if full < n {
                    acc += values[full] * (s - full as f64 * width);
                }
                acc.min(1.0)
            }
        }
    }

    /// `h̃(ω) = ∫₀^τ h(s) e^{iωs} ds`; equals one at `ω = 0`.
    pub fn transfer(&self, omega: f64) -> C64 {
        if omega == 0.0 {
            return C64::new(1.0, 0.0);
        }
        match &self.shape {
            FilterShape::Rectangular => box_average(omega, self.tau),
            FilterShape::Exponential { time_constant } => {
                let a = 1.0 / time_constant;
                let num = C64::new(1.0, 0.0) - (C64::new(-a, omega) * self.tau).exp();
                let norm = -(-a * self.tau).exp_m1();
                num / C64::new(a, -omega) * (a / norm)
            }
            FilterShape::Sampled { values } => {
                let n = values.len();
                let width = self.tau / n as f64;
                let bin = box_average(omega, width) * width;
                values
                    .iter()
                    .enumerate()
                    .map(|(k, v)| C64::from_polar(*v, omega * k as f64 * width) * bin)
                    .sum()
            }
        }
    }

    /// Bin weights `w_j = ∫_{(j−1)dt}^{j dt} h`, `j = 1..=⌈τ/dt⌉`; they sum to one.
    pub fn bin_weights(&self, dt: f64) -> Vec<f64> {
        let n = (self.tau / dt - 1e-9).ceil().max(1.0) as usize;
        let mut prev = 0.0;
        (1..=n)
            .map(|j| {
                let c = if j == n { 1.0 } else { self.cumulative(j as f64 * dt) };
                let w = c - prev;
                prev = c;
                w
            })
            .collect()
    }
}

// (e^{iωw} − 1)/(iωw), the transform of a unit-area box of width w
fn box_average(omega: f64, width: f64) -> C64 {
    let u = omega * width;
    if u.abs() < 1e-4 {
        C64::new(1.0 - u * u / 6.0, u / 2.0 - u * u * u / 24.0)
    } else {
        C64::new(u.sin() / u, (1.0 - u.cos()) / u)
    }
}

/// Classical loop parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// Low-frequency round-loop gain.
    pub g: f64,
    /// Homodyne detection efficiency, in `(0, 1]`.
    pub eps: f64,
    /// Mode-matching of the in-loop beam to the atom, in `(0, 1]`.
    pub eta: f64,
    pub filter: LoopFilter,
}

/// Nyquist analysis of the return difference `1 − g h̃(ω)` on the evaluation grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    /// `g·Re h̃(ω) < 1` everywhere on the grid (sufficient for stability).
    pub real_part_bound: bool,
    /// Net encirclements of the origin by `1 − g h̃(ω)`, `ω ∈ ℝ`.
    pub encirclements: i64,
    /// `min |1 − g h̃(ω)|` on the grid.
    pub min_return_difference: f64,
    /// `|g h̃|` at the top of the grid; must be below one for the grid to be conclusive.
    pub tail_loop_gain: f64,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.encirclements == 0 && self.min_return_difference > 1e-9 && self.tail_loop_gain < 1.0
    }
}

pub const STABILITY_GRID_POINTS: usize = 4096;

/// `ω = 0` plus 4096 log-spaced points on `[10⁻³/τ, 10³/τ]`.
pub fn stability_grid(tau: f64) -> Vec<f64> {
    let n = STABILITY_GRID_POINTS;
    let mut grid = Vec::with_capacity(n + 1);
    grid.push(0.0);
    let (lo, hi) = ((1e-3 / tau).ln(), (1e3 / tau).ln());
    grid.extend((0..n).map(|k| (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp()));
    grid
}

impl LoopConfig {
    pub fn new(g: f64, eps: f64, eta: f64, filter: LoopFilter) -> Result<Self> {
        let cfg = LoopConfig { g, eps, eta, filter };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.g.is_finite() {
            return Err(domain("g", self.g, "gain must be finite"));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(domain("eps", self.eps, "detector efficiency must lie in (0, 1]"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(domain("eta", self.eta, "mode-matching must lie in (0, 1]"));
        }
        LoopFilter::new(self.filter.tau, self.filter.shape.clone()).map(|_| ())
    }

    pub fn stability(&self) -> StabilityReport {
        let grid = stability_grid(self.filter.tau);
        let mut real_part_bound = true;
        let mut min_rd = f64::INFINITY;
        let mut phase = 0.0;
        let mut prev: Option<C64> = None;
        let mut tail = 0.0;
        for &w in &grid {
            let gh = self.filter.transfer(w) * self.g;
            if gh.re >= 1.0 {
                real_part_bound = false;
            }
            let rd = C64::new(1.0, 0.0) - gh;
            min_rd = min_rd.min(rd.norm());
            if let Some(p) = prev {
                phase += (rd / p).arg();
            }
            prev = Some(rd);
            tail = gh.norm();
        }
        // the far tail lies inside the unit disc around 1, so its phase is small;
        // close it to the real axis and double for negative frequencies
        if let Some(p) = prev {
            phase += (C64::new(1.0, 0.0) / p).arg();
        }
        let total = 2.0 * phase / (2.0 * PI);
        StabilityReport {
            real_part_bound,
            encirclements: total.round() as i64,
            min_return_difference: min_rd,
            tail_loop_gain: tail,
        }
    }

    pub fn check_stable(&self) -> Result<StabilityReport> {
        self.validate()?;
        let r = self.stability();
        if r.is_stable() {
            Ok(r)
        } else {
            Err(Error::Unstable(format!(
                "g = {} with tau = {}: {} encirclement(s), min |1 - g h(w)| = {:.3e}, tail |g h| = {:.3e}",
                self.g, self.filter.tau, r.encirclements, r.min_return_difference, r.tail_loop_gain
            )))
        }
    }

    /// `λ = gη/(1 − g)` for this loop.
    pub fn lambda(&self) -> Result<f64> {
        lambda_from_gain(self.g, self.eta)
    }
}

/// Nyquist analysis of the sampled loop `1 − g Σ_j w_j e^{−ijθ}` on the unit circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiscreteStability {
    /// Number of closed-loop poles outside the unit circle.
    pub unstable_poles: i64,
    pub min_return_difference: f64,
}

impl DiscreteStability {
    pub fn is_stable(&self) -> bool {
        self.unstable_poles == 0 && self.min_return_difference > 1e-9
    }
}

/// Nyquist test of the recursion `Φ_k = g Σ_{j=1}^{n} w_j Φ_{k−j}`.
pub fn discrete_stability(weights: &[f64], g: f64) -> DiscreteStability {
    let n = weights.len();
    // fine enough that |Δ(g H)| per sample stays well below the margin
    let m = (64.0 * n as f64 * g.abs().max(1.0)).max(8192.0) as usize;
    let m = m.next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); m];
    for (j, w) in weights.iter().enumerate() {
        buf[j + 1] = C64::new(g * w, 0.0);
    }
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    // buf[k] = g H(e^{iθ_k}), θ_k = 2πk/m; walk θ ∈ [0, π]
    let mut phase = 0.0;
    let mut min_rd = f64::INFINITY;
    let mut prev = C64::new(1.0, 0.0) - buf[0];
    for v in &buf[..=m / 2] {
        let rd = C64::new(1.0, 0.0) - v;
        min_rd = min_rd.min(rd.norm());
        phase += (rd / prev).arg();
        prev = rd;
    }
    // roots outside the circle = −winding of 1 − gH (a polynomial in z⁻¹)
    DiscreteStability {
        unstable_poles: (-2.0 * phase / (2.0 * PI)).round() as i64,
        min_return_difference: min_rd,
    }
}

/// Exact `(S_in, S_hom)` of the loop sampled at `dt`, i.e. with `h̃` replaced by
/// `Σ_j w_j e^{iωj·dt}`. This is what a Welch estimate of
/// [`simulate_classical_loop`] converges to; it tends to the continuous forms as `dt → 0`.
pub fn sampled_loop_spectra(cfg: &LoopConfig, dt: f64, grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = cfg.discrete_stability(dt);
    if !d.is_stable() {
        return Err(Error::Unstable(format!("g = {} sampled at dt = {dt}", cfg.g)));
    }
    let w = cfg.filter.bin_weights(dt);
    Ok(grid
        .iter()
        .map(|&om| {
            let rot = C64::from_polar(1.0, om * dt);
            let mut z = C64::new(1.0, 0.0);
            let mut h = C64::new(0.0, 0.0);
            for wj in &w {
                z *= rot;
                h += z * wj;
            }
            (in_loop_spectrum_at(cfg.g, cfg.eps, h), homodyne_spectrum_at(cfg.g, h))
        })
        .unzip())
}

/// Upper bound on the loop sub-steps searched by [`LoopConfig::loop_substeps`].
pub const MAX_LOOP_SUBSTEPS: usize = 256;

impl LoopConfig {
    /// Nyquist test of this loop sampled at `dt`.
    pub fn discrete_stability(&self, dt: f64) -> DiscreteStability {
        discrete_stability(&self.filter.bin_weights(dt), self.g)
    }

    /// Smallest `m` such that the loop sampled at `dt/m` is stable and keeps at
    /// least three quarters of the continuous loop's minimum return difference.
    pub fn loop_substeps(&self, dt: f64) -> Result<usize> {
        let cont = self.check_stable()?;
        for m in 1..=MAX_LOOP_SUBSTEPS {
            let d = self.discrete_stability(dt / m as f64);
            if d.is_stable() && d.min_return_difference >= 0.75 * cont.min_return_difference {
                return Ok(m);
            }
        }
        Err(Error::Unstable(format!(
            "g = {} with tau = {}: no sampling finer than dt/{MAX_LOOP_SUBSTEPS} reproduces the loop margin",
            self.g, self.filter.tau
        )))
    }
}

/// `S_in` for a given loop response value `h̃`.
pub fn in_loop_spectrum_at(g: f64, eps: f64, h: C64) -> f64 {
    (1.0 + g * g * h.norm_sqr() * (1.0 / eps - 1.0)) / (C64::new(1.0, 0.0) - h * g).norm_sqr()
}

/// `S_hom` for a given loop response value `h̃`.
pub fn homodyne_spectrum_at(g: f64, h: C64) -> f64 {
    1.0 / (C64::new(1.0, 0.0) - h * g).norm_sqr()
}

/// In-loop X-quadrature spectrum; rejects unstable loops.
pub fn in_loop_spectrum(cfg: &LoopConfig, omega: f64) -> Result<f64> {
    cfg.check_stable()?;
    Ok(in_loop_spectrum_at(cfg.g, cfg.eps, cfg.filter.transfer(omega)))
}

/// Closed-loop homodyne photocurrent spectrum; rejects unstable loops.
pub fn homodyne_spectrum(cfg: &LoopConfig, omega: f64) -> Result<f64> {
    cfg.check_stable()?;
    Ok(homodyne_spectrum_at(cfg.g, cfg.filter.transfer(omega)))
}

/// `(S_in, S_hom)` on a frequency grid, checking stability once.
pub fn loop_spectra(cfg: &LoopConfig, grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.check_stable()?;
    Ok(grid
        .iter()
        .map(|&w| {
            let h = cfg.filter.transfer(w);
            (in_loop_spectrum_at(cfg.g, cfg.eps, h), homodyne_spectrum_at(cfg.g, h))
        })
        .unzip())
}

/// Gain minimising the low-frequency in-loop spectrum, `g = −ε/(1 − ε)`; the minimum is `1 − ε`.
pub fn optimal_gain(eps: f64) -> Result<f64> {
    if eps == 1.0 {
        return Err(Error::InfiniteOptimalGain);
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain("eps", eps, "detector efficiency must lie in (0, 1)"));
    }
    Ok(-eps / (1.0 - eps))
}

/// `λ = gη/(1 − g)`, in `(−η, ∞)` for `g < 1`.
pub fn lambda_from_gain(g: f64, eta: f64) -> Result<f64> {
    if !(g < 1.0) {
        return Err(domain("g", g, "low-frequency loop gain must be below 1"));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(domain("eta", eta, "mode-matching must lie in (0, 1]"));
    }
    if g == f64::NEG_INFINITY {
        return Ok(-eta);
    }
    Ok(g * eta / (1.0 - g))
}

/// Inverse of [`lambda_from_gain`]: `g = λ/(η + λ)`.
pub fn gain_from_lambda(lambda: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(domain("eta", eta, "mode-matching must lie in (0, 1]"));
    }
    if !(lambda > -eta) {
        return Err(Error::UnreachableFeedback { lambda, neg_eta: -eta });
    }
    Ok(lambda / (eta + lambda))
}

/// Low-frequency in-loop squeezing `S = 1 + 2λ/η + λ²/(η²ε)`.
pub fn squeezing_from_lambda(lambda: f64, eta: f64, eps: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(domain("eta", eta, "mode-matching must lie in (0, 1]"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(domain("eps", eps, "detector efficiency must lie in (0, 1]"));
    }
    if !(lambda > -eta) {
        return Err(Error::UnreachableFeedback { lambda, neg_eta: -eta });
    }
    Ok(1.0 + 2.0 * lambda / eta + lambda * lambda / (eta * eta * eps))
}

/// Causal discrete loop filter: `Σ_{j≥1} w_j I_{k−j}` over the last `⌈τ/dt⌉` samples.
///
/// Uniform and geometric weight profiles are updated recursively in O(1).
#[derive(Clone, Debug)]
pub struct DelayLine {
    weights: Vec<f64>,
    ring: Vec<f64>,
    head: usize,
    filled: usize,
    mode: DelayMode,
    acc: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum DelayMode {
    Uniform(f64),
    Geometric { first: f64, ratio: f64, last: f64 },
    Direct,
}

impl DelayLine {
    pub fn new(filter: &LoopFilter, dt: f64) -> Self {
        Self::from_weights(filter.bin_weights(dt))
    }

    pub fn from_weights(weights: Vec<f64>) -> Self {
        let n = weights.len();
        let w0 = weights[0];
        // bin weights of a uniform kernel carry O(n·1e-16) relative rounding
        let mode = if weights.iter().all(|w| (w - w0).abs() <= 1e-9 * w0.abs()) {
            DelayMode::Uniform(w0)
        } else if n > 2 && w0 > 0.0 {
            let r = weights[1] / w0;
            let geometric = weights
                .windows(2)
                .all(|p| (p[1] - r * p[0]).abs() <= 1e-9 * p[0].abs());
            if geometric {
                DelayMode::Geometric { first: w0, ratio: r, last: weights[n - 1] }
            } else {
                DelayMode::Direct
            }
        } else {
            DelayMode::Direct
        };
        DelayLine {
            ring: vec![0.0; n],
            weights,
            head: 0,
            filled: 0,
            mode,
            acc: 0.0,
        }
    }

    pub fn taps(&self) -> usize {
        self.weights.len()
    }

    /// True once `⌈τ/dt⌉` samples have been pushed.
    pub fn is_warm(&self) -> bool {
        self.filled >= self.weights.len()
    }

    /// Current filter output over the pushed history (missing samples count as zero).
    pub fn output(&self) -> f64 {
        match self.mode {
            DelayMode::Direct => {
                let n = self.weights.len();
                // ring[head − j] (mod n) holds I_{k−j}
                (1..=n)
                    .map(|j| self.weights[j - 1] * self.ring[(self.head + n - j) % n])
                    .sum()
            }
            _ => self.acc,
        }
    }

    /// Appends `I_k`; afterwards [`DelayLine::output`] is the drive for step `k + 1`.
    pub fn push(&mut self, current: f64) {
        let n = self.weights.len();
        let oldest = self.ring[self.head];
        match self.mode {
            DelayMode::Uniform(w) => self.acc += w * (current - oldest),
            DelayMode::Geometric { first, ratio, last } => {
                self.acc = ratio * (self.acc - last * oldest) + first * current;
            }
            DelayMode::Direct => {}
        }
        self.ring[self.head] = current;
        self.head = (self.head + 1) % n;
        self.filled = (self.filled + 1).min(n);
    }
}

/// Modulator drive `Φ = (g/√ε) Σ_j w_j I_{k−j}` from a causal current history.
///
/// `history` holds the samples strictly before the evaluation step, oldest first.
pub fn feedback_drive(history: &[f64], filter: &LoopFilter, dt: f64, g: f64, eps: f64) -> Result<f64> {
    let w = filter.bin_weights(dt);
    if history.len() < w.len() {
        return Err(Error::InsufficientHistory {
            needed: w.len(),
            available: history.len(),
        });
    }
    let acc: f64 = w
        .iter()
        .zip(history.iter().rev())
        .map(|(w, i)| w * i)
        .sum();
    Ok(g / eps.sqrt() * acc)
}

/// Sampled records of a classical loop run.
#[derive(Clone, Debug, Serialize)]
pub struct LoopRecord {
    pub dt: f64,
    /// In-loop X quadrature, `ξν + Φ`.
    pub x_in: Vec<f64>,
    /// Homodyne photocurrent `√ε X + √(1−ε) ξε`.
    pub current: Vec<f64>,
}

/// Monte-Carlo run of the loop with discrete white noises of variance `1/dt`.
pub fn simulate_classical_loop(cfg: &LoopConfig, dt: f64, duration: f64, seed: u64) -> Result<LoopRecord> {
    cfg.check_stable()?;
    if !(dt > 0.0 && dt <= cfg.filter.tau / 10.0) {
        return Err(domain("dt", dt, "step must resolve the loop filter (dt <= tau/10)"));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(domain("duration", duration, "must be positive"));
    }
    let d = cfg.discrete_stability(dt);
    if !d.is_stable() {
        return Err(Error::Unstable(format!(
            "g = {} sampled at dt = {dt}: {} pole(s) outside the unit circle; reduce dt",
            cfg.g, d.unstable_poles
        )));
    }
    let steps = (duration / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut line = DelayLine::new(&cfg.filter, dt);
    let sd = 1.0 / dt.sqrt();
    let gain = cfg.g / cfg.eps.sqrt();
    let (se, sl) = (cfg.eps.sqrt(), (1.0 - cfg.eps).sqrt());
    let mut x_in = Vec::with_capacity(steps);
    let mut current = Vec::with_capacity(steps);
    for _ in 0..steps {
        let vac: f64 = StandardNormal.sample(&mut rng);
        let det: f64 = StandardNormal.sample(&mut rng);
        let phi = if line.is_warm() { gain * line.output() } else { 0.0 };
        let x = vac * sd + phi;
        let i = se * x + sl * det * sd;
        line.push(i);
        x_in.push(x);
        current.push(i);
    }
    Ok(LoopRecord { dt, x_in, current })
}
