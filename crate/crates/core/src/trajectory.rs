//! Conditioned homodyne trajectories of the in-loop atom with an explicit loop delay.
//!
//! Per step `k` (Itô, feedback evaluated from strictly earlier currents):
//!
//! * `Φ_k = (g/√ε) Σ_j w_j I_{k−j}` (zero until `τ` of history exists)
//! * `I_k = √(ηε) x_k + √ε Φ_k + ΔW_k/dt`
//! * `dρ = D[σ]ρ dt + √(ηε) ΔW_k H[σ]ρ − i[H_fb, ρ] dt`, `H_fb = ½√η Φ_k σy`
//!
//! `Φ` stands for the modulator phase times twice the laser amplitude; the
//! amplitude itself never appears.
//!
//! The classical loop can be advanced on a finer grid `dt/m` than the atom
//! (see [`LoopConfig::loop_substeps`]). The atom then sees the step average of
//! `Φ` and the summed Wiener increment, and the recorded current is the step
//! average, which equals `mean_current(s_k, Φ̄_k) + ΔW_k/dt`. With `m = 1` this
//! is exactly the per-step scheme above.
//!
//! Two discretizations are provided. [`StepScheme::EulerMaruyama`] is the
//! plain increment above. [`StepScheme::Kraus`] applies the same increment as a
//! normalized Kraus map `ρ → (MρM† + (1 − ηε)dt σρσ†)/Tr`, with
//! `M = I − ½σ†σ dt + √(ηε) σ dy`, `dy = √(ηε) x dt + ΔW`, followed by the
//! exact rotation generated by `H_fb`; it agrees with the Itô equation to first
//! order and never leaves the Bloch ball, which the Euler increment does by
//! `O(ηε dt)` whenever the state is close to pure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fit::{fit_exponential_decay, DecayFit};
use crate::loop_field::{DelayLine, LoopConfig};
use crate::pauli::{
    dissipator, hamiltonian_flow, measurement_superop, AtomOperator, AtomState, STOCHASTIC_TOL,
};
use crate::psd::{welch_with_min_segments, WelchPsd};

/// Overshoot above which a step is rejected instead of projected back onto the sphere.
pub const REPAIR_TOL: f64 = STOCHASTIC_TOL;
/// Default guard on `|Φ|`, in units of the open-loop noise scale
/// [`TrajectoryConfig::drive_noise_scale`] (and never below this absolute value).
pub const DEFAULT_DRIVE_GUARD: f64 = 1e3;
/// Decay fits use ensemble means on this window.
pub const FIT_WINDOW: (f64, f64) = (0.5, 3.0);
pub const BOOTSTRAP_RESAMPLES: usize = 100;
const MAX_GROUPS: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepScheme {
    EulerMaruyama,
    #[default]
    Kraus,
}

/// `√(ηε)·x + √ε·Φ`.
pub fn mean_current(s: &AtomState, phi: f64, eta: f64, eps: f64) -> f64 {
    (eta * eps).sqrt() * s.x + eps.sqrt() * phi
}

fn repair(s: AtomState, t: f64) -> Result<AtomState> {
    let n2 = s.norm_sqr();
    if !n2.is_finite() {
        return Err(Error::StepTooLarge { overshoot: n2, t });
    }
    let over = n2 - 1.0;
    if over <= 0.0 {
        Ok(s)
    } else if over <= REPAIR_TOL {
        let k = 1.0 / n2.sqrt();
        Ok(AtomState::new(s.x * k, s.y * k, s.z * k))
    } else {
        Err(Error::StepTooLarge { overshoot: over, t })
    }
}

/// Euler–Maruyama step of the conditioned equation.
///
/// Overshoots of the unit ball up to `1e-6` are projected back; larger ones
/// are reported as [`Error::StepTooLarge`].
pub fn step_conditioned(s: &AtomState, phi: f64, dw: f64, dt: f64, eta: f64, eps: f64) -> Result<AtomState> {
    let sigma = AtomOperator::lowering();
    let h_fb = AtomOperator::sigma_y() * (0.5 * eta.sqrt() * phi);
    let drift = dissipator(&sigma, s) + hamiltonian_flow(&h_fb, s)?;
    let kick = measurement_superop(&sigma, s) * ((eta * eps).sqrt() * dw);
    repair(s.displaced(&drift, dt).displaced(&kick, 1.0), 0.0)
}

/// Positivity-preserving step: normalized Kraus update for damping and
/// measurement, then the exact feedback rotation about y by `√η Φ dt`.
pub fn step_conditioned_kraus(s: &AtomState, phi: f64, dw: f64, dt: f64, eta: f64, eps: f64) -> Result<AtomState> {
    let k2 = eta * eps;
    let k = k2.sqrt();
    let dy = k * s.x * dt + dw;
    // ρ in the (|e>, |g>) basis: a = ρ_ee, d = ρ_gg, b = ρ_eg = (x − iy)/2
    let a = 0.5 * (1.0 + s.z);
    let d = 0.5 * (1.0 - s.z);
    let shrink = 1.0 - 0.5 * dt;
    let ee = shrink * shrink * a;
    let gg = d + k * dy * s.x + (k2 * dy * dy + (1.0 - k2) * dt) * a;
    let tr = ee + gg;
    if !(tr > 0.0) {
        return Err(Error::StepTooLarge { overshoot: f64::INFINITY, t: 0.0 });
    }
    let x = shrink * (s.x + 2.0 * a * k * dy) / tr;
    let y = shrink * s.y / tr;
    let z = (ee - gg) / tr;
    let (sn, cs) = (eta.sqrt() * phi * dt).sin_cos();
    repair(AtomState::new(x * cs + z * sn, y, z * cs - x * sn), 0.0)
}

/// Simulation controls and loop parameters for an ensemble run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    #[serde(rename = "loop")]
    pub loop_cfg: LoopConfig,
    pub dt: f64,
    pub duration: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub initial: AtomState,
    /// Steps between recorded ensemble means.
    pub record_every: usize,
    pub record_current: bool,
    /// Number of trajectories (lowest indices) whose currents feed the PSD.
    pub current_trajectories: usize,
    /// Absolute bound on `|Φ|`; `None` uses [`TrajectoryConfig::effective_drive_guard`].
    pub drive_guard: Option<f64>,
    /// Loop samples per atom step; `None` picks [`LoopConfig::loop_substeps`].
    pub loop_substeps: Option<usize>,
    pub scheme: StepScheme,
}

impl TrajectoryConfig {
    /// Config with default controls: record every `0.01` time units, no current
    /// record, automatic drive guard, Kraus scheme.
    pub fn new(loop_cfg: LoopConfig, dt: f64, duration: f64, n_traj: usize, seed: u64, initial: AtomState) -> Self {
        TrajectoryConfig {
            loop_cfg,
            dt,
            duration,
            n_traj,
            seed,
            initial,
            record_every: ((0.01 / dt).round() as usize).max(1),
            record_current: false,
            current_trajectories: 4,
            drive_guard: None,
            loop_substeps: None,
            scheme: StepScheme::Kraus,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loop_cfg.check_stable()?;
        let tau = self.loop_cfg.filter.tau;
        if !(self.dt > 0.0 && self.dt <= 1e-2) {
            return Err(domain("dt", self.dt, "step must satisfy 0 < dt <= 1e-2"));
        }
        if self.dt > tau / 10.0 * (1.0 + 1e-9) {
            return Err(domain("dt", self.dt, "step must resolve the loop filter (dt <= tau/10)"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(domain("duration", self.duration, "must be positive"));
        }
        if self.n_traj == 0 {
            return Err(domain("n_traj", 0.0, "need at least one trajectory"));
        }
        if self.record_every == 0 {
            return Err(domain("record_every", 0.0, "must be at least 1"));
        }
        if self.loop_substeps == Some(0) {
            return Err(domain("loop_substeps", 0.0, "must be at least 1"));
        }
        if let Some(g) = self.drive_guard {
            if !(g > 0.0) {
                return Err(domain("drive_guard", g, "must be positive"));
            }
        }
        let s = self.initial;
        AtomState::checked(s.x, s.y, s.z, STOCHASTIC_TOL)?;
        let m = self.resolved_loop_substeps()?;
        let d = self.loop_cfg.discrete_stability(self.dt / m as f64);
        if !d.is_stable() {
            return Err(Error::Unstable(format!(
                "g = {} sampled at dt/{m}: {} pole(s) outside the unit circle",
                self.loop_cfg.g, d.unstable_poles
            )));
        }
        Ok(())
    }

    pub fn resolved_loop_substeps(&self) -> Result<usize> {
        match self.loop_substeps {
            Some(m) => Ok(m),
            None => self.loop_cfg.loop_substeps(self.dt),
        }
    }

    /// Standard deviation of the filtered shot noise that the loop feeds back,
    /// `|g|/√ε · (Σ w_j²/dt)^½`; for a rectangular filter `|g|/√(ετ)`.
    pub fn drive_noise_scale(&self) -> f64 {
        let h = self.dt / self.resolved_loop_substeps().unwrap_or(1) as f64;
        let w = self.loop_cfg.filter.bin_weights(h);
        let ss: f64 = w.iter().map(|w| w * w).sum();
        self.loop_cfg.g.abs() / self.loop_cfg.eps.sqrt() * (ss / h).sqrt()
    }

    /// The configured guard, or `1e3 · max(1, drive_noise_scale)`.
    pub fn effective_drive_guard(&self) -> f64 {
        self.drive_guard
            .unwrap_or_else(|| DEFAULT_DRIVE_GUARD * self.drive_noise_scale().max(1.0))
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// `λ = gη/(1 − g)` of the instantaneous-feedback limit.
    pub fn lambda(&self) -> Result<f64> {
        self.loop_cfg.lambda()
    }
}

/// Step-resolution samples of one trajectory's homodyne current and modulator drive.
#[derive(Clone, Debug, Default, Serialize)]
pub struct CurrentRecord {
    pub dt: f64,
    /// `I_k = √(ηε) x_k + √ε Φ_k + ΔW_k/dt`.
    pub current: Vec<f64>,
    /// `Φ_k`, averaged over loop sub-steps.
    pub drive: Vec<f64>,
}

/// States at every `record_every`-th step plus the full current record.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub t: Vec<f64>,
    pub states: Vec<AtomState>,
    pub record: CurrentRecord,
}

struct TrajectoryOutput {
    states: Vec<AtomState>,
    current: Option<CurrentRecord>,
}

fn run_trajectory(
    cfg: &TrajectoryConfig,
    index: usize,
    substeps: usize,
    guard: f64,
    keep_current: bool,
) -> Result<TrajectoryOutput> {
    let LoopConfig { g, eps, eta, ref filter } = cfg.loop_cfg;
    let dt = cfg.dt;
    let h = dt / substeps as f64;
    let steps = cfg.steps();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ index as u64);
    let mut line = DelayLine::new(filter, h);
    let gain = g / eps.sqrt();
    let sqrt_h = h.sqrt();
    let step = match cfg.scheme {
        StepScheme::Kraus => step_conditioned_kraus,
        StepScheme::EulerMaruyama => step_conditioned,
    };
    let mut states = Vec::with_capacity(steps / cfg.record_every + 1);
    let mut current = keep_current.then(|| CurrentRecord {
        dt,
        current: Vec::with_capacity(steps),
        drive: Vec::with_capacity(steps),
    });
    let mut s = cfg.initial;
    for k in 0..steps {
        if k % cfg.record_every == 0 {
            states.push(s);
        }
        let atom_part = (eta * eps).sqrt() * s.x;
        let mut phi_sum = 0.0;
        let mut dw = 0.0;
        for sub in 0..substeps {
            let phi = if line.is_warm() { gain * line.output() } else { 0.0 };
            if !(phi.abs() <= guard) {
                return Err(Error::DriveGuard {
                    drive: phi.abs(),
                    guard,
                    t: (k as f64 + sub as f64 / substeps as f64) * dt,
                });
            }
            let n: f64 = rng.sample(StandardNormal);
            let dwi = n * sqrt_h;
            line.push(atom_part + eps.sqrt() * phi + dwi / h);
            phi_sum += phi;
            dw += dwi;
        }
        let phi = phi_sum / substeps as f64;
        if let Some(c) = current.as_mut() {
            c.current.push(mean_current(&s, phi, eta, eps) + dw / dt);
            c.drive.push(phi);
        }
        s = step(&s, phi, dw, dt, eta, eps).map_err(|e| match e {
            Error::StepTooLarge { overshoot, .. } => Error::StepTooLarge { overshoot, t: k as f64 * dt },
            other => other,
        })?;
    }
    if steps.is_multiple_of(cfg.record_every) {
        states.push(s);
    }
    Ok(TrajectoryOutput { states, current })
}

/// Runs trajectory `index` of the ensemble `cfg` alone, keeping its states and current record.
pub fn simulate_trajectory(cfg: &TrajectoryConfig, index: usize) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let substeps = cfg.resolved_loop_substeps()?;
    let out = run_trajectory(cfg, index, substeps, cfg.effective_drive_guard(), true)?;
    let t = (0..out.states.len())
        .map(|j| (j * cfg.record_every) as f64 * cfg.dt)
        .collect();
    Ok(TrajectoryRecord {
        t,
        states: out.states,
        record: out.current.unwrap_or_default(),
    })
}

/// Per-group sums of the Bloch components and their squares at each record time.
#[derive(Clone, Debug)]
struct GroupSums {
    count: usize,
    sum: [Vec<f64>; 3],
    sum_sq: [Vec<f64>; 3],
}

impl GroupSums {
    fn zeros(points: usize) -> Self {
        GroupSums {
            count: 0,
            sum: std::array::from_fn(|_| vec![0.0; points]),
            sum_sq: std::array::from_fn(|_| vec![0.0; points]),
        }
    }

    fn add_states(&mut self, states: &[AtomState]) {
        self.count += 1;
        for (j, s) in states.iter().enumerate() {
            for (c, v) in [s.x, s.y, s.z].into_iter().enumerate() {
                self.sum[c][j] += v;
                self.sum_sq[c][j] += v * v;
            }
        }
    }

    fn merged(mut self, other: &GroupSums) -> Self {
        self.count += other.count;
        for c in 0..3 {
            for (a, b) in self.sum[c].iter_mut().zip(&other.sum[c]) {
                *a += b;
            }
            for (a, b) in self.sum_sq[c].iter_mut().zip(&other.sum_sq[c]) {
                *a += b;
            }
        }
        self
    }
}

// fixed pairwise tree over the group index range
fn tree_reduce(groups: &[GroupSums]) -> GroupSums {
    match groups.len() {
        1 => groups[0].clone(),
        n => {
            let (l, r) = groups.split_at(n / 2);
            tree_reduce(l).merged(&tree_reduce(r))
        }
    }
}

/// Ensemble means with standard errors, plus optional current spectrum.
#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub t: Vec<f64>,
    /// Means of `x`, `y`, `z`.
    pub mean: [Vec<f64>; 3],
    pub std_err: [Vec<f64>; 3],
    pub n_traj: usize,
    pub current_psd: Option<WelchPsd>,
    groups: Vec<GroupSums>,
    seed: u64,
}

/// Decay rate of one ensemble-mean component with its bootstrap standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub std_err: f64,
    pub fit: DecayFit,
}

/// Runs `n_traj` independent trajectories. The result is bitwise reproducible
/// for fixed `(seed, n_traj, dt)`: trajectory `i` draws from a stream seeded
/// with `seed ^ i`, trajectories are summed in index order inside fixed
/// contiguous groups, and groups are combined by a fixed pairwise tree.
pub fn run_ensemble(cfg: &TrajectoryConfig) -> Result<EnsembleResult> {
    cfg.validate()?;
    let substeps = cfg.resolved_loop_substeps()?;
    let guard = cfg.effective_drive_guard();
    let steps = cfg.steps();
    let points = steps / cfg.record_every + 1;
    let n_groups = cfg.n_traj.min(MAX_GROUPS);
    let bounds: Vec<(usize, usize)> = (0..n_groups)
        .map(|gi| (gi * cfg.n_traj / n_groups, (gi + 1) * cfg.n_traj / n_groups))
        .collect();
    let keep_current = |i: usize| cfg.record_current && i < cfg.current_trajectories;

    let results: Vec<Result<(GroupSums, Vec<(usize, CurrentRecord)>)>> = bounds
        .par_iter()
        .map(|&(lo, hi)| {
            let mut sums = GroupSums::zeros(points);
            let mut currents = Vec::new();
            for i in lo..hi {
                let out = run_trajectory(cfg, i, substeps, guard, keep_current(i))?;
                sums.add_states(&out.states);
                if let Some(c) = out.current {
                    currents.push((i, c));
                }
            }
            Ok((sums, currents))
        })
        .collect();
    let mut groups = Vec::with_capacity(n_groups);
    let mut currents = Vec::new();
    for r in results {
        let (g, c) = r?;
        groups.push(g);
        currents.extend(c);
    }
    let total = tree_reduce(&groups);
    let n = total.count as f64;
    let mean: [Vec<f64>; 3] = std::array::from_fn(|c| total.sum[c].iter().map(|s| s / n).collect());
    let std_err: [Vec<f64>; 3] = std::array::from_fn(|c| {
        total.sum_sq[c]
            .iter()
            .zip(&mean[c])
            .map(|(sq, m)| {
                if total.count < 2 {
                    return f64::NAN;
                }
                let var = ((sq - n * m * m) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect()
    });
    let t = (0..points).map(|j| (j * cfg.record_every) as f64 * cfg.dt).collect();

    let current_psd = if currents.is_empty() {
        None
    } else {
        let psds = currents
            .iter()
            .map(|(_, c)| welch_with_min_segments(&c.current, cfg.dt, 100))
            .collect::<Result<Vec<_>>>()?;
        Some(WelchPsd::average(&psds)?)
    };

    Ok(EnsembleResult {
        t,
        mean,
        std_err,
        n_traj: cfg.n_traj,
        current_psd,
        groups,
        seed: cfg.seed,
    })
}

impl EnsembleResult {
    /// Decay rate of component `c` (0 = x, 1 = y, 2 = z) from a log-linear fit of
    /// its mean over `[lo, hi]`; standard error from 100 bootstrap resamples of
    /// trajectory groups.
    pub fn fit_decay(&self, c: usize, lo: f64, hi: f64) -> Result<RateEstimate> {
        let fit = fit_exponential_decay(&self.t, &self.mean[c], lo, hi)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0xB007_5EED);
        let g = self.groups.len();
        let mut rates = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        for _ in 0..BOOTSTRAP_RESAMPLES {
            let mut acc = vec![0.0; self.t.len()];
            let mut count = 0usize;
            for _ in 0..g {
                let pick = &self.groups[rng.random_range(0..g)];
                count += pick.count;
                for (a, v) in acc.iter_mut().zip(&pick.sum[c]) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a /= count as f64);
            if let Ok(f) = fit_exponential_decay(&self.t, &acc, lo, hi) {
                rates.push(f.rate);
            }
        }
        if rates.len() < 2 {
            return Err(Error::Estimation("bootstrap produced no usable fits".into()));
        }
        let m = rates.iter().sum::<f64>() / rates.len() as f64;
        let var = rates.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / (rates.len() - 1) as f64;
        Ok(RateEstimate {
            rate: fit.rate,
            std_err: var.sqrt(),
            fit,
        })
    }

    /// [`EnsembleResult::fit_decay`] on the default window `[0.5, 3]`.
    pub fn fit_default(&self, c: usize) -> Result<RateEstimate> {
        self.fit_decay(c, FIT_WINDOW.0, FIT_WINDOW.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loop_field::LoopFilter;

    const ETA: f64 = 0.8;
    const EPS: f64 = 0.95;

    fn close(a: &AtomState, b: &AtomState, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol && (a.z - b.z).abs() <= tol
    }

    #[test]
    fn ground_state_is_a_fixed_point() {
        let g = AtomState::GROUND;
        assert_eq!(step_conditioned(&g, 0.0, 0.0, 1e-3, ETA, EPS).unwrap(), g);
        assert!(close(&step_conditioned_kraus(&g, 0.0, 0.0, 1e-3, ETA, EPS).unwrap(), &g, 0.0));
    }

    #[test]
    fn drift_only_step() {
        let dt = 1e-3;
        let s = step_conditioned(&AtomState::new(1.0, 0.0, 0.0), 0.0, 0.0, dt, ETA, EPS).unwrap();
        assert!((s.x - (1.0 - dt / 2.0)).abs() < 1e-15);
        assert!((s.z + dt).abs() < 1e-15);
    }

    #[test]
    fn kraus_step_matches_matrix_route() {
        // brute-force 2×2 Kraus map with explicit matrices
        use nalgebra::Matrix2;
        use num_complex::Complex64 as C;
        let (dt, dw, phi) = (1e-3, 0.021, 3.7);
        let s = AtomState::new(0.3, -0.4, 0.5);
        let k = (ETA * EPS).sqrt();
        let dy = k * s.x * dt + dw;
        let sig = Matrix2::new(C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 0.0));
        let id = Matrix2::<C>::identity();
        let m = id - sig.adjoint() * sig * C::new(0.5 * dt, 0.0) + sig * C::new(k * dy, 0.0);
        let rho = s.to_matrix();
        let mut out = m * rho * m.adjoint() + sig * rho * sig.adjoint() * C::new((1.0 - k * k) * dt, 0.0);
        let tr = out.trace();
        out /= tr;
        let theta = ETA.sqrt() * phi * dt;
        let u = Matrix2::new(
            C::new((theta / 2.0).cos(), 0.0),
            C::new(-(theta / 2.0).sin(), 0.0),
            C::new((theta / 2.0).sin(), 0.0),
            C::new((theta / 2.0).cos(), 0.0),
        );
        let out = u * out * u.adjoint();
        let op = AtomOperator::from_matrix(&out);
        let expect = AtomState::new(2.0 * op.ax.re, 2.0 * op.ay.re, 2.0 * op.az.re);
        let got = step_conditioned_kraus(&s, phi, dw, dt, ETA, EPS).unwrap();
        assert!(close(&got, &expect, 1e-14), "{got:?} vs {expect:?}");
    }

    #[test]
    fn kraus_step_agrees_with_euler_to_first_order() {
        let s = AtomState::new(0.3, -0.4, 0.5);
        for dt in [1e-4f64, 1e-5, 1e-6] {
            let dw = 0.5 * dt.sqrt();
            let a = step_conditioned(&s, 2.0, dw, dt, ETA, EPS).unwrap();
            let b = step_conditioned_kraus(&s, 2.0, dw, dt, ETA, EPS).unwrap();
            // both are consistent with the same Itô increment; differences are O(dW²)
            assert!(close(&a, &b, 10.0 * dt), "dt = {dt}");
        }
    }

    #[test]
    fn euler_overshoot_is_rejected() {
        let e = step_conditioned(&AtomState::new(1.0, 0.0, 0.0), 0.0, 0.3, 1e-3, 1.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::StepTooLarge { .. }));
        // the Kraus form stays physical for the same increment
        let s = step_conditioned_kraus(&AtomState::new(1.0, 0.0, 0.0), 0.0, 0.3, 1e-3, 1.0, 1.0).unwrap();
        assert!(s.norm_sqr() <= 1.0 + 1e-12);
    }

    #[test]
    fn mean_current_examples() {
        assert_eq!(mean_current(&AtomState::GROUND, 0.0, ETA, EPS), 0.0);
        let v = mean_current(&AtomState::new(1.0, 0.0, 0.0), 0.0, ETA, EPS);
        assert!((v - 0.76f64.sqrt()).abs() < 1e-15);
        assert!((v - 0.87178).abs() < 1e-5);
        let v = mean_current(&AtomState::new(0.0, 0.0, 0.0), 1.0, ETA, EPS);
        assert!((v - 0.95f64.sqrt()).abs() < 1e-15);
    }

    fn small_cfg(g: f64, n: usize) -> TrajectoryConfig {
        let lc = LoopConfig::new(g, EPS, ETA, LoopFilter::rectangular(1e-2).unwrap()).unwrap();
        TrajectoryConfig::new(lc, 1e-3, 0.5, n, 42, AtomState::new(1.0, 0.0, 0.0))
    }

    #[test]
    fn ensemble_is_deterministic() {
        let cfg = small_cfg(-4.0, 37);
        let a = run_ensemble(&cfg).unwrap();
        let b = run_ensemble(&cfg).unwrap();
        for c in 0..3 {
            assert_eq!(a.mean[c], b.mean[c]);
            assert_eq!(a.std_err[c], b.std_err[c]);
        }
        let mut other = cfg.clone();
        other.seed = 43;
        assert_ne!(run_ensemble(&other).unwrap().mean[0], a.mean[0]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg(-4.0, 4);
        cfg.dt = 2e-3;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(-4.0, 4);
        cfg.n_traj = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(-4.0, 4);
        cfg.initial = AtomState::new(1.0, 1.0, 0.0);
        assert!(cfg.validate().is_err());
        let unstable = LoopConfig::new(2.0, EPS, ETA, LoopFilter::rectangular(1e-2).unwrap()).unwrap();
        let cfg = TrajectoryConfig::new(unstable, 1e-3, 0.5, 4, 1, AtomState::GROUND);
        assert!(matches!(run_ensemble(&cfg), Err(Error::Unstable(_))));
    }

    #[test]
    fn single_trajectory_matches_ensemble_member() {
        let mut cfg = small_cfg(-4.0, 1);
        cfg.record_every = 1;
        let one = simulate_trajectory(&cfg, 0).unwrap();
        let ens = run_ensemble(&cfg).unwrap();
        assert_eq!(one.states.len(), ens.t.len());
        for (s, x) in one.states.iter().zip(&ens.mean[0]) {
            assert_eq!(s.x, *x);
        }
        assert_eq!(one.record.current.len(), cfg.steps());
        // Φ vanishes until the loop has τ of history
        let warm = (1e-2 / cfg.dt).round() as usize;
        assert!(one.record.drive[..warm].iter().all(|p| *p == 0.0));
        assert!(one.record.drive[warm..].iter().any(|p| *p != 0.0));
    }

    #[test]
    fn drive_guard_aborts() {
        let mut cfg = small_cfg(-19.0, 2);
        cfg.drive_guard = Some(1.0);
        assert!(matches!(run_ensemble(&cfg), Err(Error::DriveGuard { .. })));
    }
}
