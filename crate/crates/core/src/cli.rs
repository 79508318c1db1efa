//! Command-line front end for the `inloop` binary.
//!
//! Subcommands: `rates`, `loop-spectrum`, `loop-sim`, `spectrum`, `fig2`,
//! `trajectories`. Config files are flat `key = value` text or JSON (see
//! [`crate::io`]); every run that reads a config writes a manifest in the same
//! schema with all defaults filled in, so feeding the manifest back reproduces
//! the outputs byte for byte.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 config parse, 5 parameter domain,
//! 6 loop instability (static check or runtime drive guard). Outputs are only
//! written after every check has passed and the computation has finished.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::Error;
use crate::feedback::{self, RateReport};
use crate::io::{self, IoError};
use crate::loop_field::{
    gain_from_lambda, lambda_from_gain, loop_spectra, simulate_classical_loop, squeezing_from_lambda, FilterShape,
    LoopConfig, LoopFilter,
};
use crate::psd::welch_with_min_segments;
use crate::spectra::{self, analytic_power_spectrum, linear_grid, numerical_power_spectrum, required_resolution};
use crate::squeezed::{self, FreeRateReport};
use crate::trajectory::{run_ensemble, StepScheme, TrajectoryConfig};
use crate::{AtomModel, AtomState};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "INLOOP_OUT_DIR";

pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const PARSE: i32 = 4;
    pub const DOMAIN: i32 = 5;
    pub const UNSTABLE: i32 = 6;
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(IoError),
    Parse(IoError),
    Model(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io(_) => exit::IO,
            CliError::Parse(_) => exit::PARSE,
            CliError::Model(Error::Unstable(_) | Error::DriveGuard { .. }) => exit::UNSTABLE,
            CliError::Model(_) => exit::DOMAIN,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(e) | CliError::Parse(e) => write!(f, "{e}"),
            CliError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io { .. } => CliError::Io(e),
            IoError::Parse { .. } => CliError::Parse(e),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "inloop", version, about = "Two-level atom in in-loop and free squeezed light")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decay rates and steady state of both models, as JSON on stdout.
    Rates(RatesArgs),
    /// Analytic in-loop and photocurrent spectra of a loop config.
    LoopSpectrum(ConfigArgs),
    /// Monte-Carlo run of the classical loop with Welch spectra.
    LoopSim(SeededArgs),
    /// Fluorescence spectrum of one model, analytic and by regression.
    Spectrum(ConfigArgs),
    /// In-loop vs free squeezing fluorescence spectra at equal squeezing.
    Fig2(Fig2Args),
    /// Ensemble of conditioned trajectories with an explicit loop delay.
    Trajectories(SeededArgs),
}

#[derive(Args, Debug)]
struct RatesArgs {
    #[arg(long, allow_hyphen_values = true)]
    eta: f64,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    /// Feedback strength (exclusive with --g).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "g")]
    lambda: Option<f64>,
    /// Round-loop gain (exclusive with --lambda).
    #[arg(long, allow_hyphen_values = true)]
    g: Option<f64>,
    /// Free-field squeezing; defaults to the in-loop squeezing when feedback parameters are given.
    #[arg(long = "L", allow_hyphen_values = true)]
    l: Option<f64>,
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output directory (default: $INLOOP_OUT_DIR, else the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SeededArgs {
    #[arg(long)]
    config: PathBuf,
    /// RNG seed; must agree with a seed given in the config.
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct Fig2Args {
    #[arg(long, default_value_t = 0.8)]
    eta: f64,
    #[arg(long, default_value_t = 0.95)]
    eps: f64,
    /// Config with `eta` and `eps`; overrides the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                exit::USAGE
            } else {
                let _ = write!(stdout, "{text}");
                exit::OK
            };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => exit::OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write) -> CliResult<()> {
    let text = match cmd {
        Command::Rates(a) => cmd_rates(&a)?,
        Command::LoopSpectrum(a) => cmd_loop_spectrum(&io::read_config(&a.config)?, &out_dir(&a.out))?,
        Command::LoopSim(a) => cmd_loop_sim(&io::read_config(&a.config)?, a.seed, &out_dir(&a.out))?,
        Command::Spectrum(a) => cmd_spectrum(&io::read_config(&a.config)?, &out_dir(&a.out))?,
        Command::Fig2(a) => {
            let cfg = match &a.config {
                Some(p) => io::read_config(p)?,
                None => Fig2Config { eta: a.eta, eps: a.eps },
            };
            cmd_fig2(&cfg, &out_dir(&a.out))?
        }
        Command::Trajectories(a) => cmd_trajectories(&io::read_config(&a.config)?, a.seed, &out_dir(&a.out))?,
    };
    writeln!(stdout, "{text}").map_err(|source| {
        CliError::Io(IoError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
    })
}

fn out_dir(a: &OutArgs) -> PathBuf {
    a.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value")
}

/// `rates`: feedback model from `(η, ε, λ | g)`, free model from `(η, L)`.
fn cmd_rates(a: &RatesArgs) -> CliResult<String> {
    let feedback_given = a.eps.is_some() || a.lambda.is_some() || a.g.is_some();
    let mut report = serde_json::Map::new();
    let mut l_default = None;
    if feedback_given {
        let eps = a.eps.ok_or_else(|| CliError::Usage("--eps is required for the feedback model".into()))?;
        let lambda = match (a.lambda, a.g) {
            (Some(l), None) => l,
            (None, Some(g)) => lambda_from_gain(g, a.eta)?,
            _ => return Err(CliError::Usage("give exactly one of --lambda or --g".into())),
        };
        let rates = feedback::rates(lambda, a.eta, eps)?;
        let s = squeezing_from_lambda(lambda, a.eta, eps)?;
        let mut fb = serde_json::to_value(RateReport::new(&rates)?).expect("json");
        fb["lambda"] = json!(lambda);
        fb["g"] = json!(gain_from_lambda(lambda, a.eta)?);
        fb["S"] = json!(s);
        report.insert("feedback".into(), fb);
        if s > 0.0 {
            l_default = Some(s);
        }
    }
    if let Some(l) = a.l.or(l_default) {
        report.insert("free".into(), serde_json::to_value(FreeRateReport::new(a.eta, l)?).expect("json"));
    }
    if report.is_empty() {
        return Err(CliError::Usage(
            "nothing to report: give --eps with --lambda or --g, and/or --L".into(),
        ));
    }
    Ok(pretty(&serde_json::Value::Object(report)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    #[default]
    Rectangular,
    Exponential,
    SinglePole,
    Sampled,
}

/// Loop filter keys shared by the loop and trajectory configs.
fn build_filter(
    kind: FilterKind,
    tau: Option<f64>,
    time_constant: Option<f64>,
    samples: &Option<Vec<f64>>,
) -> CliResult<LoopFilter> {
    let need_tau = || tau.ok_or_else(|| CliError::Usage(format!("filter {kind:?} needs `tau`")));
    let need_tc = || time_constant.ok_or_else(|| CliError::Usage(format!("filter {kind:?} needs `time_constant`")));
    let unused = |what: &str| CliError::Usage(format!("`{what}` does not apply to filter {kind:?}"));
    let f = match kind {
        FilterKind::Rectangular => {
            if time_constant.is_some() {
                return Err(unused("time_constant"));
            }
            if samples.is_some() {
                return Err(unused("samples"));
            }
            LoopFilter::rectangular(need_tau()?)?
        }
        FilterKind::Exponential => {
            if samples.is_some() {
                return Err(unused("samples"));
            }
            LoopFilter::exponential(need_tau()?, need_tc()?)?
        }
        FilterKind::SinglePole => {
            if tau.is_some() {
                return Err(unused("tau"));
            }
            if samples.is_some() {
                return Err(unused("samples"));
            }
            LoopFilter::single_pole(need_tc()?)?
        }
        FilterKind::Sampled => {
            if time_constant.is_some() {
                return Err(unused("time_constant"));
            }
            let values = samples
                .clone()
                .ok_or_else(|| CliError::Usage("filter Sampled needs `samples`".into()))?;
            LoopFilter::sampled(need_tau()?, values)?
        }
    };
    debug_assert!(matches!(
        (&f.shape, kind),
        (FilterShape::Rectangular, FilterKind::Rectangular)
            | (FilterShape::Exponential { .. }, FilterKind::Exponential | FilterKind::SinglePole)
            | (FilterShape::Sampled { .. }, FilterKind::Sampled)
    ));
    Ok(f)
}

fn default_points() -> usize {
    1001
}

fn default_min_segments() -> usize {
    100
}

/// Config of `loop-spectrum`. Grid: `points` log-spaced frequencies on
/// `[omega_min, omega_max]`, by default `[10⁻³/τ, 10³/τ]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpectrumConfig {
    pub g: f64,
    pub eps: f64,
    pub eta: f64,
    #[serde(default)]
    pub filter: FilterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    #[serde(default)]
    pub omega_min: Option<f64>,
    #[serde(default)]
    pub omega_max: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> CliResult<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(CliError::Usage(format!(
            "grid needs 0 < omega_min < omega_max and points >= 2 (got {lo}, {hi}, {n})"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect())
}

pub fn cmd_loop_spectrum(cfg: &LoopSpectrumConfig, out: &Path) -> CliResult<String> {
    let filter = build_filter(cfg.filter, cfg.tau, cfg.time_constant, &cfg.samples)?;
    let lc = LoopConfig::new(cfg.g, cfg.eps, cfg.eta, filter)?;
    let report = lc.check_stable()?;
    let tau = lc.filter.tau;
    let mut manifest = cfg.clone();
    manifest.omega_min = Some(cfg.omega_min.unwrap_or(1e-3 / tau));
    manifest.omega_max = Some(cfg.omega_max.unwrap_or(1e3 / tau));
    let grid = log_grid(manifest.omega_min.unwrap(), manifest.omega_max.unwrap(), cfg.points)?;
    let (s_in, s_hom) = loop_spectra(&lc, &grid)?;

    io::write_csv(&out.join("loop_in_loop_spectrum.csv"), None, &["omega", "value"], &[&grid, &s_in])?;
    io::write_csv(&out.join("loop_homodyne_spectrum.csv"), None, &["omega", "value"], &[&grid, &s_hom])?;
    io::write_json(&out.join("loop_spectrum_manifest.json"), &manifest)?;
    Ok(pretty(&json!({
        "lambda": lc.lambda().ok(),
        "stability": report,
        "in_loop_low_frequency": s_in[0],
        "homodyne_low_frequency": s_hom[0],
    })))
}

/// Config of `loop-sim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSimConfig {
    pub g: f64,
    pub eps: f64,
    pub eta: f64,
    #[serde(default)]
    pub filter: FilterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_min_segments")]
    pub min_segments: usize,
    /// Also write the sampled in-loop record as `t,value`.
    #[serde(default)]
    pub write_record: bool,
}

fn resolve_seed(config: Option<u64>, flag: u64) -> CliResult<u64> {
    match config {
        Some(s) if s != flag => Err(CliError::Usage(format!(
            "--seed {flag} disagrees with seed = {s} in the config"
        ))),
        _ => Ok(flag),
    }
}

pub fn cmd_loop_sim(cfg: &LoopSimConfig, seed: u64, out: &Path) -> CliResult<String> {
    let seed = resolve_seed(cfg.seed, seed)?;
    let filter = build_filter(cfg.filter, cfg.tau, cfg.time_constant, &cfg.samples)?;
    let lc = LoopConfig::new(cfg.g, cfg.eps, cfg.eta, filter)?;
    let rec = simulate_classical_loop(&lc, cfg.dt, cfg.duration, seed)?;
    let psd_in = welch_with_min_segments(&rec.x_in, rec.dt, cfg.min_segments)?;
    let psd_hom = welch_with_min_segments(&rec.current, rec.dt, cfg.min_segments)?;
    let band_hi = 0.1 / lc.filter.tau;
    // summary only; records too short to resolve the band still write their spectra
    let low_in = psd_in.band(0.0, band_hi).ok();
    let low_hom = psd_hom.band(0.0, band_hi).ok();

    let mut manifest = cfg.clone();
    manifest.seed = Some(seed);
    io::write_csv(&out.join("loop_in_loop_psd.csv"), None, &["omega", "value"], &[&psd_in.omega, &psd_in.value])?;
    io::write_csv(&out.join("loop_homodyne_psd.csv"), None, &["omega", "value"], &[&psd_hom.omega, &psd_hom.value])?;
    if cfg.write_record {
        let t: Vec<f64> = (0..rec.x_in.len()).map(|k| k as f64 * rec.dt).collect();
        io::write_csv(&out.join("loop_in_loop_record.csv"), None, &["t", "value"], &[&t, &rec.x_in])?;
    }
    io::write_json(&out.join("loop_sim_manifest.json"), &manifest)?;
    Ok(pretty(&json!({
        "segments": psd_in.segments,
        "band": [0.0, band_hi],
        "in_loop_low_frequency": {"value": low_in.map(|b| b.0), "std_err": low_in.map(|b| b.1),
            "analytic": crate::loop_field::in_loop_spectrum(&lc, 0.0)?},
        "homodyne_low_frequency": {"value": low_hom.map(|b| b.0), "std_err": low_hom.map(|b| b.1),
            "analytic": crate::loop_field::homodyne_spectrum(&lc, 0.0)?},
    })))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Feedback,
    Free,
}

fn default_omega_max() -> f64 {
    spectra::FIG2_OMEGA_MAX
}

fn default_spectrum_points() -> usize {
    spectra::FIG2_POINTS
}

/// Config of `spectrum`. The feedback model takes `eta`, `eps` and one of
/// `lambda`/`g`; the free model takes `eta` and `L`. The grid is linear on
/// `[−omega_max, omega_max]`. `tau_max`/`dtau` default to three times the
/// required integration window and 80 % of the required step (at most `2e-3`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub model: ModelKind,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    #[serde(default = "default_spectrum_points")]
    pub points: usize,
    #[serde(default)]
    pub tau_max: Option<f64>,
    #[serde(default)]
    pub dtau: Option<f64>,
}

pub fn cmd_spectrum(cfg: &SpectrumConfig, out: &Path) -> CliResult<String> {
    if !(cfg.omega_max > 0.0 && cfg.points >= 2) {
        return Err(CliError::Usage("grid needs omega_max > 0 and points >= 2".into()));
    }
    let grid = linear_grid(-cfg.omega_max, cfg.omega_max, cfg.points);
    let mut manifest = cfg.clone();
    let resolve = |rates: &crate::RateSet, m: &mut SpectrumConfig| {
        let (need_tau, need_dtau) = required_resolution(rates, &grid);
        let tau_max = *m.tau_max.get_or_insert(3.0 * need_tau);
        let dtau = *m.dtau.get_or_insert((0.8 * need_dtau).min(2e-3));
        (tau_max, dtau)
    };
    let (analytic, numerical, rates) = match cfg.model {
        ModelKind::Feedback => {
            if cfg.l.is_some() {
                return Err(CliError::Usage("`L` does not apply to the feedback model".into()));
            }
            let eps = cfg.eps.ok_or_else(|| CliError::Usage("feedback model needs `eps`".into()))?;
            let lambda = match (cfg.lambda, cfg.g) {
                (Some(l), None) => l,
                (None, Some(g)) => lambda_from_gain(g, cfg.eta)?,
                _ => return Err(CliError::Usage("feedback model needs exactly one of `lambda` or `g`".into())),
            };
            let model = feedback::build_generator(lambda, cfg.eta, eps)?;
            let rates = model.rates();
            let (tau_max, dtau) = resolve(&rates, &mut manifest);
            let a = analytic_power_spectrum(&rates, cfg.eta, &grid)?;
            let n = numerical_power_spectrum(&model, &grid, tau_max, dtau)?;
            (a, n, rates)
        }
        ModelKind::Free => {
            if cfg.eps.is_some() || cfg.lambda.is_some() || cfg.g.is_some() {
                return Err(CliError::Usage("the free model takes only `eta` and `L`".into()));
            }
            let l = cfg.l.ok_or_else(|| CliError::Usage("free model needs `L`".into()))?;
            let model = squeezed::build_squeezed_generator(cfg.eta, l)?;
            let rates = model.rates();
            let (tau_max, dtau) = resolve(&rates, &mut manifest);
            let a = analytic_power_spectrum(&rates, cfg.eta, &grid)?;
            let n = numerical_power_spectrum(&model, &grid, tau_max, dtau)?;
            (a, n, rates)
        }
    };
    io::write_csv(
        &out.join("spectrum.csv"),
        Some(analytic.convention),
        &["omega", "P_analytic", "P_numerical"],
        &[&grid, &analytic.value, &numerical.value],
    )?;
    io::write_json(&out.join("spectrum_manifest.json"), &manifest)?;
    Ok(pretty(&json!({
        "rates": rates,
        "total_flux": spectra::total_flux(&rates, cfg.eta),
        "max_abs_deviation": analytic.max_abs_diff(&numerical),
    })))
}

/// Config of `fig2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig2Config {
    pub eta: f64,
    pub eps: f64,
}

pub fn cmd_fig2(cfg: &Fig2Config, out: &Path) -> CliResult<String> {
    let r = spectra::fig2_report(cfg.eta, cfg.eps)?;
    let comment = format!(
        "P_natural = {} * 0.5/(0.25 + omega^2) (peak-matched to P_inloop(0)); {}",
        io::fmt_num(r.natural_scale),
        r.in_loop.convention
    );
    io::write_csv(
        &out.join("fig2.csv"),
        Some(&comment),
        &["omega", "P_inloop", "P_free", "P_natural"],
        &[&r.in_loop.omega, &r.in_loop.value, &r.free.value, &r.natural.value],
    )?;
    io::write_json(&out.join("fig2_rates.json"), &r.rates)?;
    io::write_json(&out.join("fig2_manifest.json"), cfg)?;
    Ok(pretty(&json!({
        "rates": r.rates,
        "natural_scale": r.natural_scale,
        "P_inloop_0": r.in_loop.at_zero(),
        "numerical_max_abs_deviation": r.numerical_deviation(),
    })))
}

fn one() -> f64 {
    1.0
}

fn default_current_trajectories() -> usize {
    4
}

/// Config of `trajectories`. The initial Bloch vector defaults to `(1, 0, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoriesConfig {
    pub g: f64,
    pub eps: f64,
    pub eta: f64,
    #[serde(default)]
    pub filter: FilterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    pub dt: f64,
    pub duration: f64,
    pub n_traj: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub x0: f64,
    #[serde(default)]
    pub y0: f64,
    #[serde(default)]
    pub z0: f64,
    #[serde(default)]
    pub record_every: Option<usize>,
    #[serde(default)]
    pub record_current: bool,
    #[serde(default = "default_current_trajectories")]
    pub current_trajectories: usize,
    #[serde(default)]
    pub drive_guard: Option<f64>,
    #[serde(default)]
    pub loop_substeps: Option<usize>,
    #[serde(default)]
    pub scheme: StepScheme,
}

impl TrajectoriesConfig {
    pub fn to_trajectory_config(&self, seed: u64) -> CliResult<TrajectoryConfig> {
        let filter = build_filter(self.filter, self.tau, self.time_constant, &self.samples)?;
        let lc = LoopConfig::new(self.g, self.eps, self.eta, filter)?;
        let initial = AtomState::new(self.x0, self.y0, self.z0);
        let mut t = TrajectoryConfig::new(lc, self.dt, self.duration, self.n_traj, seed, initial);
        if let Some(r) = self.record_every {
            t.record_every = r;
        }
        t.record_current = self.record_current;
        t.current_trajectories = self.current_trajectories;
        t.drive_guard = self.drive_guard;
        t.loop_substeps = self.loop_substeps;
        t.scheme = self.scheme;
        Ok(t)
    }
}

pub fn cmd_trajectories(cfg: &TrajectoriesConfig, seed: u64, out: &Path) -> CliResult<String> {
    let seed = resolve_seed(cfg.seed, seed)?;
    let mut tc = cfg.to_trajectory_config(seed)?;
    tc.validate()?;
    // pin the resolved controls so the manifest replays the identical run
    tc.loop_substeps = Some(tc.resolved_loop_substeps()?);
    tc.drive_guard = Some(tc.effective_drive_guard());
    let ens = run_ensemble(&tc)?;

    let mut manifest = cfg.clone();
    manifest.seed = Some(seed);
    manifest.record_every = Some(tc.record_every);
    manifest.loop_substeps = tc.loop_substeps;
    manifest.drive_guard = tc.drive_guard;
    io::write_csv(
        &out.join("trajectories_means.csv"),
        None,
        &["t", "x", "y", "z", "se_x", "se_y", "se_z"],
        &[
            &ens.t,
            &ens.mean[0],
            &ens.mean[1],
            &ens.mean[2],
            &ens.std_err[0],
            &ens.std_err[1],
            &ens.std_err[2],
        ],
    )?;
    if let Some(p) = &ens.current_psd {
        io::write_csv(&out.join("trajectories_current_psd.csv"), None, &["omega", "value"], &[&p.omega, &p.value])?;
    }
    io::write_json(&out.join("trajectories_manifest.json"), &manifest)?;

    let fit = |c: usize| ens.fit_default(c).ok().map(|e| json!({"rate": e.rate, "std_err": e.std_err}));
    let markov = feedback::rates(tc.lambda()?, cfg.eta, cfg.eps)?;
    Ok(pretty(&json!({
        "n_traj": ens.n_traj,
        "loop_substeps": tc.loop_substeps,
        "decay_x": fit(0),
        "decay_y": fit(1),
        "markov_rates": markov,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn field(json: &str, path: &[&str]) -> f64 {
        let mut v: serde_json::Value = serde_json::from_str(json).unwrap();
        for p in path {
            v = v[*p].clone();
        }
        v.as_f64().unwrap_or_else(|| panic!("{path:?} missing in {json}"))
    }

    #[test]
    fn rates_from_gain() {
        let (code, out, _) = run_str(&["inloop", "rates", "--eta", "0.8", "--eps", "0.95", "--g", "-19"]);
        assert_eq!(code, 0);
        assert!((field(&out, &["feedback", "gamma_x"]) - 0.12).abs() < 1e-12);
        assert!((field(&out, &["feedback", "gamma_y"]) - 0.5).abs() < 1e-12);
        assert!((field(&out, &["feedback", "S"]) - 0.05).abs() < 1e-12);
        assert!((field(&out, &["free", "gamma_y"]) - 8.1).abs() < 1e-12);
    }

    #[test]
    fn rates_free_only_and_natural() {
        let (code, out, _) = run_str(&["inloop", "rates", "--eta", "0.8", "--L", "0.05"]);
        assert_eq!(code, 0);
        assert!((field(&out, &["free", "gamma_x"]) - 0.12).abs() < 1e-12);
        assert!((field(&out, &["free", "gamma_y"]) - 8.1).abs() < 1e-12);
        let (code, out, _) = run_str(&["inloop", "rates", "--eta", "0.8", "--eps", "0.95", "--lambda", "0"]);
        assert_eq!(code, 0);
        assert_eq!(field(&out, &["feedback", "gamma_x"]), 0.5);
        assert_eq!(field(&out, &["feedback", "gamma_y"]), 0.5);
        assert_eq!(field(&out, &["feedback", "gamma_z"]), 1.0);
    }

    #[test]
    fn rates_usage_errors() {
        let (code, _, err) = run_str(&["inloop", "rates", "--eta", "0.8", "--eps", "0.95", "--g", "-19", "--lambda", "0"]);
        assert_eq!(code, exit::USAGE, "{err}");
        let (code, _, _) = run_str(&["inloop", "rates", "--eta", "0.8", "--eps", "0.95"]);
        assert_eq!(code, exit::USAGE);
        let (code, _, err) = run_str(&["inloop", "rates", "--eta", "0.8", "--eps", "0.95", "--lambda", "-0.9"]);
        assert_eq!(code, exit::DOMAIN, "{err}");
        let (code, _, err) = run_str(&["inloop", "loop-sim"]);
        assert_eq!(code, exit::USAGE);
        assert!(err.contains("Usage"), "{err}");
    }
}
