use thiserror::Error;

/// Errors signalled by the analytic evaluators, the propagators and the
/// stochastic engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A physical parameter is outside its admissible domain.
    #[error("parameter `{name}` = {value} out of domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A Hamiltonian argument was not Hermitian.
    #[error("operator is not Hermitian (anti-Hermitian residue {residue:e})")]
    NotHermitian { residue: f64 },

    /// The closed feedback loop is unstable.
    #[error("feedback loop is unstable: {0}")]
    Unstable(String),

    /// Perfect detection makes the optimal gain diverge.
    #[error("perfect detection: infinite optimal gain")]
    InfiniteOptimalGain,

    /// The feedback strength cannot be reached by any finite gain.
    #[error("unreachable feedback strength: lambda = {lambda} <= -eta = {neg_eta}")]
    UnreachableFeedback { lambda: f64, neg_eta: f64 },

    /// The Euler step left the Bloch ball by more than the repair tolerance.
    #[error("step size too large: purity overshoot {overshoot:e} at t = {t}")]
    StepTooLarge { overshoot: f64, t: f64 },

    /// The feedback drive exceeded its guard during a run.
    #[error("runtime instability: |drive| = {drive:e} exceeds guard {guard:e} at t = {t}")]
    DriveGuard { drive: f64, guard: f64, t: f64 },

    /// Not enough current history to evaluate the filter integral.
    #[error("insufficient history: need {needed} samples, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    /// Quadrature controls of the numerical spectrum are too coarse.
    #[error("under-resolved transform: need tau_max >= {tau_max_required} and dtau <= {dtau_required}")]
    UnderResolved {
        tau_max_required: f64,
        dtau_required: f64,
    },

    /// A fit or estimator had too little usable data.
    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::Domain { name, value, reason }
}
