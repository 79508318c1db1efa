//! Two-level atom illuminated by in-loop squeezed light.
//!
//! The crate models an atom whose driving beam is part of an electro-optic
//! homodyne feedback loop and compares it with an atom in free broadband
//! squeezed light:
//!
//! * [`pauli`]: Bloch-vector algebra and the `D[A]`, `H[A]` superoperators.
//! * [`loop_field`]: the classical loop (filter, transfer function, stability,
//!   in-loop and photocurrent spectra, gain/feedback-strength conversions, Monte-Carlo loop).
//! * [`feedback`]: the Markovian feedback master equation, its rates and steady state.
//! * [`squeezed`]: the free squeezed-bath master equation.
//! * [`spectra`]: two-time correlations and the fluorescence spectrum.
//! * [`trajectory`]: conditioned homodyne trajectories with an explicit loop delay.
//!
//! Times are in units of the inverse longitudinal decay rate, frequencies in
//! units of that rate.

pub mod error;
pub mod feedback;
pub mod fit;
pub mod generator;
pub mod io;
pub mod loop_field;
pub mod pauli;
pub mod psd;
pub mod spectra;
pub mod squeezed;
pub mod trajectory;

pub mod cli;

pub use error::{Error, Result};
pub use generator::{AtomModel, BlochGenerator, RateSet};
pub use pauli::{AtomOperator, AtomState};
