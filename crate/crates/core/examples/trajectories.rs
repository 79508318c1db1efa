//! Ensemble of conditioned trajectories with a short rectangular loop filter,
//! compared with the instantaneous-feedback decay rates.
//!
//! Usage: `cargo run --release --example trajectories -- [n_traj] [tau]`

use inloop_atom::feedback;
use inloop_atom::loop_field::{LoopConfig, LoopFilter};
use inloop_atom::trajectory::{run_ensemble, TrajectoryConfig};
use inloop_atom::AtomState;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_traj: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(2000);
    let tau: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(1e-3);
    let (g, eta, eps) = (-19.0, 0.8, 0.95);
    let lc = LoopConfig::new(g, eps, eta, LoopFilter::rectangular(tau)?)?;
    let lambda = lc.lambda()?;
    let markov = feedback::rates(lambda, eta, eps)?;
    println!("g = {g}, tau = {tau}, lambda = {lambda:.4}, {n_traj} trajectories");

    for (label, c, s0, target) in [
        ("x", 0, AtomState::new(1.0, 0.0, 0.0), markov.gamma_x),
        ("y", 1, AtomState::new(0.0, 1.0, 0.0), markov.gamma_y),
    ] {
        let cfg = TrajectoryConfig::new(lc.clone(), 1e-4, 3.0, n_traj, 2024, s0);
        let start = std::time::Instant::now();
        let ens = run_ensemble(&cfg)?;
        let est = ens.fit_default(c)?;
        println!(
            "gamma_{label}: {:.4} +/- {:.4}  (Markov limit {:.4}, {:.1} s)",
            est.rate,
            est.std_err,
            target,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
