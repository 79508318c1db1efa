//! Fitted decay rate of the ensemble-mean coherence as the loop delay shrinks.
//!
//! Usage: `cargo run --release --example markov_limit -- [n_traj]`

use inloop_atom::feedback;
use inloop_atom::loop_field::{LoopConfig, LoopFilter};
use inloop_atom::trajectory::{run_ensemble, TrajectoryConfig};
use inloop_atom::AtomState;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_traj: usize = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(1000);
    let (g, eta, eps) = (-19.0, 0.8, 0.95);
    let target = feedback::rates(-0.76, eta, eps)?.gamma_x;
    println!("{:>8} {:>6} {:>10} {:>10} {:>8}", "tau", "m", "gamma_x", "se", "z-score");
    for tau in [1.0, 0.3, 1e-1, 3e-2, 1e-2, 3e-3, 1e-3] {
        let lc = LoopConfig::new(g, eps, eta, LoopFilter::rectangular(tau)?)?;
        let cfg = TrajectoryConfig::new(lc, 1e-4, 3.0, n_traj, 11, AtomState::new(1.0, 0.0, 0.0));
        let m = cfg.resolved_loop_substeps()?;
        let est = run_ensemble(&cfg)?.fit_default(0)?;
        println!(
            "{tau:>8.0e} {m:>6} {:>10.4} {:>10.4} {:>8.2}",
            est.rate,
            est.std_err,
            (est.rate - target) / est.std_err
        );
    }
    println!("instantaneous-feedback value {target}");
    Ok(())
}
