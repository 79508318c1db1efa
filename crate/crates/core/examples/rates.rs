//! Decay rates of the fed-back atom against the atom in free squeezed light
//! with the same low-frequency squeezing.

use inloop_atom::feedback::{self, optimal_lambda};
use inloop_atom::loop_field::squeezing_from_lambda;
use inloop_atom::squeezed::{nm_from_l, squeezed_rates};
use inloop_atom::AtomModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (eta, eps) = (0.8, 0.95);
    println!("{:>8} {:>8} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8}", "lambda", "S", "gx_in", "gy_in", "z_in", "gx_free", "gy_free", "z_free");
    for lambda in [0.0, -0.2, -0.4, -0.6, optimal_lambda(eta, eps), 0.5] {
        let s = squeezing_from_lambda(lambda, eta, eps)?;
        let fb = feedback::rates(lambda, eta, eps)?;
        let free = squeezed_rates(eta, s)?;
        println!(
            "{lambda:>8.3} {s:>8.4} | {:>8.4} {:>8.4} {:>8.4} | {:>8.4} {:>8.4} {:>8.4}",
            fb.gamma_x,
            fb.gamma_y,
            fb.steady_z()?,
            free.gamma_x,
            free.gamma_y,
            free.steady_z()?
        );
    }
    let (n, m) = nm_from_l(0.05)?;
    println!("\nfree field with L = 0.05: N = {n}, M = {m}");

    let gen = feedback::build_generator(optimal_lambda(eta, eps), eta, eps)?;
    println!("drift eigenvalues at optimal feedback: {:?}", gen.bloch().drift_eigenvalues());
    println!("steady state: {:?}", gen.steady_state()?);
    Ok(())
}
