//! In-loop and photocurrent spectra of the electro-optic loop, its stability
//! margins, and the sampling needed to simulate it.

use inloop_atom::loop_field::{
    homodyne_spectrum, in_loop_spectrum, optimal_gain, squeezing_from_lambda, LoopConfig, LoopFilter,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (eps, eta, tau) = (0.95, 0.8, 1e-3);
    let g = optimal_gain(eps)?;
    let cfg = LoopConfig::new(g, eps, eta, LoopFilter::rectangular(tau)?)?;
    let lambda = cfg.lambda()?;
    println!("optimal gain g = {g}, lambda = {lambda}");
    println!("S_in at low frequency = {}", squeezing_from_lambda(lambda, eta, eps)?);

    let st = cfg.check_stable()?;
    println!(
        "Nyquist: {} encirclements, min |1 - g h| = {:.4}, real-part bound holds: {}",
        st.encirclements, st.min_return_difference, st.real_part_bound
    );
    for dt in [tau / 10.0, tau / 100.0] {
        let d = cfg.discrete_stability(dt);
        println!("sampled at dt = {dt:e}: {} unstable pole(s)", d.unstable_poles);
    }
    println!("loop sub-steps needed at dt = 1e-4: {}", cfg.loop_substeps(1e-4)?);

    println!("\n{:>12} {:>14} {:>14}", "omega*tau", "S_in", "S_hom");
    for wt in [1e-3, 1e-1, 1.0, 3.0, 5.98, 10.0, 100.0, 1e3] {
        let w = wt / tau;
        println!(
            "{wt:>12.3e} {:>14.6e} {:>14.6e}",
            in_loop_spectrum(&cfg, w)?,
            homodyne_spectrum(&cfg, w)?
        );
    }
    Ok(())
}
