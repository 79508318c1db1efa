//! Two-time correlation by quantum regression and its one-sided transform,
//! compared with the closed forms.

use inloop_atom::feedback;
use inloop_atom::spectra::{
    analytic_power_spectrum, correlation, linear_grid, numerical_power_spectrum, regression_correlation,
    required_resolution,
};
use inloop_atom::AtomModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gen = feedback::build_generator(-0.5, 0.8, 0.9)?;
    let rates = gen.rates();
    let z = gen.steady_state()?.z;

    let dtau = 0.01;
    let c = regression_correlation(&gen, dtau, 500)?;
    println!("{:>6} {:>14} {:>14}", "tau", "regression", "closed form");
    for k in (0..=500).step_by(100) {
        let t = k as f64 * dtau;
        println!("{t:>6.2} {:>14.10} {:>14.10}", c[k].re, correlation(&rates, z, t)?);
    }

    let grid = linear_grid(-3.0, 3.0, 61);
    let (tau_max, step) = required_resolution(&rates, &grid);
    let num = numerical_power_spectrum(&gen, &grid, 2.0 * tau_max, 0.5 * step)?;
    let ana = analytic_power_spectrum(&rates, 0.8, &grid)?;
    println!("\nspectrum on [-3, 3]: max |numerical - analytic| = {:.2e}", num.max_abs_diff(&ana));
    println!("integral over the grid {:.6}", ana.integrate());
    Ok(())
}
