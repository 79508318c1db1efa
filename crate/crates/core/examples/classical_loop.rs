//! Monte-Carlo run of the classical loop; Welch spectra against the closed forms.

use inloop_atom::loop_field::{homodyne_spectrum, in_loop_spectrum, simulate_classical_loop, LoopConfig, LoopFilter};
use inloop_atom::psd::welch_with_min_segments;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tau = 1.0;
    let cfg = LoopConfig::new(-19.0, 0.95, 0.8, LoopFilter::rectangular(tau)?)?;
    let dt = tau / 100.0;
    let rec = simulate_classical_loop(&cfg, dt, 1e4 * tau, 7)?;
    let s_in = welch_with_min_segments(&rec.x_in, dt, 100)?;
    let s_hom = welch_with_min_segments(&rec.current, dt, 100)?;

    let band = (0.0, 0.1 / tau);
    let (v, se) = s_in.band(band.0, band.1)?;
    println!("S_in  for omega < 0.1/tau: {v:.4} +/- {se:.4} (closed form {:.4})", in_loop_spectrum(&cfg, 0.0)?);
    let (v, se) = s_hom.band(band.0, band.1)?;
    println!("S_hom for omega < 0.1/tau: {v:.5} +/- {se:.5} (closed form {:.5})", homodyne_spectrum(&cfg, 0.0)?);

    println!("\n{:>10} {:>12} {:>12}", "omega", "Welch S_in", "S_in");
    for k in (1..s_in.omega.len()).step_by(s_in.omega.len() / 12) {
        let w = s_in.omega[k];
        println!("{w:>10.4} {:>12.4} {:>12.4}", s_in.value[k], in_loop_spectrum(&cfg, w)?);
    }
    Ok(())
}
