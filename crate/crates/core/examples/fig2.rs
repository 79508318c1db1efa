//! Fluorescence spectra for in-loop and free squeezing at equal squeezing,
//! with two-Lorentzian fits. Writes `fig2.csv` to the directory given as the
//! first argument (default: current directory).

use inloop_atom::fit::fit_two_lorentzians;
use inloop_atom::io::write_csv;
use inloop_atom::spectra::{fig2_report, total_flux};
use inloop_atom::RateSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| ".".into());
    let r = fig2_report(0.8, 0.95)?;
    let q = &r.rates;
    println!("lambda = {}, S = L = {}", q.lambda, q.squeezing);
    println!("in-loop rates: {:?}", q.in_loop);
    println!("free rates:    {:?}", q.free);

    for (label, spec, num) in [("in-loop", &r.in_loop, &r.in_loop_numerical), ("free", &r.free, &r.free_numerical)] {
        let fit = fit_two_lorentzians(&spec.omega, &spec.value)?;
        println!(
            "{label:>8}: P(0) = {:.6}, narrow width {:.5}, broad width {:.4}, regression deviation {:.2e}",
            spec.at_zero().unwrap_or(f64::NAN),
            fit.narrow_width,
            fit.broad_width,
            spec.max_abs_diff(num)
        );
    }
    let fb = RateSet { gamma_x: q.in_loop.gamma_x, gamma_y: q.in_loop.gamma_y, gamma_z: q.in_loop.gamma_z, c: q.in_loop.c };
    println!("in-loop total flux {:.6}", total_flux(&fb, q.eta));

    let path = std::path::Path::new(&out).join("fig2.csv");
    write_csv(
        &path,
        Some(&format!("P_natural scale {}", r.natural_scale)),
        &["omega", "P_inloop", "P_free", "P_natural"],
        &[&r.in_loop.omega, &r.in_loop.value, &r.free.value, &r.natural.value],
    )?;
    println!("wrote {}", path.display());
    Ok(())
}
