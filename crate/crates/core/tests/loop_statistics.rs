//! Monte-Carlo loop records against the exact spectra of the sampled loop.

use inloop_atom::loop_field::{
    in_loop_spectrum, loop_spectra, sampled_loop_spectra, simulate_classical_loop, LoopConfig, LoopFilter,
};
use inloop_atom::psd::{welch, welch_with_min_segments, WelchPsd};
use inloop_atom::Error;

fn rect(g: f64, eps: f64, tau: f64) -> LoopConfig {
    LoopConfig::new(g, eps, 0.8, LoopFilter::rectangular(tau).unwrap()).unwrap()
}

#[test]
fn open_loop_without_losses_is_flat() {
    let cfg = rect(0.0, 1.0, 1.0);
    let dt = 0.1;
    let rec = simulate_classical_loop(&cfg, dt, 1e5, 1).unwrap();
    let psd = welch(&rec.x_in, dt, 64).unwrap();
    let worst = psd.value[1..].iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05, "max deviation from 1: {worst}");
}

#[test]
fn positive_gain_amplifies_noise() {
    let cfg = rect(0.5, 0.95, 1.0);
    let want = (1.0 + 0.25 * (1.0 / 0.95 - 1.0)) / 0.25;
    assert!((in_loop_spectrum(&cfg, 0.0).unwrap() - want).abs() < 1e-12);
    let dt = 0.01;
    let rec = simulate_classical_loop(&cfg, dt, 1e4, 3).unwrap();
    let psd = welch_with_min_segments(&rec.x_in, dt, 100).unwrap();
    let (v, se) = psd.band(0.0, 0.05).unwrap();
    let (exact, _) = sampled_loop_spectra(&cfg, dt, &psd.band_omegas(0.0, 0.05)).unwrap();
    let band_mean = exact.iter().sum::<f64>() / exact.len() as f64;
    assert!((band_mean - want).abs() < 0.01 * want);
    assert!((v - band_mean).abs() < 3.0 * se, "{v} +/- {se} vs {band_mean}");
}

// Per-bin z-scores against the exact spectrum, skipping bins where it changes by
// more than 2 % within two bins (Hann leakage biases those). The error bar is the
// theoretical S·√(1.056/K) of a K-segment Hann/50 % Welch mean: the sample
// standard error of χ²-distributed periodograms shrinks with the estimate itself
// and skews the z-scores.
fn z_scores(psd: &WelchPsd, exact: &[f64]) -> Vec<f64> {
    let rel = (1.056 / psd.segments as f64).sqrt();
    (3..psd.omega.len() - 2)
        .filter(|&k| (k - 2..=k + 2).all(|j| (exact[j] - exact[k]).abs() <= 0.02 * exact[k]))
        .map(|k| (psd.value[k] - exact[k]) / (rel * exact[k]))
        .collect()
}

#[test]
fn welch_estimates_match_sampled_spectra_at_three_sigma() {
    let cfg = rect(-19.0, 0.95, 1.0);
    let dt = 0.01;
    let rec = simulate_classical_loop(&cfg, dt, 1e4, 5).unwrap();
    for (name, signal, pick) in [("in-loop", &rec.x_in, 0), ("homodyne", &rec.current, 1)] {
        let psd = welch_with_min_segments(signal, dt, 100).unwrap();
        let (s_in, s_hom) = sampled_loop_spectra(&cfg, dt, &psd.omega).unwrap();
        let exact = if pick == 0 { s_in } else { s_hom };
        let z = z_scores(&psd, &exact);
        assert!(z.len() > psd.omega.len() / 2, "{name}: only {} usable bins", z.len());
        let outliers = z.iter().filter(|v| v.abs() > 3.0).count();
        let worst = z.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(outliers as f64 <= 0.01 * z.len() as f64 + 1.0, "{name}: {outliers} of {} beyond 3 sigma", z.len());
        assert!(worst < 5.0, "{name}: worst z {worst}");
    }
}

#[test]
fn sampled_spectra_converge_to_continuous_forms() {
    let cfg = rect(-4.0, 0.9, 1.0);
    let grid: Vec<f64> = (1..200).map(|k| k as f64 * 0.05).collect();
    let (c_in, c_hom) = loop_spectra(&cfg, &grid).unwrap();
    let err = |dt: f64| {
        let (s_in, s_hom) = sampled_loop_spectra(&cfg, dt, &grid).unwrap();
        s_in.iter()
            .zip(&c_in)
            .chain(s_hom.iter().zip(&c_hom))
            .map(|(a, b)| (a - b).abs() / b)
            .fold(0.0, f64::max)
    };
    let (e1, e2, e3) = (err(1e-2), err(1e-3), err(1e-4));
    // the sampled loop lags by about half a step, so the error is first order in dt
    assert!(e3 < 2e-3, "{e1} {e2} {e3}");
    assert!(e2 < 0.2 * e1 && e3 < 0.2 * e2, "{e1} {e2} {e3}");
}

#[test]
fn coarse_sampling_of_a_marginal_loop_is_rejected() {
    let cfg = rect(-19.0, 0.95, 1e-3);
    assert!(cfg.stability().is_stable());
    assert!(matches!(simulate_classical_loop(&cfg, 1e-4, 1.0, 1), Err(Error::Unstable(_))));
    assert!(matches!(sampled_loop_spectra(&cfg, 1e-4, &[1.0]), Err(Error::Unstable(_))));
}
