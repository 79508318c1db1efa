//! Welch power-spectral-density estimation for uniformly sampled real records.
//!
//! Normalization: a white-noise record whose samples have variance `1/dt`
//! (the discrete stand-in for unit δ-correlated noise) has a flat spectrum
//! equal to one. Frequencies are angular, `ω_k = 2πk/(N dt)`, reported for
//! `k = 0..=N/2`; the spectrum is two-sided-normalized (not doubled).

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Variance inflation of the Welch mean for a Hann window at 50 % overlap,
/// `1 + 2ρ` with `ρ ≈ 0.028` the correlation of adjacent periodograms.
const HANN_HALF_OVERLAP_INFLATION: f64 = 1.056;

#[derive(Clone, Debug)]
pub struct WelchPsd {
    pub omega: Vec<f64>,
    pub value: Vec<f64>,
    /// Standard error of each bin's mean.
    pub std_err: Vec<f64>,
    pub segments: usize,
    pub segment_len: usize,
    periodograms: Vec<Vec<f64>>,
}

fn hann(n: usize) -> Vec<f64> {
    // periodic Hann, exact 50 % overlap-add
    (0..n)
        .map(|k| {
            let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
            s * s
        })
        .collect()
}

/// Welch estimate with a Hann window, 50 % overlap and the given segment length.
pub fn welch(signal: &[f64], dt: f64, segment_len: usize) -> Result<WelchPsd> {
    if segment_len < 8 || !segment_len.is_multiple_of(2) {
        return Err(Error::Estimation(format!(
            "segment length {segment_len} must be even and at least 8"
        )));
    }
    if signal.len() < segment_len {
        return Err(Error::Estimation(format!(
            "record of {} samples shorter than one segment ({segment_len})",
            signal.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Estimation(format!("sample interval {dt} must be positive")));
    }
    let window = hann(segment_len);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let hop = segment_len / 2;
    let n_seg = (signal.len() - segment_len) / hop + 1;
    let bins = segment_len / 2 + 1;

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(segment_len);
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    let mut periodograms = Vec::with_capacity(n_seg);
    for seg in 0..n_seg {
        let chunk = &signal[seg * hop..seg * hop + segment_len];
        for ((b, x), w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        periodograms.push(buf[..bins].iter().map(|c| c.norm_sqr() * dt / window_power).collect::<Vec<_>>());
    }

    let mut value = vec![0.0; bins];
    for p in &periodograms {
        for (v, q) in value.iter_mut().zip(p) {
            *v += q;
        }
    }
    value.iter_mut().for_each(|v| *v /= n_seg as f64);
    let std_err = (0..bins)
        .map(|k| sample_std_err(periodograms.iter().map(|p| p[k]), value[k], n_seg))
        .collect();
    let omega = (0..bins)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / (segment_len as f64 * dt))
        .collect();
    Ok(WelchPsd {
        omega,
        value,
        std_err,
        segments: n_seg,
        segment_len,
        periodograms,
    })
}

fn sample_std_err(samples: impl Iterator<Item = f64>, mean: f64, n: usize) -> f64 {
    if n < 2 {
        return f64::INFINITY;
    }
    let ss: f64 = samples.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64 * HANN_HALF_OVERLAP_INFLATION / n as f64).sqrt()
}

/// Welch estimate with the longest even segment that still yields at least `min_segments` segments.
pub fn welch_with_min_segments(signal: &[f64], dt: f64, min_segments: usize) -> Result<WelchPsd> {
    let min_segments = min_segments.max(1);
    // segments = 2·len/N − 1 for N | 2·len
    let mut n = (2 * signal.len()) / (min_segments + 1);
    n -= n % 2;
    if n < 8 {
        return Err(Error::Estimation(format!(
            "record of {} samples too short for {min_segments} segments",
            signal.len()
        )));
    }
    let mut psd = welch(signal, dt, n)?;
    while psd.segments < min_segments && n > 8 {
        n -= 2;
        psd = welch(signal, dt, n)?;
    }
    Ok(psd)
}

impl WelchPsd {
    /// Mean over the bins with `lo ≤ ω ≤ hi` (excluding ω = 0) and its standard error,
    /// computed from per-segment band averages.
    pub fn band(&self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        let idx: Vec<usize> = (1..self.omega.len())
            .filter(|&k| self.omega[k] >= lo && self.omega[k] <= hi)
            .collect();
        if idx.is_empty() {
            return Err(Error::Estimation(format!("no frequency bins in [{lo}, {hi}]")));
        }
        let per_seg: Vec<f64> = self
            .periodograms
            .iter()
            .map(|p| idx.iter().map(|&k| p[k]).sum::<f64>() / idx.len() as f64)
            .collect();
        let mean = per_seg.iter().sum::<f64>() / per_seg.len() as f64;
        let se = sample_std_err(per_seg.iter().copied(), mean, per_seg.len());
        Ok((mean, se))
    }

    /// Frequencies of the bins selected by [`WelchPsd::band`].
    pub fn band_omegas(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.omega
            .iter()
            .skip(1)
            .copied()
            .filter(|w| *w >= lo && *w <= hi)
            .collect()
    }

    /// Averages several independent estimates with identical binning.
    pub fn average(estimates: &[WelchPsd]) -> Result<WelchPsd> {
        let first = estimates
            .first()
            .ok_or_else(|| Error::Estimation("no estimates to average".into()))?;
        if estimates.iter().any(|e| e.segment_len != first.segment_len) {
            return Err(Error::Estimation("estimates use different segment lengths".into()));
        }
        let mut periodograms = Vec::new();
        for e in estimates {
            periodograms.extend(e.periodograms.iter().cloned());
        }
        let n = periodograms.len();
        let bins = first.omega.len();
        let value: Vec<f64> = (0..bins)
            .map(|k| periodograms.iter().map(|p| p[k]).sum::<f64>() / n as f64)
            .collect();
        let std_err = (0..bins)
            .map(|k| sample_std_err(periodograms.iter().map(|p| p[k]), value[k], n))
            .collect();
        Ok(WelchPsd {
            omega: first.omega.clone(),
            value,
            std_err,
            segments: n,
            segment_len: first.segment_len,
            periodograms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn white_noise_is_flat_at_one() {
        let dt: f64 = 1e-3;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..200_000)
            .map(|_| {
                let n: f64 = StandardNormal.sample(&mut rng);
                n / dt.sqrt()
            })
            .collect();
        let psd = welch_with_min_segments(&x, dt, 100).unwrap();
        assert!(psd.segments >= 100);
        let (mean, se) = psd.band(0.0, f64::INFINITY).unwrap();
        assert!((mean - 1.0).abs() < 3.0 * se + 1e-3, "{mean} ± {se}");
        for k in 1..psd.value.len() - 1 {
            assert!((psd.value[k] - 1.0).abs() < 5.0 * psd.std_err[k], "bin {k}");
        }
    }

    #[test]
    fn sine_power_lands_in_its_bin() {
        let dt = 0.01;
        let n = 4096;
        let w0 = 2.0 * std::f64::consts::PI * 64.0 / (512.0 * dt);
        let x: Vec<f64> = (0..n).map(|k| (w0 * k as f64 * dt).sin()).collect();
        let psd = welch(&x, dt, 512).unwrap();
        let peak = (0..psd.value.len())
            .max_by(|&a, &b| psd.value[a].total_cmp(&psd.value[b]))
            .unwrap();
        assert_eq!(peak, 64);
    }

    #[test]
    fn rejects_short_records() {
        assert!(welch(&[0.0; 10], 1.0, 16).is_err());
        assert!(welch_with_min_segments(&[0.0; 100], 1.0, 100).is_err());
    }
}
