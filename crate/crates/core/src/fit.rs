//! Small estimators: log-linear decay-rate regression and a two-Lorentzian
//! least-squares fit.

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};

/// Result of a straight-line fit of `ln y` against `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// `−slope` of `ln y(t)`.
    pub rate: f64,
    /// `y` extrapolated to `t = 0`.
    pub amplitude: f64,
    pub points: usize,
}

/// Least-squares fit of `ln y = ln A − γ t` over samples with `lo ≤ t ≤ hi` and `y > 0`.
pub fn fit_exponential_decay(t: &[f64], y: &[f64], lo: f64, hi: f64) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(t, y)| **t >= lo && **t <= hi && **y > 0.0)
        .map(|(t, y)| (*t, y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Estimation(format!(
            "only {} positive samples in fit window [{lo}, {hi}]",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(DecayFit {
        rate: -slope,
        amplitude: (my - slope * mt).exp(),
        points: pts.len(),
    })
}

/// `a γ / (γ² + ω²)`.
pub fn lorentzian(a: f64, gamma: f64, omega: f64) -> f64 {
    a * gamma / (gamma * gamma + omega * omega)
}

/// Two-component Lorentzian model, components ordered narrow first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LorentzianPair {
    pub narrow_weight: f64,
    pub narrow_width: f64,
    pub broad_weight: f64,
    pub broad_width: f64,
    /// Root-mean-square residual of the fit.
    pub rms: f64,
}

impl LorentzianPair {
    pub fn eval(&self, omega: f64) -> f64 {
        lorentzian(self.narrow_weight, self.narrow_width, omega)
            + lorentzian(self.broad_weight, self.broad_width, omega)
    }
}

fn model(p: &Vector4<f64>, w: f64) -> (f64, Vector4<f64>) {
    // p = (ln a1, ln γ1, ln a2, ln γ2)
    let mut grad = Vector4::zeros();
    let mut val = 0.0;
    for c in 0..2 {
        let a = p[2 * c].exp();
        let g = p[2 * c + 1].exp();
        let d = g * g + w * w;
        let f = a * g / d;
        val += f;
        grad[2 * c] = f;
        // ∂f/∂ln γ = γ ∂f/∂γ = a γ (w² − γ²)/d²
        grad[2 * c + 1] = a * g * (w * w - g * g) / (d * d);
    }
    (val, grad)
}

fn levenberg_marquardt(omega: &[f64], data: &[f64], mut p: Vector4<f64>) -> (Vector4<f64>, f64) {
    let cost = |p: &Vector4<f64>| -> f64 {
        omega
            .iter()
            .zip(data)
            .map(|(w, y)| (model(p, *w).0 - y).powi(2))
            .sum()
    };
    let mut c = cost(&p);
    let mut mu = 1e-3;
    for _ in 0..500 {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (w, y) in omega.iter().zip(data) {
            let (f, g) = model(&p, *w);
            jtj += g * g.transpose();
            jtr += g * (y - f);
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += mu * (jtj[(k, k)] + 1e-300);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                mu *= 10.0;
                continue;
            };
            let trial = p + step;
            let ct = cost(&trial);
            if ct.is_finite() && ct < c {
                let rel = (c - ct) / c.max(1e-300);
                p = trial;
                c = ct;
                mu = (mu * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-15 {
                    return (p, c);
                }
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p, c)
}

/// Fits `a₁γ₁/(γ₁²+ω²) + a₂γ₂/(γ₂²+ω²)` by Levenberg–Marquardt from several starting widths.
pub fn fit_two_lorentzians(omega: &[f64], data: &[f64]) -> Result<LorentzianPair> {
    if omega.len() != data.len() || omega.len() < 8 {
        return Err(Error::Estimation("need at least 8 matching samples".into()));
    }
    let (peak_idx, peak) = data
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .unwrap();
    if !(peak > 0.0) {
        return Err(Error::Estimation("spectrum has no positive peak".into()));
    }
    // half width at half maximum around the peak
    let w0 = omega[peak_idx];
    let hwhm = omega
        .iter()
        .zip(data)
        .filter(|(_, v)| **v <= 0.5 * peak)
        .map(|(w, _)| (w - w0).abs())
        .fold(f64::INFINITY, f64::min);
    let narrow = if hwhm.is_finite() && hwhm > 0.0 {
        hwhm
    } else {
        0.5 * omega.iter().map(|w| w.abs()).fold(0.0, f64::max)
    };

    let mut best: Option<(Vector4<f64>, f64)> = None;
    for broad_factor in [3.0, 10.0, 30.0, 100.0] {
        for split in [0.3, 0.7] {
            let g1 = 0.8 * narrow;
            let g2 = broad_factor * narrow;
            let a1 = split * peak * g1;
            let a2 = (1.0 - split) * peak * g2;
            let p0 = Vector4::new(a1.ln(), g1.ln(), a2.ln(), g2.ln());
            let (p, c) = levenberg_marquardt(omega, data, p0);
            if best.as_ref().is_none_or(|b| c < b.1) {
                best = Some((p, c));
            }
        }
    }
    let (p, c) = best.unwrap();
    let (mut a1, mut g1, mut a2, mut g2) = (p[0].exp(), p[1].exp(), p[2].exp(), p[3].exp());
    if g2 < g1 {
        std::mem::swap(&mut a1, &mut a2);
        std::mem::swap(&mut g1, &mut g2);
    }
    Ok(LorentzianPair {
        narrow_weight: a1,
        narrow_width: g1,
        broad_weight: a2,
        broad_width: g2,
        rms: (c / omega.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_decay() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.9 * (-0.37 * t).exp()).collect();
        let f = fit_exponential_decay(&t, &y, 0.5, 3.0).unwrap();
        assert!((f.rate - 0.37).abs() < 1e-12);
        assert!((f.amplitude - 0.9).abs() < 1e-12);
        assert!(fit_exponential_decay(&t, &y, 10.0, 20.0).is_err());
    }

    #[test]
    fn recovers_two_lorentzians() {
        let omega: Vec<f64> = (0..601).map(|k| -3.0 + k as f64 * 0.01).collect();
        for (a1, g1, a2, g2) in [(0.3, 0.12, 0.7, 0.5), (0.01, 0.12, 0.5, 8.1)] {
            let data: Vec<f64> = omega
                .iter()
                .map(|w| lorentzian(a1, g1, *w) + lorentzian(a2, g2, *w))
                .collect();
            let f = fit_two_lorentzians(&omega, &data).unwrap();
            assert!((f.narrow_width - g1).abs() / g1 < 1e-6, "{f:?}");
            assert!((f.broad_width - g2).abs() / g2 < 1e-4, "{f:?}");
        }
    }
}
