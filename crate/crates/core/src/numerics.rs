//! Small numerical helpers shared across modules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central difference with one Richardson step: (4·D(h/2) − D(h)) / 3.
pub fn richardson_derivative(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    let d = |s: f64| (f(t + s) - f(t - s)) / (2.0 * s);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Second time derivative by central differences with one Richardson step.
pub fn richardson_second_derivative(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    let f0 = f(t);
    let d = |s: f64| (f(t + s) - 2.0 * f0 + f(t - s)) / (s * s);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// ln Σ exp(x_i), stable for large magnitudes.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Seeded coefficient draw with 1/j decay so that states are smooth but rich.
pub fn random_coefficients(seed: u64, count: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..count).map(|j| r.gen_range(-1.0..1.0) / (1.0 + j as f64)).collect()
}

/// Least-squares slope of ln(err) against ln(h).
pub fn fitted_order(hs: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Composite trapezoid over an ordered sample set.
pub fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    ts.windows(2).zip(ys.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}
