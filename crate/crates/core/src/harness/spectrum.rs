use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_COUNT_CAP: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SpectrumSource {
    /// `lambda = sum_j h w_j (k_j + 1/2)`, `k` in `N^n`.
    QuadraticOscillator { w: Vec<f64> },
    /// `lambda = |h (k + mu/4)|^2 / 2`, `k` in `Z^n`.
    FlatTorusEbk { mu: Vec<f64> },
}

/// Eigenvalues in a window, sorted, repeated by multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub source: SpectrumSource,
    pub h: f64,
    pub window: (f64, f64),
    pub eigenvalues: Vec<f64>,
    /// Phase-space volume estimate of the count.
    pub weyl_estimate: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.window.0 <= lo && self.window.1 >= hi
    }

    /// Count divided by the Weyl estimate.
    pub fn weyl_ratio(&self) -> f64 {
        self.len() as f64 / self.weyl_estimate
    }
}

fn check_window(h: f64, window: (f64, f64)) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Precondition(format!("h must be positive, got {h}")));
    }
    if !(window.0.is_finite() && window.1.is_finite() && window.0 <= window.1) {
        return Err(Error::Precondition(format!("invalid spectral window [{}, {}]", window.0, window.1)));
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Largest `k_j` reachable inside the window, per mode.
pub fn quadratic_lattice_bounds(w: &[f64], h: f64, hi: f64) -> Vec<i64> {
    let ground: f64 = w.iter().map(|wj| 0.5 * h * wj).sum();
    w.iter().map(|wj| ((hi - ground) / (h * wj)).floor() as i64).collect()
}

fn quadratic_recurse(w: &[f64], h: f64, depth: usize, partial: f64, rest_ground: &[f64], window: (f64, f64), out: &mut Vec<f64>) {
    if depth == w.len() {
        if partial >= window.0 && partial <= window.1 {
            out.push(partial);
        }
        return;
    }
    let step = h * w[depth];
    let floor = partial + rest_ground[depth];
    let mut k = 0u64;
    loop {
        let value = partial + step * (k as f64 + 0.5);
        if floor + step * k as f64 > window.1 {
            break;
        }
        quadratic_recurse(w, h, depth + 1, value, rest_ground, window, out);
        k += 1;
    }
}

/// Exact oscillator spectrum in `window`.
pub fn quadratic_spectrum(w: &[f64], h: f64, window: (f64, f64), cap: usize) -> Result<Spectrum> {
    check_window(h, window)?;
    if w.is_empty() || w.iter().any(|&wj| !(wj > 0.0 && wj.is_finite())) {
        return Err(Error::Precondition("frequencies must be positive".into()));
    }
    let n = w.len();
    let prod: f64 = w.iter().product();
    let vol = |e: f64| if e <= 0.0 { 0.0 } else { e.powi(n as i32) / (factorial(n) * prod * h.powi(n as i32)) };
    let weyl_estimate = vol(window.1) - vol(window.0);
    if weyl_estimate > 2.0 * cap as f64 {
        return Err(Error::WindowTooLarge { count: weyl_estimate as usize, cap });
    }
    // rest_ground[d] = minimum contribution of modes d..n
    let mut rest_ground = vec![0.0; n + 1];
    for d in (0..n).rev() {
        rest_ground[d] = rest_ground[d + 1] + 0.5 * h * w[d];
    }
    let k0_max = quadratic_lattice_bounds(w, h, window.1)[0];
    let chunks: Vec<Vec<f64>> = (0..=k0_max.max(-1))
        .into_par_iter()
        .map(|k0| {
            let mut out = Vec::new();
            let value = h * w[0] * (k0 as f64 + 0.5);
            if value + rest_ground[1] <= window.1 {
                quadratic_recurse(w, h, 1, value, &rest_ground, window, &mut out);
            }
            out
        })
        .collect();
    finish(SpectrumSource::QuadraticOscillator { w: w.to_vec() }, h, window, chunks, weyl_estimate, cap)
}

fn finish(source: SpectrumSource, h: f64, window: (f64, f64), chunks: Vec<Vec<f64>>, weyl_estimate: f64, cap: usize) -> Result<Spectrum> {
    let count: usize = chunks.iter().map(Vec::len).sum();
    if count > cap {
        return Err(Error::SpectrumTooLarge { cap });
    }
    let mut eigenvalues: Vec<f64> = chunks.into_iter().flatten().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(Spectrum { source, h, window, eigenvalues, weyl_estimate })
}

fn torus_recurse(shifts: &[f64], h: f64, depth: usize, partial_sq: f64, window: (f64, f64), out: &mut Vec<f64>) {
    if depth == shifts.len() {
        let value = 0.5 * partial_sq;
        if value >= window.0 && value <= window.1 {
            out.push(value);
        }
        return;
    }
    let remaining = 2.0 * window.1 - partial_sq;
    if remaining < 0.0 {
        return;
    }
    let radius = remaining.sqrt() / h;
    let s = shifts[depth];
    let k_lo = (-radius - s).ceil() as i64;
    let k_hi = (radius - s).floor() as i64;
    for k in k_lo..=k_hi {
        let p = h * (k as f64 + s);
        torus_recurse(shifts, h, depth + 1, partial_sq + p * p, window, out);
    }
}

/// EBK lattice spectrum of the flat torus in `window`; `mu` is the Maslov
/// offset per axis.
pub fn torus_spectrum(n: usize, h: f64, window: (f64, f64), mu: &[f64], cap: usize) -> Result<Spectrum> {
    check_window(h, window)?;
    if n == 0 {
        return Err(Error::Precondition("torus dimension must be positive".into()));
    }
    let mu = if mu.is_empty() { vec![0.0; n] } else { mu.to_vec() };
    if mu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: mu.len() });
    }
    let shifts: Vec<f64> = mu.iter().map(|m| m / 4.0).collect();
    let ball = |e: f64| {
        if e <= 0.0 {
            return 0.0;
        }
        let r = (2.0 * e).sqrt() / h;
        let nf = n as f64;
        std::f64::consts::PI.powf(nf / 2.0) / gamma_half_integer(nf / 2.0 + 1.0) * r.powf(nf)
    };
    let weyl_estimate = ball(window.1) - ball(window.0);
    if weyl_estimate > 2.0 * cap as f64 {
        return Err(Error::WindowTooLarge { count: weyl_estimate as usize, cap });
    }
    if window.1 < 0.0 {
        return finish(SpectrumSource::FlatTorusEbk { mu }, h, window, Vec::new(), weyl_estimate, cap);
    }
    let radius = (2.0 * window.1).sqrt() / h;
    let s0 = shifts[0];
    let k_lo = (-radius - s0).ceil() as i64;
    let k_hi = (radius - s0).floor() as i64;
    let chunks: Vec<Vec<f64>> = (k_lo..=k_hi)
        .into_par_iter()
        .map(|k0| {
            let mut out = Vec::new();
            let p = h * (k0 as f64 + s0);
            torus_recurse(&shifts, h, 1, p * p, window, &mut out);
            out
        })
        .collect();
    finish(SpectrumSource::FlatTorusEbk { mu }, h, window, chunks, weyl_estimate, cap)
}

/// `Gamma(x)` for the half-integers met by ball volumes.
fn gamma_half_integer(x: f64) -> f64 {
    let twice = (2.0 * x).round() as i64;
    if twice % 2 == 0 {
        factorial((x - 1.0).round() as usize)
    } else {
        // Gamma(k + 1/2) = (2k)! sqrt(pi) / (4^k k!)
        let k = (x - 0.5).round() as usize;
        factorial(2 * k) * std::f64::consts::PI.sqrt() / (4f64.powi(k as i32) * factorial(k))
    }
}
