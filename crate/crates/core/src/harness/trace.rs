use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::spectrum::Spectrum;
use super::window::{EnergyCutoff, TestFunctionPair};
use crate::error::{Error, Result};
use crate::quadrature::{compensated_sum, GaussLegendre};

/// `G_E(h) = sum_j psi(lambda_j) f((E - lambda_j) / h)`, summed with
/// compensation in eigenvalue order.
pub fn quantum_density(spectrum: &Spectrum, psi: &EnergyCutoff, pair: &TestFunctionPair, e: f64, h: f64) -> Result<Complex64> {
    let (lo, hi) = psi.support();
    if !spectrum.covers(lo, hi) {
        return Err(Error::IncompleteSpectrum);
    }
    let terms: Vec<Complex64> = spectrum
        .eigenvalues
        .par_iter()
        .with_min_len(4096)
        .map(|&lambda| {
            let weight = psi.value(lambda);
            if weight == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                pair.f((e - lambda) / h) * weight
            }
        })
        .collect();
    Ok(compensated_sum(terms))
}

/// Sum of assembled component amplitudes in the given order.
pub fn semiclassical_density<I: IntoIterator<Item = Complex64>>(amplitudes: I) -> Complex64 {
    compensated_sum(amplitudes)
}

/// Compares `(1/h) G_E(h)` computed on the Fourier side,
/// `(1/2 pi h) int f^(t) e^{itE/h} sum_j psi(lambda_j) e^{-it lambda_j/h} dt`,
/// against the comb convolution `sum_j psi(lambda_j) f_h(E - lambda_j)` with
/// `f_h(x) = f(x/h)/h`, over an energy grid on which `psi = 1`.
///
/// Returns the largest absolute deviation.
pub fn convolution_identity_check(spectrum: &Spectrum, psi: &EnergyCutoff, pair: &TestFunctionPair, energies: &[f64], h: f64) -> Result<f64> {
    let (plo, phi) = psi
        .plateau()
        .ok_or_else(|| Error::Precondition("cutoff must be identically 1 on an inner window".into()))?;
    if let Some(e) = energies.iter().find(|&&e| e < plo || e > phi) {
        return Err(Error::Precondition(format!("energy {e} lies outside the plateau [{plo}, {phi}]")));
    }
    let (lo, hi) = psi.support();
    if !spectrum.covers(lo, hi) {
        return Err(Error::IncompleteSpectrum);
    }
    let comb: Vec<(f64, f64)> = spectrum
        .eigenvalues
        .iter()
        .map(|&l| (l, psi.value(l)))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    let (tlo, thi) = pair.window().support();
    let c = pair.window().center();
    let rule = GaussLegendre::new(20);
    let spread = comb.iter().map(|&(l, _)| l.abs()).fold(0.0f64, f64::max)
        + energies.iter().map(|e| e.abs()).fold(0.0f64, f64::max);
    let panels = 8 + (pair.window().halfwidth() * spread / h).ceil() as usize;
    let deviations: Vec<f64> = energies
        .par_iter()
        .map(|&e| {
            let direct = compensated_sum(comb.iter().map(|&(l, w)| pair.f((e - l) / h) * (w / h)));
            let integrand = |t: f64| {
                let trace = compensated_sum(comb.iter().map(|&(l, w)| Complex64::from_polar(w, -t * l / h)));
                trace * Complex64::from_polar(pair.fhat(t), t * e / h)
            };
            let fourier: Complex64 =
                rule.integrate_composite(tlo, c, panels, integrand) + rule.integrate_composite(c, thi, panels, integrand);
            (direct - fourier / (2.0 * PI * h)).norm()
        })
        .collect();
    Ok(deviations.into_iter().fold(0.0, f64::max))
}
