use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{Config, SystemConfig};
use super::report::{AmplitudeRecord, ComponentRecord, ReportRow, SpectralDensityReport};
use super::spectrum::{quadratic_spectrum, torus_spectrum, Spectrum};
use super::trace::{quantum_density, semiclassical_density};
use super::window::{EnergyCutoff, TestFunctionPair};
use crate::berry_tabor::{enumerate_tori, BerryTaborTerm};
use crate::density::{assemble_component_amplitude, dg_density_quadratic, DensityResult};
use crate::dynamics::{resonant_liouville_measure, HamiltonianSystem, QuadraticHamiltonian};
use crate::error::{config_err, Error, Result};
use crate::orbits::{enumerate_periods, PeriodicComponent};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepOptions {
    /// Record per-row wall time; off by default so reports are byte-reproducible.
    pub wall_clock: bool,
}

#[derive(Debug, Clone)]
enum TermKind {
    Quadratic { component: PeriodicComponent, density: DensityResult, measure: f64 },
    Torus { term: BerryTaborTerm },
}

/// One term of the periodic-orbit sum, with its phase either fixed or
/// awaiting calibration within `group`.
#[derive(Debug, Clone)]
pub struct SemiclassicalTerm {
    kind: TermKind,
    fhat: f64,
    psi_e: f64,
    group: Option<String>,
    fixed_phase: Option<i32>,
    candidates: [i32; 2],
}

impl SemiclassicalTerm {
    pub fn group(&self) -> Option<&str> {
        self.group.as_deref()
    }

    pub fn candidates(&self) -> [i32; 2] {
        self.candidates
    }

    pub fn period(&self) -> f64 {
        match &self.kind {
            TermKind::Quadratic { component, .. } => component.period,
            TermKind::Torus { term } => term.torus.period,
        }
    }

    /// Amplitude at `h` with phase integer `phase` (ignored when fixed).
    pub fn amplitude(&self, h: f64, phase: i32) -> Result<Complex64> {
        let m = self.fixed_phase.unwrap_or(phase);
        match &self.kind {
            TermKind::Quadratic { component, density, measure } => {
                let density = density.clone().with_phase(m)?;
                assemble_component_amplitude(component, &density, *measure, Complex64::new(self.fhat, 0.0), self.psi_e, h)
            }
            TermKind::Torus { term } => Ok(term.amplitude(Complex64::new(self.fhat, 0.0), h, m)? * self.psi_e),
        }
    }

    fn record(&self, phase: Option<i32>, amplitudes: Vec<AmplitudeRecord>) -> ComponentRecord {
        let base = |label: String, period, dim, action| ComponentRecord {
            label,
            period,
            dim,
            action,
            d_squared: None,
            measure: None,
            winding: None,
            actions: None,
            curvature: None,
            phase_group: self.group.clone(),
            phase,
            fhat: self.fhat,
            amplitudes,
        };
        match &self.kind {
            TermKind::Quadratic { component, density, measure } => ComponentRecord {
                d_squared: Some(density.d_squared),
                measure: Some(*measure),
                ..base(component.label.to_string(), component.period, component.dim, component.action)
            },
            TermKind::Torus { term } => ComponentRecord {
                winding: Some(term.torus.winding.clone()),
                actions: Some(term.torus.actions.clone()),
                curvature: Some(term.curvature),
                ..base("torus".into(), term.torus.period, term.dim, term.action)
            },
        }
    }
}

/// Components of `Delta_T ∩ Sigma_E` for every period in the window of `f^`.
pub fn quadratic_terms(w: &[f64], e: f64, pair: &TestFunctionPair, psi: &EnergyCutoff, rational_bound: u64) -> Result<Vec<SemiclassicalTerm>> {
    let system = QuadraticHamiltonian::new(w.to_vec())?;
    let periods = enumerate_periods(w, pair.window().support(), rational_bound)?;
    periods
        .entries
        .iter()
        .map(|entry| {
            let component = PeriodicComponent::quadratic(&system, e, entry)?;
            let grad = system.gradient(&component.representative_vector());
            let density = dg_density_quadratic(w, entry.period, &grad)?;
            let measure = resonant_liouville_measure(w, &entry.resonant, e)?;
            let fixed_phase = density.phase_quarter_turns;
            let candidates = match fixed_phase {
                Some(m) => [m, m],
                None => density.phase_candidates()?,
            };
            Ok(SemiclassicalTerm {
                fhat: pair.fhat(entry.period),
                psi_e: psi.value(e),
                group: fixed_phase.is_none().then(|| format!("T={}", entry.period)),
                fixed_phase,
                candidates,
                kind: TermKind::Quadratic { component, density, measure },
            })
        })
        .collect()
}

/// Resonant tori of the flat torus `|I|^2/2` in the window of `f^`.
pub fn torus_terms(n: usize, e: f64, pair: &TestFunctionPair, psi: &EnergyCutoff, m_bound: i64) -> Result<Vec<SemiclassicalTerm>> {
    let system = crate::berry_tabor::FlatTorus::new(n)?;
    let (lo, hi) = pair.window().support();
    if lo <= 0.0 && hi >= 0.0 {
        log::warn!("window contains T = 0; the zero-period term is not part of the torus sum");
    }
    let found = enumerate_tori(&system, e, (lo, hi), m_bound)?;
    found
        .tori
        .iter()
        .map(|torus| {
            let term = BerryTaborTerm::new(&system, torus)?;
            Ok(SemiclassicalTerm {
                fhat: pair.fhat(torus.period),
                psi_e: psi.value(e),
                group: Some(format!("|M|^2={}", torus.winding_norm_sq())),
                fixed_phase: None,
                candidates: term.beta_candidates(),
                kind: TermKind::Torus { term },
            })
        })
        .collect()
}

const MAX_PHASE_GROUPS: usize = 16;

/// Picks one phase integer per group, jointly over all groups, minimizing
/// `|quantum - semiclassical|` at `h`.
pub fn calibrate_phases(terms: &[SemiclassicalTerm], quantum: Complex64, h: f64) -> Result<BTreeMap<String, i32>> {
    let mut groups: BTreeMap<String, [i32; 2]> = BTreeMap::new();
    for t in terms {
        if let Some(g) = &t.group {
            groups.entry(g.clone()).or_insert(t.candidates);
        }
    }
    if groups.len() > MAX_PHASE_GROUPS {
        return Err(Error::Precondition(format!("{} phase groups exceed the joint calibration limit", groups.len())));
    }
    let keys: Vec<&String> = groups.keys().collect();
    let mut best: Option<(f64, BTreeMap<String, i32>)> = None;
    for mask in 0u32..(1 << keys.len()) {
        let choice: BTreeMap<String, i32> = keys
            .iter()
            .enumerate()
            .map(|(i, k)| ((*k).clone(), groups[*k][((mask >> i) & 1) as usize]))
            .collect();
        let total = sum_terms(terms, &choice, h)?;
        let err = (quantum - total).norm();
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, choice));
        }
    }
    Ok(best.map(|(_, c)| c).unwrap_or_default())
}

fn phase_for(term: &SemiclassicalTerm, phases: &BTreeMap<String, i32>) -> Result<i32> {
    match (&term.fixed_phase, &term.group) {
        (Some(m), _) => Ok(*m),
        (None, Some(g)) => phases.get(g).copied().ok_or(Error::UnresolvedPhase),
        (None, None) => Err(Error::UnresolvedPhase),
    }
}

/// Semiclassical sum at `h` with the given group phases.
pub fn sum_terms(terms: &[SemiclassicalTerm], phases: &BTreeMap<String, i32>, h: f64) -> Result<Complex64> {
    let amplitudes = terms
        .iter()
        .map(|t| t.amplitude(h, phase_for(t, phases)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(semiclassical_density(amplitudes))
}

/// Builds the semiclassical terms for a config.
pub fn semiclassical_terms(config: &Config) -> Result<Vec<SemiclassicalTerm>> {
    let pair = config.test_pair()?;
    let psi = config.cutoff()?;
    match &config.system {
        SystemConfig::Quadratic { w } => quadratic_terms(w, config.energy, &pair, &psi, config.rational_bound),
        SystemConfig::Torus { n, .. } => torus_terms(*n, config.energy, &pair, &psi, config.m_bound),
        SystemConfig::ActionAngle { .. } => {
            Err(config_err("system.type", "sweeps need an exactly solvable spectrum (quadratic or torus)"))
        }
    }
}

/// The exact spectrum of the configured system on the support of `psi`.
pub fn config_spectrum(config: &Config, h: f64) -> Result<Spectrum> {
    let window = config.cutoff()?.support();
    let cap = config.tolerances.count_cap;
    match &config.system {
        SystemConfig::Quadratic { w } => quadratic_spectrum(w, h, window, cap),
        SystemConfig::Torus { n, mu } => torus_spectrum(*n, h, window, mu, cap),
        SystemConfig::ActionAngle { .. } => {
            Err(config_err("system.type", "sweeps need an exactly solvable spectrum (quadratic or torus)"))
        }
    }
}

/// Quantum and semiclassical densities over the `h` list, with phases
/// calibrated at one `h` that is then excluded from the statistics.
pub fn sweep(config: &Config, opts: &SweepOptions) -> Result<SpectralDensityReport> {
    config.validate()?;
    let hs = config.sweep_hs()?;
    let calibration_h = config.calibration_h()?;
    let pair = config.test_pair()?;
    pair.validate_convention()?;
    let psi = config.cutoff()?;
    let terms = semiclassical_terms(config)?;

    let quantum: Vec<(Complex64, usize, Option<f64>)> = hs
        .par_iter()
        .map(|&h| {
            let start = Instant::now();
            let spectrum = config_spectrum(config, h)?;
            let ratio = spectrum.weyl_ratio();
            if spectrum.len() > 100 && !(0.5..=2.0).contains(&ratio) {
                log::warn!("eigenvalue count at h = {h} is {ratio:.3} times the Weyl estimate");
            }
            let g = quantum_density(&spectrum, &psi, &pair, config.energy, h)?;
            let wall = opts.wall_clock.then(|| start.elapsed().as_secs_f64() * 1e3);
            Ok((g, spectrum.len(), wall))
        })
        .collect::<Result<_>>()?;

    let cal_index = hs.iter().position(|&h| h == calibration_h).ok_or_else(|| config_err("calibration_h", "not in hs"))?;
    let phases = calibrate_phases(&terms, quantum[cal_index].0, calibration_h)?;
    log::info!("calibrated phases at h = {calibration_h}: {phases:?}");

    let rows = hs
        .iter()
        .zip(&quantum)
        .map(|(&h, &(g, count, wall))| Ok(ReportRow::new(h, g, sum_terms(&terms, &phases, h)?, count, wall)))
        .collect::<Result<Vec<_>>>()?;
    let components = terms
        .iter()
        .map(|t| {
            let phase = phase_for(t, &phases)?;
            let amplitudes = hs
                .iter()
                .map(|&h| t.amplitude(h, phase).map(|a| AmplitudeRecord { h, re: a.re, im: a.im }))
                .collect::<Result<Vec<_>>>()?;
            Ok(t.record(Some(phase), amplitudes))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralDensityReport { rows, calibration_h, phases, components })
}
