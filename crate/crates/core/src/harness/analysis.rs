use std::fmt::Write as _;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{Config, SystemConfig};
use crate::berry_tabor::{
    check_isochronous, check_nondegenerate, curvature_from_parametrization, enumerate_tori, ActionAngleSystem,
    BerryTaborTerm,
};
use crate::density::{dg_density_general, dg_density_quadratic, dg_density_simple, maslov_branch_track};
use crate::dynamics::{resonant_liouville_measure, HamiltonianSystem, QuadraticHamiltonian};
use crate::error::{config_err, Result};
use crate::orbits::{
    check_hyp_rc, classify_frequencies, clean_flow_check, cluster_generators, enumerate_periods, is_ndr,
    is_nondegenerate, is_normal, is_sigma_normal, quadratic_component_tangent, sample_periodic_point,
    FirstIntegralFamily, FrequencyClassification, PeriodicComponent,
};
use crate::symplectic::{EigenspaceSplit, Monodromy, RankPolicy};

fn quadratic_w(config: &Config) -> Result<&[f64]> {
    match &config.system {
        SystemConfig::Quadratic { w } => Ok(w),
        _ => Err(config_err("system.type", "expected quadratic")),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Predicates {
    pub nondeg: Option<bool>,
    #[serde(rename = "NDR")]
    pub ndr: Option<bool>,
    pub normal: Option<bool>,
    pub sigma_normal: Option<bool>,
    #[serde(rename = "hypRC")]
    pub hyp_rc: Option<bool>,
    pub clean: Option<bool>,
}

impl Predicates {
    /// Conjunction over sample points; an undecidable sample makes the entry `None`.
    fn and(self, other: Self) -> Self {
        let f = |a: Option<bool>, b: Option<bool>| Some(a? && b?);
        Self {
            nondeg: f(self.nondeg, other.nondeg),
            ndr: f(self.ndr, other.ndr),
            normal: f(self.normal, other.normal),
            sigma_normal: f(self.sigma_normal, other.sigma_normal),
            hyp_rc: f(self.hyp_rc, other.hyp_rc),
            clean: f(self.clean, other.clean),
        }
    }

    fn all_true() -> Self {
        Self {
            nondeg: Some(true),
            ndr: Some(true),
            normal: Some(true),
            sigma_normal: Some(true),
            hyp_rc: Some(true),
            clean: Some(true),
        }
    }
}

fn undecided<T>(name: &str, r: Result<T>) -> Option<T> {
    r.map_err(|e| log::warn!("{name}: {e}")).ok()
}

/// All predicates at one periodic point of a quadratic system.
pub fn point_predicates(
    w: &[f64],
    period: f64,
    z: &DVector<f64>,
    family: &FirstIntegralFamily,
    policy: RankPolicy,
) -> Result<Predicates> {
    let system = QuadraticHamiltonian::new(w.to_vec())?;
    let grad = system.gradient(z);
    let m = Monodromy::new(system.monodromy_matrix(period), z.clone(), period, 1e-8 * (1.0 + period.abs()))?;
    let split = EigenspaceSplit::new(m.matrix(), policy)?.with_energy_surface(&grad)?;
    let tangent = quadratic_component_tangent(w, period, &grad, policy)?;
    Ok(Predicates {
        nondeg: Some(is_nondegenerate(&split)),
        ndr: undecided("NDR", is_ndr(&split, z, &grad, &cluster_generators(w))),
        normal: undecided("normal", is_normal(&m, &grad, family, policy)),
        sigma_normal: undecided("sigma_normal", is_sigma_normal(&m, &grad, family, policy)),
        hyp_rc: undecided("hypRC", check_hyp_rc(&split)),
        clean: undecided("clean", clean_flow_check(m.matrix(), &grad, &tangent, policy)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodClassification {
    #[serde(rename = "T")]
    pub period: f64,
    /// Indices of the resonant modes.
    #[serde(rename = "J")]
    pub resonant: Vec<usize>,
    pub dim: usize,
    pub labels: Vec<String>,
    pub predicates: Predicates,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyReport {
    pub frequencies: FrequencyClassification,
    pub samples_per_period: usize,
    pub periods: Vec<PeriodClassification>,
}

/// Predicates on every period in the window of `f^`, conjoined over the
/// component representative and `samples` random points of the component.
pub fn classify(config: &Config, samples: usize, seed: u64) -> Result<ClassifyReport> {
    let w = quadratic_w(config)?;
    let policy = config.rank_policy()?;
    let system = QuadraticHamiltonian::new(w.to_vec())?;
    let family = FirstIntegralFamily::superintegrable(w, config.rational_bound)?;
    let periods = enumerate_periods(w, config.fhat.support(), config.rational_bound)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let periods = periods
        .entries
        .iter()
        .map(|entry| {
            let component = PeriodicComponent::quadratic(&system, config.energy, entry)?;
            let mut points = vec![component.representative_vector()];
            for _ in 0..samples {
                points.push(sample_periodic_point(w, &entry.resonant, config.energy, &mut rng)?);
            }
            let mut predicates = Predicates::all_true();
            for z in &points {
                predicates = predicates.and(point_predicates(w, entry.period, z, &family, policy)?);
            }
            let mut labels = vec![component.label.to_string()];
            if predicates.nondeg == Some(true) {
                labels.push("nondegenerate".into());
            }
            if predicates.ndr == Some(true) {
                labels.push("NDR".into());
            }
            Ok(PeriodClassification {
                period: entry.period,
                resonant: entry.resonant.clone(),
                dim: component.dim,
                labels,
                predicates,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassifyReport { frequencies: classify_frequencies(w, config.rational_bound), samples_per_period: samples, periods })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentAnalysis {
    #[serde(rename = "T")]
    pub period: f64,
    pub resonant: Vec<usize>,
    pub dim: usize,
    pub label: String,
    pub action: f64,
    pub measure: f64,
    pub grad_norm: f64,
    pub d_squared_closed_form: Complex64,
    pub d_squared_general: Option<Complex64>,
    pub d_squared_simple: Option<Complex64>,
    /// `m mod 8` candidates, or the fixed value twice.
    pub phase_candidates: [i32; 2],
    pub branch_quarter_turns: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticAnalysis {
    pub w: Vec<f64>,
    #[serde(rename = "E")]
    pub energy: f64,
    pub frequencies: FrequencyClassification,
    pub components: Vec<ComponentAnalysis>,
}

/// Densities of every periodic component in the window, by the closed form
/// and by the two linear-algebra routes, with the branch-track phase.
pub fn analyze_quadratic(config: &Config) -> Result<QuadraticAnalysis> {
    let w = quadratic_w(config)?;
    let policy = config.rank_policy()?;
    let system = QuadraticHamiltonian::new(w.to_vec())?;
    let periods = enumerate_periods(w, config.fhat.support(), config.rational_bound)?;
    let components = periods
        .entries
        .iter()
        .map(|entry| {
            let component = PeriodicComponent::quadratic(&system, config.energy, entry)?;
            let z = component.representative_vector();
            let grad = system.gradient(&z);
            let closed = dg_density_quadratic(w, entry.period, &grad)?;
            let split = EigenspaceSplit::new(&system.monodromy_matrix(entry.period), policy)?.with_energy_surface(&grad)?;
            let phase_candidates = match closed.phase_quarter_turns {
                Some(m) => [m, m],
                None => closed.phase_candidates()?,
            };
            let track = undecided("branch track", maslov_branch_track(|t| system.monodromy_matrix(t), entry.period));
            Ok(ComponentAnalysis {
                period: entry.period,
                resonant: entry.resonant.clone(),
                dim: component.dim,
                label: component.label.to_string(),
                action: component.action,
                measure: resonant_liouville_measure(w, &entry.resonant, config.energy)?,
                grad_norm: closed.grad_norm,
                d_squared_closed_form: closed.d_squared,
                d_squared_general: undecided("general density", dg_density_general(&split)).map(|d| d.d_squared),
                d_squared_simple: undecided("simple density", dg_density_simple(&split)).map(|d| d.d_squared),
                phase_candidates,
                branch_quarter_turns: track.and_then(|t| t.quarter_turns()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuadraticAnalysis {
        w: w.to_vec(),
        energy: config.energy,
        frequencies: classify_frequencies(w, config.rational_bound),
        components,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusRecord {
    pub winding: Vec<i64>,
    #[serde(rename = "T")]
    pub period: f64,
    pub actions: Vec<f64>,
    pub action: f64,
    pub frequency_norm: f64,
    pub curvature: f64,
    pub curvature_parametrization: Option<f64>,
    pub hessian_det: f64,
    pub isochrony_bracket: Option<f64>,
    pub beta_candidates: [i32; 2],
    pub fhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusAmplitude {
    pub winding: Vec<i64>,
    pub h: f64,
    pub beta: i32,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusTable {
    #[serde(rename = "E")]
    pub energy: f64,
    pub tori: Vec<TorusRecord>,
    pub multiple_solutions: Vec<Vec<i64>>,
    #[serde(skip)]
    pub amplitudes: Vec<TorusAmplitude>,
}

impl TorusTable {
    pub fn amplitudes_csv(&self) -> String {
        let mut out = String::from("winding,T,h,beta,re,im\n");
        let period = |m: &Vec<i64>| self.tori.iter().find(|t| &t.winding == m).map_or(f64::NAN, |t| t.period);
        for a in &self.amplitudes {
            let winding: Vec<String> = a.winding.iter().map(i64::to_string).collect();
            let _ = writeln!(out, "{},{:?},{:?},{},{:?},{:?}", winding.join(" "), period(&a.winding), a.h, a.beta, a.value.re, a.value.im);
        }
        out
    }
}

fn config_torus_system(config: &Config) -> Result<Box<dyn ActionAngleSystem>> {
    match &config.system {
        SystemConfig::Torus { .. } => Ok(Box::new(config.flat_torus()?)),
        SystemConfig::ActionAngle { .. } => Ok(Box::new(config.action_angle_system()?)),
        SystemConfig::Quadratic { .. } => Err(config_err("system.type", "expected torus or action-angle")),
    }
}

/// Resonant tori in the window with their geometric data, and each term of
/// the torus sum at every configured `h` for both lifts of `beta`.
pub fn torus_table(config: &Config) -> Result<TorusTable> {
    let system = config_torus_system(config)?;
    let system = system.as_ref();
    let pair = config.test_pair()?;
    let psi_e = config.cutoff()?.value(config.energy);
    let found = enumerate_tori(system, config.energy, config.fhat.support(), config.m_bound)?;
    let mut hs = config.hs.clone();
    hs.sort_by(|a, b| b.total_cmp(a));
    hs.dedup();
    let mut tori = Vec::with_capacity(found.tori.len());
    let mut amplitudes = Vec::new();
    for torus in &found.tori {
        let term = BerryTaborTerm::new(system, torus)?;
        let actions = torus.actions_vector();
        let fhat = pair.fhat(torus.period);
        for &h in &hs {
            for beta in term.beta_candidates() {
                let value = term.amplitude(Complex64::new(fhat, 0.0), h, beta)? * psi_e;
                amplitudes.push(TorusAmplitude { winding: torus.winding.clone(), h, beta, value });
            }
        }
        tori.push(TorusRecord {
            winding: torus.winding.clone(),
            period: torus.period,
            actions: torus.actions.clone(),
            action: term.action,
            frequency_norm: term.frequency_norm,
            curvature: term.curvature,
            curvature_parametrization: undecided("curvature", curvature_from_parametrization(system, &actions)),
            hessian_det: check_nondegenerate(system, &actions)?.det,
            isochrony_bracket: undecided("isochrony", check_isochronous(system, &actions)).map(|r| r.bracket),
            beta_candidates: term.beta_candidates(),
            fhat,
        });
    }
    Ok(TorusTable { energy: config.energy, tori, multiple_solutions: found.multiple_solutions, amplitudes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(system: &str, fhat: &str) -> Config {
        Config::from_json(&format!(
            r#"{{"system": {system}, "E": 1.0, "epsilon": 0.5, "hs": [0.02, 0.01], "fhat": {fhat}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn classify_nonresonant_pair() {
        let c = config(
            r#"{"type": "quadratic", "w": [1.0, 1.4142135623730951]}"#,
            r#"{"type": "triangle", "center": 6.283185307179586, "halfwidth": 0.5}"#,
        );
        let report = classify(&c, 3, 7).unwrap();
        assert_eq!(report.periods.len(), 1);
        let p = &report.periods[0];
        assert_eq!(p.resonant, vec![0]);
        assert_eq!(p.predicates.nondeg, Some(true));
        assert_eq!(p.predicates.clean, Some(true));
        assert!(p.labels.contains(&"nondegenerate".to_string()));
        assert_eq!(classify(&c, 3, 7).unwrap(), report);
    }

    #[test]
    fn analysis_routes_agree() {
        let c = config(
            r#"{"type": "quadratic", "w": [1.0, 1.0, 1.4142135623730951]}"#,
            r#"{"type": "triangle", "center": 6.283185307179586, "halfwidth": 0.5}"#,
        );
        let a = analyze_quadratic(&c).unwrap();
        assert_eq!(a.components.len(), 1);
        let comp = &a.components[0];
        assert_eq!(comp.dim, 3);
        for d in [comp.d_squared_general.unwrap(), comp.d_squared_simple.unwrap()] {
            assert!((d - comp.d_squared_closed_form).norm() < 1e-10 * comp.d_squared_closed_form.norm());
        }
        assert_eq!(comp.branch_quarter_turns, None);

        let c = config(
            r#"{"type": "quadratic", "w": [1.0, 1.0]}"#,
            r#"{"type": "triangle", "center": 6.283185307179586, "halfwidth": 0.5}"#,
        );
        let comp = &analyze_quadratic(&c).unwrap().components[0];
        let m = comp.branch_quarter_turns.unwrap();
        assert!(comp.phase_candidates.iter().any(|&c| (c - m).rem_euclid(8) == 0));
    }

    #[test]
    fn flat_torus_table() {
        let c = config(
            r#"{"type": "torus", "n": 2}"#,
            r#"{"type": "triangle", "center": 4.442882938158366, "halfwidth": 2.5}"#,
        );
        let table = torus_table(&c).unwrap();
        assert!(table.tori.iter().any(|t| t.winding == vec![1, 0]));
        for t in &table.tori {
            assert_eq!(t.beta_candidates, [3, 7]);
            assert!((t.curvature - t.curvature_parametrization.unwrap()).abs() < 1e-4);
        }
        let csv = table.amplitudes_csv();
        assert_eq!(csv.lines().count(), 1 + table.tori.len() * 2 * 2);
        assert!(torus_table(&config(r#"{"type": "quadratic", "w": [1.0]}"#, r#"{"type": "bump", "center": 0.0, "halfwidth": 1.0}"#)).is_err());
    }
}
