//! Hamiltonian systems on `R^{2n}`: flows, monodromy along trajectories,
//! loop actions and Liouville measures of energy shells.
//!
//! Coordinates are ordered `z = (x_1..x_n, xi_1..xi_n)` and the equations of
//! motion are `dz/dt = J grad H(z)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::symplectic::{apply_j, symplectic_j, Monodromy, PhaseDim};

/// A point of phase space with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint(DVector<f64>);

impl PhasePoint {
    pub fn new(z: DVector<f64>) -> Result<Self> {
        PhaseDim::from_phase_len(z.len())?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("phase point has non-finite coordinates".into()));
        }
        Ok(Self(z))
    }

    pub fn from_slice(z: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(z))
    }

    pub fn from_parts(x: &[f64], xi: &[f64]) -> Result<Self> {
        if x.len() != xi.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: xi.len() });
        }
        Self::new(DVector::from_iterator(x.len() * 2, x.iter().chain(xi).copied()))
    }

    pub fn dof(&self) -> usize {
        self.0.len() / 2
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn x(&self) -> &[f64] {
        &self.0.as_slice()[..self.dof()]
    }

    pub fn xi(&self) -> &[f64] {
        &self.0.as_slice()[self.dof()..]
    }
}

pub trait HamiltonianSystem: Sync {
    fn dof(&self) -> usize;
    fn energy(&self, z: &DVector<f64>) -> f64;
    fn gradient(&self, z: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64>;

    /// Exact flow and monodromy at time `t`, when known.
    fn closed_form(&self, _z: &DVector<f64>, _t: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        None
    }

    /// A coordinate box containing the sublevel set `{H <= e}`.
    fn sublevel_box(&self, _e: f64) -> Option<Vec<(f64, f64)>> {
        None
    }
}

/// Largest relative discrepancy between `gradient` and central differences of `energy`.
pub fn gradient_consistency<S: HamiltonianSystem + ?Sized>(system: &S, z: &DVector<f64>) -> f64 {
    let g = system.gradient(z);
    let scale = g.amax().max(1e-300);
    (0..z.len())
        .map(|i| {
            let step = 1e-5 * (1.0 + z[i].abs());
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += step;
            zm[i] -= step;
            let fd = (system.energy(&zp) - system.energy(&zm)) / (2.0 * step);
            (fd - g[i]).abs() / scale
        })
        .fold(0.0, f64::max)
}

/// `H = (|xi|^2 + sum w_j^2 x_j^2) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticHamiltonian {
    w: Vec<f64>,
}

impl QuadraticHamiltonian {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Precondition("frequency vector is empty".into()));
        }
        if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Precondition(format!("frequencies must be positive and finite: {w:?}")));
        }
        Ok(Self { w })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.w
    }

    /// `F_j = (xi_j^2 + w_j^2 x_j^2) / 2`.
    pub fn component_energy(&self, j: usize, z: &DVector<f64>) -> f64 {
        let n = self.w.len();
        0.5 * (z[n + j] * z[n + j] + self.w[j] * self.w[j] * z[j] * z[j])
    }

    pub fn monodromy_matrix(&self, t: f64) -> DMatrix<f64> {
        let n = self.w.len();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for (j, &wj) in self.w.iter().enumerate() {
            let (s, c) = (wj * t).sin_cos();
            m[(j, j)] = c;
            m[(j, n + j)] = s / wj;
            m[(n + j, j)] = -wj * s;
            m[(n + j, n + j)] = c;
        }
        m
    }

    /// Exact `d/dE Vol{H <= E} = (2 pi)^n E^(n-1) / ((n-1)! prod w)`.
    pub fn liouville_measure_exact(&self, e: f64) -> f64 {
        oscillator_shell_measure(&self.w, e)
    }
}

fn oscillator_shell_measure(w: &[f64], e: f64) -> f64 {
    let q = w.len() as i32;
    let factorial: f64 = (1..q).map(f64::from).product();
    (2.0 * std::f64::consts::PI).powi(q) * e.powi(q - 1) / (factorial * w.iter().product::<f64>())
}

impl HamiltonianSystem for QuadraticHamiltonian {
    fn dof(&self) -> usize {
        self.w.len()
    }

    fn energy(&self, z: &DVector<f64>) -> f64 {
        (0..self.w.len()).map(|j| self.component_energy(j, z)).sum()
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.w.len();
        DVector::from_fn(2 * n, |i, _| if i < n { self.w[i] * self.w[i] * z[i] } else { z[i] })
    }

    fn hessian(&self, _z: &DVector<f64>) -> DMatrix<f64> {
        let n = self.w.len();
        DMatrix::from_diagonal(&DVector::from_fn(2 * n, |i, _| if i < n { self.w[i] * self.w[i] } else { 1.0 }))
    }

    fn closed_form(&self, z: &DVector<f64>, t: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let m = self.monodromy_matrix(t);
        Some((&m * z, m))
    }

    fn sublevel_box(&self, e: f64) -> Option<Vec<(f64, f64)>> {
        let r = (2.0 * e.max(0.0)).sqrt();
        let mut b: Vec<(f64, f64)> = self.w.iter().map(|w| (-r / w, r / w)).collect();
        b.extend(self.w.iter().map(|_| (-r, r)));
        Some(b)
    }
}

/// `H = |xi|^2/2 + sum w_j^2 x_j^2/2 + g/4 sum x_j^4 + c/2 sum_{i<j} x_i^2 x_j^2`.
///
/// A non-separable test system with no closed-form flow.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticOscillator {
    w: Vec<f64>,
    quartic: f64,
    coupling: f64,
}

impl QuarticOscillator {
    pub fn new(w: Vec<f64>, quartic: f64, coupling: f64) -> Result<Self> {
        QuadraticHamiltonian::new(w.clone())?;
        if !(quartic >= 0.0 && coupling >= 0.0) {
            return Err(Error::Precondition("quartic and coupling strengths must be non-negative".into()));
        }
        Ok(Self { w, quartic, coupling })
    }

    fn others_sq(&self, x: &[f64], i: usize) -> f64 {
        x.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v * v).sum()
    }
}

impl HamiltonianSystem for QuarticOscillator {
    fn dof(&self) -> usize {
        self.w.len()
    }

    fn energy(&self, z: &DVector<f64>) -> f64 {
        let n = self.w.len();
        let x = &z.as_slice()[..n];
        let mut e = 0.0;
        for i in 0..n {
            e += 0.5 * z[n + i] * z[n + i] + 0.5 * self.w[i] * self.w[i] * x[i] * x[i];
            e += 0.25 * self.quartic * x[i].powi(4);
            for j in i + 1..n {
                e += 0.5 * self.coupling * x[i] * x[i] * x[j] * x[j];
            }
        }
        e
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.w.len();
        let x = &z.as_slice()[..n];
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                self.w[i] * self.w[i] * x[i] + self.quartic * x[i].powi(3) + self.coupling * x[i] * self.others_sq(x, i)
            } else {
                z[i]
            }
        })
    }

    fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let n = self.w.len();
        let x = &z.as_slice()[..n];
        DMatrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) if i == j => {
                self.w[i] * self.w[i] + 3.0 * self.quartic * x[i] * x[i] + self.coupling * self.others_sq(x, i)
            }
            (true, true) => 2.0 * self.coupling * x[i] * x[j],
            (false, false) if i == j => 1.0,
            _ => 0.0,
        })
    }

    fn sublevel_box(&self, e: f64) -> Option<Vec<(f64, f64)>> {
        QuadraticHamiltonian { w: self.w.clone() }.sublevel_box(e)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    /// Largest Runge–Kutta step.
    pub max_step: f64,
    /// Allowed `|H(z_t) - H(z_0)|`, relative to `max(1, |H(z_0)|)`.
    pub tol_energy: f64,
    /// Step-count cap before declaring step-size collapse.
    pub max_steps: usize,
    /// Number of equal sub-intervals at whose ends the trajectory is sampled.
    pub samples: usize,
    /// Integrate numerically even when a closed form is available.
    pub force_numeric: bool,
    pub tol_symp: f64,
    /// Periodicity acceptance `|flow(T, z) - z|`.
    pub tol_per: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            max_step: 2.5e-3,
            tol_energy: 1e-10,
            max_steps: 1 << 24,
            samples: 1,
            force_numeric: false,
            tol_symp: 1e-8,
            tol_per: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub times: Vec<f64>,
    pub points: Vec<DVector<f64>>,
    pub monodromies: Vec<DMatrix<f64>>,
    pub energy_drift: f64,
    pub steps: usize,
}

impl FlowResult {
    pub fn final_point(&self) -> &DVector<f64> {
        self.points.last().expect("flow results are never empty")
    }

    pub fn final_monodromy(&self) -> &DMatrix<f64> {
        self.monodromies.last().expect("flow results are never empty")
    }
}

struct Rk4Output {
    points: Vec<DVector<f64>>,
    monodromies: Vec<DMatrix<f64>>,
    action: f64,
    drift: f64,
}

/// Classical RK4 on `(z, M, action)` with `steps` equal steps, sampled every `steps / samples`.
fn rk4<S: HamiltonianSystem + ?Sized>(system: &S, z0: &DVector<f64>, t: f64, steps: usize, samples: usize) -> Rk4Output {
    let d = z0.len();
    let n = d / 2;
    let j = symplectic_j(PhaseDim::from_phase_len(d).expect("even phase length"));
    let rhs = |z: &DVector<f64>, m: &DMatrix<f64>| {
        let g = system.gradient(z);
        let zdot = apply_j(&g);
        let mdot = &j * system.hessian(z) * m;
        let adot: f64 = (0..n).map(|i| z[n + i] * g[n + i]).sum();
        (zdot, mdot, adot)
    };
    let dt = t / steps as f64;
    let e0 = system.energy(z0);
    let scale = e0.abs().max(1.0);
    let mut z = z0.clone();
    let mut m = DMatrix::<f64>::identity(d, d);
    let mut a = 0.0;
    let mut drift: f64 = 0.0;
    let mut points = vec![z.clone()];
    let mut monodromies = vec![m.clone()];
    let every = steps / samples;
    for step in 1..=steps {
        let (k1z, k1m, k1a) = rhs(&z, &m);
        let (k2z, k2m, k2a) = rhs(&(&z + &k1z * (dt / 2.0)), &(&m + &k1m * (dt / 2.0)));
        let (k3z, k3m, k3a) = rhs(&(&z + &k2z * (dt / 2.0)), &(&m + &k2m * (dt / 2.0)));
        let (k4z, k4m, k4a) = rhs(&(&z + &k3z * dt), &(&m + &k3m * dt));
        z += (k1z + k2z * 2.0 + k3z * 2.0 + k4z) * (dt / 6.0);
        m += (k1m + k2m * 2.0 + k3m * 2.0 + k4m) * (dt / 6.0);
        a += (k1a + 2.0 * k2a + 2.0 * k3a + k4a) * (dt / 6.0);
        drift = drift.max((system.energy(&z) - e0).abs() / scale);
        if step % every == 0 {
            points.push(z.clone());
            monodromies.push(m.clone());
        }
    }
    Rk4Output { points, monodromies, action: a, drift }
}

fn integrate<S: HamiltonianSystem + ?Sized>(system: &S, z0: &DVector<f64>, t: f64, opts: &FlowOptions) -> Result<(Rk4Output, usize)> {
    let samples = opts.samples.max(1);
    let per_sample = ((t.abs() / opts.max_step / samples as f64).ceil() as usize).max(1);
    let mut steps = per_sample * samples;
    loop {
        let out = rk4(system, z0, t, steps, samples);
        if out.drift <= opts.tol_energy {
            return Ok((out, steps));
        }
        if steps * 2 > opts.max_steps {
            return Err(Error::StepSizeCollapse { steps, drift: out.drift });
        }
        steps *= 2;
    }
}

fn check_dims<S: HamiltonianSystem + ?Sized>(system: &S, z: &PhasePoint) -> Result<()> {
    if z.dof() != system.dof() {
        return Err(Error::DimensionMismatch { expected: system.dof(), found: z.dof() });
    }
    Ok(())
}

/// Trajectory of `z0` up to time `t`.
pub fn flow<S: HamiltonianSystem + ?Sized>(system: &S, z0: &PhasePoint, t: f64, opts: &FlowOptions) -> Result<FlowResult> {
    check_dims(system, z0)?;
    if !t.is_finite() {
        return Err(Error::Precondition("flow time must be finite".into()));
    }
    let z = z0.as_vector();
    let samples = opts.samples.max(1);
    let times: Vec<f64> = (0..=samples).map(|k| t * k as f64 / samples as f64).collect();
    if !opts.force_numeric && system.closed_form(z, 0.0).is_some() {
        let e0 = system.energy(z);
        let scale = e0.abs().max(1.0);
        let (points, monodromies): (Vec<_>, Vec<_>) = times
            .iter()
            .map(|&s| system.closed_form(z, s).expect("closed form available"))
            .unzip();
        let energy_drift = points
            .iter()
            .map(|p| (system.energy(p) - e0).abs() / scale)
            .fold(0.0, f64::max);
        if energy_drift > opts.tol_energy {
            return Err(Error::EnergyDrift { drift: energy_drift, tol: opts.tol_energy });
        }
        return Ok(FlowResult { times, points, monodromies, energy_drift, steps: 0 });
    }
    let (out, steps) = integrate(system, z, t, opts)?;
    Ok(FlowResult { times, points: out.points, monodromies: out.monodromies, energy_drift: out.drift, steps })
}

/// Monodromy `M_z(T)`, from the closed form when available and from the
/// variational equation otherwise.
pub fn monodromy<S: HamiltonianSystem + ?Sized>(system: &S, z0: &PhasePoint, t: f64, opts: &FlowOptions) -> Result<Monodromy> {
    let single = FlowOptions { samples: 1, ..*opts };
    let result = flow(system, z0, t, &single)?;
    Monodromy::new(result.final_monodromy().clone(), z0.as_vector().clone(), t, opts.tol_symp)
}

/// Loop action `int_0^T xi . dx/dt dt` of a periodic trajectory.
pub fn action<S: HamiltonianSystem + ?Sized>(system: &S, z0: &PhasePoint, t: f64, opts: &FlowOptions) -> Result<f64> {
    check_dims(system, z0)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let z = z0.as_vector();
    let n = system.dof();
    let integrand = |p: &DVector<f64>| {
        let g = system.gradient(p);
        (0..n).map(|i| p[n + i] * g[n + i]).sum::<f64>()
    };
    let (end, value) = if !opts.force_numeric && system.closed_form(z, 0.0).is_some() {
        let panels = ((t.abs() * 4.0).ceil() as usize).max(1);
        let rule = GaussLegendre::new(16);
        let value = rule.integrate_composite(0.0, t, panels, |s| {
            integrand(&system.closed_form(z, s).expect("closed form available").0)
        });
        (system.closed_form(z, t).expect("closed form available").0, value)
    } else {
        let (out, _) = integrate(system, z, t, &FlowOptions { samples: 1, ..*opts })?;
        (out.points.last().expect("non-empty").clone(), out.action)
    };
    let distance = (&end - z).norm();
    if distance > opts.tol_per {
        return Err(Error::NotPeriodic { distance });
    }
    Ok(value)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub value: f64,
    pub std_err: f64,
    pub samples: u64,
    pub hits: u64,
}

impl MonteCarloEstimate {
    pub fn within_sigmas(&self, exact: f64, k: f64) -> bool {
        (self.value - exact).abs() <= k * self.std_err
    }
}

const MC_CHUNK: u64 = 1 << 16;

/// `int_{Sigma_E} dsigma / |grad H|` as `d/dE Vol{H <= E}`, estimated by
/// uniform sampling of the shell `|H - E| < delta` inside a bounding box.
pub fn liouville_measure<S: HamiltonianSystem + ?Sized>(system: &S, e: f64, n_samples: u64, seed: u64) -> Result<MonteCarloEstimate> {
    let delta = 0.05 * e.abs().max(1e-3);
    let bounds = system
        .sublevel_box(e + delta)
        .ok_or_else(|| Error::Precondition("system does not provide a bounding box for its sublevel sets".into()))?;
    let volume: f64 = bounds.iter().map(|(lo, hi)| hi - lo).product();
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let counts: Vec<u64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = MC_CHUNK.min(n_samples - c * MC_CHUNK);
            let mut z = DVector::zeros(bounds.len());
            (0..count)
                .filter(|_| {
                    for (i, (lo, hi)) in bounds.iter().enumerate() {
                        z[i] = rng.gen_range(*lo..*hi);
                    }
                    (system.energy(&z) - e).abs() < delta
                })
                .count() as u64
        })
        .collect();
    let hits: u64 = counts.iter().sum();
    if hits < 100 {
        return Err(Error::MonteCarloVariance { hits });
    }
    let p = hits as f64 / n_samples as f64;
    let scale = volume / (2.0 * delta);
    Ok(MonteCarloEstimate {
        value: scale * p,
        std_err: scale * (p * (1.0 - p) / n_samples as f64).sqrt(),
        samples: n_samples,
        hits,
    })
}

/// Liouville measure of the sub-oscillator on the modes in `resonant`.
pub fn resonant_liouville_measure(w: &[f64], resonant: &[usize], e: f64) -> Result<f64> {
    if resonant.is_empty() {
        return Err(Error::EmptyResonantSet);
    }
    let sub: Vec<f64> = resonant
        .iter()
        .map(|&j| w.get(j).copied().ok_or(Error::DimensionMismatch { expected: w.len(), found: j + 1 }))
        .collect::<Result<_>>()?;
    Ok(oscillator_shell_measure(&sub, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    #[test]
    fn quarter_period_rotation() {
        let h = QuadraticHamiltonian::new(vec![1.0]).unwrap();
        let z0 = PhasePoint::from_slice(&[1.0, 0.0]).unwrap();
        let r = flow(&h, &z0, FRAC_PI_2, &FlowOptions::default()).unwrap();
        assert_relative_eq!(r.final_point()[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(r.final_point()[1], -1.0, epsilon = 1e-15);
        let m = monodromy(&h, &z0, FRAC_PI_2, &FlowOptions::default()).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((m.matrix() - expected).amax() < 1e-15);
    }

    #[test]
    fn zero_time_is_identity() {
        let h = QuarticOscillator::new(vec![1.0, 1.3], 0.2, 0.1).unwrap();
        let z0 = PhasePoint::from_slice(&[0.3, -0.2, 0.1, 0.5]).unwrap();
        let r = flow(&h, &z0, 0.0, &FlowOptions::default()).unwrap();
        assert_eq!(r.final_point(), z0.as_vector());
        assert_eq!(action(&h, &z0, 0.0, &FlowOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn irrational_pair_after_two_pi() {
        let h = QuadraticHamiltonian::new(vec![1.0, SQRT_2]).unwrap();
        let z0 = PhasePoint::from_slice(&[0.4, 0.7, -0.2, 0.3]).unwrap();
        let end = flow(&h, &z0, 2.0 * PI, &FlowOptions::default()).unwrap().final_point().clone();
        assert_relative_eq!(end[0], 0.4, epsilon = 1e-14);
        assert_relative_eq!(end[2], -0.2, epsilon = 1e-14);
        let theta = 2.0 * PI * SQRT_2;
        let a = 0.7 * SQRT_2;
        let expected_x = (a * theta.cos() + 0.3 * theta.sin()) / SQRT_2;
        assert_relative_eq!(end[1], expected_x, epsilon = 1e-13);
    }

    #[test]
    fn variational_monodromy_matches_closed_form() {
        let h = QuadraticHamiltonian::new(vec![1.0, SQRT_2]).unwrap();
        let z0 = PhasePoint::from_slice(&[0.4, 0.7, -0.2, 0.3]).unwrap();
        let exact = monodromy(&h, &z0, 1.0, &FlowOptions::default()).unwrap();
        let numeric = monodromy(&h, &z0, 1.0, &FlowOptions { force_numeric: true, ..Default::default() }).unwrap();
        assert!((exact.matrix() - numeric.matrix()).amax() < 1e-6);
    }

    #[test]
    fn quadratic_action_is_period_times_energy() {
        let h = QuadraticHamiltonian::new(vec![1.0, 2.0]).unwrap();
        let z0 = PhasePoint::from_slice(&[0.3, 0.2, 0.5, -0.4]).unwrap();
        let e = h.energy(z0.as_vector());
        let a = action(&h, &z0, 2.0 * PI, &FlowOptions::default()).unwrap();
        assert_relative_eq!(a, 2.0 * PI * e, max_relative = 1e-12);
        let numeric = action(&h, &z0, 2.0 * PI, &FlowOptions { force_numeric: true, ..Default::default() }).unwrap();
        assert_relative_eq!(numeric, 2.0 * PI * e, max_relative = 1e-8);
        assert!(matches!(
            action(&h, &z0, 1.0, &FlowOptions::default()),
            Err(Error::NotPeriodic { .. })
        ));
    }

    #[test]
    fn closed_form_liouville_values() {
        let h = QuadraticHamiltonian::new(vec![1.0, SQRT_2]).unwrap();
        assert_relative_eq!(h.liouville_measure_exact(1.0), 4.0 * PI * PI / SQRT_2, max_relative = 1e-14);
        let h1 = QuadraticHamiltonian::new(vec![1.0]).unwrap();
        assert_relative_eq!(h1.liouville_measure_exact(1.0), 2.0 * PI, max_relative = 1e-14);
        let scaled = QuadraticHamiltonian::new(vec![3.0, 3.0 * SQRT_2]).unwrap();
        assert_relative_eq!(scaled.liouville_measure_exact(1.0), h.liouville_measure_exact(1.0) / 9.0, max_relative = 1e-14);
    }

    #[test]
    fn monte_carlo_liouville_within_three_sigma() {
        let h = QuadraticHamiltonian::new(vec![1.0, SQRT_2]).unwrap();
        let est = liouville_measure(&h, 1.0, 1 << 21, 7).unwrap();
        assert!(est.within_sigmas(h.liouville_measure_exact(1.0), 3.0), "{est:?}");
        let h1 = QuadraticHamiltonian::new(vec![1.0]).unwrap();
        let est = liouville_measure(&h1, 1.0, 1 << 20, 11).unwrap();
        assert!(est.within_sigmas(2.0 * PI, 3.0), "{est:?}");
    }

    #[test]
    fn monte_carlo_is_deterministic_across_pools() {
        let h = QuadraticHamiltonian::new(vec![1.0, SQRT_2]).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| liouville_measure(&h, 1.0, 300_000, 3).unwrap());
        let b = four.install(|| liouville_measure(&h, 1.0, 300_000, 3).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn resonant_measures() {
        let w = [1.0, SQRT_2];
        assert_relative_eq!(resonant_liouville_measure(&w, &[0], 1.0).unwrap(), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(
            resonant_liouville_measure(&w, &[0, 1], 1.0).unwrap(),
            QuadraticHamiltonian::new(w.to_vec()).unwrap().liouville_measure_exact(1.0),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            resonant_liouville_measure(&[1.0, 1.0, SQRT_2], &[0, 1], 1.0).unwrap(),
            4.0 * PI * PI,
            max_relative = 1e-14
        );
        assert!(matches!(resonant_liouville_measure(&w, &[], 1.0), Err(Error::EmptyResonantSet)));
    }

    #[test]
    fn quartic_gradient_and_energy_conservation() {
        let h = QuarticOscillator::new(vec![1.0, 1.7], 0.3, 0.2).unwrap();
        let z0 = PhasePoint::from_slice(&[0.5, -0.3, 0.2, 0.6]).unwrap();
        assert!(gradient_consistency(&h, z0.as_vector()) < 1e-6);
        let r = flow(&h, &z0, 3.0, &FlowOptions { samples: 3, ..Default::default() }).unwrap();
        assert_eq!(r.points.len(), 4);
        assert!(r.energy_drift <= 1e-10);
        let m = monodromy(&h, &z0, 3.0, &FlowOptions::default()).unwrap();
        assert!(m.symplectic_defect() < 1e-8);
    }
}
