//! Integrable systems written in action-angle form `H(theta, I) = H~(I)`:
//! frequency maps, resonant tori, the Gaussian curvature of the action-space
//! energy surface, and the amplitudes of the torus sum.

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::HamiltonianSystem;
use crate::error::{Error, Result};
use crate::symplectic::{apply_j, kernel, symplectic_defect, Monodromy, RankPolicy, Subspace};

pub trait ActionAngleSystem: Sync {
    fn dim(&self) -> usize;
    fn energy(&self, actions: &DVector<f64>) -> f64;
    fn frequencies(&self, actions: &DVector<f64>) -> DVector<f64>;
    fn frequency_hessian(&self, actions: &DVector<f64>) -> DMatrix<f64>;
    /// Coordinate box of admissible actions.
    fn domain(&self) -> &[(f64, f64)];

    fn contains(&self, actions: &DVector<f64>) -> bool {
        actions.len() == self.dim() && actions.iter().zip(self.domain()).all(|(v, (lo, hi))| v >= lo && v <= hi)
    }
}

fn symmetric_box(n: usize, half: f64) -> Vec<(f64, f64)> {
    vec![(-half, half); n]
}

/// `H~(I) = |I|^2 / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatTorus {
    domain: Vec<(f64, f64)>,
}

impl FlatTorus {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_domain(n, 4.0)
    }

    pub fn with_domain(n: usize, half_width: f64) -> Result<Self> {
        if n == 0 || !(half_width > 0.0) {
            return Err(Error::Precondition("flat torus needs n >= 1 and a positive domain".into()));
        }
        Ok(Self { domain: symmetric_box(n, half_width) })
    }
}

impl ActionAngleSystem for FlatTorus {
    fn dim(&self) -> usize {
        self.domain.len()
    }

    fn energy(&self, actions: &DVector<f64>) -> f64 {
        0.5 * actions.norm_squared()
    }

    fn frequencies(&self, actions: &DVector<f64>) -> DVector<f64> {
        actions.clone()
    }

    fn frequency_hessian(&self, _actions: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim())
    }

    fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }
}

/// `H~(I) = <b, I> + <A I, I>/2 + sum_k c_k <u_k, I>^4`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialAction {
    linear: DVector<f64>,
    quadratic: DMatrix<f64>,
    quartic: Vec<(f64, DVector<f64>)>,
    domain: Vec<(f64, f64)>,
}

impl PolynomialAction {
    pub fn new(
        linear: DVector<f64>,
        quadratic: DMatrix<f64>,
        quartic: Vec<(f64, DVector<f64>)>,
        half_width: f64,
    ) -> Result<Self> {
        let n = linear.len();
        if n == 0 || quadratic.nrows() != n || quadratic.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: quadratic.nrows() });
        }
        if (&quadratic - quadratic.transpose()).amax() > 1e-12 * quadratic.amax().max(1.0) {
            return Err(Error::Precondition("quadratic coefficient matrix must be symmetric".into()));
        }
        if let Some((_, u)) = quartic.iter().find(|(_, u)| u.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: u.len() });
        }
        if !(half_width > 0.0) {
            return Err(Error::Precondition("domain half-width must be positive".into()));
        }
        Ok(Self { linear, quadratic, quartic, domain: symmetric_box(n, half_width) })
    }

    /// Linear `H~ = <w, I>`: the harmonic oscillator in action variables.
    pub fn linear(w: DVector<f64>, half_width: f64) -> Result<Self> {
        let n = w.len();
        Self::new(w, DMatrix::zeros(n, n), Vec::new(), half_width)
    }
}

impl ActionAngleSystem for PolynomialAction {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn energy(&self, actions: &DVector<f64>) -> f64 {
        self.linear.dot(actions)
            + 0.5 * (&self.quadratic * actions).dot(actions)
            + self.quartic.iter().map(|(c, u)| c * u.dot(actions).powi(4)).sum::<f64>()
    }

    fn frequencies(&self, actions: &DVector<f64>) -> DVector<f64> {
        let mut w = &self.linear + &self.quadratic * actions;
        for (c, u) in &self.quartic {
            w += u * (4.0 * c * u.dot(actions).powi(3));
        }
        w
    }

    fn frequency_hessian(&self, actions: &DVector<f64>) -> DMatrix<f64> {
        let mut h = self.quadratic.clone();
        for (c, u) in &self.quartic {
            h += u * u.transpose() * (12.0 * c * u.dot(actions).powi(2));
        }
        h
    }

    fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyData {
    pub w: DVector<f64>,
    pub w_prime: DMatrix<f64>,
}

/// `w(I) = grad H~(I)` and `w'(I)`, validated against central differences.
pub fn frequency_map<S: ActionAngleSystem + ?Sized>(system: &S, actions: &DVector<f64>) -> Result<FrequencyData> {
    if !system.contains(actions) {
        return Err(Error::OutsideDomain);
    }
    let w = system.frequencies(actions);
    let w_prime = system.frequency_hessian(actions);
    let n = system.dim();
    let mut fd_grad = DVector::zeros(n);
    let mut fd_hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let step = 1e-5 * (1.0 + actions[i].abs());
        let mut plus = actions.clone();
        let mut minus = actions.clone();
        plus[i] += step;
        minus[i] -= step;
        fd_grad[i] = (system.energy(&plus) - system.energy(&minus)) / (2.0 * step);
        let column = (system.frequencies(&plus) - system.frequencies(&minus)) / (2.0 * step);
        fd_hess.set_column(i, &column);
    }
    let rel = ((&fd_grad - &w).amax() / w.amax().max(1.0)).max((&fd_hess - &w_prime).amax() / w_prime.amax().max(1.0));
    if rel > 1e-5 {
        return Err(Error::DerivativeMismatch { rel });
    }
    Ok(FrequencyData { w, w_prime })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NondegeneracyReport {
    pub det: f64,
    pub nondegenerate: bool,
}

/// `det w'(I) != 0`.
pub fn check_nondegenerate<S: ActionAngleSystem + ?Sized>(system: &S, actions: &DVector<f64>) -> Result<NondegeneracyReport> {
    let data = frequency_map(system, actions)?;
    let det = data.w_prime.determinant();
    let scale = data.w_prime.amax().max(1.0).powi(system.dim() as i32);
    Ok(NondegeneracyReport { det, nondegenerate: det.abs() > 1e-10 * scale })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsochronyReport {
    pub bracket: f64,
    pub isochronous: bool,
}

/// `<w'(I)^{-1} w(I), w(I)> != 0`.
pub fn check_isochronous<S: ActionAngleSystem + ?Sized>(system: &S, actions: &DVector<f64>) -> Result<IsochronyReport> {
    let nd = check_nondegenerate(system, actions)?;
    if !nd.nondegenerate {
        return Err(Error::SingularFrequencyHessian);
    }
    let data = frequency_map(system, actions)?;
    let solved = data.w_prime.clone().lu().solve(&data.w).ok_or(Error::SingularFrequencyHessian)?;
    let bracket = solved.dot(&data.w);
    Ok(IsochronyReport { bracket, isochronous: bracket.abs() > 1e-10 * data.w.norm_squared().max(1e-300) })
}

fn adjugate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    DMatrix::from_fn(n, n, |i, j| {
        let minor = m.clone().remove_row(j).remove_column(i);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

/// Gaussian curvature of `{H~ = H~(I)}` at `I` from the frequency data:
/// `K = (-1)^{n-1} <adj(w') w, w> / |w|^{n+1}`.
///
/// Using the adjugate keeps the formula valid when `w'` is singular.
pub fn curvature_from_frequencies<S: ActionAngleSystem + ?Sized>(system: &S, actions: &DVector<f64>) -> Result<f64> {
    let data = frequency_map(system, actions)?;
    let norm = data.w.norm();
    if norm == 0.0 {
        return Err(Error::Precondition("frequency vanishes: energy surface is singular".into()));
    }
    let n = system.dim() as i32;
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    Ok(sign * (adjugate(&data.w_prime) * &data.w).dot(&data.w) / norm.powi(n + 1))
}

const GRAPH_STEP: f64 = 1e-3;

/// Gaussian curvature from a local graph parametrization of the energy
/// surface, with unit normal `grad H~ / |grad H~|`, by finite differences.
pub fn curvature_from_parametrization<S: ActionAngleSystem + ?Sized>(system: &S, actions: &DVector<f64>) -> Result<f64> {
    let n = system.dim();
    let grad = system.frequencies(actions);
    let norm = grad.norm();
    if norm == 0.0 {
        return Err(Error::Precondition("gradient vanishes: energy surface is singular".into()));
    }
    let e = system.energy(actions);
    let mut axes: Vec<usize> = (0..n).collect();
    axes.sort_by(|&a, &b| grad[b].abs().total_cmp(&grad[a].abs()));
    for axis in axes {
        if grad[axis] == 0.0 {
            break;
        }
        if let Some(k) = graph_curvature(system, actions, e, axis, grad[axis] / norm) {
            return Ok(k);
        }
    }
    Err(Error::ImplicitSolveFailed)
}

fn graph_curvature<S: ActionAngleSystem + ?Sized>(system: &S, base: &DVector<f64>, e: f64, axis: usize, normal_component: f64) -> Option<f64> {
    let n = system.dim();
    let others: Vec<usize> = (0..n).filter(|&i| i != axis).collect();
    let height = |offsets: &[(usize, f64)]| -> Option<f64> {
        let mut p = base.clone();
        for &(slot, delta) in offsets {
            p[others[slot]] += delta;
        }
        let mut t = p[axis];
        for _ in 0..60 {
            p[axis] = t;
            let residual = system.energy(&p) - e;
            let slope = system.frequencies(&p)[axis];
            if slope == 0.0 {
                return None;
            }
            let dt = residual / slope;
            t -= dt;
            if dt.abs() <= 1e-15 * (1.0 + t.abs()) {
                return Some(t);
            }
        }
        None
    };
    let m = n - 1;
    let s = GRAPH_STEP;
    let g0 = height(&[])?;
    let mut first = DVector::zeros(m);
    let mut second = DMatrix::zeros(m, m);
    for i in 0..m {
        let gp = height(&[(i, s)])?;
        let gm = height(&[(i, -s)])?;
        first[i] = (gp - gm) / (2.0 * s);
        second[(i, i)] = (gp - 2.0 * g0 + gm) / (s * s);
        for j in 0..i {
            let pp = height(&[(i, s), (j, s)])?;
            let pm = height(&[(i, s), (j, -s)])?;
            let mp = height(&[(i, -s), (j, s)])?;
            let mm = height(&[(i, -s), (j, -s)])?;
            let v = (pp - pm - mp + mm) / (4.0 * s * s);
            second[(i, j)] = v;
            second[(j, i)] = v;
        }
    }
    let metric = DMatrix::identity(m, m) + &first * first.transpose();
    let shape = second * normal_component;
    Some(shape.determinant() / metric.determinant())
}

/// A resonant torus: `T w(I) = 2 pi M` with `H~(I) = E`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicTorus {
    pub period: f64,
    pub actions: Vec<f64>,
    pub winding: Vec<i64>,
    pub residual: f64,
}

impl PeriodicTorus {
    pub fn actions_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.actions)
    }

    pub fn winding_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.winding.len(), self.winding.iter().map(|&k| k as f64))
    }

    pub fn winding_norm(&self) -> f64 {
        self.winding_vector().norm()
    }

    pub fn winding_norm_sq(&self) -> i64 {
        self.winding.iter().map(|k| k * k).sum()
    }

    /// `2 pi <M, I>`.
    pub fn action(&self) -> f64 {
        2.0 * PI * self.winding_vector().dot(&self.actions_vector())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusEnumeration {
    pub tori: Vec<PeriodicTorus>,
    /// Winding vectors that admitted more than one solution in the window.
    pub multiple_solutions: Vec<Vec<i64>>,
}

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_ITERS: usize = 50;
const SEEDS_PER_AXIS: usize = 5;

fn integer_vectors(n: usize, bound: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-bound..=bound).map(move |k| {
                    let mut next = v.clone();
                    next.push(k);
                    next
                })
            })
            .collect();
    }
    out.into_iter()
        .filter(|v| {
            let sq: i64 = v.iter().map(|k| k * k).sum();
            sq > 0 && sq <= bound * bound
        })
        .collect()
}

fn seeds<S: ActionAngleSystem + ?Sized>(system: &S, e: f64) -> Vec<DVector<f64>> {
    let n = system.dim();
    let total = SEEDS_PER_AXIS.pow(n as u32);
    (0..total)
        .filter_map(|mut idx| {
            let mut p = DVector::zeros(n);
            for (i, (lo, hi)) in system.domain().iter().enumerate() {
                let k = idx % SEEDS_PER_AXIS;
                idx /= SEEDS_PER_AXIS;
                p[i] = lo + (hi - lo) * (k as f64 + 0.5) / SEEDS_PER_AXIS as f64;
            }
            for _ in 0..30 {
                let g = system.frequencies(&p);
                let g2 = g.norm_squared();
                if g2 < 1e-20 {
                    return None;
                }
                let r = system.energy(&p) - e;
                p -= g * (r / g2);
                if r.abs() < 1e-12 {
                    break;
                }
            }
            ((system.energy(&p) - e).abs() < 1e-8 && system.contains(&p)).then_some(p)
        })
        .collect()
}

fn torus_residual<S: ActionAngleSystem + ?Sized>(system: &S, e: f64, winding: &DVector<f64>, period: f64, actions: &DVector<f64>) -> f64 {
    (system.frequencies(actions) * period - winding * (2.0 * PI)).norm() + (system.energy(actions) - e).abs()
}

fn newton_torus<S: ActionAngleSystem + ?Sized>(system: &S, e: f64, winding: &DVector<f64>, seed: &DVector<f64>) -> Option<(f64, DVector<f64>, f64)> {
    let n = system.dim();
    let w0 = system.frequencies(seed);
    let w2 = w0.norm_squared();
    if w2 == 0.0 {
        return None;
    }
    let mut period = 2.0 * PI * winding.dot(&w0) / w2;
    let mut actions = seed.clone();
    let mut residual = torus_residual(system, e, winding, period, &actions);
    for _ in 0..NEWTON_ITERS {
        if residual <= NEWTON_TOL {
            return Some((period, actions, residual));
        }
        let w = system.frequencies(&actions);
        let wp = system.frequency_hessian(&actions);
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            jac[(i, 0)] = w[i];
            for j in 0..n {
                jac[(i, j + 1)] = period * wp[(i, j)];
            }
            jac[(n, i + 1)] = w[i];
            rhs[i] = period * w[i] - 2.0 * PI * winding[i];
        }
        rhs[n] = system.energy(&actions) - e;
        let step = jac.lu().solve(&rhs)?;
        let mut scale = 1.0;
        loop {
            let t_next = period - scale * step[0];
            let a_next = &actions - step.rows(1, n) * scale;
            if system.contains(&a_next) {
                let r_next = torus_residual(system, e, winding, t_next, &a_next);
                if r_next < residual {
                    period = t_next;
                    actions = a_next;
                    residual = r_next;
                    break;
                }
            }
            scale *= 0.5;
            if scale < 1e-4 {
                return None;
            }
        }
    }
    (residual <= NEWTON_TOL).then_some((period, actions, residual))
}

/// All resonant tori with `|M| <= m_bound` and period in `window`.
pub fn enumerate_tori<S: ActionAngleSystem + ?Sized>(system: &S, e: f64, window: (f64, f64), m_bound: i64) -> Result<TorusEnumeration> {
    if m_bound < 1 {
        return Err(Error::Precondition("winding bound must be at least 1".into()));
    }
    let starts = seeds(system, e);
    if starts.is_empty() {
        return Err(Error::Precondition(format!("no seed reaches the energy surface H = {e}")));
    }
    let per_winding: Vec<(Vec<PeriodicTorus>, bool)> = integer_vectors(system.dim(), m_bound)
        .into_par_iter()
        .map(|winding| {
            let mv = DVector::from_iterator(winding.len(), winding.iter().map(|&k| k as f64));
            let mut found: Vec<PeriodicTorus> = Vec::new();
            for seed in &starts {
                let Some((period, actions, residual)) = newton_torus(system, e, &mv, seed) else { continue };
                if period < window.0 || period > window.1 {
                    continue;
                }
                let duplicate = found.iter().any(|t| (t.actions_vector() - &actions).amax() <= 1e-6);
                if !duplicate {
                    found.push(PeriodicTorus {
                        period,
                        actions: actions.iter().copied().collect(),
                        winding: winding.clone(),
                        residual,
                    });
                }
            }
            let multiple = found.len() > 1;
            (found, multiple)
        })
        .collect();
    let mut tori = Vec::new();
    let mut multiple_solutions = Vec::new();
    for (found, multiple) in per_winding {
        if multiple {
            log::warn!("winding {:?} admits {} tori in the window", found[0].winding, found.len());
            multiple_solutions.push(found[0].winding.clone());
        }
        tori.extend(found);
    }
    tori.sort_by(|a, b| a.winding_norm_sq().cmp(&b.winding_norm_sq()).then_with(|| a.winding.cmp(&b.winding)));
    Ok(TorusEnumeration { tori, multiple_solutions })
}

/// Data entering one term of the torus sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerryTaborTerm {
    pub torus: PeriodicTorus,
    pub frequency_norm: f64,
    pub curvature: f64,
    pub winding_norm: f64,
    pub action: f64,
    pub dim: usize,
}

impl BerryTaborTerm {
    pub fn new<S: ActionAngleSystem + ?Sized>(system: &S, torus: &PeriodicTorus) -> Result<Self> {
        let actions = torus.actions_vector();
        let curvature = curvature_from_frequencies(system, &actions)?;
        if curvature.abs() < 1e-12 {
            return Err(Error::VanishingCurvature { curvature });
        }
        Ok(Self {
            torus: torus.clone(),
            frequency_norm: system.frequencies(&actions).norm(),
            curvature,
            winding_norm: torus.winding_norm(),
            action: torus.action(),
            dim: system.dim(),
        })
    }

    /// `beta mod 4` from `e^{i pi beta / 2} = i^{n-1} sign K`, and its two lifts mod 8.
    pub fn beta_candidates(&self) -> [i32; 2] {
        let base = (self.dim as i32 - 1) + if self.curvature < 0.0 { 2 } else { 0 };
        let b = base.rem_euclid(4);
        [b, b + 4]
    }

    pub fn check_beta(&self, beta: i32) -> Result<()> {
        if beta.rem_euclid(4) != self.beta_candidates()[0] {
            return Err(Error::InvalidPhase { beta });
        }
        Ok(())
    }

    /// `h^{(1-n)/2} / (|w| sqrt|K| |M|^{(n-1)/2})`.
    pub fn modulus(&self, h: f64) -> f64 {
        let half = (self.dim as f64 - 1.0) / 2.0;
        h.powf(-half) / (self.frequency_norm * self.curvature.abs().sqrt() * self.winding_norm.powf(half))
    }

    pub fn amplitude(&self, fhat: Complex64, h: f64, beta: i32) -> Result<Complex64> {
        self.check_beta(beta)?;
        if !(h > 0.0) {
            return Err(Error::Precondition("h must be positive".into()));
        }
        Ok(fhat * Complex64::from_polar(self.modulus(h), self.action / h + FRAC_PI_4 * beta as f64))
    }
}

/// One term of the torus sum with the phase integer `beta`.
pub fn bt_amplitude<S: ActionAngleSystem + ?Sized>(torus: &PeriodicTorus, system: &S, fhat: Complex64, h: f64, beta: i32) -> Result<Complex64> {
    BerryTaborTerm::new(system, torus)?.amplitude(fhat, h, beta)
}

/// Monodromy of the torus flow in `(theta, I)` coordinates: `[[Id, T w'], [0, Id]]`.
pub fn model_monodromy<S: ActionAngleSystem + ?Sized>(system: &S, actions: &DVector<f64>, period: f64) -> Result<Monodromy> {
    let n = system.dim();
    let wp = frequency_map(system, actions)?.w_prime;
    let mut m = DMatrix::identity(2 * n, 2 * n);
    m.view_mut((0, n), (n, n)).copy_from(&(wp * period));
    let base = DVector::from_iterator(2 * n, std::iter::repeat_n(0.0, n).chain(actions.iter().copied()));
    Monodromy::new(m, base, period, 1e-8 * (1.0 + period.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntNormReport {
    pub w_prime_invertible: bool,
    /// `ker(M - I)` equals the span of the angle directions `J grad I_j`.
    pub kernel_is_span: bool,
    pub isochronous: bool,
    /// `J grad H` lies outside `(M - I)(T Sigma_E)`.
    pub field_outside_image: bool,
    pub nilpotent: bool,
}

impl IntNormReport {
    pub fn equivalences_hold(&self) -> bool {
        self.w_prime_invertible == self.kernel_is_span
            && (self.w_prime_invertible && self.isochronous) == (self.kernel_is_span && self.field_outside_image)
            && self.nilpotent
    }
}

/// Rank checks of the normality equivalences on the model monodromy.
pub fn check_intnorm<S: ActionAngleSystem + ?Sized>(system: &S, actions: &DVector<f64>, period: f64) -> Result<IntNormReport> {
    let n = system.dim();
    let policy = RankPolicy::default();
    let monodromy = model_monodromy(system, actions, period)?;
    let a = monodromy.minus_identity();
    let fixed = kernel(&a, 1.0, policy)?;
    let angles = Subspace::coordinate(2 * n, &(0..n).collect::<Vec<_>>());
    let nd = check_nondegenerate(system, actions)?;
    let isochronous = nd.nondegenerate && check_isochronous(system, actions)?.isochronous;
    let w = system.frequencies(actions);
    let grad = DVector::from_iterator(2 * n, std::iter::repeat_n(0.0, n).chain(w.iter().copied()));
    Ok(IntNormReport {
        w_prime_invertible: nd.nondegenerate,
        kernel_is_span: fixed.same_as(&angles, 1e-8),
        isochronous,
        field_outside_image: crate::orbits::hamiltonian_field_outside_image(monodromy.matrix(), &grad, policy)?,
        nilpotent: (&a * &a).amax() <= 1e-12 * (1.0 + a.amax()),
    })
}

/// The action-angle system lifted to phase space `(theta, I)` with angles
/// reduced to `(-pi, pi]`, so that loop actions can be computed by
/// [`crate::dynamics::action`].
pub struct TorusLift<'a, S: ActionAngleSystem + ?Sized>(pub &'a S);

fn wrap_angle(theta: f64) -> f64 {
    let r = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

impl<S: ActionAngleSystem + ?Sized> HamiltonianSystem for TorusLift<'_, S> {
    fn dof(&self) -> usize {
        self.0.dim()
    }

    fn energy(&self, z: &DVector<f64>) -> f64 {
        let n = self.0.dim();
        self.0.energy(&z.rows(n, n).into_owned())
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.0.dim();
        let w = self.0.frequencies(&z.rows(n, n).into_owned());
        DVector::from_iterator(2 * n, std::iter::repeat_n(0.0, n).chain(w.iter().copied()))
    }

    fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let n = self.0.dim();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((n, n), (n, n)).copy_from(&self.0.frequency_hessian(&z.rows(n, n).into_owned()));
        h
    }

    fn closed_form(&self, z: &DVector<f64>, t: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.0.dim();
        let actions = z.rows(n, n).into_owned();
        let w = self.0.frequencies(&actions);
        let mut next = z.clone();
        for i in 0..n {
            next[i] = wrap_angle(z[i] + t * w[i]);
        }
        let mut m = DMatrix::identity(2 * n, 2 * n);
        m.view_mut((0, n), (n, n)).copy_from(&(self.0.frequency_hessian(&actions) * t));
        debug_assert!(symplectic_defect(&m) < 1e-8 * (1.0 + t.abs()));
        Some((next, m))
    }
}

/// `J grad H` of the lifted system at `(theta, I)`; the torus flow direction.
pub fn torus_flow_direction<S: ActionAngleSystem + ?Sized>(system: &S, actions: &DVector<f64>) -> DVector<f64> {
    let n = system.dim();
    let w = system.frequencies(actions);
    apply_j(&DVector::from_iterator(2 * n, std::iter::repeat_n(0.0, n).chain(w.iter().copied())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{action, FlowOptions, PhasePoint};
    use approx::assert_relative_eq;
    use std::f64::consts::SQRT_2;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn flat_torus_frequencies() {
        let s = FlatTorus::new(2).unwrap();
        let d = frequency_map(&s, &dv(&[0.3, -0.7])).unwrap();
        assert_eq!(d.w, dv(&[0.3, -0.7]));
        assert_eq!(d.w_prime, DMatrix::identity(2, 2));
        assert!(matches!(frequency_map(&s, &dv(&[5.0, 0.0])), Err(Error::OutsideDomain)));
        let nd = check_nondegenerate(&s, &dv(&[1.0, 1.0])).unwrap();
        assert_eq!(nd.det, 1.0);
        let iso = check_isochronous(&s, &dv(&[1.0, 1.0])).unwrap();
        assert_relative_eq!(iso.bracket, 2.0 * 1.0, max_relative = 1e-14);
    }

    #[test]
    fn linear_action_is_degenerate() {
        let s = PolynomialAction::linear(dv(&[1.0, SQRT_2]), 4.0).unwrap();
        let d = frequency_map(&s, &dv(&[0.5, 0.5])).unwrap();
        assert_eq!(d.w, dv(&[1.0, SQRT_2]));
        assert_eq!(d.w_prime, DMatrix::zeros(2, 2));
        assert!(!check_nondegenerate(&s, &dv(&[0.5, 0.5])).unwrap().nondegenerate);
        assert!(matches!(check_isochronous(&s, &dv(&[0.5, 0.5])), Err(Error::SingularFrequencyHessian)));
    }

    #[test]
    fn flat_torus_curvature_both_routes() {
        let s = FlatTorus::new(2).unwrap();
        let i = dv(&[SQRT_2, 0.0]);
        assert_relative_eq!(curvature_from_frequencies(&s, &i).unwrap(), -1.0 / SQRT_2, max_relative = 1e-14);
        assert_relative_eq!(curvature_from_parametrization(&s, &i).unwrap(), -1.0 / SQRT_2, max_relative = 1e-6);
        let i = dv(&[1.0, 1.0]);
        assert_relative_eq!(curvature_from_parametrization(&s, &i).unwrap(), -1.0 / SQRT_2, max_relative = 1e-6);
    }

    #[test]
    fn flat_direction_gives_zero_curvature() {
        let u = dv(&[1.0, 1.0]);
        let s = PolynomialAction::new(dv(&[0.0, 0.0]), &u * u.transpose(), vec![], 4.0).unwrap();
        let i = dv(&[0.7, 0.2]);
        assert!(curvature_from_frequencies(&s, &i).unwrap().abs() < 1e-14);
        assert!(curvature_from_parametrization(&s, &i).unwrap().abs() < 1e-6);
    }

    #[test]
    fn flat_torus_enumeration() {
        let s = FlatTorus::new(2).unwrap();
        let window = (2.0 * PI / SQRT_2 - 0.1, 2.0 * PI + 0.1);
        let found = enumerate_tori(&s, 1.0, window, 3).unwrap();
        assert!(found.multiple_solutions.is_empty());
        assert_eq!(found.tori.len(), 8);
        for t in &found.tori {
            let m = t.winding_vector();
            let expected_i = &m * (SQRT_2 / m.norm());
            assert!((t.actions_vector() - expected_i).amax() < 1e-8);
            assert_relative_eq!(t.period, 2.0 * PI * m.norm() / SQRT_2, max_relative = 1e-10);
        }
        let first = &found.tori[0];
        assert_eq!(first.winding_norm_sq(), 1);
        let diag = found.tori.iter().find(|t| t.winding == vec![1, 1]).unwrap();
        assert!((diag.actions_vector() - dv(&[1.0, 1.0])).amax() < 1e-8);
        assert_relative_eq!(diag.period, 2.0 * PI, max_relative = 1e-10);
        assert!(enumerate_tori(&s, 1.0, (0.1, 1.0), 3).unwrap().tori.is_empty());
    }

    #[test]
    fn flat_torus_amplitude() {
        let s = FlatTorus::new(2).unwrap();
        let torus = PeriodicTorus {
            period: 2.0 * PI / SQRT_2,
            actions: vec![SQRT_2, 0.0],
            winding: vec![1, 0],
            residual: 0.0,
        };
        let term = BerryTaborTerm::new(&s, &torus).unwrap();
        assert_eq!(term.beta_candidates(), [3, 7]);
        let h: f64 = 0.02;
        let expected = 1.0 / (SQRT_2 * (1.0 / SQRT_2).sqrt()) * h.powf(-0.5);
        let amp = bt_amplitude(&torus, &s, Complex64::new(1.0, 0.0), h, 7).unwrap();
        assert_relative_eq!(amp.norm(), expected, max_relative = 1e-12);
        assert_relative_eq!(term.action, torus.period * 2.0, max_relative = 1e-12);
        assert!(matches!(term.amplitude(Complex64::new(1.0, 0.0), h, 0), Err(Error::InvalidPhase { .. })));
        assert_relative_eq!(term.modulus(h) * h.sqrt(), term.modulus(h / 7.0) * (h / 7.0).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn model_monodromy_is_nilpotent_and_normal() {
        let s = FlatTorus::new(2).unwrap();
        let r = check_intnorm(&s, &dv(&[1.0, 1.0]), 2.0 * PI).unwrap();
        assert!(r.w_prime_invertible && r.kernel_is_span && r.isochronous && r.field_outside_image && r.nilpotent);
        assert!(r.equivalences_hold());
        let lin = PolynomialAction::linear(dv(&[1.0, 1.0]), 4.0).unwrap();
        let r = check_intnorm(&lin, &dv(&[0.5, 0.5]), 2.0 * PI).unwrap();
        assert!(!r.w_prime_invertible && !r.kernel_is_span);
        assert!(r.equivalences_hold());
    }

    #[test]
    fn lifted_loop_action() {
        let s = FlatTorus::new(2).unwrap();
        let torus = PeriodicTorus { period: 2.0 * PI, actions: vec![1.0, 1.0], winding: vec![1, 1], residual: 0.0 };
        let z = PhasePoint::from_slice(&[0.5, -0.3, 1.0, 1.0]).unwrap();
        let a = action(&TorusLift(&s), &z, torus.period, &FlowOptions::default()).unwrap();
        assert_relative_eq!(a, torus.action(), max_relative = 1e-12);
    }
}
