//! Amplitude densities of periodic-orbit families computed from monodromy
//! data, their closed-form reductions, and Maslov phases by branch tracking.
//!
//! The squared density fixes the phase of the density only up to a sign, so
//! a [`DensityResult`] carries `d^2` and, once known, the quarter-turn
//! integer `m` in `d = |d| e^{i pi m / 4}`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::orbits::{check_hyp_rc, hamiltonian_field_outside_image, resonant_indices, PeriodicComponent};
use crate::symplectic::{
    blocks, kernel, restricted_det, restricted_form_det, symplectic_j, EigenspaceSplit, PhaseDim, Subspace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DensityMethod {
    General,
    Simple,
    WeylZero,
    NonDegenerate,
    PeriodicFlow,
    QuadraticClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityResult {
    pub d_squared: Complex64,
    pub modulus: f64,
    pub phase_quarter_turns: Option<i32>,
    pub method: DensityMethod,
    /// `|grad H|` at the point where the density was evaluated.
    pub grad_norm: f64,
}

impl DensityResult {
    fn new(d_squared: Complex64, method: DensityMethod, grad_norm: f64) -> Self {
        Self { d_squared, modulus: d_squared.norm().sqrt(), phase_quarter_turns: None, method, grad_norm }
    }

    /// `m mod 4` read off `d^2`, and its two lifts mod 8.
    pub fn phase_candidates(&self) -> Result<[i32; 2]> {
        let turns = self.d_squared.arg() / FRAC_PI_2;
        let rounded = turns.round();
        if (turns - rounded).abs() > 1e-8 {
            return Err(Error::Precondition(format!("d^2 = {} is not on a quarter-turn axis", self.d_squared)));
        }
        let m = (rounded as i32).rem_euclid(4);
        Ok([m, m + 4])
    }

    /// Fixes the phase; `m` must be compatible with `d^2`.
    pub fn with_phase(mut self, m: i32) -> Result<Self> {
        let m = m.rem_euclid(8);
        let squared = Complex64::from_polar(self.modulus * self.modulus, FRAC_PI_2 * m as f64);
        if (squared - self.d_squared).norm() > 1e-10 * self.d_squared.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidPhase { beta: m });
        }
        self.phase_quarter_turns = Some(m);
        Ok(self)
    }

    pub fn density(&self) -> Result<Complex64> {
        let m = self.phase_quarter_turns.ok_or(Error::UnresolvedPhase)?;
        Ok(Complex64::from_polar(self.modulus, FRAC_PI_4 * m as f64))
    }

    /// `|d| |grad H|`, constant along every family handled here.
    pub fn normalized_modulus(&self) -> f64 {
        self.modulus * self.grad_norm
    }
}

/// `i^{-p}`.
fn i_pow_neg(p: usize) -> Complex64 {
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0)][p % 4]
}

fn sign_pow(p: usize) -> f64 {
    if p % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn projected_grad_sq(split: &EigenspaceSplit, grad: &DVector<f64>) -> f64 {
    split.e1().project(grad).norm_squared()
}

/// The general density
/// `d^2 = (-1)^n i^{-(k+1)} det(w0|E1) / (det(M-I)|V1 |P_E1 grad H|^2 det(P5 J (M-I)|E5))`.
///
/// The split must carry its energy-shell subspaces.
pub fn dg_density_general(split: &EigenspaceSplit) -> Result<DensityResult> {
    let surface = split.require_surface()?;
    let grad = &surface.grad_h;
    if !check_hyp_rc(split)? {
        return Err(Error::HypothesisViolated("E1 differs from ker(M - I)^2".into()));
    }
    if !hamiltonian_field_outside_image(split.matrix(), grad, split.policy())? {
        return Err(Error::HypothesisViolated("J grad H lies in (M - I)(T Sigma_E)".into()));
    }
    let n = split.dof();
    let k = surface.fixed_tangent.dim();
    let numerator = i_pow_neg(k + 1) * sign_pow(n) * restricted_form_det(split.e1());
    let det_v1 = restricted_det(&split.minus_identity(), split.v1(), split.policy())?;
    let proj = projected_grad_sq(split, grad);
    let det5 = transverse_det(split, &surface.transverse)?;
    Ok(DensityResult::new(numerator / (det_v1 * proj * det5), DensityMethod::General, grad.norm()))
}

/// `det(P5 J (M - I))` on the transverse subspace, 1 when it is trivial.
fn transverse_det(split: &EigenspaceSplit, transverse: &Subspace) -> Result<f64> {
    if transverse.dim() == 0 {
        return Ok(1.0);
    }
    let j = symplectic_j(PhaseDim::new(split.dof())?);
    let q = transverse.basis();
    let value = (q.transpose() * j * split.minus_identity() * q).determinant();
    if value.abs() < split.policy().rank_tol {
        return Err(Error::DegenerateDeterminant { value, context: "transverse block (clean-flow failure)" });
    }
    Ok(value)
}

/// The reduction valid when `ker(M-I)^2 ∩ T Sigma_E = ker(M-I) ∩ T Sigma_E`:
/// `d^2 = (-1)^{n + dim E1 / 2} det(w0|E1) / (det(M-I)|V1 |P_E1 grad H|^2)`.
pub fn dg_density_simple(split: &EigenspaceSplit) -> Result<DensityResult> {
    let surface = split.require_surface()?;
    let grad = &surface.grad_h;
    let p = split.policy();
    let a = split.minus_identity();
    let second = kernel(&(&a * &a), 1.0, p)?.intersection(&surface.tangent, p)?;
    if second.dim() != surface.fixed_tangent.dim() {
        return Err(Error::HypothesisViolated("ker(M - I)^2 ∩ T Sigma_E exceeds ker(M - I) ∩ T Sigma_E".into()));
    }
    if !hamiltonian_field_outside_image(split.matrix(), grad, p)? {
        return Err(Error::HypothesisViolated("J grad H lies in (M - I)(T Sigma_E)".into()));
    }
    let n = split.dof();
    let sign = sign_pow(n + split.e1().dim() / 2);
    let det_v1 = restricted_det(&a, split.v1(), p)?;
    let value = sign * restricted_form_det(split.e1()) / (det_v1 * projected_grad_sq(split, grad));
    Ok(DensityResult::new(Complex64::new(value, 0.0), DensityMethod::Simple, grad.norm()))
}

/// Isolated orbit: `d^2 = (-1)^{n+1} / (det(M-I)|V1 |grad H|^2)`.
pub fn dg_density_nondegenerate(split: &EigenspaceSplit) -> Result<DensityResult> {
    let surface = split.require_surface()?;
    if split.e1().dim() != 2 {
        return Err(Error::Precondition(format!("orbit is degenerate: dim E1 = {}", split.e1().dim())));
    }
    let det_v1 = restricted_det(&split.minus_identity(), split.v1(), split.policy())?;
    let value = sign_pow(split.dof() + 1) / (det_v1 * surface.grad_h.norm_squared());
    Ok(DensityResult::new(Complex64::new(value, 0.0), DensityMethod::NonDegenerate, surface.grad_h.norm()))
}

/// Zero period: `d^2 = 1 / |grad H|^2` with trivial phase.
pub fn dg_density_weyl(split: &EigenspaceSplit) -> Result<DensityResult> {
    let surface = split.require_surface()?;
    if split.v1().dim() != 0 || split.minus_identity().amax() > split.policy().rank_tol {
        return Err(Error::Precondition("zero-period density needs M = Id".into()));
    }
    let g2 = surface.grad_h.norm_squared();
    let mut r = DensityResult::new(Complex64::new(1.0 / g2, 0.0), DensityMethod::WeylZero, g2.sqrt());
    r.phase_quarter_turns = Some(0);
    Ok(r)
}

/// Periodic flow (`M = Id` on the shell tangent): `d^2 = 1 / |grad H|^2`.
pub fn dg_density_periodic_flow(split: &EigenspaceSplit) -> Result<DensityResult> {
    let surface = split.require_surface()?;
    if surface.fixed_tangent.dim() != surface.tangent.dim() {
        return Err(Error::Precondition("flow is not periodic on the whole shell".into()));
    }
    let g2 = surface.grad_h.norm_squared();
    Ok(DensityResult::new(Complex64::new(1.0 / g2, 0.0), DensityMethod::PeriodicFlow, g2.sqrt()))
}

/// Closed form for quadratic systems at `(T, z)` with `z` in `Delta_T`:
/// `(-1)^{n+R} / (|grad H|^2 prod_{w_j T not in 2 pi Z} 2 (1 - cos T w_j))`.
pub fn dg_density_quadratic(w: &[f64], period: f64, grad_h: &DVector<f64>) -> Result<DensityResult> {
    let resonant = resonant_indices(w, period);
    if resonant.is_empty() {
        return Err(Error::NotAPeriod { period });
    }
    let product: f64 = (0..w.len())
        .filter(|j| !resonant.contains(j))
        .map(|j| 2.0 * (1.0 - (period * w[j]).cos()))
        .product();
    let g2 = grad_h.norm_squared();
    let value = sign_pow(w.len() + resonant.len()) / (g2 * product);
    let mut r = DensityResult::new(Complex64::new(value, 0.0), DensityMethod::QuadraticClosedForm, g2.sqrt());
    if period == 0.0 {
        r.phase_quarter_turns = Some(0);
    }
    Ok(r)
}

/// `|det(dP - Id)|` of the Poincaré map of an isolated orbit, as `|det(M - I)|V1|`.
pub fn reduced_poincare_det(split: &EigenspaceSplit) -> Result<f64> {
    if split.e1().dim() != 2 {
        return Err(Error::Precondition(format!("orbit is degenerate: dim E1 = {}", split.e1().dim())));
    }
    Ok(restricted_det(&split.minus_identity(), split.v1(), split.policy())?.abs())
}

/// `det((A + D + i(B - C)) / 2)` for `M = [[A, B], [C, D]]`.
pub fn branch_determinant(m: &DMatrix<f64>) -> Complex64 {
    let (a, b, c, d) = blocks(m);
    let n = a.nrows();
    DMatrix::from_fn(n, n, |r, s| Complex64::new(0.5 * (a[(r, s)] + d[(r, s)]), 0.5 * (b[(r, s)] - c[(r, s)])))
        .determinant()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchTrack {
    pub times: Vec<f64>,
    /// Unwrapped argument of the branch determinant at `times`.
    pub arguments: Vec<f64>,
    pub final_argument: f64,
    /// Full turns of the determinant, rounded toward zero.
    pub winding: i64,
    pub min_modulus: f64,
}

impl BranchTrack {
    /// Quarter turns `-2 arg / pi` of the half-determinant's inverse, when integral.
    pub fn quarter_turns(&self) -> Option<i32> {
        let q = -2.0 * self.final_argument / PI;
        ((q - q.round()).abs() < 1e-6).then(|| q.round() as i32)
    }
}

const BRANCH_STEP: f64 = FRAC_PI_4;
const BRANCH_FLOOR: f64 = 1e-10;
const BRANCH_DEPTH: u32 = 40;

/// Continuous argument of the branch determinant along `t -> path(t)` on
/// `[0, period]`, refined by bisection until each step turns less than `pi/4`.
pub fn maslov_branch_track<F: Fn(f64) -> DMatrix<f64>>(path: F, period: f64) -> Result<BranchTrack> {
    let start = branch_determinant(&path(0.0));
    let mut track = BranchTrack {
        times: vec![0.0],
        arguments: vec![0.0],
        final_argument: 0.0,
        winding: 0,
        min_modulus: start.norm(),
    };
    if start.norm() < BRANCH_FLOOR {
        return Err(Error::BranchTrackFailed { time: 0.0, modulus: start.norm() });
    }
    if (start.arg()).abs() > 1e-12 {
        return Err(Error::Precondition("branch path must start at a monodromy with real positive determinant".into()));
    }
    if period == 0.0 {
        return Ok(track);
    }
    let intervals = ((period.abs() * 16.0).ceil() as usize).max(64);
    let mut prev = (0.0, start);
    for i in 1..=intervals {
        let t = period * i as f64 / intervals as f64;
        let det = branch_determinant(&path(t));
        refine(&path, prev, (t, det), 0, &mut track)?;
        prev = (t, det);
    }
    track.final_argument = *track.arguments.last().expect("non-empty");
    track.winding = (track.final_argument / (2.0 * PI)).trunc() as i64;
    Ok(track)
}

fn refine<F: Fn(f64) -> DMatrix<f64>>(
    path: &F,
    lo: (f64, Complex64),
    hi: (f64, Complex64),
    depth: u32,
    track: &mut BranchTrack,
) -> Result<()> {
    let modulus = hi.1.norm();
    if modulus < BRANCH_FLOOR {
        return Err(Error::BranchTrackFailed { time: hi.0, modulus });
    }
    let step = (hi.1 / lo.1).arg();
    if step.abs() < BRANCH_STEP {
        track.min_modulus = track.min_modulus.min(modulus);
        let last = *track.arguments.last().expect("non-empty");
        track.times.push(hi.0);
        track.arguments.push(last + step);
        return Ok(());
    }
    if depth >= BRANCH_DEPTH {
        return Err(Error::BranchTrackFailed { time: hi.0, modulus });
    }
    let tm = 0.5 * (lo.0 + hi.0);
    let mid = (tm, branch_determinant(&path(tm)));
    refine(path, lo, mid, depth + 1, track)?;
    refine(path, mid, hi, depth + 1, track)
}

/// Leading-order contribution of one periodic family:
/// `psi(E) (2 pi h)^{(1 - dim)/2} e^{i A / h} fhat(T) (1 / 2 pi) d |grad H| measure`,
/// where `measure = int_Y dsigma / |grad H|`.
pub fn assemble_component_amplitude(
    component: &PeriodicComponent,
    density: &DensityResult,
    measure: f64,
    fhat: Complex64,
    psi_e: f64,
    h: f64,
) -> Result<Complex64> {
    let m = density.phase_quarter_turns.ok_or(Error::UnresolvedPhase)?;
    if !(h > 0.0) {
        return Err(Error::Precondition("h must be positive".into()));
    }
    let power = (2.0 * PI * h).powf((1.0 - component.dim as f64) / 2.0);
    let oscillation = Complex64::from_polar(1.0, component.action / h);
    let phase = Complex64::from_polar(1.0, FRAC_PI_4 * m as f64);
    Ok(oscillation * fhat * phase * (psi_e * power * density.normalized_modulus() * measure / (2.0 * PI)))
}
