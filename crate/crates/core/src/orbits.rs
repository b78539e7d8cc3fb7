//! Periodic-orbit structure of quadratic Hamiltonians and predicates that
//! classify a periodic point by its monodromy.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::dynamics::{HamiltonianSystem, QuadraticHamiltonian};
use crate::error::{Error, Result};
use crate::symplectic::{apply_j, kernel, symplectic_j, EigenspaceSplit, Monodromy, PhaseDim, RankPolicy, Subspace};

const RESONANCE_TOL: f64 = 1e-9;
const NEAR_MISS_TOL: f64 = 1e-6;
const MERGE_TOL: f64 = 1e-12;
const PERIOD_CAP: usize = 1_000_000;

/// Fractional distance of `w T / 2 pi` from the nearest integer.
pub fn resonance_residual(w: f64, period: f64) -> f64 {
    let r = w * period / (2.0 * PI);
    (r - r.round()).abs()
}

/// Indices `j` with `w_j T` in `2 pi Z`.
pub fn resonant_indices(w: &[f64], period: f64) -> Vec<usize> {
    (0..w.len()).filter(|&j| resonance_residual(w[j], period) <= RESONANCE_TOL).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodEntry {
    pub period: f64,
    pub resonant: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearMiss {
    pub period: f64,
    pub mode: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodSet {
    pub entries: Vec<PeriodEntry>,
    pub window: (f64, f64),
    pub near_misses: Vec<NearMiss>,
}

impl PeriodSet {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// All periods `2 pi k / w_j` in `window`, with `|k| <= multiple_bound`.
pub fn enumerate_periods(w: &[f64], window: (f64, f64), multiple_bound: u64) -> Result<PeriodSet> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::Precondition(format!("invalid period window [{lo}, {hi}]")));
    }
    if multiple_bound < 1 {
        return Err(Error::Precondition("rational bound must be at least 1".into()));
    }
    QuadraticHamiltonian::new(w.to_vec())?;
    let mut candidates = Vec::new();
    for &wj in w {
        let base = 2.0 * PI / wj;
        let k_lo = (lo / base).ceil() as i64;
        let k_hi = (hi / base).floor() as i64;
        let count = (k_hi - k_lo + 1).max(0) as usize;
        if candidates.len() + count > PERIOD_CAP || k_lo.unsigned_abs().max(k_hi.unsigned_abs()) > multiple_bound {
            return Err(Error::WindowTooLarge { count: candidates.len() + count, cap: PERIOD_CAP });
        }
        candidates.extend((k_lo..=k_hi).map(|k| base * k as f64));
    }
    candidates.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::new();
    for t in candidates {
        match merged.last() {
            Some(&last) if (t - last).abs() <= MERGE_TOL * t.abs().max(last.abs()) => {}
            _ => merged.push(t),
        }
    }
    let mut near_misses = Vec::new();
    let entries = merged
        .into_iter()
        .map(|period| {
            for (mode, &wj) in w.iter().enumerate() {
                let residual = resonance_residual(wj, period);
                if residual > RESONANCE_TOL && residual < NEAR_MISS_TOL {
                    log::warn!("near-miss resonance: mode {mode} at period {period} (residual {residual:e})");
                    near_misses.push(NearMiss { period, mode, residual });
                }
            }
            PeriodEntry { period, resonant: resonant_indices(w, period) }
        })
        .collect();
    Ok(PeriodSet { entries, window, near_misses })
}

/// `Delta_T`: span of `e_j, e_j'` over the modes resonant at `T`.
pub fn resonant_subspace(w: &[f64], period: f64) -> Result<Subspace> {
    let resonant = resonant_indices(w, period);
    if resonant.is_empty() {
        return Err(Error::NotAPeriod { period });
    }
    let n = w.len();
    let axes: Vec<usize> = resonant.iter().flat_map(|&j| [j, n + j]).collect();
    Ok(Subspace::coordinate(2 * n, &axes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ComponentLabel {
    WeylZero,
    NonDegenerateOrbit,
    GroupTube,
    FullShell,
    Torus,
}

impl fmt::Display for ComponentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::WeylZero => "weyl-zero",
            Self::NonDegenerateOrbit => "non-degenerate-orbit",
            Self::GroupTube => "group-tube",
            Self::FullShell => "full-shell",
            Self::Torus => "torus",
        };
        f.write_str(s)
    }
}

/// One connected family of periodic points at a fixed period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicComponent {
    pub period: f64,
    pub representative: Vec<f64>,
    pub dim: usize,
    pub resonant_count: usize,
    pub action: f64,
    pub label: ComponentLabel,
}

impl PeriodicComponent {
    /// The component `Delta_T ∩ Sigma_E` of a quadratic system, represented by
    /// a point sharing the energy among the resonant modes with spread phases.
    pub fn quadratic(system: &QuadraticHamiltonian, e: f64, entry: &PeriodEntry) -> Result<Self> {
        let w = system.frequencies();
        let n = w.len();
        let r = entry.resonant.len();
        if r == 0 {
            return Err(Error::EmptyResonantSet);
        }
        let amp = (2.0 * e / r as f64).sqrt();
        let mut z = vec![0.0; 2 * n];
        for (slot, &j) in entry.resonant.iter().enumerate() {
            let phase = 0.3 + 0.7 * slot as f64;
            z[j] = amp * phase.cos() / w[j];
            z[n + j] = amp * phase.sin();
        }
        let label = if entry.period == 0.0 {
            ComponentLabel::WeylZero
        } else if r == n {
            ComponentLabel::FullShell
        } else if r == 1 {
            ComponentLabel::NonDegenerateOrbit
        } else {
            ComponentLabel::GroupTube
        };
        Ok(Self {
            period: entry.period,
            representative: z,
            dim: 2 * r - 1,
            resonant_count: r,
            action: entry.period * e,
            label,
        })
    }

    pub fn representative_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.representative)
    }
}

/// A point of `Delta_T ∩ Sigma_E` with random coordinates in the resonant modes.
pub fn sample_periodic_point<R: Rng>(w: &[f64], resonant: &[usize], e: f64, rng: &mut R) -> Result<DVector<f64>> {
    if resonant.is_empty() {
        return Err(Error::EmptyResonantSet);
    }
    let n = w.len();
    let system = QuadraticHamiltonian::new(w.to_vec())?;
    loop {
        let mut z = DVector::zeros(2 * n);
        for &j in resonant {
            z[j] = rng.gen_range(-1.0..1.0);
            z[n + j] = rng.gen_range(-1.0..1.0);
        }
        let h = system.energy(&z);
        if h > 1e-3 {
            return Ok(z * (e / h).sqrt());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FrequencyClass {
    AllNonDegenerate,
    AllPeriodic,
    Isochronous,
    AllNdr,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioVerdict {
    pub i: usize,
    pub j: usize,
    /// `w_i / w_j = p / q` when rational.
    pub rational: Option<(u64, u64)>,
    /// Closest convergent `(p, q, |q w_i/w_j - p|)` that narrowly missed the rationality test.
    pub borderline: Option<(u64, u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyClassification {
    pub class: FrequencyClass,
    pub ratios: Vec<RatioVerdict>,
}

/// Continued-fraction test of `r = p/q` with `q <= bound`.
fn rational_approximation(r: f64, bound: u64) -> (Option<(u64, u64)>, Option<(u64, u64, f64)>) {
    let (mut h1, mut h2) = (1u64, 0u64);
    let (mut k1, mut k2) = (0u64, 1u64);
    let mut x = r;
    let mut borderline = None;
    for _ in 0..64 {
        let a = x.floor();
        if a > 1e15 {
            break;
        }
        let a = a as u64;
        let h = a.saturating_mul(h1).saturating_add(h2);
        let k = a.saturating_mul(k1).saturating_add(k2);
        if k > bound {
            break;
        }
        let residual = (r * k as f64 - h as f64).abs();
        if residual <= RESONANCE_TOL {
            return (Some((h, k)), None);
        }
        if residual < NEAR_MISS_TOL {
            borderline = Some((h, k, residual));
        }
        let frac = x - a as f64;
        if frac < 1e-15 {
            break;
        }
        x = 1.0 / frac;
        (h2, h1) = (h1, h);
        (k2, k1) = (k1, k);
    }
    (None, borderline)
}

/// Sorts `w` into the classes of the diophantine dichotomies: all ratios
/// irrational, all rational, all equal, or rational only when equal.
pub fn classify_frequencies(w: &[f64], rational_bound: u64) -> FrequencyClassification {
    let mut ratios = Vec::new();
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            let (rational, borderline) = rational_approximation(w[i] / w[j], rational_bound);
            if let Some((p, q, res)) = borderline {
                log::warn!("frequencies {i},{j}: ratio close to {p}/{q} (residual {res:e}) treated as irrational");
            }
            ratios.push(RatioVerdict { i, j, rational, borderline });
        }
    }
    let rational: Vec<(u64, u64)> = ratios.iter().filter_map(|r| r.rational).collect();
    let class = if rational.len() == ratios.len() && rational.iter().all(|&(p, q)| p == q) {
        FrequencyClass::Isochronous
    } else if rational.len() == ratios.len() {
        FrequencyClass::AllPeriodic
    } else if rational.is_empty() {
        FrequencyClass::AllNonDegenerate
    } else if rational.iter().all(|&(p, q)| p == q) {
        FrequencyClass::AllNdr
    } else {
        FrequencyClass::Mixed
    };
    FrequencyClassification { class, ratios }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    ComponentEnergies,
    MomentMap,
    UserSupplied,
}

pub trait FirstIntegral: Send + Sync {
    fn value(&self, z: &DVector<f64>) -> f64;
    fn gradient(&self, z: &DVector<f64>) -> DVector<f64>;
    fn provenance(&self) -> Provenance;
}

/// `F_j = (xi_j^2 + w_j^2 x_j^2) / 2`.
#[derive(Debug, Clone)]
pub struct ComponentEnergy {
    w: Vec<f64>,
    mode: usize,
}

impl ComponentEnergy {
    pub fn new(w: &[f64], mode: usize) -> Result<Self> {
        if mode >= w.len() {
            return Err(Error::DimensionMismatch { expected: w.len(), found: mode + 1 });
        }
        Ok(Self { w: w.to_vec(), mode })
    }
}

impl FirstIntegral for ComponentEnergy {
    fn value(&self, z: &DVector<f64>) -> f64 {
        let (n, j) = (self.w.len(), self.mode);
        0.5 * (z[n + j] * z[n + j] + self.w[j] * self.w[j] * z[j] * z[j])
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let (n, j) = (self.w.len(), self.mode);
        let mut g = DVector::zeros(2 * n);
        g[j] = self.w[j] * self.w[j] * z[j];
        g[n + j] = z[n + j];
        g
    }

    fn provenance(&self) -> Provenance {
        Provenance::ComponentEnergies
    }
}

/// Noether integral `F_A(z) = <J A z, z>` of a linear symplectic symmetry.
#[derive(Debug, Clone)]
pub struct MomentMap {
    generator: DMatrix<f64>,
    ja: DMatrix<f64>,
}

/// The moment map of a Hamiltonian matrix `A` (one with `J A` symmetric).
pub fn moment_map(a: &DMatrix<f64>) -> Result<MomentMap> {
    let dim = PhaseDim::from_phase_len(a.nrows())?;
    if a.ncols() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
    }
    let ja = symplectic_j(dim) * a;
    let asymmetry = (&ja - ja.transpose()).amax();
    if asymmetry > 1e-12 * a.amax().max(1.0) {
        return Err(Error::NotHamiltonianGenerator { asymmetry });
    }
    Ok(MomentMap { generator: a.clone(), ja })
}

impl MomentMap {
    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }
}

impl FirstIntegral for MomentMap {
    fn value(&self, z: &DVector<f64>) -> f64 {
        (&self.ja * z).dot(z)
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.ja * z * 2.0
    }

    fn provenance(&self) -> Provenance {
        Provenance::MomentMap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Re,
    Im,
}

/// Real or imaginary part of `a_i^{m_i} conj(a_j)^{m_j}` with
/// `a_k = w_k x_k + i xi_k`; conserved when `m_i w_i = m_j w_j`.
#[derive(Debug, Clone)]
pub struct ResonantMonomial {
    w: Vec<f64>,
    i: usize,
    j: usize,
    mi: u32,
    mj: u32,
    part: Part,
}

impl ResonantMonomial {
    pub fn new(w: &[f64], i: usize, j: usize, mi: u32, mj: u32, part: Part) -> Result<Self> {
        if i == j || i >= w.len() || j >= w.len() || mi == 0 || mj == 0 {
            return Err(Error::Precondition("resonant monomial needs two distinct modes and positive powers".into()));
        }
        let (li, lj) = (mi as f64 * w[i], mj as f64 * w[j]);
        if (li - lj).abs() > 1e-12 * li.max(lj) {
            return Err(Error::Precondition(format!("{mi} w_{i} != {mj} w_{j}: monomial is not conserved")));
        }
        Ok(Self { w: w.to_vec(), i, j, mi, mj, part })
    }

    fn amplitudes(&self, z: &DVector<f64>) -> (Complex64, Complex64) {
        let n = self.w.len();
        let a = Complex64::new(self.w[self.i] * z[self.i], z[n + self.i]);
        let b = Complex64::new(self.w[self.j] * z[self.j], -z[n + self.j]);
        (a, b)
    }

    fn take(&self, c: Complex64) -> f64 {
        match self.part {
            Part::Re => c.re,
            Part::Im => c.im,
        }
    }
}

impl FirstIntegral for ResonantMonomial {
    fn value(&self, z: &DVector<f64>) -> f64 {
        let (a, b) = self.amplitudes(z);
        self.take(a.powu(self.mi) * b.powu(self.mj))
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.w.len();
        let (a, b) = self.amplitudes(z);
        let da = b.powu(self.mj) * a.powu(self.mi - 1) * self.mi as f64;
        let db = a.powu(self.mi) * b.powu(self.mj - 1) * self.mj as f64;
        let i_unit = Complex64::new(0.0, 1.0);
        let mut g = DVector::zeros(2 * n);
        g[self.i] = self.take(da * self.w[self.i]);
        g[n + self.i] = self.take(da * i_unit);
        g[self.j] = self.take(db * self.w[self.j]);
        g[n + self.j] = self.take(-db * i_unit);
        g
    }

    fn provenance(&self) -> Provenance {
        Provenance::ComponentEnergies
    }
}

type ScalarFn = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// A first integral given by closures.
pub struct CustomIntegral {
    value: ScalarFn,
    gradient: VectorFn,
}

impl CustomIntegral {
    pub fn new(value: ScalarFn, gradient: VectorFn) -> Self {
        Self { value, gradient }
    }
}

impl FirstIntegral for CustomIntegral {
    fn value(&self, z: &DVector<f64>) -> f64 {
        (self.value)(z)
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(z)
    }

    fn provenance(&self) -> Provenance {
        Provenance::UserSupplied
    }
}

#[derive(Default)]
pub struct FirstIntegralFamily {
    integrals: Vec<Box<dyn FirstIntegral>>,
}

impl fmt::Debug for FirstIntegralFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.integrals.iter().map(|i| i.provenance())).finish()
    }
}

impl FirstIntegralFamily {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, integral: impl FirstIntegral + 'static) -> Self {
        self.integrals.push(Box::new(integral));
        self
    }

    pub fn push(&mut self, integral: Box<dyn FirstIntegral>) {
        self.integrals.push(integral);
    }

    pub fn len(&self) -> usize {
        self.integrals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.integrals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn FirstIntegral> {
        self.integrals.iter().map(|b| b.as_ref())
    }

    pub fn component_energies(w: &[f64]) -> Result<Self> {
        let mut family = Self::new();
        for j in 0..w.len() {
            family.push(Box::new(ComponentEnergy::new(w, j)?));
        }
        Ok(family)
    }

    /// Moment maps of the generators returned by [`cluster_generators`].
    pub fn cluster_symmetries(w: &[f64]) -> Result<Self> {
        let mut family = Self::new();
        for a in cluster_generators(w) {
            family.push(Box::new(moment_map(&a)?));
        }
        Ok(family)
    }

    /// Component energies plus the resonant monomials of every rationally
    /// related pair of modes.
    pub fn superintegrable(w: &[f64], rational_bound: u64) -> Result<Self> {
        let mut family = Self::component_energies(w)?;
        for verdict in classify_frequencies(w, rational_bound).ratios {
            if let Some((p, q)) = verdict.rational {
                let (mi, mj) = (u32::try_from(q), u32::try_from(p));
                if let (Ok(mi), Ok(mj)) = (mi, mj) {
                    for part in [Part::Re, Part::Im] {
                        family.push(Box::new(ResonantMonomial::new(w, verdict.i, verdict.j, mi, mj, part)?));
                    }
                }
            }
        }
        Ok(family)
    }

    pub fn hamiltonian_vectors(&self, z: &DVector<f64>) -> Vec<DVector<f64>> {
        self.integrals.iter().map(|f| apply_j(&f.gradient(z))).collect()
    }
}

/// Hamiltonian matrices generating the unitary symmetry of each cluster of
/// equal frequencies (including singleton clusters).
pub fn cluster_generators(w: &[f64]) -> Vec<DMatrix<f64>> {
    let n = w.len();
    let j = symplectic_j(PhaseDim::new(n.max(1)).expect("non-empty"));
    let mut assigned = vec![false; n];
    let mut generators = Vec::new();
    for a in 0..n {
        if assigned[a] {
            continue;
        }
        let cluster: Vec<usize> = (a..n).filter(|&b| (w[b] - w[a]).abs() <= 1e-12 * w[a]).collect();
        cluster.iter().for_each(|&b| assigned[b] = true);
        let omega = w[a];
        let mut quadratic_forms = Vec::new();
        for (ci, &p) in cluster.iter().enumerate() {
            let mut s = DMatrix::zeros(2 * n, 2 * n);
            s[(p, p)] = omega * omega;
            s[(n + p, n + p)] = 1.0;
            quadratic_forms.push(s);
            for &q in &cluster[ci + 1..] {
                let mut re = DMatrix::zeros(2 * n, 2 * n);
                re[(p, q)] = omega * omega;
                re[(q, p)] = omega * omega;
                re[(n + p, n + q)] = 1.0;
                re[(n + q, n + p)] = 1.0;
                quadratic_forms.push(re);
                let mut im = DMatrix::zeros(2 * n, 2 * n);
                im[(n + p, q)] = omega;
                im[(q, n + p)] = omega;
                im[(p, n + q)] = -omega;
                im[(n + q, p)] = -omega;
                quadratic_forms.push(im);
            }
        }
        generators.extend(quadratic_forms.into_iter().map(|s| &j * s));
    }
    generators
}

/// `ker(M - I) ∩ T_z Sigma_E`.
pub fn fixed_tangent_space(m: &DMatrix<f64>, grad_h: &DVector<f64>, policy: RankPolicy) -> Result<Subspace> {
    let d = m.nrows();
    let fixed = kernel(&(m - DMatrix::<f64>::identity(d, d)), 1.0, policy)?;
    let tangent = Subspace::span(std::slice::from_ref(grad_h), d, policy)?.complement(policy)?;
    fixed.intersection(&tangent, policy)
}

pub fn is_nondegenerate(split: &EigenspaceSplit) -> bool {
    split.e1().dim() == 2
}

/// `dim E1 = dim(R J grad H + span{A z}) + 1` for the symmetry generators `A`.
pub fn is_ndr(split: &EigenspaceSplit, z: &DVector<f64>, grad_h: &DVector<f64>, generators: &[DMatrix<f64>]) -> Result<bool> {
    let mut vectors = vec![apply_j(grad_h)];
    for a in generators {
        moment_map(a)?;
        vectors.push(a * z);
    }
    let span = Subspace::span(&vectors, z.len(), split.policy())?;
    Ok(split.e1().dim() == span.dim() + 1)
}

fn integral_span(z: &DVector<f64>, integrals: &FirstIntegralFamily, policy: RankPolicy) -> Result<Subspace> {
    let span = Subspace::span(&integrals.hamiltonian_vectors(z), z.len(), policy)?;
    if span.dim() == 0 {
        return Err(Error::DependentGradients);
    }
    Ok(span)
}

/// `ker(M - I) ∩ T_z Sigma_E` equals the span of the Hamiltonian vector fields
/// of the integrals. Dependent integrals are pruned to their span; the
/// inclusion of that span in the fixed tangent space is asserted.
pub fn is_normal(
    m: &Monodromy,
    grad_h: &DVector<f64>,
    integrals: &FirstIntegralFamily,
    policy: RankPolicy,
) -> Result<bool> {
    let z = m.base_point();
    let span = integral_span(z, integrals, policy)?;
    let fixed = fixed_tangent_space(m.matrix(), grad_h, policy)?;
    let excess = fixed.excess(&span);
    if excess > 1e-6 {
        return Err(Error::HypothesisViolated(format!(
            "integral vector fields leave ker(M - I) ∩ T Sigma_E by {excess:e}"
        )));
    }
    Ok(span.dim() == fixed.dim())
}

/// `J grad H` lies outside `(M - I)(T_z Sigma_E)`.
pub fn hamiltonian_field_outside_image(m: &DMatrix<f64>, grad_h: &DVector<f64>, policy: RankPolicy) -> Result<bool> {
    let d = m.nrows();
    let tangent = Subspace::span(std::slice::from_ref(grad_h), d, policy)?.complement(policy)?;
    let image = (m - DMatrix::<f64>::identity(d, d)) * tangent.basis();
    let field = apply_j(grad_h).normalize();
    let base_rank = column_rank(&image, policy)?;
    let augmented = DMatrix::from_columns(&[image.column_iter().map(|c| c.into_owned()).collect(), vec![field]].concat());
    Ok(column_rank(&augmented, policy)? > base_rank)
}

/// Rank with the absolute scale of `M - I` (entries of order one) as floor.
fn column_rank(m: &DMatrix<f64>, policy: RankPolicy) -> Result<usize> {
    Ok(m.ncols() - kernel(m, 1.0, policy)?.dim())
}

pub fn is_sigma_normal(
    m: &Monodromy,
    grad_h: &DVector<f64>,
    integrals: &FirstIntegralFamily,
    policy: RankPolicy,
) -> Result<bool> {
    Ok(is_normal(m, grad_h, integrals, policy)? && hamiltonian_field_outside_image(m.matrix(), grad_h, policy)?)
}

/// `E1 = ker(M - I)^2`.
pub fn check_hyp_rc(split: &EigenspaceSplit) -> Result<bool> {
    Ok(split.second_kernel_dim()? == split.e1().dim())
}

/// Clean-flow test: every `(tau, alpha)` with `alpha` tangent to the shell and
/// `tau J grad H + (M - I) alpha = 0` lies in the span of `tangent`
/// (vectors of `R x R^{2n}`, time coordinate first).
pub fn clean_flow_check(m: &DMatrix<f64>, grad_h: &DVector<f64>, tangent: &[DVector<f64>], policy: RankPolicy) -> Result<bool> {
    let d = m.nrows();
    let shell = Subspace::span(std::slice::from_ref(grad_h), d, policy)?.complement(policy)?;
    let field = apply_j(grad_h);
    let mapped = (m - DMatrix::<f64>::identity(d, d)) * shell.basis();
    let mut cols = vec![field];
    cols.extend(mapped.column_iter().map(|c| c.into_owned()));
    let system = DMatrix::from_columns(&cols);
    let null = kernel(&system, 1.0, policy)?;
    let lifted: Vec<DVector<f64>> = null
        .vectors()
        .into_iter()
        .map(|v| {
            let alpha = shell.basis() * v.rows(1, d - 1);
            DVector::from_iterator(d + 1, std::iter::once(v[0]).chain(alpha.iter().copied()))
        })
        .collect();
    let candidate = Subspace::span(tangent, d + 1, policy)?;
    Ok(lifted.iter().all(|v| candidate.contains_vector(v, 1e-6)))
}

/// Analytic tangent `{0} x (Delta_T ∩ T_z Sigma_E)` of a quadratic component.
pub fn quadratic_component_tangent(w: &[f64], period: f64, grad_h: &DVector<f64>, policy: RankPolicy) -> Result<Vec<DVector<f64>>> {
    let d = 2 * w.len();
    let delta = if period == 0.0 { Subspace::full(d) } else { resonant_subspace(w, period)? };
    let shell = Subspace::span(std::slice::from_ref(grad_h), d, policy)?.complement(policy)?;
    Ok(lift_spatial(&delta.intersection(&shell, policy)?))
}

/// Embed a subspace of `R^{2n}` as `{0} x V` in `R x R^{2n}`.
pub fn lift_spatial(space: &Subspace) -> Vec<DVector<f64>> {
    space
        .vectors()
        .into_iter()
        .map(|v| DVector::from_iterator(v.len() + 1, std::iter::once(0.0).chain(v.iter().copied())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn split_at(w: &[f64], t: f64, z: &DVector<f64>) -> (EigenspaceSplit, DVector<f64>, Monodromy) {
        let h = QuadraticHamiltonian::new(w.to_vec()).unwrap();
        let m = Monodromy::new(h.monodromy_matrix(t), z.clone(), t, 1e-8).unwrap();
        let g = h.gradient(z);
        let split = EigenspaceSplit::new(m.matrix(), RankPolicy::default())
            .unwrap()
            .with_energy_surface(&g)
            .unwrap();
        (split, g, m)
    }

    #[test]
    fn period_windows() {
        let s = enumerate_periods(&[1.0, SQRT_2], (5.0, 7.0), 1_000_000).unwrap();
        assert_eq!(s.entries, vec![PeriodEntry { period: 2.0 * PI, resonant: vec![0] }]);
        let s = enumerate_periods(&[1.0, 2.0], (3.0, 4.0), 1_000_000).unwrap();
        assert_eq!(s.entries, vec![PeriodEntry { period: PI, resonant: vec![1] }]);
        assert!(enumerate_periods(&[1.0, SQRT_2], (0.0 + 1e-9, 1.0), 1_000_000).unwrap().is_empty());
    }

    #[test]
    fn coinciding_periods_merge() {
        let s = enumerate_periods(&[1.0, 2.0], (6.0, 6.5), 1_000_000).unwrap();
        assert_eq!(s.entries, vec![PeriodEntry { period: 2.0 * PI, resonant: vec![0, 1] }]);
        let s = enumerate_periods(&[1.0, 1.0], (-0.5, 0.5), 1_000_000).unwrap();
        assert_eq!(s.entries, vec![PeriodEntry { period: 0.0, resonant: vec![0, 1] }]);
    }

    #[test]
    fn resonant_subspaces() {
        let s = resonant_subspace(&[1.0, 2.0], PI).unwrap();
        assert!(s.same_as(&Subspace::coordinate(4, &[1, 3]), 0.0));
        assert_eq!(resonant_subspace(&[1.0, 2.0], 2.0 * PI).unwrap().dim(), 4);
        assert!(resonant_subspace(&[1.0, SQRT_2], 2.0 * PI).unwrap().same_as(&Subspace::coordinate(4, &[0, 2]), 0.0));
        assert!(matches!(resonant_subspace(&[1.0, SQRT_2], 1.0), Err(Error::NotAPeriod { .. })));
    }

    #[test]
    fn frequency_classes() {
        assert_eq!(classify_frequencies(&[1.0, SQRT_2], 1_000_000).class, FrequencyClass::AllNonDegenerate);
        assert_eq!(classify_frequencies(&[1.0, 2.0], 1_000_000).class, FrequencyClass::AllPeriodic);
        assert_eq!(classify_frequencies(&[1.0, 1.0, SQRT_2], 1_000_000).class, FrequencyClass::AllNdr);
        assert_eq!(classify_frequencies(&[1.0, 1.0], 1_000_000).class, FrequencyClass::Isochronous);
        assert_eq!(classify_frequencies(&[1.0, 2.0, SQRT_2], 1_000_000).class, FrequencyClass::Mixed);
        let v = classify_frequencies(&[3.0, 7.0], 1_000_000);
        assert_eq!(v.ratios[0].rational, Some((3, 7)));
    }

    #[test]
    fn borderline_ratio_is_reported() {
        let v = classify_frequencies(&[1.0 + 3e-8, 1.0], 1_000_000);
        assert_eq!(v.ratios[0].rational, None);
        assert!(v.ratios[0].borderline.is_some());
    }

    #[test]
    fn nondegeneracy_predicate() {
        let z = DVector::from_vec(vec![SQRT_2, 0.0, 0.0, 0.0]);
        assert!(is_nondegenerate(&split_at(&[1.0, SQRT_2], 2.0 * PI, &z).0));
        let z = DVector::from_vec(vec![0.6, 0.3, 0.5, -0.8]);
        assert!(!is_nondegenerate(&split_at(&[1.0, 1.0], 2.0 * PI, &z).0));
        let z = DVector::from_vec(vec![0.6, 0.3, 0.0, 0.5, -0.8, 0.0]);
        assert!(!is_nondegenerate(&split_at(&[1.0, 1.0, SQRT_2], 2.0 * PI, &z).0));
    }

    #[test]
    fn ndr_predicate() {
        let w = [1.0, 1.0, SQRT_2];
        let z = DVector::from_vec(vec![0.6, 0.3, 0.0, 0.5, -0.8, 0.0]);
        let (split, g, _) = split_at(&w, 2.0 * PI, &z);
        assert!(is_ndr(&split, &z, &g, &cluster_generators(&w)).unwrap());
        let z = DVector::from_vec(vec![SQRT_2, 0.0, 0.0, 0.0]);
        let (split, g, _) = split_at(&[1.0, SQRT_2], 2.0 * PI, &z);
        assert!(is_ndr(&split, &z, &g, &[]).unwrap());
        let z = DVector::from_vec(vec![0.6, 0.3, 0.5, -0.8]);
        let (split, g, _) = split_at(&[1.0, 1.0], 2.0 * PI, &z);
        assert!(!is_ndr(&split, &z, &g, &[]).unwrap());
    }

    #[test]
    fn normality_counterexample_and_generic_case() {
        let w = [1.0, 2.0];
        let p = RankPolicy::default();
        let family = FirstIntegralFamily::superintegrable(&w, 1_000_000).unwrap();
        assert_eq!(family.len(), 4);
        let z = DVector::from_vec(vec![0.0, 0.5, 0.0, 0.7]);
        let (_, g, m) = split_at(&w, 2.0 * PI, &z);
        assert!(!is_normal(&m, &g, &family, p).unwrap());
        assert!(!is_sigma_normal(&m, &g, &family, p).unwrap());
        let z = DVector::from_vec(vec![0.4, 0.3, -0.5, 0.6]);
        let (_, g, m) = split_at(&w, 2.0 * PI, &z);
        assert!(is_normal(&m, &g, &family, p).unwrap());
        assert!(is_sigma_normal(&m, &g, &family, p).unwrap());
        let energies = FirstIntegralFamily::component_energies(&w).unwrap();
        assert!(!is_normal(&m, &g, &energies, p).unwrap());
    }

    #[test]
    fn single_integral_on_nondegenerate_orbit_is_normal() {
        let w = [1.0, SQRT_2];
        let h = QuadraticHamiltonian::new(w.to_vec()).unwrap();
        let z = DVector::from_vec(vec![SQRT_2, 0.0, 0.0, 0.0]);
        let (_, g, m) = split_at(&w, 2.0 * PI, &z);
        let hc = h.clone();
        let hg = h.clone();
        let family = FirstIntegralFamily::new().with(CustomIntegral::new(
            Box::new(move |z| hc.energy(z)),
            Box::new(move |z| hg.gradient(z)),
        ));
        assert!(is_normal(&m, &g, &family, RankPolicy::default()).unwrap());
        assert!(is_sigma_normal(&m, &g, &family, RankPolicy::default()).unwrap());
    }

    #[test]
    fn zero_gradients_are_rejected() {
        let w = [1.0, 2.0];
        let z = DVector::from_vec(vec![0.0, 0.5, 0.0, 0.7]);
        let (_, g, m) = split_at(&w, 2.0 * PI, &z);
        let family = FirstIntegralFamily::new().with(ComponentEnergy::new(&w, 0).unwrap());
        assert!(matches!(is_normal(&m, &g, &family, RankPolicy::default()), Err(Error::DependentGradients)));
    }

    #[test]
    fn hyp_rc_on_quadratic_and_shear() {
        let z = DVector::from_vec(vec![0.4, 0.3, -0.5, 0.6]);
        assert!(check_hyp_rc(&split_at(&[1.0, 2.0], 2.0 * PI, &z).0).unwrap());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(check_hyp_rc(&EigenspaceSplit::new(&m, RankPolicy::default()).unwrap()).unwrap());
    }

    #[test]
    fn clean_flow_cases() {
        let p = RankPolicy::default();
        let w = [1.0, SQRT_2];
        let z = DVector::from_vec(vec![SQRT_2, 0.0, 0.0, 0.0]);
        let (_, g, m) = split_at(&w, 2.0 * PI, &z);
        let tangent = quadratic_component_tangent(&w, 2.0 * PI, &g, p).unwrap();
        assert!(clean_flow_check(m.matrix(), &g, &tangent, p).unwrap());
        let weyl = quadratic_component_tangent(&w, 0.0, &g, p).unwrap();
        assert!(clean_flow_check(&DMatrix::identity(4, 4), &g, &weyl, p).unwrap());

        let w = [1.0, 2.0];
        let z = DVector::from_vec(vec![0.0, 0.5, 0.0, 0.7]);
        let (_, g, m) = split_at(&w, 2.0 * PI, &z);
        let undersized = quadratic_component_tangent(&w, PI, &g, p).unwrap();
        assert!(!clean_flow_check(m.matrix(), &g, &undersized, p).unwrap());
        let full = quadratic_component_tangent(&w, 2.0 * PI, &g, p).unwrap();
        assert!(clean_flow_check(m.matrix(), &g, &full, p).unwrap());
    }

    #[test]
    fn moment_maps() {
        let j = symplectic_j(PhaseDim::new(2).unwrap());
        let f = moment_map(&j).unwrap();
        let z = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4]);
        assert!((f.value(&z) + z.norm_squared()).abs() < 1e-15);
        let zero = moment_map(&DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(zero.value(&z), 0.0);
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]));
        assert!(matches!(moment_map(&bad), Err(Error::NotHamiltonianGenerator { .. })));
    }

    #[test]
    fn resonant_monomial_gradient_matches_finite_differences() {
        let w = [1.0, 2.0];
        for part in [Part::Re, Part::Im] {
            let f = ResonantMonomial::new(&w, 0, 1, 2, 1, part).unwrap();
            let z = DVector::from_vec(vec![0.3, -0.4, 0.7, 0.2]);
            let g = f.gradient(&z);
            for i in 0..4 {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += 1e-6;
                zm[i] -= 1e-6;
                let fd = (f.value(&zp) - f.value(&zm)) / 2e-6;
                assert!((fd - g[i]).abs() < 1e-8, "{part:?} {i}: {fd} vs {}", g[i]);
            }
        }
        assert!(ResonantMonomial::new(&w, 0, 1, 1, 1, Part::Re).is_err());
    }
}
