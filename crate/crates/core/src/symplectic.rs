//! Linear algebra on phase space `R^{2n}`: the symplectic form, generalized
//! eigenspaces, invariant splittings and restricted determinants.
//!
//! Every rank decision goes through [`kernel`] or [`Subspace::from_columns`],
//! which threshold singular values against [`RankPolicy`] and refuse to guess
//! when a singular value sits within a factor 10 of the threshold.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Number of degrees of freedom `n`; phase space is `R^{2n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseDim(usize);

impl PhaseDim {
    pub fn new(dof: usize) -> Result<Self> {
        if dof == 0 {
            return Err(Error::Precondition("phase space needs at least one degree of freedom".into()));
        }
        Ok(Self(dof))
    }

    pub fn from_phase_len(len: usize) -> Result<Self> {
        if len % 2 != 0 {
            return Err(Error::DimensionMismatch { expected: len + 1, found: len });
        }
        Self::new(len / 2)
    }

    pub fn dof(self) -> usize {
        self.0
    }

    pub fn phase(self) -> usize {
        2 * self.0
    }
}

/// The matrix `J = [[0, I], [-I, 0]]`.
pub fn symplectic_j(dim: PhaseDim) -> DMatrix<f64> {
    let n = dim.dof();
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// `J v` without materializing `J`.
pub fn apply_j(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len() / 2;
    DVector::from_fn(2 * n, |i, _| if i < n { v[n + i] } else { -v[i - n] })
}

/// The form `w0(a, b) = <J a, b>`.
pub fn symplectic_form(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    apply_j(a).dot(b)
}

/// Max-norm of `M^T J M - J`.
pub fn symplectic_defect(m: &DMatrix<f64>) -> f64 {
    let dim = PhaseDim(m.nrows() / 2);
    let j = symplectic_j(dim);
    (m.transpose() * &j * m - j).amax()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankPolicy {
    pub rank_tol: f64,
}

impl Default for RankPolicy {
    fn default() -> Self {
        Self { rank_tol: 1e-8 }
    }
}

impl RankPolicy {
    pub fn new(rank_tol: f64) -> Result<Self> {
        if !(rank_tol > 0.0 && rank_tol < 1.0) {
            return Err(Error::Precondition(format!("rank_tol must lie in (0, 1), got {rank_tol}")));
        }
        Ok(Self { rank_tol })
    }

    fn threshold(&self, sigma_max: f64, floor: f64) -> f64 {
        self.rank_tol * sigma_max.max(floor)
    }

    fn check_gap(&self, sigmas: &[f64], threshold: f64) -> Result<()> {
        if threshold == 0.0 {
            return Ok(());
        }
        match sigmas
            .iter()
            .find(|&&s| s > threshold / 10.0 && s < threshold * 10.0)
        {
            Some(&sigma) => Err(Error::UnstableRank { sigma, threshold }),
            None => Ok(()),
        }
    }
}

/// A linear subspace of `R^d` stored as a matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Self { basis: DMatrix::zeros(ambient, 0) }
    }

    pub fn full(ambient: usize) -> Self {
        Self { basis: DMatrix::identity(ambient, ambient) }
    }

    /// Span of the coordinate axes listed in `axes`. Exact, no rank decisions.
    pub fn coordinate(ambient: usize, axes: &[usize]) -> Self {
        let mut basis = DMatrix::zeros(ambient, axes.len());
        for (c, &a) in axes.iter().enumerate() {
            basis[(a, c)] = 1.0;
        }
        Self { basis }
    }

    /// Column space of `m`, with rank decided relative to the largest singular value.
    pub fn from_columns(m: &DMatrix<f64>, policy: RankPolicy) -> Result<Self> {
        let ambient = m.nrows();
        if m.ncols() == 0 || m.amax() == 0.0 {
            return Ok(Self::zero(ambient));
        }
        let svd = m.clone().svd(true, false);
        let u = svd.u.expect("requested U");
        let sigmas: Vec<f64> = svd.singular_values.iter().copied().collect();
        let order = descending(&sigmas);
        let sigma_max = sigmas[order[0]];
        let thr = policy.threshold(sigma_max, 0.0);
        policy.check_gap(&sigmas, thr)?;
        let cols: Vec<DVector<f64>> = order
            .iter()
            .filter(|&&i| sigmas[i] > thr)
            .map(|&i| u.column(i).into_owned())
            .collect();
        Ok(Self::from_orthonormal(ambient, &cols))
    }

    pub fn span(vectors: &[DVector<f64>], ambient: usize, policy: RankPolicy) -> Result<Self> {
        if vectors.is_empty() {
            return Ok(Self::zero(ambient));
        }
        for v in vectors {
            if v.len() != ambient {
                return Err(Error::DimensionMismatch { expected: ambient, found: v.len() });
            }
        }
        Self::from_columns(&DMatrix::from_columns(vectors), policy)
    }

    fn from_orthonormal(ambient: usize, cols: &[DVector<f64>]) -> Self {
        if cols.is_empty() {
            Self::zero(ambient)
        } else {
            Self { basis: DMatrix::from_columns(cols) }
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn vectors(&self) -> Vec<DVector<f64>> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }

    pub fn complement(&self, policy: RankPolicy) -> Result<Self> {
        if self.dim() == 0 {
            return Ok(Self::full(self.ambient()));
        }
        if self.dim() == self.ambient() {
            return Ok(Self::zero(self.ambient()));
        }
        kernel(&self.basis.transpose(), 1.0, policy)
    }

    pub fn intersection(&self, other: &Subspace, policy: RankPolicy) -> Result<Self> {
        let d = self.ambient();
        if self.dim() == 0 || other.dim() == 0 {
            return Ok(Self::zero(d));
        }
        let residual = (DMatrix::identity(d, d) - other.projector()) * &self.basis;
        let coeffs = kernel(&residual, 1.0, policy)?;
        if coeffs.dim() == 0 {
            return Ok(Self::zero(d));
        }
        Self::from_columns(&(&self.basis * coeffs.basis()), policy)
    }

    pub fn sum(&self, other: &Subspace, policy: RankPolicy) -> Result<Self> {
        let cols: Vec<DVector<f64>> = self.vectors().into_iter().chain(other.vectors()).collect();
        Self::span(&cols, self.ambient(), policy)
    }

    /// Image `m(self)`.
    pub fn image_under(&self, m: &DMatrix<f64>, policy: RankPolicy) -> Result<Self> {
        Self::from_columns(&(m * &self.basis), policy)
    }

    /// Distance of `v` from the subspace relative to `|v|`.
    pub fn relative_distance(&self, v: &DVector<f64>) -> f64 {
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (v - self.project(v)).norm() / norm
    }

    pub fn contains_vector(&self, v: &DVector<f64>, tol: f64) -> bool {
        self.relative_distance(v) <= tol
    }

    /// Largest distance from `self` of a unit vector of `other`.
    pub fn excess(&self, other: &Subspace) -> f64 {
        if other.dim() == 0 {
            return 0.0;
        }
        let d = self.ambient();
        ((DMatrix::identity(d, d) - self.projector()) * other.basis()).amax()
    }

    pub fn contains(&self, other: &Subspace, tol: f64) -> bool {
        self.excess(other) <= tol
    }

    pub fn same_as(&self, other: &Subspace, tol: f64) -> bool {
        self.dim() == other.dim() && self.contains(other, tol)
    }

    /// Max-norm of the part of `m(self)` that leaves the subspace.
    pub fn invariance_residual(&self, m: &DMatrix<f64>) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let d = self.ambient();
        ((DMatrix::identity(d, d) - self.projector()) * m * &self.basis).amax()
    }
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// Null space of `a` (in `R^{ncols}`).
///
/// Singular values at or below `rank_tol * max(sigma_max, floor)` count as
/// zero. `floor` sets the absolute scale below which everything is noise,
/// which matters for nilpotent or near-zero matrices where a purely relative
/// threshold would rank rounding errors against each other.
pub fn kernel(a: &DMatrix<f64>, floor: f64, policy: RankPolicy) -> Result<Subspace> {
    let k = a.ncols();
    if k == 0 {
        return Ok(Subspace::zero(0));
    }
    let padded = if a.nrows() < k {
        let mut p = DMatrix::zeros(k, k);
        p.view_mut((0, 0), (a.nrows(), k)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sigmas: Vec<f64> = svd.singular_values.iter().copied().collect();
    let sigma_max = sigmas.iter().copied().fold(0.0, f64::max);
    let thr = policy.threshold(sigma_max, floor);
    policy.check_gap(&sigmas, thr)?;
    let cols: Vec<DVector<f64>> = sigmas
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= thr)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    Ok(Subspace::from_orthonormal(k, &cols))
}

/// `A - lambda I` for real `lambda`, or the real quadratic factor
/// `A^2 - 2 Re(lambda) A + |lambda|^2 I` of the conjugate pair otherwise.
fn shifted(m: &DMatrix<f64>, lambda: Complex64) -> (DMatrix<f64>, f64) {
    let d = m.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    if lambda.im == 0.0 {
        (m - &id * lambda.re, lambda.re.abs().max(1.0))
    } else {
        let sq = lambda.norm_sqr();
        (m * m - m * (2.0 * lambda.re) + &id * sq, sq.max(1.0))
    }
}

/// Generalized eigenspace `sum_k ker(M - lambda)^k`.
///
/// For non-real `lambda` this returns the real invariant subspace of the
/// pair `{lambda, conj(lambda)}`. Kernels grow one power at a time through
/// `ker(A^k) = { x : A x in ker(A^{k-1}) }`, which avoids forming powers.
pub fn generalized_eigenspace(m: &DMatrix<f64>, lambda: Complex64, policy: RankPolicy) -> Result<Subspace> {
    let d = m.nrows();
    let (a, floor) = shifted(m, lambda);
    let id = DMatrix::<f64>::identity(d, d);
    let mut current = kernel(&a, floor, policy)?;
    while current.dim() > 0 && current.dim() < d {
        let next = kernel(&((&id - current.projector()) * &a), floor, policy)?;
        if next.dim() == current.dim() {
            break;
        }
        current = next;
    }
    Ok(current)
}

/// `ker((M - lambda)^{2n})` formed directly; an oracle for [`generalized_eigenspace`].
pub fn generalized_eigenspace_direct(m: &DMatrix<f64>, lambda: f64, policy: RankPolicy) -> Result<Subspace> {
    let d = m.nrows();
    let (a, floor) = shifted(m, Complex64::new(lambda, 0.0));
    let mut power = DMatrix::<f64>::identity(d, d);
    for _ in 0..d {
        power = &a * power;
    }
    kernel(&power, floor, policy)
}

/// A monodromy matrix together with where and when it was computed.
#[derive(Debug, Clone)]
pub struct Monodromy {
    matrix: DMatrix<f64>,
    base_point: DVector<f64>,
    time: f64,
    symplectic_defect: f64,
}

impl Monodromy {
    pub fn new(matrix: DMatrix<f64>, base_point: DVector<f64>, time: f64, tol_symp: f64) -> Result<Self> {
        let d = matrix.nrows();
        if matrix.ncols() != d || d % 2 != 0 {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.ncols() });
        }
        if base_point.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: base_point.len() });
        }
        let defect = symplectic_defect(&matrix);
        if !(defect <= tol_symp) {
            return Err(Error::NotSymplectic { defect, tol: tol_symp });
        }
        Ok(Self { matrix, base_point, time, symplectic_defect: defect })
    }

    /// A bare matrix with no associated trajectory.
    pub fn from_matrix(matrix: DMatrix<f64>, tol_symp: f64) -> Result<Self> {
        let d = matrix.nrows();
        Self::new(matrix, DVector::zeros(d), 0.0, tol_symp)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn base_point(&self) -> &DVector<f64> {
        &self.base_point
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn symplectic_defect(&self) -> f64 {
        self.symplectic_defect
    }

    pub fn dim(&self) -> PhaseDim {
        PhaseDim(self.matrix.nrows() / 2)
    }

    /// The blocks `(A, B, C, D)` of `M = [[A, B], [C, D]]`.
    pub fn blocks(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        blocks(&self.matrix)
    }

    pub fn minus_identity(&self) -> DMatrix<f64> {
        let d = self.matrix.nrows();
        &self.matrix - DMatrix::<f64>::identity(d, d)
    }
}

pub(crate) fn blocks(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows() / 2;
    (
        m.view((0, 0), (n, n)).into_owned(),
        m.view((0, n), (n, n)).into_owned(),
        m.view((n, 0), (n, n)).into_owned(),
        m.view((n, n), (n, n)).into_owned(),
    )
}

/// Subspaces of the energy shell attached to a split at a periodic point.
#[derive(Debug, Clone)]
pub struct SurfaceSpaces {
    pub grad_h: DVector<f64>,
    /// `T_z Sigma_E`, the orthogonal complement of the gradient.
    pub tangent: Subspace,
    /// `ker(M - I)`.
    pub fixed: Subspace,
    /// `ker(M - I) ∩ T_z Sigma_E`.
    pub fixed_tangent: Subspace,
    /// Radical of the symplectic form restricted to `fixed_tangent`.
    pub isotropic_core: Subspace,
    /// Orthogonal complement of `fixed_tangent` inside `E1 ∩ T_z Sigma_E`.
    pub transverse: Subspace,
}

#[derive(Debug, Clone)]
pub struct EigenspaceSplit {
    matrix: DMatrix<f64>,
    e1: Subspace,
    v1: Subspace,
    policy: RankPolicy,
    surface: Option<SurfaceSpaces>,
}

/// Split `R^{2n} = E1 ⊕ V1` with `V1 = (J E1)^⊥`.
pub fn invariant_split(m: &Monodromy, policy: RankPolicy) -> Result<EigenspaceSplit> {
    EigenspaceSplit::new(m.matrix(), policy)
}

impl EigenspaceSplit {
    pub fn new(matrix: &DMatrix<f64>, policy: RankPolicy) -> Result<Self> {
        let d = matrix.nrows();
        let e1 = generalized_eigenspace(matrix, Complex64::new(1.0, 0.0), policy)?;
        if e1.dim() % 2 != 0 {
            return Err(Error::HypothesisViolated(format!(
                "generalized unit eigenspace has odd dimension {}",
                e1.dim()
            )));
        }
        let j = symplectic_j(PhaseDim(d / 2));
        let je1 = Subspace { basis: &j * e1.basis() };
        let v1 = je1.complement(policy)?;
        let scale = 10.0 * policy.rank_tol * matrix.amax().max(1.0);
        let residual = e1.invariance_residual(matrix).max(v1.invariance_residual(matrix));
        if residual > scale {
            return Err(Error::NotInvariant { residual });
        }
        if e1.dim() > 0 && v1.dim() > 0 {
            let stacked = DMatrix::from_columns(&[e1.vectors(), v1.vectors()].concat());
            let cond = condition_number(&stacked);
            if !(cond < 1e6) {
                return Err(Error::IllConditionedSplit { cond });
            }
        }
        Ok(Self { matrix: matrix.clone(), e1, v1, policy, surface: None })
    }

    /// Attach the energy-shell subspaces for the gradient `grad_h` at the base point.
    pub fn with_energy_surface(mut self, grad_h: &DVector<f64>) -> Result<Self> {
        let d = self.matrix.nrows();
        if grad_h.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: grad_h.len() });
        }
        if grad_h.norm() == 0.0 {
            return Err(Error::Precondition("energy shell has a critical point at the base point".into()));
        }
        let p = self.policy;
        let normal = Subspace::span(std::slice::from_ref(grad_h), d, p)?;
        let tangent = normal.complement(p)?;
        let fixed = kernel(&self.minus_identity(), 1.0, p)?;
        let fixed_tangent = fixed.intersection(&tangent, p)?;
        let isotropic_core = if fixed_tangent.dim() == 0 {
            Subspace::zero(d)
        } else {
            let b = fixed_tangent.basis();
            let gram = b.transpose() * symplectic_j(PhaseDim(d / 2)) * b;
            let coeffs = kernel(&gram, 1.0, p)?;
            if coeffs.dim() == 0 {
                Subspace::zero(d)
            } else {
                Subspace::from_columns(&(b * coeffs.basis()), p)?
            }
        };
        let e1_tangent = self.e1.intersection(&tangent, p)?;
        let transverse = fixed_tangent.complement(p)?.intersection(&e1_tangent, p)?;
        self.surface = Some(SurfaceSpaces {
            grad_h: grad_h.clone(),
            tangent,
            fixed,
            fixed_tangent,
            isotropic_core,
            transverse,
        });
        Ok(self)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn minus_identity(&self) -> DMatrix<f64> {
        let d = self.matrix.nrows();
        &self.matrix - DMatrix::<f64>::identity(d, d)
    }

    pub fn e1(&self) -> &Subspace {
        &self.e1
    }

    pub fn v1(&self) -> &Subspace {
        &self.v1
    }

    pub fn policy(&self) -> RankPolicy {
        self.policy
    }

    pub fn dof(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn surface(&self) -> Option<&SurfaceSpaces> {
        self.surface.as_ref()
    }

    pub(crate) fn require_surface(&self) -> Result<&SurfaceSpaces> {
        self.surface
            .as_ref()
            .ok_or_else(|| Error::Precondition("energy-shell subspaces were not attached to the split".into()))
    }

    /// `dim ker(M - I) ∩ T_z Sigma_E`.
    pub fn k(&self) -> Option<usize> {
        self.surface.as_ref().map(|s| s.fixed_tangent.dim())
    }

    /// Dimension of the isotropic core.
    pub fn r(&self) -> Option<usize> {
        self.surface.as_ref().map(|s| s.isotropic_core.dim())
    }

    /// `dim ker(M - I)^2`.
    pub fn second_kernel_dim(&self) -> Result<usize> {
        let a = self.minus_identity();
        Ok(kernel(&(&a * &a), 1.0, self.policy)?.dim())
    }
}

/// Ratio of extreme singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = m.singular_values();
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Orthogonal projector onto `space`.
pub fn orthogonal_projection(space: &Subspace) -> DMatrix<f64> {
    space.projector()
}

/// Matrix of `map` restricted to the invariant subspace `space`, in its own basis.
pub fn restricted_matrix(map: &DMatrix<f64>, space: &Subspace) -> DMatrix<f64> {
    space.basis().transpose() * map * space.basis()
}

/// `det(M - I)` restricted to the invariant subspace `v1`.
pub fn restricted_det(m_minus_i: &DMatrix<f64>, v1: &Subspace, policy: RankPolicy) -> Result<f64> {
    if v1.dim() == 0 {
        return Ok(1.0);
    }
    let residual = v1.invariance_residual(m_minus_i);
    if residual > 10.0 * policy.rank_tol * m_minus_i.amax().max(1.0) {
        return Err(Error::NotInvariant { residual });
    }
    let value = restricted_matrix(m_minus_i, v1).determinant();
    if value.abs() < policy.rank_tol {
        return Err(Error::UnitEigenvalueLeak { value });
    }
    Ok(value)
}

/// `det(w0|E1)` in an orthonormal basis of `e1`.
pub fn restricted_form_det(e1: &Subspace) -> f64 {
    if e1.dim() == 0 {
        return 1.0;
    }
    let j = symplectic_j(PhaseDim(e1.ambient() / 2));
    (e1.basis().transpose() * j * e1.basis()).determinant()
}

/// Checks `dim E1 >= dim V + dim W` for `W ⊆ V ⊆ E1` with `w0(W, V) = 0`.
pub fn meyer_bound_check(m: &DMatrix<f64>, v: &Subspace, w: &Subspace, policy: RankPolicy) -> Result<bool> {
    let e1 = generalized_eigenspace(m, Complex64::new(1.0, 0.0), policy)?;
    let tol = 1e3 * policy.rank_tol;
    if !v.contains(w, tol) {
        return Err(Error::Precondition("W is not contained in V".into()));
    }
    if !e1.contains(v, tol) {
        return Err(Error::Precondition("V is not contained in E1".into()));
    }
    if w.dim() > 0 && v.dim() > 0 {
        let j = symplectic_j(PhaseDim(m.nrows() / 2));
        let pairing = (w.basis().transpose() * j * v.basis()).amax();
        if pairing > tol {
            return Err(Error::Precondition(format!("w0(W, V) does not vanish ({pairing:e})")));
        }
    }
    Ok(e1.dim() >= v.dim() + w.dim())
}
