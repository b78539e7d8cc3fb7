use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unstable rank decision: singular value {sigma:e} within a factor 10 of threshold {threshold:e}")]
    UnstableRank { sigma: f64, threshold: f64 },

    #[error("matrix is not symplectic: defect {defect:e} exceeds {tol:e}")]
    NotSymplectic { defect: f64, tol: f64 },

    #[error("subspace is not invariant: residual {residual:e}")]
    NotInvariant { residual: f64 },

    #[error("invariant splitting is ill-conditioned: condition number {cond:e}")]
    IllConditionedSplit { cond: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("restricted determinant {value:e} is numerically zero (unit eigenvalue leaked into the complement)")]
    UnitEigenvalueLeak { value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("point is not periodic: |flow(T,z) - z| = {distance:e}")]
    NotPeriodic { distance: f64 },

    #[error("integrator step size collapsed after {steps} steps (energy drift {drift:e})")]
    StepSizeCollapse { steps: usize, drift: f64 },

    #[error("energy drift {drift:e} exceeds {tol:e}")]
    EnergyDrift { drift: f64, tol: f64 },

    #[error("Monte Carlo estimate unreliable: only {hits} samples landed in the shell")]
    MonteCarloVariance { hits: u64 },

    #[error("the set of resonant indices is empty")]
    EmptyResonantSet,

    #[error("{period} is not a period of the flow")]
    NotAPeriod { period: f64 },

    #[error("window holds {count} candidates, above the cap {cap}")]
    WindowTooLarge { count: usize, cap: usize },

    #[error("first-integral gradients have rank zero at the point")]
    DependentGradients,

    #[error("generator is not Hamiltonian: J*A deviates from symmetric by {asymmetry:e}")]
    NotHamiltonianGenerator { asymmetry: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("determinant {value:e} is numerically zero: {context}")]
    DegenerateDeterminant { value: f64, context: &'static str },

    #[error("branch determinant too close to zero at t = {time} (|det| = {modulus:e})")]
    BranchTrackFailed { time: f64, modulus: f64 },

    #[error("phase of the amplitude is unresolved")]
    UnresolvedPhase,

    #[error("phase integer {beta} violates the curvature sign constraint")]
    InvalidPhase { beta: i32 },

    #[error("point lies outside the action domain")]
    OutsideDomain,

    #[error("supplied derivative disagrees with finite differences (relative error {rel:e})")]
    DerivativeMismatch { rel: f64 },

    #[error("frequency Hessian is singular")]
    SingularFrequencyHessian,

    #[error("curvature vanishes (|K| = {curvature:e})")]
    VanishingCurvature { curvature: f64 },

    #[error("implicit solve for the energy surface failed on every axis")]
    ImplicitSolveFailed,

    #[error("spectrum does not cover the support of the cutoff")]
    IncompleteSpectrum,

    #[error("eigenvalue count exceeds the cap {cap}")]
    SpectrumTooLarge { cap: usize },

    #[error("invalid config at `{path}`: {message}")]
    InvalidConfig { path: String, message: String },

    #[error("malformed report: {0}")]
    MalformedReport(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::InvalidConfig {
        path: path.into(),
        message: message.into(),
    }
}
