//! The quantum side and the comparison engine: exact spectra, test-function
//! windows, the regularized density `G_E(h)`, semiclassical sums, sweeps
//! over `h` and their reports.

mod analysis;
mod config;
mod report;
mod spectrum;
mod sweep;
mod trace;
mod window;

pub use analysis::{
    analyze_quadratic, classify, point_predicates, torus_table, ClassifyReport, ComponentAnalysis, PeriodClassification,
    Predicates, QuadraticAnalysis, TorusAmplitude, TorusRecord, TorusTable,
};
pub use config::{Config, PolynomialCoeffs, PsiConfig, QuarticTerm, SystemConfig, Tolerances};
pub use report::{
    load_report_csv, AmplitudeRecord, ComponentRecord, ReportRow, SpectralDensityReport, WrittenFiles, CSV_HEADER,
};
pub use spectrum::{quadratic_lattice_bounds, quadratic_spectrum, torus_spectrum, Spectrum, SpectrumSource, DEFAULT_COUNT_CAP};
pub use sweep::{
    calibrate_phases, config_spectrum, quadratic_terms, semiclassical_terms, sum_terms, sweep, torus_terms,
    SemiclassicalTerm, SweepOptions,
};
pub use trace::{convolution_identity_check, quantum_density, semiclassical_density};
pub use window::{CutoffShape, EnergyCutoff, TestFunctionPair, Window};
