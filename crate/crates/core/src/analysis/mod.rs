//! Calibration and statistics: parabola fits per separation, the residual
//! potential line, the fit of γ(a) for C and z0, force-gradient extraction
//! with its error budget, and the confidence-band comparison with theory.

mod calibration;
mod compare;
mod gradients;
mod parabola;

pub use calibration::{calibrate, fit_calibration, CalibrationFit, CalibrationResult, GammaSample, WindowFit, MIN_CALIBRATION_POINTS};
pub use compare::{
    compare, consistent_by_containment, default_windows, excluded_by_count, ComparisonReport, ModelComparison, TheoryCurve, TheoryErrorConfig, Verdict,
    WindowVerdict, DEFAULT_EXCLUSION_PERCENT,
};
pub use gradients::{average_sets, common_grid, extract_gradients, resample, student_coefficient, GradientSeries, CONFIDENCE};
pub use parabola::{fit_parabola, fit_parabolas, fit_v0_line, ParabolaFit, V0Line};

use thiserror::Error;

use crate::electrostatics::ElectrostaticsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least 3 distinct voltages at z = {z_rel:e} m, got {distinct}")]
    TooFewVoltages { z_rel: f64, distinct: usize },
    #[error("degenerate parabola at z = {z_rel:e} m: quadratic coefficient {coefficient:e} is not negative")]
    DegenerateFit { z_rel: f64, coefficient: f64 },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("fit did not converge after {iterations} iterations (reduced χ² = {chi2_red:e}): {message}")]
    FitFailure { iterations: usize, chi2_red: f64, message: String },
    #[error("fitted closest separation z0 = {z0:e} m left [0, 10 μm]")]
    Domain { z0: f64 },
    #[error("grids are not aligned: {0}")]
    Alignment(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Electrostatics(#[from] ElectrostaticsError),
}
