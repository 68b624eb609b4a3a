//! Cantilever mechanics and the electrostatic frequency-shift model.
//!
//! In the linear regime the resonance shifts by `Δω = -C ∂F_tot/∂a` with
//! `C = ω₀ / (2k)`. For a sphere at voltage `V` above a plate with residual
//! potential `V₀` this gives `Δω = -γ(a) (V - V₀)² - C F'(a)`, where γ is the
//! exact sphere-plate series
//!
//! ```text
//! γ = 2π ε₀ C / sqrt(a (2R + a)) Σ_{n≥1} csch(nκ) { n coth(nκ) [n coth(nκ) - coth κ]
//!                                               - csch²κ + n² csch²(nκ) },
//! cosh κ = 1 + a/R.
//! ```

use std::f64::consts::PI;

use thiserror::Error;

use crate::summation::NeumaierSum;
use crate::units::{EPSILON_0, NM};

/// Below this `a/R` the series needs too many terms; use the PFA asymptote.
pub const MIN_RATIO: f64 = 1e-9;
const MAX_SERIES_TERMS: usize = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElectrostaticsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("a/R = {ratio:e} is below {MIN_RATIO:e}; κ loses precision, use the PFA asymptote C π ε₀ R / a²")]
    PrecisionLoss { ratio: f64 },
    #[error("γ series did not converge after {terms} terms")]
    NotConverged { terms: usize },
    #[error("oscillation amplitude {amplitude:e} m exceeds the linear-regime limit at closest separation {separation:e} m")]
    Nonlinear { amplitude: f64, separation: f64 },
    #[error("inconsistent cantilever: k = {given:e} N/m but w v³ Y / (4 L³) = {computed:e} N/m")]
    InconsistentCantilever { given: f64, computed: f64 },
}

fn positive(name: &str, value: f64) -> Result<(), ElectrostaticsError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ElectrostaticsError::InvalidArgument(format!(
            "{name} must be positive, got {value}"
        )))
    }
}

/// `k = w v³ Y / (4 L³)` for a rectangular beam.
pub fn spring_constant(width: f64, thickness: f64, length: f64, youngs_modulus: f64) -> Result<f64, ElectrostaticsError> {
    positive("width", width)?;
    positive("thickness", thickness)?;
    positive("length", length)?;
    positive("Young's modulus", youngs_modulus)?;
    Ok(width * thickness.powi(3) * youngs_modulus / (4.0 * length.powi(3)))
}

/// `C = ω₀ / (2k)` in s/kg.
pub fn calibration_constant(spring_constant: f64, resonance: f64) -> Result<f64, ElectrostaticsError> {
    positive("spring constant", spring_constant)?;
    positive("resonance frequency", resonance)?;
    Ok(resonance / (2.0 * spring_constant))
}

/// Beam dimensions for deriving `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamDimensions {
    pub width: f64,
    pub thickness: f64,
    pub length: f64,
    pub youngs_modulus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CantileverSpec {
    pub beam: Option<BeamDimensions>,
    pub spring_constant: f64,
    pub resonance: f64,
}

impl CantileverSpec {
    pub fn new(spring_constant: f64, resonance: f64, beam: Option<BeamDimensions>) -> Result<Self, ElectrostaticsError> {
        positive("spring constant", spring_constant)?;
        positive("resonance frequency", resonance)?;
        if let Some(b) = beam {
            let computed = self::spring_constant(b.width, b.thickness, b.length, b.youngs_modulus)?;
            if ((computed - spring_constant) / spring_constant).abs() > 0.01 {
                return Err(ElectrostaticsError::InconsistentCantilever {
                    given: spring_constant,
                    computed,
                });
            }
        }
        Ok(Self {
            beam,
            spring_constant,
            resonance,
        })
    }

    /// Sphere-loaded cantilever in vacuum: k = 0.007353 N/m, ω₀ = 9444 rad/s.
    pub fn experiment() -> Self {
        Self {
            beam: None,
            spring_constant: 0.007353,
            resonance: 0.9444e4,
        }
    }

    pub fn calibration_constant(&self) -> f64 {
        self.resonance / (2.0 * self.spring_constant)
    }
}

/// Amplitude limits of the linear regime: an amplitude up to `amplitude` is
/// allowed when the closest separation is at least `min_separation`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearityGuard {
    rules: Vec<(f64, f64)>,
}

impl Default for LinearityGuard {
    /// 10 nm above 250 nm, 20 nm above 600 nm.
    fn default() -> Self {
        Self {
            rules: vec![(10.0 * NM, 250.0 * NM), (20.0 * NM, 600.0 * NM)],
        }
    }
}

impl LinearityGuard {
    pub fn new(rules: Vec<(f64, f64)>) -> Self {
        Self { rules }
    }

    /// Largest admissible amplitude at a closest separation.
    pub fn limit(&self, closest_separation: f64) -> f64 {
        self.rules
            .iter()
            .filter(|(_, min_sep)| closest_separation >= *min_sep * (1.0 - 1e-12))
            .map(|(amp, _)| *amp)
            .fold(0.0, f64::max)
    }

    pub fn check(&self, amplitude: f64, closest_separation: f64) -> Result<(), ElectrostaticsError> {
        if amplitude <= self.limit(closest_separation) * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(ElectrostaticsError::Nonlinear {
                amplitude,
                separation: closest_separation,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyShiftModel {
    pub calibration_constant: f64,
    pub amplitude: f64,
    pub linearity_limit: f64,
}

impl FrequencyShiftModel {
    pub fn new(calibration_constant: f64, amplitude: f64, linearity_limit: f64) -> Result<Self, ElectrostaticsError> {
        positive("calibration constant", calibration_constant)?;
        positive("amplitude", amplitude)?;
        if amplitude > linearity_limit {
            return Err(ElectrostaticsError::InvalidArgument(format!(
                "amplitude {amplitude:e} m exceeds the linearity limit {linearity_limit:e} m"
            )));
        }
        Ok(Self {
            calibration_constant,
            amplitude,
            linearity_limit,
        })
    }
}

/// κ with `cosh κ = 1 + a/R`, computed as `ln(1 + x + sqrt(x (2 + x)))`.
pub fn kappa(separation: f64, radius: f64) -> f64 {
    let x = separation / radius;
    (x + (x * (2.0 + x)).sqrt()).ln_1p()
}

#[inline]
fn csch(x: f64) -> f64 {
    1.0 / x.sinh()
}

#[inline]
fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

/// Dimensionless series sum of γ, without the `2π ε₀ C / sqrt(a(2R+a))`
/// prefactor.
pub fn gamma_series(kappa: f64, tol: f64) -> Result<f64, ElectrostaticsError> {
    let coth_k = coth(kappa);
    let csch_k2 = csch(kappa).powi(2);
    // csch(nκ) and coth(nκ) from qⁿ = e^(-nκ), updated by multiplication.
    let q = (-kappa).exp();
    let mut qn = 1.0;
    let mut sum = NeumaierSum::new();
    let mut small_run = 0;
    for n in 1..=MAX_SERIES_TERMS {
        let nf = n as f64;
        qn *= q;
        let q2n = qn * qn;
        let two_x = 2.0 * nf * kappa;
        let denom = if two_x < 0.5 { -(-two_x).exp_m1() } else { 1.0 - q2n };
        let cs = 2.0 * qn / denom;
        if cs == 0.0 {
            return Ok(sum.value());
        }
        let nc = nf * (1.0 + q2n) / denom;
        let term = cs * (nc * (nc - coth_k) - csch_k2 + nf * nf * cs * cs);
        sum.add(term);
        if term.abs() < tol * sum.value().abs() {
            small_run += 1;
            if small_run >= 3 {
                return Ok(sum.value());
            }
        } else {
            small_run = 0;
        }
    }
    Err(ElectrostaticsError::NotConverged {
        terms: MAX_SERIES_TERMS,
    })
}

/// γ(a) in rad s⁻¹ V⁻² for calibration constant `C` (s/kg).
pub fn gamma_coefficient(separation: f64, radius: f64, calibration_constant: f64, tol: f64) -> Result<f64, ElectrostaticsError> {
    positive("separation", separation)?;
    positive("radius", radius)?;
    if !calibration_constant.is_finite() {
        return Err(ElectrostaticsError::InvalidArgument("calibration constant must be finite".into()));
    }
    if !(tol.is_finite() && tol > 0.0 && tol < 1.0) {
        return Err(ElectrostaticsError::InvalidArgument(format!("tolerance {tol} outside (0, 1)")));
    }
    let ratio = separation / radius;
    if ratio < MIN_RATIO {
        return Err(ElectrostaticsError::PrecisionLoss { ratio });
    }
    let series = gamma_series(kappa(separation, radius), tol)?;
    let prefactor = 2.0 * PI * EPSILON_0 * calibration_constant / (separation * (2.0 * radius + separation)).sqrt();
    Ok(prefactor * series)
}

/// `C π ε₀ R / a²`, the small-gap limit of γ.
pub fn gamma_pfa(separation: f64, radius: f64, calibration_constant: f64) -> f64 {
    calibration_constant * PI * EPSILON_0 * radius / (separation * separation)
}

/// `Δω = -γ(a) (V - V₀)² - C F'(a)`.
pub fn frequency_shift<G, F>(separation: f64, voltage: f64, residual: f64, gamma: G, gradient: F, calibration_constant: f64) -> f64
where
    G: Fn(f64) -> f64,
    F: Fn(f64) -> f64,
{
    let dv = voltage - residual;
    -gamma(separation) * dv * dv - calibration_constant * gradient(separation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spring_constant_scaling() {
        let k = spring_constant(30e-6, 1e-6, 300e-6, 169e9).unwrap();
        assert_relative_eq!(spring_constant(30e-6, 2e-6, 300e-6, 169e9).unwrap(), 8.0 * k, max_relative = 1e-14);
        assert_relative_eq!(spring_constant(30e-6, 1e-6, 600e-6, 169e9).unwrap(), k / 8.0, max_relative = 1e-14);
        let s = 3.0;
        assert_relative_eq!(spring_constant(30e-6 * s, 1e-6 * s, 300e-6 * s, 169e9).unwrap(), k * s, max_relative = 1e-14);
        assert!(spring_constant(0.0, 1e-6, 1e-4, 1e9).is_err());
    }

    #[test]
    fn calibration_constant_from_cantilever() {
        let c = calibration_constant(0.007353, 0.9444e4).unwrap();
        assert_relative_eq!(c, 6.422e5, max_relative = 1e-3);
        assert_relative_eq!(calibration_constant(2.0 * 0.007353, 0.9444e4).unwrap(), c / 2.0, max_relative = 1e-15);
        assert_relative_eq!(calibration_constant(0.007353, 2.0 * 0.9444e4).unwrap(), 2.0 * c, max_relative = 1e-15);
        assert_eq!(CantileverSpec::experiment().calibration_constant(), c);
        assert!(calibration_constant(-1.0, 1.0).is_err());
    }

    #[test]
    fn cantilever_consistency() {
        let beam = BeamDimensions {
            width: 30e-6,
            thickness: 1e-6,
            length: 300e-6,
            youngs_modulus: 169e9,
        };
        let k = spring_constant(30e-6, 1e-6, 300e-6, 169e9).unwrap();
        assert!(CantileverSpec::new(k * 1.005, 1e4, Some(beam)).is_ok());
        assert!(matches!(
            CantileverSpec::new(k * 1.05, 1e4, Some(beam)),
            Err(ElectrostaticsError::InconsistentCantilever { .. })
        ));
    }

    #[test]
    fn kappa_values() {
        assert_relative_eq!(kappa(1.0, 1.0), 2f64.acosh(), max_relative = 1e-15);
        assert_relative_eq!(kappa(1.0, 1.0), 1.3170, max_relative = 1e-4);
        // Small-x form keeps full precision where acosh(1 + x) does not.
        let x = 1e-12;
        assert_relative_eq!(kappa(x, 1.0), (2.0 * x).sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn first_series_term_vanishes() {
        let k: f64 = 0.3;
        let t = csch(k) * (coth(k) * (coth(k) - coth(k)) - csch(k).powi(2) + csch(k).powi(2));
        assert_eq!(t, 0.0);
    }

    #[test]
    fn pfa_limit() {
        let r = 43.466e-6;
        let c = 6.4e5;
        let a = 1e-4 * r;
        let g = gamma_coefficient(a, r, c, 1e-12).unwrap();
        assert_relative_eq!(g / gamma_pfa(a, r, c), 1.0, max_relative = 1e-3);
    }

    #[test]
    fn gamma_decreases_with_separation() {
        let r = 43.466e-6;
        let mut prev = f64::INFINITY;
        for nm in (250..=2000).step_by(25) {
            let g = gamma_coefficient(nm as f64 * NM, r, 6.4e5, 1e-12).unwrap();
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn series_stopping_is_converged() {
        let k = kappa(300e-9, 43.466e-6);
        let loose = gamma_series(k, 1e-10).unwrap();
        let tight = gamma_series(k, 1e-15).unwrap();
        assert!(((loose - tight) / tight).abs() < 1e-8, "{loose} {tight}");
    }

    #[test]
    fn tiny_ratio_is_rejected() {
        assert!(matches!(
            gamma_coefficient(1e-15, 1e-5, 1.0, 1e-10),
            Err(ElectrostaticsError::PrecisionLoss { .. })
        ));
    }

    #[test]
    fn frequency_shift_parabola() {
        let gamma = |a: f64| 1e-10 / (a * a);
        let grad = |a: f64| 1e-30 / a.powi(4);
        let (a, v0, c) = (400e-9, 0.0107, 6.485e5);
        let apex = frequency_shift(a, v0, v0, gamma, grad, c);
        assert_eq!(apex, -c * grad(a));
        for u in [0.001, 0.02, 0.05] {
            assert_eq!(
                frequency_shift(a, v0 + u, v0, gamma, grad, c),
                frequency_shift(a, v0 - u, v0, gamma, grad, c)
            );
            assert!(frequency_shift(a, v0 + u, v0, gamma, grad, c) < apex);
        }
    }

    #[test]
    fn equal_shift_voltages_bracket_the_residual() {
        let gamma = |_: f64| 120.0;
        let grad = |_: f64| 1e-6;
        let v0 = 0.0496;
        let v1 = v0 - 0.03;
        let target = frequency_shift(1e-6, v1, v0, gamma, grad, 6e5);
        // Second voltage with the same shift, found by bisection on the far side.
        let (mut lo, mut hi) = (v0, v0 + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if frequency_shift(1e-6, mid, v0, gamma, grad, 6e5) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(0.5 * (v1 + lo), v0, max_relative = 1e-12);
    }

    #[test]
    fn linearity_guard_defaults() {
        let g = LinearityGuard::default();
        assert!(g.check(10e-9, 250e-9).is_ok());
        assert!(g.check(20e-9, 250e-9).is_err());
        assert!(g.check(20e-9, 600e-9).is_ok());
        assert!(g.check(10e-9, 200e-9).is_err());
        assert!(FrequencyShiftModel::new(6.4e5, 25e-9, 20e-9).is_err());
        assert!(FrequencyShiftModel::new(6.4e5, 10e-9, 20e-9).is_ok());
    }
}
