//! Casimir pressure between parallel plates from the Lifshitz formula.
//!
//! With `y = 2 a q_l` the finite-temperature pressure becomes
//!
//! ```text
//! P(a) = -(k_B T / (8π a³)) Σ'_l ∫_{y_l}^∞ y² Σ_α r_α² / (e^y - r_α²) dy,
//! y_l = 2 a ξ_l / c,
//! ```
//!
//! where the primed sum weights `l = 0` by one half. The zero-frequency term
//! is taken from the model's declared low-frequency character, never from a
//! numerical limit.

use std::cell::RefCell;
use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::optics::{OpticsError, PermittivityModel, ZeroFrequency};
use crate::quadrature::{self, QuadratureError, Tolerance};
use crate::summation::NeumaierSum;
use crate::units::{HBAR, K_BOLTZMANN, SPEED_OF_LIGHT};

pub const MIN_SEPARATION: f64 = 50e-9;
pub const MAX_SEPARATION: f64 = 20e-6;
pub const MIN_TOL: f64 = 1e-12;
pub const MAX_TOL: f64 = 1e-4;

/// Consecutive negligible terms required before the Matsubara sum stops.
const NEGLIGIBLE_RUN: usize = 3;
/// Terms evaluated per parallel batch.
const PARALLEL_CHUNK: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LifshitzError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("zero-frequency term is ambiguous: the model declares no low-frequency continuation")]
    AmbiguousZeroTerm,
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error("quadrature failed for Matsubara term l = {index} at a = {separation:e} m: {source}")]
    NumericFailure {
        index: usize,
        separation: f64,
        source: QuadratureError,
    },
}

/// ξ_l = 2π k_B T l / ħ in rad/s.
pub fn matsubara_frequency(index: usize, temperature: f64) -> f64 {
    2.0 * PI * K_BOLTZMANN * temperature * index as f64 / HBAR
}

/// Matsubara frequencies `ξ_0 … ξ_max` at one temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct MatsubaraSpectrum {
    temperature: f64,
    frequencies: Vec<f64>,
}

impl MatsubaraSpectrum {
    pub fn new(temperature: f64, max_index: usize) -> Result<Self, LifshitzError> {
        check_temperature(temperature)?;
        let frequencies = (0..=max_index)
            .map(|l| matsubara_frequency(l, temperature))
            .collect();
        Ok(Self {
            temperature,
            frequencies,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn max_index(&self) -> usize {
        self.frequencies.len() - 1
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionPair {
    pub tm: f64,
    pub te: f64,
}

/// Reflection-relevant response of a body at one imaginary frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TermResponse {
    /// ξ > 0 with permittivity ε(iξ).
    Dielectric { epsilon: f64 },
    /// ξ = 0, Drude-like: r_TM = 1, r_TE = 0.
    ZeroDrude,
    /// ξ = 0, plasma-like with ωp in rad/s.
    ZeroPlasma { plasma_frequency: f64 },
    /// Perfect reflector: r_TM = 1, r_TE = -1 everywhere.
    Ideal,
}

impl TermResponse {
    /// Reflection coefficients with wavevectors scaled by a common length
    /// `length`: `y = length · q`, `y_xi = length · ξ / c`.
    pub fn reflection(&self, y: f64, y_xi: f64, length: f64) -> ReflectionPair {
        match *self {
            TermResponse::Dielectric { epsilon } => {
                let em1 = epsilon - 1.0;
                let s = (y * y + em1 * y_xi * y_xi).sqrt();
                // Rationalized forms avoid cancellation when ε → 1.
                let tm_den = epsilon * y + s;
                let tm = em1 * ((epsilon + 1.0) * y * y - y_xi * y_xi) / (tm_den * tm_den);
                let te_den = y + s;
                let te = -em1 * y_xi * y_xi / (te_den * te_den);
                ReflectionPair { tm, te }
            }
            TermResponse::ZeroDrude => ReflectionPair { tm: 1.0, te: 0.0 },
            TermResponse::ZeroPlasma { plasma_frequency } => {
                let omega = length * plasma_frequency / SPEED_OF_LIGHT;
                let den = y + (y * y + omega * omega).sqrt();
                ReflectionPair {
                    tm: 1.0,
                    te: -omega * omega / (den * den),
                }
            }
            TermResponse::Ideal => ReflectionPair { tm: 1.0, te: -1.0 },
        }
    }
}

/// A body whose reflection at imaginary frequencies is known.
pub trait Reflector: Sync {
    fn response(&self, xi: f64) -> Result<TermResponse, LifshitzError>;

    fn tag(&self) -> &str;
}

impl Reflector for PermittivityModel {
    fn response(&self, xi: f64) -> Result<TermResponse, LifshitzError> {
        if xi == 0.0 {
            return match self.zero_frequency() {
                ZeroFrequency::Drude => Ok(TermResponse::ZeroDrude),
                ZeroFrequency::Plasma { plasma_frequency } => {
                    Ok(TermResponse::ZeroPlasma { plasma_frequency })
                }
                ZeroFrequency::Undeclared => Err(LifshitzError::AmbiguousZeroTerm),
            };
        }
        Ok(TermResponse::Dielectric {
            epsilon: self.eval(xi)?,
        })
    }

    fn tag(&self) -> &str {
        PermittivityModel::tag(self)
    }
}

/// Ideal-metal surrogate, `ε → ∞` at every frequency.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdealMetal;

impl Reflector for IdealMetal {
    fn response(&self, _xi: f64) -> Result<TermResponse, LifshitzError> {
        Ok(TermResponse::Ideal)
    }

    fn tag(&self) -> &str {
        "ideal"
    }
}

/// Reflection coefficients at (ξ, k⊥) in SI units.
pub fn reflection_coefficients<R: Reflector + ?Sized>(
    reflector: &R,
    xi: f64,
    k_perp: f64,
) -> Result<ReflectionPair, LifshitzError> {
    if !(xi.is_finite() && xi >= 0.0) {
        return Err(LifshitzError::InvalidArgument(format!("ξ must be ≥ 0, got {xi:e}")));
    }
    if !(k_perp.is_finite() && k_perp > 0.0) {
        return Err(LifshitzError::InvalidArgument(format!("k⊥ must be > 0, got {k_perp:e}")));
    }
    let y_xi = xi / SPEED_OF_LIGHT;
    let q = (k_perp * k_perp + y_xi * y_xi).sqrt();
    Ok(reflector.response(xi)?.reflection(q, y_xi, 1.0))
}

/// `r² / (e^y - r²)`, written to stay accurate for small y and r² → 1.
#[inline]
fn mode_occupation(r2: f64, y: f64) -> f64 {
    if r2 == 0.0 {
        return 0.0;
    }
    let x = r2 * (-y).exp();
    let denom = (1.0 - r2) - r2 * (-y).exp_m1();
    x / denom
}

#[inline]
fn polarization_sum(response: &TermResponse, y: f64, y_xi: f64, length: f64) -> f64 {
    let r = response.reflection(y, y_xi, length);
    mode_occupation(r.tm * r.tm, y) + mode_occupation(r.te * r.te, y)
}

/// `∫_{y_l}^∞ y² Σ_α r_α²/(e^y - r_α²) dy` for one Matsubara term.
fn term_integral(response: &TermResponse, y_xi: f64, two_a: f64, rel_tol: f64) -> Result<f64, QuadratureError> {
    let f = |y: f64| y * y * polarization_sum(response, y, y_xi, two_a);
    quadrature::integrate_to_infinity(f, y_xi, Tolerance::relative(rel_tol).with_abs(1e-300)).map(|e| e.value)
}

/// The same Matsubara term integrated over the scaled in-plane wavevector
/// `u = 2 a k⊥` instead of `y = 2 a q`: `∫_0^∞ y u Σ_α … du` with
/// `y = sqrt(u² + y_l²)`.
pub fn term_integral_by_wavevector<R: Reflector + ?Sized>(
    reflector: &R,
    index: usize,
    separation: f64,
    temperature: f64,
    rel_tol: f64,
) -> Result<f64, LifshitzError> {
    let xi = matsubara_frequency(index, temperature);
    let two_a = 2.0 * separation;
    let y_xi = two_a * xi / SPEED_OF_LIGHT;
    let response = reflector.response(xi)?;
    let f = |u: f64| {
        let y = (u * u + y_xi * y_xi).sqrt();
        y * u * polarization_sum(&response, y, y_xi, two_a)
    };
    quadrature::integrate_to_infinity(f, 0.0, Tolerance::relative(rel_tol).with_abs(1e-300))
        .map(|e| e.value)
        .map_err(|source| LifshitzError::NumericFailure {
            index,
            separation,
            source,
        })
}

/// Matsubara term `l` of the dimensionless sum (before the ½ weight of
/// `l = 0` and before the prefactor), integrated in `y`.
pub fn term_integral_by_y<R: Reflector + ?Sized>(
    reflector: &R,
    index: usize,
    separation: f64,
    temperature: f64,
    rel_tol: f64,
) -> Result<f64, LifshitzError> {
    let xi = matsubara_frequency(index, temperature);
    let two_a = 2.0 * separation;
    let response = reflector.response(xi)?;
    term_integral(&response, two_a * xi / SPEED_OF_LIGHT, two_a, rel_tol).map_err(|source| {
        LifshitzError::NumericFailure {
            index,
            separation,
            source,
        }
    })
}

/// `-k_B T / (8π a³)`, the factor converting the dimensionless sum to Pa.
pub fn pressure_prefactor(separation: f64, temperature: f64) -> f64 {
    -K_BOLTZMANN * temperature / (8.0 * PI * separation.powi(3))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Summation {
    #[default]
    Serial,
    /// Terms evaluated in parallel batches; results are bit-identical to
    /// serial summation.
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureResult {
    /// Pa; negative is attractive.
    pub pressure: f64,
    /// Per-term contributions in Pa (l = 0 already halved), if requested.
    pub terms: Option<Vec<f64>>,
    /// Bound on the discarded Matsubara tail, Pa.
    pub truncation_error_estimate: f64,
    /// Highest Matsubara index included.
    pub max_index: usize,
}

fn check_temperature(temperature: f64) -> Result<(), LifshitzError> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(LifshitzError::InvalidArgument(format!(
            "temperature must be > 0 K, got {temperature}"
        )));
    }
    Ok(())
}

fn check_separation(separation: f64) -> Result<(), LifshitzError> {
    if !(MIN_SEPARATION..=MAX_SEPARATION).contains(&separation) {
        return Err(LifshitzError::InvalidArgument(format!(
            "separation {separation:e} m outside [{MIN_SEPARATION:e}, {MAX_SEPARATION:e}] m"
        )));
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<(), LifshitzError> {
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(LifshitzError::InvalidArgument(format!(
            "tolerance {tol:e} outside [{MIN_TOL:e}, {MAX_TOL:e}]"
        )));
    }
    Ok(())
}

/// Hard cap on the Matsubara index at separation `a`.
///
/// Terms beyond `y_l = 2aξ_l/c ≳ Y` are suppressed as `Y² e^{-Y}`; the cap
/// uses `Y = 20 + 2 ln(1/tol)` so it only binds after the tail is far below
/// `tol`.
pub fn index_cap(separation: f64, temperature: f64, tol: f64) -> usize {
    let y1 = 2.0 * separation * matsubara_frequency(1, temperature) / SPEED_OF_LIGHT;
    let y_cap = 20.0 + 2.0 * (1.0 / tol).ln();
    (y_cap / y1).ceil() as usize
}

/// Lifshitz pressure evaluator with responses cached per Matsubara index, so
/// that sweeps over separation evaluate ε(iξ_l) once.
pub struct LifshitzSolver<'r, R: Reflector + ?Sized> {
    reflector: &'r R,
    temperature: f64,
    tol: f64,
    summation: Summation,
    keep_terms: bool,
    responses: Vec<TermResponse>,
}

impl<'r, R: Reflector + ?Sized> LifshitzSolver<'r, R> {
    /// Caches responses up to the index cap of the largest separation that
    /// will be requested.
    pub fn new(reflector: &'r R, temperature: f64, tol: f64, max_separation: f64) -> Result<Self, LifshitzError> {
        check_temperature(temperature)?;
        check_tol(tol)?;
        check_separation(max_separation)?;
        let cap = index_cap(max_separation, temperature, tol);
        let responses = (0..=cap)
            .into_par_iter()
            .map(|l| reflector.response(matsubara_frequency(l, temperature)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            reflector,
            temperature,
            tol,
            summation: Summation::Serial,
            keep_terms: false,
            responses,
        })
    }

    pub fn with_summation(mut self, summation: Summation) -> Self {
        self.summation = summation;
        self
    }

    pub fn keep_terms(mut self, keep: bool) -> Self {
        self.keep_terms = keep;
        self
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn reflector(&self) -> &R {
        self.reflector
    }

    fn response(&self, l: usize) -> Result<TermResponse, LifshitzError> {
        match self.responses.get(l) {
            Some(r) => Ok(*r),
            None => self.reflector.response(matsubara_frequency(l, self.temperature)),
        }
    }

    fn term(&self, l: usize, separation: f64) -> Result<f64, LifshitzError> {
        let two_a = 2.0 * separation;
        let y_xi = two_a * matsubara_frequency(l, self.temperature) / SPEED_OF_LIGHT;
        let response = self.response(l)?;
        let value = term_integral(&response, y_xi, two_a, 0.1 * self.tol).map_err(|source| {
            LifshitzError::NumericFailure {
                index: l,
                separation,
                source,
            }
        })?;
        Ok(if l == 0 { 0.5 * value } else { value })
    }

    /// Pressure at separation `a` (m).
    pub fn pressure(&self, separation: f64) -> Result<PressureResult, LifshitzError> {
        check_separation(separation)?;
        let cap = index_cap(separation, self.temperature, self.tol);
        let threshold = 0.1 * self.tol;

        let mut sum = NeumaierSum::new();
        let mut kept = Vec::new();
        let mut negligible_run = 0;
        let mut last_two = [0.0f64; 2];
        let mut max_index = 0;
        let mut next = 0usize;
        'outer: while next <= cap {
            let batch_end = match self.summation {
                Summation::Serial => next + 1,
                Summation::Parallel => (next + PARALLEL_CHUNK).min(cap + 1),
            };
            let batch: Vec<f64> = match self.summation {
                Summation::Serial => vec![self.term(next, separation)?],
                Summation::Parallel => (next..batch_end)
                    .into_par_iter()
                    .map(|l| self.term(l, separation))
                    .collect::<Result<_, _>>()?,
            };
            for (offset, value) in batch.into_iter().enumerate() {
                let l = next + offset;
                sum.add(value);
                if self.keep_terms {
                    kept.push(value);
                }
                last_two = [last_two[1], value];
                max_index = l;
                if l > 0 && value.abs() < threshold * sum.value().abs() {
                    negligible_run += 1;
                    if negligible_run >= NEGLIGIBLE_RUN {
                        break 'outer;
                    }
                } else {
                    negligible_run = 0;
                }
            }
            next = batch_end;
        }

        // Geometric tail from the ratio of the last two terms.
        let tail = if max_index >= 1 && last_two[0] > 0.0 {
            let ratio = (last_two[1] / last_two[0]).clamp(0.0, 0.999);
            last_two[1] * ratio / (1.0 - ratio)
        } else {
            last_two[1].abs()
        };

        let prefactor = pressure_prefactor(separation, self.temperature);
        Ok(PressureResult {
            pressure: prefactor * sum.value(),
            terms: self
                .keep_terms
                .then(|| kept.into_iter().map(|t| prefactor * t).collect()),
            truncation_error_estimate: (prefactor * tail).abs(),
            max_index,
        })
    }
}

/// Lifshitz pressure at separation `a` (m) and temperature `T` (K).
pub fn casimir_pressure<R: Reflector + ?Sized>(
    reflector: &R,
    separation: f64,
    temperature: f64,
    tol: f64,
) -> Result<PressureResult, LifshitzError> {
    LifshitzSolver::new(reflector, temperature, tol, separation)?.pressure(separation)
}

/// Zero-temperature pressure, with the Matsubara sum replaced by the
/// frequency integral:
///
/// `P = -(ħ c / (32 π² a⁴)) ∫_0^∞ dζ ∫_ζ^∞ y² Σ_α … dy`, `ζ = 2aξ/c`.
pub fn casimir_pressure_zero_temperature<R: Reflector + ?Sized>(
    reflector: &R,
    separation: f64,
    tol: f64,
) -> Result<f64, LifshitzError> {
    check_separation(separation)?;
    check_tol(tol)?;
    let two_a = 2.0 * separation;
    let failure: RefCell<Option<LifshitzError>> = RefCell::new(None);
    let outer = |zeta: f64| -> f64 {
        if failure.borrow().is_some() {
            return 0.0;
        }
        let xi = zeta * SPEED_OF_LIGHT / two_a;
        let result = reflector
            .response(xi)
            .and_then(|resp| {
                term_integral(&resp, zeta, two_a, 0.1 * tol).map_err(|source| LifshitzError::NumericFailure {
                    index: 0,
                    separation,
                    source,
                })
            });
        match result {
            Ok(v) => v,
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                0.0
            }
        }
    };
    let est = quadrature::integrate_to_infinity(outer, 0.0, Tolerance::relative(tol).with_abs(1e-300));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let est = est.map_err(|source| LifshitzError::NumericFailure {
        index: 0,
        separation,
        source,
    })?;
    Ok(-HBAR * SPEED_OF_LIGHT / (32.0 * PI * PI * separation.powi(4)) * est.value)
}

/// `-π² ħ c / (240 a⁴)`, the ideal-metal pressure at T = 0.
pub fn ideal_metal_pressure(separation: f64) -> f64 {
    -PI * PI * HBAR * SPEED_OF_LIGHT / (240.0 * separation.powi(4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{DrudeParams, Extrapolation, OpticalTable};
    use crate::units::{ROOM_TEMPERATURE, ZETA_3};
    use approx::assert_relative_eq;

    #[test]
    fn matsubara_frequencies() {
        assert_eq!(matsubara_frequency(0, 300.0), 0.0);
        let xi1 = matsubara_frequency(1, ROOM_TEMPERATURE);
        // 2π k_B T / ħ with CODATA constants.
        assert_relative_eq!(xi1, 2.4116e14, max_relative = 1e-4);
        assert_relative_eq!(crate::units::rad_per_s_to_ev(xi1), 0.1587, max_relative = 1e-3);
        assert_eq!(matsubara_frequency(10, ROOM_TEMPERATURE), 10.0 * xi1);
        let s = MatsubaraSpectrum::new(ROOM_TEMPERATURE, 5).unwrap();
        assert_eq!(s.max_index(), 5);
        assert!(s.frequencies().windows(2).all(|w| w[1] > w[0]));
        assert!(MatsubaraSpectrum::new(0.0, 5).is_err());
    }

    #[test]
    fn zero_frequency_reflection() {
        let k = 1e7;
        let d = reflection_coefficients(&PermittivityModel::gold_drude(), 0.0, k).unwrap();
        assert_eq!((d.tm, d.te), (1.0, 0.0));
        let p = reflection_coefficients(&PermittivityModel::gold_plasma(), 0.0, k).unwrap();
        assert_eq!(p.tm, 1.0);
        let wp = DrudeParams::gold().plasma_frequency() / SPEED_OF_LIGHT;
        let s = (k * k + wp * wp).sqrt();
        assert_relative_eq!(p.te, (k - s) / (k + s), max_relative = 1e-12);
    }

    #[test]
    fn undeclared_zero_term_is_ambiguous() {
        let t = OpticalTable::new(vec![1.0, 2.0], vec![1.0, 1.0], Extrapolation::None).unwrap();
        let m = PermittivityModel::Table(t);
        assert_eq!(
            reflection_coefficients(&m, 0.0, 1e7).unwrap_err(),
            LifshitzError::AmbiguousZeroTerm
        );
        assert!(reflection_coefficients(&m, 1e14, 1e7).is_ok());
    }

    #[test]
    fn large_permittivity_approaches_ideal_metal() {
        let r = TermResponse::Dielectric { epsilon: 1e14 }.reflection(2.0, 1.0, 1.0);
        assert_relative_eq!(r.tm, 1.0, epsilon = 1e-6);
        assert_relative_eq!(r.te, -1.0, epsilon = 1e-6);
    }

    #[test]
    fn rationalized_reflection_matches_textbook_form() {
        for &(eps, y, yx) in &[(3.0, 2.0, 1.0), (1.0001, 5.0, 4.0), (2e4, 0.3, 0.1)] {
            let r = TermResponse::Dielectric { epsilon: eps }.reflection(y, yx, 1.0);
            let k = (y * y + (eps - 1.0) * yx * yx).sqrt();
            assert_relative_eq!(r.tm, (eps * y - k) / (eps * y + k), max_relative = 1e-9);
            assert_relative_eq!(r.te, (y - k) / (y + k), max_relative = 1e-7);
        }
    }

    #[test]
    fn reflection_bounded_by_one() {
        let m = PermittivityModel::gold_drude();
        for l in [1usize, 3, 30, 300] {
            let xi = matsubara_frequency(l, ROOM_TEMPERATURE);
            for k in [1e4, 1e6, 1e7, 1e8, 1e10] {
                let r = reflection_coefficients(&m, xi, k).unwrap();
                assert!(r.tm.abs() <= 1.0 && r.te.abs() <= 1.0);
            }
        }
    }

    #[test]
    fn drude_zero_term_closed_form() {
        let a = 1e-6;
        let m = PermittivityModel::gold_drude();
        let t0 = term_integral_by_y(&m, 0, a, ROOM_TEMPERATURE, 1e-12).unwrap();
        let p0 = pressure_prefactor(a, ROOM_TEMPERATURE) * 0.5 * t0;
        let expected = -K_BOLTZMANN * ROOM_TEMPERATURE * ZETA_3 / (8.0 * PI * a.powi(3));
        assert_relative_eq!(p0, expected, max_relative = 1e-10);
    }

    #[test]
    fn primed_sum_convention() {
        let m = PermittivityModel::gold_plasma();
        let a = 500e-9;
        let solver = LifshitzSolver::new(&m, ROOM_TEMPERATURE, 1e-9, a).unwrap().keep_terms(true);
        let res = solver.pressure(a).unwrap();
        let terms = res.terms.unwrap();
        let full0 = pressure_prefactor(a, ROOM_TEMPERATURE)
            * term_integral_by_y(&m, 0, a, ROOM_TEMPERATURE, 1e-10).unwrap();
        let full_sum: f64 = full0 + terms[1..].iter().sum::<f64>();
        assert_relative_eq!(full_sum - 0.5 * full0, res.pressure, max_relative = 1e-12);
        assert_relative_eq!(terms[0], 0.5 * full0, max_relative = 1e-12);
    }

    #[test]
    fn wavevector_route_agrees_with_y_route() {
        let m = PermittivityModel::gold_drude();
        let a = 700e-9;
        for l in [0usize, 1, 2, 7, 25] {
            let ty = term_integral_by_y(&m, l, a, ROOM_TEMPERATURE, 1e-11).unwrap();
            let tk = term_integral_by_wavevector(&m, l, a, ROOM_TEMPERATURE, 1e-11).unwrap();
            assert_relative_eq!(ty, tk, max_relative = 1e-9);
        }
    }

    #[test]
    fn argument_validation() {
        let m = PermittivityModel::gold_drude();
        assert!(casimir_pressure(&m, 10e-9, 300.0, 1e-8).is_err());
        assert!(casimir_pressure(&m, 1e-6, -1.0, 1e-8).is_err());
        assert!(casimir_pressure(&m, 1e-6, 300.0, 1e-2).is_err());
        assert!(reflection_coefficients(&m, 1e14, 0.0).is_err());
    }

    #[test]
    fn parallel_and_serial_agree() {
        let m = PermittivityModel::gold_drude();
        let a = 300e-9;
        let s = LifshitzSolver::new(&m, ROOM_TEMPERATURE, 1e-9, a).unwrap();
        let serial = s.pressure(a).unwrap();
        let s = s.with_summation(Summation::Parallel);
        let parallel = s.pressure(a).unwrap();
        assert_eq!(serial.pressure, parallel.pressure);
        assert_eq!(serial.max_index, parallel.max_index);
    }
}
