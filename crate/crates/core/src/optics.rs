//! Dielectric permittivity along the imaginary frequency axis.
//!
//! Every model here is evaluated at `ε(iξ)`, which is real and ≥ 1 for
//! ξ > 0. Energies are given in eV, frequencies in rad/s; see [`crate::units`].
//!
//! The conduction-electron part is either the dissipative Drude form
//! `1 + ωp² / (ξ (ξ + γ))` or the dissipationless plasma form `1 + ωp² / ξ²`.
//! Core electrons enter through a set of damped oscillators or through a
//! tabulated `Im ε(ω)` transformed with the dispersion relation
//! `ε(iξ) = 1 + (2/π) ∫ ω Im ε(ω) / (ω² + ξ²) dω`.

use std::f64::consts::FRAC_2_PI;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{self, Tolerance};
use crate::units::{ev_to_rad_per_s, rad_per_s_to_ev};

/// Relative tolerance of the dispersion-integral quadrature.
pub const DISPERSION_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("permittivity diverges at zero frequency for the {0} response")]
    DivergentAtZero(&'static str),
    #[error("frequency must be finite and non-negative, got {0:e} rad/s")]
    InvalidFrequency(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("optical table, line {line}: {message}")]
    TableParse { line: usize, message: String },
    #[error("material config: {0}")]
    Config(String),
    #[error("dispersion integral failed: {0}")]
    Quadrature(#[from] quadrature::QuadratureError),
}

/// Conduction-electron parameters: `ħωp` and `ħ/τ`, both in eV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrudeParams {
    plasma_energy: f64,
    relaxation_energy: f64,
}

impl DrudeParams {
    pub fn new(plasma_energy: f64, relaxation_energy: f64) -> Result<Self, OpticsError> {
        if !(plasma_energy.is_finite() && plasma_energy > 0.0) {
            return Err(OpticsError::InvalidModel(format!(
                "plasma energy must be positive, got {plasma_energy}"
            )));
        }
        if !(relaxation_energy.is_finite() && relaxation_energy >= 0.0) {
            return Err(OpticsError::InvalidModel(format!(
                "relaxation energy must be non-negative, got {relaxation_energy}"
            )));
        }
        Ok(Self {
            plasma_energy,
            relaxation_energy,
        })
    }

    /// Au: ħωp = 9.0 eV, ħ/τ = 35 meV.
    pub fn gold() -> Self {
        Self {
            plasma_energy: 9.0,
            relaxation_energy: 0.035,
        }
    }

    pub fn plasma_energy(&self) -> f64 {
        self.plasma_energy
    }

    pub fn relaxation_energy(&self) -> f64 {
        self.relaxation_energy
    }

    /// ωp in rad/s.
    pub fn plasma_frequency(&self) -> f64 {
        ev_to_rad_per_s(self.plasma_energy)
    }

    /// 1/τ in rad/s.
    pub fn relaxation_rate(&self) -> f64 {
        ev_to_rad_per_s(self.relaxation_energy)
    }

    fn drude_term(&self, xi: f64) -> f64 {
        let wp = self.plasma_frequency();
        // Dividing twice keeps ωp² / (ξ(ξ+γ)) finite for ξ down to ~1e-300.
        (wp / xi) * (wp / (xi + self.relaxation_rate()))
    }

    fn plasma_term(&self, xi: f64) -> f64 {
        let r = self.plasma_frequency() / xi;
        r * r
    }

    /// `Im ε_D(ω)` with ω in eV.
    fn drude_im_eps(&self, omega_ev: f64) -> f64 {
        let g = self.relaxation_energy;
        let wp2 = self.plasma_energy * self.plasma_energy;
        wp2 * g / (omega_ev * (omega_ev * omega_ev + g * g))
    }
}

/// One damped oscillator: `s ω_r² / (ω_r² + ξ² + g ξ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    pub strength: f64,
    pub resonance_energy: f64,
    pub width_energy: f64,
}

impl Oscillator {
    fn contribution(&self, xi: f64) -> f64 {
        let w = ev_to_rad_per_s(self.resonance_energy);
        let g = ev_to_rad_per_s(self.width_energy);
        self.strength * w * w / (w * w + xi * xi + g * xi)
    }
}

/// Interband (core-electron) response as a sum of oscillators.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OscillatorSet {
    oscillators: Vec<Oscillator>,
}

impl OscillatorSet {
    pub fn new(oscillators: Vec<Oscillator>) -> Result<Self, OpticsError> {
        for (i, o) in oscillators.iter().enumerate() {
            if !(o.resonance_energy.is_finite() && o.resonance_energy > 0.0) {
                return Err(OpticsError::InvalidModel(format!(
                    "oscillator {i}: resonance energy must be positive"
                )));
            }
            if !(o.strength.is_finite() && o.strength >= 0.0) {
                return Err(OpticsError::InvalidModel(format!(
                    "oscillator {i}: strength must be non-negative"
                )));
            }
            if !(o.width_energy.is_finite() && o.width_energy >= 0.0) {
                return Err(OpticsError::InvalidModel(format!(
                    "oscillator {i}: width must be non-negative"
                )));
            }
        }
        Ok(Self { oscillators })
    }

    /// Six-oscillator fit to the core-electron response of Au.
    ///
    /// The fit is usually quoted as `g_j / (ω_j² + ξ² + γ_j ξ)` with `g_j` in
    /// eV²; strengths below are `g_j / ω_j²`.
    pub fn gold_core() -> Self {
        const FIT: [(f64, f64, f64); 6] = [
            // (g [eV²], ω [eV], γ [eV])
            (7.091, 3.05, 0.75),
            (41.46, 4.15, 1.85),
            (2.7, 5.4, 1.0),
            (154.7, 8.5, 7.0),
            (44.55, 13.5, 6.0),
            (309.6, 21.5, 9.0),
        ];
        let oscillators = FIT
            .iter()
            .map(|&(g, w, width)| Oscillator {
                strength: g / (w * w),
                resonance_energy: w,
                width_energy: width,
            })
            .collect();
        Self { oscillators }
    }

    pub fn oscillators(&self) -> &[Oscillator] {
        &self.oscillators
    }

    pub fn is_empty(&self) -> bool {
        self.oscillators.is_empty()
    }

    /// Sum of all oscillator terms at ξ (rad/s).
    pub fn contribution(&self, xi: f64) -> f64 {
        self.oscillators.iter().map(|o| o.contribution(xi)).sum()
    }
}

/// How a tabulated response is continued below the first table energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extrapolation {
    /// Drude `Im ε` below the table.
    Drude(DrudeParams),
    /// Plasma-model free electrons plus the table with the Drude part removed.
    Plasma(DrudeParams),
    /// Table only. The zero-frequency reflection is then undefined.
    None,
}

/// Tabulated `Im ε(ω)` samples with a low-frequency continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalTable {
    energies: Vec<f64>,
    im_eps: Vec<f64>,
    extrapolation: Extrapolation,
}

impl OpticalTable {
    pub fn new(
        energies: Vec<f64>,
        im_eps: Vec<f64>,
        extrapolation: Extrapolation,
    ) -> Result<Self, OpticsError> {
        if energies.is_empty() {
            return Err(OpticsError::InvalidModel("optical table is empty".into()));
        }
        if energies.len() != im_eps.len() {
            return Err(OpticsError::InvalidModel(
                "optical table columns differ in length".into(),
            ));
        }
        if energies.len() < 2 {
            return Err(OpticsError::InvalidModel(
                "optical table needs at least two samples".into(),
            ));
        }
        if !(energies[0].is_finite() && energies[0] > 0.0) {
            return Err(OpticsError::InvalidModel(
                "photon energies must be positive".into(),
            ));
        }
        if energies.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(OpticsError::InvalidModel(
                "photon energies must be strictly increasing".into(),
            ));
        }
        if im_eps.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(OpticsError::InvalidModel(
                "Im ε must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            energies,
            im_eps,
            extrapolation,
        })
    }

    /// Parses two whitespace- or comma-separated columns `(eV, Im ε)`.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str, extrapolation: Extrapolation) -> Result<Self, OpticsError> {
        let mut energies = Vec::new();
        let mut im_eps = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty());
            let mut next = |name: &str| -> Result<f64, OpticsError> {
                let tok = cols.next().ok_or_else(|| OpticsError::TableParse {
                    line: idx + 1,
                    message: format!("missing {name} column"),
                })?;
                tok.parse::<f64>().map_err(|e| OpticsError::TableParse {
                    line: idx + 1,
                    message: format!("bad {name} value {tok:?}: {e}"),
                })
            };
            energies.push(next("energy")?);
            im_eps.push(next("Im ε")?);
        }
        Self::new(energies, im_eps, extrapolation)
    }

    pub fn load(path: &Path, extrapolation: Extrapolation) -> Result<Self, OpticsError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            OpticsError::InvalidModel(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::parse(&text, extrapolation)
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn im_eps(&self) -> &[f64] {
        &self.im_eps
    }

    pub fn extrapolation(&self) -> Extrapolation {
        self.extrapolation
    }

    /// `(2/π) ∫ ω f(ω) / (ω² + ξ²) dω` over the table span, with `f` the
    /// piecewise-linear interpolant of `values`; integrated in `ln ω`.
    fn dispersion_over_table(&self, xi_ev: f64, subtract_drude: Option<&DrudeParams>) -> Result<f64, OpticsError> {
        let xi2 = xi_ev * xi_ev;
        let mut total = crate::summation::NeumaierSum::new();
        for i in 0..self.energies.len() - 1 {
            let (e0, e1) = (self.energies[i], self.energies[i + 1]);
            let (m0, m1) = (self.im_eps[i], self.im_eps[i + 1]);
            let slope = (m1 - m0) / (e1 - e0);
            let integrand = |u: f64| {
                let w = u.exp();
                let mut im = m0 + slope * (w - e0);
                if let Some(d) = subtract_drude {
                    im -= d.drude_im_eps(w);
                }
                w * w * im / (w * w + xi2)
            };
            let est = quadrature::integrate(
                integrand,
                e0.ln(),
                e1.ln(),
                Tolerance::relative(DISPERSION_REL_TOL).with_abs(1e-300),
            )?;
            total.add(est.value);
        }
        Ok(FRAC_2_PI * total.value())
    }

    fn eval(&self, xi: f64) -> Result<f64, OpticsError> {
        let xi_ev = rad_per_s_to_ev(xi);
        match self.extrapolation {
            Extrapolation::None => Ok(1.0 + self.dispersion_over_table(xi_ev, None)?),
            Extrapolation::Drude(p) => {
                if xi == 0.0 {
                    return Err(OpticsError::DivergentAtZero("drude"));
                }
                let low = if p.relaxation_energy == 0.0 {
                    p.plasma_term(xi)
                } else {
                    drude_dispersion_below(&p, self.energies[0], xi_ev)?
                };
                Ok(1.0 + low + self.dispersion_over_table(xi_ev, None)?)
            }
            Extrapolation::Plasma(p) => {
                if xi == 0.0 {
                    return Err(OpticsError::DivergentAtZero("plasma"));
                }
                let core = if p.relaxation_energy == 0.0 {
                    self.dispersion_over_table(xi_ev, None)?
                } else {
                    self.dispersion_over_table(xi_ev, Some(&p))?
                };
                Ok(1.0 + p.plasma_term(xi) + core)
            }
        }
    }
}

/// `(2/π) ∫_0^W ω Im ε_D(ω) / (ω² + ξ²) dω` for energies in eV.
fn drude_dispersion_below(p: &DrudeParams, cutoff: f64, xi: f64) -> Result<f64, OpticsError> {
    let g = p.relaxation_energy;
    let wp2 = p.plasma_energy * p.plasma_energy;
    // Partial fractions lose digits when ξ ≈ γ; integrate directly there.
    if ((xi - g) / g).abs() > 1e-3 {
        let a = (cutoff / g).atan() / g;
        let b = (cutoff / xi).atan() / xi;
        Ok(FRAC_2_PI * wp2 * g * (a - b) / (xi * xi - g * g))
    } else {
        let f = |w: f64| 1.0 / ((w * w + g * g) * (w * w + xi * xi));
        let est = quadrature::integrate(f, 0.0, cutoff, Tolerance::relative(DISPERSION_REL_TOL))?;
        Ok(FRAC_2_PI * wp2 * g * est.value)
    }
}

/// Low-frequency character of a model, which fixes the zero-frequency
/// Matsubara term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroFrequency {
    /// Drude-like: `ξ ε(iξ)` stays finite as ξ → 0.
    Drude,
    /// Plasma-like, with ωp in rad/s.
    Plasma { plasma_frequency: f64 },
    /// No declared continuation.
    Undeclared,
}

/// Free-electron part of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Response {
    Drude,
    Plasma,
}

impl Response {
    pub fn label(self) -> &'static str {
        match self {
            Response::Drude => "drude",
            Response::Plasma => "plasma",
        }
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Permittivity at imaginary frequencies.
#[derive(Debug, Clone, PartialEq)]
pub enum PermittivityModel {
    Drude(DrudeParams),
    Plasma(DrudeParams),
    DrudeOscillators(DrudeParams, OscillatorSet),
    PlasmaOscillators(DrudeParams, OscillatorSet),
    Table(OpticalTable),
}

impl PermittivityModel {
    /// Au, Drude free electrons plus the six-oscillator core response.
    pub fn gold_drude() -> Self {
        Self::DrudeOscillators(DrudeParams::gold(), OscillatorSet::gold_core())
    }

    /// Au, plasma free electrons plus the six-oscillator core response.
    pub fn gold_plasma() -> Self {
        Self::PlasmaOscillators(DrudeParams::gold(), OscillatorSet::gold_core())
    }

    pub fn gold(response: Response) -> Self {
        match response {
            Response::Drude => Self::gold_drude(),
            Response::Plasma => Self::gold_plasma(),
        }
    }

    /// ε(iξ) at ξ in rad/s.
    pub fn eval(&self, xi: f64) -> Result<f64, OpticsError> {
        if !(xi.is_finite() && xi >= 0.0) {
            return Err(OpticsError::InvalidFrequency(xi));
        }
        match self {
            Self::Drude(p) => {
                if xi == 0.0 {
                    return Err(OpticsError::DivergentAtZero("drude"));
                }
                Ok(1.0 + p.drude_term(xi))
            }
            Self::Plasma(p) => {
                if xi == 0.0 {
                    return Err(OpticsError::DivergentAtZero("plasma"));
                }
                Ok(1.0 + p.plasma_term(xi))
            }
            Self::DrudeOscillators(p, osc) => {
                if xi == 0.0 {
                    return Err(OpticsError::DivergentAtZero("drude"));
                }
                Ok(1.0 + p.drude_term(xi) + osc.contribution(xi))
            }
            Self::PlasmaOscillators(p, osc) => {
                if xi == 0.0 {
                    return Err(OpticsError::DivergentAtZero("plasma"));
                }
                Ok(1.0 + p.plasma_term(xi) + osc.contribution(xi))
            }
            Self::Table(t) => t.eval(xi),
        }
    }

    /// `lim_{ξ→0} ξ ε(iξ)` for Drude-like models, `ωp² τ` in rad/s.
    pub fn limiting_xi_epsilon(&self) -> Option<f64> {
        let p = match self {
            Self::Drude(p) | Self::DrudeOscillators(p, _) => p,
            Self::Table(t) => match t.extrapolation {
                Extrapolation::Drude(ref p) => p,
                _ => return None,
            },
            _ => return None,
        };
        if p.relaxation_energy == 0.0 {
            return None;
        }
        let wp = p.plasma_frequency();
        Some(wp * wp / p.relaxation_rate())
    }

    pub fn zero_frequency(&self) -> ZeroFrequency {
        let plasma = |p: &DrudeParams| ZeroFrequency::Plasma {
            plasma_frequency: p.plasma_frequency(),
        };
        match self {
            // A vanishing relaxation rate is the plasma model.
            Self::Drude(p) | Self::DrudeOscillators(p, _) if p.relaxation_energy == 0.0 => plasma(p),
            Self::Drude(_) | Self::DrudeOscillators(..) => ZeroFrequency::Drude,
            Self::Plasma(p) | Self::PlasmaOscillators(p, _) => plasma(p),
            Self::Table(t) => match t.extrapolation {
                Extrapolation::Drude(p) if p.relaxation_energy == 0.0 => plasma(&p),
                Extrapolation::Drude(_) => ZeroFrequency::Drude,
                Extrapolation::Plasma(p) => plasma(&p),
                Extrapolation::None => ZeroFrequency::Undeclared,
            },
        }
    }

    /// Short tag used in file headers.
    pub fn tag(&self) -> &'static str {
        match self.zero_frequency() {
            ZeroFrequency::Drude => "drude",
            ZeroFrequency::Plasma { .. } => "plasma",
            ZeroFrequency::Undeclared => "table",
        }
    }
}

/// Oscillator choice in a material config: a named preset or explicit
/// `[strength, resonance_eV, width_eV]` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OscillatorSpec {
    Preset(String),
    Explicit(Vec<[f64; 3]>),
}

impl Default for OscillatorSpec {
    fn default() -> Self {
        OscillatorSpec::Preset("gold".into())
    }
}

/// Material definition as read from a key-value config file.
///
/// ```text
/// plasma_energy_ev = 9.0
/// relaxation_energy_ev = 0.035
/// oscillators = "gold"        # or "none", or [[s, ω_eV, γ_eV], ...]
/// # table = "au_im_eps.txt"   # optional (eV, Im ε) table; replaces oscillators
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(default = "default_plasma_energy")]
    pub plasma_energy_ev: f64,
    #[serde(default = "default_relaxation_energy")]
    pub relaxation_energy_ev: f64,
    #[serde(default)]
    pub oscillators: OscillatorSpec,
    #[serde(default)]
    pub table: Option<PathBuf>,
}

fn default_plasma_energy() -> f64 {
    9.0
}

fn default_relaxation_energy() -> f64 {
    0.035
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            plasma_energy_ev: default_plasma_energy(),
            relaxation_energy_ev: default_relaxation_energy(),
            oscillators: OscillatorSpec::default(),
            table: None,
        }
    }
}

impl MaterialConfig {
    pub fn parse(text: &str) -> Result<Self, OpticsError> {
        toml::from_str(text).map_err(|e| OpticsError::Config(e.to_string()))
    }

    /// Builds the model for one free-electron response. Relative table
    /// paths resolve against `base_dir`.
    pub fn build(&self, response: Response, base_dir: &Path) -> Result<PermittivityModel, OpticsError> {
        let params = DrudeParams::new(self.plasma_energy_ev, self.relaxation_energy_ev)?;
        if let Some(table) = &self.table {
            let path = if table.is_absolute() {
                table.clone()
            } else {
                base_dir.join(table)
            };
            let extrapolation = match response {
                Response::Drude => Extrapolation::Drude(params),
                Response::Plasma => Extrapolation::Plasma(params),
            };
            return Ok(PermittivityModel::Table(OpticalTable::load(&path, extrapolation)?));
        }
        let oscillators = match &self.oscillators {
            OscillatorSpec::Preset(name) => match name.as_str() {
                "gold" | "au" => OscillatorSet::gold_core(),
                "none" => OscillatorSet::default(),
                other => {
                    return Err(OpticsError::Config(format!(
                        "unknown oscillator preset {other:?} (expected \"gold\" or \"none\")"
                    )))
                }
            },
            OscillatorSpec::Explicit(list) => OscillatorSet::new(
                list.iter()
                    .map(|&[strength, resonance_energy, width_energy]| Oscillator {
                        strength,
                        resonance_energy,
                        width_energy,
                    })
                    .collect(),
            )?,
        };
        Ok(match (response, oscillators.is_empty()) {
            (Response::Drude, true) => PermittivityModel::Drude(params),
            (Response::Plasma, true) => PermittivityModel::Plasma(params),
            (Response::Drude, false) => PermittivityModel::DrudeOscillators(params, oscillators),
            (Response::Plasma, false) => PermittivityModel::PlasmaOscillators(params, oscillators),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ev(x: f64) -> f64 {
        ev_to_rad_per_s(x)
    }

    #[test]
    fn plasma_at_plasma_frequency_is_two() {
        let m = PermittivityModel::Plasma(DrudeParams::gold());
        assert_relative_eq!(m.eval(ev(9.0)).unwrap(), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn drude_at_relaxation_energy() {
        // 1 + 81 / (0.035 · 0.070)
        let m = PermittivityModel::Drude(DrudeParams::gold());
        let expected = 1.0 + 81.0 / (0.035 * 0.070);
        assert_relative_eq!(m.eval(ev(0.035)).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 3.306e4, max_relative = 1e-3);
    }

    #[test]
    fn high_frequency_transparency() {
        for m in [
            PermittivityModel::gold_drude(),
            PermittivityModel::gold_plasma(),
            PermittivityModel::Drude(DrudeParams::gold()),
        ] {
            let e1 = m.eval(ev(1e4)).unwrap() - 1.0;
            let e2 = m.eval(ev(1e5)).unwrap() - 1.0;
            assert!(e1 > 0.0 && e1 < 1e-5);
            // ε - 1 falls as 1/ξ² at large ξ.
            assert_relative_eq!(e1 / e2, 100.0, max_relative = 1e-3);
        }
    }

    #[test]
    fn zero_frequency_is_signalled_not_infinite() {
        for m in [
            PermittivityModel::gold_drude(),
            PermittivityModel::gold_plasma(),
            PermittivityModel::Plasma(DrudeParams::gold()),
        ] {
            assert!(matches!(m.eval(0.0), Err(OpticsError::DivergentAtZero(_))));
        }
        assert!(matches!(
            PermittivityModel::gold_drude().eval(-1.0),
            Err(OpticsError::InvalidFrequency(_))
        ));
    }

    #[test]
    fn drude_limiting_product() {
        let m = PermittivityModel::Drude(DrudeParams::gold());
        let lim = m.limiting_xi_epsilon().unwrap();
        let xi = 1e3;
        assert_relative_eq!(xi * m.eval(xi).unwrap(), lim, max_relative = 1e-9);
        assert!(PermittivityModel::gold_plasma().limiting_xi_epsilon().is_none());
    }

    #[test]
    fn plasma_identity() {
        let p = DrudeParams::gold();
        let m = PermittivityModel::Plasma(p);
        for xi in [1e12, 3.7e14, 2e16, 9e17] {
            let eps = m.eval(xi).unwrap();
            let lhs = xi * xi * (eps - 1.0);
            let wp = p.plasma_frequency();
            // Rounding of ε is amplified by ε / (ε - 1) after subtracting 1.
            let rounding = 8.0 * f64::EPSILON * eps / (eps - 1.0);
            assert_relative_eq!(lhs, wp * wp, max_relative = rounding);
        }
    }

    #[test]
    fn zero_relaxation_is_plasma() {
        let p = DrudeParams::new(9.0, 0.0).unwrap();
        let d = PermittivityModel::Drude(p);
        let pl = PermittivityModel::Plasma(p);
        assert_eq!(d.eval(1e15).unwrap(), pl.eval(1e15).unwrap());
        assert!(matches!(d.zero_frequency(), ZeroFrequency::Plasma { .. }));
    }

    #[test]
    fn parameter_validation() {
        assert!(DrudeParams::new(0.0, 0.1).is_err());
        assert!(DrudeParams::new(9.0, -0.1).is_err());
        assert!(OscillatorSet::new(vec![Oscillator {
            strength: 1.0,
            resonance_energy: 0.0,
            width_energy: 0.1
        }])
        .is_err());
        assert!(OscillatorSet::new(vec![Oscillator {
            strength: -1.0,
            resonance_energy: 1.0,
            width_energy: 0.1
        }])
        .is_err());
    }

    #[test]
    fn table_validation_and_parsing() {
        assert!(OpticalTable::new(vec![], vec![], Extrapolation::None).is_err());
        assert!(OpticalTable::new(vec![1.0, 1.0], vec![0.1, 0.1], Extrapolation::None).is_err());
        assert!(OpticalTable::new(vec![1.0, 2.0], vec![0.1, -0.1], Extrapolation::None).is_err());
        let t = OpticalTable::parse("# eV  Im eps\n1.0 2.0\n\n2.0, 3.0\n", Extrapolation::None).unwrap();
        assert_eq!(t.energies(), &[1.0, 2.0]);
        assert_eq!(t.im_eps(), &[2.0, 3.0]);
        let err = OpticalTable::parse("1.0 x\n", Extrapolation::None).unwrap_err();
        assert!(matches!(err, OpticsError::TableParse { line: 1, .. }));
        let err = OpticalTable::parse("# nothing\n", Extrapolation::None).unwrap_err();
        assert!(matches!(err, OpticsError::InvalidModel(_)));
    }

    #[test]
    fn table_of_constant_segment_matches_closed_form() {
        // Im ε = c on [e0, e1]: (2/π) c · ½ ln((e1² + ξ²) / (e0² + ξ²)).
        let t = OpticalTable::new(vec![1.0, 4.0], vec![2.5, 2.5], Extrapolation::None).unwrap();
        let xi_ev = 1.7;
        let got = t.eval(ev(xi_ev)).unwrap() - 1.0;
        let expected = FRAC_2_PI * 2.5 * 0.5 * ((16.0 + xi_ev * xi_ev) / (1.0 + xi_ev * xi_ev)).ln();
        assert_relative_eq!(got, expected, max_relative = 1e-10);
    }

    #[test]
    fn undeclared_table_zero_frequency() {
        let t = OpticalTable::new(vec![1.0, 4.0], vec![2.5, 2.5], Extrapolation::None).unwrap();
        let m = PermittivityModel::Table(t);
        assert_eq!(m.zero_frequency(), ZeroFrequency::Undeclared);
        assert!(m.eval(0.0).unwrap().is_finite());
    }

    #[test]
    fn material_config_builds_both_responses() {
        let cfg = MaterialConfig::parse("plasma_energy_ev = 9.0\nrelaxation_energy_ev = 0.035\n").unwrap();
        let d = cfg.build(Response::Drude, Path::new(".")).unwrap();
        let p = cfg.build(Response::Plasma, Path::new(".")).unwrap();
        assert_eq!(d, PermittivityModel::gold_drude());
        assert_eq!(p, PermittivityModel::gold_plasma());

        let cfg = MaterialConfig::parse("oscillators = \"none\"").unwrap();
        assert_eq!(
            cfg.build(Response::Drude, Path::new(".")).unwrap(),
            PermittivityModel::Drude(DrudeParams::gold())
        );
        let cfg = MaterialConfig::parse("oscillators = [[1.0, 3.0, 0.5]]").unwrap();
        match cfg.build(Response::Plasma, Path::new(".")).unwrap() {
            PermittivityModel::PlasmaOscillators(_, o) => assert_eq!(o.oscillators().len(), 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(MaterialConfig::parse("plasma = 1").is_err());
        assert!(MaterialConfig::parse("oscillators = \"silver\"")
            .unwrap()
            .build(Response::Drude, Path::new("."))
            .is_err());
    }
}
