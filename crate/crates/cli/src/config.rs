//! Run configuration: a TOML file with one section per stage, overridden
//! by command-line flags.
//!
//! ```toml
//! [run]
//! seed = 1
//! out = "casimir-out"
//! model = "both"          # drude | plasma | both
//! tol = 1e-8
//!
//! [material]
//! plasma_energy_ev = 9.0
//! relaxation_energy_ev = 0.035
//! oscillators = "gold"
//!
//! [geometry]
//! radius_um = 43.466
//! roughness_sphere_nm = 1.13
//! roughness_plate_nm = 1.08
//! temperature_k = 293.15
//! # max_ratio = 0.022     # default: per set, 0.03 for set 4
//!
//! [theory]
//! a_min_nm = 250.0
//! a_max_nm = 950.0
//! step_nm = 1.0
//!
//! [campaign]
//! sets = [1, 2, 3]
//! truth = "plasma"
//! # repetitions = 1
//! # noise_rad_per_s = 0.055
//!
//! [analysis]
//! grid_step_nm = 1.0
//!
//! [compare]
//! window_nm = 100.0
//! exclusion_percent = 33
//! optical_fraction = 0.005
//! separation_error_nm = 0.5
//! # windows_nm = [[250.0, 350.0], [350.0, 450.0]]
//!
//! [beta]
//! knots = []              # [[a_nm, beta], ...]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use casimir_core::force::{BetaTable, Geometry};
use casimir_core::optics::{MaterialConfig, Response};
use casimir_core::units::{NM, ROOM_TEMPERATURE, UM};
use casimir_core::vexp::measurement_geometry;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Drude,
    Plasma,
    Both,
}

impl ModelChoice {
    pub fn responses(self) -> Vec<Response> {
        match self {
            ModelChoice::Drude => vec![Response::Drude],
            ModelChoice::Plasma => vec![Response::Plasma],
            ModelChoice::Both => vec![Response::Drude, Response::Plasma],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelChoice::Drude => "drude",
            ModelChoice::Plasma => "plasma",
            ModelChoice::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub out: PathBuf,
    pub model: ModelChoice,
    pub tol: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("casimir-out"),
            model: ModelChoice::Both,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub radius_um: f64,
    pub roughness_sphere_nm: f64,
    pub roughness_plate_nm: f64,
    pub temperature_k: f64,
    pub max_ratio: Option<f64>,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let g = Geometry::experiment();
        Self {
            radius_um: g.radius / UM,
            roughness_sphere_nm: g.roughness_sphere / NM,
            roughness_plate_nm: g.roughness_plate / NM,
            temperature_k: ROOM_TEMPERATURE,
            max_ratio: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheorySection {
    pub a_min_nm: f64,
    pub a_max_nm: f64,
    pub step_nm: f64,
}

impl Default for TheorySection {
    fn default() -> Self {
        Self {
            a_min_nm: 250.0,
            a_max_nm: 950.0,
            step_nm: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSection {
    pub sets: Vec<u32>,
    pub truth: Response,
    pub repetitions: Option<usize>,
    pub noise_rad_per_s: Option<f64>,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            sets: vec![1],
            truth: Response::Plasma,
            repetitions: None,
            noise_rad_per_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub grid_step_nm: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { grid_step_nm: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub window_nm: f64,
    pub exclusion_percent: u32,
    pub optical_fraction: f64,
    pub separation_error_nm: f64,
    pub windows_nm: Option<Vec<[f64; 2]>>,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            window_nm: 100.0,
            exclusion_percent: 33,
            optical_fraction: 0.005,
            separation_error_nm: 0.5,
            windows_nm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaSection {
    /// `[a_nm, beta]` pairs.
    pub knots: Vec<[f64; 2]>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub material: MaterialConfig,
    pub geometry: GeometrySection,
    pub theory: TheorySection,
    pub campaign: CampaignSection,
    pub analysis: AnalysisSection,
    pub compare: CompareSection,
    pub beta: BetaSection,
}

/// A configuration problem, pointing at the offending field and, when the
/// config came from a file, its line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}, `{}`: {}", self.field, self.message),
            None => write!(f, "config `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Line of `section.key` in a TOML text, if it is written out there.
fn locate(text: &str, field: &str) -> Option<usize> {
    let (section, key) = field.split_once('.')?;
    let mut inside = false;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            inside = t.trim_start_matches('[').trim_end_matches(']').trim() == section;
            continue;
        }
        if inside && t.split('=').next().map(str::trim) == Some(key) {
            return Some(i + 1);
        }
    }
    None
}

impl RunConfig {
    /// Parses and validates a config text.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            ConfigError {
                field: "toml".into(),
                line,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate().map_err(|mut e| {
            e.line = locate(text, &e.field);
            e
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            field: "file".into(),
            line: None,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field: &str, message: String| {
            Err(ConfigError {
                field: field.into(),
                line: None,
                message,
            })
        };
        let positive = |field: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                err(field, format!("must be a positive number, got {x}"))
            }
        };
        if !(self.run.tol > 0.0 && self.run.tol < 1e-2) {
            return err("run.tol", format!("{} outside (0, 0.01)", self.run.tol));
        }
        positive("geometry.radius_um", self.geometry.radius_um)?;
        positive("geometry.temperature_k", self.geometry.temperature_k)?;
        for (field, v) in [
            ("geometry.roughness_sphere_nm", self.geometry.roughness_sphere_nm),
            ("geometry.roughness_plate_nm", self.geometry.roughness_plate_nm),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return err(field, format!("must be non-negative, got {v}"));
            }
        }
        if let Some(r) = self.geometry.max_ratio {
            positive("geometry.max_ratio", r)?;
        }
        positive("theory.a_min_nm", self.theory.a_min_nm)?;
        positive("theory.step_nm", self.theory.step_nm)?;
        if !(self.theory.a_max_nm >= self.theory.a_min_nm) {
            return err(
                "theory.a_max_nm",
                format!("{} is below a_min_nm = {}", self.theory.a_max_nm, self.theory.a_min_nm),
            );
        }
        let span = (self.theory.a_max_nm - self.theory.a_min_nm) / self.theory.step_nm;
        if (span - span.round()).abs() > 1e-9 * span.max(1.0) {
            return err("theory.step_nm", "must divide a_max_nm - a_min_nm".into());
        }
        if self.campaign.sets.is_empty() {
            return err("campaign.sets", "no sets selected".into());
        }
        if let Some(&bad) = self.campaign.sets.iter().find(|s| !(1..=4).contains(*s)) {
            return err("campaign.sets", format!("unknown set {bad} (expected 1 to 4)"));
        }
        let mut sorted = self.campaign.sets.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.campaign.sets.len() {
            return err("campaign.sets", "sets are listed twice".into());
        }
        if self.campaign.repetitions == Some(0) {
            return err("campaign.repetitions", "must be at least 1".into());
        }
        if let Some(n) = self.campaign.noise_rad_per_s {
            if !(n.is_finite() && n >= 0.0) {
                return err("campaign.noise_rad_per_s", format!("must be non-negative, got {n}"));
            }
        }
        positive("analysis.grid_step_nm", self.analysis.grid_step_nm)?;
        positive("compare.window_nm", self.compare.window_nm)?;
        if self.compare.exclusion_percent > 100 {
            return err("compare.exclusion_percent", "must be at most 100".into());
        }
        if !(self.compare.optical_fraction.is_finite() && self.compare.optical_fraction >= 0.0) {
            return err("compare.optical_fraction", "must be non-negative".into());
        }
        if !(self.compare.separation_error_nm.is_finite() && self.compare.separation_error_nm >= 0.0) {
            return err("compare.separation_error_nm", "must be non-negative".into());
        }
        if let Some(w) = &self.compare.windows_nm {
            if w.iter().any(|[lo, hi]| !(hi > lo)) {
                return err("compare.windows_nm", "every window needs lo < hi".into());
            }
        }
        self.beta_table().map_err(|e| ConfigError {
            field: "beta.knots".into(),
            line: None,
            message: e.to_string(),
        })?;
        Ok(())
    }

    /// Geometry for one campaign set, or for the theory sweep (`None`).
    pub fn geometry(&self, set: Option<u32>) -> Geometry {
        let default_ratio = match set {
            Some(s) => measurement_geometry(s).max_ratio,
            None => self
                .campaign
                .sets
                .iter()
                .map(|&s| measurement_geometry(s).max_ratio)
                .fold(0.0, f64::max),
        };
        Geometry {
            radius: self.geometry.radius_um * UM,
            roughness_sphere: self.geometry.roughness_sphere_nm * NM,
            roughness_plate: self.geometry.roughness_plate_nm * NM,
            temperature: self.geometry.temperature_k,
            max_ratio: self.geometry.max_ratio.unwrap_or(default_ratio),
        }
    }

    pub fn beta_table(&self) -> Result<BetaTable, casimir_core::force::ForceError> {
        if self.beta.knots.is_empty() {
            return Ok(BetaTable::zero());
        }
        let knots: Vec<(f64, f64)> = self.beta.knots.iter().map(|[a, b]| (a * NM, *b)).collect();
        let source = if self.beta.source.is_empty() { "config" } else { &self.beta.source };
        BetaTable::new(&knots, source)
    }

    /// Theory separations in m, built from integer steps.
    pub fn theory_grid(&self) -> Vec<f64> {
        let t = &self.theory;
        let n = ((t.a_max_nm - t.a_min_nm) / t.step_nm).round() as usize;
        (0..=n).map(|k| (t.a_min_nm + k as f64 * t.step_nm) * NM).collect()
    }

    /// The resolved config as flat `config.section.key = value` pairs.
    pub fn manifest_entries(&self) -> Vec<(String, String)> {
        let value = toml::Value::try_from(self).expect("config is always representable as TOML");
        let mut out = Vec::new();
        if let toml::Value::Table(sections) = value {
            for (section, body) in sections {
                if let toml::Value::Table(fields) = body {
                    for (k, v) in fields {
                        out.push((format!("config.{section}.{k}"), v.to_string()));
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_the_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.theory_grid().len(), 701);
    }

    #[test]
    fn syntax_errors_report_the_line() {
        let e = RunConfig::parse("[run]\nseed = 1\ntol = =\n").unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = RunConfig::parse("[geometry]\nradius = 40\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.message.contains("radius"), "{}", e.message);
    }

    #[test]
    fn range_errors_name_field_and_line() {
        let text = "[run]\nseed = 3\n\n[theory]\na_min_nm = 900\na_max_nm = 300\n";
        let e = RunConfig::parse(text).unwrap_err();
        assert_eq!(e.field, "theory.a_max_nm");
        assert_eq!(e.line, Some(6));
        let e = RunConfig::parse("[campaign]\nsets = [1, 5]\n").unwrap_err();
        assert_eq!((e.field.as_str(), e.line), ("campaign.sets", Some(2)));
    }

    #[test]
    fn set4_relaxes_the_ratio_limit() {
        let cfg = RunConfig::parse("[campaign]\nsets = [4]\n").unwrap();
        assert_eq!(cfg.geometry(Some(4)).max_ratio, 0.03);
        assert_eq!(cfg.geometry(None).max_ratio, 0.03);
        let cfg = RunConfig::parse("[geometry]\nmax_ratio = 0.025\n").unwrap();
        assert_eq!(cfg.geometry(Some(1)).max_ratio, 0.025);
    }

    #[test]
    fn manifest_entries_reparse_to_the_same_config() {
        let cfg = RunConfig::parse("[campaign]\nsets = [1, 2]\n[beta]\nknots = [[300.0, 0.1], [600.0, 0.2]]\n").unwrap();
        let mut text = String::new();
        let mut current = String::new();
        for (k, v) in cfg.manifest_entries() {
            let rest = k.strip_prefix("config.").unwrap();
            let (section, key) = rest.split_once('.').unwrap();
            if section != current {
                text.push_str(&format!("[{section}]\n"));
                current = section.to_string();
            }
            text.push_str(&format!("{key} = {v}\n"));
        }
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }
}
