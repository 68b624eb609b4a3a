//! Sphere-plate force gradient from the plate-plate pressure.
//!
//! `F'(a) = -2πR [1 + β(a,R) a/R] [1 + 10 (δs² + δp²)/a²] P(a)`.
//!
//! With `P < 0` for attraction, `F'` comes out positive, which is the
//! quantity plotted against separation; [`GradientResult::gradient`] keeps
//! that sign.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::lifshitz::{LifshitzError, LifshitzSolver, Reflector};
use crate::units::{NM, ROOM_TEMPERATURE, UM};

pub const MIN_GRADIENT_SEPARATION: f64 = 250e-9;
pub const MAX_GRADIENT_SEPARATION: f64 = 2e-6;
/// Largest `a/R` for which PFA plus the first-order β correction is used.
pub const DEFAULT_MAX_RATIO: f64 = 0.022;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForceError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("separation {separation:e} m is outside the force-model domain: {reason}")]
    OutsideDomain { separation: f64, reason: String },
    #[error("invalid β table: {0}")]
    InvalidBeta(String),
    #[error("separation grid must be strictly increasing")]
    UnsortedGrid,
    #[error(transparent)]
    Lifshitz(#[from] LifshitzError),
}

/// Sphere radius, rms roughness of both surfaces, and temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub radius: f64,
    pub roughness_sphere: f64,
    pub roughness_plate: f64,
    pub temperature: f64,
    pub max_ratio: f64,
}

impl Geometry {
    pub fn new(radius: f64, roughness_sphere: f64, roughness_plate: f64, temperature: f64) -> Result<Self, ForceError> {
        let g = Self {
            radius,
            roughness_sphere,
            roughness_plate,
            temperature,
            max_ratio: DEFAULT_MAX_RATIO,
        };
        g.validate()?;
        Ok(g)
    }

    /// R = 43.466 μm, δs = 1.13 nm, δp = 1.08 nm, T = 20 °C.
    pub fn experiment() -> Self {
        Self {
            radius: 43.466 * UM,
            roughness_sphere: 1.13 * NM,
            roughness_plate: 1.08 * NM,
            temperature: ROOM_TEMPERATURE,
            max_ratio: DEFAULT_MAX_RATIO,
        }
    }

    /// Overrides the `a/R` validity limit.
    pub fn with_max_ratio(mut self, max_ratio: f64) -> Self {
        self.max_ratio = max_ratio;
        self
    }

    pub fn validate(&self) -> Result<(), ForceError> {
        let bad = |m: &str| Err(ForceError::InvalidGeometry(m.to_string()));
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return bad("sphere radius must be positive");
        }
        if !(self.roughness_sphere.is_finite() && self.roughness_sphere >= 0.0)
            || !(self.roughness_plate.is_finite() && self.roughness_plate >= 0.0)
        {
            return bad("roughness must be non-negative");
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        if !(self.max_ratio.is_finite() && self.max_ratio > 0.0) {
            return bad("a/R limit must be positive");
        }
        Ok(())
    }

    /// `1 + 10 (δs² + δp²) / a²`.
    pub fn roughness_factor(&self, separation: f64) -> f64 {
        let d2 = self.roughness_sphere.powi(2) + self.roughness_plate.powi(2);
        1.0 + 10.0 * d2 / (separation * separation)
    }

    pub fn check_domain(&self, separation: f64) -> Result<(), ForceError> {
        let outside = |reason: String| {
            Err(ForceError::OutsideDomain {
                separation,
                reason,
            })
        };
        if !(MIN_GRADIENT_SEPARATION..=MAX_GRADIENT_SEPARATION).contains(&separation) {
            return outside("separation must lie in [250 nm, 2 μm]".into());
        }
        let ratio = separation / self.radius;
        if ratio >= self.max_ratio {
            return outside(format!("a/R = {ratio:.5} is not below {}", self.max_ratio));
        }
        let rough = self.roughness_sphere.max(self.roughness_plate);
        if rough > 0.1 * separation {
            return outside("roughness is not small against the separation".into());
        }
        Ok(())
    }
}

/// β(a) knots with monotone piecewise-cubic (Fritsch–Carlson) interpolation.
///
/// Evaluation outside the knot range clamps to the end value and flags the
/// result. The empty table is β ≡ 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BetaTable {
    separations: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    source: String,
}

impl BetaTable {
    /// β ≡ 0.
    pub fn zero() -> Self {
        Self {
            source: "zero".into(),
            ..Self::default()
        }
    }

    pub fn new(knots: &[(f64, f64)], source: impl Into<String>) -> Result<Self, ForceError> {
        if knots.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(ForceError::InvalidBeta("knots must be finite".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ForceError::InvalidBeta("knot separations must be strictly increasing".into()));
        }
        let separations: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let values: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let slopes = pchip_slopes(&separations, &values);
        Ok(Self {
            separations,
            values,
            slopes,
            source: source.into(),
        })
    }

    pub fn source(&self) -> &str {
        if self.source.is_empty() {
            "zero"
        } else {
            &self.source
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// β at `a`, and whether `a` was outside the knot range.
    pub fn eval(&self, separation: f64) -> (f64, bool) {
        let n = self.separations.len();
        match n {
            0 => (0.0, false),
            1 => (self.values[0], separation != self.separations[0]),
            _ => {
                if separation < self.separations[0] {
                    return (self.values[0], true);
                }
                if separation > self.separations[n - 1] {
                    return (self.values[n - 1], true);
                }
                let i = match self.separations.partition_point(|&x| x <= separation) {
                    0 => 0,
                    p => (p - 1).min(n - 2),
                };
                let (x0, x1) = (self.separations[i], self.separations[i + 1]);
                let h = x1 - x0;
                let t = (separation - x0) / h;
                let (t2, t3) = (t * t, t * t * t);
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + t;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                let v = h00 * self.values[i]
                    + h10 * h * self.slopes[i]
                    + h01 * self.values[i + 1]
                    + h11 * h * self.slopes[i + 1];
                (v, false)
            }
        }
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientResult {
    pub separation: f64,
    /// F'(a) in N/m, positive for attraction.
    pub gradient: f64,
    /// Plate-plate pressure P(a) in Pa.
    pub pressure: f64,
    /// Bound on the Matsubara tail, propagated to the gradient (N/m).
    pub truncation_error: f64,
    pub beta: f64,
    pub beta_extrapolated: bool,
    pub roughness_factor: f64,
}

impl GradientResult {
    /// |F'|, the plotted channel.
    pub fn magnitude(&self) -> f64 {
        self.gradient.abs()
    }
}

/// Force-gradient evaluator for one permittivity model and geometry,
/// sharing its Matsubara cache across separations.
pub struct GradientModel<'r, R: Reflector + ?Sized> {
    solver: LifshitzSolver<'r, R>,
    geometry: Geometry,
    beta: BetaTable,
}

impl<'r, R: Reflector + ?Sized> GradientModel<'r, R> {
    pub fn new(reflector: &'r R, geometry: Geometry, beta: BetaTable, tol: f64, max_separation: f64) -> Result<Self, ForceError> {
        geometry.validate()?;
        let solver = LifshitzSolver::new(reflector, geometry.temperature, tol, max_separation)?;
        Ok(Self {
            solver,
            geometry,
            beta,
        })
    }

    pub fn with_solver(solver: LifshitzSolver<'r, R>, geometry: Geometry, beta: BetaTable) -> Self {
        Self {
            solver,
            geometry,
            beta,
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn beta(&self) -> &BetaTable {
        &self.beta
    }

    pub fn solver(&self) -> &LifshitzSolver<'r, R> {
        &self.solver
    }

    pub fn gradient(&self, separation: f64) -> Result<GradientResult, ForceError> {
        self.geometry.check_domain(separation)?;
        let p = self.solver.pressure(separation)?;
        let r = self.geometry.radius;
        let (beta, beta_extrapolated) = self.beta.eval(separation);
        let pfa = 1.0 + beta * separation / r;
        let rough = self.geometry.roughness_factor(separation);
        let scale = -2.0 * PI * r * pfa * rough;
        Ok(GradientResult {
            separation,
            gradient: scale * p.pressure,
            pressure: p.pressure,
            truncation_error: (scale * p.truncation_error_estimate).abs(),
            beta,
            beta_extrapolated,
            roughness_factor: rough,
        })
    }

    /// Gradients on a strictly increasing grid, rows evaluated in parallel.
    pub fn sweep(&self, grid: &[f64]) -> Result<Vec<GradientResult>, ForceError> {
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ForceError::UnsortedGrid);
        }
        for &a in grid {
            self.geometry.check_domain(a)?;
        }
        grid.par_iter().map(|&a| self.gradient(a)).collect()
    }
}

/// F'(a) for a single separation.
pub fn force_gradient<R: Reflector + ?Sized>(
    reflector: &R,
    geometry: &Geometry,
    beta: &BetaTable,
    separation: f64,
    tol: f64,
) -> Result<GradientResult, ForceError> {
    geometry.check_domain(separation)?;
    GradientModel::new(reflector, *geometry, beta.clone(), tol, separation)?.gradient(separation)
}

/// F'(a) over a sorted grid with one shared Matsubara cache.
pub fn pressure_to_gradient_sweep<R: Reflector + ?Sized>(
    reflector: &R,
    geometry: &Geometry,
    beta: &BetaTable,
    grid: &[f64],
    tol: f64,
) -> Result<Vec<GradientResult>, ForceError> {
    let Some(&a_max) = grid.last() else {
        return Ok(Vec::new());
    };
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ForceError::UnsortedGrid);
    }
    geometry.check_domain(a_max)?;
    GradientModel::new(reflector, *geometry, beta.clone(), tol, a_max)?.sweep(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifshitz::casimir_pressure;
    use crate::optics::PermittivityModel;
    use approx::assert_relative_eq;

    #[test]
    fn roughness_factor_at_closest_separation() {
        let g = Geometry::experiment();
        // 1 + 10 (1.13² + 1.08²) / 250²
        let expected = 1.0 + 10.0 * (1.2769 + 1.1664) / 62500.0;
        assert_relative_eq!(g.roughness_factor(250e-9), expected, max_relative = 1e-14);
        assert!((g.roughness_factor(250e-9) - 1.000391).abs() < 1e-6);
    }

    #[test]
    fn roughness_factor_is_perturbative() {
        let g = Geometry::experiment();
        for nm in (250..=2000).step_by(10) {
            assert!(g.roughness_factor(nm as f64 * NM) <= 1.0005);
        }
    }

    #[test]
    fn validity_domain() {
        let g = Geometry::experiment();
        assert!(g.check_domain(950e-9).is_ok());
        assert!((950e-9 / g.radius - 0.02186).abs() < 1e-5);
        assert!(matches!(g.check_domain(960e-9), Err(ForceError::OutsideDomain { .. })));
        assert!(g.check_domain(240e-9).is_err());
        assert!(g.with_max_ratio(0.03).check_domain(1.3e-6).is_ok());
        assert!(Geometry::new(-1.0, 0.0, 0.0, 300.0).is_err());
        assert!(Geometry::new(1e-5, -1e-9, 0.0, 300.0).is_err());
    }

    #[test]
    fn pure_pfa_when_corrections_disabled() {
        let m = PermittivityModel::gold_drude();
        let g = Geometry::new(43.466e-6, 0.0, 0.0, ROOM_TEMPERATURE).unwrap();
        let a = 400e-9;
        let f = force_gradient(&m, &g, &BetaTable::zero(), a, 1e-9).unwrap();
        let p = casimir_pressure(&m, a, ROOM_TEMPERATURE, 1e-9).unwrap();
        assert_eq!(f.gradient, -2.0 * PI * g.radius * p.pressure);
        assert!(f.gradient > 0.0);
        assert_eq!(f.magnitude(), f.gradient);
    }

    #[test]
    fn beta_table_interpolation() {
        let t = BetaTable::new(&[(200e-9, 0.2), (500e-9, 0.5), (1e-6, 0.6), (2e-6, 0.65)], "test").unwrap();
        assert_eq!(t.eval(500e-9), (0.5, false));
        let (v, ext) = t.eval(100e-9);
        assert_eq!((v, ext), (0.2, true));
        assert!(t.eval(3e-6).1);
        // monotone data stays monotone between knots
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=180 {
            let a = 200e-9 + i as f64 * 10e-9;
            let (v, _) = t.eval(a);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert!(BetaTable::new(&[(1.0, 0.0), (0.5, 0.0)], "bad").is_err());
        assert_eq!(BetaTable::zero().eval(5e-7), (0.0, false));
    }

    #[test]
    fn beta_interpolant_is_continuous_at_knots() {
        let t = BetaTable::new(&[(250e-9, 0.1), (400e-9, 0.4), (700e-9, 0.45), (1e-6, 0.3)], "test").unwrap();
        for &k in &[400e-9, 700e-9] {
            let h = 1e-15;
            let (l, _) = t.eval(k - h);
            let (r, _) = t.eval(k + h);
            assert!((l - r).abs() < 1e-6);
        }
    }

    #[test]
    fn sweep_matches_single_point_and_rejects_unsorted() {
        let m = PermittivityModel::gold_plasma();
        let g = Geometry::experiment();
        let b = BetaTable::zero();
        let single = force_gradient(&m, &g, &b, 600e-9, 1e-9).unwrap();
        let sweep = pressure_to_gradient_sweep(&m, &g, &b, &[600e-9], 1e-9).unwrap();
        assert_eq!(sweep[0], single);
        assert_eq!(
            pressure_to_gradient_sweep(&m, &g, &b, &[600e-9, 500e-9], 1e-9).unwrap_err(),
            ForceError::UnsortedGrid
        );
    }
}
