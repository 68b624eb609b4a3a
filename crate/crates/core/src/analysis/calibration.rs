//! Fit of the exact sphere-plate γ(a) to the parabola curvatures, giving the
//! calibration constant C and the closest separation z0.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use super::parabola::{fit_parabolas, fit_v0_line, ParabolaFit, V0Line};
use super::AnalysisError;
use crate::electrostatics::gamma_coefficient;
use crate::units::{EPSILON_0, UM};
use crate::vexp::MeasurementGrid;

pub const MIN_CALIBRATION_POINTS: usize = 100;
const MAX_Z0: f64 = 10.0 * UM;
const GAMMA_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;
const STEP_TOL: f64 = 1e-11;
const SIGMA_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSample {
    pub z_rel: f64,
    pub gamma: f64,
    pub sigma: f64,
}

impl From<&ParabolaFit> for GammaSample {
    fn from(p: &ParabolaFit) -> Self {
        Self {
            z_rel: p.z_rel,
            gamma: p.gamma,
            sigma: p.sigma_gamma,
        }
    }
}

/// Refit of C and z0 on a sub-range of separations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowFit {
    pub z_lo: f64,
    pub z_hi: f64,
    pub points: usize,
    pub c: f64,
    pub sigma_c: f64,
    pub z0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationFit {
    /// C in s/kg.
    pub c: f64,
    pub sigma_c: f64,
    pub z0: f64,
    pub sigma_z0: f64,
    pub correlation: f64,
    pub chi2_red: f64,
    pub iterations: usize,
    /// Diagnostic refits over consecutive windows of at least 100 points.
    pub windows: Vec<WindowFit>,
}

fn unit_gamma(a: f64, radius: f64) -> Result<f64, AnalysisError> {
    Ok(gamma_coefficient(a, radius, 1.0, GAMMA_TOL)?)
}

struct Problem<'s> {
    samples: &'s [GammaSample],
    radius: f64,
}

impl Problem<'_> {
    /// Whitened residuals and Jacobian at (C, z0).
    fn linearize(&self, c: f64, z0: f64) -> Result<(Vec<f64>, Vec<[f64; 2]>), AnalysisError> {
        let rows: Vec<(f64, [f64; 2])> = self
            .samples
            .par_iter()
            .map(|s| {
                let a = z0 + s.z_rel;
                let h = 1e-4 * a;
                let g = unit_gamma(a, self.radius)?;
                let dg = (unit_gamma(a + h, self.radius)? - unit_gamma(a - h, self.radius)?) / (2.0 * h);
                Ok(((s.gamma - c * g) / s.sigma, [-g / s.sigma, -c * dg / s.sigma]))
            })
            .collect::<Result<_, AnalysisError>>()?;
        Ok(rows.into_iter().unzip())
    }

    fn chi2(&self, c: f64, z0: f64) -> Result<f64, AnalysisError> {
        self.samples
            .par_iter()
            .map(|s| Ok(((s.gamma - c * unit_gamma(z0 + s.z_rel, self.radius)?) / s.sigma).powi(2)))
            .sum()
    }

    fn min_z(&self) -> f64 {
        self.samples.iter().map(|s| s.z_rel).fold(f64::INFINITY, f64::min)
    }
}

/// Start point from the small-gap form γ ≈ C π ε₀ R / a², which makes
/// γ^(-1/2) linear in z.
fn initial_guess(samples: &[GammaSample], radius: f64) -> Result<(f64, f64), AnalysisError> {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in samples {
        let y = s.gamma.powf(-0.5);
        let sigma_y = 0.5 * s.gamma.powf(-1.5) * s.sigma;
        let w = 1.0 / (sigma_y * sigma_y);
        sw += w;
        sx += w * s.z_rel;
        sy += w * y;
        sxx += w * s.z_rel * s.z_rel;
        sxy += w * s.z_rel * y;
    }
    let det = sw * sxx - sx * sx;
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    if !(slope > 0.0 && slope.is_finite()) {
        return Err(AnalysisError::FitFailure {
            iterations: 0,
            chi2_red: f64::NAN,
            message: "γ does not decrease with separation".into(),
        });
    }
    let c = 1.0 / (slope * slope * PI * EPSILON_0 * radius);
    Ok((c, intercept / slope))
}

fn levenberg_marquardt(problem: &Problem) -> Result<(f64, f64, Matrix2<f64>, f64, usize), AnalysisError> {
    let n = problem.samples.len();
    let (mut c, mut z0) = initial_guess(problem.samples, problem.radius)?;
    let z_floor = -problem.min_z();
    z0 = z0.max(z_floor + 1e-12);
    let mut lambda = 1e-3;
    let mut chi2 = problem.chi2(c, z0)?;
    for iteration in 1..=MAX_ITERATIONS {
        let (r, j) = problem.linearize(c, z0)?;
        let mut a = Matrix2::zeros();
        let mut b = Vector2::zeros();
        for (ri, ji) in r.iter().zip(&j) {
            let jv = Vector2::new(ji[0], ji[1]);
            a += jv * jv.transpose();
            b -= jv * *ri;
        }
        loop {
            let mut damped = a;
            damped[(0, 0)] *= 1.0 + lambda;
            damped[(1, 1)] *= 1.0 + lambda;
            let Some(step) = damped.lu().solve(&b) else {
                lambda *= 10.0;
                if lambda > 1e12 {
                    break;
                }
                continue;
            };
            let (c_new, z_new) = (c + step[0], z0 + step[1]);
            let trial = if z_new > z_floor && c_new > 0.0 {
                problem.chi2(c_new, z_new)?
            } else {
                f64::INFINITY
            };
            if trial <= chi2 {
                let small = step[0].abs() <= STEP_TOL * c.abs() && step[1].abs() <= STEP_TOL * z_new.abs().max(1e-12);
                let flat = chi2 - trial <= 1e-15 * chi2;
                c = c_new;
                z0 = z_new;
                chi2 = trial;
                lambda = (lambda / 10.0).max(1e-12);
                if small || flat {
                    let cov = a
                        .try_inverse()
                        .ok_or_else(|| AnalysisError::FitFailure {
                            iterations: iteration,
                            chi2_red: chi2 / (n as f64 - 2.0),
                            message: "singular normal matrix".into(),
                        })?;
                    return Ok((c, z0, cov, chi2, iteration));
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                // No downhill step at any damping: already at the minimum.
                let cov = a.try_inverse().ok_or_else(|| AnalysisError::FitFailure {
                    iterations: iteration,
                    chi2_red: chi2 / (n as f64 - 2.0),
                    message: "singular normal matrix".into(),
                })?;
                return Ok((c, z0, cov, chi2, iteration));
            }
        }
    }
    Err(AnalysisError::FitFailure {
        iterations: MAX_ITERATIONS,
        chi2_red: chi2 / (n as f64 - 2.0),
        message: format!("last estimate C = {c:e} s/kg, z0 = {z0:e} m"),
    })
}

fn fit_core(samples: &[GammaSample], radius: f64) -> Result<(f64, f64, Matrix2<f64>, f64, usize), AnalysisError> {
    let problem = Problem { samples, radius };
    let (c, z0, cov, chi2, it) = levenberg_marquardt(&problem)?;
    if !(0.0..=MAX_Z0).contains(&z0) {
        return Err(AnalysisError::Domain { z0 });
    }
    Ok((c, z0, cov, chi2, it))
}

/// Weighted nonlinear least squares of `γ(z) = C g(z0 + z)` over (C, z0).
/// The covariance is scaled by the reduced χ².
pub fn fit_calibration(samples: &[GammaSample], radius: f64) -> Result<CalibrationFit, AnalysisError> {
    let n = samples.len();
    if n < MIN_CALIBRATION_POINTS {
        return Err(AnalysisError::TooFewPoints {
            needed: MIN_CALIBRATION_POINTS,
            got: n,
        });
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(AnalysisError::InvalidArgument("sphere radius must be positive".into()));
    }
    if samples.iter().any(|s| !(s.gamma > 0.0 && s.sigma >= 0.0 && s.z_rel.is_finite())) {
        return Err(AnalysisError::InvalidArgument("γ samples need positive values and non-negative uncertainties".into()));
    }
    // Noiseless curvatures can come with a zero uncertainty; weight those at
    // the rounding level instead.
    let floored: Vec<GammaSample> = samples
        .iter()
        .map(|s| GammaSample {
            sigma: s.sigma.max(SIGMA_FLOOR * s.gamma),
            ..*s
        })
        .collect();
    let samples = floored.as_slice();
    let (c, z0, cov, chi2, iterations) = fit_core(samples, radius)?;
    let chi2_red = chi2 / (n as f64 - 2.0);
    let cov = cov * chi2_red;
    let sigma_c = cov[(0, 0)].max(0.0).sqrt();
    let sigma_z0 = cov[(1, 1)].max(0.0).sqrt();
    let windows = window_fits(samples, radius);
    Ok(CalibrationFit {
        c,
        sigma_c,
        z0,
        sigma_z0,
        correlation: cov[(0, 1)] / (sigma_c * sigma_z0),
        chi2_red,
        iterations,
        windows,
    })
}

fn window_fits(samples: &[GammaSample], radius: f64) -> Vec<WindowFit> {
    let count = samples.len() / MIN_CALIBRATION_POINTS;
    if count < 2 {
        return Vec::new();
    }
    let size = samples.len() / count;
    (0..count)
        .filter_map(|k| {
            let end = if k + 1 == count { samples.len() } else { (k + 1) * size };
            let part = &samples[k * size..end];
            let (c, z0, cov, chi2, _) = fit_core(part, radius).ok()?;
            let chi2_red = chi2 / (part.len() as f64 - 2.0);
            Some(WindowFit {
                z_lo: part[0].z_rel,
                z_hi: part[part.len() - 1].z_rel,
                points: part.len(),
                c,
                sigma_c: (cov[(0, 0)] * chi2_red).max(0.0).sqrt(),
                z0,
            })
        })
        .collect()
}

/// Everything the gradient extraction needs from the electrostatic runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub radius: f64,
    pub parabolas: Vec<ParabolaFit>,
    /// V0 against the absolute separation `z0 + z`.
    pub v0_line: V0Line,
    pub fit: CalibrationFit,
}

impl CalibrationResult {
    pub fn separation(&self, z_rel: f64) -> f64 {
        self.fit.z0 + z_rel
    }

    /// γ from the fitted C and z0.
    pub fn gamma(&self, z_rel: f64) -> Result<f64, AnalysisError> {
        Ok(gamma_coefficient(self.separation(z_rel), self.radius, self.fit.c, GAMMA_TOL)?)
    }

    /// V0 from the fitted line.
    pub fn v0(&self, z_rel: f64) -> f64 {
        self.v0_line.eval(self.separation(z_rel))
    }
}

/// Parabolas, then (C, z0), then the V0 line on the absolute separations.
pub fn calibrate(grid: &MeasurementGrid) -> Result<CalibrationResult, AnalysisError> {
    let parabolas = fit_parabolas(grid)?;
    let samples: Vec<GammaSample> = parabolas.iter().map(GammaSample::from).collect();
    let fit = fit_calibration(&samples, grid.radius)?;
    let a: Vec<f64> = parabolas.iter().map(|p| fit.z0 + p.z_rel).collect();
    let v0: Vec<f64> = parabolas.iter().map(|p| p.v0).collect();
    let v0_line = fit_v0_line(&a, &v0)?;
    Ok(CalibrationResult {
        radius: grid.radius,
        parabolas,
        v0_line,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::NM;

    fn synthetic(c: f64, z0: f64, radius: f64, n: usize) -> Vec<GammaSample> {
        (0..n)
            .map(|i| {
                let z = (2.0 + i as f64) * NM;
                let g = gamma_coefficient(z0 + z, radius, c, 1e-14).unwrap();
                GammaSample {
                    z_rel: z,
                    gamma: g,
                    sigma: 1e-3 * g,
                }
            })
            .collect()
    }

    #[test]
    fn noiseless_recovery() {
        let r = 43.466e-6;
        let s = synthetic(6.529e5, 234.4 * NM, r, 300);
        let f = fit_calibration(&s, r).unwrap();
        assert!((f.c / 6.529e5 - 1.0).abs() < 1e-8, "{}", f.c);
        assert!((f.z0 - 234.4 * NM).abs() < 1e-6 * NM, "{}", f.z0);
        assert!(f.windows.len() == 3);
        for w in &f.windows {
            assert!((w.z0 - 234.4 * NM).abs() < 1e-5 * NM);
        }
    }

    #[test]
    fn radius_sensitivity() {
        let r = 43.466e-6;
        let s = synthetic(6.485e5, 248.0 * NM, r, 200);
        let f = fit_calibration(&s, r * 1.001).unwrap();
        assert!((f.c / 6.485e5 - 1.0).abs() < 2e-3);
    }

    #[test]
    fn too_few_points() {
        let r = 43.466e-6;
        let s = synthetic(6.485e5, 248.0 * NM, r, 50);
        assert!(matches!(fit_calibration(&s, r), Err(AnalysisError::TooFewPoints { .. })));
    }

    #[test]
    fn guess_is_close() {
        let r = 43.466e-6;
        let s = synthetic(6.485e5, 248.0 * NM, r, 200);
        let (c, z0) = initial_guess(&s, r).unwrap();
        assert!((c / 6.485e5 - 1.0).abs() < 0.05);
        assert!((z0 - 248.0 * NM).abs() < 10.0 * NM);
    }
}
