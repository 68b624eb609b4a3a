//! Quadratic fits of Δω(V) at each separation, and the straight-line fit of
//! the residual potential.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::AnalysisError;
use crate::vexp::MeasurementGrid;

/// One separation's parabola `Δω = c0 + c1 u + c2 u²`, `u = V - V̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaFit {
    pub z_rel: f64,
    /// Apex abscissa, V.
    pub v0: f64,
    pub sigma_v0: f64,
    /// −c2, rad s⁻¹ V⁻².
    pub gamma: f64,
    pub sigma_gamma: f64,
    /// Apex ordinate, equal to −C F'(a).
    pub apex: f64,
    pub sigma_apex: f64,
    /// Mean applied voltage used to center the abscissa.
    pub center: f64,
    pub coefficients: [f64; 3],
    pub covariance: [[f64; 3]; 3],
    pub residual_rms: f64,
}

/// Least squares with equal weights; every channel carries the same noise.
pub fn fit_parabola(z_rel: f64, voltages: &[f64], shifts: &[f64]) -> Result<ParabolaFit, AnalysisError> {
    if voltages.len() != shifts.len() {
        return Err(AnalysisError::InvalidArgument("voltage and shift counts differ".into()));
    }
    let mut distinct: Vec<f64> = voltages.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(AnalysisError::TooFewVoltages {
            z_rel,
            distinct: distinct.len(),
        });
    }
    let n = voltages.len();
    let center = voltages.iter().sum::<f64>() / n as f64;
    // Scale u to O(1) so the normal matrix stays well conditioned.
    let scale = (voltages.iter().map(|v| (v - center).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut xtx = Matrix3::zeros();
    let mut xty = Vector3::zeros();
    for (&v, &y) in voltages.iter().zip(shifts) {
        let u = (v - center) / scale;
        let row = Vector3::new(1.0, u, u * u);
        xtx += row * row.transpose();
        xty += row * y;
    }
    let chol = xtx
        .cholesky()
        .ok_or_else(|| AnalysisError::InvalidArgument("singular parabola design".into()))?;
    let beta = chol.solve(&xty);
    let inv = chol.inverse();
    let rss: f64 = voltages
        .iter()
        .zip(shifts)
        .map(|(&v, &y)| {
            let u = (v - center) / scale;
            let r = y - (beta[0] + beta[1] * u + beta[2] * u * u);
            r * r
        })
        .sum();
    let dof = n.saturating_sub(3).max(1) as f64;
    let s2 = rss / dof;
    let unscale = Vector3::new(1.0, 1.0 / scale, 1.0 / (scale * scale));
    let c = beta.component_mul(&unscale);
    let mut cov = [[0.0; 3]; 3];
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = s2 * inv[(i, j)] * unscale[i] * unscale[j];
        }
    }
    let (c0, c1, c2) = (c[0], c[1], c[2]);
    if !(c2 < 0.0) {
        return Err(AnalysisError::DegenerateFit { z_rel, coefficient: c2 });
    }
    let propagate = |g: [f64; 3]| -> f64 {
        let mut var = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                var += g[i] * cov[i][j] * g[j];
            }
        }
        var.max(0.0).sqrt()
    };
    let v0 = center - c1 / (2.0 * c2);
    let apex = c0 - c1 * c1 / (4.0 * c2);
    Ok(ParabolaFit {
        z_rel,
        v0,
        sigma_v0: propagate([0.0, -1.0 / (2.0 * c2), c1 / (2.0 * c2 * c2)]),
        gamma: -c2,
        sigma_gamma: cov[2][2].max(0.0).sqrt(),
        apex,
        sigma_apex: propagate([1.0, -c1 / (2.0 * c2), c1 * c1 / (4.0 * c2 * c2)]),
        center,
        coefficients: [c0, c1, c2],
        covariance: cov,
        residual_rms: (rss / n as f64).sqrt(),
    })
}

/// Parabola fits at every separation, using all channels.
pub fn fit_parabolas(grid: &MeasurementGrid) -> Result<Vec<ParabolaFit>, AnalysisError> {
    let voltages = grid.voltages();
    (0..grid.z_rel.len())
        .into_par_iter()
        .map(|i| {
            let shifts: Vec<f64> = grid.channels.iter().map(|c| c.shifts[i]).collect();
            fit_parabola(grid.z_rel[i], &voltages, &shifts)
        })
        .collect()
}

/// `V0 = K a + b` by ordinary least squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct V0Line {
    /// K in V/m.
    pub slope: f64,
    pub sigma_slope: f64,
    /// b in V.
    pub intercept: f64,
    pub sigma_intercept: f64,
    /// Arithmetic mean of the V0 samples.
    pub mean: f64,
}

impl V0Line {
    pub fn eval(&self, separation: f64) -> f64 {
        self.slope * separation + self.intercept
    }
}

pub fn fit_v0_line(separations: &[f64], v0: &[f64]) -> Result<V0Line, AnalysisError> {
    let n = separations.len();
    if n != v0.len() {
        return Err(AnalysisError::InvalidArgument("separation and V0 counts differ".into()));
    }
    if n < 2 {
        return Err(AnalysisError::TooFewPoints { needed: 2, got: n });
    }
    let nf = n as f64;
    let xm = separations.iter().sum::<f64>() / nf;
    let ym = v0.iter().sum::<f64>() / nf;
    let sxx: f64 = separations.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::InvalidArgument("all separations coincide".into()));
    }
    let sxy: f64 = separations.iter().zip(v0).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = separations
        .iter()
        .zip(v0)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let s2 = if n > 2 { rss / (nf - 2.0) } else { 0.0 };
    Ok(V0Line {
        slope,
        sigma_slope: (s2 / sxx).sqrt(),
        intercept,
        sigma_intercept: (s2 * (1.0 / nf + xm * xm / sxx)).sqrt(),
        mean: ym,
    })
}
