//! Force gradients from the frequency shifts, their 67% error budget, and
//! aggregation across measurement sets.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::calibration::CalibrationResult;
use super::AnalysisError;
use crate::vexp::MeasurementGrid;

pub const CONFIDENCE: f64 = 0.67;

/// Two-sided Student coefficient at 67% for `n` samples (`n - 1` dof).
pub fn student_coefficient(n: usize) -> f64 {
    assert!(n >= 2, "need at least two samples");
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive dof");
    t.inverse_cdf(0.5 + 0.5 * CONFIDENCE)
}

/// Mean F'(a) with random, systematic and total errors (N/m), all at 67%.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradientSeries {
    pub label: String,
    /// Absolute separations in m.
    pub separations: Vec<f64>,
    pub mean: Vec<f64>,
    pub random: Vec<f64>,
    pub systematic: Vec<f64>,
    pub total: Vec<f64>,
    /// Number of values averaged at each separation.
    pub counts: Vec<usize>,
    pub warnings: Vec<String>,
}

impl GradientSeries {
    pub fn len(&self) -> usize {
        self.separations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.separations.is_empty()
    }

    fn push(&mut self, a: f64, mean: f64, random: f64, systematic: f64, count: usize) {
        self.separations.push(a);
        self.mean.push(mean);
        self.random.push(random);
        self.systematic.push(systematic);
        self.total.push(random.hypot(systematic));
        self.counts.push(count);
    }
}

/// `F' = [-Δω - γ(a) (V - V0(a))²] / C` for every channel, averaged per
/// separation. Separations with fewer than two finite values are dropped
/// and reported in `warnings`.
pub fn extract_gradients(grid: &MeasurementGrid, calib: &CalibrationResult) -> Result<GradientSeries, AnalysisError> {
    let c = calib.fit.c;
    let systematic = grid.spec.freq_systematic / c;
    let rows: Vec<Result<(f64, Option<(f64, f64, usize)>), AnalysisError>> = (0..grid.z_rel.len())
        .into_par_iter()
        .map(|i| {
            let z = grid.z_rel[i];
            let gamma = calib.gamma(z)?;
            let v0 = calib.v0(z);
            let values: Vec<f64> = grid
                .channels
                .iter()
                .map(|ch| {
                    let dv = ch.voltage - v0;
                    (-ch.shifts[i] - gamma * dv * dv) / c
                })
                .filter(|v| v.is_finite())
                .collect();
            let n = values.len();
            if n < 2 {
                return Ok((z, None));
            }
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let random = student_coefficient(n) * (var / n as f64).sqrt();
            Ok((z, Some((mean, random, n))))
        })
        .collect();
    let mut series = GradientSeries {
        label: grid.spec.label.clone(),
        ..Default::default()
    };
    let expected = grid.channels.len();
    for row in rows {
        let (z, stats) = row?;
        match stats {
            Some((mean, random, n)) => {
                if n < expected {
                    series
                        .warnings
                        .push(format!("z = {:.3} nm: {} of {expected} values usable", z * 1e9, n));
                }
                series.push(calib.separation(z), mean, random, systematic, n);
            }
            None => series
                .warnings
                .push(format!("z = {:.3} nm dropped: fewer than two usable values", z * 1e9)),
        }
    }
    Ok(series)
}

/// Multiples of `step` inside every series' range.
pub fn common_grid(series: &[GradientSeries], step: f64) -> Result<Vec<f64>, AnalysisError> {
    if series.is_empty() || series.iter().any(|s| s.is_empty()) {
        return Err(AnalysisError::Alignment("empty gradient series".into()));
    }
    let lo = series.iter().map(|s| s.separations[0]).fold(f64::NEG_INFINITY, f64::max);
    let hi = series.iter().map(|s| s.separations[s.len() - 1]).fold(f64::INFINITY, f64::min);
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    if last < first {
        return Err(AnalysisError::Alignment("series ranges do not overlap".into()));
    }
    Ok((first..=last).map(|k| k as f64 * step).collect())
}

/// Linear interpolation onto `grid`; the total error is recomposed from
/// the interpolated parts.
pub fn resample(series: &GradientSeries, grid: &[f64]) -> Result<GradientSeries, AnalysisError> {
    let x = &series.separations;
    if x.len() < 2 {
        return Err(AnalysisError::Alignment("need at least two points to resample".into()));
    }
    let tol = 1e-6 * (x[1] - x[0]).abs();
    let mut out = GradientSeries {
        label: series.label.clone(),
        warnings: series.warnings.clone(),
        ..Default::default()
    };
    for &a in grid {
        if a < x[0] - tol || a > x[x.len() - 1] + tol {
            return Err(AnalysisError::Alignment(format!(
                "{:.3} nm lies outside the series range [{:.3}, {:.3}] nm",
                a * 1e9,
                x[0] * 1e9,
                x[x.len() - 1] * 1e9
            )));
        }
        let k = x.partition_point(|&v| v <= a).clamp(1, x.len() - 1) - 1;
        let t = ((a - x[k]) / (x[k + 1] - x[k])).clamp(0.0, 1.0);
        let lerp = |v: &[f64]| v[k] + t * (v[k + 1] - v[k]);
        out.push(
            a,
            lerp(&series.mean),
            lerp(&series.random),
            lerp(&series.systematic),
            series.counts[k].min(series.counts[k + 1]),
        );
    }
    Ok(out)
}

/// Cross-set mean on a shared grid. The total error is the mean of the
/// per-set totals, the systematic part the mean of the per-set systematic
/// errors, and the random part what remains in quadrature.
pub fn average_sets(series: &[GradientSeries]) -> Result<GradientSeries, AnalysisError> {
    let Some(first) = series.first() else {
        return Err(AnalysisError::Alignment("no series to average".into()));
    };
    for s in series {
        if s.separations.len() != first.separations.len()
            || s.separations.iter().zip(&first.separations).any(|(a, b)| (a - b).abs() > 1e-15)
        {
            return Err(AnalysisError::Alignment(format!("{} and {} use different grids", first.label, s.label)));
        }
    }
    let m = series.len() as f64;
    let mut out = GradientSeries {
        label: series.iter().map(|s| s.label.as_str()).collect::<Vec<_>>().join("+"),
        warnings: series.iter().flat_map(|s| s.warnings.iter().cloned()).collect(),
        ..Default::default()
    };
    for i in 0..first.len() {
        let mean = series.iter().map(|s| s.mean[i]).sum::<f64>() / m;
        let total = series.iter().map(|s| s.total[i]).sum::<f64>() / m;
        let systematic = series.iter().map(|s| s.systematic[i]).sum::<f64>() / m;
        let random = (total * total - systematic * systematic).max(0.0).sqrt();
        out.separations.push(first.separations[i]);
        out.mean.push(mean);
        out.random.push(random);
        out.systematic.push(systematic);
        out.total.push(total);
        out.counts.push(series.iter().map(|s| s.counts[i]).sum());
    }
    Ok(out)
}
