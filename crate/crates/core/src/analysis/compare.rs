//! Differences between measured and theoretical gradients, the confidence
//! band around them, and window verdicts by the 33% rule.

use std::fmt;

use super::gradients::GradientSeries;
use super::AnalysisError;
use crate::force::GradientResult;
use crate::units::NM;

/// A theory is excluded in a window when more than this percentage of the
/// points fall outside the band.
pub const DEFAULT_EXCLUSION_PERCENT: u32 = 33;
const WINDOW_ANCHOR: f64 = 50.0 * NM;

/// Theoretical error: `optical_fraction |F'| + |F''| Δz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryErrorConfig {
    pub optical_fraction: f64,
    /// Δz, the error in the absolute separation.
    pub separation_error: f64,
}

impl TheoryErrorConfig {
    pub fn new(optical_fraction: f64, separation_error: f64) -> Self {
        Self {
            optical_fraction,
            separation_error,
        }
    }
}

impl Default for TheoryErrorConfig {
    fn default() -> Self {
        Self {
            optical_fraction: 0.005,
            separation_error: 0.5 * NM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCurve {
    pub label: String,
    pub separations: Vec<f64>,
    /// F'(a) in N/m.
    pub gradient: Vec<f64>,
}

impl TheoryCurve {
    pub fn new(label: impl Into<String>, separations: Vec<f64>, gradient: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            separations,
            gradient,
        }
    }

    pub fn from_results(label: impl Into<String>, results: &[GradientResult]) -> Self {
        Self::new(
            label,
            results.iter().map(|r| r.separation).collect(),
            results.iter().map(|r| r.gradient).collect(),
        )
    }

    /// F''(a) = dF'/da from the local interpolating parabola (one-sided at
    /// the ends).
    pub fn second_derivative(&self) -> Result<Vec<f64>, AnalysisError> {
        let x = &self.separations;
        let y = &self.gradient;
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(AnalysisError::InvalidArgument("theory curve needs at least 3 points".into()));
        }
        let three_point = |l: usize, m: usize, r: usize, at: usize| {
            // Derivative of the parabola through points l, m, r at point `at`.
            let (x0, x1, x2) = (x[l], x[m], x[r]);
            let xa = x[at];
            y[l] * (2.0 * xa - x1 - x2) / ((x0 - x1) * (x0 - x2))
                + y[m] * (2.0 * xa - x0 - x2) / ((x1 - x0) * (x1 - x2))
                + y[r] * (2.0 * xa - x0 - x1) / ((x2 - x0) * (x2 - x1))
        };
        Ok((0..n)
            .map(|i| match i {
                0 => three_point(0, 1, 2, 0),
                _ if i == n - 1 => three_point(n - 3, n - 2, n - 1, n - 1),
                _ => three_point(i - 1, i, i + 1, i),
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Excluded,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Consistent => "consistent",
            Verdict::Excluded => "excluded",
        })
    }
}

/// `outside / n > percent / 100`, in integer arithmetic.
pub fn excluded_by_count(outside: usize, n: usize, percent: u32) -> bool {
    outside as u64 * 100 > percent as u64 * n as u64
}

/// `inside / n >= 1 - percent / 100`, in integer arithmetic.
pub fn consistent_by_containment(inside: usize, n: usize, percent: u32) -> bool {
    inside as u64 * 100 >= (100 - percent as u64) * n as u64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowVerdict {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub outside: usize,
    pub fraction_outside: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelComparison {
    pub label: String,
    pub theory: Vec<f64>,
    /// d(a) = F̄'_expt - F'_theor.
    pub difference: Vec<f64>,
    pub sigma_theory: Vec<f64>,
    /// Band half-width: experimental and theoretical totals in quadrature.
    pub sigma_d: Vec<f64>,
    pub outside: Vec<bool>,
    pub windows: Vec<WindowVerdict>,
}

impl ModelComparison {
    /// Windows that overlap `[lo, hi)`.
    pub fn windows_overlapping(&self, lo: f64, hi: f64) -> impl Iterator<Item = &WindowVerdict> {
        self.windows.iter().filter(move |w| w.lo < hi && w.hi > lo)
    }

    /// True when every window overlapping `[lo, hi)` has verdict `v`.
    pub fn all_windows(&self, lo: f64, hi: f64, v: Verdict) -> bool {
        let mut any = false;
        for w in self.windows_overlapping(lo, hi) {
            any = true;
            if w.verdict != v {
                return false;
            }
        }
        any
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub separations: Vec<f64>,
    pub experiment: Vec<f64>,
    pub experiment_total: Vec<f64>,
    pub models: Vec<ModelComparison>,
    pub exclusion_percent: u32,
}

impl ComparisonReport {
    pub fn model(&self, label: &str) -> Option<&ModelComparison> {
        self.models.iter().find(|m| m.label == label)
    }
}

/// Contiguous windows of `width` starting at the first point rounded down
/// to a multiple of 50 nm. The last window is closed at the final point; a
/// remainder shorter than half a window joins the window before it.
pub fn default_windows(separations: &[f64], width: f64) -> Vec<(f64, f64)> {
    let (Some(&first), Some(&last)) = (separations.first(), separations.last()) else {
        return Vec::new();
    };
    let start = (first / WINDOW_ANCHOR + 1e-9).floor() * WINDOW_ANCHOR;
    let mut edges = vec![start];
    let mut k = 1;
    while start + k as f64 * width < last - 1e-6 * NM {
        edges.push(start + k as f64 * width);
        k += 1;
    }
    if edges.len() > 1 && last - edges[edges.len() - 1] < 0.5 * width {
        edges.pop();
    }
    edges.push(last);
    edges.windows(2).map(|w| (w[0], w[1])).collect()
}

fn check_alignment(series: &GradientSeries, theory: &TheoryCurve) -> Result<(), AnalysisError> {
    if theory.separations.len() != series.len() || theory.gradient.len() != series.len() {
        return Err(AnalysisError::Alignment(format!(
            "{} has {} points, the data {}",
            theory.label,
            theory.separations.len(),
            series.len()
        )));
    }
    for (a, b) in series.separations.iter().zip(&theory.separations) {
        if (a - b).abs() > 1e-6 * NM {
            return Err(AnalysisError::Alignment(format!(
                "{} is tabulated at {:.6} nm where the data has {:.6} nm",
                theory.label,
                b * 1e9,
                a * 1e9
            )));
        }
    }
    Ok(())
}

/// Band comparison of one measured series against each theory.
///
/// `windows` are `[lo, hi)` intervals, the last one closed; `None` selects
/// [`default_windows`] with 100 nm width.
pub fn compare(
    series: &GradientSeries,
    theories: &[TheoryCurve],
    errors: &TheoryErrorConfig,
    windows: Option<&[(f64, f64)]>,
    exclusion_percent: u32,
) -> Result<ComparisonReport, AnalysisError> {
    if series.len() < 3 {
        return Err(AnalysisError::TooFewPoints {
            needed: 3,
            got: series.len(),
        });
    }
    if exclusion_percent > 100 {
        return Err(AnalysisError::InvalidArgument("exclusion percentage above 100".into()));
    }
    let windows: Vec<(f64, f64)> = match windows {
        Some(w) => w.to_vec(),
        None => default_windows(&series.separations, 100.0 * NM),
    };
    let a = &series.separations;
    let models = theories
        .iter()
        .map(|theory| {
            check_alignment(series, theory)?;
            let second = theory.second_derivative()?;
            let mut m = ModelComparison {
                label: theory.label.clone(),
                theory: theory.gradient.clone(),
                difference: Vec::with_capacity(a.len()),
                sigma_theory: Vec::with_capacity(a.len()),
                sigma_d: Vec::with_capacity(a.len()),
                outside: Vec::with_capacity(a.len()),
                windows: Vec::new(),
            };
            for i in 0..a.len() {
                let d = series.mean[i] - theory.gradient[i];
                let st = errors.optical_fraction * theory.gradient[i].abs() + second[i].abs() * errors.separation_error;
                let sd = series.total[i].hypot(st);
                m.difference.push(d);
                m.sigma_theory.push(st);
                m.sigma_d.push(sd);
                m.outside.push(d.abs() > sd);
            }
            let last = windows.len().saturating_sub(1);
            for (k, &(lo, hi)) in windows.iter().enumerate() {
                let slack = 1e-6 * NM;
                let members: Vec<usize> = (0..a.len())
                    .filter(|&i| a[i] >= lo - slack && (a[i] < hi - slack || (k == last && a[i] <= hi + slack)))
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let outside = members.iter().filter(|&&i| m.outside[i]).count();
                let n = members.len();
                m.windows.push(WindowVerdict {
                    lo,
                    hi,
                    points: n,
                    outside,
                    fraction_outside: outside as f64 / n as f64,
                    verdict: if excluded_by_count(outside, n, exclusion_percent) {
                        Verdict::Excluded
                    } else {
                        Verdict::Consistent
                    },
                });
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(ComparisonReport {
        separations: a.clone(),
        experiment: series.mean.clone(),
        experiment_total: series.total.clone(),
        models,
        exclusion_percent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nm_grid(lo: i32, hi: i32) -> Vec<f64> {
        (lo..=hi).map(|x| x as f64 * NM).collect()
    }

    fn flat_series(a: &[f64], mean: f64, total: f64) -> GradientSeries {
        GradientSeries {
            label: "s".into(),
            separations: a.to_vec(),
            mean: vec![mean; a.len()],
            random: vec![0.0; a.len()],
            systematic: vec![total; a.len()],
            total: vec![total; a.len()],
            counts: vec![21; a.len()],
            warnings: Vec::new(),
        }
    }

    #[test]
    fn windows_cover_the_grid() {
        let w = default_windows(&nm_grid(250, 955), 100.0 * NM);
        assert_eq!(w.len(), 7);
        assert!((w[0].0 - 250.0 * NM).abs() < 1e-18);
        assert!((w[6].0 - 850.0 * NM).abs() < 1e-18 && (w[6].1 - 955.0 * NM).abs() < 1e-18);
        let w = default_windows(&nm_grid(600, 1300), 100.0 * NM);
        assert_eq!(w.len(), 7);
        assert!((w[6].1 - 1300.0 * NM).abs() < 1e-18);
        let w = default_windows(&nm_grid(600, 1362), 100.0 * NM);
        assert_eq!(w.len(), 8);
    }

    #[test]
    fn counting_rules_agree() {
        for n in 1..200 {
            for outside in 0..=n {
                assert_eq!(
                    excluded_by_count(outside, n, 33),
                    !consistent_by_containment(n - outside, n, 33)
                );
            }
        }
        assert!(!excluded_by_count(33, 100, 33));
        assert!(excluded_by_count(34, 100, 33));
    }

    #[test]
    fn self_comparison_is_consistent() {
        let a = nm_grid(250, 450);
        let g: Vec<f64> = a.iter().map(|x| 1e-30 / x.powi(4)).collect();
        let mut s = flat_series(&a, 0.0, 1e-9);
        s.mean = g.clone();
        let th = TheoryCurve::new("truth", a.clone(), g);
        let r = compare(&s, &[th], &TheoryErrorConfig::default(), None, 33).unwrap();
        let m = r.model("truth").unwrap();
        assert!(m.windows.iter().all(|w| w.verdict == Verdict::Consistent && w.outside == 0));
        assert!(m.all_windows(250.0 * NM, 450.0 * NM, Verdict::Consistent));
    }

    #[test]
    fn offset_theory_is_excluded() {
        let a = nm_grid(250, 450);
        let s = flat_series(&a, 1.0, 0.1);
        let th = TheoryCurve::new("shifted", a.clone(), vec![0.5; a.len()]);
        let r = compare(&s, &[th], &TheoryErrorConfig::new(0.0, 0.0), None, 33).unwrap();
        assert!(r.models[0].windows.iter().all(|w| w.verdict == Verdict::Excluded));
    }

    #[test]
    fn band_combines_errors() {
        let a = nm_grid(250, 260);
        let g: Vec<f64> = a.iter().map(|x| x / NM).collect();
        let s = flat_series(&a, 0.0, 3.0);
        let th = TheoryCurve::new("q", a.clone(), g);
        let cfg = TheoryErrorConfig::new(0.0, 4.0 * NM);
        let r = compare(&s, &[th], &cfg, None, 33).unwrap();
        // F'' = 1/nm everywhere, so σ_th = 4 and σ_d = 5.
        for sd in &r.models[0].sigma_d {
            assert!((sd - 5.0).abs() < 1e-6, "{sd}");
        }
    }

    #[test]
    fn misaligned_theory() {
        let a = nm_grid(250, 260);
        let s = flat_series(&a, 0.0, 1.0);
        let th = TheoryCurve::new("x", nm_grid(251, 261), vec![0.0; 11]);
        assert!(matches!(
            compare(&s, &[th], &TheoryErrorConfig::default(), None, 33),
            Err(AnalysisError::Alignment(_))
        ));
    }
}
