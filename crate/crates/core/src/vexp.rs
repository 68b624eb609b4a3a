//! Virtual experiment: synthetic frequency-shift grids for the four
//! measurement campaigns.
//!
//! Each (voltage, repetition) channel is a sweep of the plate position. Raw
//! samples are taken every `sample_step` of relative separation, perturbed by
//! Gaussian noise and linearly interpolated onto the `grid_step` grid, as an
//! experimenter would do with interferometer-timed samples.
//!
//! Randomness: one ChaCha8 generator seeded from the run seed, with the
//! stream number `voltage_index * repetitions + repetition`. Streams are
//! independent, so channels can be generated in parallel and the result does
//! not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::electrostatics::{gamma_coefficient, ElectrostaticsError, LinearityGuard};
use crate::force::{BetaTable, ForceError, Geometry, GradientModel};
use crate::lifshitz::Reflector;
use crate::optics::{PermittivityModel, Response};
use crate::units::NM;

/// Tolerance of the truth Lifshitz and γ evaluations.
pub const TRUTH_TOL: f64 = 1e-10;
const GAMMA_TOL: f64 = 1e-13;
const INDEX_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VexpError {
    #[error("invalid campaign: {0}")]
    InvalidSpec(String),
    #[error("no measurement set {0}; presets are 1 to 4")]
    UnknownSet(u32),
    #[error(transparent)]
    Force(#[from] ForceError),
    #[error(transparent)]
    Electrostatics(#[from] ElectrostaticsError),
}

/// Residual potential law `V0(a) = K a + b`, with `a` the absolute separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct V0Law {
    /// K in V/m.
    pub slope: f64,
    /// b in V.
    pub intercept: f64,
}

impl V0Law {
    pub fn new(slope: f64, intercept: f64) -> Self {
        Self { slope, intercept }
    }

    /// From K in mV/nm and b in mV.
    pub fn from_mv_per_nm(k: f64, b: f64) -> Self {
        Self {
            slope: k * 1e-3 / NM,
            intercept: b * 1e-3,
        }
    }

    pub fn eval(&self, separation: f64) -> f64 {
        self.slope * separation + self.intercept
    }

    pub fn slope_mv_per_nm(&self) -> f64 {
        self.slope * NM * 1e3
    }

    pub fn intercept_mv(&self) -> f64 {
        self.intercept * 1e3
    }
}

/// Ten varied voltages at the midpoints of ten equal parts of `varied`,
/// followed by eleven channels at `fixed`.
pub fn measurement_voltage_list(varied: (f64, f64), fixed: f64) -> Vec<f64> {
    let (lo, hi) = varied;
    let step = (hi - lo) / 10.0;
    (0..10)
        .map(|i| lo + (i as f64 + 0.5) * step)
        .chain(std::iter::repeat_n(fixed, 11))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    pub label: String,
    /// Applied voltages in V, one channel each.
    pub voltages: Vec<f64>,
    pub z0_true: f64,
    pub c_true: f64,
    pub v0_law: V0Law,
    pub truth: Response,
    pub amplitude: f64,
    /// Standard deviation of the per-sample frequency noise, rad/s.
    pub freq_systematic: f64,
    pub repetitions: usize,
    pub sample_step: f64,
    pub grid_step: f64,
    /// Absolute separation range covered by the grid.
    pub separation_range: (f64, f64),
    /// Error in the absolute separation, used for the theory error budget.
    pub separation_error: f64,
    /// Separation drift per channel in m, accumulated in acquisition order.
    pub drift_per_channel: f64,
}

impl CampaignSpec {
    /// Parameters of measurement set 1 to 4 with the given truth model.
    pub fn measurement_set(set: u32, truth: Response) -> Result<Self, VexpError> {
        // (z0 nm, C 1e5 s/kg, K mV/nm, b mV, varied V, fixed V, noise rad/s, A nm)
        let (z0, c, k, b, varied, fixed, noise, amp) = match set {
            1 => (248.0, 6.485, -8.48e-5, 10.7, (-0.04, 0.06), 0.01, 5.5e-2, 10.0),
            2 => (240.2, 6.422, -5.33e-4, 2.32, (-0.049, 0.051), 0.001, 5.5e-2, 10.0),
            3 => (234.4, 6.529, 2.16e-4, 2.00, (-0.049, 0.051), 0.001, 5.5e-2, 10.0),
            4 => (571.9, 6.342, 3.23e-4, 7.50, (-0.092, 0.108), 0.008, 4.0e-2, 20.0),
            other => return Err(VexpError::UnknownSet(other)),
        };
        let (range, dz) = if set == 4 {
            ((600.0 * NM, 1300.0 * NM), 1.1 * NM)
        } else {
            ((250.0 * NM, 955.0 * NM), 0.5 * NM)
        };
        let spec = Self {
            label: format!("set{set}"),
            voltages: measurement_voltage_list(varied, fixed),
            z0_true: z0 * NM,
            c_true: c * 1e5,
            v0_law: V0Law::from_mv_per_nm(k, b),
            truth,
            amplitude: amp * NM,
            freq_systematic: noise,
            repetitions: 1,
            sample_step: 0.14 * NM,
            grid_step: 1.0 * NM,
            separation_range: range,
            separation_error: dz,
            drift_per_channel: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), VexpError> {
        let bad = |m: String| Err(VexpError::InvalidSpec(m));
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if self.voltages.len() != 21 {
            return bad(format!("expected 21 applied voltages, got {}", self.voltages.len()));
        }
        if self.voltages.iter().any(|v| !v.is_finite()) {
            return bad("applied voltages must be finite".into());
        }
        if self.repetitions < 1 {
            return bad("repetitions must be at least 1".into());
        }
        if !pos(self.z0_true) || !pos(self.c_true) || !pos(self.amplitude) {
            return bad("z0, C and the amplitude must be positive".into());
        }
        if !pos(self.sample_step) || !pos(self.grid_step) || self.sample_step > self.grid_step * (1.0 + INDEX_SLACK) {
            return bad("need 0 < sample_step <= grid_step".into());
        }
        if !(self.freq_systematic.is_finite() && self.freq_systematic >= 0.0) {
            return bad("frequency noise must be non-negative".into());
        }
        if !(self.separation_error.is_finite() && self.separation_error >= 0.0) {
            return bad("separation error must be non-negative".into());
        }
        if !self.drift_per_channel.is_finite() || !self.v0_law.slope.is_finite() || !self.v0_law.intercept.is_finite() {
            return bad("drift and V0 law must be finite".into());
        }
        let (lo, hi) = self.separation_range;
        if !(pos(lo) && hi > lo && hi.is_finite()) {
            return bad("separation range must be increasing and positive".into());
        }
        if self.grid_offsets().count() < 2 {
            return bad("separation range holds fewer than two grid points".into());
        }
        Ok(())
    }

    /// Grid points in units of `grid_step`, relative to the closest approach:
    /// every integer `j` with `z0 + j g` inside the separation range.
    pub fn grid_offsets(&self) -> std::ops::RangeInclusive<i64> {
        let (lo, hi) = self.separation_range;
        let g = self.grid_step;
        let first = ((lo - self.z0_true) / g - INDEX_SLACK).ceil() as i64;
        let last = ((hi - self.z0_true) / g + INDEX_SLACK).floor() as i64;
        first..=last
    }

    pub fn grid_z_rel(&self) -> Vec<f64> {
        self.grid_offsets().map(|j| j as f64 * self.grid_step).collect()
    }

    /// Raw sample positions (relative) covering the grid.
    pub fn raw_z_rel(&self) -> Vec<f64> {
        let offsets = self.grid_offsets();
        let start = *offsets.start() as f64 * self.grid_step;
        let end = *offsets.end() as f64 * self.grid_step;
        let n = ((end - start) / self.sample_step - INDEX_SLACK).ceil() as usize;
        (0..=n).map(|k| start + k as f64 * self.sample_step).collect()
    }

    pub fn channel_count(&self) -> usize {
        self.voltages.len() * self.repetitions
    }

    /// Acquisition-order index of a channel, also its random stream number.
    pub fn stream_index(&self, voltage_index: usize, repetition: usize) -> u64 {
        (voltage_index * self.repetitions + repetition) as u64
    }

    fn drift(&self, voltage_index: usize, repetition: usize) -> f64 {
        self.drift_per_channel * self.stream_index(voltage_index, repetition) as f64
    }
}

/// Geometry of the experiment with the `a/R` limit the set needs:
/// set 4 reaches 1.3 μm, which is a/R ≈ 0.03.
pub fn measurement_geometry(set: u32) -> Geometry {
    let g = Geometry::experiment();
    if set == 4 {
        g.with_max_ratio(0.03)
    } else {
        g
    }
}

/// One (voltage, repetition) sweep on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub voltage_index: usize,
    pub repetition: usize,
    pub voltage: f64,
    /// Δω in rad/s at each grid point.
    pub shifts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementGrid {
    /// Relative separations z in m; the absolute one is `z0 + z`.
    pub z_rel: Vec<f64>,
    pub channels: Vec<Channel>,
    pub spec: CampaignSpec,
    pub seed: u64,
    pub radius: f64,
}

impl MeasurementGrid {
    /// True absolute separations, known only to the generator.
    pub fn true_separations(&self) -> Vec<f64> {
        self.z_rel.iter().map(|z| self.spec.z0_true + z).collect()
    }

    pub fn voltages(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.voltage).collect()
    }

    pub fn validate(&self) -> Result<(), VexpError> {
        let bad = |m: &str| Err(VexpError::InvalidSpec(m.to_string()));
        if self.z_rel.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("separations must increase strictly");
        }
        for c in &self.channels {
            if c.shifts.len() != self.z_rel.len() {
                return bad("channel length differs from the separation grid");
            }
            if c.shifts.iter().any(|x| !x.is_finite()) {
                return bad("non-finite frequency shift");
            }
        }
        Ok(())
    }
}

/// Noiseless gradient and γ at the raw positions of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSamples {
    pub separations: Vec<f64>,
    pub gradient: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// Truth F' and γ shared by every channel; per-channel when drift is on.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignTruth {
    pub raw_z_rel: Vec<f64>,
    samples: Vec<TruthSamples>,
}

impl CampaignTruth {
    /// Evaluates the truth model of `spec` (default gold optics).
    pub fn compute(spec: &CampaignSpec, geometry: &Geometry) -> Result<Self, VexpError> {
        let model = PermittivityModel::gold(spec.truth);
        Self::compute_with(spec, geometry, &model)
    }

    pub fn compute_with<R: Reflector + ?Sized>(spec: &CampaignSpec, geometry: &Geometry, reflector: &R) -> Result<Self, VexpError> {
        spec.validate()?;
        geometry.validate()?;
        let raw = spec.raw_z_rel();
        let offsets: Vec<f64> = if spec.drift_per_channel == 0.0 {
            vec![0.0]
        } else {
            (0..spec.voltages.len())
                .flat_map(|v| (0..spec.repetitions).map(move |r| (v, r)))
                .map(|(v, r)| spec.drift(v, r))
                .collect()
        };
        let mut a_max = 0.0f64;
        for off in &offsets {
            for z in [raw[0], raw[raw.len() - 1]] {
                let a = spec.z0_true + z + off;
                geometry.check_domain(a)?;
                a_max = a_max.max(a);
            }
        }
        LinearityGuard::default().check(spec.amplitude, spec.z0_true + spec.grid_z_rel()[0])?;
        let model = GradientModel::new(reflector, *geometry, BetaTable::zero(), TRUTH_TOL, a_max)?;
        let samples = offsets
            .iter()
            .map(|off| {
                let separations: Vec<f64> = raw.iter().map(|z| spec.z0_true + z + off).collect();
                let gradient = model.sweep(&separations)?.into_iter().map(|g| g.gradient).collect();
                let gamma = separations
                    .par_iter()
                    .map(|&a| gamma_coefficient(a, geometry.radius, spec.c_true, GAMMA_TOL))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(TruthSamples {
                    separations,
                    gradient,
                    gamma,
                })
            })
            .collect::<Result<Vec<_>, VexpError>>()?;
        Ok(Self {
            raw_z_rel: raw,
            samples,
        })
    }

    fn for_stream(&self, stream: usize) -> &TruthSamples {
        if self.samples.len() == 1 {
            &self.samples[0]
        } else {
            &self.samples[stream]
        }
    }

    /// Truth F' interpolated onto the grid the same way as the data, for
    /// the drift-free channel.
    pub fn gradient_on_grid(&self, spec: &CampaignSpec) -> Vec<f64> {
        interpolate_to_grid(spec, &self.samples[0].gradient)
    }
}

/// Linear interpolation of raw samples onto the grid. Grid points that fall
/// on a raw sample reproduce it exactly.
pub fn interpolate_to_grid(spec: &CampaignSpec, raw: &[f64]) -> Vec<f64> {
    let offsets = spec.grid_offsets();
    let first = *offsets.start();
    offsets
        .map(|j| {
            let x = (j - first) as f64 * spec.grid_step / spec.sample_step;
            let mut k = (x + INDEX_SLACK).floor() as usize;
            let mut t = x - k as f64;
            if t.abs() < INDEX_SLACK {
                t = 0.0;
            }
            if k + 1 >= raw.len() {
                k = raw.len() - 1;
                t = 0.0;
            }
            if t == 0.0 {
                raw[k]
            } else {
                raw[k] * (1.0 - t) + raw[k + 1] * t
            }
        })
        .collect()
}

/// Generates every channel of a campaign from precomputed truth.
pub fn synthesize_with_truth(spec: &CampaignSpec, truth: &CampaignTruth, radius: f64, seed: u64) -> Result<MeasurementGrid, VexpError> {
    spec.validate()?;
    if truth.raw_z_rel != spec.raw_z_rel() {
        return Err(VexpError::InvalidSpec("truth samples were computed for a different grid".into()));
    }
    let noise = Normal::new(0.0, spec.freq_systematic).map_err(|e| VexpError::InvalidSpec(e.to_string()))?;
    let jobs: Vec<(usize, usize)> = (0..spec.voltages.len())
        .flat_map(|v| (0..spec.repetitions).map(move |r| (v, r)))
        .collect();
    let channels = jobs
        .par_iter()
        .map(|&(v, r)| {
            let stream = spec.stream_index(v, r);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let t = truth.for_stream(stream as usize);
            let voltage = spec.voltages[v];
            let raw: Vec<f64> = t
                .separations
                .iter()
                .zip(&t.gradient)
                .zip(&t.gamma)
                .map(|((&a, &fp), &g)| {
                    let dv = voltage - spec.v0_law.eval(a);
                    let clean = -g * dv * dv - spec.c_true * fp;
                    if spec.freq_systematic > 0.0 {
                        clean + noise.sample(&mut rng)
                    } else {
                        clean
                    }
                })
                .collect();
            Channel {
                voltage_index: v,
                repetition: r,
                voltage,
                shifts: interpolate_to_grid(spec, &raw),
            }
        })
        .collect();
    Ok(MeasurementGrid {
        z_rel: spec.grid_z_rel(),
        channels,
        spec: spec.clone(),
        seed,
        radius,
    })
}

/// Synthetic campaign with the default gold optics of the truth model.
pub fn synthesize_campaign(spec: &CampaignSpec, geometry: &Geometry, seed: u64) -> Result<MeasurementGrid, VexpError> {
    let truth = CampaignTruth::compute(spec, geometry)?;
    synthesize_with_truth(spec, &truth, geometry.radius, seed)
}
