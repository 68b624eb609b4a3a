use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use casimir_core::analysis::{
    average_sets, calibrate, common_grid, compare, default_windows, extract_gradients, resample, ComparisonReport,
    GradientSeries, TheoryCurve, TheoryErrorConfig,
};
use casimir_core::force::pressure_to_gradient_sweep;
use casimir_core::io::{
    parse_calibration, parse_grid, parse_theory, write_calibration, write_comparison, write_gradients, write_grid,
    write_theory, Header,
};
use casimir_core::units::NM;
use casimir_core::vexp::{synthesize_with_truth, CampaignSpec, CampaignTruth, TRUTH_TOL};

use crate::config::RunConfig;

/// Seed of one campaign set, distinct for every set under the same run seed.
pub fn set_seed(run_seed: u64, set: u32) -> u64 {
    // splitmix64 of an odd-stride offset; both steps are bijective.
    let mut z = run_seed.wrapping_add((set as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `set1_grid.txt` -> `set1_calibration.txt`, otherwise `<stem>_calibration.txt`.
pub fn sibling(grid: &Path, kind: &str) -> PathBuf {
    let stem = grid.file_stem().and_then(|s| s.to_str()).unwrap_or("campaign");
    let base = stem.strip_suffix("_grid").unwrap_or(stem);
    grid.with_file_name(format!("{base}_{kind}.txt"))
}

/// A validated config plus where it came from; runs the individual stages.
#[derive(Debug, Clone)]
pub struct Runner {
    pub config: RunConfig,
    pub config_path: Option<PathBuf>,
    /// Relative material tables resolve against this directory.
    pub base_dir: PathBuf,
    /// Echo progress and verdicts on stdout.
    pub verbose: bool,
}

impl Runner {
    pub fn new(config: RunConfig, config_path: Option<PathBuf>) -> Self {
        let base_dir = config_path
            .as_deref()
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Self {
            config,
            config_path,
            base_dir,
            verbose: false,
        }
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.run.out
    }

    fn say(&self, line: impl AsRef<str>) {
        if self.verbose {
            println!("{}", line.as_ref());
        }
    }

    /// Command line that reproduces one stage.
    fn command_line(&self, stage: &str, inputs: &[PathBuf]) -> String {
        let run = &self.config.run;
        let mut cmd = format!("casimir {stage}");
        if let Some(p) = &self.config_path {
            let _ = write!(cmd, " --config {}", p.display());
        }
        let _ = write!(
            cmd,
            " --seed {} --out {} --model {} --tol {:e}",
            run.seed,
            run.out.display(),
            run.model.label(),
            run.tol
        );
        for i in inputs {
            let _ = write!(cmd, " {}", i.display());
        }
        cmd
    }

    fn manifest(&self, stage: &str, inputs: &[PathBuf]) -> Header {
        let mut h: Header = vec![
            ("program".into(), format!("casimir {}", env!("CARGO_PKG_VERSION"))),
            ("command".into(), self.command_line(stage, inputs)),
        ];
        h.extend(self.config.manifest_entries());
        h
    }

    fn write(&self, name: &Path, text: &str) -> Result<PathBuf> {
        if let Some(dir) = name.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(name, text).with_context(|| format!("writing {}", name.display()))?;
        self.say(format!("wrote {}", name.display()));
        Ok(name.to_path_buf())
    }

    fn default_grids(&self) -> Vec<PathBuf> {
        self.config
            .campaign
            .sets
            .iter()
            .map(|s| self.out_dir().join(format!("set{s}_grid.txt")))
            .collect()
    }

    /// Gradient sweeps of the selected models over the `[theory]` grid.
    pub fn theory(&self) -> Result<PathBuf> {
        let cfg = &self.config;
        let grid = cfg.theory_grid();
        let geometry = cfg.geometry(None);
        let beta = cfg.beta_table()?;
        let mut columns = Vec::new();
        for response in cfg.run.model.responses() {
            let model = cfg
                .material
                .build(response, &self.base_dir)
                .with_context(|| format!("building the {} permittivity", response.label()))?;
            let sweep = pressure_to_gradient_sweep(&model, &geometry, &beta, &grid, cfg.run.tol)
                .with_context(|| format!("{} gradient sweep", response.label()))?;
            columns.push((response.label().to_string(), sweep.iter().map(|g| g.gradient).collect::<Vec<_>>()));
        }
        let mut manifest = self.manifest("theory", &[]);
        manifest.push(("rows".into(), grid.len().to_string()));
        manifest.push(("max_ratio".into(), format!("{:e}", geometry.max_ratio)));
        manifest.push(("beta_source".into(), beta.source().to_string()));
        self.write(&self.out_dir().join("theory.txt"), &write_theory(&grid, &columns, &manifest))
    }

    fn campaign_spec(&self, set: u32) -> Result<CampaignSpec> {
        let c = &self.config.campaign;
        let mut spec = CampaignSpec::measurement_set(set, c.truth)?;
        if let Some(r) = c.repetitions {
            spec.repetitions = r;
        }
        if let Some(n) = c.noise_rad_per_s {
            spec.freq_systematic = n;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// One synthetic measurement grid per configured set.
    pub fn synth(&self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for &set in &self.config.campaign.sets {
            let spec = self.campaign_spec(set)?;
            let geometry = self.config.geometry(Some(set));
            let model = self.config.material.build(spec.truth, &self.base_dir)?;
            let truth = CampaignTruth::compute_with(&spec, &geometry, &model)
                .with_context(|| format!("true gradient for set {set}"))?;
            let seed = set_seed(self.config.run.seed, set);
            let grid = synthesize_with_truth(&spec, &truth, geometry.radius, seed)?;
            let mut manifest = self.manifest("synth", &[]);
            manifest.push(("set".into(), set.to_string()));
            manifest.push(("set_seed".into(), seed.to_string()));
            manifest.push(("truth_tol".into(), format!("{TRUTH_TOL:e}")));
            let path = self.out_dir().join(format!("set{set}_grid.txt"));
            written.push(self.write(&path, &write_grid(&grid, &manifest))?);
        }
        Ok(written)
    }

    /// Calibration of each grid file (default: the configured sets).
    pub fn calibrate(&self, inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
        let grids = if inputs.is_empty() { self.default_grids() } else { inputs.to_vec() };
        let mut written = Vec::new();
        for path in &grids {
            let grid = read_grid(path)?;
            let cal = calibrate(&grid).with_context(|| format!("calibrating {}", path.display()))?;
            self.say(format!(
                "{}: C = {:.4e} s/kg, z0 = {:.2} nm, V0 = {:.2} mV",
                path.display(),
                cal.fit.c,
                cal.fit.z0 / NM,
                cal.v0_line.mean * 1e3
            ));
            let mut manifest = self.manifest("calibrate", inputs);
            manifest.push(("input".into(), path.display().to_string()));
            written.push(self.write(&sibling(path, "calibration"), &write_calibration(&cal, &manifest))?);
        }
        Ok(written)
    }

    /// Gradients from calibrated grids, averaged and compared with theory.
    pub fn compare(&self, inputs: &[PathBuf], theory: Option<&Path>) -> Result<ComparisonReport> {
        let cfg = &self.config;
        let grids = if inputs.is_empty() { self.default_grids() } else { inputs.to_vec() };
        let mut series = Vec::new();
        for path in &grids {
            let grid = read_grid(path)?;
            let cal_path = sibling(path, "calibration");
            let text = fs::read_to_string(&cal_path)
                .with_context(|| format!("reading {} (run `casimir calibrate` first)", cal_path.display()))?;
            let cal = parse_calibration(&text).with_context(|| format!("parsing {}", cal_path.display()))?;
            let s = extract_gradients(&grid, &cal).with_context(|| format!("gradients from {}", path.display()))?;
            let mut manifest = self.manifest("compare", inputs);
            manifest.push(("input".into(), path.display().to_string()));
            self.write(&sibling(path, "gradients"), &write_gradients(&s, &manifest))?;
            series.push(s);
        }
        let shared = common_grid(&series, cfg.analysis.grid_step_nm * NM)?;
        let resampled = series.iter().map(|s| resample(s, &shared)).collect::<Result<Vec<_>, _>>()?;
        let mut mean = average_sets(&resampled)?;
        mean.label = "mean".into();

        let theory_path = theory.map(Path::to_path_buf).unwrap_or_else(|| self.out_dir().join("theory.txt"));
        let text = fs::read_to_string(&theory_path)
            .with_context(|| format!("reading {} (run `casimir theory` first)", theory_path.display()))?;
        let (theory_a, columns) = parse_theory(&text).with_context(|| format!("parsing {}", theory_path.display()))?;
        let (mean, rows) = restrict(&mean, &theory_a)?;
        let mut manifest = self.manifest("compare", inputs);
        manifest.push(("theory".into(), theory_path.display().to_string()));
        manifest.push(("sets".into(), grids.len().to_string()));
        self.write(&self.out_dir().join("gradients.txt"), &write_gradients(&mean, &manifest))?;

        let mut curves = Vec::new();
        for response in cfg.run.model.responses() {
            let (_, col) = columns
                .iter()
                .find(|(n, _)| n == response.label())
                .ok_or_else(|| anyhow!("{} has no {} column", theory_path.display(), response.label()))?;
            let values = rows.iter().map(|&r| col[r]).collect();
            curves.push(TheoryCurve::new(response.label(), mean.separations.clone(), values));
        }
        let errors = TheoryErrorConfig::new(cfg.compare.optical_fraction, cfg.compare.separation_error_nm * NM);
        let windows: Vec<(f64, f64)> = match &cfg.compare.windows_nm {
            Some(w) => w.iter().map(|[lo, hi]| (lo * NM, hi * NM)).collect(),
            None => default_windows(&mean.separations, cfg.compare.window_nm * NM),
        };
        let report = compare(&mean, &curves, &errors, Some(&windows), cfg.compare.exclusion_percent)?;
        self.write(&self.out_dir().join("comparison.txt"), &write_comparison(&report, &manifest))?;
        for m in &report.models {
            for w in &m.windows {
                self.say(format!(
                    "{:>6} {:>6.0}-{:<6.0} nm: {:>3}/{:<3} outside -> {}",
                    m.label,
                    w.lo / NM,
                    w.hi / NM,
                    w.outside,
                    w.points,
                    w.verdict
                ));
            }
        }
        Ok(report)
    }

    /// Every stage in order, each reading what the previous one wrote,
    /// followed by a run manifest listing the parameters, seeds and files.
    pub fn pipeline(&self) -> Result<ComparisonReport> {
        let mut files = vec![self.theory()?];
        files.extend(self.synth()?);
        files.extend(self.calibrate(&[])?);
        let report = self.compare(&[], None)?;
        for s in &self.config.campaign.sets {
            files.push(self.out_dir().join(format!("set{s}_gradients.txt")));
        }
        files.push(self.out_dir().join("gradients.txt"));
        files.push(self.out_dir().join("comparison.txt"));

        let mut text = String::from("# run manifest\n");
        for (k, v) in self.manifest("pipeline", &[]) {
            let _ = writeln!(text, "# {k} = {v}");
        }
        for &set in &self.config.campaign.sets {
            let _ = writeln!(text, "# set{set}_seed = {}", set_seed(self.config.run.seed, set));
        }
        let _ = writeln!(text, "# truth_tol = {TRUTH_TOL:e}");
        let _ = writeln!(text, "# columns: file");
        for f in &files {
            let _ = writeln!(text, "{}", f.display());
        }
        for m in &report.models {
            for w in &m.windows {
                let _ = writeln!(
                    text,
                    "# verdict {} {:.0}..{:.0} nm = {} ({}/{})",
                    m.label,
                    w.lo / NM,
                    w.hi / NM,
                    w.verdict,
                    w.outside,
                    w.points
                );
            }
        }
        self.write(&self.out_dir().join("manifest.txt"), &text)?;
        Ok(report)
    }
}

fn read_grid(path: &Path) -> Result<casimir_core::vexp::MeasurementGrid> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_grid(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Points of `series` that also lie on the theory grid, with the matching
/// theory rows.
fn restrict(series: &GradientSeries, theory_a: &[f64]) -> Result<(GradientSeries, Vec<usize>)> {
    let tol = 1e-6 * NM;
    let mut keep = Vec::new();
    let mut rows = Vec::new();
    for (i, a) in series.separations.iter().enumerate() {
        let j = theory_a.partition_point(|t| *t < a - tol);
        if j < theory_a.len() && (theory_a[j] - a).abs() <= tol {
            keep.push(i);
            rows.push(j);
        }
    }
    if keep.len() < 3 {
        bail!(
            "the theory grid shares only {} points with the measured separations {:.0}..{:.0} nm",
            keep.len(),
            series.separations.first().copied().unwrap_or(0.0) / NM,
            series.separations.last().copied().unwrap_or(0.0) / NM
        );
    }
    let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let out = GradientSeries {
        label: series.label.clone(),
        separations: pick(&series.separations),
        mean: pick(&series.mean),
        random: pick(&series.random),
        systematic: pick(&series.systematic),
        total: pick(&series.total),
        counts: keep.iter().map(|&i| series.counts[i]).collect(),
        warnings: series.warnings.clone(),
    };
    Ok((out, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_seeds_differ_between_sets() {
        for run in [0, 1, 42, u64::MAX] {
            let seeds: Vec<u64> = (1..=4).map(|s| set_seed(run, s)).collect();
            for i in 0..4 {
                for j in i + 1..4 {
                    assert_ne!(seeds[i], seeds[j]);
                }
            }
        }
        assert_eq!(set_seed(7, 2), set_seed(7, 2));
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("o/set2_grid.txt"), "calibration"), Path::new("o/set2_calibration.txt"));
        assert_eq!(sibling(Path::new("run.dat"), "gradients"), Path::new("run_gradients.txt"));
    }

    #[test]
    fn restrict_keeps_shared_points() {
        let a: Vec<f64> = (250..260).map(|k| k as f64 * NM).collect();
        let s = GradientSeries {
            label: "x".into(),
            separations: a.clone(),
            mean: vec![1.0; 10],
            random: vec![0.1; 10],
            systematic: vec![0.1; 10],
            total: vec![0.2; 10],
            counts: vec![1; 10],
            warnings: vec![],
        };
        let theory: Vec<f64> = (253..400).map(|k| k as f64 * NM).collect();
        let (r, rows) = restrict(&s, &theory).unwrap();
        assert_eq!(r.len(), 7);
        assert_eq!(rows[0], 0);
        assert!(restrict(&s, &theory[7..]).is_err());
    }
}
