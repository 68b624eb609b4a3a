//! Plain-text artifacts: '#'-prefixed `key = value` headers followed by
//! whitespace-separated columns. Floats are written in Rust's shortest
//! round-trip exponent form, so a file read back reproduces the values bit
//! for bit.
//!
//! External units: separations in nm, force gradients in μN/m, voltages in
//! V (residual-potential summaries in mV), frequency shifts in rad/s.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::analysis::{CalibrationFit, CalibrationResult, ComparisonReport, GradientSeries, ParabolaFit, V0Line};
use crate::optics::Response;
use crate::units::{MICRO_NEWTON_PER_METER, NM};
use crate::vexp::{CampaignSpec, Channel, MeasurementGrid, V0Law};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing header key `{0}`")]
    Missing(String),
}

/// Ordered `key = value` header lines.
pub type Header = Vec<(String, String)>;

fn f(x: f64) -> String {
    format!("{x:e}")
}

fn write_header(out: &mut String, title: &str, manifest: &[(String, String)], extra: &[(String, String)]) {
    let _ = writeln!(out, "# {title}");
    for (k, v) in manifest.iter().chain(extra) {
        let _ = writeln!(out, "# {k} = {v}");
    }
}

/// Header keys of a file, in order, with their line numbers.
pub fn read_header(text: &str) -> BTreeMap<String, (usize, String)> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let Some(body) = line.strip_prefix('#') else {
            continue;
        };
        if let Some((k, v)) = body.split_once(" = ") {
            map.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
    }
    map
}

struct Fields<'a> {
    map: &'a BTreeMap<String, (usize, String)>,
}

impl Fields<'_> {
    fn raw(&self, key: &str) -> Result<(usize, &str), FormatError> {
        self.map
            .get(key)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| FormatError::Missing(key.to_string()))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T, FormatError> {
        let (line, v) = self.raw(key)?;
        v.parse().map_err(|_| FormatError::Parse {
            line,
            message: format!("`{key}` is not a number: {v}"),
        })
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, FormatError> {
        let (line, v) = self.raw(key)?;
        v.split(',')
            .map(|x| {
                x.trim().parse().map_err(|_| FormatError::Parse {
                    line,
                    message: format!("`{key}` has a non-numeric entry: {x}"),
                })
            })
            .collect()
    }
}

fn parse_row(line_no: usize, line: &str, expect: usize) -> Result<Vec<f64>, FormatError> {
    let cols: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| FormatError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
    if cols.len() < expect {
        return Err(FormatError::Parse {
            line: line_no,
            message: format!("expected {expect} columns, found {}", cols.len()),
        });
    }
    Ok(cols)
}

fn spec_header(spec: &CampaignSpec, seed: u64, radius: f64) -> Header {
    let list = spec.voltages.iter().map(|v| f(*v)).collect::<Vec<_>>().join(",");
    vec![
        ("label".into(), spec.label.clone()),
        ("seed".into(), seed.to_string()),
        ("radius_m".into(), f(radius)),
        ("voltages_V".into(), list),
        ("z0_true_m".into(), f(spec.z0_true)),
        ("c_true_s_per_kg".into(), f(spec.c_true)),
        ("v0_slope_V_per_m".into(), f(spec.v0_law.slope)),
        ("v0_intercept_V".into(), f(spec.v0_law.intercept)),
        ("truth".into(), spec.truth.label().into()),
        ("amplitude_m".into(), f(spec.amplitude)),
        ("freq_systematic_rad_per_s".into(), f(spec.freq_systematic)),
        ("repetitions".into(), spec.repetitions.to_string()),
        ("sample_step_m".into(), f(spec.sample_step)),
        ("grid_step_m".into(), f(spec.grid_step)),
        ("range_lo_m".into(), f(spec.separation_range.0)),
        ("range_hi_m".into(), f(spec.separation_range.1)),
        ("separation_error_m".into(), f(spec.separation_error)),
        ("drift_per_channel_m".into(), f(spec.drift_per_channel)),
        (
            "noise_model".into(),
            "gaussian per raw sample, standard deviation freq_systematic".into(),
        ),
    ]
}

/// One block per channel: `z_rel_nm delta_omega_rad_per_s`.
pub fn write_grid(grid: &MeasurementGrid, manifest: &[(String, String)]) -> String {
    let mut out = String::new();
    write_header(&mut out, "measurement grid", manifest, &spec_header(&grid.spec, grid.seed, grid.radius));
    let _ = writeln!(out, "# columns: z_rel_nm delta_omega_rad_per_s");
    for ch in &grid.channels {
        let _ = writeln!(
            out,
            "# block voltage_index={} repetition={} voltage_V={}",
            ch.voltage_index,
            ch.repetition,
            f(ch.voltage)
        );
        for (z, w) in grid.z_rel.iter().zip(&ch.shifts) {
            let _ = writeln!(out, "{} {}", f(z / NM), f(*w));
        }
    }
    out
}

fn parse_response(line: usize, v: &str) -> Result<Response, FormatError> {
    match v {
        "drude" => Ok(Response::Drude),
        "plasma" => Ok(Response::Plasma),
        other => Err(FormatError::Parse {
            line,
            message: format!("unknown truth model `{other}`"),
        }),
    }
}

pub fn parse_grid(text: &str) -> Result<MeasurementGrid, FormatError> {
    let map = read_header(text);
    let h = Fields { map: &map };
    let (truth_line, truth) = h.raw("truth")?;
    let spec = CampaignSpec {
        label: h.raw("label")?.1.to_string(),
        voltages: h.list("voltages_V")?,
        z0_true: h.num("z0_true_m")?,
        c_true: h.num("c_true_s_per_kg")?,
        v0_law: V0Law::new(h.num("v0_slope_V_per_m")?, h.num("v0_intercept_V")?),
        truth: parse_response(truth_line, truth)?,
        amplitude: h.num("amplitude_m")?,
        freq_systematic: h.num("freq_systematic_rad_per_s")?,
        repetitions: h.num("repetitions")?,
        sample_step: h.num("sample_step_m")?,
        grid_step: h.num("grid_step_m")?,
        separation_range: (h.num("range_lo_m")?, h.num("range_hi_m")?),
        separation_error: h.num("separation_error_m")?,
        drift_per_channel: h.num("drift_per_channel_m")?,
    };
    // (channel, its separations, line of its header)
    let mut blocks: Vec<(Channel, Vec<f64>, usize)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(rest) = line.strip_prefix("# block ") {
            let (mut vi, mut rep, mut volt) = (None, None, None);
            for tok in rest.split_whitespace() {
                let bad = || FormatError::Parse {
                    line: line_no,
                    message: format!("bad block field `{tok}`"),
                };
                let (k, v) = tok.split_once('=').ok_or_else(bad)?;
                match k {
                    "voltage_index" => vi = Some(v.parse::<usize>().map_err(|_| bad())?),
                    "repetition" => rep = Some(v.parse::<usize>().map_err(|_| bad())?),
                    "voltage_V" => volt = Some(v.parse::<f64>().map_err(|_| bad())?),
                    _ => return Err(bad()),
                }
            }
            let missing = |what: &str| FormatError::Parse {
                line: line_no,
                message: format!("block lacks {what}"),
            };
            let channel = Channel {
                voltage_index: vi.ok_or_else(|| missing("voltage_index"))?,
                repetition: rep.ok_or_else(|| missing("repetition"))?,
                voltage: volt.ok_or_else(|| missing("voltage_V"))?,
                shifts: Vec::new(),
            };
            blocks.push((channel, Vec::new(), line_no));
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let Some((ch, z, _)) = blocks.last_mut() else {
            return Err(FormatError::Parse {
                line: line_no,
                message: "data before the first block header".into(),
            });
        };
        let cols = parse_row(line_no, line, 2)?;
        z.push(cols[0] * NM);
        ch.shifts.push(cols[1]);
    }
    let z_rel = blocks.first().map(|b| b.1.clone()).unwrap_or_default();
    let mut channels = Vec::with_capacity(blocks.len());
    for (ch, z, line) in blocks {
        if z != z_rel {
            return Err(FormatError::Parse {
                line,
                message: "block separations differ from the first block".into(),
            });
        }
        channels.push(ch);
    }
    let end = text.lines().count();
    let grid = MeasurementGrid {
        z_rel,
        channels,
        spec,
        seed: h.num("seed")?,
        radius: h.num("radius_m")?,
    };
    grid.validate().map_err(|e| FormatError::Parse {
        line: end,
        message: e.to_string(),
    })?;
    Ok(grid)
}

/// Calibration summary in the header; one row per separation with the
/// parabola results (the V0 against a and γ against a data).
pub fn write_calibration(c: &CalibrationResult, manifest: &[(String, String)]) -> String {
    let mut out = String::new();
    let fit = &c.fit;
    let line = &c.v0_line;
    let mut extra: Header = vec![
        ("radius_m".into(), f(c.radius)),
        ("C_s_per_kg".into(), f(fit.c)),
        ("sigma_C_s_per_kg".into(), f(fit.sigma_c)),
        ("z0_m".into(), f(fit.z0)),
        ("sigma_z0_m".into(), f(fit.sigma_z0)),
        ("correlation".into(), f(fit.correlation)),
        ("chi2_red".into(), f(fit.chi2_red)),
        ("iterations".into(), fit.iterations.to_string()),
        ("K_V_per_m".into(), f(line.slope)),
        ("sigma_K_V_per_m".into(), f(line.sigma_slope)),
        ("b_V".into(), f(line.intercept)),
        ("sigma_b_V".into(), f(line.sigma_intercept)),
        ("V0_mean_V".into(), f(line.mean)),
        ("K_mV_per_nm".into(), format!("{:.4e}", line.slope * NM * 1e3)),
        ("b_mV".into(), format!("{:.4}", line.intercept * 1e3)),
        ("V0_mean_mV".into(), format!("{:.4}", line.mean * 1e3)),
    ];
    for (i, w) in fit.windows.iter().enumerate() {
        extra.push((
            format!("window{i}"),
            format!(
                "z_nm={:.1}..{:.1} points={} C_s_per_kg={} sigma_C={} z0_nm={:.4}",
                w.z_lo / NM,
                w.z_hi / NM,
                w.points,
                f(w.c),
                f(w.sigma_c),
                w.z0 / NM
            ),
        ));
    }
    write_header(&mut out, "calibration", manifest, &extra);
    let _ = writeln!(
        out,
        "# columns: z_rel_nm a_nm V0_V sigma_V0_V gamma_rad_per_s_V2 sigma_gamma apex_rad_per_s sigma_apex center_V"
    );
    for p in &c.parabolas {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {}",
            f(p.z_rel / NM),
            f(c.separation(p.z_rel) / NM),
            f(p.v0),
            f(p.sigma_v0),
            f(p.gamma),
            f(p.sigma_gamma),
            f(p.apex),
            f(p.sigma_apex),
            f(p.center)
        );
    }
    out
}

pub fn parse_calibration(text: &str) -> Result<CalibrationResult, FormatError> {
    let map = read_header(text);
    let h = Fields { map: &map };
    let fit = CalibrationFit {
        c: h.num("C_s_per_kg")?,
        sigma_c: h.num("sigma_C_s_per_kg")?,
        z0: h.num("z0_m")?,
        sigma_z0: h.num("sigma_z0_m")?,
        correlation: h.num("correlation")?,
        chi2_red: h.num("chi2_red")?,
        iterations: h.num("iterations")?,
        windows: Vec::new(),
    };
    let v0_line = V0Line {
        slope: h.num("K_V_per_m")?,
        sigma_slope: h.num("sigma_K_V_per_m")?,
        intercept: h.num("b_V")?,
        sigma_intercept: h.num("sigma_b_V")?,
        mean: h.num("V0_mean_V")?,
    };
    let mut parabolas = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let c = parse_row(i + 1, line, 9)?;
        parabolas.push(ParabolaFit {
            z_rel: c[0] * NM,
            v0: c[2],
            sigma_v0: c[3],
            gamma: c[4],
            sigma_gamma: c[5],
            apex: c[6],
            sigma_apex: c[7],
            center: c[8],
            coefficients: [f64::NAN; 3],
            covariance: [[f64::NAN; 3]; 3],
            residual_rms: f64::NAN,
        });
    }
    Ok(CalibrationResult {
        radius: h.num("radius_m")?,
        parabolas,
        v0_line,
        fit,
    })
}

/// Gradient sweep table: `a_nm` then one column per model in μN/m.
pub fn write_theory(separations: &[f64], columns: &[(String, Vec<f64>)], manifest: &[(String, String)]) -> String {
    let mut out = String::new();
    write_header(&mut out, "theoretical force gradient", manifest, &[]);
    let names: Vec<String> = columns.iter().map(|(n, _)| format!("F'_{n}_uN_per_m")).collect();
    let _ = writeln!(out, "# columns: a_nm {}", names.join(" "));
    for (i, a) in separations.iter().enumerate() {
        let mut row = f(a / NM);
        for (_, col) in columns {
            row.push(' ');
            row.push_str(&f(col[i] / MICRO_NEWTON_PER_METER));
        }
        let _ = writeln!(out, "{row}");
    }
    out
}

/// Reads a [`write_theory`] table back to SI units: separations and one
/// named gradient column per model.
pub fn parse_theory(text: &str) -> Result<(Vec<f64>, Vec<(String, Vec<f64>)>), FormatError> {
    let mut names: Option<Vec<String>> = None;
    let mut separations = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(body) = line.strip_prefix('#') {
            if let Some(cols) = body.trim().strip_prefix("columns:") {
                let parsed: Vec<String> = cols
                    .split_whitespace()
                    .skip(1)
                    .map(|c| {
                        c.strip_prefix("F'_")
                            .and_then(|c| c.strip_suffix("_uN_per_m"))
                            .map(str::to_string)
                            .ok_or_else(|| FormatError::Parse {
                                line: line_no,
                                message: format!("unexpected column `{c}`"),
                            })
                    })
                    .collect::<Result<_, _>>()?;
                columns = vec![Vec::new(); parsed.len()];
                names = Some(parsed);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some(names) = &names else {
            return Err(FormatError::Parse {
                line: line_no,
                message: "data before the `# columns:` line".into(),
            });
        };
        let row = parse_row(line_no, line, names.len() + 1)?;
        separations.push(row[0] * NM);
        for (col, v) in columns.iter_mut().zip(&row[1..]) {
            col.push(v * MICRO_NEWTON_PER_METER);
        }
    }
    let names = names.ok_or_else(|| FormatError::Missing("columns".into()))?;
    Ok((separations, names.into_iter().zip(columns).collect()))
}

/// Mean gradient with its error budget, μN/m.
pub fn write_gradients(series: &GradientSeries, manifest: &[(String, String)]) -> String {
    let mut out = String::new();
    write_header(&mut out, "measured force gradient", manifest, &[("label".into(), series.label.clone())]);
    for w in &series.warnings {
        let _ = writeln!(out, "# warning: {w}");
    }
    let _ = writeln!(out, "# columns: a_nm F'_uN_per_m random systematic total count");
    let u = MICRO_NEWTON_PER_METER;
    for i in 0..series.len() {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            f(series.separations[i] / NM),
            f(series.mean[i] / u),
            f(series.random[i] / u),
            f(series.systematic[i] / u),
            f(series.total[i] / u),
            series.counts[i]
        );
    }
    out
}

/// Differences and band per model, with window verdicts in the header.
pub fn write_comparison(report: &ComparisonReport, manifest: &[(String, String)]) -> String {
    let mut out = String::new();
    let mut extra: Header = vec![("exclusion_percent".into(), report.exclusion_percent.to_string())];
    for m in &report.models {
        for (i, w) in m.windows.iter().enumerate() {
            extra.push((
                format!("window.{}.{i}", m.label),
                format!(
                    "lo_nm={:.3} hi_nm={:.3} points={} outside={} fraction_outside={:.4} verdict={}",
                    w.lo / NM,
                    w.hi / NM,
                    w.points,
                    w.outside,
                    w.fraction_outside,
                    w.verdict
                ),
            ));
        }
    }
    write_header(&mut out, "comparison with theory", manifest, &extra);
    let mut cols = vec!["a_nm".to_string(), "F'_expt_uN_per_m".into(), "sigma_expt".into()];
    for m in &report.models {
        for c in ["theory", "d", "sigma_theory", "sigma_d", "band_lo", "band_hi", "outside"] {
            cols.push(format!("{}_{c}", m.label));
        }
    }
    let _ = writeln!(out, "# columns: {}", cols.join(" "));
    let u = MICRO_NEWTON_PER_METER;
    for i in 0..report.separations.len() {
        let mut row = format!(
            "{} {} {}",
            f(report.separations[i] / NM),
            f(report.experiment[i] / u),
            f(report.experiment_total[i] / u)
        );
        for m in &report.models {
            let sd = m.sigma_d[i] / u;
            let _ = write!(
                row,
                " {} {} {} {} {} {} {}",
                f(m.theory[i] / u),
                f(m.difference[i] / u),
                f(m.sigma_theory[i] / u),
                f(sd),
                f(-sd),
                f(sd),
                u8::from(m.outside[i])
            );
        }
        let _ = writeln!(out, "{row}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{CalibrationFit, V0Line};

    fn tiny_grid() -> MeasurementGrid {
        let mut spec = CampaignSpec::measurement_set(2, Response::Drude).unwrap();
        spec.separation_range = (250.0 * NM, 253.0 * NM);
        let z_rel = spec.grid_z_rel();
        let channels = spec
            .voltages
            .iter()
            .enumerate()
            .map(|(i, &v)| Channel {
                voltage_index: i,
                repetition: 0,
                voltage: v,
                shifts: z_rel.iter().map(|z| -1.0 / 3.0 - z * 1e7 * i as f64).collect(),
            })
            .collect();
        MeasurementGrid {
            z_rel,
            channels,
            spec,
            seed: 42,
            radius: 43.466e-6,
        }
    }

    #[test]
    fn grid_round_trip() {
        let g = tiny_grid();
        let manifest = vec![("command".to_string(), "synth".to_string())];
        let text = write_grid(&g, &manifest);
        let back = parse_grid(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(write_grid(&back, &manifest), text);
    }

    #[test]
    fn theory_table_reads_back_and_rewrites_identically() {
        let a: Vec<f64> = (250..=253).map(|k| k as f64 * NM).collect();
        let cols = vec![
            ("drude".to_string(), vec![-1.1e-3, -2.0e-3 / 3.0, -5e-4, -4e-4]),
            ("plasma".to_string(), vec![-1.2e-3, -7e-4, -5.5e-4, -4.5e-4]),
        ];
        let text = write_theory(&a, &cols, &[]);
        let (back_a, back_cols) = parse_theory(&text).unwrap();
        assert_eq!(back_a, a);
        assert_eq!(back_cols[1].0, "plasma");
        for (x, y) in back_cols[0].1.iter().zip(&cols[0].1) {
            assert!((x / y - 1.0).abs() < 1e-15);
        }
        assert_eq!(write_theory(&back_a, &back_cols, &[]), text);
    }

    #[test]
    fn grid_errors_carry_line_numbers() {
        let g = tiny_grid();
        let text = write_grid(&g, &[]).replacen("\n1e1 ", "\nx1e1 ", 1);
        match parse_grid(&text) {
            Err(FormatError::Parse { line, .. }) => assert!(line > 20),
            other => panic!("{other:?}"),
        }
        let text = write_grid(&g, &[]).replace("# repetitions = 1\n", "");
        assert_eq!(parse_grid(&text), Err(FormatError::Missing("repetitions".into())));
    }

    #[test]
    fn calibration_round_trip() {
        let p = ParabolaFit {
            z_rel: 2.0 * NM,
            v0: 0.0107,
            sigma_v0: 1e-4,
            gamma: 1.2e4,
            sigma_gamma: 10.0,
            apex: -38.0,
            sigma_apex: 0.01,
            center: 0.01,
            coefficients: [0.0; 3],
            covariance: [[0.0; 3]; 3],
            residual_rms: 0.05,
        };
        let c = CalibrationResult {
            radius: 43.466e-6,
            parabolas: vec![p],
            v0_line: V0Line {
                slope: -84.8,
                sigma_slope: 1.0,
                intercept: 0.0107,
                sigma_intercept: 1e-5,
                mean: 0.01065,
            },
            fit: CalibrationFit {
                c: 6.485e5,
                sigma_c: 300.0,
                z0: 248e-9,
                sigma_z0: 1e-10,
                correlation: 0.9,
                chi2_red: 1.01,
                iterations: 5,
                windows: Vec::new(),
            },
        };
        let back = parse_calibration(&write_calibration(&c, &[])).unwrap();
        assert_eq!(back.fit, c.fit);
        assert_eq!(back.v0_line, c.v0_line);
        assert_eq!(back.parabolas[0].gamma, p.gamma);
        assert_eq!(back.gamma(2.0 * NM).unwrap(), c.gamma(2.0 * NM).unwrap());
    }

    #[test]
    fn theory_table_layout() {
        let a = vec![250.0 * NM, 251.0 * NM];
        let t = write_theory(&a, &[("drude".into(), vec![5e-5, 4.9e-5])], &[("seed".into(), "1".into())]);
        let rows: Vec<&str> = t.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 2);
        let cols: Vec<f64> = rows[0].split_whitespace().map(|x| x.parse().unwrap()).collect();
        assert!((cols[0] - 250.0).abs() < 1e-9 && (cols[1] - 50.0).abs() < 1e-9);
        assert!(t.contains("# seed = 1"));
    }
}
