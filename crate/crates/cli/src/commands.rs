use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use casimir_core::calibration::analyze;
use casimir_core::force_law::{ForceInterpolant, ForceLaw, IdealMetal, LifshitzLaw, NoForce};
use casimir_core::io::{read_height_map, read_sweeps, write_sweeps};
use casimir_core::lifshitz::force_curve;
use casimir_core::mtb_sim::simulate_dataset;
use casimir_core::roughness::{corrected_force, histogram_from_heightmap, RoughnessProfile};

use crate::config::{ForceLawSpec, RunConfig, ValidationError};
use crate::svg::{log_log_plot, Series};

/// Points per decade of the dense grid splined under roughness corrections.
const ROUGH_GRID_PER_DECADE: f64 = 24.0;
const ROUGH_GRID_MIN_POINTS: usize = 48;
/// Points of the tabulated Lifshitz law used by `synth`.
const SYNTH_GRID_POINTS: usize = 64;

fn invalid(path: impl Into<String>, message: impl Into<String>) -> anyhow::Error {
    ValidationError {
        path: path.into(),
        message: message.into(),
    }
    .into()
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).with_context(|| format!("cannot write {}", path.display()))
}

fn csv_writer(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    Ok(csv::Writer::from_writer(sink(out)?))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// One computed force curve.
pub struct CurveRows {
    pub label: String,
    /// `(d, force, rel_err)`.
    pub rows: Vec<(f64, f64, f64)>,
}

fn load_profile(path: &Path, json_path: &str) -> Result<RoughnessProfile<f64>> {
    let f = File::open(path).map_err(|e| invalid(json_path, format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(f))
        .map_err(|e| invalid(json_path, format!("{}: {e}", path.display())))
}

/// Roughness profiles from the command line, else from the config.
pub fn roughness_profiles(
    cfg: &RunConfig,
    flag: Option<&(PathBuf, PathBuf)>,
) -> Result<Option<(RoughnessProfile<f64>, RoughnessProfile<f64>)>> {
    if let Some((s, p)) = flag {
        return Ok(Some((
            load_profile(s, "--roughness")?,
            load_profile(p, "--roughness")?,
        )));
    }
    match cfg.force.as_ref().and_then(|f| f.roughness.as_ref()) {
        Some(r) => Ok(Some((
            load_profile(&cfg.resolve(&r.sphere), "$.force.roughness.sphere")?,
            load_profile(&cfg.resolve(&r.plate), "$.force.roughness.plate")?,
        ))),
        None => Ok(None),
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

pub fn compute_curves(
    cfg: &RunConfig,
    labels: Option<&[String]>,
    rough: Option<&(RoughnessProfile<f64>, RoughnessProfile<f64>)>,
) -> Result<Vec<CurveRows>> {
    let section = cfg.force_section()?;
    let ds = section.separations.values("$.force.separations")?;
    if !(section.radius_m > 0.0) {
        return Err(invalid("$.force.radius_m", "radius must be > 0"));
    }
    let gap = cfg.gap()?;
    let mut out = Vec::new();
    for curve in &section.curves {
        if labels.is_some_and(|l| !l.contains(&curve.label)) {
            continue;
        }
        let sphere = cfg.stack(&curve.sphere)?;
        let plate = cfg.stack(&curve.plate)?;
        log::info!(
            "computing curve {:?} at {} separations",
            curve.label,
            ds.len()
        );
        let rows = match rough {
            None => force_curve(
                &sphere,
                &plate,
                &gap,
                section.radius_m,
                &ds,
                &cfg.quadrature,
            )
            .with_context(|| format!("curve {:?}", curve.label))?
            .into_iter()
            .map(|(d, r)| (d, r.force, r.rel_err))
            .collect(),
            Some((sp, pl)) => {
                let first = |p: &RoughnessProfile<f64>| p.bins()[0].delta;
                let lo = ds[0] - (sp.max_delta() + pl.max_delta());
                let hi = ds[ds.len() - 1] - (first(sp) + first(pl));
                if !(lo > 0.0) {
                    return Err(invalid(
                        "$.force.separations[0]",
                        format!(
                            "roughness makes the surfaces touch: {:e} m minus the largest displacements ({:e} m, {:e} m) is not positive",
                            ds[0],
                            sp.max_delta(),
                            pl.max_delta()
                        ),
                    ));
                }
                let decades = (hi / lo).log10();
                let n =
                    ((ROUGH_GRID_PER_DECADE * decades).ceil() as usize).max(ROUGH_GRID_MIN_POINTS);
                let grid = log_grid(lo, hi, n);
                let base = force_curve(
                    &sphere,
                    &plate,
                    &gap,
                    section.radius_m,
                    &grid,
                    &cfg.quadrature,
                )
                .with_context(|| format!("curve {:?}", curve.label))?;
                let worst = base.iter().map(|(_, r)| r.rel_err).fold(0.0, f64::max);
                let spline =
                    ForceInterpolant::new(base.into_iter().map(|(d, r)| (d, r.force)).collect())?;
                ds.iter()
                    .map(|&d| Ok((d, corrected_force(&spline, sp, pl, d)?, worst)))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        out.push(CurveRows {
            label: curve.label.clone(),
            rows,
        });
    }
    Ok(out)
}

pub fn cmd_force(
    cfg: &RunConfig,
    roughness: Option<&(PathBuf, PathBuf)>,
    out: Option<&Path>,
    svg: Option<&Path>,
) -> Result<()> {
    let rough = roughness_profiles(cfg, roughness)?;
    let curves = compute_curves(cfg, None, rough.as_ref())?;
    let mut w = csv_writer(out)?;
    w.write_record(["curve", "d_m", "force_N", "abs_force_pN", "rel_err"])?;
    for c in &curves {
        for &(d, f, e) in &c.rows {
            w.write_record([c.label.clone(), num(d), num(f), num(f.abs() * 1e12), num(e)])?;
        }
    }
    w.flush()?;
    if let Some(path) = svg {
        let series: Vec<Series> = curves
            .iter()
            .map(|c| Series {
                label: &c.label,
                points: c.rows.iter().map(|&(d, f, _)| (d, f.abs())).collect(),
            })
            .collect();
        write_svg(
            path,
            &log_log_plot("Casimir force", "d (m)", "|F| (N)", &series),
        )?;
    }
    Ok(())
}

pub fn cmd_compare(
    a: &RunConfig,
    b: Option<&RunConfig>,
    curve_a: Option<&str>,
    curve_b: Option<&str>,
    out: Option<&Path>,
    svg: Option<&Path>,
) -> Result<()> {
    let pick =
        |cfg: &RunConfig, want: Option<&str>, fallback: usize, flag: &str| -> Result<String> {
            let curves = &cfg.force_section()?.curves;
            match want {
                Some(l) if curves.iter().any(|c| c.label == l) => Ok(l.to_string()),
                Some(l) => Err(invalid(flag, format!("no curve labelled {l:?}"))),
                None => curves
                    .get(fallback)
                    .map(|c| c.label.clone())
                    .ok_or_else(|| {
                        invalid(
                            "$.force.curves",
                            format!("compare needs curve #{} here; pass {flag}", fallback + 1),
                        )
                    }),
            }
        };
    let (cfg_b, fallback_b) = match b {
        Some(b) => (b, 0),
        None => (a, 1),
    };
    let la = pick(a, curve_a, 0, "--curve-a")?;
    let lb = pick(cfg_b, curve_b, fallback_b, "--curve-b")?;
    let ga = a
        .force_section()?
        .separations
        .values("$.force.separations")?;
    let gb = cfg_b
        .force_section()?
        .separations
        .values("$.force.separations")?;
    if ga != gb {
        return Err(invalid(
            "$.force.separations",
            format!(
                "mismatched grids: {} vs {} separations or different values",
                ga.len(),
                gb.len()
            ),
        ));
    }
    let ra = compute_curves(
        a,
        Some(std::slice::from_ref(&la)),
        roughness_profiles(a, None)?.as_ref(),
    )?;
    let rb = compute_curves(
        cfg_b,
        Some(std::slice::from_ref(&lb)),
        roughness_profiles(cfg_b, None)?.as_ref(),
    )?;
    let (ra, rb) = (&ra[0], &rb[0]);
    let mut w = csv_writer(out)?;
    w.write_record(["d_m", "force_a_N", "force_b_N", "ratio"])?;
    let mut ratio = Vec::new();
    for (&(d, fa, _), &(_, fb, _)) in ra.rows.iter().zip(&rb.rows) {
        let r = fa / fb;
        ratio.push((d, r));
        w.write_record([num(d), num(fa), num(fb), num(r)])?;
    }
    w.flush()?;
    if let Some(path) = svg {
        let series = [Series {
            label: "ratio",
            points: ratio,
        }];
        let title = format!("{la} / {lb}");
        write_svg(path, &log_log_plot(&title, "d (m)", "F_a / F_b", &series))?;
    }
    Ok(())
}

pub fn cmd_kk(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let section = cfg
        .kk
        .as_ref()
        .ok_or_else(|| invalid("$.kk", "section is required for this command"))?;
    let model = cfg.material(&section.material)?;
    let xs = section.xi_rad_s.values("$.kk.xi_rad_s")?;
    let mut w = csv_writer(out)?;
    w.write_record(["xi_rad_s", "eps"])?;
    for xi in xs {
        w.write_record([num(xi), num(model.eps_at_imaginary(xi)?)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_roughness(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let s = cfg
        .roughness
        .as_ref()
        .ok_or_else(|| invalid("$.roughness", "section is required for this command"))?;
    let path = cfg.resolve(&s.height_map);
    let f = File::open(&path)
        .map_err(|e| invalid("$.roughness.height_map", format!("{}: {e}", path.display())))?;
    let map = read_height_map(BufReader::new(f), s.width, s.pitch_m)
        .map_err(|e| invalid("$.roughness.height_map", format!("{}: {e}", path.display())))?;
    let profile = histogram_from_heightmap(&map, s.n_bins)
        .map_err(|e| invalid("$.roughness.n_bins", e.to_string()))?;
    log::info!(
        "{} x {} map, rms displacement {:e} m, {} bins",
        map.rows(),
        map.width(),
        profile.variance().sqrt(),
        profile.bins().len()
    );
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, &profile)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let s = cfg
        .synth
        .as_ref()
        .ok_or_else(|| invalid("$.synth", "section is required for this command"))?;
    s.params
        .validate()
        .map_err(|e| invalid("$.synth.params", e.to_string()))?;
    let mut plan = s.plan.clone();
    if let Some(seed) = seed {
        plan.seed = seed;
    }
    let law: Box<dyn ForceLaw<f64>> = match &s.force_law {
        ForceLawSpec::None => Box::new(NoForce),
        ForceLawSpec::IdealMetal => Box::new(IdealMetal {
            radius: s.params.radius,
        }),
        ForceLawSpec::Lifshitz { curve } => {
            let section = cfg.force_section()?;
            let spec = section
                .curves
                .iter()
                .find(|c| &c.label == curve)
                .ok_or_else(|| {
                    invalid(
                        "$.synth.force_law.curve",
                        format!("no curve labelled {curve:?}"),
                    )
                })?;
            let ds: Vec<f64> = plan
                .d_pz_values
                .iter()
                .map(|z| s.params.d0_true - z)
                .collect();
            let lo = ds.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ds.iter().copied().fold(0.0, f64::max);
            if !(lo > 0.0) {
                return Err(invalid(
                    "$.synth.plan.d_pz_values_m",
                    "every d_pz must be below d0_true",
                ));
            }
            let law = LifshitzLaw {
                sphere: cfg.stack(&spec.sphere)?,
                plate: cfg.stack(&spec.plate)?,
                gap: cfg.gap()?,
                radius: s.params.radius,
                quad: cfg.quadrature,
            };
            log::info!("tabulating curve {curve:?} for the simulator");
            Box::new(law.tabulate(&log_grid(0.5 * lo, 1.5 * hi, SYNTH_GRID_POINTS))?)
        }
    };
    let data = simulate_dataset(&s.params, &plan, law.as_ref())?;
    let mut w = sink(out)?;
    write_sweeps(&mut w, &data)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_analyze(
    cfg: &RunConfig,
    input: Option<&Path>,
    out: Option<&Path>,
    forces_csv: Option<&Path>,
    svg: Option<&Path>,
) -> Result<()> {
    let s = cfg
        .analyze
        .as_ref()
        .ok_or_else(|| invalid("$.analyze", "section is required for this command"))?;
    let path = match input {
        Some(p) => p.to_path_buf(),
        None => cfg.resolve(&s.input),
    };
    let f = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
    let sweeps = read_sweeps::<f64>(BufReader::new(f))
        .map_err(|e| invalid("$.analyze.input", format!("{}: {e}", path.display())))?;
    if sweeps.is_empty() {
        bail!(invalid("$.analyze.input", "no sweeps found"));
    }
    let result = analyze(&sweeps, s.radius_m)?;
    for w in &result.warnings {
        log::warn!("{w}");
    }
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, &result)?;
    writeln!(w)?;
    w.flush()?;
    if let Some(p) = forces_csv {
        let mut w = csv_writer(Some(p))?;
        w.write_record(["d_m", "abs_force_N", "std_err_N"])?;
        for f in &result.forces {
            w.write_record([num(f.d), num(f.f_c), num(f.std_err)])?;
        }
        w.flush()?;
    }
    if let Some(p) = svg {
        let series = [Series {
            label: "extracted",
            points: result.forces.iter().map(|f| (f.d, f.f_c)).collect(),
        }];
        write_svg(
            p,
            &log_log_plot("Extracted Casimir force", "d (m)", "|F| (N)", &series),
        )?;
    }
    Ok(())
}
