//! CSV readers and writers for optical tables, height maps and sweeps.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::calibration::{SweepPoint, SweepRecord};
use crate::dielectric::{Extrapolation, OpticalTable};
use crate::error::{Error, Result};
use crate::roughness::HeightMap;
use crate::scalar::Real;

pub const OPTICAL_HEADER: [&str; 2] = ["omega_rad_s", "im_eps"];
pub const SWEEP_HEADER: [&str; 4] = ["sweep_id", "d_pz_m", "v_bias_V", "a_au"];

fn parse<F: Real>(field: &str, line: u64, column: &str) -> Result<F> {
    field.trim().parse::<f64>().map(F::lit).map_err(|_| {
        Error::Parse(format!(
            "line {line}, column {column}: cannot parse {field:?} as a number"
        ))
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(csv_err)?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Parse(format!(
            "expected header {:?}, found {:?}",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

/// Reads `omega_rad_s,im_eps` rows into a table.
pub fn read_optical_table<F: Real>(
    input: impl Read,
    extrapolation: Option<Extrapolation<F>>,
) -> Result<OpticalTable<F>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    check_header(&mut reader, &OPTICAL_HEADER)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((
            parse(&rec[0], line, OPTICAL_HEADER[0])?,
            parse(&rec[1], line, OPTICAL_HEADER[1])?,
        ));
    }
    match extrapolation {
        Some(e) => OpticalTable::with_extrapolation(rows, e),
        None => OpticalTable::new(rows),
    }
}

/// Reads a height map, in meters.
///
/// With `width = None` every line is one grid row (comma separated, no
/// header). With `width = Some(w)` the file is a single column of heights
/// filled row-major into rows of `w`.
pub fn read_height_map<F: Real>(
    input: impl Read,
    width: Option<usize>,
    pitch: F,
) -> Result<HeightMap<F>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut heights = Vec::new();
    let mut grid_width = None;
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = rec.iter().filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            continue;
        }
        match width {
            Some(_) if fields.len() != 1 => {
                return Err(Error::Parse(format!(
                    "line {line}: single-column height map has {} fields",
                    fields.len()
                )))
            }
            None => match grid_width {
                None => grid_width = Some(fields.len()),
                Some(w) if w != fields.len() => {
                    return Err(Error::Parse(format!(
                        "line {line}: row has {} values, expected {w}",
                        fields.len()
                    )))
                }
                _ => {}
            },
            _ => {}
        }
        for (c, f) in fields.iter().enumerate() {
            heights.push(parse(f, line, &c.to_string())?);
        }
    }
    let w = width.or(grid_width).unwrap_or(0);
    HeightMap::new(heights, w, pitch)
}

/// Reads `sweep_id,d_pz_m,v_bias_V,a_au` rows, grouped by sweep id in order
/// of first appearance.
pub fn read_sweeps<F: Real>(input: impl Read) -> Result<Vec<SweepRecord<F>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    check_header(&mut reader, &SWEEP_HEADER)?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, (F, u64, Vec<SweepPoint<F>>)> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec[0].trim().to_string();
        let d_pz: F = parse(&rec[1], line, SWEEP_HEADER[1])?;
        let point = SweepPoint {
            v_bias: parse(&rec[2], line, SWEEP_HEADER[2])?,
            a: parse(&rec[3], line, SWEEP_HEADER[3])?,
        };
        match groups.get_mut(&id) {
            Some((d, first, pts)) => {
                if *d != d_pz {
                    return Err(Error::Parse(format!(
                        "line {line}: sweep {id} changes d_pz from {d:e} (line {first}) to {d_pz:e}"
                    )));
                }
                pts.push(point);
            }
            None => {
                order.push(id.clone());
                groups.insert(id, (d_pz, line, vec![point]));
            }
        }
    }
    order
        .into_iter()
        .map(|id| {
            let (d_pz, _, pts) = groups.remove(&id).expect("grouped above");
            SweepRecord::new(d_pz, pts).map_err(|e| Error::Parse(format!("sweep {id}: {e}")))
        })
        .collect()
}

/// Writes sweeps with ids `0, 1, …` in the schema [`read_sweeps`] accepts.
pub fn write_sweeps<F: Real>(output: impl Write, sweeps: &[SweepRecord<F>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for (id, s) in sweeps.iter().enumerate() {
        for p in &s.points {
            w.write_record([
                id.to_string(),
                format!("{:e}", s.d_pz),
                format!("{:e}", p.v_bias),
                format!("{:e}", p.a),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}
