//! CSV formats for curves, support functions and diagnostics. Numbers are
//! written with 17 significant digits.

use std::io::{Read, Write};

use crate::curve::{DiscreteCurve, P2};
use crate::error::{Error, Result};
use crate::surface::{SphereGrid, SupportSurface};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(r)
}

/// Numeric rows with exactly `width` fields; a non-numeric first row is
/// taken as a header and skipped.
fn numeric_rows<R: Read>(r: R, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for (line, rec) in reader(r).records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) if v.len() == width => out.push(v),
            Ok(v) => return Err(Error::Parse(format!("row {}: expected {width} fields, got {}", line + 1, v.len()))),
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", line + 1))),
        }
    }
    Ok(out)
}

pub fn write_curve_csv<W: Write>(w: W, curve: &DiscreteCurve) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["x", "y"]).map_err(csv_err)?;
    for p in curve.points() {
        wr.write_record([fmt_f64(p.x), fmt_f64(p.y)]).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(r: R) -> Result<DiscreteCurve> {
    let rows = numeric_rows(r, 2)?;
    DiscreteCurve::new(rows.iter().map(|v| P2::new(v[0], v[1])).collect())
}

pub fn write_surface_csv<W: Write>(w: W, s: &SupportSurface) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["lat_index", "lon_index", "sigma"]).map_err(csv_err)?;
    let n_lon = s.grid().n_lon;
    for (k, v) in s.sigma().iter().enumerate() {
        wr.write_record([(k / n_lon).to_string(), (k % n_lon).to_string(), fmt_f64(*v)]).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Grid size is inferred from the largest indices; every node must appear
/// exactly once.
pub fn read_surface_csv<R: Read>(r: R) -> Result<SupportSurface> {
    let rows = numeric_rows(r, 3)?;
    let idx = |x: f64| -> Result<usize> {
        if x >= 0.0 && x.fract() == 0.0 {
            Ok(x as usize)
        } else {
            Err(Error::Parse(format!("invalid grid index {x}")))
        }
    };
    let mut n_lat = 0;
    let mut n_lon = 0;
    for v in &rows {
        n_lat = n_lat.max(idx(v[0])? + 1);
        n_lon = n_lon.max(idx(v[1])? + 1);
    }
    let grid = SphereGrid::new(n_lat, n_lon)?;
    let mut sigma = vec![f64::NAN; grid.len()];
    for v in &rows {
        let k = idx(v[0])? * n_lon + idx(v[1])?;
        if !sigma[k].is_nan() {
            return Err(Error::Parse(format!("duplicate node ({}, {})", v[0], v[1])));
        }
        sigma[k] = v[2];
    }
    if let Some(k) = sigma.iter().position(|v| v.is_nan()) {
        return Err(Error::Parse(format!("missing node ({}, {})", k / n_lon, k % n_lon)));
    }
    SupportSurface::new(grid, sigma)
}

/// Header plus rows of preformatted fields.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header).map_err(csv_err)?;
    for r in rows {
        wr.write_record(&r).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}
