//! CSV series and JSON report I/O.
//!
//! Series files have a `timestamp,mw` header. Timestamps are either plain
//! hour indices or ISO-8601 date-times; the step is inferred from the first
//! two rows and must stay uniform. Row numbers in errors count data rows
//! from 1, header excluded.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::LoadSeries;

const ISO_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];
const ISO_OUTPUT: &str = "%Y-%m-%dT%H:%M:%S%.f";

fn parse_iso(text: &str) -> Option<NaiveDateTime> {
    ISO_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(text, f).ok())
        .or_else(|| {
            DateTime::parse_from_rfc3339(text)
                .ok()
                .map(|d| d.naive_utc())
        })
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map(|p| p.record() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::format(row, format!("{kind:?}")),
    }
}

/// Reads a two-column CSV with the given header, returning the raw text of
/// column one and the parsed column two.
fn read_columns<R: Read>(reader: R, header: [&str; 2]) -> Result<Vec<(String, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let found = rdr.headers().map_err(csv_error)?.clone();
    let matches = found.len() == 2
        && found
            .iter()
            .zip(header)
            .all(|(a, b)| a.trim_start_matches('\u{feff}').eq_ignore_ascii_case(b));
    if !matches {
        return Err(Error::format(
            None,
            format!("expected header '{},{}'", header[0], header[1]),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let row = i + 1;
        let value: f64 = record[1].parse().map_err(|_| {
            Error::format(
                Some(row),
                format!("cannot parse '{}' as a number", &record[1]),
            )
        })?;
        if !value.is_finite() {
            return Err(Error::format(Some(row), "non-finite value"));
        }
        rows.push((record[0].to_string(), value));
    }
    if rows.is_empty() {
        return Err(Error::format(None, "no data rows"));
    }
    Ok(rows)
}

pub fn read_series_from<R: Read>(reader: R) -> Result<LoadSeries> {
    let rows = read_columns(reader, ["timestamp", "mw"])?;
    let values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    if rows[0].0.parse::<f64>().is_ok() {
        let times = rows
            .iter()
            .enumerate()
            .map(|(i, (t, _))| {
                t.parse::<f64>().map_err(|_| {
                    Error::format(Some(i + 1), format!("expected an hour index, got '{t}'"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        return LoadSeries::new(times, values);
    }
    let stamps = rows
        .iter()
        .enumerate()
        .map(|(i, (t, _))| {
            parse_iso(t)
                .ok_or_else(|| Error::format(Some(i + 1), format!("cannot parse timestamp '{t}'")))
        })
        .collect::<Result<Vec<NaiveDateTime>>>()?;
    let origin = stamps[0];
    let times = stamps
        .iter()
        .map(|s| (*s - origin).num_milliseconds() as f64 / 3.6e6)
        .collect();
    Ok(LoadSeries::new(times, values)?.with_origin(origin))
}

pub fn read_series(path: &Path) -> Result<LoadSeries> {
    read_series_from(File::open(path)?)
}

pub fn write_series_to<W: Write>(writer: W, series: &LoadSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "mw"]).map_err(csv_error)?;
    for (k, v) in series.values().iter().enumerate() {
        let stamp = match series.timestamp(k) {
            Some(ts) => ts.format(ISO_OUTPUT).to_string(),
            None => series.times()[k].to_string(),
        };
        w.write_record([stamp, v.to_string()]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series(path: &Path, series: &LoadSeries) -> Result<()> {
    write_series_to(BufWriter::new(File::create(path)?), series)
}

/// Right-hand side samples from a `t,f` CSV.
pub fn read_rhs_from<R: Read>(reader: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = read_columns(reader, ["t", "f"])?;
    let mut times = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (i, (t, f)) in rows.into_iter().enumerate() {
        let t: f64 = t
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| Error::format(Some(i + 1), format!("cannot parse '{t}' as a time")))?;
        if i > 0 && !(t > times[i - 1]) {
            return Err(Error::format(
                Some(i + 1),
                "times must be strictly increasing",
            ));
        }
        times.push(t);
        values.push(f);
    }
    if times[0] != 0.0 || values[0] != 0.0 {
        return Err(Error::format(Some(1), "first row must be t = 0, f = 0"));
    }
    if times.len() < 2 {
        return Err(Error::format(
            None,
            "right-hand side needs at least two rows",
        ));
    }
    Ok((times, values))
}

pub fn read_rhs(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    read_rhs_from(File::open(path)?)
}

/// Writes `t,x` rows.
pub fn write_solution_to<W: Write>(writer: W, times: &[f64], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "x"]).map_err(csv_error)?;
    for (t, x) in times.iter().zip(values) {
        w.write_record([t.to_string(), x.to_string()])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_solution(path: &Path, times: &[f64], values: &[f64]) -> Result<()> {
    write_solution_to(BufWriter::new(File::create(path)?), times, values)
}

/// Pretty JSON with a trailing newline. Field order follows the struct
/// definitions, so equal inputs give byte-identical output.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value))?;
    Ok(())
}
