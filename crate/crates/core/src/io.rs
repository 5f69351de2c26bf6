//! CSV files for traces, profiles and fields.
//!
//! Numbers are written with 17 significant digits so that reading a file
//! back reproduces every value bit for bit.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::field::{BoundaryTrace, WaveField};
use crate::model::CoefficientProfile;

pub const TRACE_HEADER: [&str; 3] = ["t", "m1", "m3"];
pub const PROFILE_HEADER: [&str; 2] = ["z", "beta"];
pub const FIELD_HEADER: [&str; 6] = ["z", "t", "m1", "m2", "m3", "m4"];
pub const COMPARISON_HEADER: [&str; 3] = ["z", "beta_exact", "beta_app"];

/// Decimal form with 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

/// Header plus one row of numbers per item.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    for row in rows {
        out.write_record(row.iter().map(|v| format_value(*v))).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Data(e.to_string()))
}

/// Read all rows, checking the header.
pub fn read_table<R: Read>(r: R, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut input = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let found = input.headers().map_err(csv_err)?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Data(format!(
            "expected header `{}`, found `{}`",
            header.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    input
        .records()
        .enumerate()
        .map(|(k, rec)| {
            let rec = rec.map_err(csv_err)?;
            rec.iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::Data(format!("row {}: `{s}` is not a number", k + 1)))
                })
                .collect()
        })
        .collect()
}

/// Spacing of an evenly spaced first column.
fn spacing(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::Data("need at least two rows".into()));
    }
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    let uneven = xs.iter().enumerate().any(|(k, x)| (x - (xs[0] + k as f64 * h)).abs() > 1e-9 * h.abs().max(1.0));
    if !(h > 0.0) || uneven {
        return Err(Error::Data("first column is not evenly spaced and increasing".into()));
    }
    Ok(h)
}

pub fn write_trace<W: Write>(w: W, trace: &BoundaryTrace) -> Result<()> {
    let rows = (0..trace.len()).map(|k| vec![trace.t_at(k), trace.m1()[k], trace.m3()[k]]);
    write_table(w, &TRACE_HEADER, rows)
}

pub fn read_trace<R: Read>(r: R) -> Result<BoundaryTrace> {
    let rows = read_table(r, &TRACE_HEADER)?;
    let t: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let h = spacing(&t)?;
    if t[0] != 0.0 {
        return Err(Error::Data(format!("trace must start at t = 0, found {}", t[0])));
    }
    BoundaryTrace::new(h, rows.iter().map(|r| r[1]).collect(), rows.iter().map(|r| r[2]).collect())
}

pub fn write_profile<W: Write>(w: W, profile: &CoefficientProfile) -> Result<()> {
    let rows = (0..profile.len()).map(|k| vec![profile.z_at(k), profile.samples()[k]]);
    write_table(w, &PROFILE_HEADER, rows)
}

pub fn read_profile<R: Read>(r: R) -> Result<CoefficientProfile> {
    let rows = read_table(r, &PROFILE_HEADER)?;
    let z: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let h = spacing(&z)?;
    CoefficientProfile::from_samples(z[0], h, rows.iter().map(|r| r[1]).collect())
}

/// Every node as `z, t, m1..m4`, line by line.
pub fn write_field<W: Write>(w: W, field: &WaveField) -> Result<()> {
    let h = field.h();
    let rows = field.nodes().map(|(i, j, m)| vec![i as f64 * h, j as f64 * h, m[0], m[1], m[2], m[3]]);
    write_table(w, &FIELD_HEADER, rows)
}

/// `z, beta_exact, beta_app` on the nodes of `approx`.
pub fn write_comparison<W: Write>(w: W, exact: &CoefficientProfile, approx: &CoefficientProfile) -> Result<()> {
    if exact.len() < approx.len() {
        return Err(Error::DimensionMismatch { expected: approx.len(), found: exact.len() });
    }
    let rows = (0..approx.len()).map(|k| vec![approx.z_at(k), exact.samples()[k], approx.samples()[k]]);
    write_table(w, &COMPARISON_HEADER, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trip_is_exact() {
        let m1: Vec<f64> = (0..9).map(|k| (k as f64 * 0.37).sin() / 3.0).collect();
        let m3: Vec<f64> = (0..9).map(|k| 1e-300 * k as f64 - 0.1).collect();
        let t = BoundaryTrace::new(std::f64::consts::PI / 8.0, m1, m3).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &t).unwrap();
        let back = read_trace(buf.as_slice()).unwrap();
        assert_eq!(back.m1(), t.m1());
        assert_eq!(back.m3(), t.m3());
        assert!((back.h() - t.h()).abs() < 1e-15);
        assert!(String::from_utf8(buf).unwrap().starts_with("t,m1,m3\n"));
    }

    #[test]
    fn rejects_wrong_header_and_text() {
        assert!(matches!(read_trace("z,beta\n0,1\n".as_bytes()), Err(Error::Data(_))));
        assert!(matches!(read_profile("z,beta\n0,1\n0.1,x\n".as_bytes()), Err(Error::Data(_))));
        assert!(matches!(read_profile("z,beta\n0,1\n0.2,1\n0.3,1\n".as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn short_trace_is_rejected() {
        assert!(read_trace("t,m1,m3\n0,0,0\n0.1,0,0\n".as_bytes()).is_err());
    }
}
