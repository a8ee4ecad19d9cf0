//! CSV emission and parsing. Floats are written with 17 significant digits
//! so that every double survives a round trip.

use std::fmt::Write as _;

use crate::dynamics::{Coordinates, Trajectory};
use crate::error::{Error, Result};
use crate::hamjac::GridValues;
use crate::model::MacroState;

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_rows(text: &str, header: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let got = lines
        .next()
        .ok_or_else(|| Error::Domain("empty CSV document".into()))?;
    if got.trim() != header {
        return Err(Error::Domain(format!(
            "expected CSV header {header:?}, found {got:?}"
        )));
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .map(|(i, l)| {
            let row = l
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Domain(format!("row {}: {e}", i + 2)))?;
            if row.len() != width {
                return Err(Error::Domain(format!(
                    "row {} has {} fields, expected {width}",
                    i + 2,
                    row.len()
                )));
            }
            Ok(row)
        })
        .collect()
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * (traj.len() + 1));
    out.push_str(traj.coords.header());
    out.push('\n');
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let _ = writeln!(out, "{},{},{}", fmt17(*t), fmt17(s.m), fmt17(s.q));
    }
    out
}

pub fn parse_trajectory_csv(text: &str) -> Result<Trajectory> {
    let first = text.lines().next().unwrap_or("").trim();
    let coords = if first == Coordinates::Fluctuation.header() {
        Coordinates::Fluctuation
    } else {
        Coordinates::Macro
    };
    let rows = parse_rows(text, coords.header())?;
    Ok(Trajectory {
        times: rows.iter().map(|r| r[0]).collect(),
        states: rows.iter().map(|r| MacroState::new(r[1], r[2])).collect(),
        coords,
    })
}

pub const GRID_HEADER: &str = "x,y,h_exact,h_expansion,abs_err";

/// Columns `x,y,h_exact,h_expansion,abs_err`.
pub fn grid_comparison_csv(exact: &GridValues, approx: &GridValues) -> String {
    let mut out = String::from(GRID_HEADER);
    out.push('\n');
    let ny = exact.ys.len();
    for (i, x) in exact.xs.iter().enumerate() {
        for (j, y) in exact.ys.iter().enumerate() {
            let (a, b) = (exact.values[i * ny + j], approx.values[i * ny + j]);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt17(*x),
                fmt17(*y),
                fmt17(a),
                fmt17(b),
                fmt17((a - b).abs())
            );
        }
    }
    out
}

/// Rows of a grid comparison file.
pub fn parse_grid_comparison_csv(text: &str) -> Result<Vec<[f64; 5]>> {
    Ok(parse_rows(text, GRID_HEADER)?
        .into_iter()
        .map(|r| [r[0], r[1], r[2], r[3], r[4]])
        .collect())
}

pub(crate) fn parse_table(text: &str, header: &str) -> Result<Vec<Vec<f64>>> {
    parse_rows(text, header)
}
