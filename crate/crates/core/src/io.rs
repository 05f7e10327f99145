//! Field CSV format.
//!
//! Header: `# N=<n> axes=<sizes> h=<spacings> t0=<t> dt=<dt>`, then one row
//! per node: coordinates..., time, value. Values are written with 17
//! significant digits, so a write/read round trip is bit-exact. A purely
//! spatial field is stored with a single level and `dt=0`.

use crate::grid::{Axis, GridField, SpaceTimeField};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("missing or malformed header line")]
    BadHeader,
    #[error("malformed header field {0:?}")]
    BadHeaderField(String),
    #[error("row {row}: expected {want} columns, got {got}")]
    BadRow { row: usize, want: usize, got: usize },
    #[error("row {row}: cannot parse {text:?} as a number")]
    BadNumber { row: usize, text: String },
    #[error("expected {want} data rows, got {got}")]
    RowCount { want: usize, got: usize },
    #[error("grid construction failed: {0}")]
    Grid(#[from] crate::grid::GridError),
}

/// A field loaded from CSV: spatial (single level) or space-time.
#[derive(Debug, Clone)]
pub enum LoadedField {
    Grid(GridField),
    SpaceTime(SpaceTimeField),
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_header(
    w: &mut impl Write,
    shape: &[usize],
    steps: &[f64],
    t0: f64,
    dt: f64,
) -> std::io::Result<()> {
    let sizes: Vec<String> = shape.iter().map(|n| n.to_string()).collect();
    let hs: Vec<String> = steps.iter().map(|h| fmt(*h)).collect();
    writeln!(
        w,
        "# N={} axes={} h={} t0={} dt={}",
        shape.len(),
        sizes.join(","),
        hs.join(","),
        fmt(t0),
        fmt(dt)
    )
}

/// Write a space-time field (one row per node and level, level-major).
pub fn write_spacetime_csv(f: &SpaceTimeField, path: &Path) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    let shape = f.space_shape();
    let steps: Vec<f64> = f.space_axes().iter().map(|a| a.step()).collect();
    write_header(
        &mut w,
        &shape,
        &steps,
        f.time_axis().start(),
        f.time_axis().step(),
    )?;
    let nspace = f.nspace();
    let mut coord = vec![0.0; f.dim()];
    for k in 0..f.levels() {
        let t = f.time_axis().node(k);
        let level = f.level_values(k);
        let mut flat = 0usize;
        crate::grid::for_each_index(&shape, |idx| {
            for (a, &i) in idx.iter().enumerate() {
                coord[a] = f.space_axes()[a].node(i);
            }
            let mut row = String::with_capacity(32 * (coord.len() + 2));
            for c in &coord {
                row.push_str(&fmt(*c));
                row.push(',');
            }
            row.push_str(&fmt(t));
            row.push(',');
            row.push_str(&fmt(level[flat]));
            // write! into an inner buffer; errors surface on flush
            let _ = writeln!(w, "{row}");
            flat += 1;
        });
        debug_assert_eq!(flat, nspace);
    }
    w.flush()?;
    Ok(())
}

/// Write a spatial field as a single-level CSV with dt = 0.
pub fn write_grid_csv(f: &GridField, path: &Path) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    let shape = f.shape();
    let steps: Vec<f64> = f.axes().iter().map(|a| a.step()).collect();
    write_header(&mut w, &shape, &steps, 0.0, 0.0)?;
    let mut coord = vec![0.0; f.dim()];
    let mut flat = 0usize;
    crate::grid::for_each_index(&shape, |idx| {
        for (a, &i) in idx.iter().enumerate() {
            coord[a] = f.axes()[a].node(i);
        }
        let mut row = String::with_capacity(32 * (coord.len() + 2));
        for c in &coord {
            row.push_str(&fmt(*c));
            row.push(',');
        }
        row.push_str(&fmt(0.0));
        row.push(',');
        row.push_str(&fmt(f.values()[flat]));
        let _ = writeln!(w, "{row}");
        flat += 1;
    });
    w.flush()?;
    Ok(())
}

fn parse_f64(s: &str, row: usize) -> Result<f64, IoError> {
    s.trim().parse::<f64>().map_err(|_| IoError::BadNumber {
        row,
        text: s.to_string(),
    })
}

/// Read a field CSV written by [`write_spacetime_csv`] or [`write_grid_csv`].
pub fn read_field_csv(path: &Path) -> Result<LoadedField, IoError> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines.next().ok_or(IoError::BadHeader)??;
    let header = header.strip_prefix('#').ok_or(IoError::BadHeader)?.trim();
    let mut n: Option<usize> = None;
    let mut sizes: Vec<usize> = Vec::new();
    let mut hs: Vec<f64> = Vec::new();
    let mut t0 = 0.0;
    let mut dt = 0.0;
    for part in header.split_whitespace() {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| IoError::BadHeaderField(part.to_string()))?;
        match key {
            "N" => {
                n = Some(
                    val.parse()
                        .map_err(|_| IoError::BadHeaderField(part.to_string()))?,
                )
            }
            "axes" => {
                sizes = val
                    .split(',')
                    .map(|s| s.parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| IoError::BadHeaderField(part.to_string()))?
            }
            "h" => {
                hs = val
                    .split(',')
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| IoError::BadHeaderField(part.to_string()))?
            }
            "t0" => t0 = parse_f64(val, 0)?,
            "dt" => dt = parse_f64(val, 0)?,
            _ => return Err(IoError::BadHeaderField(part.to_string())),
        }
    }
    let n = n.ok_or(IoError::BadHeader)?;
    if sizes.len() != n || hs.len() != n {
        return Err(IoError::BadHeader);
    }
    let nspace: usize = sizes.iter().product();

    let mut starts: Option<Vec<f64>> = None;
    let mut times: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (row_idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != n + 2 {
            return Err(IoError::BadRow {
                row: row_idx + 2,
                want: n + 2,
                got: cols.len(),
            });
        }
        if starts.is_none() {
            let mut s = Vec::with_capacity(n);
            for c in &cols[..n] {
                s.push(parse_f64(c, row_idx + 2)?);
            }
            starts = Some(s);
        }
        if values.len() % nspace == 0 {
            times.push(parse_f64(cols[n], row_idx + 2)?);
        }
        values.push(parse_f64(cols[n + 1], row_idx + 2)?);
    }
    let starts = starts.ok_or(IoError::RowCount { want: 1, got: 0 })?;
    if values.len() % nspace != 0 {
        return Err(IoError::RowCount {
            want: nspace * (values.len() / nspace + 1),
            got: values.len(),
        });
    }
    let levels = values.len() / nspace;
    let axes: Vec<Axis> = (0..n)
        .map(|i| Axis::new(starts[i], hs[i], sizes[i]))
        .collect::<Result<_, _>>()?;
    if levels == 1 {
        Ok(LoadedField::Grid(GridField::new(axes, values)?))
    } else {
        let time = Axis::new(t0, dt, levels)?;
        Ok(LoadedField::SpaceTime(SpaceTimeField::new(
            axes, time, values,
        )?))
    }
}
