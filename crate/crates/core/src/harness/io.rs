//! CSV and JSON artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::flow::{FlowState, FlowStatus, FlowTrace};
use crate::grid::CircleGrid;

/// 17 significant digits: lossless for `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV table with a header row.
#[derive(Clone, Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let cols: Vec<&str> = header.iter().map(|s| s.as_ref()).collect();
        Self { text: format!("{}\n", cols.join(",")) }
    }

    pub fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    /// `# key=value` lines after the table.
    pub fn footer(&mut self, line: &str) {
        writeln!(self.text, "# {line}").unwrap();
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, &self.text)?)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(fs::write(path, s)?)
}

pub fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Parses a CSV written by [`Csv`]: header plus numeric rows; `#` lines are
/// skipped.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect::<Vec<_>>();
    let rows = lines
        .enumerate()
        .map(|(i, l)| {
            let row: Vec<f64> = l
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("{}: bad number on row {}", path.display(), i + 1)))?;
            if row.len() != header.len() {
                return Err(Error::Config(format!("{}: row {} has {} cells", path.display(), i + 1, row.len())));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

/// `x, u_1, …, u_n` for one field.
pub fn field_csv(u: &Field) -> Csv {
    field_csv_named(u, "u")
}

/// `x, <name>_1, …, <name>_n`.
pub fn field_csv_named(u: &Field, name: &str) -> Csv {
    let mut header = vec!["x".to_string()];
    header.extend((1..=u.dim()).map(|c| format!("{name}_{c}")));
    let mut csv = Csv::new(&header);
    let nodes = match u.grid() {
        crate::grid::Grid::Circle(g) => g.nodes(),
        crate::grid::Grid::Line(g) => g.nodes(),
    };
    for (j, x) in nodes.iter().enumerate() {
        let mut row = vec![*x];
        row.extend_from_slice(u.row(j));
        csv.row(&row);
    }
    csv
}

pub fn snapshot_name(index: usize) -> String {
    format!("u_{index:05}.csv")
}

/// Writes `trace.csv` and one `u_<index>.csv` per snapshot.
pub fn write_trace(dir: &Path, trace: &FlowTrace) -> Result<Vec<PathBuf>> {
    let mut csv = Csv::new(&["t", "energy", "dtu_l2", "sphere_drift", "max_u"]);
    let mut written = vec![dir.join("trace.csv")];
    for (i, s) in trace.states.iter().enumerate() {
        csv.row(&[s.t, s.energy, s.dtu_l2, s.sphere_drift, s.max_u]);
        let path = dir.join(snapshot_name(i));
        field_csv(&s.u).write(&path)?;
        written.push(path);
    }
    csv.write(&written[0])?;
    Ok(written)
}

/// Rebuilds a trace from a flow output directory. The status comes from
/// `report.json` when present.
pub fn read_trace(dir: &Path) -> Result<FlowTrace> {
    let (_, rows) = read_csv(&dir.join("trace.csv"))?;
    if rows.is_empty() {
        return Err(Error::Config(format!("{}: trace has no snapshots", dir.display())));
    }
    let mut states = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let (header, data) = read_csv(&dir.join(snapshot_name(i)))?;
        let n = header.len() - 1;
        let grid = CircleGrid::new(data.len())?;
        let values: Vec<f64> = data.iter().flat_map(|r| r[1..].iter().copied()).collect();
        states.push(FlowState::new(row[0], Field::new(grid, n, values)?)?);
    }
    let status = match read_json(&dir.join("report.json")) {
        Ok(v) => serde_json::from_value::<FlowStatus>(v["status"].clone()).unwrap_or(FlowStatus::Completed),
        Err(_) => FlowStatus::Completed,
    };
    FlowTrace::from_states(states, status)
}
