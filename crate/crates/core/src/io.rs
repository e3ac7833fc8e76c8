//! Files written and read by the CLI and the suites: field dumps, polyline
//! CSVs, JSON reports and the per-run artifact directory.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{read_dump, write_dump, Point, ScalarField};
use crate::onephase::FreeBoundarySet;

pub const POLYLINE_HEADER: &str = "x,y,arc_length";

/// Polyline CSV: one vertex per row, a new component wherever the arc length
/// restarts at zero.
pub fn polyline_csv(fb: &FreeBoundarySet) -> String {
    let mut s = format!("{POLYLINE_HEADER}\n");
    for [x, y, arc] in fb.csv_rows() {
        s.push_str(&format!("{x},{y},{arc}\n"));
    }
    s
}

pub fn polylines_csv(lines: &[Vec<Point>]) -> String {
    let mut s = format!("{POLYLINE_HEADER}\n");
    for line in lines {
        let mut arc = 0.0;
        for (k, p) in line.iter().enumerate() {
            if k > 0 {
                arc += (p[0] - line[k - 1][0]).hypot(p[1] - line[k - 1][1]);
            }
            s.push_str(&format!("{},{},{arc}\n", p[0], p[1]));
        }
    }
    s
}

pub fn read_polyline_csv(input: impl BufRead) -> Result<Vec<Vec<Point>>> {
    let mut lines: Vec<Vec<Point>> = Vec::new();
    for (no, row) in input.lines().enumerate() {
        let row = row?;
        let row = row.trim();
        if row.is_empty() || (no == 0 && row.starts_with('x')) {
            continue;
        }
        let cols: Vec<&str> = row.split(',').map(str::trim).collect();
        if cols.len() < 2 {
            return Err(LabError::Parse(format!("polyline row {}: expected x,y[,arc_length]", no + 1)));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| LabError::Parse(format!("polyline row {}: bad number `{s}`", no + 1)));
        let p = [num(cols[0])?, num(cols[1])?];
        let restart = match cols.get(2) {
            Some(a) => num(a)? == 0.0,
            None => lines.is_empty(),
        };
        if restart || lines.is_empty() {
            lines.push(Vec::new());
        }
        lines.last_mut().expect("component pushed above").push(p);
    }
    if lines.is_empty() {
        return Err(LabError::Parse("polyline file has no vertices".into()));
    }
    Ok(lines)
}

pub fn read_polyline_file(path: &Path) -> Result<Vec<Vec<Point>>> {
    read_polyline_csv(BufReader::new(fs::File::open(path)?))
}

pub fn read_field(path: &Path) -> Result<(String, ScalarField)> {
    read_dump(BufReader::new(fs::File::open(path)?))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Output directory of one run with `fields/`, `csv/` and `svg/` below it.
/// Paths handed back are relative to the root, in the order written.
pub struct Artifacts {
    root: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["fields", "csv", "svg"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Artifacts { root, written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn put(&mut self, rel: String, body: &[u8]) -> Result<()> {
        fs::write(self.root.join(&rel), body)?;
        self.written.push(rel);
        Ok(())
    }

    pub fn field(&mut self, name: &str, field: &ScalarField) -> Result<()> {
        let rel = format!("fields/{name}.dump");
        let mut out = BufWriter::new(fs::File::create(self.root.join(&rel))?);
        write_dump(&mut out, name, field)?;
        out.flush()?;
        self.written.push(rel);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        self.put(format!("csv/{name}.csv"), body.as_bytes())
    }

    pub fn svg(&mut self, name: &str, body: &str) -> Result<()> {
        self.put(format!("svg/{name}.svg"), body.as_bytes())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.put(format!("{name}.json"), to_json(value)?.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_round_trip_keeps_components() {
        let lines = vec![vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], vec![[2.0, 2.0], [3.0, 2.5]]];
        let text = polylines_csv(&lines);
        let back = read_polyline_csv(text.as_bytes()).unwrap();
        assert_eq!(back, lines);
    }

    #[test]
    fn bare_xy_rows_form_one_component() {
        let back = read_polyline_csv("0,0\n0.5,0.25\n1,1\n".as_bytes()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].len(), 3);
    }

    #[test]
    fn bad_rows_are_parse_errors() {
        assert!(matches!(read_polyline_csv("x,y\n1\n".as_bytes()), Err(LabError::Parse(_))));
        assert!(matches!(read_polyline_csv("x,y\n1,abc\n".as_bytes()), Err(LabError::Parse(_))));
        assert!(matches!(read_polyline_csv("x,y,arc_length\n".as_bytes()), Err(LabError::Parse(_))));
    }

    #[test]
    fn artifacts_land_in_their_subdirectories() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::create(dir.path().join("run")).unwrap();
        a.csv("t", "a,b\n").unwrap();
        a.svg("p", "<svg/>").unwrap();
        a.json("report", &[1, 2]).unwrap();
        assert_eq!(a.written(), ["csv/t.csv", "svg/p.svg", "report.json"]);
        assert!(dir.path().join("run/csv/t.csv").exists());
    }
}
