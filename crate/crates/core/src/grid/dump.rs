//! Text field dumps.
//!
//! ```text
//! fb-lab-field 1
//! shape half_disk
//! R 1
//! h 0.0078125
//! field u
//! nx 257
//! ny 129
//! <ny rows of nx values, j increasing, "nan" off the mask>
//! ```

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{GridSpec, ScalarField, Shape};
use crate::error::{LabError, Result};

const MAGIC: &str = "fb-lab-field 1";

/// Writes `field` under the name `name`. Values use the shortest decimal
/// representation that round-trips exactly.
pub fn write_dump(mut out: impl Write, name: &str, field: &ScalarField) -> Result<()> {
    let spec = field.spec();
    let mut s = String::new();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "shape {}", spec.shape.as_str()).unwrap();
    writeln!(s, "R {}", spec.half_width).unwrap();
    writeln!(s, "h {}", spec.spacing).unwrap();
    writeln!(s, "field {name}").unwrap();
    writeln!(s, "nx {}", spec.nx()).unwrap();
    writeln!(s, "ny {}", spec.ny()).unwrap();
    let nx = spec.nx();
    for row in 0..spec.ny() {
        for c in 0..nx {
            let k = row * nx + c;
            if c > 0 {
                s.push(' ');
            }
            if field.is_masked(k) {
                write!(s, "{}", field.at(k)).unwrap();
            } else {
                s.push_str("nan");
            }
        }
        s.push('\n');
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Reads a dump written by [`write_dump`]; returns the field name and field.
pub fn read_dump(input: impl BufRead) -> Result<(String, ScalarField)> {
    let mut lines = input.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| LabError::Parse(format!("field dump truncated before {what}")))
    };
    if next("header")?.trim() != MAGIC {
        return Err(LabError::Parse("not a field dump (bad magic line)".into()));
    }
    let mut key = |k: &str| -> Result<String> {
        let line = next(k)?;
        let (name, value) = line
            .split_once(' ')
            .ok_or_else(|| LabError::Parse(format!("malformed header line `{line}`")))?;
        if name != k {
            return Err(LabError::Parse(format!("expected `{k}`, found `{name}`")));
        }
        Ok(value.trim().to_string())
    };
    let num = |s: String, k: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| LabError::Parse(format!("bad value `{s}` for {k}")))
    };
    let shape = Shape::parse(&key("shape")?)?;
    let r = num(key("R")?, "R")?;
    let h = num(key("h")?, "h")?;
    let name = key("field")?;
    let nx = num(key("nx")?, "nx")? as usize;
    let ny = num(key("ny")?, "ny")? as usize;
    let spec = GridSpec::new(r, h, shape)?;
    if spec.nx() != nx || spec.ny() != ny {
        return Err(LabError::Parse(format!(
            "dump size {nx}x{ny} does not match the grid ({}x{})",
            spec.nx(),
            spec.ny()
        )));
    }
    let mut values = Vec::with_capacity(spec.len());
    for row in 0..ny {
        let line = next("field rows")?;
        let before = values.len();
        for tok in line.split_whitespace() {
            let v = if tok == "nan" {
                f64::NAN
            } else {
                tok.parse::<f64>()
                    .map_err(|_| LabError::Parse(format!("bad value `{tok}` in row {row}")))?
            };
            values.push(v);
        }
        if values.len() - before != nx {
            return Err(LabError::Parse(format!("row {row} has {} values, expected {nx}", values.len() - before)));
        }
    }
    let mask = values.iter().map(|v| !v.is_nan()).collect();
    Ok((name, ScalarField::new(spec, values, mask)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainGeometry;

    #[test]
    fn round_trip_is_exact() {
        let geo = DomainGeometry::half_disk(1.0, 1.0 / 16.0).unwrap();
        let f = geo.field_from_fn(|p| (p[0] * 3.1).sin() + p[1] / 7.0).unwrap();
        let mut buf = Vec::new();
        write_dump(&mut buf, "u", &f).unwrap();
        let (name, g) = read_dump(buf.as_slice()).unwrap();
        assert_eq!(name, "u");
        assert_eq!(g.mask(), f.mask());
        for k in 0..f.spec().len() {
            if f.is_masked(k) {
                assert_eq!(f.at(k).to_bits(), g.at(k).to_bits());
            }
        }
    }

    #[test]
    fn truncated_dump_is_a_parse_error() {
        let geo = DomainGeometry::half_disk(1.0, 1.0 / 16.0).unwrap();
        let f = geo.zeros().unwrap();
        let mut buf = Vec::new();
        write_dump(&mut buf, "u", &f).unwrap();
        buf.truncate(buf.len() / 2);
        assert!(matches!(read_dump(buf.as_slice()), Err(LabError::Parse(_))));
    }
}
