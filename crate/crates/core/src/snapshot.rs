//! Field snapshot file format.
//!
//! One header line
//!
//! ```text
//! TLAB1 dim N1..Nd L1..Ld a1..ad m parity
//! ```
//!
//! followed by one row of m samples per node, node-major with axis 0
//! fastest.  Samples are printed with 17 significant digits so that a
//! write/read round trip reproduces every f64 bit-exactly.

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::grid::{Parity, TorusGrid};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const MAGIC: &str = "TLAB1";

pub fn write_snapshot<W: Write>(mut w: W, f: &SampledField) -> Result<()> {
    let g = f.grid();
    write!(w, "{MAGIC} {}", g.dim())?;
    for i in 0..g.dim() {
        write!(w, " {}", g.size(i))?;
    }
    for i in 0..g.dim() {
        write!(w, " {:.16e}", g.length(i))?;
    }
    for i in 0..g.dim() {
        write!(w, " {}", g.parity(i))?;
    }
    writeln!(w, " {} {}", f.components(), f.parity().token())?;
    let m = f.components();
    for node in 0..g.node_count() {
        let row = f.at(node);
        for c in 0..m {
            if c > 0 {
                write!(w, " ")?;
            }
            write!(w, "{:.16e}", row[c])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(r: R) -> Result<SampledField> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad(1, "empty file"))?
        .map_err(Error::Io)?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.first() != Some(&MAGIC) {
        return Err(bad(1, "missing TLAB1 magic"));
    }
    let dim: usize = parse(toks.get(1), 1, "dim")?;
    if dim != 2 && dim != 3 {
        return Err(bad(1, &format!("dim must be 2 or 3, got {dim}")));
    }
    let expect = 2 + 3 * dim + 2;
    if toks.len() != expect {
        return Err(bad(1, &format!("header has {} tokens, expected {expect}", toks.len())));
    }
    let mut sizes = Vec::with_capacity(dim);
    let mut lengths = Vec::with_capacity(dim);
    let mut parities = Vec::with_capacity(dim);
    for i in 0..dim {
        sizes.push(parse(toks.get(2 + i), 1, "size")?);
    }
    for i in 0..dim {
        lengths.push(parse(toks.get(2 + dim + i), 1, "length")?);
    }
    for i in 0..dim {
        parities.push(parse(toks.get(2 + 2 * dim + i), 1, "parity")?);
    }
    let m: usize = parse(toks.get(2 + 3 * dim), 1, "component count")?;
    let parity = Parity::from_token(toks[2 + 3 * dim + 1])
        .ok_or_else(|| bad(1, "parity must be 'even' or 'odd'"))?;
    let grid = TorusGrid::new(dim, &sizes, &lengths, &parities)?;

    let mut values = Vec::with_capacity(m * grid.node_count());
    let mut lineno = 1usize;
    for line in lines {
        lineno += 1;
        let line = line.map_err(Error::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| bad(lineno, &format!("bad float {tok:?}")))?;
            values.push(v);
            count += 1;
        }
        if count != m {
            return Err(bad(lineno, &format!("row has {count} samples, expected {m}")));
        }
    }
    if values.len() != m * grid.node_count() {
        return Err(bad(
            lineno,
            &format!(
                "snapshot holds {} samples, grid needs {}",
                values.len(),
                m * grid.node_count()
            ),
        ));
    }
    SampledField::from_values(&grid, m, parity, values)
}

pub fn save_snapshot<P: AsRef<Path>>(path: P, f: &SampledField) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_snapshot(BufWriter::new(file), f)
}

pub fn load_snapshot<P: AsRef<Path>>(path: P) -> Result<SampledField> {
    let file = std::fs::File::open(path)?;
    read_snapshot(BufReader::new(file))
}

fn bad(line: usize, msg: &str) -> Error {
    Error::SnapshotFormat { line, msg: msg.to_string() }
}

fn parse<T: std::str::FromStr>(tok: Option<&&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| bad(line, &format!("missing {what}")))?
        .parse()
        .map_err(|_| bad(line, &format!("bad {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Parity;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = TorusGrid::new(2, &[8, 8], &[1.0, 0.75], &[1, 0]).unwrap();
        let f = SampledField::from_fn(&g, 3, Parity::Odd, |x, out| {
            out[0] = (std::f64::consts::PI * x[0]).sin() * 0.123456789123456789;
            out[1] = x[1] * 1e-17 + 1.0 / 3.0;
            out[2] = -7.25e104 * x[0].mul_add(1e-3, 1.0);
        });
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f).unwrap();
        let back = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.parity(), f.parity());
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_snapshot("BOGUS 2".as_bytes()).is_err());
        assert!(read_snapshot("".as_bytes()).is_err());
        let short = "TLAB1 2 8 8 1.0 1.0 0 0 1 even\n1.0\n";
        assert!(matches!(
            read_snapshot(short.as_bytes()),
            Err(Error::SnapshotFormat { .. })
        ));
    }
}
