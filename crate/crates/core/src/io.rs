//! Field snapshot files and CSV export.
//!
//! A snapshot is one ASCII header line
//! `PTNS-FIELD v1 <nx> <ny> <lx> <ly> <ncomp>\n` followed by
//! `(nx+1)(ny+1)*ncomp` little-endian `f64` values, nodes in row-major order
//! with the components of a node stored consecutively.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};

pub const SNAPSHOT_MAGIC: &str = "PTNS-FIELD";
pub const SNAPSHOT_VERSION: &str = "v1";

/// Node-interleaved component data on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: Grid,
    /// One array per component, each of length `grid.node_count()`.
    pub components: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("snapshot needs a component".into()));
        }
        if components.iter().any(|c| c.len() != grid.node_count()) {
            return Err(Error::InvalidArgument(
                "component length does not match grid".into(),
            ));
        }
        Ok(Self { grid, components })
    }

    pub fn from_scalar(f: &ScalarField) -> Self {
        Self {
            grid: *f.grid(),
            components: vec![f.values().to_vec()],
        }
    }

    pub fn from_vector(v: &VectorField) -> Self {
        Self {
            grid: *v.grid(),
            components: vec![v.xs().to_vec(), v.ys().to_vec()],
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let g = &self.grid;
        writeln!(
            w,
            "{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} {} {} {} {} {}",
            g.nx(),
            g.ny(),
            g.lx(),
            g.ly(),
            self.components.len()
        )?;
        let mut buf = Vec::with_capacity(g.node_count() * self.components.len() * 8);
        for k in 0..g.node_count() {
            for c in &self.components {
                buf.extend_from_slice(&c[k].to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl Read, origin: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Snapshot {
            path: origin.to_path_buf(),
            reason,
        };
        let mut r = BufReader::new(r);
        let mut header = String::new();
        r.read_line(&mut header)?;
        let parts: Vec<&str> = header.trim_end_matches('\n').split(' ').collect();
        if parts.len() != 7 || parts[0] != SNAPSHOT_MAGIC || parts[1] != SNAPSHOT_VERSION {
            return Err(bad(format!("bad header {:?}", header.trim_end())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s}: {e}")));
        let real = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s}: {e}")));
        let grid = Grid::new(int(parts[2])?, int(parts[3])?, real(parts[4])?, real(parts[5])?)
            .map_err(|e| bad(e.to_string()))?;
        let ncomp = int(parts[6])?;
        if ncomp == 0 {
            return Err(bad("zero components".into()));
        }
        let n = grid.node_count();
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != n * ncomp * 8 {
            return Err(bad(format!(
                "expected {} payload bytes, found {}",
                n * ncomp * 8,
                bytes.len()
            )));
        }
        let mut components = vec![Vec::with_capacity(n); ncomp];
        for (idx, chunk) in bytes.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
            components[idx % ncomp].push(v);
        }
        Ok(Self { grid, components })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::read_from(File::open(path)?, path)
    }

    /// CSV with columns `x,y,<names...>`, one row per node.
    pub fn write_csv(&self, mut w: impl Write, names: &[&str]) -> Result<()> {
        if names.len() != self.components.len() {
            return Err(Error::InvalidArgument(
                "one column name per component required".into(),
            ));
        }
        write!(w, "x,y")?;
        for n in names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        let g = &self.grid;
        for k in 0..g.node_count() {
            let (i, j) = g.ij(k);
            write!(w, "{},{}", g.x(i), g.y(j))?;
            for c in &self.components {
                write!(w, ",{}", c[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_plain_text() {
        let g = Grid::new(4, 5, 1.0, 0.5).unwrap();
        let s = Snapshot::from_scalar(&ScalarField::constant(g, 2.0));
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        let header_end = buf.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(&buf[..header_end], b"PTNS-FIELD v1 4 5 1 0.5 1");
        assert_eq!(buf.len() - header_end - 1, 30 * 8);
        assert_eq!(&buf[header_end + 1..header_end + 9], &2.0f64.to_le_bytes());
    }

    #[test]
    fn components_are_interleaved_per_node() {
        let g = Grid::unit_square(4).unwrap();
        let v = VectorField::from_fn(g, |x, y| (x, 10.0 + y));
        let mut buf = Vec::new();
        Snapshot::from_vector(&v).write_to(&mut buf).unwrap();
        let start = buf.iter().position(|&b| b == b'\n').unwrap() + 1;
        let val = |k: usize| f64::from_le_bytes(buf[start + 8 * k..start + 8 * k + 8].try_into().unwrap());
        // node 1 = (0.25, 0)
        assert_eq!(val(2), 0.25);
        assert_eq!(val(3), 10.0);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let g = Grid::unit_square(4).unwrap();
        let mut buf = Vec::new();
        Snapshot::from_scalar(&ScalarField::zeros(g)).write_to(&mut buf).unwrap();
        buf.pop();
        assert!(Snapshot::read_from(&buf[..], Path::new("mem")).is_err());
        assert!(Snapshot::read_from(&b"PTNS-FIELD v2 4 4 1 1 1\n"[..], Path::new("mem")).is_err());
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let g = Grid::unit_square(4).unwrap();
        let mut out = Vec::new();
        Snapshot::from_scalar(&ScalarField::constant(g, 1.0))
            .write_csv(&mut out, &["rho"])
            .unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 26);
        assert!(text.starts_with("x,y,rho\n0,0,1\n"));
    }
}
