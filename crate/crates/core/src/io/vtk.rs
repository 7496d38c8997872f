//! Legacy ASCII VTK output for discontinuous fields.
//!
//! Every triangle gets its own three points so jumps between elements stay
//! visible; point values come from evaluating the element polynomial at its
//! vertices.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::space::DgField;

/// VTK cell type of a linear triangle.
pub const VTK_TRIANGLE: u8 = 5;

const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render `field` as a legacy VTK unstructured grid.
pub fn vtk_string(field: &DgField) -> String {
    let space = field.space();
    let mesh = space.mesh();
    let n_el = mesh.n_elements();
    let mut s = String::with_capacity(n_el * 200);
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(&format!("DG field u at t = {}\n", num(field.time)));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    s.push_str(&format!("POINTS {} double\n", 3 * n_el));
    for el in 0..n_el {
        for r in REFERENCE_VERTICES {
            let p = mesh.map_to_physical(el, r);
            s.push_str(&format!("{} {} {}\n", num(p[0]), num(p[1]), num(0.0)));
        }
    }
    s.push_str(&format!("CELLS {} {}\n", n_el, 4 * n_el));
    for el in 0..n_el {
        let b = 3 * el;
        s.push_str(&format!("3 {} {} {}\n", b, b + 1, b + 2));
    }
    s.push_str(&format!("CELL_TYPES {n_el}\n"));
    for _ in 0..n_el {
        s.push_str(&format!("{VTK_TRIANGLE}\n"));
    }
    s.push_str(&format!("POINT_DATA {}\nSCALARS u double 1\nLOOKUP_TABLE default\n", 3 * n_el));
    for el in 0..n_el {
        for r in REFERENCE_VERTICES {
            s.push_str(&num(field.eval(el, r)));
            s.push('\n');
        }
    }
    s
}

pub fn write_vtk(field: &DgField, path: &Path) -> Result<()> {
    fs::write(path, vtk_string(field)).map_err(|e| Error::io(path, e))
}

/// Contents of a file written by [`write_vtk`].
#[derive(Clone, Debug, PartialEq)]
pub struct VtkData {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub values: Vec<f64>,
}

struct Tokens<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Tokens<'a> {
    fn line(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| Error::invalid("unexpected end of VTK file"))
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        let (n, l) = self.line()?;
        if l != want {
            return Err(Error::invalid(format!("VTK line {n}: expected '{want}', got '{l}'")));
        }
        Ok(())
    }

    /// `KEYWORD <count> [rest]`
    fn header(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, l) = self.line()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(Error::invalid(format!("VTK line {n}: expected {keyword}, got '{l}'")));
        }
        let count = parts
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::invalid(format!("VTK line {n}: bad count")))?;
        Ok((count, parts.collect()))
    }

    fn numbers<T: std::str::FromStr>(&mut self) -> Result<Vec<T>> {
        let (n, l) = self.line()?;
        l.split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::invalid(format!("VTK line {n}: bad number '{t}'"))))
            .collect()
    }
}

/// Strict reader for the subset of the legacy format that [`write_vtk`]
/// emits.
pub fn parse_vtk(text: &str) -> Result<VtkData> {
    let mut t = Tokens { lines: text.lines().enumerate() };
    t.expect("# vtk DataFile Version 3.0")?;
    let title = t.line()?.1.to_string();
    t.expect("ASCII")?;
    t.expect("DATASET UNSTRUCTURED_GRID")?;
    let (np, rest) = t.header("POINTS")?;
    if rest != ["double"] {
        return Err(Error::invalid("VTK points must be double"));
    }
    let points = (0..np)
        .map(|_| {
            let v: Vec<f64> = t.numbers()?;
            <[f64; 3]>::try_from(v).map_err(|_| Error::invalid("VTK point needs 3 coordinates"))
        })
        .collect::<Result<Vec<_>>>()?;
    let (nc, rest) = t.header("CELLS")?;
    let size: usize = rest.first().and_then(|s| s.parse().ok()).ok_or_else(|| Error::invalid("VTK CELLS size"))?;
    let mut cells = Vec::with_capacity(nc);
    let mut total = 0;
    for _ in 0..nc {
        let v: Vec<usize> = t.numbers()?;
        if v.is_empty() || v[0] + 1 != v.len() || v[1..].iter().any(|&i| i >= np) {
            return Err(Error::invalid("malformed VTK cell"));
        }
        total += v.len();
        cells.push(v[1..].to_vec());
    }
    if total != size {
        return Err(Error::invalid("VTK CELLS size does not match the cell list"));
    }
    let (nt, _) = t.header("CELL_TYPES")?;
    if nt != nc {
        return Err(Error::invalid("VTK cell type count mismatch"));
    }
    let cell_types = (0..nt)
        .map(|_| match t.numbers::<u8>()?.as_slice() {
            [c] => Ok(*c),
            _ => Err(Error::invalid("one cell type per line")),
        })
        .collect::<Result<Vec<_>>>()?;
    let (nd, _) = t.header("POINT_DATA")?;
    if nd != np {
        return Err(Error::invalid("VTK point data count mismatch"));
    }
    t.expect("SCALARS u double 1")?;
    t.expect("LOOKUP_TABLE default")?;
    let values = (0..nd)
        .map(|_| match t.numbers::<f64>()?.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::invalid("one value per line")),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VtkData {
        title,
        points,
        cells,
        cell_types,
        values,
    })
}

pub fn read_vtk(path: &Path) -> Result<VtkData> {
    parse_vtk(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
