//! CSV output through the `csv` crate: header row, comma separated, `\n`
//! line endings.

use std::path::Path;

use crate::error::{Error, Result};

/// Cell value; `None` renders as an empty field.
pub fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::invalid(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::invalid(format!("CSV row has {} fields, header has {}", r.len(), header.len())));
        }
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Header and rows of a CSV file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_err(path, e))?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let rows = vec![vec![cell(Some(0.1)), cell(None)], vec![cell(Some(-2.5e-17)), cell(Some(3.0))]];
        write_csv(&p, &["a", "b"], &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("a,b\n") && !text.contains('\r'));
        let (h, r) = read_csv(&p).unwrap();
        assert_eq!(h, ["a", "b"]);
        assert_eq!(r[0][1], "");
        assert_eq!(r[1][0].parse::<f64>().unwrap(), -2.5e-17);
        assert_eq!(r[0][0].parse::<f64>().unwrap(), 0.1);
        assert!(write_csv(&p, &["a"], &rows).is_err());
    }
}
