//! Matrix and vector files: comma-delimited text, row-major, with a header
//! line `# rows=<m> cols=<n>`. Further `#` lines are comments. Vectors are
//! stored as a single column.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("missing `# rows=.. cols=..` header".into()))?;
    let (mut rows, mut cols) = (None, None);
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("malformed header field `{field}`")))?;
        let value: usize = value
            .parse()
            .map_err(|_| Error::Parse(format!("bad header value `{value}`")))?;
        match key {
            "rows" => rows = Some(value),
            "cols" => cols = Some(value),
            _ => return Err(Error::Parse(format!("unknown header key `{key}`"))),
        }
    }
    match (rows, cols) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(Error::Parse("header needs both rows= and cols=".into())),
    }
}

/// Parses the text form of a matrix.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let text = text.trim_start_matches('\u{feff}');
    let (header, body) = text.split_once('\n').unwrap_or((text, ""));
    let (rows, cols) = parse_header(header.trim())?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(body.as_bytes());
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for record in reader.records() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != cols {
            return Err(Error::Dimension(format!(
                "row {} has {} entries, header says {cols}",
                seen + 1,
                record.len()
            )));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("bad number `{field}`")))?;
            if !v.is_finite() {
                return Err(Error::NonFinite("matrix file"));
            }
            data.push(v);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Dimension(format!(
            "found {seen} rows, header says {rows}"
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn format_matrix(a: &DMatrix<f64>) -> String {
    let mut out = format!("# rows={} cols={}\n", a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let row: Vec<String> = a.row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn write_matrix(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    fs::write(path, format_matrix(a))?;
    Ok(())
}

/// A vector file is a one-column matrix; a single row is accepted too.
pub fn parse_vector(text: &str) -> Result<DVector<f64>> {
    let m = parse_matrix(text)?;
    match (m.nrows(), m.ncols()) {
        (_, 1) => Ok(m.column(0).into_owned()),
        (1, _) => Ok(m.row(0).transpose()),
        (r, c) => Err(Error::Dimension(format!("expected a vector, found {r} x {c}"))),
    }
}

pub fn format_vector(v: &DVector<f64>) -> String {
    format_matrix(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    parse_vector(&fs::read_to_string(path)?)
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    fs::write(path, format_vector(v))?;
    Ok(())
}
