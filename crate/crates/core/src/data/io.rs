//! LIBSVM and CSV readers/writers. Sparse input is densified.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::Dataset;
use crate::error::{Error, Result};

pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    read_libsvm(BufReader::new(File::open(path)?))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    read_csv(BufReader::new(File::open(path)?))
}

/// Dispatches on extension: `.csv` is read as CSV, anything else as LIBSVM.
pub fn load_path(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => load_csv(path),
        _ => load_libsvm(path),
    }
}

pub fn read_libsvm<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut raw_labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut d = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = tokens.next().expect("non-empty line has a token");
        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected idx:val, found {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature index {idx:?}"),
            })?;
            if idx == 0 || idx <= last {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("feature indices must be 1-based and ascending, found {idx} after {last}"),
                });
            }
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature value {val:?}"),
            })?;
            if !val.is_finite() {
                return Err(Error::NonFinite { line: lineno });
            }
            last = idx;
            entries.push((idx - 1, val));
        }
        d = d.max(last);
        raw_labels.push(label.to_string());
        rows.push(entries);
    }

    if rows.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut features = DMatrix::zeros(d.max(1), rows.len());
    for (j, row) in rows.iter().enumerate() {
        for &(i, v) in row {
            features[(i, j)] = v;
        }
    }
    let (names, ids) = encode_classes(&raw_labels);
    Dataset::with_class_names(features, Some(ids), names)
}

/// Rows of `label,f1,...,fd` with no header.
pub fn read_csv<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut raw_labels = Vec::new();
    let mut values = Vec::new();
    let mut d = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let label = fields.next().expect("split yields one field");
        let start = values.len();
        for f in fields {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature value {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { line: lineno });
            }
            values.push(v);
        }
        let width = values.len() - start;
        match d {
            None => d = Some(width),
            Some(w) if w != width => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {w} features, found {width}"),
                })
            }
            _ => {}
        }
        raw_labels.push(label.to_string());
    }
    let d = d.ok_or(Error::NoSamples)?;
    let features = DMatrix::from_column_slice(d, raw_labels.len(), &values);
    let (names, ids) = encode_classes(&raw_labels);
    Dataset::with_class_names(features, Some(ids), names)
}

pub fn write_libsvm<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for j in 0..ds.n() {
        write!(w, "{}", label_name(ds, j))?;
        let d = ds.d();
        for (i, &v) in ds.features().column(j).iter().enumerate() {
            // The last feature is always written so a reload recovers d.
            if v != 0.0 || i + 1 == d {
                write!(w, " {}:{}", i + 1, v)?;
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for j in 0..ds.n() {
        write!(w, "{}", label_name(ds, j))?;
        for v in ds.features().column(j).iter() {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn label_name(ds: &Dataset, j: usize) -> &str {
    ds.labels()
        .map(|l| ds.class_names()[l[j]].as_str())
        .unwrap_or("0")
}

/// Maps raw label tokens onto `[0, c)`, preserving numeric order when every
/// token is a number and lexicographic order otherwise.
fn encode_classes(raw: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut names: Vec<String> = raw.to_vec();
    names.sort();
    names.dedup();
    let numeric: Option<Vec<f64>> = names.iter().map(|s| s.parse().ok()).collect();
    if let Some(values) = numeric {
        let mut order: Vec<usize> = (0..names.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        names = order.into_iter().map(|i| names[i].clone()).collect();
    }
    let index: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let ids = raw.iter().map(|s| index[s.as_str()]).collect();
    (names, ids)
}
