//! On-disk cache for fitted models: a directory holding `centers.csv`,
//! `assignments.csv`, `tree.csv` (one `r,s` edge per line) and `meta.json`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{HdpConfig, HdpModel, SpanningTree};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Meta {
    config: HdpConfig,
    objective_trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    k: usize,
}

pub fn save_bundle(model: &HdpModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_matrix(&model.centers, dir.join("centers.csv"))?;
    write_matrix(&model.assignments, dir.join("assignments.csv"))?;
    let mut w = BufWriter::new(File::create(dir.join("tree.csv"))?);
    for &(r, s) in model.tree.edges() {
        writeln!(w, "{r},{s}")?;
    }
    w.flush()?;
    let meta = Meta {
        config: model.config,
        objective_trace: model.objective_trace.clone(),
        iterations: model.iterations,
        converged: model.converged,
        k: model.tree.k(),
    };
    serde_json::to_writer_pretty(File::create(dir.join("meta.json"))?, &meta)?;
    Ok(())
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<HdpModel> {
    let dir = dir.as_ref();
    let meta: Meta = serde_json::from_reader(BufReader::new(File::open(dir.join("meta.json"))?))?;
    let centers = read_matrix(dir.join("centers.csv"))?;
    let assignments = read_matrix(dir.join("assignments.csv"))?;
    let mut edges = Vec::new();
    for (lineno, line) in BufReader::new(File::open(dir.join("tree.csv"))?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = || Error::Parse {
            line: lineno + 1,
            msg: format!("bad edge {line:?}"),
        };
        let (r, s) = line.split_once(',').ok_or_else(parse_err)?;
        edges.push((
            r.trim().parse().map_err(|_| parse_err())?,
            s.trim().parse().map_err(|_| parse_err())?,
        ));
    }
    let tree = SpanningTree::from_edges(meta.k, edges)?;
    if centers.ncols() != meta.k || assignments.ncols() != meta.k {
        return Err(crate::error::shape("bundle matrices disagree with k"));
    }
    Ok(HdpModel {
        centers,
        assignments,
        tree,
        objective_trace: meta.objective_trace,
        iterations: meta.iterations,
        converged: meta.converged,
        config: meta.config,
    })
}

fn write_matrix(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in m.row_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            // `{}` on f64 prints the shortest representation that round-trips.
            write!(w, "{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for f in line.split(',') {
            values.push(f.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("bad value {f:?}"),
            })?);
        }
        let width = values.len() - before;
        if *cols.get_or_insert(width) != width {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: "ragged matrix row".into(),
            });
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols.unwrap_or(0), &values))
}
