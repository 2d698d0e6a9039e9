//! Field CSVs and JSON artifacts.

use std::path::Path;

use anyhow::{bail, Context};
use num_complex::Complex64;
use satnls_core::mesh::{ComplexGridFn, Mesh};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct FieldRow {
    index: usize,
    coordinate: f64,
    re: f64,
    im: f64,
}

/// Writes `index, coordinate, re, im`. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_field(path: &Path, f: &ComplexGridFn) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mesh = f.mesh();
    for (k, z) in f.values().iter().enumerate() {
        w.serialize(FieldRow {
            index: k,
            coordinate: mesh.coord(k),
            re: z.re,
            im: z.im,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field CSV and checks it against the degrees of freedom of `mesh`.
pub fn read_field(path: &Path, mesh: &Mesh) -> anyhow::Result<ComplexGridFn> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut values = Vec::with_capacity(mesh.num_dofs());
    for (line, row) in r.deserialize::<FieldRow>().enumerate() {
        let row = row.with_context(|| format!("{}: malformed row {}", path.display(), line + 2))?;
        if row.index != values.len() {
            bail!("{}: row {} has index {}, expected {}", path.display(), line + 2, row.index, values.len());
        }
        if row.index >= mesh.num_dofs() {
            bail!("{}: more rows than the {} mesh nodes", path.display(), mesh.num_dofs());
        }
        let x = mesh.coord(row.index);
        if (row.coordinate - x).abs() > 1e-9 * (1.0 + x.abs()) {
            bail!(
                "{}: row {} sits at {} but node {} is at {x}",
                path.display(),
                line + 2,
                row.coordinate,
                row.index
            );
        }
        values.push(Complex64::new(row.re, row.im));
    }
    if values.len() != mesh.num_dofs() {
        bail!(
            "{}: {} rows for {} mesh nodes",
            path.display(),
            values.len(),
            mesh.num_dofs()
        );
    }
    Ok(ComplexGridFn::from_values(mesh, values)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes rows of plain numbers under a header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
