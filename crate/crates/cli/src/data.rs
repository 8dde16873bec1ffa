//! CSV datasets: header `x1..xDx,y1..yDy`, one observation per row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use simmoe::linalg::Matrix;
use simmoe::model::Dataset;

use crate::error::{CliError, Result};

/// Renders a real with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(dx: usize, dy: usize) -> Vec<String> {
    (1..=dx).map(|i| format!("x{i}")).chain((1..=dy).map(|i| format!("y{i}"))).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_rows(path: &Path, names: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "{}", names.join(",")).map_err(io)?;
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt_real).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let rows = (0..data.n()).map(|i| data.x().row(i).iter().chain(data.y().row(i)).copied().collect());
    write_rows(path, &header(data.dx(), data.dy()), rows)
}

/// Path of the latent-context file written next to a `twod` dataset.
pub fn eta_sidecar(path: &Path) -> PathBuf {
    path.with_extension("eta.csv")
}

pub fn write_eta(path: &Path, eta: &[[f64; 2]]) -> Result<()> {
    write_rows(path, &["eta1".into(), "eta2".into()], eta.iter().map(|e| e.to_vec()))
}

/// Parsed numeric table with its column names.
struct Table {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let names: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < names.len() {
            return Err(CliError::parse(path, line, &names[record.len()], "missing value"));
        }
        if record.len() > names.len() {
            return Err(CliError::parse(path, line, format!("#{}", record.len()), "more fields than header columns"));
        }
        let row = record
            .iter()
            .zip(&names)
            .map(|(field, name)| {
                let v: f64 =
                    field.parse().map_err(|_| CliError::parse(path, line, name, format!("'{field}' is not a number")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(CliError::parse(path, line, name, "value is not finite"))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { names, rows })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(path, source),
        other => CliError::parse(path, line, "-", format!("{other:?}")),
    }
}

/// Count of leading columns named `{prefix}1, {prefix}2, …`; the first
/// out-of-sequence name is reported when a gap would otherwise go unnoticed.
fn sequence(path: &Path, names: &[String], start: usize, prefix: char) -> Result<usize> {
    let mut k = 0;
    while let Some(name) = names.get(start + k) {
        if !name.starts_with(prefix) {
            break;
        }
        let want = format!("{prefix}{}", k + 1);
        if *name != want {
            return Err(CliError::parse(path, 1, want, format!("missing column (found '{name}')")));
        }
        k += 1;
    }
    Ok(k)
}

/// Reads a dataset, inferring `Dx` and `Dy` from the header.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let table = read_table(path)?;
    let dx = sequence(path, &table.names, 0, 'x')?;
    if dx == 0 {
        return Err(CliError::parse(path, 1, "x1", "missing column"));
    }
    let dy = sequence(path, &table.names, dx, 'y')?;
    if dy == 0 {
        return Err(CliError::parse(path, 1, "y1", "missing column"));
    }
    if let Some(extra) = table.names.get(dx + dy) {
        return Err(CliError::parse(path, 1, extra, "unexpected column"));
    }
    if table.rows.is_empty() {
        return Err(CliError::parse(path, 2, "x1", "no data rows"));
    }
    let n = table.rows.len();
    let mut xs = Vec::with_capacity(n * dx);
    let mut ys = Vec::with_capacity(n * dy);
    for row in &table.rows {
        xs.extend_from_slice(&row[..dx]);
        ys.extend_from_slice(&row[dx..]);
    }
    Ok(Dataset::new(Matrix::from_vec(n, dx, xs)?, Matrix::from_vec(n, dy, ys)?)?)
}

/// Reads query inputs: columns `x1..x{dx}`, any trailing `y` columns ignored.
pub fn read_inputs(path: &Path, dx: usize) -> Result<Vec<Vec<f64>>> {
    let table = read_table(path)?;
    let found = sequence(path, &table.names, 0, 'x')?;
    if found < dx {
        return Err(CliError::parse(path, 1, format!("x{}", found + 1), "missing column"));
    }
    if found > dx {
        return Err(CliError::parse(path, 1, format!("x{found}"), format!("the model takes {dx} inputs")));
    }
    Ok(table.rows.into_iter().map(|mut r| {
        r.truncate(dx);
        r
    }).collect())
}

pub fn read_eta(path: &Path) -> Result<Vec<[f64; 2]>> {
    let table = read_table(path)?;
    for (i, want) in ["eta1", "eta2"].iter().enumerate() {
        if table.names.get(i).map(String::as_str) != Some(want) {
            return Err(CliError::parse(path, 1, *want, "missing column"));
        }
    }
    Ok(table.rows.iter().map(|r| [r[0], r[1]]).collect())
}

/// Row count, dimensions and a SHA-256 of the exact bit patterns of the data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub rows: usize,
    pub dx: usize,
    pub dy: usize,
    pub sha256: String,
}

impl Fingerprint {
    pub fn of(data: &Dataset) -> Self {
        let mut h = Sha256::new();
        for v in [data.n(), data.dx(), data.dy()] {
            h.update((v as u64).to_le_bytes());
        }
        for v in data.x().as_slice().iter().chain(data.y().as_slice()) {
            h.update(v.to_bits().to_le_bytes());
        }
        Fingerprint { rows: data.n(), dx: data.dx(), dy: data.dy(), sha256: hex::encode(h.finalize()) }
    }

    pub fn check(&self, data: &Dataset) -> Result<()> {
        let found = Fingerprint::of(data);
        if found == *self {
            Ok(())
        } else {
            Err(CliError::FingerprintMismatch { expected: self.to_string(), found: found.to_string() })
        }
    }
}

impl std::fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} rows, {}→{}, sha256 {}", self.rows, self.dx, self.dy, &self.sha256[..self.sha256.len().min(16)])
    }
}
