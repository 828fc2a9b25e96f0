//! Plain-text matrices, trajectory CSV and atomic file writes.
//!
//! Matrix format: a `rows cols` header line, then one line per row of
//! whitespace-separated values in scientific notation with 17 significant
//! digits, which round-trips `f64` exactly.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Real;
use crate::solver::StepReport;

pub fn write_matrix<T: Real, W: Write>(mut out: W, m: &DenseMatrix<T>) -> Result<()> {
    writeln!(out, "{} {}", m.rows(), m.cols())?;
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix<T: Real, R: BufRead>(input: R) -> Result<DenseMatrix<T>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad header {header:?}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header must be `rows cols`, got {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for line in lines {
        for tok in line?.split_whitespace() {
            data.push(tok.parse::<T>().map_err(|_| Error::Parse(format!("bad value {tok:?}")))?);
        }
    }
    if data.len() != rows * cols {
        return Err(Error::Parse(format!("expected {} values, found {}", rows * cols, data.len())));
    }
    DenseMatrix::from_row_major(rows, cols, data)
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// One row per step: `k, feasibility_residual, objective, rel_change_x1..x_m, rel_change_y, h_norm_step`.
pub fn trajectory_csv<T: Real>(reports: &[StepReport<T>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let m = reports.first().map_or(0, |r| r.successive_change.len().saturating_sub(1));
    let mut header = vec!["k".to_string(), "feasibility_residual".into(), "objective".into()];
    header.extend((1..=m).map(|i| format!("rel_change_x{i}")));
    header.push("rel_change_y".into());
    header.push("h_norm_step".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in reports {
        let mut row = vec![
            r.iteration.to_string(),
            format!("{:e}", r.feasibility_residual),
            format!("{:e}", r.objective),
        ];
        row.extend(r.successive_change.iter().map(|c| format!("{c:e}")));
        row.push(r.h_norm_step.map(|h| format!("{h:e}")).unwrap_or_default());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
