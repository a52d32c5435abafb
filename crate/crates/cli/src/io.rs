use std::fs;
use std::path::{Path, PathBuf};

use graphdep::stieltjes::DiscreteMeasure;
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, contents: &str) -> CliResult<()> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    fs::write(path, contents).map_err(io_err)
}

fn file_error(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::File {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-blank, non-comment lines with 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_row(path: &Path, line: usize, row: &str) -> CliResult<Vec<f64>> {
    row.split(',')
        .map(|field| {
            let field = field.trim();
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| file_error(path, line, format!("`{field}` is not a finite number")))
        })
        .collect()
}

/// Square matrix, one comma-separated row per line.
pub fn read_matrix_csv(path: &Path) -> CliResult<DMatrix<f64>> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (line, row) in data_lines(&text) {
        let values = parse_row(path, line, row)?;
        if let Some(first) = rows.first() {
            let first: &Vec<f64> = first;
            if values.len() != first.len() {
                return Err(file_error(
                    path,
                    line,
                    format!("expected {} columns, found {}", first.len(), values.len()),
                ));
            }
        }
        rows.push(values);
    }
    let p = rows.len();
    if p == 0 {
        return Err(file_error(path, 1, "matrix is empty"));
    }
    if rows[0].len() != p {
        return Err(file_error(path, 1, format!("matrix is {p}x{}, expected square", rows[0].len())));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

/// Lines `lambda,weight`; an optional header line is skipped.
pub fn read_atoms_csv(path: &Path) -> CliResult<DiscreteMeasure> {
    let text = read_text(path)?;
    let mut atoms = Vec::new();
    for (k, (line, row)) in data_lines(&text).enumerate() {
        if k == 0 && row.replace(' ', "") == "lambda,weight" {
            continue;
        }
        let values = parse_row(path, line, row)?;
        if values.len() != 2 {
            return Err(file_error(path, line, "expected `lambda,weight`"));
        }
        atoms.push((values[0], values[1]));
    }
    Ok(DiscreteMeasure::new(atoms)?)
}

/// `a:b:n`, `n` equally spaced points from `a` to `b`.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::input(format!("grid `{spec}` is not of the form a:b:n"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite()) || n == 0 || (n > 1 && !(b > a)) {
        return Err(CliError::input(format!("grid `{spec}` needs a < b and n >= 1")));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
}

/// `PxN`, e.g. `400x800`.
pub fn parse_size(spec: &str) -> Result<(usize, usize), String> {
    let (p, n) = spec
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("size `{spec}` is not of the form PxN"))?;
    let p: usize = p.trim().parse().map_err(|_| format!("bad dimension in `{spec}`"))?;
    let n: usize = n.trim().parse().map_err(|_| format!("bad sample count in `{spec}`"))?;
    if p == 0 || n == 0 {
        return Err(format!("size `{spec}` must be positive"));
    }
    Ok((p, n))
}

/// `path` relative to `base` unless already absolute.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
