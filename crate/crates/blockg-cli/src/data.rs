//! CSV ingestion and emission.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{csv_err, io_err, CliError, Result};

/// Numeric table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
        let headers: Vec<String> =
            rdr.headers().map_err(csv_err(path))?.iter().map(|h| h.trim().to_string()).collect();
        if headers.is_empty() {
            return Err(CliError::Data(format!("{}: no columns", path.display())));
        }
        for (i, h) in headers.iter().enumerate() {
            if headers[..i].contains(h) {
                return Err(CliError::Data(format!("{}: duplicate column `{h}`", path.display())));
            }
        }
        let mut rows = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err(path))?;
            let row = rec
                .iter()
                .enumerate()
                .map(|(c, field)| {
                    field.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                        CliError::Data(format!(
                            "{}: row {}, column `{}`: `{field}` is not a finite number",
                            path.display(),
                            r + 1,
                            headers[c]
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(CliError::Data(format!("{}: no data rows", path.display())));
        }
        Ok(Table { headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("no column named `{name}`")))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Rows restricted to `columns`, in that order.
    pub fn select(&self, columns: &[usize]) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| columns.iter().map(|&j| r[j]).collect()).collect()
    }

    pub fn subset_rows(&self, rows: &[usize]) -> Table {
        Table { headers: self.headers.clone(), rows: rows.iter().map(|&i| self.rows[i].clone()).collect() }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
        w.write_record(&self.headers).map_err(csv_err(path))?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err(path))?;
        }
        w.flush().map_err(io_err(path))
    }
}

/// Predictors and response pulled out of a table.
#[derive(Debug, Clone)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl Design {
    /// Every column except `response` is a predictor.
    pub fn from_table(table: &Table, response: &str) -> Result<Self> {
        let yj = table.column_index(response)?;
        let cols: Vec<usize> = (0..table.headers.len()).filter(|&j| j != yj).collect();
        let names = cols.iter().map(|&j| table.headers[j].clone()).collect();
        let x = DMatrix::from_fn(table.rows.len(), cols.len(), |r, c| table.rows[r][cols[c]]);
        Ok(Design { names, x, y: table.column(yj) })
    }

    /// Rows of `table` laid out in the order of `names`.
    pub fn rows_for(table: &Table, names: &[String]) -> Result<Vec<Vec<f64>>> {
        let idx = names
            .iter()
            .map(|n| {
                table.column_index(n).map_err(|_| {
                    CliError::Data(format!("new data lacks training column `{n}`"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(table.select(&idx))
    }
}

/// Adds squares and pairwise products of the predictors, the usual
/// second-order expansion (`p` columns become `p + p(p+1)/2`).
pub fn expand_quadratic(table: &Table, response: &str) -> Result<Table> {
    let yj = table.column_index(response)?;
    let base: Vec<usize> = (0..table.headers.len()).filter(|&j| j != yj).collect();
    let mut headers: Vec<String> = base.iter().map(|&j| table.headers[j].clone()).collect();
    for (a, &i) in base.iter().enumerate() {
        for &j in &base[a..] {
            headers.push(if i == j {
                format!("{}^2", table.headers[i])
            } else {
                format!("{}:{}", table.headers[i], table.headers[j])
            });
        }
    }
    headers.push(response.to_string());
    let rows = table
        .rows
        .iter()
        .map(|r| {
            let mut out: Vec<f64> = base.iter().map(|&j| r[j]).collect();
            for (a, &i) in base.iter().enumerate() {
                out.extend(base[a..].iter().map(|&j| r[i] * r[j]));
            }
            out.push(r[yj]);
            out
        })
        .collect();
    Ok(Table { headers, rows })
}

/// Block labels for a fixed partition: a CSV with `column,block` rows naming
/// every predictor. Labels are canonicalized in predictor order.
pub fn read_partition(path: &Path, names: &[String]) -> Result<Vec<usize>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        if rec.len() != 2 {
            return Err(CliError::Data(format!("{}: expected column,block rows", path.display())));
        }
        pairs.push((rec[0].trim().to_string(), rec[1].trim().to_string()));
    }
    let mut seen: Vec<String> = Vec::new();
    names
        .iter()
        .map(|n| {
            let (_, block) = pairs.iter().find(|(c, _)| c == n).ok_or_else(|| {
                CliError::Data(format!("{}: no block for column `{n}`", path.display()))
            })?;
            Ok(match seen.iter().position(|b| b == block) {
                Some(k) => k,
                None => {
                    seen.push(block.clone());
                    seen.len() - 1
                }
            })
        })
        .collect()
}

pub fn write_records<S: Serialize>(path: &Path, records: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in records {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| CliError::Json { path: path.into(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_expansion_of_eight_columns_has_44() {
        let headers: Vec<String> = (0..8).map(|j| format!("v{j}")).chain(["y".into()]).collect();
        let t = Table { headers, rows: vec![(1..=9).map(f64::from).collect()] };
        let e = expand_quadratic(&t, "y").unwrap();
        assert_eq!(e.headers.len(), 45);
        assert_eq!(e.headers[8], "v0^2");
        assert_eq!(e.headers[9], "v0:v1");
        // v1 * v2 = 2 * 3
        let k = e.headers.iter().position(|h| h == "v1:v2").unwrap();
        assert_eq!(e.rows[0][k], 6.0);
        assert_eq!(*e.rows[0].last().unwrap(), 9.0);
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let t = Table {
            headers: vec!["a".into(), "b,c".into()],
            rows: vec![vec![0.1, -1e-300], vec![1.0 / 3.0, 2.5e17]],
        };
        t.write(&p).unwrap();
        assert_eq!(Table::read(&p).unwrap(), t);
    }

    #[test]
    fn rejects_text_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "a,b\n1,x\n").unwrap();
        assert!(matches!(Table::read(&p), Err(CliError::Data(_))));
    }
}
