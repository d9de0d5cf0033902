//! Delimited series files: a header row, one strictly positive response
//! column, optional covariate columns, and an optional date column that
//! is echoed into outputs but never used numerically.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct SeriesFile {
    path: String,
    headers: Vec<String>,
    /// Numeric columns, parallel to `headers`; the date column slot is
    /// left empty.
    columns: Vec<Vec<f64>>,
    pub dates: Option<Vec<String>>,
    pub date_header: Option<String>,
    pub n: usize,
}

impl SeriesFile {
    /// Reads a comma-delimited file with a header row, parsing every
    /// non-date cell as a number. Parse failures name the row and
    /// column.
    pub fn load(path: &Path, date_column: Option<&str>) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_owned)
            .collect();
        // A configured date column missing from this particular file is
        // treated as absent (future/actuals files often carry none).
        let date_idx = date_column.and_then(|name| headers.iter().position(|h| h == name));

        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        let mut dates: Vec<String> = Vec::new();
        let mut n = 0usize;
        for (row, record) in rdr.records().enumerate() {
            let record = record
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            if record.len() != headers.len() {
                return Err(CliError::Input(format!(
                    "{}, row {}: expected {} fields, found {}",
                    path.display(),
                    row + 1,
                    headers.len(),
                    record.len()
                )));
            }
            for (j, cell) in record.iter().enumerate() {
                if Some(j) == date_idx {
                    dates.push(cell.to_owned());
                    continue;
                }
                if cell.is_empty() {
                    return Err(CliError::Input(format!(
                        "{}, row {}, column '{}': missing value",
                        path.display(),
                        row + 1,
                        headers[j]
                    )));
                }
                let v: f64 = cell.parse().map_err(|_| {
                    CliError::Input(format!(
                        "{}, row {}, column '{}': cannot parse '{}' as a number",
                        path.display(),
                        row + 1,
                        headers[j],
                        cell
                    ))
                })?;
                if !v.is_finite() {
                    return Err(CliError::Input(format!(
                        "{}, row {}, column '{}': non-finite value",
                        path.display(),
                        row + 1,
                        headers[j]
                    )));
                }
                columns[j].push(v);
            }
            n += 1;
        }
        if n == 0 {
            return Err(CliError::Input(format!(
                "{} holds no data rows",
                path.display()
            )));
        }
        let date_header = date_idx.map(|i| headers[i].clone());
        Ok(Self {
            path: path.display().to_string(),
            headers,
            columns,
            dates: date_idx.map(|_| dates),
            date_header,
            n,
        })
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// First column that is not the date column.
    pub fn default_response(&self) -> CliResult<&str> {
        self.headers
            .iter()
            .find(|h| Some(h.as_str()) != self.date_header.as_deref())
            .map(String::as_str)
            .ok_or_else(|| CliError::Input(format!("{}: no usable columns", self.path)))
    }

    /// Gathers named columns into a design matrix with a leading
    /// intercept column; missing names are reported together.
    pub fn design_matrix(&self, covariates: &[String]) -> CliResult<DMatrix<f64>> {
        let missing: Vec<&str> = covariates
            .iter()
            .filter(|c| self.column(c).is_none())
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Input(format!(
                "{}: missing columns: {}",
                self.path,
                missing.join(", ")
            )));
        }
        let mut m = DMatrix::from_element(self.n, covariates.len() + 1, 1.0);
        for (k, name) in covariates.iter().enumerate() {
            let col = self.column(name).expect("checked above");
            for (i, v) in col.iter().enumerate() {
                m[(i, k + 1)] = *v;
            }
        }
        Ok(m)
    }

    /// The response column, strictly positive; violations name the row.
    pub fn response(&self, name: Option<&str>) -> CliResult<(String, Vec<f64>)> {
        let name = match name {
            Some(n) => n.to_owned(),
            None => self.default_response()?.to_owned(),
        };
        let col = self.column(&name).ok_or_else(|| {
            CliError::Input(format!(
                "{}: response column '{}' not found",
                self.path, name
            ))
        })?;
        for (i, v) in col.iter().enumerate() {
            if *v <= 0.0 {
                return Err(CliError::Input(format!(
                    "{}: response '{}' must be strictly positive; row {} holds {}",
                    self.path,
                    name,
                    i + 1,
                    v
                )));
            }
        }
        Ok((name, col.to_vec()))
    }
}
