//! CSV dataset ingestion: header row required, one named response column,
//! every other column a numeric covariate. Errors name the offending row and
//! column.

use std::path::Path;

use anyhow::{bail, Context, Result};
use sbs_core::Dataset;

#[derive(Debug)]
pub struct LoadedData {
    pub dataset: Dataset,
    /// Covariate names in column order (response removed).
    pub covariate_names: Vec<String>,
}

pub fn load_csv(path: &Path, response: &str) -> Result<LoadedData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers: Vec<String> = reader
        .headers()
        .context("reading CSV header")?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let Some(response_idx) = headers.iter().position(|h| h == response) else {
        bail!(
            "response column '{response}' not found; header has: {}",
            headers.join(", ")
        );
    };
    let covariate_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != response_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut y = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); covariate_names.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("reading data row {}", row_idx + 1))?;
        if record.len() != headers.len() {
            bail!(
                "row {}: has {} fields, header has {}",
                row_idx + 1,
                record.len(),
                headers.len()
            );
        }
        let mut col = 0;
        for (field_idx, raw) in record.iter().enumerate() {
            let name = &headers[field_idx];
            let value: f64 = match raw.trim().parse() {
                Ok(v) => v,
                Err(_) => bail!(
                    "row {}, column '{name}': missing or non-numeric value '{raw}'",
                    row_idx + 1
                ),
            };
            if !value.is_finite() {
                bail!(
                    "row {}, column '{name}': non-finite value '{raw}'",
                    row_idx + 1
                );
            }
            if field_idx == response_idx {
                y.push(value);
            } else {
                columns[col].push(value);
                col += 1;
            }
        }
    }
    if y.len() < 3 {
        bail!("need at least 3 data rows, got {}", y.len());
    }
    if covariate_names.is_empty() {
        bail!("no covariate columns besides the response");
    }
    Ok(LoadedData {
        dataset: Dataset::from_columns(y, columns)?,
        covariate_names,
    })
}
