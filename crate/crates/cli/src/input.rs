//! Parsing of the analysis input table: one row per hypothesis with an id,
//! a z-value, and an optional null-family specification.
//!
//! Expected CSV columns (header row required): `id`, `z`, and optionally
//! `family` (`normal`, the default, or `nct`), `sigma` (normal scale,
//! default 1), `nu` (noncentral-t degrees of freedom, required for `nct`),
//! `alpha`/`beta` (optional overrides of the noncentral-t normalizing
//! transform).

use crate::CliError;
use dirfdr::null::NullFamily;
use dirfdr::ZSample;
use std::collections::HashSet;
use std::path::Path;

pub struct AnalysisInput {
    pub ids: Vec<String>,
    pub sample: ZSample,
}

fn parse_optional(field: Option<&str>, what: &str) -> Result<Option<f64>, String> {
    match field {
        None => Ok(None),
        Some(s) if s.trim().is_empty() => Ok(None),
        Some(s) => s
            .trim()
            .parse::<f64>()
            .map(Some)
            .map_err(|_| format!("{what} is not a number: {s}")),
    }
}

pub fn read_analysis_csv(path: &Path) -> Result<AnalysisInput, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("bad header row: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = col("id").ok_or_else(|| CliError::input("missing required column: id"))?;
    let z_col = col("z").ok_or_else(|| CliError::input("missing required column: z"))?;
    let family_col = col("family");
    let sigma_col = col("sigma");
    let nu_col = col("nu");
    let alpha_col = col("alpha");
    let beta_col = col("beta");

    let mut ids = Vec::new();
    let mut zs = Vec::new();
    let mut families = Vec::new();
    let mut seen = HashSet::new();
    let mut problems: Vec<String> = Vec::new();

    for (index, record) in reader.records().enumerate() {
        let line = index + 2; // header is line 1
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("row {line}: {e}"));
                continue;
            }
        };
        let mut row_error = |msg: String| problems.push(format!("row {line}: {msg}"));

        let id = record.get(id_col).unwrap_or("").trim().to_string();
        if id.is_empty() {
            row_error("empty id".into());
            continue;
        }
        if !seen.insert(id.clone()) {
            row_error(format!("duplicate id: {id}"));
            continue;
        }
        let z = match record.get(z_col).unwrap_or("").trim().parse::<f64>() {
            Ok(z) => z,
            Err(_) => {
                row_error(format!("z is not a number: {}", record.get(z_col).unwrap_or("")));
                continue;
            }
        };
        if !z.is_finite() {
            row_error(format!("z must be finite, got {z}"));
            continue;
        }
        if z == 0.0 {
            row_error("z is exactly zero; its sign is undefined".into());
            continue;
        }

        let family_name = family_col
            .and_then(|c| record.get(c))
            .map(|s| s.trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| "normal".into());
        let get = |c: Option<usize>| c.and_then(|c| record.get(c));
        let family = (|| -> Result<NullFamily, String> {
            match family_name.as_str() {
                "normal" => {
                    let sigma = parse_optional(get(sigma_col), "sigma")?.unwrap_or(1.0);
                    NullFamily::normal(sigma).map_err(|e| e.to_string())
                }
                "nct" => {
                    let nu = parse_optional(get(nu_col), "nu")?
                        .ok_or_else(|| "family nct requires nu".to_string())?;
                    let alpha = parse_optional(get(alpha_col), "alpha")?;
                    let beta = parse_optional(get(beta_col), "beta")?;
                    match (alpha, beta) {
                        (Some(a), Some(b)) => {
                            NullFamily::noncentral_t_with(nu, a, b).map_err(|e| e.to_string())
                        }
                        (None, None) => NullFamily::noncentral_t(nu).map_err(|e| e.to_string()),
                        _ => Err("alpha and beta must be overridden together".into()),
                    }
                }
                other => Err(format!("unknown family: {other}")),
            }
        })();
        match family {
            Ok(f) => {
                ids.push(id);
                zs.push(z);
                families.push(f);
            }
            Err(msg) => row_error(msg),
        }
    }

    if !problems.is_empty() {
        return Err(CliError::input(format!(
            "{} malformed row(s):\n  {}",
            problems.len(),
            problems.join("\n  ")
        )));
    }
    if ids.is_empty() {
        return Err(CliError::input("input contains no data rows"));
    }
    let sample = ZSample::new(zs, families).map_err(|e| CliError::input(e.to_string()))?;
    Ok(AnalysisInput { ids, sample })
}

/// Comma-separated list of split-point candidates in (0,1).
pub fn parse_lambda_grid(raw: &str) -> Result<Vec<f64>, CliError> {
    let mut grid = Vec::new();
    for part in raw.split(',') {
        let v: f64 = part
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("bad lambda-grid entry: {part}")))?;
        grid.push(v);
    }
    Ok(grid)
}
