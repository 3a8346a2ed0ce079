use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::AgeingDistributions;
use crate::error::{Error, Result};

/// Least-squares R–Q line as fitted, before pinning through (1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RqFit {
    pub k_rq: f64,
    pub l_rq: f64,
    /// `atan(1 - l_rq)` mapped into (90°, 180°).
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub distributions: AgeingDistributions,
    pub rq: RqFit,
}

fn mean_std(values: &[f64], what: &str) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{what}: need at least 2 values, got {}",
            values.len()
        )));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok((values[0], 0.0));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

/// Sample mean/std of the BOL capacities and EOL EFCs, and the ordinary
/// least-squares line through the normalized (Q̃, R̃) points.
pub fn fit_distributions_from_data(
    bol_capacities: &[f64],
    eol_efcs: &[f64],
    rq_points: &[(f64, f64)],
) -> Result<FitResult> {
    let (mu_s, sigma_s) = mean_std(bol_capacities, "BOL capacities")?;
    let (mu_e, sigma_e) = mean_std(eol_efcs, "EOL EFCs")?;
    if rq_points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "R-Q points: need at least 2, got {}",
            rq_points.len()
        )));
    }
    let n = rq_points.len() as f64;
    let qm = rq_points.iter().map(|p| p.0).sum::<f64>() / n;
    let rm = rq_points.iter().map(|p| p.1).sum::<f64>() / n;
    let sqq: f64 = rq_points.iter().map(|p| (p.0 - qm).powi(2)).sum();
    let sqr: f64 = rq_points.iter().map(|p| (p.0 - qm) * (p.1 - rm)).sum();
    if sqq == 0.0 {
        return Err(Error::InsufficientData("R-Q points share a single Q̃ value".into()));
    }
    let slope = sqr / sqq;
    let k_rq = -slope;
    if !(k_rq > 0.0) {
        return Err(Error::Domain(format!(
            "fitted resistance does not rise as capacity fades (k_rq = {k_rq})"
        )));
    }
    let l_rq = rm - slope * qm;
    let rho = (1.0 - l_rq).atan().to_degrees();
    let rho = if rho < 0.0 { rho + 180.0 } else { rho };

    let distributions = AgeingDistributions::new(mu_s, sigma_s, mu_e, sigma_e)?;
    Ok(FitResult { distributions, rq: RqFit { k_rq, l_rq, rho } })
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize::<T>().enumerate() {
        rows.push(row.map_err(|e| Error::Input {
            path: path.to_owned(),
            // header is line 1
            message: format!("line {}: {e}", i + 2),
        })?);
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct BolRow {
    #[allow(dead_code)]
    cell_id: String,
    q_tilde: f64,
}

#[derive(Deserialize)]
struct EolRow {
    #[allow(dead_code)]
    cell_id: String,
    efc_eol: f64,
}

#[derive(Deserialize)]
struct RqRow {
    q_tilde: f64,
    r_tilde: f64,
}

/// `cell_id,q_tilde`
pub fn read_bol_csv(path: &Path) -> Result<Vec<f64>> {
    Ok(read_rows::<BolRow>(path)?.into_iter().map(|r| r.q_tilde).collect())
}

/// `cell_id,efc_eol`
pub fn read_eol_csv(path: &Path) -> Result<Vec<f64>> {
    Ok(read_rows::<EolRow>(path)?.into_iter().map(|r| r.efc_eol).collect())
}

/// `q_tilde,r_tilde`
pub fn read_rq_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    Ok(read_rows::<RqRow>(path)?
        .into_iter()
        .map(|r| (r.q_tilde, r.r_tilde))
        .collect())
}
