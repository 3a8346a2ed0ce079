use serde::{Deserialize, Serialize};

use super::CaseSpec;
use crate::error::{Error, Result};
use crate::fpu::EolApproach;

/// The four swept quantities of one case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseCoordinates {
    /// σ_s / μ_s.
    pub sigma_s_rel: f64,
    /// σ_e / μ_e.
    pub sigma_e_rel: f64,
    /// Degrees.
    pub rho: f64,
    pub n_p: usize,
}

impl CaseCoordinates {
    /// `ss{σs}_se{σe}_rho{ρ}_np{Np}` using shortest round-trip float formatting.
    pub fn case_id(&self) -> String {
        format!(
            "ss{}_se{}_rho{}_np{}",
            self.sigma_s_rel, self.sigma_e_rel, self.rho, self.n_p
        )
    }
}

pub fn parse_case_id(id: &str) -> Result<CaseCoordinates> {
    let bad = || Error::InvalidParameter(format!("malformed case id {id:?}"));
    let mut parts = id.split('_');
    let mut field = |prefix: &str| -> Result<&str> {
        parts.next().and_then(|p| p.strip_prefix(prefix)).ok_or_else(bad)
    };
    let sigma_s_rel = field("ss")?.parse().map_err(|_| bad())?;
    let sigma_e_rel = field("se")?.parse().map_err(|_| bad())?;
    let rho = field("rho")?.parse().map_err(|_| bad())?;
    let n_p = field("np")?.parse().map_err(|_| bad())?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(CaseCoordinates { sigma_s_rel, sigma_e_rel, rho, n_p })
}

/// Axis values of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseGridAxes {
    pub sigma_s_rel: Vec<f64>,
    pub sigma_e_rel: Vec<f64>,
    pub rho: Vec<f64>,
    pub n_p: Vec<usize>,
}

impl Default for CaseGridAxes {
    fn default() -> Self {
        Self {
            sigma_s_rel: vec![0.001, 0.0028, 0.01],
            sigma_e_rel: vec![0.01, 0.03, 0.111],
            rho: vec![124.5, 105.7, 97.3],
            n_p: vec![2, 4, 6, 8, 10, 12, 20],
        }
    }
}

impl CaseGridAxes {
    pub fn coordinates(&self) -> Vec<CaseCoordinates> {
        let mut out = Vec::new();
        for &sigma_s_rel in &self.sigma_s_rel {
            for &sigma_e_rel in &self.sigma_e_rel {
                for &rho in &self.rho {
                    for &n_p in &self.n_p {
                        out.push(CaseCoordinates { sigma_s_rel, sigma_e_rel, rho, n_p });
                    }
                }
            }
        }
        out
    }
}

/// Cartesian product of the axes, one case per approach and grid point.
pub fn build_case_grid(
    axes: &CaseGridAxes,
    approaches: &[EolApproach],
    n_exp_pu: usize,
    master_seed: u64,
) -> Vec<CaseSpec> {
    let mut cases = Vec::new();
    for &approach in approaches {
        for coords in axes.coordinates() {
            cases.push(CaseSpec::new(coords, approach, n_exp_pu, master_seed));
        }
    }
    cases
}
