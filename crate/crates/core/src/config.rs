//! Run configuration (TOML, schema version 1).
//!
//! Every key is optional and unknown keys are rejected. Quantities accept unit
//! suffixes (`"30 mOhm"`, `"3000 mAh"`, `"1 min"`); bare numbers are in Ah,
//! Ω, V, s, F and degrees. A `manifest.json` written by a run is also accepted
//! and reproduces that run.
//!
//! ```toml
//! schema_version = 1
//! master_seed = 42
//! n_exp_pu = 200
//! approach = "both"          # 1, 2 or "both"
//! seed_scope = "per_case"    # or "paired"
//! output_dir = "results"
//!
//! [distributions]
//! mu_s = 0.9939
//! sigma_s = 0.0028
//! mu_e = 615.85
//! sigma_e = 68.28
//!
//! [cell]
//! q_nom = "3 Ah"
//! r_nom = "30 mOhm"
//! v_min = "3.0 V"
//! v_max = "4.2 V"
//!
//! [ocv]
//! csv = "ocv.csv"            # or table = [[0.0, 3.0], ..., [1.0, 4.2]]
//!
//! [protocol]
//! dt = "60 s"
//! cv_cutoff_fraction = 0.0333
//! rpu_start = "full"         # or "charge_cutoff"
//!
//! [grid]
//! sigma_s_rel = ["0.1 %", "0.28 %", "1 %"]
//! sigma_e_rel = [0.01, 0.03, 0.111]
//! rho = [124.5, 105.7, 97.3]
//! n_p = [2, 4, 6, 8, 10, 12, 20]
//! filter = ["np10"]          # keep cases whose id contains any pattern
//!
//! [gm]
//! n_exp_gm = 10000
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ageing::{rho_to_line, AgeingDistributions};
use crate::electrics::{CellElectricalParams, OcvCurve};
use crate::error::{Error, Result};
use crate::experiment::{
    build_case_grid, parse_case_id, CaseGridAxes, CaseSpec, Engine, GmSpec, SeedScope,
};
use crate::fpu::{CyclingProtocol, EolApproach};
use crate::units;

pub const SCHEMA_VERSION: u32 = 1;

/// Which end-of-life approaches to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApproachSelection {
    CapacityBased,
    SafetyBased,
    #[default]
    Both,
}

impl ApproachSelection {
    pub fn approaches(self) -> Vec<EolApproach> {
        match self {
            ApproachSelection::CapacityBased => vec![EolApproach::CapacityBased],
            ApproachSelection::SafetyBased => vec![EolApproach::SafetyBased],
            ApproachSelection::Both => EolApproach::ALL.to_vec(),
        }
    }
}

impl FromStr for ApproachSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(ApproachSelection::CapacityBased),
            "2" => Ok(ApproachSelection::SafetyBased),
            "both" => Ok(ApproachSelection::Both),
            other => Err(Error::Config(format!("approach must be 1, 2 or both, got {other:?}"))),
        }
    }
}

impl fmt::Display for ApproachSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApproachSelection::CapacityBased => "1",
            ApproachSelection::SafetyBased => "2",
            ApproachSelection::Both => "both",
        })
    }
}

impl Serialize for ApproachSelection {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ApproachSelection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(u8),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Number(n) => n.to_string(),
            Raw::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Cell nameplate values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellConfig {
    #[serde(deserialize_with = "units::charge")]
    pub q_nom: f64,
    #[serde(deserialize_with = "units::resistance")]
    pub r_nom: f64,
    #[serde(deserialize_with = "units::voltage")]
    pub v_min: f64,
    #[serde(deserialize_with = "units::voltage")]
    pub v_max: f64,
    #[serde(deserialize_with = "units::opt_resistance", skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(deserialize_with = "units::opt_capacitance", skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
}

impl Default for CellConfig {
    fn default() -> Self {
        let p = CellElectricalParams::default();
        Self { q_nom: p.q_nom, r_nom: p.r_nom, v_min: p.v_min, v_max: p.v_max, r1: None, c1: None }
    }
}

impl CellConfig {
    pub fn params(&self) -> Result<CellElectricalParams> {
        let mut p = CellElectricalParams::new(self.q_nom, self.r_nom, self.v_min, self.v_max)?;
        p.r1 = self.r1;
        p.c1 = self.c1;
        Ok(p)
    }
}

/// OCV curve source; the built-in NMC-like table when both are absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcvSource {
    /// CSV with header `soc,ocv_volts`, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
}

impl OcvSource {
    pub fn curve(&self) -> Result<OcvCurve> {
        match (&self.csv, &self.table) {
            (Some(_), Some(_)) => Err(Error::Config("ocv: give either csv or table, not both".into())),
            (Some(path), None) => OcvCurve::from_csv(path),
            (None, Some(table)) => OcvCurve::new(table.clone()),
            (None, None) => Ok(OcvCurve::default_nmc()),
        }
    }
}

/// Resistance–capacity line, as written by `fit`. Its angle sets the ρ axis
/// when `grid.rho` is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RqLineConfig {
    #[serde(deserialize_with = "units::angle")]
    pub rho: f64,
    /// Unconstrained fit values; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_rq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_rq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(deserialize_with = "units::ratios")]
    pub sigma_s_rel: Vec<f64>,
    #[serde(deserialize_with = "units::ratios")]
    pub sigma_e_rel: Vec<f64>,
    #[serde(deserialize_with = "opt_angles", skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    pub n_p: Vec<usize>,
    /// Explicit case ids; replaces the Cartesian product when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cases: Option<Vec<String>>,
    /// Keep only cases whose id contains one of these substrings.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub filter: Vec<String>,
}

fn opt_angles<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<f64>>, D::Error> {
    units::angles(d).map(Some)
}

impl Default for GridConfig {
    fn default() -> Self {
        let axes = CaseGridAxes::default();
        Self {
            sigma_s_rel: axes.sigma_s_rel,
            sigma_e_rel: axes.sigma_e_rel,
            rho: None,
            n_p: axes.n_p,
            cases: None,
            filter: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
    pub seed_scope: SeedScope,
    pub approach: ApproachSelection,
    pub n_exp_pu: usize,
    /// Leading experiments per case whose cycle trajectory is written out.
    pub trace_experiments: usize,
    pub distributions: AgeingDistributions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rq_line: Option<RqLineConfig>,
    pub cell: CellConfig,
    pub ocv: OcvSource,
    pub protocol: CyclingProtocol,
    pub grid: GridConfig,
    pub gm: GmSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            master_seed: 42,
            workers: None,
            output_dir: PathBuf::from("results"),
            seed_scope: SeedScope::PerCase,
            approach: ApproachSelection::Both,
            n_exp_pu: 200,
            trace_experiments: 0,
            distributions: AgeingDistributions::fitted(),
            rq_line: None,
            cell: CellConfig::default(),
            ocv: OcvSource::default(),
            protocol: CyclingProtocol::default(),
            grid: GridConfig::default(),
            gm: GmSpec::default(),
        }
    }
}

/// Command-line overrides, applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub approach: Option<ApproachSelection>,
    pub n_exp_pu: Option<usize>,
    pub cases: Option<Vec<String>>,
    pub n_p: Option<Vec<usize>>,
    pub n_s: Option<Vec<usize>>,
}

impl RunConfig {
    /// Reads a TOML config, or the `config` member of a run manifest when the
    /// file ends in `.json`. Relative OCV paths resolve against the file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        let bad = |message: String| Error::Input { path: path.to_owned(), message };
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            #[derive(Deserialize)]
            struct Wrapped {
                config: RunConfig,
            }
            serde_json::from_str::<Wrapped>(&text).map_err(|e| bad(e.to_string()))?.config
        } else {
            Self::from_toml(&text).map_err(|e| bad(e.to_string()))?
        };
        if let (Some(csv), Some(dir)) = (&cfg.ocv.csv, path.parent()) {
            if csv.is_relative() {
                cfg.ocv.csv = Some(dir.join(csv));
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.master_seed = seed;
        }
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
        if let Some(w) = o.workers {
            self.workers = Some(w);
        }
        if let Some(a) = o.approach {
            self.approach = a;
        }
        if let Some(n) = o.n_exp_pu {
            self.n_exp_pu = n;
        }
        if let Some(c) = &o.cases {
            self.grid.filter = c.clone();
        }
        if let Some(n_p) = &o.n_p {
            self.grid.n_p = n_p.clone();
        }
        if let Some(n_s) = &o.n_s {
            self.gm.n_s_values = n_s.clone();
        }
    }

    fn rho_axis(&self) -> Vec<f64> {
        match (&self.grid.rho, &self.rq_line) {
            (Some(rho), _) => rho.clone(),
            (None, Some(line)) => vec![line.rho],
            (None, None) => CaseGridAxes::default().rho,
        }
    }

    pub fn axes(&self) -> CaseGridAxes {
        CaseGridAxes {
            sigma_s_rel: self.grid.sigma_s_rel.clone(),
            sigma_e_rel: self.grid.sigma_e_rel.clone(),
            rho: self.rho_axis(),
            n_p: self.grid.n_p.clone(),
        }
    }

    /// The resolved case list, filters applied.
    pub fn cases(&self) -> Result<Vec<CaseSpec>> {
        let approaches = self.approach.approaches();
        let mut cases = match &self.grid.cases {
            Some(ids) => {
                let mut out = Vec::new();
                for &a in &approaches {
                    for id in ids {
                        out.push(CaseSpec::new(parse_case_id(id)?, a, self.n_exp_pu, self.master_seed));
                    }
                }
                out
            }
            None => build_case_grid(&self.axes(), &approaches, self.n_exp_pu, self.master_seed),
        };
        if !self.grid.filter.is_empty() {
            cases.retain(|c| self.grid.filter.iter().any(|f| c.case_id.contains(f.as_str())));
        }
        Ok(cases)
    }

    pub fn engine(&self) -> Result<Engine> {
        let curve = self.ocv.curve()?;
        Ok(Engine::new(self.distributions, self.cell.params()?, curve, self.protocol)?
            .with_seed_scope(self.seed_scope)
            .with_workers(self.workers.unwrap_or(1)))
    }

    /// Checks every value that a run would use.
    pub fn validate(&self) -> Result<()> {
        if self.n_exp_pu == 0 {
            return Err(Error::Config("n_exp_pu must be >= 1".into()));
        }
        if self.gm.n_s_values.is_empty() || self.gm.n_s_values.contains(&0) {
            return Err(Error::Config("gm.n_s_values must be non-empty and >= 1".into()));
        }
        if self.gm.n_exp_gm < 2 {
            return Err(Error::Config("gm.n_exp_gm must be >= 2".into()));
        }
        self.engine()?;
        let cases = self.cases()?;
        if cases.is_empty() {
            return Err(Error::Config("the case selection is empty".into()));
        }
        for c in &cases {
            rho_to_line(c.coords.rho)?;
            self.distributions.with_relative_spread(c.coords.sigma_s_rel, c.coords.sigma_e_rel)?;
            if c.coords.n_p == 0 {
                return Err(Error::Config("n_p values must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// Self-contained copy for the manifest: the OCV table is inlined and the
    /// worker count, which never affects results, is dropped.
    pub fn normalized(&self) -> Result<RunConfig> {
        let mut cfg = self.clone();
        let curve = self.ocv.curve()?;
        cfg.ocv = OcvSource { csv: None, table: Some(curve.breakpoints().collect()) };
        cfg.grid.rho = Some(self.rho_axis());
        cfg.workers = None;
        Ok(cfg)
    }
}
