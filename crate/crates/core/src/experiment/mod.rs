//! Monte Carlo orchestration: case grids, per-experiment FPU/RPU comparison,
//! lifetime-extension statistics and the series-module bootstrap.

mod grid;
mod seed;
mod stats;

pub use grid::{build_case_grid, parse_case_id, CaseCoordinates, CaseGridAxes};
pub use seed::{experiment_rng, trial_rng};
pub use stats::{
    chi_pu, gm_bootstrap, histogram, summarize, GmSpec, HistogramBin, IndexSampler, SummaryStats,
};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ageing::{rho_to_line, sample_cell_lines, AgeingDistributions};
use crate::electrics::{CellElectricalParams, OcvCurve};
use crate::error::{Error, Result};
use crate::fpu::{simulate_fpu_lifetimes, CyclingProtocol, EolApproach, PuConfig};
use crate::rpu::{rpu_eol_capacity_approach1, rpu_eol_capacity_approach2};

/// How per-experiment random streams are keyed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedScope {
    /// Streams keyed by `(master_seed, case_id, exp_index)`: cases are
    /// statistically independent.
    #[default]
    PerCase,
    /// Streams keyed by `(master_seed, exp_index)` only: experiment `k` of
    /// every case reuses the same standard-normal draws, so cases can be
    /// compared with paired seeds.
    Paired,
}

/// One grid point of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub coords: CaseCoordinates,
    pub n_exp_pu: usize,
    pub approach: EolApproach,
    pub master_seed: u64,
    /// Encodes the four coordinates; shared by both approaches of one point.
    pub case_id: String,
}

impl CaseSpec {
    pub fn new(coords: CaseCoordinates, approach: EolApproach, n_exp_pu: usize, master_seed: u64) -> Self {
        Self { case_id: coords.case_id(), coords, n_exp_pu, approach, master_seed }
    }
}

/// Paired FPU/RPU result of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub case_id: String,
    pub approach: EolApproach,
    pub exp_index: usize,
    pub efc_fpu_eol: f64,
    pub efc_rpu_eol: f64,
    /// Percent.
    pub chi_pu: f64,
    pub q_pu_nom_1c: f64,
    pub cycles_run: u32,
    /// Failure reason for flagged experiments; flagged records carry NaN
    /// results and are excluded from statistics.
    pub flag: Option<String>,
}

impl ExperimentRecord {
    pub fn is_flagged(&self) -> bool {
        self.flag.is_some()
    }

    fn flagged(case_id: &str, approach: EolApproach, exp_index: usize, err: &Error) -> Self {
        Self {
            case_id: case_id.to_owned(),
            approach,
            exp_index,
            efc_fpu_eol: f64::NAN,
            efc_rpu_eol: f64::NAN,
            chi_pu: f64::NAN,
            q_pu_nom_1c: f64::NAN,
            cycles_run: 0,
            flag: Some(err.to_string()),
        }
    }
}

/// Shared inputs of every experiment in a run.
#[derive(Debug, Clone)]
pub struct Engine {
    pub base: AgeingDistributions,
    pub params: CellElectricalParams,
    pub curve: OcvCurve,
    pub proto: CyclingProtocol,
    pub seed_scope: SeedScope,
    pub workers: usize,
}

impl Engine {
    pub fn new(
        base: AgeingDistributions,
        params: CellElectricalParams,
        curve: OcvCurve,
        proto: CyclingProtocol,
    ) -> Result<Self> {
        base.validate()?;
        proto.validate()?;
        params.check_curve(&curve)?;
        Ok(Self { base, params, curve, proto, seed_scope: SeedScope::PerCase, workers: 1 })
    }

    pub fn with_seed_scope(mut self, scope: SeedScope) -> Self {
        self.seed_scope = scope;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    fn stream_key<'a>(&self, case_id: &'a str) -> &'a str {
        match self.seed_scope {
            SeedScope::PerCase => case_id,
            SeedScope::Paired => "",
        }
    }

    /// Runs every experiment of `case`.
    pub fn run_case(&self, case: &CaseSpec) -> Result<Vec<ExperimentRecord>> {
        let mut out = self.run_point(&case.coords, &[case.approach], case.n_exp_pu, case.master_seed)?;
        Ok(out.remove(&case.approach).unwrap_or_default())
    }

    /// Runs a list of cases. Cases that share coordinates, size and seed but
    /// differ in approach reuse one FPU simulation per experiment. Returns
    /// records per case, in input order.
    pub fn run_cases(&self, cases: &[CaseSpec]) -> Result<Vec<Vec<ExperimentRecord>>> {
        let mut groups: BTreeMap<(String, usize, u64), Vec<usize>> = BTreeMap::new();
        for (i, c) in cases.iter().enumerate() {
            groups.entry((c.case_id.clone(), c.n_exp_pu, c.master_seed)).or_default().push(i);
        }
        let mut results: Vec<Vec<ExperimentRecord>> = vec![Vec::new(); cases.len()];
        for members in groups.values() {
            let first = &cases[members[0]];
            let approaches: Vec<EolApproach> = members.iter().map(|&i| cases[i].approach).collect();
            let mut by_approach =
                self.run_point(&first.coords, &approaches, first.n_exp_pu, first.master_seed)?;
            for &i in members {
                results[i] = by_approach.remove(&cases[i].approach).unwrap_or_default();
            }
        }
        Ok(results)
    }

    fn run_point(
        &self,
        coords: &CaseCoordinates,
        approaches: &[EolApproach],
        n_exp: usize,
        master_seed: u64,
    ) -> Result<BTreeMap<EolApproach, Vec<ExperimentRecord>>> {
        let mut approaches = approaches.to_vec();
        approaches.sort();
        approaches.dedup();
        let case_id = coords.case_id();
        let dist = self.base.with_relative_spread(coords.sigma_s_rel, coords.sigma_e_rel)?;
        rho_to_line(coords.rho)?;
        if coords.n_p == 0 {
            return Err(Error::InvalidParameter("n_p must be >= 1".into()));
        }
        let run = |k: usize| self.run_experiment(&case_id, coords, &dist, &approaches, k, master_seed);
        let per_exp: Vec<Vec<ExperimentRecord>> = if self.workers <= 1 {
            (0..n_exp).map(run).collect()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| (0..n_exp).into_par_iter().map(run).collect())
        };
        let mut out: BTreeMap<EolApproach, Vec<ExperimentRecord>> =
            approaches.iter().map(|&a| (a, Vec::with_capacity(n_exp))).collect();
        for recs in per_exp {
            for r in recs {
                out.get_mut(&r.approach).expect("known approach").push(r);
            }
        }
        Ok(out)
    }

    fn sample_pu(
        &self,
        coords: &CaseCoordinates,
        dist: &AgeingDistributions,
        exp_index: usize,
        master_seed: u64,
    ) -> Result<PuConfig> {
        let case_id = coords.case_id();
        let mut rng = experiment_rng(master_seed, self.stream_key(&case_id), exp_index as u64);
        let rcl = rho_to_line(coords.rho)?;
        let lines = sample_cell_lines(dist, &rcl, &self.params, coords.n_p, &mut rng)?;
        Ok(PuConfig::new(self.params, lines))
    }

    /// The parallel unit that experiment `exp_index` of a case simulates.
    pub fn experiment_pu(
        &self,
        coords: &CaseCoordinates,
        exp_index: usize,
        master_seed: u64,
    ) -> Result<PuConfig> {
        let dist = self.base.with_relative_spread(coords.sigma_s_rel, coords.sigma_e_rel)?;
        self.sample_pu(coords, &dist, exp_index, master_seed)
    }

    fn run_experiment(
        &self,
        case_id: &str,
        coords: &CaseCoordinates,
        dist: &AgeingDistributions,
        approaches: &[EolApproach],
        exp_index: usize,
        master_seed: u64,
    ) -> Vec<ExperimentRecord> {
        match self.experiment(coords, dist, approaches, exp_index, master_seed, case_id) {
            Ok(records) => records,
            Err(e) => approaches
                .iter()
                .map(|&a| ExperimentRecord::flagged(case_id, a, exp_index, &e))
                .collect(),
        }
    }

    fn experiment(
        &self,
        coords: &CaseCoordinates,
        dist: &AgeingDistributions,
        approaches: &[EolApproach],
        exp_index: usize,
        master_seed: u64,
        case_id: &str,
    ) -> Result<Vec<ExperimentRecord>> {
        let rcl = rho_to_line(coords.rho)?;
        let cfg = self.sample_pu(coords, dist, exp_index, master_seed)?;
        let outcomes = simulate_fpu_lifetimes(&cfg, &self.curve, &self.proto, approaches)?;
        let frac = self.proto.eol_capacity_fraction;
        let mut records = Vec::with_capacity(outcomes.len());
        for fpu in outcomes {
            let rpu = match fpu.approach {
                EolApproach::CapacityBased => rpu_eol_capacity_approach1(
                    &cfg.lines,
                    &rcl,
                    &self.params,
                    &self.curve,
                    fpu.q_pu_nom_1c,
                    frac,
                    self.proto.rpu_start_soc(),
                ),
                EolApproach::SafetyBased => {
                    Ok(rpu_eol_capacity_approach2(&cfg.lines, &rcl, &self.params, frac))
                }
            };
            let record = rpu.and_then(|rpu| {
                Ok(ExperimentRecord {
                    case_id: case_id.to_owned(),
                    approach: fpu.approach,
                    exp_index,
                    efc_fpu_eol: fpu.efc_fpu_eol,
                    efc_rpu_eol: rpu.efc_rpu_eol,
                    chi_pu: chi_pu(rpu.efc_rpu_eol, fpu.efc_fpu_eol)?,
                    q_pu_nom_1c: fpu.q_pu_nom_1c,
                    cycles_run: fpu.cycles_run,
                    flag: None,
                })
            });
            records.push(record.unwrap_or_else(|e| {
                ExperimentRecord::flagged(case_id, fpu.approach, exp_index, &e)
            }));
        }
        Ok(records)
    }
}

/// Runs `case` with a default engine built from the given inputs.
pub fn run_case(
    case: &CaseSpec,
    base: &AgeingDistributions,
    params: &CellElectricalParams,
    curve: &OcvCurve,
    proto: &CyclingProtocol,
) -> Result<Vec<ExperimentRecord>> {
    Engine::new(*base, *params, curve.clone(), *proto)?.run_case(case)
}
