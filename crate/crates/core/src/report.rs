//! File outputs and the command implementations behind the `reconfsim` CLI.
//!
//! A run directory holds:
//!
//! | file | columns |
//! |------|---------|
//! | `records_<case_id>_a<k>.csv` | `case_id,approach,exp_index,efc_fpu_eol,efc_rpu_eol,chi_pu,q_pu_nom_1c,cycles_run,flag` |
//! | `summary_pu.csv` | `case_id,approach,sigma_s_rel,sigma_e_rel,rho,n_p,n_exp,n_valid,n_flagged,mean_chi,std_chi` |
//! | `summary_gm.csv` | `case_id,approach,sigma_s_rel,sigma_e_rel,rho,n_p,n_s,n_exp_gm,mean_chi_gm,std_chi_gm` |
//! | `trace_<case_id>_e<i>.csv` | `cycle,q_pu_1c,min_cell_q,max_cell_q,sum_efc` |
//! | `manifest.json` | see [`Manifest`] |
//!
//! `report` adds `hist/hist_<key>.csv` (`chi,bin_low,bin_high,frequency`),
//! `trend_<parameter>_a<k>.csv` and `gm/trend_gm_<key>.csv`.
//!
//! χ values are percent. All files are deterministic for a fixed configuration
//! and seed: floats are written in shortest round-trip form, rows in case and
//! experiment order, and the manifest carries no timestamps.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ageing::{fit_distributions_from_data, read_bol_csv, read_eol_csv, read_rq_csv, FitResult};
use crate::config::{RqLineConfig, RunConfig};
use crate::error::{Error, Result};
use crate::experiment::{
    gm_bootstrap, histogram, parse_case_id, CaseCoordinates, CaseSpec, ExperimentRecord, GmSpec,
    SummaryStats,
};
use crate::fpu::{simulate_fpu_lifetimes, EolApproach, FpuOutcome};

/// File stem shared by a case's records, histogram and GM trend.
pub fn record_key(case_id: &str, approach: EolApproach) -> String {
    format!("{case_id}_a{approach}")
}

pub fn records_file_name(case_id: &str, approach: EolApproach) -> String {
    format!("records_{}.csv", record_key(case_id, approach))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Input { path: path.to_owned(), message: e.to_string() }
}

pub fn write_records(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| io_err(path, format!("line {}: {e}", i + 2))))
        .collect()
}

/// Cycle trajectory of one simulated FPU.
pub fn write_trace(path: &Path, outcome: &FpuOutcome) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cycle", "q_pu_1c", "min_cell_q", "max_cell_q", "sum_efc"])?;
    for c in &outcome.cycles {
        w.serialize((c.cycle, c.q_pu_1c, c.min_cell_q, c.max_cell_q, c.sum_efc))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PuSummaryRow {
    case_id: String,
    approach: EolApproach,
    sigma_s_rel: f64,
    sigma_e_rel: f64,
    rho: f64,
    n_p: usize,
    n_exp: usize,
    n_valid: usize,
    n_flagged: usize,
    mean_chi: f64,
    std_chi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GmSummaryRow {
    case_id: String,
    approach: EolApproach,
    sigma_s_rel: f64,
    sigma_e_rel: f64,
    rho: f64,
    n_p: usize,
    n_s: usize,
    n_exp_gm: usize,
    mean_chi_gm: f64,
    std_chi_gm: f64,
}

/// Mean and sample std of the valid χ values (NaN where undefined).
fn pu_stats(records: &[ExperimentRecord]) -> (usize, f64, f64) {
    let chis: Vec<f64> = records.iter().filter(|r| !r.is_flagged()).map(|r| r.chi_pu).collect();
    match chis.len() {
        0 => (0, f64::NAN, f64::NAN),
        1 => (1, chis[0], f64::NAN),
        n => {
            let s = SummaryStats::from_values(&chis, 1).expect("n >= 2");
            (n, s.mean, s.std)
        }
    }
}

/// Entry of [`Manifest::cases`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCase {
    pub case_id: String,
    pub approach: EolApproach,
    pub n_exp_pu: usize,
    pub n_valid: usize,
    pub n_flagged: usize,
    pub records_file: String,
}

/// `manifest.json`: the resolved configuration (accepted back by `--config`),
/// the producing tool and every file written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub generator: String,
    pub version: String,
    pub config: RunConfig,
    pub cases: Vec<ManifestCase>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| io_err(path, e))
    }
}

/// What `cmd_run` produced.
#[derive(Debug)]
pub struct RunOutput {
    pub cases: Vec<CaseSpec>,
    pub records: Vec<Vec<ExperimentRecord>>,
    pub manifest: Manifest,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// GM statistics for every case, in case order.
fn gm_all(
    cases: &[(String, EolApproach)],
    records: &[&[ExperimentRecord]],
    spec: &GmSpec,
    workers: usize,
) -> Result<Vec<Option<BTreeMap<usize, SummaryStats>>>> {
    let run = |i: usize| {
        let valid = records[i].iter().filter(|r| !r.is_flagged()).count();
        if valid == 0 {
            eprintln!("warning: no valid records for {}, skipping GM", record_key(&cases[i].0, cases[i].1));
            return Ok(None);
        }
        gm_bootstrap(records[i], spec).map(Some)
    };
    if workers <= 1 {
        (0..cases.len()).map(run).collect()
    } else {
        pool(workers)?.install(|| (0..cases.len()).into_par_iter().map(run).collect())
    }
}

/// Executes every selected case and writes the run directory.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let engine = cfg.engine()?;
    let cases = cfg.cases()?;
    let records = engine.run_cases(&cases)?;
    let mut outputs = Vec::new();
    let mut manifest_cases = Vec::new();

    let mut pu_writer = csv::Writer::from_path(out.join("summary_pu.csv"))?;
    for (case, recs) in cases.iter().zip(&records) {
        let file = records_file_name(&case.case_id, case.approach);
        write_records(&out.join(&file), recs)?;
        let (n_valid, mean, std) = pu_stats(recs);
        let c = &case.coords;
        pu_writer.serialize(PuSummaryRow {
            case_id: case.case_id.clone(),
            approach: case.approach,
            sigma_s_rel: c.sigma_s_rel,
            sigma_e_rel: c.sigma_e_rel,
            rho: c.rho,
            n_p: c.n_p,
            n_exp: recs.len(),
            n_valid,
            n_flagged: recs.len() - n_valid,
            mean_chi: mean,
            std_chi: std,
        })?;
        manifest_cases.push(ManifestCase {
            case_id: case.case_id.clone(),
            approach: case.approach,
            n_exp_pu: case.n_exp_pu,
            n_valid,
            n_flagged: recs.len() - n_valid,
            records_file: file.clone(),
        });
        outputs.push(file);
    }
    pu_writer.flush()?;
    outputs.push("summary_pu.csv".into());

    let keys: Vec<(String, EolApproach)> = cases.iter().map(|c| (c.case_id.clone(), c.approach)).collect();
    let slices: Vec<&[ExperimentRecord]> = records.iter().map(Vec::as_slice).collect();
    let gm = gm_all(&keys, &slices, &cfg.gm, engine.workers)?;
    let mut gm_writer = csv::Writer::from_path(out.join("summary_gm.csv"))?;
    for (case, stats) in cases.iter().zip(&gm) {
        let Some(stats) = stats else { continue };
        let c = &case.coords;
        for (&n_s, s) in stats {
            gm_writer.serialize(GmSummaryRow {
                case_id: case.case_id.clone(),
                approach: case.approach,
                sigma_s_rel: c.sigma_s_rel,
                sigma_e_rel: c.sigma_e_rel,
                rho: c.rho,
                n_p: c.n_p,
                n_s,
                n_exp_gm: s.n,
                mean_chi_gm: s.mean,
                std_chi_gm: s.std,
            })?;
        }
    }
    gm_writer.flush()?;
    outputs.push("summary_gm.csv".into());

    if cfg.trace_experiments > 0 {
        let mut seen = std::collections::BTreeSet::new();
        for case in &cases {
            if !seen.insert(case.case_id.clone()) {
                continue;
            }
            for k in 0..cfg.trace_experiments.min(case.n_exp_pu) {
                let pu = engine.experiment_pu(&case.coords, k, case.master_seed)?;
                let outcomes = simulate_fpu_lifetimes(&pu, &engine.curve, &engine.proto, &EolApproach::ALL)?;
                let longest = outcomes.iter().max_by_key(|o| o.cycles_run).expect("two outcomes");
                let file = format!("trace_{}_e{k}.csv", case.case_id);
                write_trace(&out.join(&file), longest)?;
                outputs.push(file);
            }
        }
    }

    outputs.push("manifest.json".into());
    outputs.sort();
    let manifest = Manifest {
        schema_version: crate::config::SCHEMA_VERSION,
        generator: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.normalized()?,
        cases: manifest_cases,
        outputs,
    };
    let path = out.join("manifest.json");
    let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    writeln!(f).map_err(|e| io_err(&path, e))?;
    Ok(RunOutput { cases, records, manifest })
}

#[derive(Serialize)]
struct FitFragment {
    distributions: crate::ageing::AgeingDistributions,
    rq_line: RqLineConfig,
}

/// Fits the ageing distributions and the R–Q line; returns the result and a
/// TOML fragment that `RunConfig` accepts.
pub fn cmd_fit(bol: &Path, eol: &Path, rq: &Path) -> Result<(FitResult, String)> {
    let bol_v = read_bol_csv(bol)?;
    let eol_v = read_eol_csv(eol)?;
    let rq_v = read_rq_csv(rq)?;
    let fit = fit_distributions_from_data(&bol_v, &eol_v, &rq_v)?;
    let fragment = FitFragment {
        distributions: fit.distributions,
        rq_line: RqLineConfig { rho: fit.rq.rho, k_rq: Some(fit.rq.k_rq), l_rq: Some(fit.rq.l_rq) },
    };
    let body = toml::to_string(&fragment).map_err(|e| Error::Config(e.to_string()))?;
    let text = format!(
        "# fitted from {} BOL capacities, {} EOL EFC counts and {} R-Q points\n{body}",
        bol_v.len(),
        eol_v.len(),
        rq_v.len()
    );
    Ok((fit, text))
}

/// Human-readable resolved case list.
pub fn cmd_grid(cfg: &RunConfig) -> Result<String> {
    let cases = cfg.cases()?;
    let mut s = String::from("case_id,approach,n_exp_pu,master_seed\n");
    for c in &cases {
        s.push_str(&format!("{},{},{},{}\n", c.case_id, c.approach, c.n_exp_pu, c.master_seed));
    }
    Ok(s)
}

/// One histogram row: bin centre, edges and the share of records in the bin.
pub fn histogram_rows(chis: &[f64], bins: usize) -> Vec<(f64, f64, f64, f64)> {
    let n = chis.len() as f64;
    histogram(chis, bins)
        .into_iter()
        .map(|b| (0.5 * (b.low + b.high), b.low, b.high, b.count as f64 / n))
        .collect()
}

/// Coordinates a trend holds fixed: the fitted spreads and ρ with N_p = 10,
/// or the nearest values present.
const TREND_REFERENCE: [f64; 4] = [0.0028, 0.111, 124.5, 10.0];

const PARAMETERS: [&str; 4] = ["sigma_s_rel", "sigma_e_rel", "rho", "n_p"];

fn coord_values(c: &CaseCoordinates) -> [f64; 4] {
    [c.sigma_s_rel, c.sigma_e_rel, c.rho, c.n_p as f64]
}

/// What `cmd_report` produced.
#[derive(Debug, Default)]
pub struct ReportOutput {
    pub histograms: Vec<PathBuf>,
    pub trends: Vec<PathBuf>,
    pub gm_trends: Vec<PathBuf>,
}

/// Histogram, trend and GM-trend files from a directory of record files.
/// `gm` defaults to the spec in the directory's manifest, if any.
pub fn cmd_report(records_dir: &Path, out_dir: &Path, bins: usize, gm: Option<GmSpec>, workers: usize) -> Result<ReportOutput> {
    if bins == 0 {
        return Err(Error::Config("bins must be >= 1".into()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(records_dir)
        .map_err(|e| io_err(records_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("records_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(io_err(records_dir, "no records_*.csv files found"));
    }
    let gm = match gm {
        Some(g) => g,
        None => {
            let m = records_dir.join("manifest.json");
            if m.exists() { Manifest::read(&m)?.config.gm } else { GmSpec::default() }
        }
    };

    let mut groups: BTreeMap<(String, EolApproach), Vec<ExperimentRecord>> = BTreeMap::new();
    for f in &files {
        for r in read_records(f)? {
            groups.entry((r.case_id.clone(), r.approach)).or_default().push(r);
        }
    }
    let mut out = ReportOutput::default();
    let hist_dir = out_dir.join("hist");
    fs::create_dir_all(&hist_dir).map_err(|e| io_err(&hist_dir, e))?;
    let mut stats: BTreeMap<(String, EolApproach), (CaseCoordinates, usize, f64, f64)> = BTreeMap::new();
    for ((case_id, approach), recs) in &groups {
        let coords = parse_case_id(case_id)?;
        let chis: Vec<f64> = recs.iter().filter(|r| !r.is_flagged()).map(|r| r.chi_pu).collect();
        let path = hist_dir.join(format!("hist_{}.csv", record_key(case_id, *approach)));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["chi", "bin_low", "bin_high", "frequency"])?;
        for row in histogram_rows(&chis, bins) {
            w.serialize(row)?;
        }
        w.flush()?;
        out.histograms.push(path);
        let (n, mean, std) = pu_stats(recs);
        stats.insert((case_id.clone(), *approach), (coords, n, mean, std));
    }

    for approach in EolApproach::ALL {
        let rows: Vec<_> = stats.iter().filter(|((_, a), _)| *a == approach).map(|(_, v)| v).collect();
        if rows.is_empty() {
            continue;
        }
        // nearest available value to the reference on each axis
        let reference: Vec<f64> = (0..4)
            .map(|i| {
                rows.iter()
                    .map(|r| coord_values(&r.0)[i])
                    .min_by(|a, b| {
                        (a - TREND_REFERENCE[i]).abs().total_cmp(&(b - TREND_REFERENCE[i]).abs())
                    })
                    .expect("non-empty")
            })
            .collect();
        for (p, name) in PARAMETERS.iter().enumerate() {
            let mut selected: Vec<_> = rows
                .iter()
                .filter(|r| {
                    let v = coord_values(&r.0);
                    (0..4).all(|i| i == p || v[i] == reference[i])
                })
                .collect();
            selected.sort_by(|a, b| coord_values(&a.0)[p].total_cmp(&coord_values(&b.0)[p]));
            let path = out_dir.join(format!("trend_{name}_a{approach}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record([
                "parameter", "value", "sigma_s_rel", "sigma_e_rel", "rho", "n_p", "n", "mean_chi", "std_chi",
            ])?;
            for (c, n, mean, std) in selected {
                w.serialize((name, coord_values(c)[p], c.sigma_s_rel, c.sigma_e_rel, c.rho, c.n_p, n, mean, std))?;
            }
            w.flush()?;
            out.trends.push(path);
        }
    }

    let gm_dir = out_dir.join("gm");
    fs::create_dir_all(&gm_dir).map_err(|e| io_err(&gm_dir, e))?;
    let keys: Vec<(String, EolApproach)> = groups.keys().cloned().collect();
    let slices: Vec<&[ExperimentRecord]> = groups.values().map(Vec::as_slice).collect();
    let gm_stats = gm_all(&keys, &slices, &gm, workers)?;
    for ((case_id, approach), s) in keys.iter().zip(gm_stats) {
        let Some(s) = s else { continue };
        let path = gm_dir.join(format!("trend_gm_{}.csv", record_key(case_id, *approach)));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["n_s", "n_exp_gm", "mean_chi_gm", "std_chi_gm"])?;
        for (n_s, st) in s {
            w.serialize((n_s, st.n, st.mean, st.std))?;
        }
        w.flush()?;
        out.gm_trends.push(path);
    }
    Ok(out)
}
