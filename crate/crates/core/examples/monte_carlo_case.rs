//! Runs the Monte Carlo experiments of one grid case under both end-of-life
//! approaches and prints the lifetime-extension statistics.
//!
//! ```text
//! cargo run --release --example monte_carlo_case -- [sigma_s_rel sigma_e_rel rho n_p n_exp]
//! ```

use std::time::Instant;

use reconfig_lifetime::prelude::*;

fn main() -> reconfig_lifetime::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let arg = |i: usize, default: f64| args.get(i).copied().unwrap_or(default);
    let coords = CaseCoordinates {
        sigma_s_rel: arg(0, 0.0028),
        sigma_e_rel: arg(1, 0.111),
        rho: arg(2, 124.5),
        n_p: arg(3, 10.0) as usize,
    };
    let n_exp = arg(4, 100.0) as usize;

    let engine = Engine::new(
        AgeingDistributions::fitted(),
        CellElectricalParams::default(),
        OcvCurve::default_nmc(),
        CyclingProtocol::default(),
    )?;
    let cases: Vec<CaseSpec> =
        EolApproach::ALL.iter().map(|&a| CaseSpec::new(coords, a, n_exp, 42)).collect();

    let start = Instant::now();
    let results = engine.run_cases(&cases)?;
    println!("case {} with {n_exp} experiments ({:.2?})", coords.case_id(), start.elapsed());
    for (case, records) in cases.iter().zip(&results) {
        let flagged = records.iter().filter(|r| r.is_flagged()).count();
        let s = summarize(records, 20)?;
        let min = records.iter().map(|r| r.chi_pu).fold(f64::INFINITY, f64::min);
        println!(
            "approach {}: mean chi {:.3} %, std {:.3} %, min {:.3} %, flagged {flagged}",
            case.approach, s.mean, s.std, min
        );
    }
    Ok(())
}
