//! Bootstraps the lifetime extension of series-connected modules from one
//! case's PU experiments.
//!
//! ```text
//! cargo run --release --example gm_bootstrap -- [n_exp]
//! ```

use reconfig_lifetime::prelude::*;

fn main() -> reconfig_lifetime::Result<()> {
    let n_exp = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(40);
    let engine = Engine::new(
        AgeingDistributions::fitted(),
        CellElectricalParams::default(),
        OcvCurve::default_nmc(),
        CyclingProtocol::default(),
    )?;
    let coords = CaseCoordinates { sigma_s_rel: 0.0028, sigma_e_rel: 0.111, rho: 124.5, n_p: 10 };
    let records = engine.run_case(&CaseSpec::new(coords, EolApproach::SafetyBased, n_exp, 42))?;
    let pu = summarize(&records, 10)?;
    println!("PU: mean chi {:.2} %, std {:.2} % over {} experiments", pu.mean, pu.std, pu.n);

    let spec = GmSpec { n_s_values: vec![1, 2, 5, 10, 20, 50, 100, 200], ..GmSpec::default() };
    for (n_s, s) in gm_bootstrap(&records, &spec)? {
        println!("N_s = {n_s:>3}: mean chi_GM {:>6.2} %, std {:>5.2} %", s.mean, s.std);
    }
    Ok(())
}
