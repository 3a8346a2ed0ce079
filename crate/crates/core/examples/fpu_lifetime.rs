//! Cycles one fixed parallel unit to end of life and prints its capacity
//! trajectory under both end-of-life criteria.

use std::time::Instant;

use reconfig_lifetime::experiment::experiment_rng;
use reconfig_lifetime::fpu::simulate_fpu_lifetimes;
use reconfig_lifetime::prelude::*;

fn main() -> reconfig_lifetime::Result<()> {
    let n_p = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let params = CellElectricalParams::default();
    let curve = OcvCurve::default_nmc();
    let proto = CyclingProtocol::default();
    let rcl = rho_to_line(124.5)?;
    let dist = AgeingDistributions::fitted().with_relative_spread(0.0028, 0.111)?;
    let mut rng = experiment_rng(7, "", 0);
    let lines = sample_cell_lines(&dist, &rcl, &params, n_p, &mut rng)?;
    let cfg = PuConfig::new(params, lines);

    let start = Instant::now();
    let outcomes = simulate_fpu_lifetimes(&cfg, &curve, &proto, &EolApproach::ALL)?;
    let elapsed = start.elapsed();

    let first = &outcomes[0];
    println!("N_p = {n_p}, first 1C capacity {:.4} Ah", first.q_pu_nom_1c);
    for o in &outcomes {
        println!(
            "approach {}: EOL after {} cycles, EFC sum {:.1}",
            o.approach, o.cycles_run, o.efc_fpu_eol
        );
    }
    let longest = outcomes.iter().max_by_key(|o| o.cycles_run).unwrap();
    for c in longest.cycles.iter().step_by(50) {
        println!(
            "cycle {:>4}  Q_pu {:.4} Ah  min cell {:.4}  max cell {:.4}",
            c.cycle, c.q_pu_1c, c.min_cell_q, c.max_cell_q
        );
    }
    println!("simulated in {elapsed:.2?}");
    Ok(())
}
