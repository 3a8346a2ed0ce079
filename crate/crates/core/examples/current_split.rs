//! Splits a pack current over mismatched parallel cells and shows the
//! circulating current at rest and the CV-phase currents.
//!
//! ```text
//! cargo run --example current_split
//! ```

use reconfig_lifetime::electrics::{solve_cc_current_split, solve_cv_current};
use reconfig_lifetime::prelude::*;

fn main() -> reconfig_lifetime::Result<()> {
    let curve = OcvCurve::default_nmc();
    let cells = [
        CellState::new(0.55, 3.0, 0.030),
        CellState::new(0.50, 2.7, 0.036),
        CellState::new(0.45, 2.5, 0.041),
    ];
    for i_total in [-9.0, 0.0, 9.0] {
        let s = solve_cc_current_split(&cells, &curve, i_total)?;
        let currents: Vec<String> = s.currents.iter().map(|i| format!("{i:+.3}")).collect();
        println!("I = {i_total:+.1} A: v = {:.4} V, cell currents [{}] A", s.v_terminal, currents.join(", "));
    }
    let cv = solve_cv_current(&cells, &curve, 4.2);
    println!("hold at 4.2 V: cell currents {cv:.2?} A");
    Ok(())
}
