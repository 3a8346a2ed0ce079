//! Samples cell ageing lines from the fitted distributions and prints each
//! cell's capacity and resistance along its life.
//!
//! ```text
//! cargo run --example ageing_lines -- [rho n_cells seed]
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reconfig_lifetime::prelude::*;

fn main() -> reconfig_lifetime::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let rho = args.first().copied().unwrap_or(124.5);
    let n = args.get(1).copied().unwrap_or(5.0) as usize;
    let seed = args.get(2).copied().unwrap_or(1.0) as u64;

    let params = CellElectricalParams::default();
    let rcl = rho_to_line(rho)?;
    println!("rho {rho} deg: R/R_nom = {:.4} - {:.4} Q/Q_nom", rcl.l_rq, rcl.k_rq);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lines = sample_cell_lines(&AgeingDistributions::fitted(), &rcl, &params, n, &mut rng)?;
    println!("cell  q_s/q_nom  efc_e    Q@0 [Ah]  Q@300    Q@efc_e  R@0 [mOhm]  R@efc_e");
    for (j, l) in lines.iter().enumerate() {
        println!(
            "{j:>4}  {:.4}     {:>7.2}  {:.4}    {:.4}   {:.4}   {:.3}      {:.3}",
            l.q_tilde_s,
            l.efc_e,
            l.capacity_from_efc(0.0),
            l.capacity_from_efc(300.0),
            l.capacity_from_efc(l.efc_e),
            1e3 * l.resistance_from_efc(0.0),
            1e3 * l.resistance_from_efc(l.efc_e),
        );
    }
    Ok(())
}
