//! End-of-life capacity of an ideally reconfigured unit under both
//! approaches, for a range of resistance-growth angles.
//!
//! ```text
//! cargo run --example rpu_eol
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reconfig_lifetime::prelude::*;
use reconfig_lifetime::rpu::StartSoc;

fn main() -> reconfig_lifetime::Result<()> {
    let params = CellElectricalParams::default();
    let curve = OcvCurve::default_nmc();
    let n_p = 10;
    // a nominal PU capacity a little under n_p·Q_nom, as the first 1C discharge measures
    let q_pu_nom = 0.97 * n_p as f64 * params.q_nom;
    for rho in [97.3, 105.7, 124.5] {
        let rcl = rho_to_line(rho)?;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lines = sample_cell_lines(&AgeingDistributions::fitted(), &rcl, &params, n_p, &mut rng)?;
        let a1 = rpu_eol_capacity_approach1(&lines, &rcl, &params, &curve, q_pu_nom, 0.8, StartSoc::Full)?;
        let cut = StartSoc::AfterCharge { cutoff_fraction: 1.0 / 30.0 };
        let a1c = rpu_eol_capacity_approach1(&lines, &rcl, &params, &curve, q_pu_nom, 0.8, cut)?;
        let a2 = rpu_eol_capacity_approach2(&lines, &rcl, &params, 0.8);
        println!(
            "rho {rho:>5}: A1 Q_eol {:.4} Ah (z_eol {:.4}, R {:.1} mOhm, EFC {:.0}); from CV cutoff {:.4} Ah; A2 Q_eol {:.4} Ah (EFC {:.0})",
            a1.q_eol,
            a1.z_eol,
            1e3 * a1.r_eol,
            a1.efc_rpu_eol,
            a1c.q_eol,
            a2.q_eol,
            rpu_efc(&lines, a2.q_eol),
        );
    }
    Ok(())
}
