//! Fits ageing distributions and the resistance-capacity line to a synthetic
//! dataset and prints the resulting config fragment.
//!
//! ```text
//! cargo run --example fit_dataset -- [n_cells]
//! ```

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use reconfig_lifetime::report::cmd_fit;

fn main() -> reconfig_lifetime::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(48);
    let dir = std::env::temp_dir().join("reconfsim_fit_example");
    std::fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let q = Normal::new(0.9939, 0.0028).expect("valid normal");
    let e = Normal::new(615.85, 68.28).expect("valid normal");
    let noise = Normal::new(0.0, 0.01).expect("valid normal");

    let (mut bol, mut eol, mut rq) = (
        String::from("cell_id,q_tilde\n"),
        String::from("cell_id,efc_eol\n"),
        String::from("q_tilde,r_tilde\n"),
    );
    for i in 0..n {
        let _ = writeln!(bol, "cell{i},{}", q.sample(&mut rng));
        let _ = writeln!(eol, "cell{i},{}", e.sample(&mut rng));
        let qt = 1.0 - 0.2 * i as f64 / n as f64;
        let _ = writeln!(rq, "{qt},{}", 2.455 - 1.455 * qt + noise.sample(&mut rng));
    }
    let paths = ["bol.csv", "eol.csv", "rq.csv"].map(|f| dir.join(f));
    for (p, text) in paths.iter().zip([bol, eol, rq]) {
        std::fs::write(p, text)?;
    }
    let (fit, fragment) = cmd_fit(&paths[0], &paths[1], &paths[2])?;
    println!("{fragment}");
    println!("rho {:.2} deg", fit.rq.rho);
    Ok(())
}
