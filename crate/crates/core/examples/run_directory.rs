//! Runs a small sweep from a TOML config, writes the run directory and builds
//! the report files from it.
//!
//! ```text
//! cargo run --release --example run_directory -- [out_dir]
//! ```

use std::path::PathBuf;

use reconfig_lifetime::config::RunConfig;
use reconfig_lifetime::report::{cmd_report, cmd_run};

fn main() -> reconfig_lifetime::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("reconfsim_run_example"));
    let mut cfg = RunConfig::from_toml(
        r#"
        master_seed = 7
        n_exp_pu = 20
        trace_experiments = 1

        [cell]
        r_nom = "30 mOhm"

        [grid]
        sigma_s_rel = [0.0028]
        sigma_e_rel = [0.03, 0.111]
        rho = [124.5]
        n_p = [4]

        [gm]
        n_s_values = [2, 10, 50]
        n_exp_gm = 2000
        "#,
    )?;
    cfg.output_dir = out.clone();
    let run = cmd_run(&cfg)?;
    for file in &run.manifest.outputs {
        println!("{}", out.join(file).display());
    }
    let report = cmd_report(&out, &out, 10, None, 1)?;
    println!(
        "{} histograms, {} trends, {} GM trends",
        report.histograms.len(),
        report.trends.len(),
        report.gm_trends.len()
    );
    Ok(())
}
