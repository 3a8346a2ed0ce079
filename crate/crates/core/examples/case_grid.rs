//! Lists the default sweep and a filtered selection as a config resolves it.
//!
//! ```text
//! cargo run --example case_grid
//! ```

use reconfig_lifetime::config::RunConfig;
use reconfig_lifetime::prelude::*;

fn main() -> reconfig_lifetime::Result<()> {
    let all = build_case_grid(&CaseGridAxes::default(), &EolApproach::ALL, 200, 42);
    println!("default grid: {} cases ({} per approach)", all.len(), all.len() / 2);

    let cfg = RunConfig::from_toml(
        r#"
        approach = "2"
        [grid]
        sigma_e_rel = ["1 %", "11.1 %"]
        rho = ["97.3 deg", 124.5]
        n_p = [2, 10]
        filter = ["ss0.0028"]
        "#,
    )?;
    for case in cfg.cases()? {
        println!("{} approach {}", case.case_id, case.approach);
    }
    Ok(())
}
