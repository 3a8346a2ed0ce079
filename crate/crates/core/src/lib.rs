//! Monte Carlo estimation of the battery lifetime gained by ideal dynamic
//! reconfiguration of parallel cell units.
//!
//! The crate samples per-cell linear ageing models, cycles a fixed parallel
//! unit through its whole life with a zero-order cell model, solves the end of
//! life of the ideally reconfigured unit in closed form, and aggregates the
//! resulting lifetime extension over Monte Carlo experiments and bootstrapped
//! series modules.
//!
//! ```no_run
//! use reconfig_lifetime::prelude::*;
//!
//! let engine = Engine::new(
//!     AgeingDistributions::fitted(),
//!     CellElectricalParams::default(),
//!     OcvCurve::default_nmc(),
//!     CyclingProtocol::default(),
//! )?;
//! let coords = CaseCoordinates { sigma_s_rel: 0.0028, sigma_e_rel: 0.111, rho: 124.5, n_p: 10 };
//! let case = CaseSpec::new(coords, EolApproach::SafetyBased, 50, 42);
//! let records = engine.run_case(&case)?;
//! println!("mean extension {:.2} %", summarize(&records, 20)?.mean);
//! # Ok::<(), reconfig_lifetime::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ageing;
pub mod config;
pub mod electrics;
pub mod error;
pub mod experiment;
pub mod fpu;
pub mod report;
pub mod roots;
pub mod rpu;
pub mod units;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::ageing::{
        rho_to_line, sample_cell_lines, AgeingDistributions, CellAgeingLine,
        ResistanceCapacityLine,
    };
    pub use crate::electrics::{CellElectricalParams, CellState, OcvCurve};
    pub use crate::experiment::{
        build_case_grid, gm_bootstrap, summarize, CaseCoordinates, CaseGridAxes, CaseSpec,
        Engine, ExperimentRecord, GmSpec, SeedScope, SummaryStats,
    };
    pub use crate::fpu::{simulate_fpu_lifetime, simulate_fpu_lifetimes, CyclingProtocol, EolApproach, PuConfig};
    pub use crate::rpu::{rpu_eol_capacity_approach1, rpu_eol_capacity_approach2, rpu_efc};
}
