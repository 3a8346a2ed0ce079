//! End of life of the ideally reconfigured parallel unit (RPU).
//!
//! With ideal reconfiguration every cell reaches end of life with the same
//! capacity `Q`, SOC and therefore resistance. Under the capacity-based
//! definition `Q` is the root of
//!
//! ```text
//! v_min - (I_1C/N_p)·R(Q) = f(z_0(Q) - 0.8·Q_PU,nom/(N_p·Q))
//! R(Q) = R_nom·(l_RQ - k_RQ·Q/Q_nom)
//! ```
//!
//! where `z_0` is the SOC the last discharge starts from: 1 for an ideal full
//! charge, or the SOC at which the CC-CV charge of a cell with capacity `Q`
//! terminates, `f⁻¹(v_max - c·|I_1C/N_p|·R(Q))` for cutoff fraction `c`.
//!
//! The left side falls and the right side rises with `Q`, so the root is
//! unique and a bracketing search finds it. Under the safety-based definition
//! `Q = 0.8·Q_nom` directly.

use crate::ageing::{CellAgeingLine, ResistanceCapacityLine};
use crate::electrics::{CellElectricalParams, OcvCurve};
use crate::error::{Error, Result};
use crate::roots::{find_root, RootOptions};

/// SOC at which the last RPU discharge starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartSoc {
    /// Fully charged, `z = 1`.
    Full,
    /// Where a CC-CV charge ends once the per-cell current has decayed to
    /// `cutoff_fraction` of 1C. Tends to `Full` as the cutoff goes to zero.
    AfterCharge { cutoff_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpuEolSolution {
    /// Common per-cell capacity at end of life, Ah.
    pub q_eol: f64,
    pub z_eol: f64,
    pub v_oc_eol: f64,
    pub r_eol: f64,
    pub efc_rpu_eol: f64,
    /// Root-equation residual, V (zero for the safety-based definition).
    pub residual: f64,
}

/// Inputs of the capacity-based RPU end-of-life equation.
#[derive(Debug, Clone, Copy)]
pub struct RpuEquation<'a> {
    pub rcl: &'a ResistanceCapacityLine,
    pub params: &'a CellElectricalParams,
    pub curve: &'a OcvCurve,
    pub q_pu_nom_1c: f64,
    pub n_p: usize,
    /// End-of-life fraction of the PU nominal 1C capacity (0.8).
    pub eol_fraction: f64,
    pub start: StartSoc,
}

impl RpuEquation<'_> {
    pub fn resistance(&self, q: f64) -> f64 {
        self.params.r_nom * self.rcl.normalized_resistance(q / self.params.q_nom)
    }

    pub fn start_soc(&self, q: f64) -> f64 {
        match self.start {
            StartSoc::Full => 1.0,
            StartSoc::AfterCharge { cutoff_fraction } => {
                let i_cut = cutoff_fraction * self.params.i_1c.abs();
                self.curve.inverse(self.params.v_max - i_cut * self.resistance(q)).min(1.0)
            }
        }
    }

    /// SOC after delivering the EOL share of the nominal capacity.
    pub fn soc_at_eol(&self, q: f64) -> f64 {
        self.start_soc(q) - self.eol_fraction * self.q_pu_nom_1c / (self.n_p as f64 * q)
    }

    /// OCV at end of discharge implied by the terminal-voltage balance.
    pub fn ocv_from_resistance(&self, q: f64) -> f64 {
        let i_cell = self.params.i_1c;
        self.params.v_min - i_cell * self.resistance(q)
    }

    /// `lhs - rhs`; strictly decreasing in `q`. The SOC argument is clamped to
    /// `[0, 1]`.
    pub fn residual(&self, q: f64) -> f64 {
        self.ocv_from_resistance(q) - self.curve.eval_clamped(self.soc_at_eol(q))
    }

    pub fn bracket(&self) -> (f64, f64) {
        let lo = self.eol_fraction * self.eol_fraction * self.q_pu_nom_1c / self.n_p as f64;
        (lo, 1.05 * self.params.q_nom)
    }
}

/// Capacity-based (Approach 1) RPU end of life.
pub fn rpu_eol_capacity_approach1(
    lines: &[CellAgeingLine],
    rcl: &ResistanceCapacityLine,
    params: &CellElectricalParams,
    curve: &OcvCurve,
    q_pu_nom_1c: f64,
    eol_fraction: f64,
    start: StartSoc,
) -> Result<RpuEolSolution> {
    if lines.is_empty() {
        return Err(Error::InvalidParameter("no cells".into()));
    }
    if !(q_pu_nom_1c > 0.0) {
        return Err(Error::Domain(format!("PU nominal capacity must be positive, got {q_pu_nom_1c}")));
    }
    let eq = RpuEquation {
        rcl,
        params,
        curve,
        q_pu_nom_1c,
        n_p: lines.len(),
        eol_fraction,
        start,
    };
    let (lo, hi) = eq.bracket();
    let opts = RootOptions { x_tol: 1e-13, f_tol: 1e-12, max_iter: 300 };
    let root = find_root(|q| eq.residual(q), lo, hi, opts)?;
    if root.residual.abs() >= 1e-9 {
        return Err(Error::Domain(format!(
            "root residual {} V exceeds tolerance at Q = {}",
            root.residual, root.x
        )));
    }
    let q = root.x;
    let z = eq.soc_at_eol(q);
    Ok(RpuEolSolution {
        q_eol: q,
        z_eol: z,
        v_oc_eol: curve.eval_clamped(z),
        r_eol: eq.resistance(q),
        efc_rpu_eol: rpu_efc(lines, q),
        residual: root.residual,
    })
}

/// Safety-based (Approach 2) RPU end of life: every cell at `0.8·Q_nom`.
pub fn rpu_eol_capacity_approach2(
    lines: &[CellAgeingLine],
    rcl: &ResistanceCapacityLine,
    params: &CellElectricalParams,
    eol_fraction: f64,
) -> RpuEolSolution {
    let q = eol_fraction * params.q_nom;
    RpuEolSolution {
        q_eol: q,
        z_eol: f64::NAN,
        v_oc_eol: f64::NAN,
        r_eol: params.r_nom * rcl.normalized_resistance(eol_fraction),
        efc_rpu_eol: rpu_efc(lines, q),
        residual: 0.0,
    }
}

/// Σ_j (a_j - b_j·q_eol). Terms may be negative when a cell's line starts
/// below `q_eol`; they are summed as extrapolated.
pub fn rpu_efc(lines: &[CellAgeingLine], q_eol: f64) -> f64 {
    lines.iter().map(|l| l.efc_from_capacity(q_eol)).sum()
}
