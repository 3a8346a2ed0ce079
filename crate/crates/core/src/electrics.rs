//! Zero-order equivalent-circuit cell model.
//!
//! A cell is an OCV source `f(z)` in series with a resistance `R`. Cells in a
//! parallel unit share one terminal voltage, so the pack current splits
//! according to each cell's OCV and resistance:
//!
//! ```text
//! v = (Σ f(z_j)/R_j + I) / Σ 1/R_j,     i_j = (v - f(z_j)) / R_j
//! ```
//!
//! Currents are signed: negative while discharging.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SOC_SLACK: f64 = 1e-9;

/// Monotone piecewise-linear SOC → OCV map shared by every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct OcvCurve {
    soc: Vec<f64>,
    ocv: Vec<f64>,
    slope: Vec<f64>,
    /// `1/Δsoc` when the breakpoints are equally spaced.
    inv_spacing: Option<f64>,
}

impl OcvCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter(
                "OCV curve needs at least two breakpoints".into(),
            ));
        }
        let (soc, ocv): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if soc.iter().chain(&ocv).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("OCV curve contains non-finite values".into()));
        }
        if soc[0] != 0.0 || soc[soc.len() - 1] != 1.0 {
            return Err(Error::InvalidParameter(
                "OCV curve breakpoints must span SOC 0 to 1".into(),
            ));
        }
        for w in soc.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter(format!(
                    "OCV curve SOC values must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        for w in ocv.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Domain(format!(
                    "OCV curve must be strictly increasing ({} V then {} V)",
                    w[0], w[1]
                )));
            }
        }
        let slope: Vec<f64> = (1..soc.len())
            .map(|k| (ocv[k] - ocv[k - 1]) / (soc[k] - soc[k - 1]))
            .collect();
        let segments = (soc.len() - 1) as f64;
        let uniform = soc
            .iter()
            .enumerate()
            .all(|(k, &s)| (s - k as f64 / segments).abs() < 1e-12);
        let inv_spacing = uniform.then_some(segments);
        Ok(Self { soc, ocv, slope, inv_spacing })
    }

    /// Index `k` of the segment `[soc[k-1], soc[k])` containing `soc`, the
    /// upper one at a breakpoint.
    #[inline]
    fn segment(&self, soc: f64) -> usize {
        let n = self.soc.len();
        match self.inv_spacing {
            Some(inv) if soc.is_finite() => {
                let mut k = ((soc * inv).clamp(0.0, (n - 2) as f64) as usize) + 1;
                // correct rounding so the result matches the binary search
                if k < n - 1 && soc >= self.soc[k] {
                    k += 1;
                } else if k > 1 && soc < self.soc[k - 1] {
                    k -= 1;
                }
                k
            }
            _ => self.soc.partition_point(|&s| s <= soc).clamp(1, n - 1),
        }
    }

    /// Generic NMC-like table (3.0 V to 4.2 V).
    pub fn default_nmc() -> Self {
        Self::new(vec![
            (0.0, 3.00),
            (0.1, 3.45),
            (0.2, 3.55),
            (0.3, 3.60),
            (0.4, 3.64),
            (0.5, 3.68),
            (0.6, 3.74),
            (0.7, 3.82),
            (0.8, 3.92),
            (0.9, 4.05),
            (1.0, 4.20),
        ])
        .expect("default OCV table is valid")
    }

    /// Loads a two-column CSV with header `soc,ocv_volts`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            soc: f64,
            ocv_volts: f64,
        }
        let mut reader = csv::Reader::from_path(path)?;
        let mut points = Vec::new();
        for (line, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Input {
                path: path.to_owned(),
                message: format!("line {}: {e}", line + 2),
            })?;
            points.push((row.soc, row.ocv_volts));
        }
        Self::new(points).map_err(|e| Error::Input {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.soc.iter().copied().zip(self.ocv.iter().copied())
    }

    /// OCV at SOC 0 and SOC 1.
    pub fn range(&self) -> (f64, f64) {
        (self.ocv[0], self.ocv[self.ocv.len() - 1])
    }

    /// Interpolated OCV. SOC within 1e-9 of `[0, 1]` is clamped; beyond that
    /// it is a domain error.
    pub fn eval(&self, soc: f64) -> Result<f64> {
        if !(-SOC_SLACK..=1.0 + SOC_SLACK).contains(&soc) {
            return Err(Error::Domain(format!("SOC {soc} outside [0, 1]")));
        }
        Ok(self.eval_extended(soc.clamp(0.0, 1.0)))
    }

    /// Interpolated OCV with the end segments extended linearly, so it stays
    /// strictly increasing on the whole real line.
    pub fn eval_extended(&self, soc: f64) -> f64 {
        self.value_and_slope(soc).0
    }

    /// Interpolated OCV with `soc` clamped to `[0, 1]`.
    pub fn eval_clamped(&self, soc: f64) -> f64 {
        self.eval_extended(soc.clamp(0.0, 1.0))
    }

    /// OCV and the slope of the segment containing `soc` (upper segment at a
    /// breakpoint).
    #[inline]
    pub fn value_and_slope(&self, soc: f64) -> (f64, f64) {
        let k = self.segment(soc);
        let slope = self.slope[k - 1];
        (self.ocv[k - 1] + slope * (soc - self.soc[k - 1]), slope)
    }

    /// SOC at which the curve reaches `volts` (extended segments outside the
    /// table range).
    pub fn inverse(&self, volts: f64) -> f64 {
        let n = self.ocv.len();
        let k = self.ocv.partition_point(|&v| v <= volts).clamp(1, n - 1);
        let (s0, s1) = (self.soc[k - 1], self.soc[k]);
        let (v0, v1) = (self.ocv[k - 1], self.ocv[k]);
        s0 + (volts - v0) * (s1 - s0) / (v1 - v0)
    }
}

impl Default for OcvCurve {
    fn default() -> Self {
        Self::default_nmc()
    }
}

impl TryFrom<Vec<(f64, f64)>> for OcvCurve {
    type Error = Error;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<OcvCurve> for Vec<(f64, f64)> {
    fn from(curve: OcvCurve) -> Self {
        curve.breakpoints().collect()
    }
}

/// Nominal electrical parameters of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellElectricalParams {
    /// Nominal capacity, Ah.
    pub q_nom: f64,
    /// Series resistance at beginning of life, Ω.
    pub r_nom: f64,
    /// Cell 1C discharge current, A (negative).
    pub i_1c: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Polarization branch. Stored for completeness, not simulated.
    pub r1: Option<f64>,
    pub c1: Option<f64>,
}

impl CellElectricalParams {
    pub fn new(q_nom: f64, r_nom: f64, v_min: f64, v_max: f64) -> Result<Self> {
        if !(q_nom > 0.0 && q_nom.is_finite()) {
            return Err(Error::InvalidParameter(format!("q_nom must be positive, got {q_nom}")));
        }
        if !(r_nom >= 0.0 && r_nom.is_finite()) {
            return Err(Error::InvalidParameter(format!("r_nom must be non-negative, got {r_nom}")));
        }
        if !(v_min < v_max) {
            return Err(Error::InvalidParameter(format!(
                "v_min ({v_min}) must be below v_max ({v_max})"
            )));
        }
        Ok(Self {
            q_nom,
            r_nom,
            i_1c: -q_nom,
            v_min,
            v_max,
            r1: None,
            c1: None,
        })
    }

    /// Checks that both voltage limits are reachable at zero current.
    pub fn check_curve(&self, curve: &OcvCurve) -> Result<()> {
        let (lo, hi) = curve.range();
        if self.v_min < lo || self.v_max > hi {
            return Err(Error::InvalidParameter(format!(
                "voltage window [{}, {}] V lies outside the OCV range [{lo}, {hi}] V",
                self.v_min, self.v_max
            )));
        }
        Ok(())
    }
}

impl Default for CellElectricalParams {
    fn default() -> Self {
        Self::new(3.0, 0.030, 3.0, 4.2).expect("default cell parameters are valid")
    }
}

/// Dynamic state of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState {
    pub soc: f64,
    /// Present capacity, Ah.
    pub q: f64,
    /// Present series resistance, Ω.
    pub r: f64,
    /// Accumulated equivalent full cycles.
    pub efc: f64,
    /// Ah moved (either direction) since the last ageing update.
    pub throughput: f64,
}

impl CellState {
    pub fn new(soc: f64, q: f64, r: f64) -> Self {
        Self { soc, q, r, efc: 0.0, throughput: 0.0 }
    }
}

/// Terminal voltage and per-cell currents of a parallel unit.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentSplit {
    pub v_terminal: f64,
    pub currents: Vec<f64>,
}

/// Splits `i_total` over parallel cells so that every cell sees the same
/// terminal voltage.
pub fn solve_cc_current_split(
    cells: &[CellState],
    curve: &OcvCurve,
    i_total: f64,
) -> Result<CurrentSplit> {
    if cells.is_empty() {
        return Err(Error::InvalidParameter("empty parallel unit".into()));
    }
    if let Some(c) = cells.iter().find(|c| !(c.r > 0.0)) {
        return Err(Error::InvalidParameter(format!("cell resistance must be positive, got {}", c.r)));
    }
    let ocv: Vec<f64> = cells.iter().map(|c| curve.eval_extended(c.soc)).collect();
    let mut currents = vec![0.0; cells.len()];
    let v_terminal = split_into(&ocv, cells.iter().map(|c| c.r), i_total, &mut currents);
    Ok(CurrentSplit { v_terminal, currents })
}

/// Allocation-free core of the current split. Writes currents into `out` and
/// returns the terminal voltage.
#[inline]
pub(crate) fn split_into(
    ocv: &[f64],
    resistances: impl Iterator<Item = f64> + Clone,
    i_total: f64,
    out: &mut [f64],
) -> f64 {
    let mut g_sum = 0.0;
    let mut weighted = 0.0;
    for (&e, r) in ocv.iter().zip(resistances.clone()) {
        g_sum += 1.0 / r;
        weighted += e / r;
    }
    let v = (weighted + i_total) / g_sum;
    for ((i, &e), r) in out.iter_mut().zip(ocv).zip(resistances) {
        *i = (v - e) / r;
    }
    v
}

/// Per-cell currents while the terminal is held at `v_hold`.
pub fn solve_cv_current(cells: &[CellState], curve: &OcvCurve, v_hold: f64) -> Vec<f64> {
    cells
        .iter()
        .map(|c| (v_hold - curve.eval_extended(c.soc)) / c.r)
        .collect()
}

/// Coulomb counting over one step of `dt` seconds at constant current `i`.
pub fn advance_soc(cell: &CellState, i: f64, dt: f64) -> CellState {
    let hours = dt / 3600.0;
    CellState {
        soc: cell.soc + i * hours / cell.q,
        throughput: cell.throughput + i.abs() * hours,
        ..*cell
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cell(soc: f64, r: f64) -> CellState {
        CellState::new(soc, 3.0, r)
    }

    #[test]
    fn ocv_breakpoint_and_midpoint() {
        let curve = OcvCurve::default_nmc();
        assert_eq!(curve.eval(0.5).unwrap(), 3.68);
        assert_eq!(curve.eval(0.0).unwrap(), 3.00);
        assert_eq!(curve.eval(1.0).unwrap(), 4.20);
        assert_abs_diff_eq!(curve.eval(0.85).unwrap(), (3.92 + 4.05) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ocv_domain_and_slack() {
        let curve = OcvCurve::default_nmc();
        assert!(curve.eval(1.0 + 5e-10).is_ok());
        assert!(curve.eval(-5e-10).is_ok());
        assert!(matches!(curve.eval(1.01), Err(Error::Domain(_))));
        assert!(matches!(curve.eval(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn ocv_rejects_non_monotone_table() {
        let err = OcvCurve::new(vec![(0.0, 3.0), (0.5, 3.9), (1.0, 3.8)]).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(OcvCurve::new(vec![(0.0, 3.0), (0.9, 4.0)]).is_err());
    }

    #[test]
    fn ocv_inverse_roundtrip() {
        let curve = OcvCurve::default_nmc();
        for k in 0..=100 {
            let z = k as f64 / 100.0;
            assert_abs_diff_eq!(curve.inverse(curve.eval(z).unwrap()), z, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_lookup_matches_binary_search() {
        let curve = OcvCurve::default_nmc();
        assert!(curve.inv_spacing.is_some());
        let n = curve.soc.len();
        let mut probes: Vec<f64> = (0..=20_000).map(|k| -0.1 + 1.2 * k as f64 / 20_000.0).collect();
        probes.extend(curve.soc.iter().flat_map(|&s| [s, s.next_down(), s.next_up()]));
        for z in probes {
            let reference = curve.soc.partition_point(|&s| s <= z).clamp(1, n - 1);
            assert_eq!(curve.segment(z), reference, "soc {z}");
        }
        let uneven = OcvCurve::new(vec![(0.0, 3.0), (0.3, 3.6), (1.0, 4.2)]).unwrap();
        assert!(uneven.inv_spacing.is_none());
    }

    #[test]
    fn split_identical_cells_is_even() {
        let curve = OcvCurve::default_nmc();
        let cells = [cell(0.4, 0.03), cell(0.4, 0.03)];
        let s = solve_cc_current_split(&cells, &curve, -7.0).unwrap();
        assert_abs_diff_eq!(s.currents[0], -3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.currents[1], -3.5, epsilon = 1e-12);
    }

    #[test]
    fn split_inverse_to_resistance() {
        let curve = OcvCurve::default_nmc();
        let cells = [cell(0.5, 0.001), cell(0.5, 0.002)];
        let s = solve_cc_current_split(&cells, &curve, -6.0).unwrap();
        assert_abs_diff_eq!(s.currents[0], -4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.currents[1], -2.0, epsilon = 1e-9);
    }

    #[test]
    fn split_with_mismatched_ocv_circulates() {
        // SOCs chosen so that the OCVs are 3.70 V and 3.68 V
        let curve = OcvCurve::default_nmc();
        let z_hi = curve.inverse(3.70);
        let cells = [cell(z_hi, 0.001), cell(0.5, 0.001)];
        let s = solve_cc_current_split(&cells, &curve, -6.0).unwrap();
        assert_abs_diff_eq!(s.v_terminal, 3.687, epsilon = 1e-9);
        assert_abs_diff_eq!(s.currents[0], -13.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.currents[1], 7.0, epsilon = 1e-6);
    }

    #[test]
    fn split_rejects_empty() {
        let curve = OcvCurve::default_nmc();
        assert!(solve_cc_current_split(&[], &curve, -1.0).is_err());
    }

    #[test]
    fn cv_currents() {
        let curve = OcvCurve::default_nmc();
        let z = curve.inverse(4.0);
        let i = solve_cv_current(&[cell(z, 0.010), cell(1.0, 0.02)], &curve, 4.1);
        assert_abs_diff_eq!(i[0], 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(i[1], -5.0, epsilon = 1e-9);
        let at_hold = solve_cv_current(&[cell(curve.inverse(4.1), 0.03); 3], &curve, 4.1);
        assert!(at_hold.iter().all(|i| i.abs() < 1e-12));
    }

    #[test]
    fn advance_soc_examples() {
        let c = cell(0.8, 0.03);
        assert_eq!(advance_soc(&c, 0.0, 10.0), c);
        assert_abs_diff_eq!(advance_soc(&c, -3.0, 3600.0).soc, 0.8 - 1.0, epsilon = 1e-15);
        let after = advance_soc(&c, -3.0, 36.0);
        assert_abs_diff_eq!(after.soc - c.soc, -0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(after.throughput, 0.03, epsilon = 1e-15);
        assert_eq!(after.q, c.q);
        assert_eq!(after.r, c.r);
    }

    proptest! {
        #[test]
        fn split_conserves_current_and_voltage(
            socs in prop::collection::vec(0.0f64..1.0, 1..12),
            rs in prop::collection::vec(1e-3f64..0.1, 12),
            i_total in -60.0f64..60.0,
        ) {
            let curve = OcvCurve::default_nmc();
            let cells: Vec<_> = socs.iter().zip(&rs).map(|(&z, &r)| cell(z, r)).collect();
            let s = solve_cc_current_split(&cells, &curve, i_total).unwrap();
            let sum: f64 = s.currents.iter().sum();
            prop_assert!((sum - i_total).abs() <= 1e-9 * i_total.abs().max(1.0));
            for (c, i) in cells.iter().zip(&s.currents) {
                let v = curve.eval(c.soc).unwrap() + i * c.r;
                prop_assert!((v - s.v_terminal).abs() < 1e-9);
            }
            if i_total < 0.0 {
                let max_ocv = cells.iter().map(|c| curve.eval(c.soc).unwrap()).fold(f64::MIN, f64::max);
                prop_assert!(s.v_terminal < max_ocv);
            }
        }

        #[test]
        fn split_monotone_in_resistance(
            mut rs in prop::collection::vec(1e-3f64..0.1, 2..10),
            i_total in -50.0f64..-0.1,
        ) {
            rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            rs.dedup();
            let curve = OcvCurve::default_nmc();
            let cells: Vec<_> = rs.iter().map(|&r| cell(0.5, r)).collect();
            let s = solve_cc_current_split(&cells, &curve, i_total).unwrap();
            for w in s.currents.windows(2) {
                prop_assert!(w[0].abs() > w[1].abs());
            }
        }

        #[test]
        fn cv_charges_cells_below_hold(socs in prop::collection::vec(0.0f64..0.95, 1..8)) {
            let curve = OcvCurve::default_nmc();
            let cells: Vec<_> = socs.iter().map(|&z| cell(z, 0.03)).collect();
            for i in solve_cv_current(&cells, &curve, 4.2) {
                prop_assert!(i >= 0.0);
            }
        }

        #[test]
        fn advance_soc_reversible(soc in 0.0f64..1.0, i in -10.0f64..10.0, dt in 0.1f64..100.0) {
            let c = cell(soc, 0.03);
            let back = advance_soc(&advance_soc(&c, i, dt), -i, dt);
            prop_assert!((back.soc - soc).abs() < 1e-12);
        }
    }
}
