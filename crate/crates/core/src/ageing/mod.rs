//! Stochastic linear cell-ageing models.
//!
//! Each cell gets one capacity-fade line through two sampled anchors: its
//! normalized capacity at beginning of life (EFC = 0) and its EFC count at the
//! 80 % capacity threshold. Resistance follows normalized capacity along a
//! line shared by all cells, `R/R_nom = -k·Q/Q_nom + l`, which passes through
//! the fresh-cell point (1, 1) and is parameterized by its angle ρ.

mod fit;

pub use fit::{
    fit_distributions_from_data, read_bol_csv, read_eol_csv, read_rq_csv, FitResult, RqFit,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::electrics::CellElectricalParams;
use crate::error::{Error, Result};

/// Capacity fraction that marks a cell's end of life.
pub const EOL_CAPACITY_FRACTION: f64 = 0.8;

/// Angle of the least-squares R–Q line of the reference NMC dataset, degrees.
pub const FITTED_RHO_DEG: f64 = 124.5;

const MAX_REJECTIONS: usize = 1000;
const BOL_MARGIN: f64 = 1e-6;

/// Normal distributions of normalized BOL capacity and of EFC at EOL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeingDistributions {
    pub mu_s: f64,
    pub sigma_s: f64,
    pub mu_e: f64,
    pub sigma_e: f64,
}

impl AgeingDistributions {
    pub fn new(mu_s: f64, sigma_s: f64, mu_e: f64, sigma_e: f64) -> Result<Self> {
        let d = Self { mu_s, sigma_s, mu_e, sigma_e };
        d.validate()?;
        Ok(d)
    }

    /// Fit to the 48-cell NMC dataset.
    pub fn fitted() -> Self {
        Self { mu_s: 0.9939, sigma_s: 0.0028, mu_e: 615.85, sigma_e: 68.28 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mu_s, self.sigma_s, self.mu_e, self.sigma_e];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite ageing distribution parameter".into()));
        }
        if self.mu_s <= EOL_CAPACITY_FRACTION {
            return Err(Error::InvalidParameter(format!(
                "mu_s = {} must exceed the EOL fraction {EOL_CAPACITY_FRACTION}",
                self.mu_s
            )));
        }
        if self.sigma_s < 0.0 || self.sigma_e < 0.0 || self.mu_e <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "need sigma_s >= 0, sigma_e >= 0, mu_e > 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    /// Same means, spreads given relative to them.
    pub fn with_relative_spread(&self, sigma_s_rel: f64, sigma_e_rel: f64) -> Result<Self> {
        Self::new(self.mu_s, sigma_s_rel * self.mu_s, self.mu_e, sigma_e_rel * self.mu_e)
    }
}

impl Default for AgeingDistributions {
    fn default() -> Self {
        Self::fitted()
    }
}

/// Normalized resistance–capacity line `R̃ = -k_rq·Q̃ + l_rq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResistanceCapacityLine {
    /// Angle to the `R̃ = 1` axis, degrees.
    pub rho: f64,
    pub k_rq: f64,
    pub l_rq: f64,
}

impl ResistanceCapacityLine {
    pub fn from_rho(rho: f64) -> Result<Self> {
        rho_to_line(rho)
    }

    /// Normalized resistance at normalized capacity `q_tilde`.
    pub fn normalized_resistance(&self, q_tilde: f64) -> f64 {
        -self.k_rq * q_tilde + self.l_rq
    }
}

/// Line through (1, 1) with angle `rho` degrees, 90 < rho < 180.
pub fn rho_to_line(rho: f64) -> Result<ResistanceCapacityLine> {
    if !(rho > 90.0 && rho < 180.0) {
        return Err(Error::Domain(format!(
            "rho = {rho}° must lie strictly between 90° and 180°"
        )));
    }
    let k_rq = -rho.to_radians().tan();
    Ok(ResistanceCapacityLine { rho, k_rq, l_rq: 1.0 + k_rq })
}

/// Sampled identity of one cell: linear capacity fade and resistance growth
/// in EFC.
///
/// `EFC = a - b·Q` and `R = c + d·EFC`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellAgeingLine {
    pub q_tilde_s: f64,
    pub efc_e: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CellAgeingLine {
    /// Builds the line through `(0, q_tilde_s·Q_nom)` and
    /// `(efc_e, 0.8·Q_nom)` in (EFC, Q) and composes it with `rcl`.
    pub fn from_anchors(
        q_tilde_s: f64,
        efc_e: f64,
        rcl: &ResistanceCapacityLine,
        params: &CellElectricalParams,
    ) -> Result<Self> {
        if !(q_tilde_s > EOL_CAPACITY_FRACTION && efc_e > 0.0) {
            return Err(Error::Domain(format!(
                "nonphysical fade anchors: q_tilde_s = {q_tilde_s}, efc_e = {efc_e}"
            )));
        }
        let q_nom = params.q_nom;
        let b = efc_e / ((q_tilde_s - EOL_CAPACITY_FRACTION) * q_nom);
        let a = b * q_tilde_s * q_nom;
        let d = params.r_nom * rcl.k_rq / (b * q_nom);
        let c = params.r_nom * (rcl.l_rq - rcl.k_rq * a / (b * q_nom));
        if !(c > 0.0) && params.r_nom > 0.0 {
            return Err(Error::Domain(format!(
                "BOL resistance {c} Ω is not positive for q_tilde_s = {q_tilde_s}"
            )));
        }
        Ok(Self { q_tilde_s, efc_e, a, b, c, d })
    }

    /// Capacity (Ah) after `efc` equivalent full cycles. Extrapolates past EOL.
    #[inline]
    pub fn capacity_from_efc(&self, efc: f64) -> f64 {
        (self.a - efc) / self.b
    }

    #[inline]
    pub fn efc_from_capacity(&self, q: f64) -> f64 {
        self.a - self.b * q
    }

    #[inline]
    pub fn resistance_from_efc(&self, efc: f64) -> f64 {
        self.c + self.d * efc
    }
}

/// Draws `n` independent cell lines.
///
/// Each cell takes one standard-normal pair `(z_s, z_e)` scaled by the
/// distribution, so runs that differ only in spread see the same underlying
/// draws. Pairs with `q̃_s <= 0.8`, `efc_e <= 0` or non-positive BOL resistance
/// are redrawn.
pub fn sample_cell_lines<R: Rng + ?Sized>(
    dist: &AgeingDistributions,
    rcl: &ResistanceCapacityLine,
    params: &CellElectricalParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<CellAgeingLine>> {
    dist.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one cell".into()));
    }
    let mut lines = Vec::with_capacity(n);
    while lines.len() < n {
        let mut rejected = 0;
        let line = loop {
            let z_s: f64 = rng.sample(StandardNormal);
            let z_e: f64 = rng.sample(StandardNormal);
            let q_tilde_s = dist.mu_s + dist.sigma_s * z_s;
            let efc_e = dist.mu_e + dist.sigma_e * z_e;
            if q_tilde_s > EOL_CAPACITY_FRACTION + BOL_MARGIN && efc_e > 0.0 {
                if let Ok(line) = CellAgeingLine::from_anchors(q_tilde_s, efc_e, rcl, params) {
                    break line;
                }
            }
            rejected += 1;
            if rejected >= MAX_REJECTIONS {
                return Err(Error::RejectionLimit {
                    attempts: rejected,
                    reason: format!("no physical fade line from {dist:?}"),
                });
            }
        };
        lines.push(line);
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> CellElectricalParams {
        CellElectricalParams::default()
    }

    #[test]
    fn rho_examples() {
        // reference slopes computed from tan of the complementary angle
        let l = rho_to_line(124.5).unwrap();
        let k_ref = 55.5f64.to_radians().sin() / 55.5f64.to_radians().cos();
        assert_relative_eq!(l.k_rq, k_ref, max_relative = 1e-12);
        assert_abs_diff_eq!(l.k_rq, 1.4550, epsilon = 1e-4);
        assert_abs_diff_eq!(l.l_rq, 2.4550, epsilon = 1e-4);

        let l = rho_to_line(135.0).unwrap();
        assert_abs_diff_eq!(l.k_rq, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.l_rq, 2.0, epsilon = 1e-12);

        let l = rho_to_line(97.3).unwrap();
        assert_abs_diff_eq!(l.k_rq, 7.806, epsilon = 1e-3);
        assert_abs_diff_eq!(l.l_rq, 8.806, epsilon = 1e-3);
        assert_abs_diff_eq!(l.normalized_resistance(1.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rho_outside_open_interval_rejected() {
        for rho in [90.0, 180.0, 45.0, 200.0, f64::NAN] {
            assert!(matches!(rho_to_line(rho), Err(Error::Domain(_))), "{rho}");
        }
    }

    fn reference_line() -> CellAgeingLine {
        let rcl = rho_to_line(135.0).unwrap();
        CellAgeingLine::from_anchors(1.0, 600.0, &rcl, &params()).unwrap()
    }

    #[test]
    fn two_point_line_solve() {
        let line = reference_line();
        assert_abs_diff_eq!(line.b, 1000.0, epsilon = 1e-9);
        assert_abs_diff_eq!(line.a, 3000.0, epsilon = 1e-9);
        assert_abs_diff_eq!(line.efc_from_capacity(2.4), 600.0, epsilon = 1e-9);
    }

    #[test]
    fn capacity_and_efc_examples() {
        let line = reference_line();
        assert_abs_diff_eq!(line.capacity_from_efc(0.0), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(line.capacity_from_efc(600.0), 2.4, epsilon = 1e-12);
        assert_abs_diff_eq!(line.capacity_from_efc(300.0), 2.7, epsilon = 1e-12);
        assert_abs_diff_eq!(line.efc_from_capacity(3.0), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(line.efc_from_capacity(2.4), 600.0, epsilon = 1e-9);
        assert_abs_diff_eq!(line.efc_from_capacity(2.55), 450.0, epsilon = 1e-9);
    }

    #[test]
    fn resistance_examples() {
        let p = params();
        let line = reference_line();
        assert_abs_diff_eq!(line.resistance_from_efc(0.0), p.r_nom, epsilon = 1e-15);
        assert_abs_diff_eq!(line.resistance_from_efc(600.0), 1.2 * p.r_nom, epsilon = 1e-12);
        for rho in [97.3, 105.7, 124.5] {
            let rcl = rho_to_line(rho).unwrap();
            let line = CellAgeingLine::from_anchors(1.0, 615.0, &rcl, &p).unwrap();
            assert_relative_eq!(line.resistance_from_efc(0.0), p.r_nom, max_relative = 1e-12);
        }
    }

    #[test]
    fn degenerate_distribution_gives_identical_lines() {
        let dist = AgeingDistributions::new(0.99, 0.0, 600.0, 0.0).unwrap();
        let rcl = rho_to_line(FITTED_RHO_DEG).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lines = sample_cell_lines(&dist, &rcl, &params(), 4, &mut rng).unwrap();
        assert_eq!(lines.len(), 4);
        for l in &lines {
            assert_eq!(l, &lines[0]);
            assert_eq!(l.q_tilde_s, 0.99);
            assert_eq!(l.efc_e, 600.0);
        }
    }

    #[test]
    fn fitted_sample_mean() {
        let dist = AgeingDistributions::fitted();
        let rcl = rho_to_line(FITTED_RHO_DEG).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let lines = sample_cell_lines(&dist, &rcl, &params(), 100_000, &mut rng).unwrap();
        let mean = lines.iter().map(|l| l.q_tilde_s).sum::<f64>() / lines.len() as f64;
        assert!((mean - 0.9939).abs() < 0.001, "{mean}");
    }

    #[test]
    fn rejection_limit_reported() {
        // mean far below the threshold: practically every draw is rejected
        let dist = AgeingDistributions { mu_s: 0.5, sigma_s: 0.01, mu_e: 600.0, sigma_e: 1.0 };
        let rcl = rho_to_line(FITTED_RHO_DEG).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(sample_cell_lines(&dist, &rcl, &params(), 1, &mut rng).is_err());
        let always_reject = AgeingDistributions { mu_s: 0.81, sigma_s: 0.0, mu_e: 600.0, sigma_e: 0.0 };
        // BOL resistance negative for such a steep line at q̃ > l/k
        let steep = ResistanceCapacityLine { rho: 91.0, k_rq: 10.0, l_rq: 5.0 };
        let err = sample_cell_lines(&always_reject, &steep, &params(), 1, &mut rng).unwrap_err();
        assert!(matches!(err, Error::RejectionLimit { attempts: 1000, .. }));
    }

    #[test]
    fn sampling_is_deterministic() {
        let dist = AgeingDistributions::fitted();
        let rcl = rho_to_line(105.7).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_cell_lines(&dist, &rcl, &params(), 20, &mut rng).unwrap()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    proptest! {
        #[test]
        fn sampled_lines_are_anchored_and_consistent(
            seed in any::<u64>(),
            rho in 95.0f64..170.0,
            sigma_e_rel in 0.0f64..0.2,
        ) {
            let p = params();
            let dist = AgeingDistributions::fitted().with_relative_spread(0.01, sigma_e_rel).unwrap();
            let rcl = rho_to_line(rho).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lines = sample_cell_lines(&dist, &rcl, &p, 8, &mut rng).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            for l in &lines {
                prop_assert!(l.a > 0.0 && l.b > 0.0 && l.c > 0.0 && l.d > 0.0);
                prop_assert!((l.capacity_from_efc(0.0) / p.q_nom - l.q_tilde_s).abs() < 1e-12);
                prop_assert!((l.capacity_from_efc(l.efc_e) / p.q_nom - 0.8).abs() < 1e-12);
                for _ in 0..100 {
                    let e: f64 = rng.random_range(0.0..1.5 * l.efc_e);
                    let q = l.capacity_from_efc(e);
                    let back = l.efc_from_capacity(q);
                    prop_assert!((back - e).abs() <= 1e-9 * e.abs().max(1.0));
                    let via_rq = p.r_nom * rcl.normalized_resistance(q / p.q_nom);
                    let direct = l.resistance_from_efc(e);
                    prop_assert!((via_rq - direct).abs() <= 1e-9 * direct.abs());
                }
            }
        }
    }
}
