use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{trial_rng, ExperimentRecord};
use crate::error::{Error, Result};

/// Lifetime extension in percent: `(efc_rpu / efc_fpu - 1)·100`.
pub fn chi_pu(efc_rpu: f64, efc_fpu: f64) -> Result<f64> {
    if !(efc_fpu > 0.0) {
        return Err(Error::Domain(format!("FPU EFC must be positive, got {efc_fpu}")));
    }
    Ok((efc_rpu / efc_fpu - 1.0) * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    pub n: usize,
    pub histogram: Vec<HistogramBin>,
}

impl SummaryStats {
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 values for statistics, got {}",
                values.len()
            )));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        Ok(Self {
            mean,
            std: (ss / (n - 1.0)).sqrt(),
            n: values.len(),
            histogram: histogram(values, bins),
        })
    }
}

/// Equal-width bins over `[min, max]`; the top edge is inclusive. Constant
/// data collapse into one zero-width bin.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![HistogramBin { low: lo, high: hi, count: values.len() }];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            low: lo + k as f64 * width,
            high: if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width },
            count,
        })
        .collect()
}

/// Statistics of χ over the unflagged records.
pub fn summarize(records: &[ExperimentRecord], bins: usize) -> Result<SummaryStats> {
    let values: Vec<f64> = records.iter().filter(|r| !r.is_flagged()).map(|r| r.chi_pu).collect();
    SummaryStats::from_values(&values, bins)
}

/// How bootstrap trials pick PU indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexSampler {
    /// Uniform with replacement.
    #[default]
    Uniform,
    /// Trial `t` takes indices `t·n_s, …, t·n_s + n_s - 1` modulo the pool
    /// size. With `n_s = 1` and one trial per record this enumerates the pool.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmSpec {
    pub n_s_values: Vec<usize>,
    pub n_exp_gm: usize,
    pub resample_seed: u64,
    pub sampler: IndexSampler,
    pub bins: usize,
}

impl GmSpec {
    /// 2..=9, then 10, 15, …, 200 (47 values).
    pub fn default_n_s() -> Vec<usize> {
        (2..=9).chain((10..=200).step_by(5)).collect()
    }
}

impl Default for GmSpec {
    fn default() -> Self {
        Self {
            n_s_values: Self::default_n_s(),
            n_exp_gm: 10_000,
            resample_seed: 0x6d5f_7365_6564,
            sampler: IndexSampler::Uniform,
            bins: 50,
        }
    }
}

/// χ of one series module built from the PUs at `indices`.
pub fn gm_chi(pool: &[(f64, f64)], indices: &[usize]) -> Result<f64> {
    let mut sum_rpu = 0.0;
    let mut min_fpu = f64::INFINITY;
    for &i in indices {
        let (fpu, rpu) = pool[i];
        sum_rpu += rpu;
        min_fpu = min_fpu.min(fpu);
    }
    chi_pu(sum_rpu / indices.len() as f64, min_fpu)
}

/// Series-module lifetime-extension statistics for each `n_s`.
pub fn gm_bootstrap(
    records: &[ExperimentRecord],
    spec: &GmSpec,
) -> Result<BTreeMap<usize, SummaryStats>> {
    let pool: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| !r.is_flagged())
        .map(|r| (r.efc_fpu_eol, r.efc_rpu_eol))
        .collect();
    if pool.is_empty() {
        return Err(Error::InsufficientData("no unflagged records to resample".into()));
    }
    if let Some(first) = records.first() {
        if records.iter().any(|r| r.case_id != first.case_id || r.approach != first.approach) {
            return Err(Error::InvalidParameter(
                "bootstrap pool must come from a single case and approach".into(),
            ));
        }
    }
    if spec.n_s_values.is_empty() || spec.n_s_values.contains(&0) {
        return Err(Error::InvalidParameter("n_s values must be non-empty and >= 1".into()));
    }
    let mut out = BTreeMap::new();
    let mut indices = Vec::new();
    for &n_s in &spec.n_s_values {
        let mut chis = Vec::with_capacity(spec.n_exp_gm);
        for trial in 0..spec.n_exp_gm {
            indices.clear();
            match spec.sampler {
                IndexSampler::Uniform => {
                    let mut rng = trial_rng(spec.resample_seed, n_s, trial as u64);
                    indices.extend((0..n_s).map(|_| rng.random_range(0..pool.len())));
                }
                IndexSampler::Sequential => {
                    indices.extend((0..n_s).map(|k| (trial * n_s + k) % pool.len()));
                }
            }
            chis.push(gm_chi(&pool, &indices)?);
        }
        out.insert(n_s, SummaryStats::from_values(&chis, spec.bins)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpu::EolApproach;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn rec(k: usize, fpu: f64, rpu: f64) -> ExperimentRecord {
        ExperimentRecord {
            case_id: "c".into(),
            approach: EolApproach::SafetyBased,
            exp_index: k,
            efc_fpu_eol: fpu,
            efc_rpu_eol: rpu,
            chi_pu: chi_pu(rpu, fpu).unwrap(),
            q_pu_nom_1c: 1.0,
            cycles_run: 1,
            flag: None,
        }
    }

    #[test]
    fn chi_examples() {
        assert_abs_diff_eq!(chi_pu(660.0, 600.0).unwrap(), 10.0, epsilon = 1e-12);
        assert_eq!(chi_pu(600.0, 600.0).unwrap(), 0.0);
        assert_abs_diff_eq!(chi_pu(1200.0, 600.0).unwrap(), 100.0, epsilon = 1e-12);
        assert!(matches!(chi_pu(1.0, 0.0), Err(Error::Domain(_))));
        assert!(chi_pu(1.0, -3.0).is_err());
    }

    #[test]
    fn summary_examples() {
        let s = SummaryStats::from_values(&[0.0, 10.0], 4).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_abs_diff_eq!(s.std, 50f64.sqrt(), epsilon = 1e-12);
        assert_eq!(SummaryStats::from_values(&[3.0; 5], 4).unwrap().std, 0.0);
        assert!(SummaryStats::from_values(&[1.0], 4).is_err());
    }

    #[test]
    fn summary_recovers_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(12.0, 3.0).unwrap();
        let v: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let s = SummaryStats::from_values(&v, 20).unwrap();
        assert!((s.mean - 12.0).abs() < 4.0 * 3.0 / 100.0);
        // standard error of s is about σ/√(2n)
        assert!((s.std - 3.0).abs() < 4.0 * 3.0 / (2.0f64 * 10_000.0).sqrt());
        assert_eq!(s.histogram.iter().map(|b| b.count).sum::<usize>(), 10_000);
    }

    #[test]
    fn summarize_skips_flagged() {
        let mut rs = vec![rec(0, 600.0, 660.0), rec(1, 600.0, 600.0), rec(2, 1.0, 1.0)];
        rs[2].flag = Some("boom".into());
        rs[2].chi_pu = f64::NAN;
        let s = summarize(&rs, 3).unwrap();
        assert_eq!(s.n, 2);
        assert_abs_diff_eq!(s.mean, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn histogram_edges() {
        let h = histogram(&[0.0, 1.0, 2.0, 3.0, 4.0], 4);
        assert_eq!(h.len(), 4);
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 1, 1, 2]);
        assert_eq!(h[3].high, 4.0);
        let one = histogram(&[2.5], 10);
        assert_eq!(one, vec![HistogramBin { low: 2.5, high: 2.5, count: 1 }]);
    }

    #[test]
    fn gm_single_element_matches_pu() {
        let pool: Vec<_> = (0..50).map(|k| rec(k, 500.0 + k as f64, 620.0)).collect();
        let spec = GmSpec {
            n_s_values: vec![1],
            n_exp_gm: pool.len(),
            sampler: IndexSampler::Sequential,
            ..Default::default()
        };
        let gm = gm_bootstrap(&pool, &spec).unwrap();
        let pu = summarize(&pool, 10).unwrap();
        assert_abs_diff_eq!(gm[&1].mean, pu.mean, epsilon = 1e-9);
        assert_abs_diff_eq!(gm[&1].std, pu.std, epsilon = 1e-9);
    }

    #[test]
    fn gm_identical_records() {
        let pool = vec![rec(0, 600.0, 650.0); 7];
        let spec = GmSpec { n_s_values: vec![1, 5, 50], n_exp_gm: 100, ..Default::default() };
        for s in gm_bootstrap(&pool, &spec).unwrap().values() {
            assert_abs_diff_eq!(s.mean, pool[0].chi_pu, epsilon = 1e-12);
            assert_abs_diff_eq!(s.std, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gm_hand_evaluation() {
        let pool = [(600.0, 900.0), (900.0, 900.0)];
        assert_abs_diff_eq!(gm_chi(&pool, &[0, 1]).unwrap(), 50.0, epsilon = 1e-12);
    }

    #[test]
    fn gm_errors() {
        assert!(gm_bootstrap(&[], &GmSpec::default()).is_err());
        let mut mixed = vec![rec(0, 600.0, 650.0), rec(1, 600.0, 650.0)];
        mixed[1].case_id = "other".into();
        assert!(gm_bootstrap(&mixed, &GmSpec::default()).is_err());
    }

    #[test]
    fn gm_mean_grows_with_n_s() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let normal = Normal::new(520.0, 40.0).unwrap();
        let pool: Vec<_> = (0..200).map(|k| rec(k, normal.sample(&mut rng), 615.0)).collect();
        let spec = GmSpec { n_s_values: vec![2, 10, 50, 200], n_exp_gm: 10_000, ..Default::default() };
        let gm = gm_bootstrap(&pool, &spec).unwrap();
        let means: Vec<f64> = gm.values().map(|s| s.mean).collect();
        for w in means.windows(2) {
            assert!(w[1] >= w[0] - 2.0, "{means:?}");
        }
    }

    #[test]
    fn default_n_s_grid() {
        let n_s = GmSpec::default_n_s();
        assert_eq!(n_s.len(), 47);
        assert_eq!(n_s[..9], [2, 3, 4, 5, 6, 7, 8, 9, 10]);
        assert_eq!(*n_s.last().unwrap(), 200);
    }
}
