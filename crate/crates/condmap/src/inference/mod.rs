//! Validation of health scores against external statistics: Pearson
//! correlation with t-distribution p-values, and propensity-score-matched
//! causal effect estimation with confounder selection and bootstrap
//! confidence intervals.

mod logistic;
mod matching;

pub use logistic::{fit_logistic, standardize_columns, LogisticFit};
pub use matching::{average_treatment_effect, bootstrap_ci, match_pairs, MatchedPairs};

use std::collections::BTreeMap;
use std::path::Path;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::stats::{mean, median, population_variance};

/// Pearson correlation with the two-sided p-value from
/// `t = r * sqrt((n-2) / (1-r^2))` on n-2 degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "pearson needs two equal-length samples of at least 3, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (mx, my) = (mean(x), mean(y));
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::Degenerate("zero variance in pearson input".into()));
    }
    let r = (cov / (vx * vy).sqrt()).clamp(-1.0, 1.0);
    let df = (x.len() - 2) as f64;
    let p = if 1.0 - r * r < 1e-15 {
        0.0
    } else {
        let t = r.abs() * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("valid dof");
        2.0 * (1.0 - dist.cdf(t))
    };
    Ok((r, p))
}

/// Significance stars for a p-value: * p<0.1, ** p<0.05, *** p<0.01.
pub fn p_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Splits locations at the median: 1 iff strictly above it.
pub fn binarize_treatment(stat: &BTreeMap<String, f64>) -> Result<BTreeMap<String, u8>> {
    let values: Vec<f64> = stat.values().copied().collect();
    if values.len() < 2 {
        return Err(Error::InvalidInput(
            "treatment binarization needs at least 2 locations".into(),
        ));
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(Error::Degenerate(
            "all statistic values are equal; no median split exists".into(),
        ));
    }
    let med = median(&values);
    Ok(stat
        .iter()
        .map(|(l, &v)| (l.clone(), u8::from(v > med)))
        .collect())
}

/// Min-max normalization of a score table into [0, 1].
pub fn normalize_outcome(scores: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    if scores.len() < 2 {
        return Err(Error::InvalidInput(
            "outcome normalization needs at least 2 locations".into(),
        ));
    }
    let min = scores.values().copied().fold(f64::INFINITY, f64::min);
    let max = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Err(Error::Degenerate(
            "all scores are equal; min-max normalization is undefined".into(),
        ));
    }
    Ok(scores
        .iter()
        .map(|(l, &v)| (l.clone(), (v - min) / (max - min)))
        .collect())
}

/// Locations-by-confounders matrix. Missing cells are imputed with the
/// column median at load time.
#[derive(Debug, Clone)]
pub struct CovariateMatrix {
    pub locations: Vec<String>,
    pub names: Vec<String>,
    values: Vec<Vec<f64>>,
    pub imputed: BTreeMap<String, usize>,
}

impl CovariateMatrix {
    pub fn from_rows(
        locations: Vec<String>,
        names: Vec<String>,
        raw: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        if raw.len() != locations.len() || raw.iter().any(|r| r.len() != names.len()) {
            return Err(Error::InvalidInput("ragged covariate matrix".into()));
        }
        let mut imputed = BTreeMap::new();
        let mut values: Vec<Vec<f64>> = vec![vec![0.0; names.len()]; raw.len()];
        for (j, name) in names.iter().enumerate() {
            let present: Vec<f64> = raw.iter().filter_map(|r| r[j]).collect();
            if present.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "covariate {name:?} has no values at all"
                )));
            }
            let fill = median(&present);
            let missing = raw.len() - present.len();
            if missing > 0 {
                imputed.insert(name.clone(), missing);
            }
            for (i, row) in raw.iter().enumerate() {
                values[i][j] = row[j].unwrap_or(fill);
            }
        }
        Ok(Self {
            locations,
            names,
            values,
            imputed,
        })
    }

    /// Loads a TSV with a header row; first column is the location code.
    /// Empty cells and `NA` are treated as missing.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut lines = raw.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "empty covariate file".into(),
        })?;
        let names: Vec<String> = header.split('\t').skip(1).map(|s| s.to_string()).collect();
        let mut locations = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let location = cols.next().unwrap_or_default().to_string();
            let mut row = Vec::with_capacity(names.len());
            for cell in cols {
                let cell = cell.trim();
                if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                    row.push(None);
                } else {
                    row.push(Some(cell.parse().map_err(|_| Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: format!("bad covariate value {cell:?}"),
                    })?));
                }
            }
            if row.len() != names.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: "wrong number of columns".into(),
                });
            }
            locations.push(location);
            rows.push(row);
        }
        Self::from_rows(locations, names, rows)
    }

    pub fn value(&self, location_index: usize, name: &str) -> Option<f64> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.values[location_index][j])
    }

    /// Rows restricted to `locations` and `columns`, in the given order.
    pub fn submatrix(&self, locations: &[String], columns: &[String]) -> Result<Vec<Vec<f64>>> {
        let col_idx: Vec<usize> = columns
            .iter()
            .map(|c| {
                self.names
                    .iter()
                    .position(|n| n == c)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown covariate {c:?}")))
            })
            .collect::<Result<_>>()?;
        locations
            .iter()
            .map(|l| {
                let row = self
                    .locations
                    .iter()
                    .position(|x| x == l)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown location {l:?}")))?;
                Ok(col_idx.iter().map(|&j| self.values[row][j]).collect())
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CausalParams {
    pub caliper: Option<f64>,
    pub n_resamples: usize,
    pub confidence: f64,
    pub cie_threshold: f64,
    pub smd_threshold: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for CausalParams {
    fn default() -> Self {
        Self {
            caliper: None,
            n_resamples: 100,
            confidence: 0.95,
            cie_threshold: 0.10,
            smd_threshold: 0.2,
            l2: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CausalResult {
    pub treatment_name: String,
    pub outcome_name: String,
    pub ate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub selected_confounders: Vec<String>,
    pub n_pairs: usize,
    /// True when the CIE/HDPSA intersection was empty and the HDPSA set
    /// was used instead.
    pub used_fallback: bool,
}

fn psm_ate(
    covariates: &CovariateMatrix,
    locations: &[String],
    columns: &[String],
    treatment: &BTreeMap<String, u8>,
    outcome: &BTreeMap<String, f64>,
    params: &CausalParams,
) -> Result<f64> {
    let pairs = psm_match(covariates, locations, columns, treatment, params)?;
    average_treatment_effect(&pairs, outcome)
}

fn psm_match(
    covariates: &CovariateMatrix,
    locations: &[String],
    columns: &[String],
    treatment: &BTreeMap<String, u8>,
    params: &CausalParams,
) -> Result<MatchedPairs> {
    let rows = standardize_columns(&covariates.submatrix(locations, columns)?);
    let targets: Vec<u8> = locations.iter().map(|l| treatment[l]).collect();
    let fit = fit_logistic(&rows, &targets, params.l2, 100)?;
    let propensity: BTreeMap<String, f64> = locations
        .iter()
        .cloned()
        .zip(fit.probabilities.iter().copied())
        .collect();
    match_pairs(&propensity, treatment, params.caliper)
}

/// Change-in-estimate selection: keep a candidate when dropping it moves
/// the all-candidates ATE by at least `cie_threshold` (relatively, or
/// absolutely when that ATE is zero).
pub fn select_confounders_cie(
    candidates: &[String],
    covariates: &CovariateMatrix,
    locations: &[String],
    treatment: &BTreeMap<String, u8>,
    outcome: &BTreeMap<String, f64>,
    params: &CausalParams,
) -> Result<Vec<String>> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput(
            "change-in-estimate needs at least one candidate".into(),
        ));
    }
    let full = candidates.to_vec();
    let ate_all = psm_ate(covariates, locations, &full, treatment, outcome, params)?;
    let mut selected = Vec::new();
    for dropped in candidates {
        let reduced: Vec<String> = full.iter().filter(|c| *c != dropped).cloned().collect();
        let ate_without = psm_ate(covariates, locations, &reduced, treatment, outcome, params)?;
        let change = if ate_all != 0.0 {
            ((ate_without - ate_all) / ate_all).abs()
        } else {
            (ate_without - ate_all).abs()
        };
        if change >= params.cie_threshold {
            selected.push(dropped.clone());
        }
    }
    Ok(selected)
}

/// Absolute standardized mean difference of a covariate between treated
/// and control groups. A zero pooled SD means either identical constants
/// (SMD 0) or perfectly separated constants (SMD infinity).
pub fn standardized_mean_difference(treated: &[f64], control: &[f64]) -> f64 {
    let (mt, mc) = (mean(treated), mean(control));
    let pooled = ((population_variance(treated) + population_variance(control)) / 2.0).sqrt();
    if pooled == 0.0 {
        if mt == mc {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (mt - mc).abs() / pooled
    }
}

/// High-dimensional selection: candidates ranked by SMD between groups,
/// keeping those at or above `smd_threshold`.
pub fn select_confounders_hdpsa(
    candidates: &[String],
    covariates: &CovariateMatrix,
    locations: &[String],
    treatment: &BTreeMap<String, u8>,
    smd_threshold: f64,
) -> Result<Vec<String>> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput(
            "HDPSA needs at least one candidate".into(),
        ));
    }
    let rows = covariates.submatrix(locations, &candidates.to_vec())?;
    let mut ranked: Vec<(String, f64)> = Vec::new();
    for (j, name) in candidates.iter().enumerate() {
        let mut treated = Vec::new();
        let mut control = Vec::new();
        for (i, location) in locations.iter().enumerate() {
            if treatment[location] == 1 {
                treated.push(rows[i][j]);
            } else {
                control.push(rows[i][j]);
            }
        }
        let smd = standardized_mean_difference(&treated, &control);
        if smd >= smd_threshold {
            ranked.push((name.clone(), smd));
        }
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().map(|(name, _)| name).collect())
}

/// Confounder selection, matching, and the bootstrapped ATE for an
/// already binarized treatment and normalized outcome. Confounders are
/// CIE intersected with HDPSA, falling back to the HDPSA set when the
/// intersection is empty.
pub fn causal_effect(
    treatment_name: &str,
    treatment: &BTreeMap<String, u8>,
    outcome_name: &str,
    outcome: &BTreeMap<String, f64>,
    covariates: &CovariateMatrix,
    locations: &[String],
    params: &CausalParams,
) -> Result<CausalResult> {
    let candidates = covariates.names.clone();
    let cie = select_confounders_cie(
        &candidates,
        covariates,
        locations,
        treatment,
        outcome,
        params,
    )?;
    let hdpsa = select_confounders_hdpsa(
        &candidates,
        covariates,
        locations,
        treatment,
        params.smd_threshold,
    )?;
    let intersection: Vec<String> = hdpsa
        .iter()
        .filter(|c| cie.contains(c))
        .cloned()
        .collect();
    let (selected, used_fallback) = if intersection.is_empty() {
        (hdpsa, true)
    } else {
        (intersection, false)
    };

    let pairs = psm_match(covariates, locations, &selected, treatment, params)?;
    let ate = average_treatment_effect(&pairs, outcome)?;
    let (ci_low, ci_high) = bootstrap_ci(
        &pairs,
        outcome,
        params.n_resamples,
        params.confidence,
        params.seed,
    )?;
    Ok(CausalResult {
        treatment_name: treatment_name.to_string(),
        outcome_name: outcome_name.to_string(),
        ate,
        ci_low,
        ci_high,
        selected_confounders: selected,
        n_pairs: pairs.len(),
        used_fallback,
    })
}

/// Full causal analysis for one (statistic, score) pairing: binarize the
/// statistic at its median, min-max normalize the score, then run
/// [`causal_effect`] over the overlapping locations.
pub fn causal_pipeline(
    stat_name: &str,
    stat: &BTreeMap<String, f64>,
    score_name: &str,
    scores: &BTreeMap<String, f64>,
    covariates: &CovariateMatrix,
    params: &CausalParams,
) -> Result<CausalResult> {
    let locations: Vec<String> = stat
        .keys()
        .filter(|l| scores.contains_key(*l) && covariates.locations.contains(l))
        .cloned()
        .collect();
    if locations.len() < 6 {
        return Err(Error::InvalidInput(format!(
            "causal analysis needs at least 6 overlapping locations, got {}",
            locations.len()
        )));
    }
    let stat_common: BTreeMap<String, f64> = locations
        .iter()
        .map(|l| (l.clone(), stat[l]))
        .collect();
    let score_common: BTreeMap<String, f64> = locations
        .iter()
        .map(|l| (l.clone(), scores[l]))
        .collect();
    let treatment = binarize_treatment(&stat_common)?;
    let outcome = normalize_outcome(&score_common)?;
    causal_effect(
        stat_name,
        &treatment,
        score_name,
        &outcome,
        covariates,
        &locations,
        params,
    )
}

/// Loads a statistics file (TSV, header row, first column location) into
/// one table per statistic column.
pub fn load_stat_tables(path: &Path) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let matrix = CovariateMatrix::load(path)?;
    let mut out = BTreeMap::new();
    for name in &matrix.names {
        let mut table = BTreeMap::new();
        for (i, location) in matrix.locations.iter().enumerate() {
            table.insert(location.clone(), matrix.value(i, name).unwrap());
        }
        out.insert(name.clone(), table);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::population_sd;
    use proptest::prelude::*;

    fn table(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn perfect_linear_data_has_unit_correlation() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let (r, p) = pearson(&x, &y).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn small_vector_matches_closed_form() {
        // r = sqrt(3)/2 for x=(1,2,3), y=(1,2,2)
        let (r, _) = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0]).unwrap();
        assert!((r - 3.0f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_rejected() {
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    proptest! {
        #[test]
        fn pearson_symmetric_and_affine_invariant(
            x in proptest::collection::vec(-10.0f64..10.0, 5..12),
            scale in 0.1f64..5.0,
            shift in -3.0f64..3.0,
        ) {
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * 0.5 + (i as f64 * 0.7).sin()).collect();
            prop_assume!(population_sd(&x) > 1e-6 && population_sd(&y) > 1e-6);
            let (rxy, pxy) = pearson(&x, &y).unwrap();
            let (ryx, pyx) = pearson(&y, &x).unwrap();
            prop_assert!((rxy - ryx).abs() < 1e-12);
            prop_assert!((pxy - pyx).abs() < 1e-12);
            let transformed: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
            let (rt, _) = pearson(&transformed, &y).unwrap();
            prop_assert!((rt - rxy).abs() < 1e-9);
        }
    }

    #[test]
    fn star_classes_follow_the_table() {
        assert_eq!(p_stars(0.005), "***");
        assert_eq!(p_stars(0.03), "**");
        assert_eq!(p_stars(0.09), "*");
        assert_eq!(p_stars(0.5), "");
    }

    #[test]
    fn median_split_examples() {
        let t = binarize_treatment(&table(&[("a", 1.0), ("b", 2.0), ("c", 3.0), ("d", 4.0)]))
            .unwrap();
        assert_eq!(
            t.values().copied().collect::<Vec<u8>>(),
            vec![0, 0, 1, 1]
        );
        // odd n: the median element itself is not treated
        let t = binarize_treatment(&table(&[("a", 1.0), ("b", 2.0), ("c", 3.0)])).unwrap();
        assert_eq!(t["b"], 0);
        assert!(binarize_treatment(&table(&[("a", 2.0), ("b", 2.0)])).is_err());
    }

    #[test]
    fn binarize_assigns_at_most_half_when_distinct() {
        let t = binarize_treatment(&table(&[
            ("a", 5.0), ("b", 1.0), ("c", 3.0), ("d", 2.0), ("e", 4.0),
        ]))
        .unwrap();
        let treated: usize = t.values().map(|&v| v as usize).sum();
        assert!(treated <= 2);
    }

    #[test]
    fn outcome_normalization_and_affine_invariance() {
        let h = table(&[("a", -1.0), ("b", 0.0), ("c", 1.0)]);
        let n = normalize_outcome(&h).unwrap();
        assert_eq!(n["a"], 0.0);
        assert_eq!(n["b"], 0.5);
        assert_eq!(n["c"], 1.0);
        let shifted: BTreeMap<String, f64> =
            h.iter().map(|(k, v)| (k.clone(), v * 3.0 + 11.0)).collect();
        assert_eq!(normalize_outcome(&shifted).unwrap(), n);
        let two = normalize_outcome(&table(&[("a", 4.0), ("b", 9.0)])).unwrap();
        assert_eq!(two["a"], 0.0);
        assert_eq!(two["b"], 1.0);
    }

    #[test]
    fn smd_examples_match_hand_computation() {
        // identical across groups
        assert_eq!(standardized_mean_difference(&[1.0, 1.0], &[1.0, 1.0]), 0.0);
        // equals the treatment indicator
        assert_eq!(
            standardized_mean_difference(&[1.0, 1.0], &[0.0, 0.0]),
            f64::INFINITY
        );
        // 6-subject fixture: treated {1,2,3}, control {2,4,6}
        // means 2 and 4, variances 2/3 and 8/3, pooled sd sqrt(5/3)
        let smd = standardized_mean_difference(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]);
        assert!((smd - 2.0 / (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    fn demo_covariates(n: usize, seed: u64) -> (CovariateMatrix, Vec<String>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let locations: Vec<String> = (0..n).map(|i| format!("s{i:02}")).collect();
        let names = vec!["z1".to_string(), "z2".to_string(), "noise".to_string()];
        let rows: Vec<Vec<Option<f64>>> = (0..n)
            .map(|_| {
                vec![
                    Some(rng.random::<f64>() * 2.0 - 1.0),
                    Some(rng.random::<f64>() * 2.0 - 1.0),
                    Some(rng.random::<f64>() * 2.0 - 1.0),
                ]
            })
            .collect();
        let m = CovariateMatrix::from_rows(locations.clone(), names, rows).unwrap();
        (m, locations)
    }

    #[test]
    fn hdpsa_selects_drivers_not_noise() {
        let (cov, locations) = demo_covariates(40, 5);
        // treatment driven by z1 + z2
        let treatment: BTreeMap<String, u8> = locations
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let z1 = cov.value(i, "z1").unwrap();
                let z2 = cov.value(i, "z2").unwrap();
                (l.clone(), u8::from(z1 + z2 > 0.0))
            })
            .collect();
        let names = cov.names.clone();
        let picked =
            select_confounders_hdpsa(&names, &cov, &locations, &treatment, 0.2).unwrap();
        assert!(picked.contains(&"z1".to_string()));
        assert!(picked.contains(&"z2".to_string()));
    }

    #[test]
    fn cie_keeps_a_real_confounder_and_not_pure_noise() {
        let (cov, locations) = demo_covariates(40, 11);
        let treatment: BTreeMap<String, u8> = locations
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), u8::from(cov.value(i, "z1").unwrap() > 0.0)))
            .collect();
        let outcome: BTreeMap<String, f64> = locations
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let z1 = cov.value(i, "z1").unwrap();
                let t = treatment[l] as f64;
                (l.clone(), 0.5 + 0.3 * z1 - 0.2 * t)
            })
            .collect();
        let params = CausalParams::default();
        let names = cov.names.clone();
        let picked = select_confounders_cie(
            &names, &cov, &locations, &treatment, &outcome, &params,
        )
        .unwrap();
        assert!(picked.contains(&"z1".to_string()));
        assert!(!picked.contains(&"noise".to_string()));
    }

    #[test]
    fn causal_pipeline_is_deterministic() {
        let (cov, locations) = demo_covariates(30, 21);
        let stat: BTreeMap<String, f64> = locations
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), cov.value(i, "z1").unwrap() + 0.1 * i as f64))
            .collect();
        let scores: BTreeMap<String, f64> = locations
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), -stat[l] + 0.05 * ((i * 13 % 7) as f64)))
            .collect();
        let params = CausalParams {
            seed: 9,
            ..Default::default()
        };
        let a = causal_pipeline("stat", &stat, "score", &scores, &cov, &params).unwrap();
        let b = causal_pipeline("stat", &stat, "score", &scores, &cov, &params).unwrap();
        assert_eq!(a.ate, b.ate);
        assert_eq!((a.ci_low, a.ci_high), (b.ci_low, b.ci_high));
        assert_eq!(a.selected_confounders, b.selected_confounders);
        assert!(a.ci_low <= a.ate && a.ate <= a.ci_high);
    }

    #[test]
    fn covariate_loading_imputes_missing_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cov.tsv");
        std::fs::write(
            &path,
            "location\tz1\tz2\ns1\t1.0\t4.0\ns2\t\t6.0\ns3\t3.0\tNA\n",
        )
        .unwrap();
        let cov = CovariateMatrix::load(&path).unwrap();
        assert_eq!(cov.value(1, "z1"), Some(2.0)); // median of {1,3}
        assert_eq!(cov.value(2, "z2"), Some(5.0)); // median of {4,6}
        assert_eq!(cov.imputed["z1"], 1);
    }
}
