//! Propensity-score matching, the matched-pair treatment effect, and its
//! bootstrap confidence interval.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// 1:1 matched (treated, control) pairs with the scores that formed them.
#[derive(Debug, Clone)]
pub struct MatchedPairs {
    pub pairs: Vec<(String, String)>,
    pub propensity: BTreeMap<String, f64>,
    pub unmatched_treated: Vec<String>,
}

impl MatchedPairs {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Greedy nearest-neighbor matching without replacement. Treated subjects
/// are processed in descending propensity; a pair forms only when the
/// propensity gap is within the caliper (when given). Ties resolve to the
/// lexicographically smallest subject, so matching is deterministic.
pub fn match_pairs(
    propensity: &BTreeMap<String, f64>,
    treatment: &BTreeMap<String, u8>,
    caliper: Option<f64>,
) -> Result<MatchedPairs> {
    let mut treated: Vec<(&String, f64)> = Vec::new();
    let mut controls: Vec<(&String, f64)> = Vec::new();
    for (subject, &t) in treatment {
        let p = propensity.get(subject).copied().ok_or_else(|| {
            Error::InvalidInput(format!("no propensity score for {subject:?}"))
        })?;
        if t == 1 {
            treated.push((subject, p));
        } else {
            controls.push((subject, p));
        }
    }
    if treated.is_empty() || controls.is_empty() {
        return Err(Error::InvalidInput(
            "matching needs at least one treated and one control subject".into(),
        ));
    }
    treated.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));

    let mut pairs = Vec::new();
    let mut unmatched_treated = Vec::new();
    for (subject, p) in treated {
        let nearest = controls
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (a.1 - p).abs().total_cmp(&(b.1 - p).abs()));
        match nearest {
            Some((idx, &(control, cp))) if caliper.is_none_or(|c| (cp - p).abs() <= c) => {
                pairs.push((subject.clone(), control.clone()));
                controls.remove(idx);
            }
            _ => unmatched_treated.push(subject.clone()),
        }
    }
    if pairs.is_empty() {
        return Err(Error::Degenerate(
            "no pairs satisfied the caliper; matching is empty".into(),
        ));
    }
    Ok(MatchedPairs {
        pairs,
        propensity: propensity.clone(),
        unmatched_treated,
    })
}

/// Mean outcome difference across matched pairs.
pub fn average_treatment_effect(
    pairs: &MatchedPairs,
    outcome: &BTreeMap<String, f64>,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no matched pairs".into()));
    }
    let mut total = 0.0;
    for (treated, control) in &pairs.pairs {
        let y = |s: &String| {
            outcome
                .get(s)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("no outcome for {s:?}")))
        };
        total += y(treated)? - y(control)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Percentile bootstrap interval for the ATE: resamples the matched pairs
/// with replacement `n_resamples` times. Deterministic given the seed.
pub fn bootstrap_ci(
    pairs: &MatchedPairs,
    outcome: &BTreeMap<String, f64>,
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if pairs.len() < 2 {
        return Err(Error::InvalidInput(
            "bootstrap needs at least 2 matched pairs".into(),
        ));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence level must be in (0,1), got {level}"
        )));
    }
    let differences: Vec<f64> = pairs
        .pairs
        .iter()
        .map(|(t, c)| {
            let y = |s: &String| {
                outcome
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("no outcome for {s:?}")))
            };
            Ok(y(t)? - y(c)?)
        })
        .collect::<Result<_>>()?;
    let m = differences.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut estimates: Vec<f64> = (0..n_resamples)
        .map(|_| {
            let mut total = 0.0;
            for _ in 0..m {
                total += differences[rng.random_range(0..m)];
            }
            total / m as f64
        })
        .collect();
    estimates.sort_by(|a, b| a.total_cmp(b));
    let alpha = 1.0 - level;
    Ok((
        quantile_sorted(&estimates, alpha / 2.0),
        quantile_sorted(&estimates, 1.0 - alpha / 2.0),
    ))
}
