//! Per-location category fractions and standardized health scores.
//!
//! The fraction of location l for a category with condition set S is
//! `f(l) = (1/|U_l|) * sum_{u in U_l} agg({c(s)^rho : s in S(u)})`, and the
//! health score is the negated z-score `H(l) = -(f(l) - mu) / sigma`, so
//! positive values mark locations mentioning the category less than
//! average.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{Document, MentionRecord, UserLocations};
use crate::lexicon::{extract_mentions_dictionary, Lexicon};
use crate::stats::{mean, population_sd};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Max,
    Sum,
    Mean,
}

impl Aggregation {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "max" => Some(Self::Max),
            "sum" => Some(Self::Sum),
            "mean" => Some(Self::Mean),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Max => "max",
            Self::Sum => "sum",
            Self::Mean => "mean",
        }
    }

    fn apply(&self, values: &[f64]) -> f64 {
        if values.is_empty() {
            return 0.0;
        }
        match self {
            Self::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Self::Sum => values.iter().sum(),
            Self::Mean => values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

/// Who counts into the denominator U_l.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Denominator {
    /// Located users with at least one non-empty mention record.
    MentioningUsers,
    /// Every located user.
    AllUsers,
}

impl Denominator {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mentioning-users" => Some(Self::MentioningUsers),
            "all-users" => Some(Self::AllUsers),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MentioningUsers => "mentioning-users",
            Self::AllUsers => "all-users",
        }
    }
}

/// A category to score: a cluster id (or "all" / "central" / a Dis-LIWC
/// disease) plus its condition set.
#[derive(Debug, Clone)]
pub struct CategorySpec {
    pub category_id: String,
    pub conditions: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct Exclusion {
    pub location: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct FractionTable {
    pub category_id: String,
    pub rho: u8,
    pub aggregation: Aggregation,
    pub denominator: Denominator,
    pub values: BTreeMap<String, f64>,
    pub excluded: Vec<Exclusion>,
}

#[derive(Debug, Clone, Copy)]
pub struct HealthRow {
    pub fraction: f64,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct HealthScoreTable {
    pub category_id: String,
    pub rho: u8,
    pub aggregation: Aggregation,
    pub denominator: Denominator,
    pub mu: f64,
    pub sigma: f64,
    pub rows: BTreeMap<String, HealthRow>,
    pub excluded: Vec<Exclusion>,
}

impl HealthScoreTable {
    pub fn scores(&self) -> BTreeMap<String, f64> {
        self.rows
            .iter()
            .map(|(l, row)| (l.clone(), row.score))
            .collect()
    }
}

/// Evaluates the weighted per-location fraction for one category. Users
/// whose category set is empty contribute 0; locations without users in
/// the denominator are excluded with a reason.
pub fn category_fraction(
    mentions: &[MentionRecord],
    locations: &UserLocations,
    spec: &CategorySpec,
    centrality: &BTreeMap<String, f64>,
    rho: u8,
    aggregation: Aggregation,
    denominator: Denominator,
) -> Result<FractionTable> {
    if rho > 1 {
        return Err(Error::InvalidInput(format!("rho must be 0 or 1, got {rho}")));
    }
    if spec.conditions.is_empty() {
        return Err(Error::InvalidInput(format!(
            "category {:?} has an empty condition set",
            spec.category_id
        )));
    }

    // union of category conditions mentioned by each located user
    let mut user_sets: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut mentioning: BTreeSet<&str> = BTreeSet::new();
    for rec in mentions {
        let Some(_) = locations.get(&rec.user_id) else {
            continue;
        };
        if !rec.conditions.is_empty() {
            mentioning.insert(&rec.user_id);
        }
        let set = user_sets.entry(&rec.user_id).or_default();
        for cond in &rec.conditions {
            if spec.conditions.contains(cond) {
                set.insert(cond);
            }
        }
    }

    // denominator per location
    let mut members: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    match denominator {
        Denominator::MentioningUsers => {
            for &user in &mentioning {
                members
                    .entry(locations.get(user).unwrap().as_str())
                    .or_default()
                    .push(user);
            }
            for location in locations.values() {
                members.entry(location.as_str()).or_default();
            }
        }
        Denominator::AllUsers => {
            for (user, location) in locations {
                members
                    .entry(location.as_str())
                    .or_default()
                    .push(user.as_str());
            }
        }
    }

    let weight = |cond: &str| -> f64 {
        if rho == 0 {
            1.0
        } else {
            centrality.get(cond).copied().unwrap_or(0.0)
        }
    };
    let mut values = BTreeMap::new();
    let mut excluded = Vec::new();
    for (location, users) in &members {
        if users.is_empty() {
            excluded.push(Exclusion {
                location: location.to_string(),
                reason: format!("no users in denominator ({})", denominator.as_str()),
            });
            continue;
        }
        let total: f64 = users
            .iter()
            .map(|user| {
                let set = user_sets.get(user);
                let weights: Vec<f64> = set
                    .map(|s| s.iter().map(|c| weight(c)).collect())
                    .unwrap_or_default();
                aggregation.apply(&weights)
            })
            .sum();
        values.insert(location.to_string(), total / users.len() as f64);
    }
    Ok(FractionTable {
        category_id: spec.category_id.clone(),
        rho,
        aggregation,
        denominator,
        values,
        excluded,
    })
}

/// Drops locations whose fraction deviates more than two population
/// standard deviations from the mean (strictly); identical fractions pass
/// through unchanged.
pub fn score_outlier_filter(table: &FractionTable) -> Result<FractionTable> {
    if table.values.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "outlier filter needs at least 3 locations, got {}",
            table.values.len()
        )));
    }
    let fractions: Vec<f64> = table.values.values().copied().collect();
    let m = mean(&fractions);
    let sd = population_sd(&fractions);
    let mut filtered = table.clone();
    if sd == 0.0 {
        return Ok(filtered);
    }
    filtered.values = BTreeMap::new();
    for (location, &f) in &table.values {
        if (f - m).abs() > 2.0 * sd {
            filtered.excluded.push(Exclusion {
                location: location.clone(),
                reason: format!("score outlier (f={f}, mean={m}, sd={sd})"),
            });
        } else {
            filtered.values.insert(location.clone(), f);
        }
    }
    Ok(filtered)
}

/// Standardizes fractions into health scores `H = -(f - mu) / sigma` with
/// population statistics over the included locations. A zero sigma yields
/// all-zero scores (check `sigma` on the result).
pub fn health_score(table: &FractionTable) -> Result<HealthScoreTable> {
    if table.values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "health score needs at least 2 locations, got {}",
            table.values.len()
        )));
    }
    let fractions: Vec<f64> = table.values.values().copied().collect();
    let mu = mean(&fractions);
    let sigma = population_sd(&fractions);
    let rows = table
        .values
        .iter()
        .map(|(location, &f)| {
            let score = if sigma > 0.0 { -(f - mu) / sigma } else { 0.0 };
            (
                location.clone(),
                HealthRow {
                    fraction: f,
                    score,
                },
            )
        })
        .collect();
    Ok(HealthScoreTable {
        category_id: table.category_id.clone(),
        rho: table.rho,
        aggregation: table.aggregation,
        denominator: table.denominator,
        mu,
        sigma,
        rows,
        excluded: table.excluded.clone(),
    })
}

/// Dictionary-count baseline: extracts mentions of every dictionary
/// phrase, then scores each disease category with rho = 0 over all
/// located users.
pub fn disliwc_scores(
    documents: &[Document],
    locations: &UserLocations,
    lexicon: &Lexicon,
) -> Result<BTreeMap<String, HealthScoreTable>> {
    if lexicon.is_empty() {
        return Err(Error::InvalidInput("empty Dis-LIWC lexicon".into()));
    }
    let by_disease = lexicon.by_category();
    if by_disease.is_empty() {
        return Err(Error::InvalidInput(
            "Dis-LIWC lexicon has no category labels".into(),
        ));
    }
    let matcher = lexicon.compile();
    let mentions: Vec<MentionRecord> = documents
        .iter()
        .map(|doc| extract_mentions_dictionary(doc, &matcher))
        .collect();
    let centrality = BTreeMap::new();
    let mut out = BTreeMap::new();
    for (disease, phrases) in by_disease {
        let spec = CategorySpec {
            category_id: format!("disliwc-{disease}"),
            conditions: phrases,
        };
        let fractions = category_fraction(
            &mentions,
            locations,
            &spec,
            &centrality,
            0,
            Aggregation::Max,
            Denominator::AllUsers,
        )?;
        let filtered = score_outlier_filter(&fractions)?;
        out.insert(disease, health_score(&filtered)?);
    }
    Ok(out)
}

/// Writes a scores file: metadata header, then `location TAB f TAB H`.
pub fn write_scores(path: &Path, table: &HealthScoreTable) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "# category={} rho={} aggregation={} denominator={} mu={} sigma={}\n",
        table.category_id,
        table.rho,
        table.aggregation.as_str(),
        table.denominator.as_str(),
        table.mu,
        table.sigma
    ));
    let excluded: Vec<String> = table
        .excluded
        .iter()
        .map(|e| format!("{}: {}", e.location, e.reason))
        .collect();
    out.push_str(&format!("# excluded={}\n", excluded.join("; ")));
    out.push_str("location\tf\tH\n");
    for (location, row) in &table.rows {
        out.push_str(&format!("{location}\t{}\t{}\n", row.fraction, row.score));
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a scores file back as `location -> (f, H)`.
pub fn read_scores(path: &Path) -> Result<BTreeMap<String, (f64, f64)>> {
    let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows = BTreeMap::new();
    for (i, line) in raw.lines().enumerate() {
        if line.starts_with('#') || line.starts_with("location\t") || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let bad = |message: &str| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: message.into(),
        };
        if cols.len() != 3 {
            return Err(bad("expected three columns"));
        }
        let f: f64 = cols[1].parse().map_err(|_| bad("bad fraction"))?;
        let h: f64 = cols[2].parse().map_err(|_| bad("bad score"))?;
        rows.insert(cols[0].to_string(), (f, h));
    }
    Ok(rows)
}
