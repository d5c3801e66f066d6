//! Corpus loading, user geo-location, forum filtering, and data-quality
//! checks that happen before any graph is built.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, population_sd};
use crate::text::normalize_condition;

/// One message of a corpus (submission, comment, or tweet).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub user_id: String,
    #[serde(default)]
    pub forum: Option<String>,
    pub kind: DocumentKind,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocumentKind {
    Submission,
    Comment,
    Tweet,
}

impl DocumentKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "submission" => Some(Self::Submission),
            "comment" => Some(Self::Comment),
            "tweet" => Some(Self::Tweet),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Submission => "submission",
            Self::Comment => "comment",
            Self::Tweet => "tweet",
        }
    }
}

/// The conditions one user mentioned in one message, with attribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MentionRecord {
    pub doc_id: String,
    pub user_id: String,
    #[serde(default)]
    pub location: Option<String>,
    pub conditions: BTreeSet<String>,
}

/// Contribution tally of one user in one forum.
#[derive(Debug, Clone)]
pub struct ActivityRecord {
    pub user_id: String,
    pub forum: String,
    pub contribution_count: u64,
}

/// Located-user count of one location next to its census population.
#[derive(Debug, Clone)]
pub struct LocationStats {
    pub location: String,
    pub user_count: u64,
    pub census_population: u64,
}

/// A line skipped by a lenient loader, with the reason.
#[derive(Debug, Clone)]
pub struct SkippedLine {
    pub line: usize,
    pub message: String,
}

pub type UserLocations = BTreeMap<String, String>;

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l)))
}

fn load_jsonl<T, F>(
    path: &Path,
    strict: bool,
    mut validate: F,
) -> Result<(Vec<T>, Vec<SkippedLine>)>
where
    T: serde::de::DeserializeOwned,
    F: FnMut(&T) -> std::result::Result<(), String>,
{
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let outcome = serde_json::from_str::<T>(&line)
            .map_err(|e| e.to_string())
            .and_then(|rec| validate(&rec).map(|()| rec));
        match outcome {
            Ok(rec) => records.push(rec),
            Err(message) => {
                if strict {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: line_no,
                        message,
                    });
                }
                skipped.push(SkippedLine {
                    line: line_no,
                    message,
                });
            }
        }
    }
    Ok((records, skipped))
}

/// Loads line-delimited documents. Lenient mode skips malformed lines and
/// reports them with line numbers; strict mode fails on the first one.
pub fn load_documents(path: &Path, strict: bool) -> Result<(Vec<Document>, Vec<SkippedLine>)> {
    let mut seen_ids = BTreeSet::new();
    load_jsonl(path, strict, |doc: &Document| {
        if doc.text.trim().is_empty() {
            return Err("empty text".to_string());
        }
        if !seen_ids.insert(doc.doc_id.clone()) {
            return Err(format!("duplicate doc_id {:?}", doc.doc_id));
        }
        Ok(())
    })
}

/// Loads line-delimited mention records, normalizing and deduplicating the
/// condition strings of each record.
pub fn load_mentions(path: &Path, strict: bool) -> Result<(Vec<MentionRecord>, Vec<SkippedLine>)> {
    let (records, skipped) = load_jsonl(path, strict, |_: &MentionRecord| Ok(()))?;
    let records = records
        .into_iter()
        .map(|mut rec| {
            rec.conditions = rec
                .conditions
                .iter()
                .map(|c| normalize_condition(c))
                .filter(|c| !c.is_empty())
                .collect();
            rec
        })
        .collect();
    Ok((records, skipped))
}

/// Writes mention records as line-delimited JSON.
pub fn write_mentions(path: &Path, records: &[MentionRecord]) -> Result<()> {
    let mut out = String::new();
    for rec in records {
        out.push_str(&serde_json::to_string(rec).expect("mention record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a two-column `key<TAB>value` file (no header).
pub fn load_two_column(path: &Path) -> Result<Vec<(String, String)>> {
    let mut rows = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: "expected two tab-separated columns".to_string(),
        })?;
        rows.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(rows)
}

/// Loads the forum-to-state map.
pub fn load_forum_states(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (forum, state) in load_two_column(path)? {
        if let Some(prev) = map.insert(forum.clone(), state.clone()) {
            if prev != state {
                return Err(Error::InvalidInput(format!(
                    "forum {forum:?} mapped to both {prev:?} and {state:?}"
                )));
            }
        }
    }
    Ok(map)
}

/// Loads census populations (`location<TAB>population`).
pub fn load_census(path: &Path) -> Result<BTreeMap<String, u64>> {
    let mut map = BTreeMap::new();
    for (line_no, (location, pop)) in load_two_column(path)?.into_iter().enumerate() {
        let population: u64 = pop.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: line_no + 1,
            message: format!("bad population {pop:?}"),
        })?;
        if population == 0 {
            return Err(Error::InvalidInput(format!(
                "census population for {location:?} must be positive"
            )));
        }
        map.insert(location, population);
    }
    Ok(map)
}

/// Tallies per-user, per-forum contribution counts from a document stream.
pub fn activity_from_documents(docs: &[Document]) -> Vec<ActivityRecord> {
    let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
    for doc in docs {
        if let Some(forum) = &doc.forum {
            *counts
                .entry((doc.user_id.clone(), forum.clone()))
                .or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .map(|((user_id, forum), contribution_count)| ActivityRecord {
            user_id,
            forum,
            contribution_count,
        })
        .collect()
}

/// Assigns a state to every user whose location-forum activity maps to a
/// single state and totals at least `min_contributions`. Users active in
/// forums of two or more states are excluded.
pub fn infer_user_locations(
    activities: &[ActivityRecord],
    forum_to_state: &BTreeMap<String, String>,
    min_contributions: u64,
) -> UserLocations {
    let mut per_user: BTreeMap<&str, (BTreeSet<&str>, u64)> = BTreeMap::new();
    for act in activities {
        if let Some(state) = forum_to_state.get(&act.forum) {
            let entry = per_user.entry(&act.user_id).or_default();
            entry.0.insert(state);
            entry.1 += act.contribution_count;
        }
    }
    per_user
        .into_iter()
        .filter_map(|(user, (states, total))| {
            if states.len() == 1 && total >= min_contributions {
                Some((user.to_string(), states.first().unwrap().to_string()))
            } else {
                None
            }
        })
        .collect()
}

/// Drops documents posted in blocked forums (case-insensitive match).
/// Returns the surviving documents, in order, and the dropped count.
pub fn filter_forums(docs: Vec<Document>, blocklist: &BTreeSet<String>) -> (Vec<Document>, usize) {
    if blocklist.is_empty() {
        return (docs, 0);
    }
    let lowered: BTreeSet<String> = blocklist.iter().map(|f| f.to_lowercase()).collect();
    let before = docs.len();
    let kept: Vec<Document> = docs
        .into_iter()
        .filter(|doc| {
            doc.forum
                .as_ref()
                .map(|f| !lowered.contains(&f.to_lowercase()))
                .unwrap_or(true)
        })
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

/// Flags locations whose users-per-capita ratio deviates more than two
/// population standard deviations from the mean ratio.
pub fn representativeness_outliers(stats: &[LocationStats]) -> Result<BTreeSet<String>> {
    if stats.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "representativeness check needs at least 3 locations, got {}",
            stats.len()
        )));
    }
    let ratios: Vec<f64> = stats
        .iter()
        .map(|s| s.user_count as f64 / s.census_population as f64)
        .collect();
    let m = mean(&ratios);
    let sd = population_sd(&ratios);
    if sd == 0.0 {
        return Ok(BTreeSet::new());
    }
    Ok(stats
        .iter()
        .zip(&ratios)
        .filter(|(_, r)| (**r - m).abs() > 2.0 * sd)
        .map(|(s, _)| s.location.clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgreementMode {
    Strict,
    Relaxed,
}

/// Pair-wise agreement between two entity lists:
/// `match(A, B) / max(|A|, |B|)`, where `match` is the maximum matching
/// under exact equality (strict) or normalized containment either way
/// (relaxed). Two empty lists agree perfectly.
pub fn annotation_agreement(workers: &[String], expert: &[String], mode: AgreementMode) -> f64 {
    if workers.is_empty() && expert.is_empty() {
        return 1.0;
    }
    let related: Vec<Vec<usize>> = workers
        .iter()
        .map(|w| {
            expert
                .iter()
                .enumerate()
                .filter(|(_, e)| entities_match(w, e, mode))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let matched = max_bipartite_matching(&related, expert.len());
    matched as f64 / workers.len().max(expert.len()) as f64
}

fn entities_match(a: &str, b: &str, mode: AgreementMode) -> bool {
    match mode {
        AgreementMode::Strict => a == b,
        AgreementMode::Relaxed => {
            let na = normalize_condition(a);
            let nb = normalize_condition(b);
            na.contains(&nb) || nb.contains(&na)
        }
    }
}

// Kuhn's augmenting-path algorithm; list sizes here are tiny.
fn max_bipartite_matching(related: &[Vec<usize>], right_len: usize) -> usize {
    let mut match_right: Vec<Option<usize>> = vec![None; right_len];
    let mut size = 0;
    for left in 0..related.len() {
        let mut visited = vec![false; right_len];
        if try_augment(left, related, &mut visited, &mut match_right) {
            size += 1;
        }
    }
    size
}

fn try_augment(
    left: usize,
    related: &[Vec<usize>],
    visited: &mut [bool],
    match_right: &mut [Option<usize>],
) -> bool {
    for &right in &related[left] {
        if visited[right] {
            continue;
        }
        visited[right] = true;
        if match_right[right].is_none()
            || try_augment(match_right[right].unwrap(), related, visited, match_right)
        {
            match_right[right] = Some(left);
            return true;
        }
    }
    false
}
