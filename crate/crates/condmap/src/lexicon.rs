//! Dictionary-based condition matching: token-boundary anchored,
//! longest-match-wins.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{Document, MentionRecord};
use crate::text::{normalize_condition, tokenize};

/// A named dictionary of condition phrases, each with an optional category
/// label (required for per-disease dictionaries, unused by the generic
/// matcher). Phrases are stored normalized.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub name: String,
    entries: BTreeMap<String, Option<String>>,
}

impl Lexicon {
    pub fn new<I, S>(name: &str, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Option<S>)>,
        S: AsRef<str>,
    {
        let mut map: BTreeMap<String, Option<String>> = BTreeMap::new();
        for (phrase, category) in entries {
            let normalized = normalize_condition(phrase.as_ref());
            if normalized.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "lexicon {name:?}: phrase {:?} is empty after normalization",
                    phrase.as_ref()
                )));
            }
            let category = category
                .map(|c| c.as_ref().trim().to_string())
                .filter(|c| !c.is_empty());
            if let Some(prev) = map.insert(normalized.clone(), category.clone()) {
                if prev != category {
                    return Err(Error::InvalidInput(format!(
                        "lexicon {name:?}: phrase {normalized:?} listed with conflicting categories"
                    )));
                }
            }
        }
        Ok(Self {
            name: name.to_string(),
            entries: map,
        })
    }

    /// Loads a `phrase<TAB>category` file; the category column may be empty.
    pub fn load(path: &Path, name: &str) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut entries = Vec::new();
        for line in raw.lines() {
            if line.trim().is_empty() {
                continue;
            }
            match line.split_once('\t') {
                Some((phrase, category)) => entries.push((phrase, Some(category))),
                None => entries.push((line, None)),
            }
        }
        Self::new(name, entries)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn phrases(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn category(&self, phrase: &str) -> Option<&str> {
        self.entries.get(phrase).and_then(|c| c.as_deref())
    }

    /// Distinct category labels, each with its phrase set.
    pub fn by_category(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (phrase, category) in &self.entries {
            if let Some(cat) = category {
                out.entry(cat.clone()).or_default().insert(phrase.clone());
            }
        }
        out
    }

    /// Compiles the phrase index used for matching. Build once, match many.
    pub fn compile(&self) -> PhraseMatcher {
        let mut index: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        for phrase in self.entries.keys() {
            let tokens = tokenize(phrase);
            if tokens.is_empty() {
                continue;
            }
            index.entry(tokens[0].clone()).or_default().push(tokens);
        }
        for candidates in index.values_mut() {
            // longest first so the greedy scan takes the longest match
            candidates.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        }
        PhraseMatcher { index }
    }
}

/// Token-level phrase matcher. A phrase matches only on whole-token spans,
/// and overlapping candidates are resolved longest-match-wins.
#[derive(Debug, Clone)]
pub struct PhraseMatcher {
    index: HashMap<String, Vec<Vec<String>>>,
}

impl PhraseMatcher {
    /// All distinct lexicon phrases found in `text`.
    pub fn find(&self, text: &str) -> BTreeSet<String> {
        let tokens = tokenize(text);
        let mut found = BTreeSet::new();
        let mut pos = 0;
        while pos < tokens.len() {
            let mut advance = 1;
            if let Some(candidates) = self.index.get(&tokens[pos]) {
                for candidate in candidates {
                    if candidate.len() <= tokens.len() - pos
                        && candidate[1..]
                            .iter()
                            .zip(&tokens[pos + 1..])
                            .all(|(a, b)| a == b)
                    {
                        found.insert(candidate.join(" "));
                        advance = candidate.len();
                        break;
                    }
                }
            }
            pos += advance;
        }
        found
    }
}

/// Extracts the lexicon phrases occurring in one document. The location
/// field is left unset; attribution happens downstream.
pub fn extract_mentions_dictionary(doc: &Document, matcher: &PhraseMatcher) -> MentionRecord {
    MentionRecord {
        doc_id: doc.doc_id.clone(),
        user_id: doc.user_id.clone(),
        location: None,
        conditions: matcher.find(&doc.text),
    }
}
