//! Text normalization shared by the ingest and lexicon paths.

/// Canonical form of a condition phrase: case-folded, trimmed, internal
/// whitespace collapsed to single spaces, surrounding punctuation stripped.
/// No stemming: multi-word phrases stay distinct entities.
pub fn normalize_condition(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let stripped = lowered.trim_matches(|c: char| !c.is_alphanumeric() && !c.is_whitespace());
    let mut out = String::with_capacity(stripped.len());
    let mut pending_space = false;
    for ch in stripped.trim().chars() {
        if ch.is_whitespace() {
            pending_space = true;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch);
        }
    }
    out
}

/// Splits text into lowercased alphanumeric tokens. Everything else is a
/// token boundary, so matches can never start or end mid-word.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}
