//! Deterministic synthetic corpus and graph generators for demos, the
//! bundled end-to-end run, and tests. Everything derives from one seed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{CooccurrenceGraph, WeightedEdge};
use crate::ingest::{Document, DocumentKind};

/// U.S. state codes with approximate census populations (2015 vintage).
pub const STATES: [(&str, u64); 50] = [
    ("AL", 4_858_979), ("AK", 738_432), ("AZ", 6_828_065), ("AR", 2_978_204),
    ("CA", 39_144_818), ("CO", 5_456_574), ("CT", 3_590_886), ("DE", 945_934),
    ("FL", 20_271_272), ("GA", 10_214_860), ("HI", 1_431_603), ("ID", 1_654_930),
    ("IL", 12_859_995), ("IN", 6_619_680), ("IA", 3_123_899), ("KS", 2_911_641),
    ("KY", 4_425_092), ("LA", 4_670_724), ("ME", 1_329_328), ("MD", 6_006_401),
    ("MA", 6_794_422), ("MI", 9_922_576), ("MN", 5_489_594), ("MS", 2_992_333),
    ("MO", 6_083_672), ("MT", 1_032_949), ("NE", 1_896_190), ("NV", 2_890_845),
    ("NH", 1_330_608), ("NJ", 8_958_013), ("NM", 2_085_109), ("NY", 19_795_791),
    ("NC", 10_042_802), ("ND", 756_927), ("OH", 11_613_423), ("OK", 3_911_338),
    ("OR", 4_028_977), ("PA", 12_802_503), ("RI", 1_056_298), ("SC", 4_896_146),
    ("SD", 858_469), ("TN", 6_600_299), ("TX", 27_469_114), ("UT", 2_995_919),
    ("VT", 626_042), ("VA", 8_382_993), ("WA", 7_170_351), ("WV", 1_844_128),
    ("WI", 5_771_337), ("WY", 586_107),
];

const PREFIXES: [&str; 36] = [
    "neuro", "derma", "cardio", "gastro", "arthro", "broncho", "myo", "osteo",
    "hepato", "nephro", "psycho", "rhino", "oto", "ophthalmo", "hemato", "immuno",
    "entero", "cephalo", "thoraco", "vaso", "fibro", "lipo", "glosso", "laryngo",
    "pneumo", "cranio", "spondylo", "tendo", "cysto", "colo", "angio", "dorso",
    "palpito", "tremo", "vertigo", "pruri",
];

const SUFFIXES: [&str; 28] = [
    "algia", "itis", "osis", "pathy", "emia", "oma", "plegia", "spasm",
    "rrhea", "phobia", "mania", "penia", "trophy", "sclerosis", "stenosis", "ptosis",
    "edema", "lysis", "megaly", "praxia", "phasia", "plasia", "rrhage", "taxia",
    "thymia", "tension", "version", "flux",
];

const QUALIFIERS: [&str; 20] = [
    "chronic", "acute", "mild", "severe", "recurrent", "persistent", "intermittent",
    "nocturnal", "seasonal", "early", "late", "partial", "bilateral", "episodic",
    "latent", "primary", "secondary", "atypical", "refractory", "transient",
];

const FILLER: [&str; 48] = [
    "today", "again", "really", "doctor", "visit", "feeling", "worse", "better",
    "started", "having", "trouble", "with", "been", "weeks", "months", "advice",
    "anyone", "else", "experience", "this", "after", "taking", "medication", "night",
    "morning", "work", "family", "help", "please", "update", "finally", "still",
    "getting", "every", "time", "since", "last", "year", "thanks", "sharing",
    "symptoms", "appointment", "waiting", "results", "hoping", "scared", "relief", "support",
];

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub seed: u64,
    pub n_states: usize,
    pub n_users: usize,
    pub n_documents: usize,
    pub n_conditions: usize,
    pub n_categories: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 42,
            n_states: 50,
            n_users: 800,
            n_documents: 10_000,
            n_conditions: 2_000,
            n_categories: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    pub forum_states: BTreeMap<String, String>,
    pub census: BTreeMap<String, u64>,
    /// (phrase, category) rows of the generic lexicon.
    pub lexicon: Vec<(String, String)>,
    /// (phrase, disease) rows of the dictionary-count baseline.
    pub disliwc: Vec<(String, String)>,
    pub blocklist: Vec<String>,
    /// statistic name -> location -> value
    pub statistics: BTreeMap<String, BTreeMap<String, f64>>,
    pub covariate_names: Vec<String>,
    /// location -> covariate row (same order as `covariate_names`)
    pub covariates: BTreeMap<String, Vec<f64>>,
}

/// Generates a corpus with planted category structure and a geographic
/// sickness signal, so the full pipeline produces meaningful artifacts.
pub fn generate(params: &SynthParams) -> SynthCorpus {
    assert!(params.n_states >= 6 && params.n_states <= STATES.len());
    assert!(params.n_categories >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let states: Vec<(&str, u64)> = STATES[..params.n_states].to_vec();
    let census: BTreeMap<String, u64> = states
        .iter()
        .map(|&(code, pop)| (code.to_string(), pop))
        .collect();

    // latent per-state health and per-(category, state) mention propensity
    let state_health: BTreeMap<&str, f64> = states
        .iter()
        .map(|&(code, _)| (code, rng.random::<f64>() * 2.0 - 1.0))
        .collect();
    let mut theta: BTreeMap<(usize, &str), f64> = BTreeMap::new();
    for c in 0..params.n_categories {
        let category_shift = rng.random::<f64>() * 0.1;
        for &(code, _) in &states {
            let noise = rng.random::<f64>() * 0.4 - 0.2;
            let v = 0.30 - 0.12 * state_health[code] + category_shift + 0.5 * noise;
            theta.insert((c, code), v.clamp(0.02, 0.95));
        }
    }

    // condition names, unique, assigned round-robin to categories
    let mut stems: Vec<String> = Vec::new();
    for p in PREFIXES {
        for s in SUFFIXES {
            stems.push(format!("{p}{s}"));
        }
    }
    stems.shuffle(&mut rng);
    let mut names: Vec<String> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    'outer: for round in 0..=QUALIFIERS.len() {
        for stem in &stems {
            let name = if round == 0 {
                stem.clone()
            } else {
                format!("{} {stem}", QUALIFIERS[round - 1])
            };
            if seen.insert(name.clone()) {
                names.push(name);
                if names.len() == params.n_conditions {
                    break 'outer;
                }
            }
        }
    }
    assert_eq!(names.len(), params.n_conditions, "name pool exhausted");
    let mut category_conditions: Vec<Vec<String>> = vec![Vec::new(); params.n_categories];
    for (i, name) in names.iter().enumerate() {
        category_conditions[i % params.n_categories].push(name.clone());
    }

    let lexicon: Vec<(String, String)> = (0..params.n_categories)
        .flat_map(|c| {
            category_conditions[c]
                .iter()
                .map(move |n| (n.clone(), format!("cat{c:02}")))
                .collect::<Vec<_>>()
        })
        .collect();
    let disliwc: Vec<(String, String)> = (0..params.n_categories.min(5))
        .flat_map(|c| {
            category_conditions[c]
                .iter()
                .take(10)
                .map(move |n| (n.clone(), format!("disease-cat{c:02}")))
                .collect::<Vec<_>>()
        })
        .collect();

    // forums
    let mut forum_states = BTreeMap::new();
    for &(code, _) in &states {
        for i in 0..2 {
            forum_states.insert(format!("loc-{}-{i}", code.to_lowercase()), code.to_string());
        }
    }
    let blocklist = vec![
        "animals".to_string(),
        "fashion".to_string(),
        "computers".to_string(),
    ];
    let mut topical: Vec<String> = (0..params.n_categories)
        .map(|c| format!("health-cat{c:02}"))
        .collect();
    topical.extend(blocklist.iter().cloned());

    // users: home state weighted by population, with deliberate
    // multi-state and low-activity groups
    let total_pop: u64 = states.iter().map(|&(_, p)| p).sum();
    let mut users: Vec<(String, &str, Option<&str>, bool)> = Vec::new();
    for i in 0..params.n_users {
        let mut draw = rng.random_range(0..total_pop);
        let mut home = states[0].0;
        for &(code, pop) in &states {
            if draw < pop {
                home = code;
                break;
            }
            draw -= pop;
        }
        let roll = rng.random::<f64>();
        let (second, low_activity) = if roll < 0.08 {
            let other = states[rng.random_range(0..states.len())].0;
            (Some(other).filter(|&o| o != home), false)
        } else if roll < 0.15 {
            (None, true)
        } else {
            (None, false)
        };
        users.push((format!("u{i:05}"), home, second, low_activity));
    }

    // per-user document quotas in location forums
    let mut doc_plan: Vec<(usize, String)> = Vec::new(); // (user index, forum)
    for (idx, (_, home, second, low_activity)) in users.iter().enumerate() {
        let location_docs = if *low_activity {
            rng.random_range(1..=4)
        } else {
            5 + rng.random_range(0..6)
        };
        for d in 0..location_docs {
            let state = match second {
                Some(s) if d % 2 == 1 => s,
                _ => home,
            };
            let forum = format!("loc-{}-{}", state.to_lowercase(), rng.random_range(0..2));
            doc_plan.push((idx, forum));
        }
        for _ in 0..rng.random_range(0..3usize) {
            let forum = topical[rng.random_range(0..topical.len())].clone();
            doc_plan.push((idx, forum));
        }
    }
    // trim or pad to the exact document count
    doc_plan.shuffle(&mut rng);
    while doc_plan.len() < params.n_documents {
        let idx = rng.random_range(0..users.len());
        let state = users[idx].1;
        let forum = format!("loc-{}-{}", state.to_lowercase(), rng.random_range(0..2));
        doc_plan.push((idx, forum));
    }
    doc_plan.truncate(params.n_documents);

    // document text with planted category co-mentions
    let category_pick = |rng: &mut ChaCha8Rng, home: &&str| -> usize {
        let weights: Vec<f64> = (0..params.n_categories)
            .map(|c| theta[&(c, *home)])
            .collect();
        let total: f64 = weights.iter().sum();
        let mut draw = rng.random::<f64>() * total;
        for (c, w) in weights.iter().enumerate() {
            if draw < *w {
                return c;
            }
            draw -= w;
        }
        params.n_categories - 1
    };
    let zipf_pick = |rng: &mut ChaCha8Rng, pool: &[String]| -> String {
        // rank-weighted: early entries dominate, like real mention tails
        let n = pool.len() as f64;
        let u = rng.random::<f64>();
        let rank = ((n.powf(u) - 1.0).max(0.0) as usize).min(pool.len() - 1);
        pool[rank].clone()
    };

    let mut documents = Vec::with_capacity(params.n_documents);
    for (doc_index, (user_idx, forum)) in doc_plan.iter().enumerate() {
        let (user_id, home, _, _) = &users[*user_idx];
        let mut words: Vec<String> = (0..rng.random_range(4..12))
            .map(|_| FILLER[rng.random_range(0..FILLER.len())].to_string())
            .collect();
        if rng.random::<f64>() < 0.55 {
            let category = category_pick(&mut rng, home);
            let k = match rng.random::<f64>() {
                x if x < 0.40 => 1,
                x if x < 0.70 => 2,
                x if x < 0.90 => 3,
                _ => 4,
            };
            let pool = &category_conditions[category];
            for _ in 0..k {
                let phrase = zipf_pick(&mut rng, pool);
                let at = rng.random_range(0..=words.len());
                words.insert(at, phrase);
            }
            if rng.random::<f64>() < 0.15 {
                let other = rng.random_range(0..params.n_categories);
                let phrase = zipf_pick(&mut rng, &category_conditions[other]);
                words.push(phrase);
            }
        }
        let kind = if rng.random::<f64>() < 0.3 {
            DocumentKind::Submission
        } else {
            DocumentKind::Comment
        };
        documents.push(Document {
            doc_id: format!("d{doc_index:06}"),
            user_id: user_id.clone(),
            forum: Some(forum.clone()),
            kind,
            text: words.join(" "),
        });
    }

    // official statistics follow the planted sickness (plus noise), so
    // prevalence correlates negatively with the health scores
    let mut statistics: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for c in 0..params.n_categories.min(14) {
        let mut table = BTreeMap::new();
        for &(code, _) in &states {
            let noise = rng.random::<f64>() * 2.0 - 1.0;
            table.insert(code.to_string(), 100.0 * theta[&(c, code)] + 2.0 * noise);
        }
        statistics.insert(format!("prev-cat{c:02}"), table);
    }
    let mut poor_health = BTreeMap::new();
    for &(code, _) in &states {
        let avg: f64 = (0..params.n_categories)
            .map(|c| theta[&(c, code)])
            .sum::<f64>()
            / params.n_categories as f64;
        let noise = rng.random::<f64>() * 2.0 - 1.0;
        poor_health.insert(code.to_string(), 100.0 * avg + 1.5 * noise);
    }
    statistics.insert("poor-self-rated-health".to_string(), poor_health);

    // covariates: a few genuinely tied to the latent health, the rest noise
    let covariate_names: Vec<String> = [
        "income", "education", "unemployment", "density", "age-median",
        "gini", "urban-share", "internet-share",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut covariates = BTreeMap::new();
    for &(code, pop) in &states {
        let z = state_health[code];
        let mut row = Vec::with_capacity(covariate_names.len());
        row.push(50.0 + 12.0 * z + 4.0 * (rng.random::<f64>() - 0.5)); // income
        row.push(30.0 + 8.0 * z + 3.0 * (rng.random::<f64>() - 0.5)); // education
        row.push(6.0 - 2.0 * z + 1.0 * (rng.random::<f64>() - 0.5)); // unemployment
        row.push((pop as f64).ln() + rng.random::<f64>() * 0.2); // density
        for _ in 4..covariate_names.len() {
            row.push(rng.random::<f64>() * 10.0);
        }
        covariates.insert(code.to_string(), row);
    }

    SynthCorpus {
        documents,
        forum_states,
        census,
        lexicon,
        disliwc,
        blocklist,
        statistics,
        covariate_names,
        covariates,
    }
}

/// Writes every corpus file into `dir` using the pipeline input formats.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<()> {
    let write = |name: &str, content: String| -> Result<()> {
        std::fs::write(dir.join(name), content).map_err(|source| Error::Io {
            path: dir.join(name),
            source,
        })
    };

    let mut docs = String::new();
    for doc in &corpus.documents {
        docs.push_str(&serde_json::to_string(doc).expect("document serializes"));
        docs.push('\n');
    }
    write("documents.jsonl", docs)?;

    let mut forums = String::new();
    for (forum, state) in &corpus.forum_states {
        forums.push_str(&format!("{forum}\t{state}\n"));
    }
    write("forum_states.tsv", forums)?;

    let mut census = String::new();
    for (state, pop) in &corpus.census {
        census.push_str(&format!("{state}\t{pop}\n"));
    }
    write("census.tsv", census)?;

    let mut lexicon = String::new();
    for (phrase, category) in &corpus.lexicon {
        lexicon.push_str(&format!("{phrase}\t{category}\n"));
    }
    write("lexicon.tsv", lexicon)?;

    let mut disliwc = String::new();
    for (phrase, disease) in &corpus.disliwc {
        disliwc.push_str(&format!("{phrase}\t{disease}\n"));
    }
    write("disliwc.tsv", disliwc)?;

    write("blocklist.txt", corpus.blocklist.join("\n") + "\n")?;

    let stat_names: Vec<&String> = corpus.statistics.keys().collect();
    let mut stats = String::from("location");
    for name in &stat_names {
        stats.push_str(&format!("\t{name}"));
    }
    stats.push('\n');
    for state in corpus.census.keys() {
        stats.push_str(state);
        for name in &stat_names {
            stats.push_str(&format!("\t{}", corpus.statistics[*name][state]));
        }
        stats.push('\n');
    }
    write("statistics.tsv", stats)?;

    let mut cov = String::from("location");
    for name in &corpus.covariate_names {
        cov.push_str(&format!("\t{name}"));
    }
    cov.push('\n');
    for (state, row) in &corpus.covariates {
        cov.push_str(state);
        for v in row {
            cov.push_str(&format!("\t{v}"));
        }
        cov.push('\n');
    }
    write("covariates.tsv", cov)?;
    Ok(())
}

/// Ring of k cliques: clique i joins clique i+1 (mod k) by a single unit
/// edge. The planted level-1 partition is the cliques themselves.
pub fn ring_of_cliques(k: usize, clique_size: usize) -> (CooccurrenceGraph, Vec<usize>) {
    assert!(k >= 2 && clique_size >= 3);
    let n = k * clique_size;
    let mut edges = Vec::new();
    for c in 0..k {
        let base = c * clique_size;
        for i in 0..clique_size {
            for j in (i + 1)..clique_size {
                edges.push(WeightedEdge {
                    u: base + i,
                    v: base + j,
                    weight: 1,
                });
            }
        }
    }
    for c in 0..k {
        let from = c * clique_size + (clique_size - 1);
        let to = ((c + 1) % k) * clique_size;
        edges.push(WeightedEdge {
            u: from.min(to),
            v: from.max(to),
            weight: 1,
        });
    }
    let g = CooccurrenceGraph::new(
        (0..n).map(|i| format!("n{i:03}")).collect(),
        vec![1; n],
        edges,
    )
    .expect("ring of cliques is a valid graph");
    let truth = (0..n).map(|i| i / clique_size).collect();
    (g, truth)
}

/// Planted-partition graph: `k` groups of `group_size` nodes, dense heavy
/// edges inside groups and sparse unit edges between them.
pub fn planted_partition(
    seed: u64,
    k: usize,
    group_size: usize,
    p_in: f64,
    p_out: f64,
) -> CooccurrenceGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = k * group_size;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let same = u / group_size == v / group_size;
            let (p, w) = if same {
                (p_in, rng.random_range(3..10))
            } else {
                (p_out, rng.random_range(1..3))
            };
            if rng.random::<f64>() < p {
                edges.push(WeightedEdge { u, v, weight: w });
            }
        }
    }
    CooccurrenceGraph::new(
        (0..n).map(|i| format!("n{i:05}")).collect(),
        vec![1; n],
        edges,
    )
    .expect("planted partition is a valid graph")
}
