//! The correlate and causal stages, ending in the combined results table
//! (one row per score/statistic pairing).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use condmap::health::read_scores;
use condmap::inference::{
    causal_pipeline, load_stat_tables, p_stars, pearson, CausalParams, CovariateMatrix,
};
use condmap::ingest::{load_census, load_mentions};
use condmap::stats::derive_seed;

use super::{read_user_locations, runtime, validation, write_text, Stage, StageContext};
use crate::manifest::Manifest;
use crate::CliError;

struct ScoreIndex {
    /// (category, rho) -> scores file
    files: BTreeMap<(String, u8), PathBuf>,
    categories: Vec<String>,
    diseases: Vec<String>,
}

fn read_score_index(ctx: &StageContext) -> Result<ScoreIndex, CliError> {
    let index_path = ctx.upstream("scores/index.tsv", Stage::Score)?;
    let raw = std::fs::read_to_string(&index_path)
        .map_err(|e| CliError::Validation(format!("cannot read scores index: {e}")))?;
    let mut files = BTreeMap::new();
    for line in raw.lines().skip(1) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            continue;
        }
        let rho: u8 = cols[1]
            .parse()
            .map_err(|_| CliError::Validation(format!("bad rho in scores index: {line}")))?;
        files.insert((cols[0].to_string(), rho), ctx.out().join(cols[2]));
    }
    let mut categories: Vec<String> = files
        .keys()
        .filter(|(c, rho)| *rho == 0 && !c.starts_with("disliwc-"))
        .map(|(c, _)| c.clone())
        .collect();
    categories.dedup();
    let diseases: Vec<String> = files
        .keys()
        .filter(|(c, _)| c.starts_with("disliwc-"))
        .map(|(c, _)| c.trim_start_matches("disliwc-").to_string())
        .collect();
    Ok(ScoreIndex {
        files,
        categories,
        diseases,
    })
}

impl ScoreIndex {
    fn health_scores(&self, category: &str, rho: u8) -> Result<BTreeMap<String, f64>, CliError> {
        let path = self.files.get(&(category.to_string(), rho)).ok_or_else(|| {
            CliError::Validation(format!("no scores for category {category:?} rho={rho}"))
        })?;
        Ok(read_scores(path)
            .map_err(validation)?
            .into_iter()
            .map(|(l, (_, h))| (l, h))
            .collect())
    }
}

fn pairings(
    ctx: &StageContext,
    categories: &[String],
    stats: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<Vec<(String, String)>, CliError> {
    if let Some(pairs) = &ctx.config.inference.pairs {
        pairs
            .iter()
            .map(|entry| {
                let (stat, category) = entry.split_once('=').ok_or_else(|| {
                    CliError::Validation(format!(
                        "bad pair {entry:?}; expected statistic=category"
                    ))
                })?;
                if !stats.contains_key(stat) {
                    return Err(CliError::Validation(format!("unknown statistic {stat:?}")));
                }
                if !categories.contains(&category.to_string()) {
                    return Err(CliError::Validation(format!(
                        "unknown score category {category:?}"
                    )));
                }
                Ok((category.to_string(), stat.to_string()))
            })
            .collect()
    } else {
        Ok(categories
            .iter()
            .flat_map(|c| stats.keys().map(move |s| (c.clone(), s.clone())))
            .collect())
    }
}

fn liwc_for_stat(ctx: &StageContext, diseases: &[String]) -> BTreeMap<String, String> {
    ctx.config
        .inference
        .liwc_map
        .iter()
        .filter_map(|entry| entry.split_once('='))
        .filter(|(_, disease)| diseases.contains(&disease.to_string()))
        .map(|(stat, disease)| (stat.to_string(), disease.to_string()))
        .collect()
}

/// Pearson r, p, and stars of a score table against a statistic over
/// their common locations; None when degenerate or too small.
fn correlate_tables(
    scores: &BTreeMap<String, f64>,
    stat: &BTreeMap<String, f64>,
) -> Option<(f64, f64, usize)> {
    let common: Vec<&String> = scores.keys().filter(|l| stat.contains_key(*l)).collect();
    if common.len() < 3 {
        return None;
    }
    let x: Vec<f64> = common.iter().map(|l| scores[*l]).collect();
    let y: Vec<f64> = common.iter().map(|l| stat[*l]).collect();
    pearson(&x, &y).ok().map(|(r, p)| (r, p, common.len()))
}

pub(crate) fn correlate_stage(ctx: &StageContext) -> Result<(), CliError> {
    let stats_path = ctx.input(&ctx.config.paths.statistics, "statistics")?;
    let index = read_score_index(ctx)?;
    let mut manifest = Manifest::new("correlate", ctx.seed);
    manifest.input("statistics", &stats_path)?;
    manifest.input("scores_index", &ctx.artifact("scores/index.tsv"))?;

    let stats = load_stat_tables(&stats_path).map_err(validation)?;
    let pairs = pairings(ctx, &index.categories, &stats)?;
    let liwc_map = liwc_for_stat(ctx, &index.diseases);

    let mut body = String::from(
        "score\tstatistic\tn\tr_rho0\tp_rho0\tstars_rho0\tr_rho1\tp_rho1\tstars_rho1\tr_liwc\tp_liwc\tstars_liwc\n",
    );
    for (category, stat_name) in &pairs {
        let stat = &stats[stat_name];
        let mut cells: Vec<String> = vec![category.clone(), stat_name.clone()];
        let rho0 = correlate_tables(&index.health_scores(category, 0)?, stat);
        let rho1 = correlate_tables(&index.health_scores(category, 1)?, stat);
        let n = rho0.map(|(_, _, n)| n).unwrap_or(0);
        cells.push(n.to_string());
        for entry in [rho0, rho1] {
            match entry {
                Some((r, p, _)) => {
                    cells.push(format!("{r:.4}"));
                    cells.push(format!("{p:.4}"));
                    cells.push(p_stars(p).to_string());
                }
                None => cells.extend(["-".into(), "-".into(), "".into()]),
            }
        }
        let liwc = liwc_map
            .get(stat_name)
            .map(|disease| index.health_scores(&format!("disliwc-{disease}"), 0))
            .transpose()?
            .and_then(|table| correlate_tables(&table, stat));
        match liwc {
            Some((r, p, _)) => {
                cells.push(format!("{r:.4}"));
                cells.push(format!("{p:.4}"));
                cells.push(p_stars(p).to_string());
            }
            None => cells.extend(["-".into(), "-".into(), "".into()]),
        }
        body.push_str(&cells.join("\t"));
        body.push('\n');
    }
    let correlations_path = ctx.artifact("correlations.tsv");
    write_text(&correlations_path, body)?;
    manifest.param("pairings", pairs.len());
    manifest.output("correlations", &correlations_path)?;

    // activity-confound check: scores should not track platform activity
    let activity_path = ctx.artifact("activity_check.tsv");
    let mut activity_body =
        String::from("score\trho\tvariable\tn\tr\tp\tstars\n");
    if let Some(census_path) = &ctx.config.paths.census {
        let census = load_census(census_path).map_err(validation)?;
        let locations = read_user_locations(&ctx.upstream("user_locations.tsv", Stage::Extract)?)?;
        let (mentions, _) = load_mentions(&ctx.upstream("mentions.jsonl", Stage::Extract)?, true)
            .map_err(validation)?;
        let mut located_users: BTreeMap<String, f64> = BTreeMap::new();
        for state in locations.values() {
            *located_users.entry(state.clone()).or_insert(0.0) += 1.0;
        }
        let mut mentioning: BTreeMap<String, std::collections::BTreeSet<&str>> = BTreeMap::new();
        for rec in &mentions {
            if rec.conditions.is_empty() {
                continue;
            }
            if let Some(state) = locations.get(&rec.user_id) {
                mentioning
                    .entry(state.clone())
                    .or_default()
                    .insert(&rec.user_id);
            }
        }
        let census_f: BTreeMap<String, f64> = census
            .iter()
            .map(|(l, &p)| (l.clone(), p as f64))
            .collect();
        let adoption: BTreeMap<String, f64> = located_users
            .iter()
            .filter_map(|(l, users)| {
                census_f.get(l).map(|pop| (l.clone(), users / pop * 1000.0))
            })
            .collect();
        let mentioning_users: BTreeMap<String, f64> = mentioning
            .iter()
            .map(|(l, set)| (l.clone(), set.len() as f64))
            .collect();
        let variables: [(&str, &BTreeMap<String, f64>); 4] = [
            ("census_population", &census_f),
            ("located_users", &located_users),
            ("adoption_per_1000", &adoption),
            ("mentioning_users", &mentioning_users),
        ];
        for category in &index.categories {
            for rho in [0u8, 1u8] {
                let table = index.health_scores(category, rho)?;
                for (name, variable) in &variables {
                    match correlate_tables(&table, variable) {
                        Some((r, p, n)) => activity_body.push_str(&format!(
                            "{category}\t{rho}\t{name}\t{n}\t{r:.4}\t{p:.4}\t{}\n",
                            p_stars(p)
                        )),
                        None => activity_body.push_str(&format!(
                            "{category}\t{rho}\t{name}\t0\t-\t-\t\n"
                        )),
                    }
                }
            }
        }
    }
    write_text(&activity_path, activity_body)?;
    manifest.output("activity_check", &activity_path)?;
    manifest.write(ctx.out())?;
    Ok(())
}

fn fold_name(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
        })
}

pub(crate) fn causal_stage(ctx: &StageContext) -> Result<(), CliError> {
    let stats_path = ctx.input(&ctx.config.paths.statistics, "statistics")?;
    let covariates_path = ctx.input(&ctx.config.paths.covariates, "covariates")?;
    let correlations_path = ctx.upstream("correlations.tsv", Stage::Correlate)?;
    let index = read_score_index(ctx)?;
    let mut manifest = Manifest::new("causal", ctx.seed);
    manifest.input("statistics", &stats_path)?;
    manifest.input("covariates", &covariates_path)?;
    manifest.input("correlations", &correlations_path)?;

    let inference = &ctx.config.inference;
    manifest.param("score_rho", inference.score_rho);
    manifest.param("n_resamples", inference.n_resamples);
    manifest.param("confidence", inference.confidence);
    manifest.param("cie_threshold", inference.cie_threshold);
    manifest.param("smd_threshold", inference.smd_threshold);
    if let Some(caliper) = inference.caliper {
        manifest.param("caliper", caliper);
    }

    let stats = load_stat_tables(&stats_path).map_err(validation)?;
    let covariates = CovariateMatrix::load(&covariates_path).map_err(validation)?;
    for (column, count) in &covariates.imputed {
        eprintln!("causal: imputed {count} missing values in covariate {column:?}");
    }
    let pairs = pairings(ctx, &index.categories, &stats)?;

    let mut causal_rows: BTreeMap<(String, String), String> = BTreeMap::new();
    let mut failures = 0usize;
    let mut body = String::from(
        "score\tstatistic\tate\tate_star\tci_low\tci_high\tn_pairs\tn_confounders\tconfounders\tfallback\n",
    );
    for (category, stat_name) in &pairs {
        let scores = index.health_scores(category, inference.score_rho)?;
        let params = CausalParams {
            caliper: inference.caliper,
            n_resamples: inference.n_resamples,
            confidence: inference.confidence,
            cie_threshold: inference.cie_threshold,
            smd_threshold: inference.smd_threshold,
            l2: 1e-4,
            seed: derive_seed(
                ctx.seed,
                0xca05,
                fold_name(&format!("{category}\u{1f}{stat_name}")),
            ),
        };
        let row = match causal_pipeline(
            stat_name,
            &stats[stat_name],
            category,
            &scores,
            &covariates,
            &params,
        ) {
            Ok(result) => {
                let star = if result.ci_high < 0.0 { "*" } else { "" };
                format!(
                    "{:.4}\t{star}\t{:.4}\t{:.4}\t{}\t{}\t{}\t{}",
                    result.ate,
                    result.ci_low,
                    result.ci_high,
                    result.n_pairs,
                    result.selected_confounders.len(),
                    result.selected_confounders.join(";"),
                    result.used_fallback
                )
            }
            Err(e) => {
                failures += 1;
                eprintln!("causal: {category} vs {stat_name}: {e}");
                "-\t\t-\t-\t0\t0\t\tfalse".to_string()
            }
        };
        body.push_str(&format!("{category}\t{stat_name}\t{row}\n"));
        causal_rows.insert((category.clone(), stat_name.clone()), row);
    }
    let causal_path = ctx.artifact("causal.tsv");
    write_text(&causal_path, body)?;
    manifest.param("pairings", pairs.len());
    manifest.param("failed_pairings", failures);
    manifest.output("causal", &causal_path)?;

    let results_path = write_results(ctx, &correlations_path, &causal_rows)?;
    manifest.output("results", &results_path)?;
    manifest.write(ctx.out())?;
    Ok(())
}

/// The combined results file: correlations for both rho variants and the
/// dictionary baseline with significance stars attached, then the ATE,
/// its interval, and the selected confounders.
fn write_results(
    ctx: &StageContext,
    correlations_path: &Path,
    causal_rows: &BTreeMap<(String, String), String>,
) -> Result<PathBuf, CliError> {
    let raw = std::fs::read_to_string(correlations_path)
        .map_err(|e| CliError::Runtime(format!("cannot read correlations: {e}")))?;
    let mut body = String::from(
        "score\tstatistic\tr_rho0\tr_rho1\tr_liwc\tate\tci_low\tci_high\tn_confounders\tconfounders\n",
    );
    for line in raw.lines().skip(1) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 12 {
            continue;
        }
        let (score, statistic) = (cols[0], cols[1]);
        let starred = |r: &str, stars: &str| {
            if r == "-" {
                "-".to_string()
            } else {
                format!("{r}{stars}")
            }
        };
        let r0 = starred(cols[3], cols[5]);
        let r1 = starred(cols[6], cols[8]);
        let rl = starred(cols[9], cols[11]);
        let causal = causal_rows
            .get(&(score.to_string(), statistic.to_string()))
            .cloned()
            .unwrap_or_else(|| "-\t\t-\t-\t0\t0\t\tfalse".to_string());
        let causal_cols: Vec<&str> = causal.split('\t').collect();
        // ate with its interval star attached, Table-style
        let ate = starred(causal_cols[0], causal_cols[1]);
        body.push_str(&format!(
            "{score}\t{statistic}\t{r0}\t{r1}\t{rl}\t{ate}\t{}\t{}\t{}\t{}\n",
            causal_cols[2], causal_cols[3], causal_cols[5], causal_cols[6]
        ));
    }
    let results_path = ctx.artifact("results.tsv");
    write_text(&results_path, body)?;
    Ok(results_path)
}
