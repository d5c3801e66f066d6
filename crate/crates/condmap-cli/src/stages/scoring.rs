//! The score stage: per-category fraction and health-score tables for
//! both rho variants, plus the dictionary-count baseline.

use std::collections::{BTreeMap, BTreeSet};

use condmap::centrality::read_centrality;
use condmap::community::{cluster_id, read_partition};
use condmap::graph::CooccurrenceGraph;
use condmap::health::{
    category_fraction, disliwc_scores, health_score, score_outlier_filter, Aggregation,
    CategorySpec, Denominator, Exclusion, HealthScoreTable,
};
use condmap::ingest::load_mentions;
use condmap::lexicon::Lexicon;

use super::{
    read_exclusions, read_user_locations, reload_filtered_documents, runtime, validation,
    write_text, Stage, StageContext,
};
use crate::manifest::Manifest;
use crate::CliError;

pub(crate) fn score_stage(ctx: &StageContext) -> Result<(), CliError> {
    let giant_path = ctx.upstream("giant.graph", Stage::Backbone)?;
    let partition_path = ctx.upstream("partition.tsv", Stage::Cluster)?;
    let centrality_path = ctx.upstream("centrality.tsv", Stage::Centrality)?;
    let central_set_path = ctx.upstream("central_conditions.tsv", Stage::Centrality)?;
    let mentions_path = ctx.upstream("mentions.jsonl", Stage::Extract)?;
    let locations_path = ctx.upstream("user_locations.tsv", Stage::Extract)?;
    let exclusions_path = ctx.upstream("exclusions.tsv", Stage::Extract)?;

    let mut manifest = Manifest::new("score", ctx.seed);
    for (label, path) in [
        ("giant", &giant_path),
        ("partition", &partition_path),
        ("centrality", &centrality_path),
        ("central_conditions", &central_set_path),
        ("mentions", &mentions_path),
        ("user_locations", &locations_path),
        ("exclusions", &exclusions_path),
    ] {
        manifest.input(label, path)?;
    }
    let aggregation = Aggregation::parse(&ctx.config.score.aggregation)
        .ok_or_else(|| CliError::Validation("unknown aggregation".into()))?;
    let denominator = Denominator::parse(&ctx.config.score.denominator)
        .ok_or_else(|| CliError::Validation("unknown denominator".into()))?;
    manifest.param("aggregation", aggregation.as_str());
    manifest.param("denominator", denominator.as_str());

    let giant = CooccurrenceGraph::read_from(&giant_path).map_err(validation)?;
    let partition = read_partition(&partition_path).map_err(validation)?;
    if partition.len() != giant.node_count() {
        return Err(CliError::Validation(
            "partition does not cover the giant component; re-run `cluster`".into(),
        ));
    }
    let centrality = read_centrality(&centrality_path).map_err(validation)?;
    let (mentions, _) = load_mentions(&mentions_path, true).map_err(validation)?;
    let mut locations = read_user_locations(&locations_path)?;
    let exclusions = read_exclusions(&exclusions_path)?;
    // excluded locations leave the analysis entirely
    locations.retain(|_, state| !exclusions.contains_key(state));
    let global_exclusions: Vec<Exclusion> = exclusions
        .iter()
        .map(|(location, reason)| Exclusion {
            location: location.clone(),
            reason: reason.clone(),
        })
        .collect();

    // category specs: one per level-1 cluster, the full set, and the
    // most-central set
    let n_modules = partition.iter().map(|&(m, _)| m + 1).max().unwrap_or(0);
    let mut specs: Vec<CategorySpec> = Vec::new();
    specs.push(CategorySpec {
        category_id: "all".into(),
        conditions: giant.conditions().iter().cloned().collect(),
    });
    let central_raw = std::fs::read_to_string(&central_set_path)
        .map_err(|e| CliError::Validation(format!("cannot read central set: {e}")))?;
    specs.push(CategorySpec {
        category_id: "central".into(),
        conditions: central_raw.lines().skip(1).map(|l| l.to_string()).collect(),
    });
    for module in 0..n_modules {
        let conditions: BTreeSet<String> = partition
            .iter()
            .enumerate()
            .filter(|(_, &(m, _))| m == module)
            .map(|(node, _)| giant.condition(node).to_string())
            .collect();
        specs.push(CategorySpec {
            category_id: cluster_id(module),
            conditions,
        });
    }

    let scores_dir = ctx.out().join("scores");
    std::fs::create_dir_all(&scores_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create scores dir: {e}")))?;
    let mut index = String::from("category\trho\tfile\n");
    for spec in &specs {
        for rho in [0u8, 1u8] {
            let fractions = category_fraction(
                &mentions,
                &locations,
                spec,
                &centrality,
                rho,
                aggregation,
                denominator,
            )
            .map_err(runtime)?;
            let filtered = score_outlier_filter(&fractions).map_err(runtime)?;
            let mut scored = health_score(&filtered).map_err(runtime)?;
            prepend_exclusions(&mut scored, &global_exclusions);
            if scored.sigma == 0.0 {
                eprintln!(
                    "score: category {} rho={rho} has zero variance; all scores are 0",
                    spec.category_id
                );
            }
            let file = format!("{}_rho{rho}.tsv", spec.category_id);
            condmap::health::write_scores(&scores_dir.join(&file), &scored).map_err(runtime)?;
            index.push_str(&format!("{}\t{rho}\tscores/{file}\n", spec.category_id));
        }
    }

    // dictionary-count baseline
    if ctx.config.paths.disliwc.is_some() && ctx.config.uses_documents() {
        let disliwc_path = ctx.input(&ctx.config.paths.disliwc, "disliwc")?;
        manifest.input("disliwc", &disliwc_path)?;
        let lexicon = Lexicon::load(&disliwc_path, "disliwc").map_err(validation)?;
        let documents = reload_filtered_documents(ctx)?;
        let tables = disliwc_scores(&documents, &locations, &lexicon).map_err(runtime)?;
        for (disease, mut table) in tables {
            prepend_exclusions(&mut table, &global_exclusions);
            let file = format!("disliwc-{disease}.tsv");
            condmap::health::write_scores(&scores_dir.join(&file), &table).map_err(runtime)?;
            index.push_str(&format!("disliwc-{disease}\t0\tscores/{file}\n"));
        }
    }

    let index_path = scores_dir.join("index.tsv");
    write_text(&index_path, index)?;
    manifest.param("categories", specs.len());
    manifest.output("scores_index", &index_path)?;
    manifest.write(ctx.out())?;
    Ok(())
}

fn prepend_exclusions(table: &mut HealthScoreTable, global: &[Exclusion]) {
    let mut combined = global.to_vec();
    combined.append(&mut table.excluded);
    table.excluded = combined;
}
