//! Stage-wise pipeline execution. Every stage validates its inputs before
//! writing anything, produces its artifacts plus a manifest, and is
//! byte-reproducible given the same inputs and seed.

mod scoring;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use condmap::backbone::{edge_scores, noise_corrected_backbone, tune_delta, BackboneParams};
use condmap::centrality::{
    centrality, top_central, write_centrality, CentralityKind, CentralityParams,
};
use condmap::community::{
    assign_overlaps, build_taxonomy, cluster_id, detect_communities, module_codelength_terms,
    subcluster_id, write_partition, write_taxonomy,
};
use condmap::graph::{build_cooccurrence, CooccurrenceGraph};
use condmap::ingest::{
    activity_from_documents, filter_forums, infer_user_locations, load_census, load_documents,
    load_forum_states, load_mentions, representativeness_outliers, write_mentions, Document,
    DocumentKind, LocationStats, MentionRecord, UserLocations,
};
use condmap::lexicon::{extract_mentions_dictionary, Lexicon};

use crate::config::PipelineConfig;
use crate::manifest::Manifest;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Extract,
    Graph,
    Backbone,
    Cluster,
    Centrality,
    Score,
    Correlate,
    Causal,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Extract => "extract",
            Stage::Graph => "graph",
            Stage::Backbone => "backbone",
            Stage::Cluster => "cluster",
            Stage::Centrality => "centrality",
            Stage::Score => "score",
            Stage::Correlate => "correlate",
            Stage::Causal => "causal",
        }
    }

    pub const ALL: [Stage; 8] = [
        Stage::Extract,
        Stage::Graph,
        Stage::Backbone,
        Stage::Cluster,
        Stage::Centrality,
        Stage::Score,
        Stage::Correlate,
        Stage::Causal,
    ];
}

pub struct StageContext {
    pub config: PipelineConfig,
    pub seed: u64,
    pub strict: bool,
}

impl StageContext {
    pub fn out(&self) -> &Path {
        &self.config.paths.output
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.out().join(name)
    }

    /// An artifact another stage must have produced already.
    fn upstream(&self, name: &str, producer: Stage) -> Result<PathBuf, CliError> {
        let path = self.artifact(name);
        if !path.exists() {
            return Err(CliError::Validation(format!(
                "missing artifact {}; run the `{}` stage first",
                path.display(),
                producer.name()
            )));
        }
        Ok(path)
    }

    fn input(&self, path: &Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
        let path = path
            .as_ref()
            .ok_or_else(|| CliError::Validation(format!("config is missing paths.{key}")))?;
        if !path.exists() {
            return Err(CliError::Validation(format!(
                "paths.{key} = {} does not exist",
                path.display()
            )));
        }
        Ok(path.clone())
    }
}

fn runtime(e: condmap::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn validation(e: condmap::Error) -> CliError {
    CliError::Validation(e.to_string())
}

fn write_text(path: &Path, body: String) -> Result<(), CliError> {
    std::fs::write(path, body)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn run_stage(stage: Stage, ctx: &StageContext) -> Result<(), CliError> {
    std::fs::create_dir_all(ctx.out())
        .map_err(|e| CliError::Validation(format!("cannot create output dir: {e}")))?;
    match stage {
        Stage::Extract => extract_stage(ctx),
        Stage::Graph => graph_stage(ctx),
        Stage::Backbone => backbone_stage(ctx),
        Stage::Cluster => cluster_stage(ctx),
        Stage::Centrality => centrality_stage(ctx),
        Stage::Score => scoring::score_stage(ctx),
        Stage::Correlate => validate::correlate_stage(ctx),
        Stage::Causal => validate::causal_stage(ctx),
    }
}

// ------------------------------------------------------------------ extract

fn load_blocklist(path: &Path) -> Result<BTreeSet<String>, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(raw
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

fn parse_kinds(kinds: &Option<Vec<String>>) -> Result<Option<Vec<DocumentKind>>, CliError> {
    let Some(kinds) = kinds else {
        return Ok(None);
    };
    kinds
        .iter()
        .map(|k| {
            DocumentKind::parse(k)
                .ok_or_else(|| CliError::Validation(format!("unknown document kind {k:?}")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn write_user_locations(path: &Path, locations: &UserLocations) -> Result<(), CliError> {
    let mut out = String::from("user_id\tlocation\n");
    for (user, location) in locations {
        out.push_str(&format!("{user}\t{location}\n"));
    }
    write_text(path, out)
}

pub(crate) fn read_user_locations(path: &Path) -> Result<UserLocations, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(raw
        .lines()
        .skip(1)
        .filter_map(|l| l.split_once('\t'))
        .map(|(u, s)| (u.to_string(), s.to_string()))
        .collect())
}

pub(crate) fn read_exclusions(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(raw
        .lines()
        .skip(1)
        .filter_map(|l| l.split_once('\t'))
        .map(|(l, r)| (l.to_string(), r.to_string()))
        .collect())
}

/// Reloads documents the same way the extract stage consumed them, for
/// stages that need the raw text again.
pub(crate) fn reload_filtered_documents(ctx: &StageContext) -> Result<Vec<Document>, CliError> {
    let docs_path = ctx.input(&ctx.config.paths.documents, "documents")?;
    let (mut docs, _) = load_documents(&docs_path, ctx.strict).map_err(validation)?;
    if let Some(kinds) = parse_kinds(&ctx.config.extract.kinds)? {
        docs.retain(|d| kinds.contains(&d.kind));
    }
    if let Some(blocklist_path) = &ctx.config.paths.blocklist {
        let blocklist = load_blocklist(blocklist_path)?;
        let (kept, _) = filter_forums(docs, &blocklist);
        docs = kept;
    }
    Ok(docs)
}

fn extract_stage(ctx: &StageContext) -> Result<(), CliError> {
    let mut manifest = Manifest::new("extract", ctx.seed);
    manifest.param("strict", ctx.strict);
    manifest.param("min_contributions", ctx.config.extract.min_contributions);
    manifest.param(
        "exclude_outlier_states",
        ctx.config.extract.exclude_outlier_states,
    );

    let mut report: Vec<(String, String)> = Vec::new();
    let (mentions, locations) = if ctx.config.uses_documents() {
        extract_from_documents(ctx, &mut manifest, &mut report)?
    } else {
        import_mentions(ctx, &mut manifest, &mut report)?
    };

    let mentions_path = ctx.artifact("mentions.jsonl");
    write_mentions(&mentions_path, &mentions).map_err(runtime)?;
    let locations_path = ctx.artifact("user_locations.tsv");
    write_user_locations(&locations_path, &locations)?;

    // representativeness check against the census
    let mut exclusions: BTreeMap<String, String> = BTreeMap::new();
    let mut stats_rows = String::from("location\tusers\tcensus_population\tratio\toutlier\n");
    if let Some(census_path) = &ctx.config.paths.census {
        let census = load_census(census_path).map_err(validation)?;
        manifest.input("census", census_path)?;
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for state in locations.values() {
            *counts.entry(state).or_insert(0) += 1;
        }
        let stats: Vec<LocationStats> = census
            .iter()
            .map(|(state, &population)| LocationStats {
                location: state.clone(),
                user_count: counts.get(state.as_str()).copied().unwrap_or(0),
                census_population: population,
            })
            .collect();
        let flagged = if stats.len() >= 3 {
            representativeness_outliers(&stats).map_err(runtime)?
        } else {
            BTreeSet::new()
        };
        for s in &stats {
            let ratio = s.user_count as f64 / s.census_population as f64;
            let is_outlier = flagged.contains(&s.location);
            stats_rows.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                s.location, s.user_count, s.census_population, ratio, is_outlier
            ));
        }
        if ctx.config.extract.exclude_outlier_states {
            for state in flagged {
                exclusions.insert(
                    state,
                    "users-per-capita ratio beyond 2 sd of the mean".to_string(),
                );
            }
        }
    }
    let stats_path = ctx.artifact("location_stats.tsv");
    write_text(&stats_path, stats_rows)?;
    let exclusions_path = ctx.artifact("exclusions.tsv");
    let mut exclusions_body = String::from("location\treason\n");
    for (location, reason) in &exclusions {
        exclusions_body.push_str(&format!("{location}\t{reason}\n"));
    }
    write_text(&exclusions_path, exclusions_body)?;

    report.push(("mention_records".into(), mentions.len().to_string()));
    report.push((
        "nonempty_mention_records".into(),
        mentions
            .iter()
            .filter(|m| !m.conditions.is_empty())
            .count()
            .to_string(),
    ));
    report.push(("located_users".into(), locations.len().to_string()));
    report.push(("excluded_locations".into(), exclusions.len().to_string()));
    let mut report_body = String::from("metric\tvalue\n");
    for (metric, value) in &report {
        report_body.push_str(&format!("{metric}\t{value}\n"));
    }
    let report_path = ctx.artifact("extract_report.tsv");
    write_text(&report_path, report_body)?;

    manifest.output("mentions", &mentions_path)?;
    manifest.output("user_locations", &locations_path)?;
    manifest.output("location_stats", &stats_path)?;
    manifest.output("exclusions", &exclusions_path)?;
    manifest.output("extract_report", &report_path)?;
    manifest.write(ctx.out())?;
    Ok(())
}

fn extract_from_documents(
    ctx: &StageContext,
    manifest: &mut Manifest,
    report: &mut Vec<(String, String)>,
) -> Result<(Vec<MentionRecord>, UserLocations), CliError> {
    let docs_path = ctx.input(&ctx.config.paths.documents, "documents")?;
    let lexicon_path = ctx.input(&ctx.config.paths.lexicon, "lexicon")?;
    let forum_path = ctx.input(&ctx.config.paths.forum_states, "forum_states")?;
    manifest.input("documents", &docs_path)?;
    manifest.input("lexicon", &lexicon_path)?;
    manifest.input("forum_states", &forum_path)?;

    let (mut docs, skipped) = load_documents(&docs_path, ctx.strict).map_err(validation)?;
    report.push(("documents".into(), docs.len().to_string()));
    report.push(("skipped_lines".into(), skipped.len().to_string()));
    for s in skipped.iter().take(20) {
        eprintln!("extract: skipped line {}: {}", s.line, s.message);
    }

    if let Some(kinds) = parse_kinds(&ctx.config.extract.kinds)? {
        let before = docs.len();
        docs.retain(|d| kinds.contains(&d.kind));
        report.push(("dropped_by_kind".into(), (before - docs.len()).to_string()));
    }

    // locations come from activity across all (unblocked and blocked)
    // forums; the blocklist only shields mention extraction
    let activities = activity_from_documents(&docs);
    let forum_map = load_forum_states(&forum_path).map_err(validation)?;
    let locations = infer_user_locations(
        &activities,
        &forum_map,
        ctx.config.extract.min_contributions,
    );

    let dropped = if let Some(blocklist_path) = &ctx.config.paths.blocklist {
        manifest.input("blocklist", blocklist_path)?;
        let blocklist = load_blocklist(blocklist_path)?;
        let before = docs.len();
        let (kept, dropped) = filter_forums(docs, &blocklist);
        docs = kept;
        debug_assert_eq!(before - docs.len(), dropped);
        dropped
    } else {
        0
    };
    report.push(("dropped_blocked_forums".into(), dropped.to_string()));

    let lexicon = Lexicon::load(&lexicon_path, "conditions").map_err(validation)?;
    if lexicon.is_empty() {
        return Err(CliError::Validation("lexicon is empty".into()));
    }
    let matcher = lexicon.compile();
    use rayon::prelude::*;
    let mentions: Vec<MentionRecord> = docs
        .par_iter()
        .map(|doc| {
            let mut record = extract_mentions_dictionary(doc, &matcher);
            record.location = locations.get(&doc.user_id).cloned();
            record
        })
        .collect();
    Ok((mentions, locations))
}

fn import_mentions(
    ctx: &StageContext,
    manifest: &mut Manifest,
    report: &mut Vec<(String, String)>,
) -> Result<(Vec<MentionRecord>, UserLocations), CliError> {
    let mentions_path = ctx.input(&ctx.config.paths.mentions, "mentions")?;
    manifest.input("mentions", &mentions_path)?;
    let (mentions, skipped) = load_mentions(&mentions_path, ctx.strict).map_err(validation)?;
    report.push(("imported_records".into(), mentions.len().to_string()));
    report.push(("skipped_lines".into(), skipped.len().to_string()));
    let mut locations = UserLocations::new();
    let mut conflicts = 0usize;
    for record in &mentions {
        if let Some(location) = &record.location {
            match locations.get(&record.user_id) {
                None => {
                    locations.insert(record.user_id.clone(), location.clone());
                }
                Some(existing) if existing != location => conflicts += 1,
                _ => {}
            }
        }
    }
    report.push(("conflicting_locations".into(), conflicts.to_string()));
    Ok((mentions, locations))
}

// -------------------------------------------------------------------- graph

fn graph_stage(ctx: &StageContext) -> Result<(), CliError> {
    let mentions_path = ctx.upstream("mentions.jsonl", Stage::Extract)?;
    let mut manifest = Manifest::new("graph", ctx.seed);
    manifest.input("mentions", &mentions_path)?;
    manifest.param(
        "max_conditions_per_record",
        ctx.config.graph.max_conditions_per_record,
    );

    let (mentions, _) = load_mentions(&mentions_path, true).map_err(validation)?;
    let graph = build_cooccurrence(&mentions, ctx.config.graph.max_conditions_per_record)
        .map_err(runtime)?;
    let graph_path = ctx.artifact("cooccurrence.graph");
    graph.write_to(&graph_path).map_err(runtime)?;
    manifest.param("nodes", graph.node_count());
    manifest.param("edges", graph.edge_count());
    manifest.output("cooccurrence", &graph_path)?;
    manifest.write(ctx.out())?;
    Ok(())
}

// ----------------------------------------------------------------- backbone

fn backbone_stage(ctx: &StageContext) -> Result<(), CliError> {
    let graph_path = ctx.upstream("cooccurrence.graph", Stage::Graph)?;
    let mut manifest = Manifest::new("backbone", ctx.seed);
    manifest.input("cooccurrence", &graph_path)?;

    let graph = CooccurrenceGraph::read_from(&graph_path).map_err(validation)?;
    let delta = match (ctx.config.backbone.target_edges, ctx.config.backbone.delta) {
        (Some(target), _) => {
            let tuned = tune_delta(&graph, target).map_err(runtime)?;
            manifest.param("target_edges", target);
            manifest.param("tuned_iterations", tuned.iterations);
            manifest.param("achieved_edges", tuned.achieved_edges);
            if let Some(warning) = &tuned.warning {
                eprintln!("backbone: {warning}");
                manifest.param("tuning_warning", warning);
            }
            tuned.delta
        }
        (None, Some(delta)) => delta,
        (None, None) => unreachable!("config validation requires one"),
    };
    manifest.param("delta", delta);
    manifest.param("keep_isolates", ctx.config.backbone.keep_isolates);

    if ctx.config.backbone.emit_scores {
        let mut body = String::from("u\tv\tweight\texpected\tvariance\tscore\n");
        for s in edge_scores(&graph) {
            body.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                s.u, s.v, s.weight, s.expected, s.variance, s.score
            ));
        }
        let scores_path = ctx.artifact("backbone_scores.tsv");
        write_text(&scores_path, body)?;
        manifest.output("backbone_scores", &scores_path)?;
    }

    let outcome = noise_corrected_backbone(
        &graph,
        BackboneParams {
            delta,
            keep_isolates: ctx.config.backbone.keep_isolates,
        },
    )
    .map_err(runtime)?;
    if let Some(warning) = &outcome.warning {
        eprintln!("backbone: {warning}");
        manifest.param("warning", warning);
    }
    manifest.param("pruned_edges", outcome.pruned_edges);
    manifest.param("dropped_isolates", outcome.dropped_isolates);

    let backbone_path = ctx.artifact("backbone.graph");
    outcome.graph.write_to(&backbone_path).map_err(runtime)?;
    manifest.output("backbone", &backbone_path)?;

    let (giant, id_map) = outcome.graph.giant_component().map_err(runtime)?;
    let giant_path = ctx.artifact("giant.graph");
    giant.write_to(&giant_path).map_err(runtime)?;
    let mut idmap_body = String::from("giant_id\tbackbone_id\tcondition\n");
    for (new_id, old_id) in id_map.iter().enumerate() {
        idmap_body.push_str(&format!(
            "{new_id}\t{old_id}\t{}\n",
            outcome.graph.condition(*old_id)
        ));
    }
    let idmap_path = ctx.artifact("giant_idmap.tsv");
    write_text(&idmap_path, idmap_body)?;
    manifest.param("giant_nodes", giant.node_count());
    manifest.param("giant_edges", giant.edge_count());
    manifest.output("giant", &giant_path)?;
    manifest.output("giant_idmap", &idmap_path)?;
    manifest.write(ctx.out())?;
    Ok(())
}

// ------------------------------------------------------------------ cluster

fn cluster_stage(ctx: &StageContext) -> Result<(), CliError> {
    let giant_path = ctx.upstream("giant.graph", Stage::Backbone)?;
    let mut manifest = Manifest::new("cluster", ctx.seed);
    manifest.input("giant", &giant_path)?;
    manifest.param("trials", ctx.config.cluster.trials);
    manifest.param("overlap_threshold", ctx.config.cluster.overlap_threshold);
    manifest.param("top_terms", ctx.config.cluster.top_terms);

    let giant = CooccurrenceGraph::read_from(&giant_path).map_err(validation)?;
    let partition =
        detect_communities(&giant, ctx.seed, ctx.config.cluster.trials).map_err(runtime)?;
    let partition_path = ctx.artifact("partition.tsv");
    write_partition(&partition_path, &partition).map_err(runtime)?;

    let overlaps = assign_overlaps(
        &giant,
        &partition.level1,
        ctx.config.cluster.overlap_threshold,
    );
    let mut overlaps_body = String::from("node_id\tcondition\tprimary\tmemberships\n");
    for o in &overlaps {
        let memberships: Vec<String> = o
            .memberships
            .iter()
            .map(|(m, strength)| format!("{}:{strength}", cluster_id(*m)))
            .collect();
        overlaps_body.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            o.node,
            giant.condition(o.node),
            cluster_id(o.primary),
            memberships.join(";")
        ));
    }
    let overlaps_path = ctx.artifact("overlaps.tsv");
    write_text(&overlaps_path, overlaps_body)?;

    let taxonomy = build_taxonomy(&partition, &overlaps, &giant, ctx.config.cluster.top_terms);
    // codelength shares per cluster id, level-2 measured on the flattened
    // (module, submodule) partition
    let mut contributions = BTreeMap::new();
    for (m, bits) in module_codelength_terms(&giant, &partition.level1)
        .into_iter()
        .enumerate()
    {
        contributions.insert(cluster_id(m), bits);
    }
    let mut flat_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &pair in &partition.level2 {
        let next = flat_ids.len();
        flat_ids.entry(pair).or_insert(next);
    }
    let flat: Vec<usize> = partition.level2.iter().map(|p| flat_ids[p]).collect();
    let flat_terms = module_codelength_terms(&giant, &flat);
    for ((module, submodule), flat_id) in &flat_ids {
        contributions.insert(subcluster_id(*module, *submodule), flat_terms[*flat_id]);
    }
    let taxonomy_path = ctx.artifact("taxonomy.txt");
    write_taxonomy(&taxonomy_path, &taxonomy, &contributions).map_err(runtime)?;

    manifest.param("level1_modules", partition.n_modules());
    manifest.param("level2_modules", flat_ids.len());
    manifest.param("codelength_level1", partition.codelength_level1);
    manifest.param("codelength_level2", partition.codelength_level2);
    manifest.output("partition", &partition_path)?;
    manifest.output("overlaps", &overlaps_path)?;
    manifest.output("taxonomy", &taxonomy_path)?;
    manifest.write(ctx.out())?;
    Ok(())
}

// --------------------------------------------------------------- centrality

fn centrality_stage(ctx: &StageContext) -> Result<(), CliError> {
    let giant_path = ctx.upstream("giant.graph", Stage::Backbone)?;
    let mut manifest = Manifest::new("centrality", ctx.seed);
    manifest.input("giant", &giant_path)?;
    let kind = CentralityKind::parse(&ctx.config.centrality.kind)
        .ok_or_else(|| CliError::Validation("unknown centrality kind".into()))?;
    let params = CentralityParams {
        damping: ctx.config.centrality.damping,
        tolerance: ctx.config.centrality.tolerance,
        max_iterations: ctx.config.centrality.max_iterations,
    };
    manifest.param("kind", kind.as_str());
    manifest.param("damping", params.damping);
    manifest.param("tolerance", params.tolerance);
    manifest.param("top_fraction", ctx.config.centrality.top_fraction);

    let giant = CooccurrenceGraph::read_from(&giant_path).map_err(validation)?;
    let scores = centrality(&giant, kind, params).map_err(runtime)?;
    let centrality_path = ctx.artifact("centrality.tsv");
    write_centrality(&centrality_path, &giant, &scores).map_err(runtime)?;

    let central = top_central(&giant, &scores, ctx.config.centrality.top_fraction)
        .map_err(runtime)?;
    let mut central_body = String::from("condition\n");
    for condition in &central {
        central_body.push_str(condition);
        central_body.push('\n');
    }
    let central_path = ctx.artifact("central_conditions.tsv");
    write_text(&central_path, central_body)?;

    manifest.param("iterations", scores.iterations);
    manifest.param("central_set_size", central.len());
    manifest.output("centrality", &centrality_path)?;
    manifest.output("central_conditions", &central_path)?;
    manifest.write(ctx.out())?;
    Ok(())
}
