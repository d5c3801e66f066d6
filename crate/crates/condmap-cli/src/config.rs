//! Pipeline configuration: one TOML file with a section per stage.
//! Relative paths resolve against the configuration file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub paths: Paths,
    #[serde(default)]
    pub extract: ExtractConfig,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default)]
    pub backbone: BackboneConfig,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub centrality: CentralityConfig,
    #[serde(default)]
    pub score: ScoreConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(default)]
    pub documents: Option<PathBuf>,
    #[serde(default)]
    pub mentions: Option<PathBuf>,
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub disliwc: Option<PathBuf>,
    #[serde(default)]
    pub forum_states: Option<PathBuf>,
    #[serde(default)]
    pub census: Option<PathBuf>,
    #[serde(default)]
    pub blocklist: Option<PathBuf>,
    #[serde(default)]
    pub statistics: Option<PathBuf>,
    #[serde(default)]
    pub covariates: Option<PathBuf>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    pub min_contributions: u64,
    /// Restrict extraction to these document kinds (default: all).
    #[serde(default)]
    pub kinds: Option<Vec<String>>,
    pub exclude_outlier_states: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            min_contributions: 5,
            kinds: None,
            exclude_outlier_states: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub max_conditions_per_record: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            max_conditions_per_record: 50,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneConfig {
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub target_edges: Option<usize>,
    pub keep_isolates: bool,
    pub emit_scores: bool,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self {
            delta: Some(2.0),
            target_edges: None,
            keep_isolates: false,
            emit_scores: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub trials: usize,
    pub overlap_threshold: f64,
    pub top_terms: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            trials: 10,
            overlap_threshold: 0.25,
            top_terms: 50,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentralityConfig {
    pub kind: String,
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub top_fraction: f64,
}

impl Default for CentralityConfig {
    fn default() -> Self {
        Self {
            kind: "pagerank".into(),
            damping: 0.85,
            tolerance: 1e-10,
            max_iterations: 200,
            top_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreConfig {
    pub aggregation: String,
    pub denominator: String,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            aggregation: "max".into(),
            denominator: "mentioning-users".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    pub n_resamples: usize,
    pub confidence: f64,
    pub cie_threshold: f64,
    pub smd_threshold: f64,
    #[serde(default)]
    pub caliper: Option<f64>,
    /// Which score variant feeds the causal outcome.
    pub score_rho: u8,
    /// Restrict pairings to `statistic=category` entries (default: the
    /// full cross product).
    #[serde(default)]
    pub pairs: Option<Vec<String>>,
    /// `statistic=disease` mapping for the dictionary-count baseline.
    #[serde(default)]
    pub liwc_map: Vec<String>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            n_resamples: 100,
            confidence: 0.95,
            cie_threshold: 0.10,
            smd_threshold: 0.2,
            caliper: None,
            score_rho: 1,
            pairs: None,
            liwc_map: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut config: PipelineConfig = toml::from_str(&raw)
            .map_err(|e| CliError::Validation(format!("bad config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        config.resolve_paths(&base);
        config.validate()?;
        Ok((config, base))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        let fix_opt = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&path);
                }
            }
        };
        fix(&mut self.paths.output);
        fix_opt(&mut self.paths.documents);
        fix_opt(&mut self.paths.mentions);
        fix_opt(&mut self.paths.lexicon);
        fix_opt(&mut self.paths.disliwc);
        fix_opt(&mut self.paths.forum_states);
        fix_opt(&mut self.paths.census);
        fix_opt(&mut self.paths.blocklist);
        fix_opt(&mut self.paths.statistics);
        fix_opt(&mut self.paths.covariates);
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.paths.documents.is_none() && self.paths.mentions.is_none() {
            return Err(CliError::Validation(
                "config must set paths.documents or paths.mentions".into(),
            ));
        }
        if condmap::centrality::CentralityKind::parse(&self.centrality.kind).is_none() {
            return Err(CliError::Validation(format!(
                "unknown centrality kind {:?} (pagerank, harmonic, degree)",
                self.centrality.kind
            )));
        }
        if condmap::health::Aggregation::parse(&self.score.aggregation).is_none() {
            return Err(CliError::Validation(format!(
                "unknown aggregation {:?} (max, sum, mean)",
                self.score.aggregation
            )));
        }
        if condmap::health::Denominator::parse(&self.score.denominator).is_none() {
            return Err(CliError::Validation(format!(
                "unknown denominator {:?} (mentioning-users, all-users)",
                self.score.denominator
            )));
        }
        if self.inference.score_rho > 1 {
            return Err(CliError::Validation("inference.score_rho must be 0 or 1".into()));
        }
        if let Some(delta) = self.backbone.delta {
            if delta < 0.0 {
                return Err(CliError::Validation("backbone.delta must be >= 0".into()));
            }
        }
        if self.backbone.delta.is_none() && self.backbone.target_edges.is_none() {
            return Err(CliError::Validation(
                "backbone needs delta or target_edges".into(),
            ));
        }
        if self.cluster.trials == 0 {
            return Err(CliError::Validation("cluster.trials must be >= 1".into()));
        }
        if !(self.centrality.top_fraction > 0.0 && self.centrality.top_fraction <= 1.0) {
            return Err(CliError::Validation(
                "centrality.top_fraction must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Documents are required for extraction-from-text; mentions may be
    /// imported directly instead.
    pub fn uses_documents(&self) -> bool {
        self.paths.documents.is_some()
    }
}
