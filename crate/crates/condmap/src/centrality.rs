//! Node centralities on the backboned graph: PageRank (weighted power
//! iteration with uniform teleportation), harmonic (unweighted hop
//! distances), and degree (strength).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{CooccurrenceGraph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CentralityKind {
    Pagerank,
    Harmonic,
    Degree,
}

impl CentralityKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pagerank" => Some(Self::Pagerank),
            "harmonic" => Some(Self::Harmonic),
            "degree" => Some(Self::Degree),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pagerank => "pagerank",
            Self::Harmonic => "harmonic",
            Self::Degree => "degree",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CentralityParams {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CentralityParams {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CentralityScores {
    pub kind: CentralityKind,
    pub values: Vec<f64>,
    pub damping: f64,
    pub tolerance: f64,
    pub iterations: usize,
}

impl CentralityScores {
    /// Values keyed by condition string.
    pub fn by_condition(&self, g: &CooccurrenceGraph) -> BTreeMap<String, f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (g.condition(i).to_string(), v))
            .collect()
    }
}

pub fn centrality(
    g: &CooccurrenceGraph,
    kind: CentralityKind,
    params: CentralityParams,
) -> Result<CentralityScores> {
    if g.node_count() == 0 {
        return Err(Error::InvalidInput(
            "centrality needs a non-empty graph".into(),
        ));
    }
    let (values, iterations) = match kind {
        CentralityKind::Pagerank => pagerank(g, params)?,
        CentralityKind::Harmonic => (harmonic(g), 0),
        CentralityKind::Degree => (
            (0..g.node_count()).map(|i| g.strength(i) as f64).collect(),
            0,
        ),
    };
    Ok(CentralityScores {
        kind,
        values,
        damping: params.damping,
        tolerance: params.tolerance,
        iterations,
    })
}

fn pagerank(g: &CooccurrenceGraph, params: CentralityParams) -> Result<(Vec<f64>, usize)> {
    let n = g.node_count();
    let d = params.damping;
    let uniform = 1.0 / n as f64;
    let mut rank = vec![uniform; n];
    let dangling: Vec<NodeId> = (0..n).filter(|&i| g.strength(i) == 0).collect();
    let mut residual = f64::INFINITY;
    for iteration in 1..=params.max_iterations {
        let dangling_mass: f64 = dangling.iter().map(|&i| rank[i]).sum();
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let incoming: f64 = g
                    .neighbors(i)
                    .iter()
                    .map(|&(j, w)| rank[j] * w as f64 / g.strength(j) as f64)
                    .sum();
                (1.0 - d) * uniform + d * (incoming + dangling_mass * uniform)
            })
            .collect();
        residual = rank
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .sum();
        rank = next;
        if residual < params.tolerance {
            return Ok((rank, iteration));
        }
    }
    Err(Error::NoConvergence {
        iterations: params.max_iterations,
        residual,
    })
}

fn harmonic(g: &CooccurrenceGraph) -> Vec<f64> {
    let n = g.node_count();
    (0..n)
        .into_par_iter()
        .map(|source| {
            let mut dist = vec![usize::MAX; n];
            dist[source] = 0;
            let mut queue = VecDeque::from([source]);
            let mut score = 0.0;
            while let Some(v) = queue.pop_front() {
                for &(u, _) in g.neighbors(v) {
                    if dist[u] == usize::MAX {
                        dist[u] = dist[v] + 1;
                        score += 1.0 / dist[u] as f64;
                        queue.push_back(u);
                    }
                }
            }
            score
        })
        .collect()
}

/// The ceil(fraction * N) highest-scoring conditions; ties at the cut are
/// resolved lexicographically.
pub fn top_central(
    g: &CooccurrenceGraph,
    scores: &CentralityScores,
    fraction: f64,
) -> Result<BTreeSet<String>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    let n = g.node_count();
    let count = ((fraction * n as f64).ceil() as usize).min(n);
    let mut order: Vec<NodeId> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores.values[b]
            .total_cmp(&scores.values[a])
            .then_with(|| g.condition(a).cmp(g.condition(b)))
    });
    Ok(order
        .into_iter()
        .take(count)
        .map(|i| g.condition(i).to_string())
        .collect())
}

/// Writes `condition TAB kind TAB value` rows under a metadata header.
pub fn write_centrality(path: &Path, g: &CooccurrenceGraph, scores: &CentralityScores) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "# kind={} damping={} tolerance={} iterations={}\n",
        scores.kind.as_str(),
        scores.damping,
        scores.tolerance,
        scores.iterations
    ));
    out.push_str("condition\tkind\tvalue\n");
    for (i, value) in scores.values.iter().enumerate() {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            g.condition(i),
            scores.kind.as_str(),
            value
        ));
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a centrality file back as a condition -> value map.
pub fn read_centrality(path: &Path) -> Result<BTreeMap<String, f64>> {
    let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut map = BTreeMap::new();
    for (i, line) in raw.lines().enumerate() {
        if line.starts_with('#') || line.starts_with("condition\t") || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected three columns".into(),
            });
        }
        let value: f64 = cols[2].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("bad value {:?}", cols[2]),
        })?;
        map.insert(cols[0].to_string(), value);
    }
    Ok(map)
}
