//! Two-level hierarchical clustering of the co-occurrence graph by
//! map-equation minimization, plus overlap memberships and the taxonomy
//! skeleton exported for manual naming.

mod mapeq;
mod optimize;

pub use mapeq::{map_equation_codelength, module_codelength_terms, visit_rates};

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{CooccurrenceGraph, NodeId};
use crate::stats::derive_seed;
use optimize::LocalGraph;

/// Two-level partition: `level1[node]` is the module, `level2[node]` the
/// (module, submodule) pair with submodule ids local to their module.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalPartition {
    pub level1: Vec<usize>,
    pub level2: Vec<(usize, usize)>,
    /// Codelength of the level-1 partition, in bits.
    pub codelength_level1: f64,
    /// Sum of the within-module codelengths achieved by the per-module
    /// level-2 runs, in bits.
    pub codelength_level2: f64,
}

impl HierarchicalPartition {
    pub fn n_modules(&self) -> usize {
        self.level1.iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn members_of(&self, module: usize) -> Vec<NodeId> {
        (0..self.level1.len())
            .filter(|&v| self.level1[v] == module)
            .collect()
    }
}

/// Level-1 modules a node belongs to, with membership strengths.
#[derive(Debug, Clone)]
pub struct OverlapMembership {
    pub node: NodeId,
    pub primary: usize,
    /// (module, strength) sorted by descending strength, then module id.
    /// Strengths are fractions of the node's strength, in (0, 1] except
    /// for the primary of a singleton module, which reports 0.
    pub memberships: Vec<(usize, f64)>,
}

impl OverlapMembership {
    pub fn is_multi(&self) -> bool {
        self.memberships.len() > 1
    }
}

/// Runs `trials` seeded optimizations and keeps the lowest-codelength
/// level-1 partition (ties resolved by lowest trial index), then runs the
/// same procedure independently on each module's induced subgraph for
/// level 2. Bit-for-bit reproducible given (graph, seed, trials).
pub fn detect_communities(
    g: &CooccurrenceGraph,
    seed: u64,
    trials: usize,
) -> Result<HierarchicalPartition> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    let n = g.node_count();
    if n == 0 {
        return Err(Error::InvalidInput("cannot cluster an empty graph".into()));
    }
    if n == 1 {
        return Ok(HierarchicalPartition {
            level1: vec![0],
            level2: vec![(0, 0)],
            codelength_level1: 0.0,
            codelength_level2: 0.0,
        });
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }

    let edges: Vec<(usize, usize, f64)> = g
        .edges()
        .iter()
        .map(|e| (e.u, e.v, e.weight as f64))
        .collect();
    let local = LocalGraph::from_weighted_edges(n, &edges);
    let level1 = best_of_trials(&local, seed, 1, 0, trials);
    let level1 = canonicalize(&level1, |v| v);
    let codelength_level1 = map_equation_codelength(g, &level1);
    let n_modules = level1.iter().copied().max().unwrap() + 1;

    // level-2: independent runs on each module's induced subgraph
    let module_members: Vec<Vec<NodeId>> = (0..n_modules)
        .map(|m| (0..n).filter(|&v| level1[v] == m).collect())
        .collect();
    let sub_results: Vec<(Vec<usize>, f64)> = module_members
        .par_iter()
        .enumerate()
        .map(|(m, members)| {
            let local_id: BTreeMap<NodeId, usize> = members
                .iter()
                .enumerate()
                .map(|(i, &v)| (v, i))
                .collect();
            let sub_edges: Vec<(usize, usize, f64)> = g
                .edges()
                .iter()
                .filter(|e| level1[e.u] == m && level1[e.v] == m)
                .map(|e| (local_id[&e.u], local_id[&e.v], e.weight as f64))
                .collect();
            let sub = LocalGraph::from_weighted_edges(members.len(), &sub_edges);
            let part = best_of_trials(&sub, seed, 2, m as u64, trials);
            let part = canonicalize(&part, |i| members[i]);
            let len = sub.codelength(&part);
            (part, len)
        })
        .collect();

    let mut level2 = vec![(0usize, 0usize); n];
    let mut codelength_level2 = 0.0;
    for (m, (sub_part, sub_len)) in sub_results.iter().enumerate() {
        codelength_level2 += sub_len;
        for (i, &v) in module_members[m].iter().enumerate() {
            level2[v] = (m, sub_part[i]);
        }
    }

    Ok(HierarchicalPartition {
        level1,
        level2,
        codelength_level1,
        codelength_level2,
    })
}

fn best_of_trials(local: &LocalGraph, seed: u64, tag: u64, unit: u64, trials: usize) -> Vec<usize> {
    let runs: Vec<(Vec<usize>, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let run_seed = derive_seed(seed, tag, unit * trials as u64 + t as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
            optimize::optimize(local, &mut rng)
        })
        .collect();
    let mut best = 0;
    for t in 1..runs.len() {
        if runs[t].1 < runs[best].1 {
            best = t;
        }
    }
    runs[best].0.clone()
}

// Renumber modules by descending size, ties by smallest mapped node id.
fn canonicalize<F: Fn(usize) -> usize>(partition: &[usize], to_node: F) -> Vec<usize> {
    let n_modules = partition.iter().copied().max().map_or(0, |m| m + 1);
    let mut size = vec![0usize; n_modules];
    let mut min_node = vec![usize::MAX; n_modules];
    for (i, &m) in partition.iter().enumerate() {
        size[m] += 1;
        min_node[m] = min_node[m].min(to_node(i));
    }
    let mut order: Vec<usize> = (0..n_modules).collect();
    order.sort_by(|&a, &b| size[b].cmp(&size[a]).then(min_node[a].cmp(&min_node[b])));
    let mut rank = vec![0usize; n_modules];
    for (r, &m) in order.iter().enumerate() {
        rank[m] = r;
    }
    partition.iter().map(|&m| rank[m]).collect()
}

/// Post-hoc overlap rule: a node gains membership in every module that
/// receives at least `threshold` of its strength; its primary module is
/// always included, as is any module receiving strictly more strength
/// than the primary.
pub fn assign_overlaps(
    g: &CooccurrenceGraph,
    level1: &[usize],
    threshold: f64,
) -> Vec<OverlapMembership> {
    assert_eq!(level1.len(), g.node_count());
    let n_modules = level1.iter().copied().max().map_or(0, |m| m + 1);
    (0..g.node_count())
        .map(|v| {
            let primary = level1[v];
            let strength = g.strength(v) as f64;
            let mut flow = vec![0.0f64; n_modules];
            for &(u, w) in g.neighbors(v) {
                flow[level1[u]] += w as f64;
            }
            let frac = |m: usize| if strength > 0.0 { flow[m] / strength } else { 0.0 };
            let primary_frac = frac(primary);
            let mut memberships: Vec<(usize, f64)> = (0..n_modules)
                .filter_map(|m| {
                    let f = frac(m);
                    if m == primary || f >= threshold || f > primary_frac {
                        Some((m, f))
                    } else {
                        None
                    }
                })
                .collect();
            memberships
                .sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            OverlapMembership {
                node: v,
                primary,
                memberships,
            }
        })
        .collect()
}

/// One cluster of the exported taxonomy.
#[derive(Debug, Clone)]
pub struct TaxonomyCluster {
    pub cluster_id: String,
    pub level: u8,
    pub parent: Option<String>,
    pub size: usize,
    /// Member conditions, sorted (mention count desc, condition asc).
    pub members: Vec<String>,
    /// The k most frequent members, same tie rule.
    pub top_terms: Vec<String>,
    pub label: Option<String>,
}

/// A condition that belongs to multiple level-1 clusters.
#[derive(Debug, Clone)]
pub struct MultiMembership {
    pub condition: String,
    pub mention_count: u64,
    pub modules: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Taxonomy {
    pub level1: Vec<TaxonomyCluster>,
    pub level2: Vec<TaxonomyCluster>,
    pub multi_membership: Vec<MultiMembership>,
}

pub fn cluster_id(module: usize) -> String {
    format!("c{module:03}")
}

pub fn subcluster_id(module: usize, submodule: usize) -> String {
    format!("c{module:03}.s{submodule:03}")
}

/// Builds the taxonomy skeleton: clusters in descending member count with
/// their top-k terms, and the multi-membership section.
pub fn build_taxonomy(
    partition: &HierarchicalPartition,
    overlaps: &[OverlapMembership],
    g: &CooccurrenceGraph,
    k: usize,
) -> Taxonomy {
    let by_frequency = |members: &mut Vec<NodeId>| {
        members.sort_by(|&a, &b| {
            g.mention_count(b)
                .cmp(&g.mention_count(a))
                .then(g.condition(a).cmp(g.condition(b)))
        });
    };
    let n_modules = partition.n_modules();
    let mut level1 = Vec::with_capacity(n_modules);
    let mut level2 = Vec::new();
    for m in 0..n_modules {
        let mut members = partition.members_of(m);
        let n_sub = members
            .iter()
            .map(|&v| partition.level2[v].1 + 1)
            .max()
            .unwrap_or(0);
        by_frequency(&mut members);
        let names: Vec<String> = members.iter().map(|&v| g.condition(v).to_string()).collect();
        level1.push(TaxonomyCluster {
            cluster_id: cluster_id(m),
            level: 1,
            parent: None,
            size: names.len(),
            top_terms: names.iter().take(k).cloned().collect(),
            members: names,
            label: None,
        });
        for s in 0..n_sub {
            let mut sub_members: Vec<NodeId> = (0..partition.level2.len())
                .filter(|&v| partition.level2[v] == (m, s))
                .collect();
            by_frequency(&mut sub_members);
            let names: Vec<String> = sub_members
                .iter()
                .map(|&v| g.condition(v).to_string())
                .collect();
            level2.push(TaxonomyCluster {
                cluster_id: subcluster_id(m, s),
                level: 2,
                parent: Some(cluster_id(m)),
                size: names.len(),
                top_terms: names.iter().take(k).cloned().collect(),
                members: names,
                label: None,
            });
        }
    }

    let mut multi: Vec<MultiMembership> = overlaps
        .iter()
        .filter(|o| o.is_multi())
        .map(|o| {
            let mut modules: Vec<usize> = o.memberships.iter().map(|&(m, _)| m).collect();
            modules.sort_unstable();
            MultiMembership {
                condition: g.condition(o.node).to_string(),
                mention_count: g.mention_count(o.node),
                modules,
            }
        })
        .collect();
    multi.sort_by(|a, b| {
        b.mention_count
            .cmp(&a.mention_count)
            .then(a.condition.cmp(&b.condition))
    });

    Taxonomy {
        level1,
        level2,
        multi_membership: multi,
    }
}

/// Writes `node_id TAB level1_module TAB level2_module` lines.
pub fn write_partition(path: &Path, partition: &HierarchicalPartition) -> Result<()> {
    let mut out = String::new();
    for v in 0..partition.level1.len() {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            v, partition.level1[v], partition.level2[v].1
        ));
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a partition file back as `(level1, level2-submodule)` per node.
pub fn read_partition(path: &Path) -> Result<Vec<(usize, usize)>> {
    let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let mut cols = line.split('\t');
        let mut field = || {
            cols.next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: "expected three integer columns".into(),
                })
        };
        let node = field()?;
        if node != i {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("node ids must be dense and ordered; got {node}"),
            });
        }
        rows.push((field()?, field()?));
    }
    Ok(rows)
}

/// Writes the hierarchical taxonomy file. `contributions` maps cluster ids
/// to their codelength share in bits; missing ids print as 0.
pub fn write_taxonomy(
    path: &Path,
    taxonomy: &Taxonomy,
    contributions: &BTreeMap<String, f64>,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "# taxonomy\tlevel1={}\tlevel2={}\n",
        taxonomy.level1.len(),
        taxonomy.level2.len()
    ));
    let contribution = |id: &str| contributions.get(id).copied().unwrap_or(0.0);
    for cluster in &taxonomy.level1 {
        out.push_str(&format!(
            "cluster\t{}\tsize={}\tcodelength={}\n",
            cluster.cluster_id,
            cluster.size,
            contribution(&cluster.cluster_id)
        ));
        out.push_str(&format!("  top\t{}\n", cluster.top_terms.join(", ")));
        for sub in taxonomy
            .level2
            .iter()
            .filter(|s| s.parent.as_deref() == Some(cluster.cluster_id.as_str()))
        {
            out.push_str(&format!(
                "  sub\t{}\tsize={}\tcodelength={}\n",
                sub.cluster_id,
                sub.size,
                contribution(&sub.cluster_id)
            ));
            out.push_str(&format!("    top\t{}\n", sub.top_terms.join(", ")));
        }
    }
    out.push_str("# conditions in multiple clusters\n");
    for m in &taxonomy.multi_membership {
        let modules: Vec<String> = m.modules.iter().map(|id| cluster_id(*id)).collect();
        out.push_str(&format!(
            "multi\t{}\tmentions={}\t{}\n",
            m.condition,
            m.mention_count,
            modules.join(",")
        ));
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
