//! Undirected weighted condition co-occurrence graph.
//!
//! Node ids are dense `0..N-1`, edges are canonical (`u < v`), and weights
//! are 64-bit co-mention counts, promoted to floating point only by the
//! consumers that need it.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::MentionRecord;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightedEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub weight: u64,
}

#[derive(Debug, Clone)]
pub struct CooccurrenceGraph {
    conditions: Vec<String>,
    mention_counts: Vec<u64>,
    edges: Vec<WeightedEdge>,
    adj_offsets: Vec<usize>,
    adj: Vec<(NodeId, u64)>,
    strengths: Vec<u64>,
    total_weight: u64,
}

impl CooccurrenceGraph {
    /// Builds a graph from a node table and an edge list. Edges are
    /// canonicalized to `u < v` and sorted; self-loops, duplicates, and
    /// zero weights are rejected.
    pub fn new(
        conditions: Vec<String>,
        mention_counts: Vec<u64>,
        edges: Vec<WeightedEdge>,
    ) -> Result<Self> {
        let n = conditions.len();
        if mention_counts.len() != n {
            return Err(Error::InvalidInput(
                "node table and mention counts differ in length".into(),
            ));
        }
        for c in &conditions {
            if c.contains('\t') || c.contains('\n') {
                return Err(Error::InvalidInput(format!(
                    "condition {c:?} contains tab or newline"
                )));
            }
        }
        let mut edges: Vec<WeightedEdge> = edges
            .into_iter()
            .map(|e| {
                if e.u >= n || e.v >= n {
                    return Err(Error::InvalidInput(format!(
                        "edge ({}, {}) references a node outside 0..{n}",
                        e.u, e.v
                    )));
                }
                if e.u == e.v {
                    return Err(Error::InvalidInput(format!("self-loop on node {}", e.u)));
                }
                if e.weight == 0 {
                    return Err(Error::InvalidInput(format!(
                        "edge ({}, {}) has zero weight",
                        e.u, e.v
                    )));
                }
                Ok(WeightedEdge {
                    u: e.u.min(e.v),
                    v: e.u.max(e.v),
                    weight: e.weight,
                })
            })
            .collect::<Result<_>>()?;
        edges.sort_by_key(|e| (e.u, e.v));
        if edges.windows(2).any(|w| (w[0].u, w[0].v) == (w[1].u, w[1].v)) {
            return Err(Error::InvalidInput("duplicate edge".into()));
        }

        let mut strengths = vec![0u64; n];
        let mut degrees = vec![0usize; n];
        let mut total_weight = 0u64;
        for e in &edges {
            strengths[e.u] += e.weight;
            strengths[e.v] += e.weight;
            degrees[e.u] += 1;
            degrees[e.v] += 1;
            total_weight += e.weight;
        }
        let mut adj_offsets = vec![0usize; n + 1];
        for i in 0..n {
            adj_offsets[i + 1] = adj_offsets[i] + degrees[i];
        }
        let mut adj = vec![(0usize, 0u64); adj_offsets[n]];
        let mut cursor = adj_offsets.clone();
        for e in &edges {
            adj[cursor[e.u]] = (e.v, e.weight);
            cursor[e.u] += 1;
            adj[cursor[e.v]] = (e.u, e.weight);
            cursor[e.v] += 1;
        }

        Ok(Self {
            conditions,
            mention_counts,
            edges,
            adj_offsets,
            adj,
            strengths,
            total_weight,
        })
    }

    pub fn node_count(&self) -> usize {
        self.conditions.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn condition(&self, id: NodeId) -> &str {
        &self.conditions[id]
    }

    pub fn conditions(&self) -> &[String] {
        &self.conditions
    }

    pub fn mention_count(&self, id: NodeId) -> u64 {
        self.mention_counts[id]
    }

    pub fn edges(&self) -> &[WeightedEdge] {
        &self.edges
    }

    /// Neighbors of `id` with edge weights, in ascending neighbor order.
    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, u64)] {
        &self.adj[self.adj_offsets[id]..self.adj_offsets[id + 1]]
    }

    /// Node strength: sum of incident edge weights.
    pub fn strength(&self, id: NodeId) -> u64 {
        self.strengths[id]
    }

    /// Total edge weight T (each edge counted once).
    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    pub fn find_node(&self, condition: &str) -> Option<NodeId> {
        self.conditions.iter().position(|c| c == condition)
    }

    pub fn is_connected(&self) -> bool {
        if self.node_count() == 0 {
            return true;
        }
        let (component, _) = self.component_labels();
        component.iter().all(|&c| c == 0)
    }

    // Connected-component label per node, discovered in node-id order.
    fn component_labels(&self) -> (Vec<usize>, usize) {
        let n = self.node_count();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(node) = stack.pop() {
                for &(next, _) in self.neighbors(node) {
                    if label[next] == usize::MAX {
                        label[next] = count;
                        stack.push(next);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Subgraph induced by the largest connected component (ties broken by
    /// the component holding the smallest node id), with node ids
    /// re-densified. Returns the mapping `new id -> old id`.
    pub fn giant_component(&self) -> Result<(CooccurrenceGraph, Vec<NodeId>)> {
        let n = self.node_count();
        if n == 0 {
            return Ok((
                CooccurrenceGraph::new(Vec::new(), Vec::new(), Vec::new())?,
                Vec::new(),
            ));
        }
        let (label, count) = self.component_labels();
        let mut sizes = vec![0usize; count];
        for &l in &label {
            sizes[l] += 1;
        }
        // first maximum wins: earlier components hold smaller node ids
        let best = sizes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap();

        let keep: Vec<NodeId> = (0..n).filter(|&i| label[i] == best).collect();
        let mut new_id = vec![usize::MAX; n];
        for (new, &old) in keep.iter().enumerate() {
            new_id[old] = new;
        }
        let conditions = keep.iter().map(|&i| self.conditions[i].clone()).collect();
        let mention_counts = keep.iter().map(|&i| self.mention_counts[i]).collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| label[e.u] == best)
            .map(|e| WeightedEdge {
                u: new_id[e.u],
                v: new_id[e.v],
                weight: e.weight,
            })
            .collect();
        Ok((
            CooccurrenceGraph::new(conditions, mention_counts, edges)?,
            keep,
        ))
    }

    /// Serializes as `N M` header, node table lines, then edge lines.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("{} {}\n", self.node_count(), self.edge_count()));
        for (id, condition) in self.conditions.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                id, condition, self.mention_counts[id]
            ));
        }
        for e in &self.edges {
            out.push_str(&format!("{}\t{}\t{}\n", e.u, e.v, e.weight));
        }
        std::fs::write(path, out).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = raw.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?;
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(1, "bad node count".into()))?;
        let m: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(1, "bad edge count".into()))?;

        let mut conditions = Vec::with_capacity(n);
        let mut mention_counts = Vec::with_capacity(n);
        for expect in 0..n {
            let (line_no, line) = lines
                .next()
                .ok_or_else(|| parse_err(expect + 2, "missing node line".into()))?;
            let mut cols = line.split('\t');
            let id: usize = cols
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(line_no + 1, "bad node id".into()))?;
            if id != expect {
                return Err(parse_err(
                    line_no + 1,
                    format!("node ids must be dense and ordered; expected {expect}, got {id}"),
                ));
            }
            let condition = cols
                .next()
                .ok_or_else(|| parse_err(line_no + 1, "missing condition".into()))?;
            let count: u64 = cols
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(line_no + 1, "bad mention count".into()))?;
            conditions.push(condition.to_string());
            mention_counts.push(count);
        }

        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let (line_no, line) = lines
                .next()
                .ok_or_else(|| parse_err(0, "missing edge line".into()))?;
            let mut cols = line.split('\t');
            let mut field = |name: &str| {
                cols.next()
                    .and_then(|s| s.parse::<u64>().ok())
                    .ok_or_else(|| parse_err(line_no + 1, format!("bad edge {name}")))
            };
            let u = field("source")? as usize;
            let v = field("target")? as usize;
            let weight = field("weight")?;
            edges.push(WeightedEdge { u, v, weight });
        }
        CooccurrenceGraph::new(conditions, mention_counts, edges)
    }
}

/// Counts co-mentions: for each record with k distinct conditions, every
/// unordered pair gains weight 1. Records with more than
/// `max_conditions_per_record` distinct conditions are truncated to the
/// globally most frequent ones before pairing.
pub fn build_cooccurrence(
    records: &[MentionRecord],
    max_conditions_per_record: usize,
) -> Result<CooccurrenceGraph> {
    let mut counts: std::collections::BTreeMap<&str, u64> = std::collections::BTreeMap::new();
    for rec in records {
        for cond in &rec.conditions {
            *counts.entry(cond.as_str()).or_insert(0) += 1;
        }
    }
    let conditions: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
    let mention_counts: Vec<u64> = counts.values().copied().collect();
    let index: HashMap<&str, NodeId> = conditions
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let mut pair_counts: HashMap<(NodeId, NodeId), u64> = HashMap::new();
    let mut ids = Vec::new();
    for rec in records {
        ids.clear();
        ids.extend(rec.conditions.iter().map(|c| index[c.as_str()]));
        if ids.len() > max_conditions_per_record {
            // keep the most globally frequent; ties go to the
            // lexicographically smaller condition (= smaller id)
            ids.sort_by_key(|&id| (std::cmp::Reverse(mention_counts[id]), id));
            ids.truncate(max_conditions_per_record);
        }
        ids.sort_unstable();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                *pair_counts.entry((ids[i], ids[j])).or_insert(0) += 1;
            }
        }
    }
    let edges = pair_counts
        .into_iter()
        .map(|((u, v), weight)| WeightedEdge { u, v, weight })
        .collect();
    CooccurrenceGraph::new(conditions, mention_counts, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    pub(crate) fn record(doc: &str, conditions: &[&str]) -> MentionRecord {
        MentionRecord {
            doc_id: doc.into(),
            user_id: format!("user-{doc}"),
            location: None,
            conditions: conditions.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn triple_record_forms_a_triangle() {
        let g = build_cooccurrence(&[record("d1", &["a", "b", "c"])], 50).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert!(g.edges().iter().all(|e| e.weight == 1));
    }

    #[test]
    fn repeated_pairs_accumulate() {
        let g = build_cooccurrence(
            &[record("d1", &["a", "b"]), record("d2", &["a", "b"])],
            50,
        )
        .unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edges()[0].weight, 2);
        assert_eq!(g.mention_count(0), 2);
    }

    #[test]
    fn singleton_records_leave_isolated_nodes() {
        let g = build_cooccurrence(&[record("d1", &["a"]), record("d2", &["b"])], 50).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn oversized_records_are_truncated_to_frequent_conditions() {
        let mut records = vec![record("big", &["a", "b", "c", "d"])];
        // make c and d globally frequent
        for i in 0..5 {
            records.push(record(&format!("x{i}"), &["c"]));
            records.push(record(&format!("y{i}"), &["d"]));
        }
        let g = build_cooccurrence(&records, 2).unwrap();
        let c = g.find_node("c").unwrap();
        let d = g.find_node("d").unwrap();
        assert_eq!(g.edge_count(), 1);
        let e = g.edges()[0];
        assert_eq!((e.u, e.v), (c.min(d), c.max(d)));
        // truncation does not erase the node or its mention tally
        assert_eq!(g.mention_count(g.find_node("a").unwrap()), 1);
    }

    #[test]
    fn same_record_repeated_gives_uniform_weights() {
        let records: Vec<MentionRecord> = (0..7)
            .map(|i| record(&format!("d{i}"), &["a", "b", "c", "d"]))
            .collect();
        let g = build_cooccurrence(&records, 50).unwrap();
        assert_eq!(g.edge_count(), 4 * 3 / 2);
        assert!(g.edges().iter().all(|e| e.weight == 7));
    }

    proptest! {
        #[test]
        fn build_is_permutation_invariant(seed in 0u64..500) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut records: Vec<MentionRecord> = (0..20)
                .map(|i| {
                    let conds: Vec<&str> = match i % 4 {
                        0 => vec!["a", "b"],
                        1 => vec!["b", "c", "d"],
                        2 => vec!["a"],
                        _ => vec!["d", "e"],
                    };
                    record(&format!("d{i}"), &conds)
                })
                .collect();
            let g1 = build_cooccurrence(&records, 50).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            records.shuffle(&mut rng);
            let g2 = build_cooccurrence(&records, 50).unwrap();
            prop_assert_eq!(g1.conditions(), g2.conditions());
            prop_assert_eq!(g1.edges(), g2.edges());
        }

        #[test]
        fn strengths_sum_to_twice_total_weight(
            edge_bits in proptest::collection::vec(0u8..2, 10),
            weights in proptest::collection::vec(1u64..9, 10),
        ) {
            let mut edges = Vec::new();
            let mut seen = BTreeSet::new();
            let mut k = 0;
            for i in 0..5usize {
                for j in (i + 1)..5 {
                    if edge_bits[k % edge_bits.len()] == 1 && seen.insert((i, j)) {
                        edges.push(WeightedEdge { u: i, v: j, weight: weights[k % weights.len()] });
                    }
                    k += 1;
                }
            }
            let g = CooccurrenceGraph::new(
                (0..5).map(|i| format!("c{i}")).collect(),
                vec![1; 5],
                edges,
            )
            .unwrap();
            let strength_sum: u64 = (0..5).map(|i| g.strength(i)).sum();
            prop_assert_eq!(strength_sum, 2 * g.total_weight());
        }
    }

    #[test]
    fn giant_component_picks_largest() {
        // component {0,1,2,3,4} and component {5,6,7}
        let edges = vec![
            WeightedEdge { u: 0, v: 1, weight: 1 },
            WeightedEdge { u: 1, v: 2, weight: 1 },
            WeightedEdge { u: 2, v: 3, weight: 1 },
            WeightedEdge { u: 3, v: 4, weight: 1 },
            WeightedEdge { u: 5, v: 6, weight: 1 },
            WeightedEdge { u: 6, v: 7, weight: 1 },
        ];
        let g = CooccurrenceGraph::new(
            (0..8).map(|i| format!("c{i}")).collect(),
            vec![1; 8],
            edges,
        )
        .unwrap();
        let (giant, id_map) = g.giant_component().unwrap();
        assert_eq!(giant.node_count(), 5);
        assert_eq!(id_map, vec![0, 1, 2, 3, 4]);
        assert!(giant.is_connected());
    }

    #[test]
    fn giant_component_of_connected_graph_is_identity() {
        let g = build_cooccurrence(&[record("d", &["a", "b", "c"])], 50).unwrap();
        let (giant, id_map) = g.giant_component().unwrap();
        assert_eq!(giant.node_count(), g.node_count());
        assert_eq!(giant.edges(), g.edges());
        assert_eq!(id_map, vec![0, 1, 2]);
    }

    #[test]
    fn giant_component_tie_prefers_smallest_node_id() {
        let edges = vec![
            WeightedEdge { u: 0, v: 1, weight: 1 },
            WeightedEdge { u: 2, v: 3, weight: 1 },
        ];
        let g = CooccurrenceGraph::new(
            (0..4).map(|i| format!("c{i}")).collect(),
            vec![1; 4],
            edges,
        )
        .unwrap();
        let (_, id_map) = g.giant_component().unwrap();
        assert_eq!(id_map, vec![0, 1]);
    }

    #[test]
    fn empty_graph_round_trips() {
        let g = CooccurrenceGraph::new(Vec::new(), Vec::new(), Vec::new()).unwrap();
        let (giant, id_map) = g.giant_component().unwrap();
        assert_eq!(giant.node_count(), 0);
        assert!(id_map.is_empty());
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let records = vec![
            record("d1", &["anxiety", "panic attack"]),
            record("d2", &["anxiety", "pain"]),
            record("d3", &["pain"]),
        ];
        let g = build_cooccurrence(&records, 50).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.graph");
        let p2 = dir.path().join("b.graph");
        g.write_to(&p1).unwrap();
        let g2 = CooccurrenceGraph::read_from(&p1).unwrap();
        g2.write_to(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn constructor_rejects_bad_edges() {
        let conds: Vec<String> = (0..3).map(|i| format!("c{i}")).collect();
        let mk = |edges| CooccurrenceGraph::new(conds.clone(), vec![1; 3], edges);
        assert!(mk(vec![WeightedEdge { u: 0, v: 0, weight: 1 }]).is_err());
        assert!(mk(vec![WeightedEdge { u: 0, v: 1, weight: 0 }]).is_err());
        assert!(mk(vec![
            WeightedEdge { u: 0, v: 1, weight: 1 },
            WeightedEdge { u: 1, v: 0, weight: 2 },
        ])
        .is_err());
        assert!(mk(vec![WeightedEdge { u: 0, v: 9, weight: 1 }]).is_err());
    }
}
