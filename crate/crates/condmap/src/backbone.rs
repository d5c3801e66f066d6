//! Noise-corrected backboning: keeps only edges whose weight significantly
//! exceeds a strength-preserving null-model expectation.
//!
//! For an edge (u, v) the null expectation is `E = s_u * s_v / (2T)` and the
//! variance follows the binomial-draw approximation `Var = E * (1 - E / T)`,
//! where T is the total edge weight. An edge survives at significance level
//! delta iff `w > E + delta * sqrt(Var)` (strict, so ties at the threshold
//! are dropped and the surviving set is exactly monotone in delta).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{CooccurrenceGraph, NodeId, WeightedEdge};

#[derive(Debug, Clone, Copy)]
pub struct BackboneParams {
    /// Significance threshold in null-model standard deviations.
    pub delta: f64,
    /// Keep nodes left isolated by the pruning instead of dropping them.
    pub keep_isolates: bool,
}

impl Default for BackboneParams {
    fn default() -> Self {
        Self {
            delta: 2.0,
            keep_isolates: false,
        }
    }
}

/// Per-edge audit record: observed weight, null expectation, null variance,
/// and the significance score `(w - E) / sqrt(Var)`.
#[derive(Debug, Clone, Copy)]
pub struct EdgeScore {
    pub u: NodeId,
    pub v: NodeId,
    pub weight: u64,
    pub expected: f64,
    pub variance: f64,
    pub score: f64,
}

#[derive(Debug)]
pub struct BackboneOutcome {
    pub graph: CooccurrenceGraph,
    /// Mapping `new id -> old id` after isolate removal (identity when
    /// isolates are kept).
    pub id_map: Vec<NodeId>,
    pub pruned_edges: usize,
    pub dropped_isolates: usize,
    pub warning: Option<String>,
}

/// Null-model scores for every edge, in canonical edge order.
pub fn edge_scores(g: &CooccurrenceGraph) -> Vec<EdgeScore> {
    let t = g.total_weight() as f64;
    g.edges()
        .par_iter()
        .map(|e| {
            let expected = g.strength(e.u) as f64 * g.strength(e.v) as f64 / (2.0 * t);
            let variance = expected * (1.0 - expected / t);
            let score = (e.weight as f64 - expected) / variance.sqrt();
            EdgeScore {
                u: e.u,
                v: e.v,
                weight: e.weight,
                expected,
                variance,
                score,
            }
        })
        .collect()
}

/// Prunes non-salient edges at significance `delta` and (by default) drops
/// nodes left isolated.
pub fn noise_corrected_backbone(
    g: &CooccurrenceGraph,
    params: BackboneParams,
) -> Result<BackboneOutcome> {
    if g.edge_count() == 0 {
        return Err(Error::InvalidInput(
            "backboning needs a graph with at least one edge".into(),
        ));
    }
    if params.delta < 0.0 {
        return Err(Error::InvalidInput(format!(
            "delta must be non-negative, got {}",
            params.delta
        )));
    }
    let scores = edge_scores(g);
    let survivors: Vec<WeightedEdge> = scores
        .iter()
        .filter(|s| s.score > params.delta)
        .map(|s| WeightedEdge {
            u: s.u,
            v: s.v,
            weight: s.weight,
        })
        .collect();
    let pruned_edges = g.edge_count() - survivors.len();
    let warning = if survivors.is_empty() {
        Some(format!(
            "no edges survive at delta = {}; result has no edges",
            params.delta
        ))
    } else {
        None
    };

    let n = g.node_count();
    let keep: Vec<NodeId> = if params.keep_isolates {
        (0..n).collect()
    } else {
        let mut touched = vec![false; n];
        for e in &survivors {
            touched[e.u] = true;
            touched[e.v] = true;
        }
        (0..n).filter(|&i| touched[i]).collect()
    };
    let dropped_isolates = n - keep.len();
    let mut new_id = vec![usize::MAX; n];
    for (new, &old) in keep.iter().enumerate() {
        new_id[old] = new;
    }
    let graph = CooccurrenceGraph::new(
        keep.iter().map(|&i| g.condition(i).to_string()).collect(),
        keep.iter().map(|&i| g.mention_count(i)).collect(),
        survivors
            .into_iter()
            .map(|e| WeightedEdge {
                u: new_id[e.u],
                v: new_id[e.v],
                weight: e.weight,
            })
            .collect(),
    )?;
    Ok(BackboneOutcome {
        graph,
        id_map: keep,
        pruned_edges,
        dropped_isolates,
        warning,
    })
}

#[derive(Debug, Clone)]
pub struct TunedDelta {
    pub delta: f64,
    pub achieved_edges: usize,
    pub iterations: usize,
    pub warning: Option<String>,
}

/// Bisects delta until the surviving edge count lands within 1% of
/// `target_edges` or 40 iterations elapse; on a plateau the closest
/// achievable count is returned with a warning.
pub fn tune_delta(g: &CooccurrenceGraph, target_edges: usize) -> Result<TunedDelta> {
    if target_edges == 0 || target_edges > g.edge_count() {
        return Err(Error::InvalidInput(format!(
            "target_edges must be in 1..={}, got {target_edges}",
            g.edge_count()
        )));
    }
    let scores = edge_scores(g);
    let count_at = |delta: f64| scores.iter().filter(|s| s.score > delta).count();
    let tolerance = (target_edges as f64 * 0.01).max(0.0);
    let within = |count: usize| (count as f64 - target_edges as f64).abs() <= tolerance;

    let mut lo = 0.0f64;
    let count_lo = count_at(lo);
    if count_lo <= target_edges {
        // delta = 0 already prunes to (or below) the target
        let warning = if within(count_lo) {
            None
        } else {
            Some(format!(
                "target {target_edges} is unreachable; delta = 0 keeps {count_lo} edges"
            ))
        };
        return Ok(TunedDelta {
            delta: 0.0,
            achieved_edges: count_lo,
            iterations: 0,
            warning,
        });
    }
    let mut hi = scores.iter().map(|s| s.score).fold(0.0f64, f64::max) + 1.0;
    let mut best = (lo, count_lo);
    let mut iterations = 0;
    for _ in 0..40 {
        iterations += 1;
        let mid = (lo + hi) / 2.0;
        let count = count_at(mid);
        if (count as f64 - target_edges as f64).abs()
            < (best.1 as f64 - target_edges as f64).abs()
        {
            best = (mid, count);
        }
        if within(count) {
            return Ok(TunedDelta {
                delta: mid,
                achieved_edges: count,
                iterations,
                warning: None,
            });
        }
        if count > target_edges {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TunedDelta {
        delta: best.0,
        achieved_edges: best.1,
        iterations,
        warning: Some(format!(
            "bisection plateaued: closest achievable count is {} for target {target_edges}",
            best.1
        )),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn graph_from_edges(n: usize, edges: Vec<WeightedEdge>) -> CooccurrenceGraph {
        CooccurrenceGraph::new(
            (0..n).map(|i| format!("c{i}")).collect(),
            vec![1; n],
            edges,
        )
        .unwrap()
    }

    fn complete_graph(n: usize, weight: u64) -> CooccurrenceGraph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push(WeightedEdge { u: i, v: j, weight });
            }
        }
        graph_from_edges(n, edges)
    }

    fn random_graph(seed: u64, n: usize, edge_prob: f64, max_weight: u64) -> CooccurrenceGraph {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < edge_prob {
                    edges.push(WeightedEdge {
                        u: i,
                        v: j,
                        weight: rng.random_range(1..=max_weight),
                    });
                }
            }
        }
        graph_from_edges(n, edges)
    }

    #[test]
    fn k4_unit_weights_prunes_everything_above_small_delta() {
        // Hand oracle for K4, unit weights: T = 6, every strength 3, so
        // E = 9/12 = 0.75, Var = 0.75 * (1 - 0.75/6) = 0.65625 and every
        // edge scores (1 - 0.75) / sqrt(0.65625) = 0.308606...
        let g = complete_graph(4, 1);
        for s in edge_scores(&g) {
            assert!((s.expected - 0.75).abs() < 1e-12);
            assert!((s.variance - 0.65625).abs() < 1e-12);
            assert!((s.score - 0.25 / 0.65625f64.sqrt()).abs() < 1e-12);
        }
        let kept = noise_corrected_backbone(
            &g,
            BackboneParams { delta: 0.309, keep_isolates: false },
        )
        .unwrap();
        assert_eq!(kept.graph.edge_count(), 0);
        assert!(kept.warning.is_some());

        let kept = noise_corrected_backbone(
            &g,
            BackboneParams { delta: 0.308, keep_isolates: false },
        )
        .unwrap();
        assert_eq!(kept.graph.edge_count(), 6);
    }

    #[test]
    fn planted_heavy_edge_survives_while_unit_noise_is_pruned() {
        // K20 of unit weights with edge (0,1) boosted to weight 50.
        let mut edges = Vec::new();
        for i in 0..20usize {
            for j in (i + 1)..20 {
                let weight = if (i, j) == (0, 1) { 50 } else { 1 };
                edges.push(WeightedEdge { u: i, v: j, weight });
            }
        }
        let g = graph_from_edges(20, edges);

        // independent oracle: recompute E and Var from raw strengths
        let t: f64 = g.edges().iter().map(|e| e.weight as f64).sum();
        let mut strength = vec![0.0f64; 20];
        for e in g.edges() {
            strength[e.u] += e.weight as f64;
            strength[e.v] += e.weight as f64;
        }
        for s in edge_scores(&g) {
            let expected = strength[s.u] * strength[s.v] / (2.0 * t);
            let variance = expected * (1.0 - expected / t);
            assert!((s.expected - expected).abs() < 1e-9);
            assert!((s.variance - variance).abs() < 1e-9);
        }

        let out = noise_corrected_backbone(
            &g,
            BackboneParams { delta: 2.0, keep_isolates: false },
        )
        .unwrap();
        let planted_kept = out
            .graph
            .edges()
            .iter()
            .any(|e| e.weight == 50);
        assert!(planted_kept);
        let unit_kept = out.graph.edges().iter().filter(|e| e.weight == 1).count();
        let unit_total = g.edges().iter().filter(|e| e.weight == 1).count();
        assert!(
            (unit_kept as f64) <= 0.1 * unit_total as f64,
            "{unit_kept}/{unit_total} unit edges survived"
        );
    }

    #[test]
    fn delta_zero_keeps_everything_above_expectation() {
        // star: leaf edges have E = 1*3/6 = 0.5 < 1
        let edges = (1..4)
            .map(|v| WeightedEdge { u: 0, v, weight: 1 })
            .collect();
        let g = graph_from_edges(4, edges);
        let out = noise_corrected_backbone(
            &g,
            BackboneParams { delta: 0.0, keep_isolates: false },
        )
        .unwrap();
        assert_eq!(out.graph.edge_count(), g.edge_count());
        assert_eq!(out.id_map, vec![0, 1, 2, 3]);
    }

    #[test]
    fn isolate_handling_is_configurable() {
        // heavy pair plus two weak spokes off node 0: the spokes land
        // below one null sd, leaving nodes 2 and 3 isolated at delta = 1
        let edges = vec![
            WeightedEdge { u: 0, v: 1, weight: 50 },
            WeightedEdge { u: 0, v: 2, weight: 1 },
            WeightedEdge { u: 0, v: 3, weight: 1 },
        ];
        let g = graph_from_edges(4, edges);
        let dropped = noise_corrected_backbone(
            &g,
            BackboneParams { delta: 1.0, keep_isolates: false },
        )
        .unwrap();
        let kept = noise_corrected_backbone(
            &g,
            BackboneParams { delta: 1.0, keep_isolates: true },
        )
        .unwrap();
        assert_eq!(dropped.graph.node_count(), 2);
        assert_eq!(dropped.id_map, vec![0, 1]);
        assert_eq!(dropped.dropped_isolates, 2);
        assert_eq!(kept.graph.node_count(), 4);
        assert_eq!(kept.id_map, vec![0, 1, 2, 3]);
    }

    proptest! {
        #[test]
        fn survivors_shrink_monotonically_in_delta(seed in 0u64..50) {
            let g = random_graph(seed, 12, 0.4, 6);
            prop_assume!(g.edge_count() > 0);
            let edge_set = |delta: f64| {
                noise_corrected_backbone(&g, BackboneParams { delta, keep_isolates: true })
                    .unwrap()
                    .graph
                    .edges()
                    .to_vec()
            };
            let e0 = edge_set(0.0);
            let e1 = edge_set(1.0);
            let e2 = edge_set(2.0);
            let contains = |big: &Vec<WeightedEdge>, small: &Vec<WeightedEdge>| {
                small.iter().all(|e| big.contains(e))
            };
            prop_assert!(contains(&e0, &e1));
            prop_assert!(contains(&e1, &e2));
            // never adds edges or raises weights
            prop_assert!(contains(&g.edges().to_vec(), &e0));
        }

        #[test]
        fn backbone_commutes_with_node_relabeling(seed in 0u64..20) {
            let g = random_graph(seed, 10, 0.5, 8);
            prop_assume!(g.edge_count() > 0);
            // reverse the node ids
            let n = g.node_count();
            let relabel = |i: usize| n - 1 - i;
            let permuted = CooccurrenceGraph::new(
                (0..n).map(|i| g.condition(relabel(i)).to_string()).collect(),
                (0..n).map(|i| g.mention_count(relabel(i))).collect(),
                g.edges()
                    .iter()
                    .map(|e| WeightedEdge { u: relabel(e.u), v: relabel(e.v), weight: e.weight })
                    .collect(),
            )
            .unwrap();
            let params = BackboneParams { delta: 1.5, keep_isolates: true };
            let a = noise_corrected_backbone(&g, params).unwrap();
            let b = noise_corrected_backbone(&permuted, params).unwrap();
            let mut a_set: Vec<(usize, usize, u64)> = a
                .graph
                .edges()
                .iter()
                .map(|e| {
                    let (x, y) = (relabel(e.u), relabel(e.v));
                    (x.min(y), x.max(y), e.weight)
                })
                .collect();
            a_set.sort_unstable();
            let mut b_set: Vec<(usize, usize, u64)> =
                b.graph.edges().iter().map(|e| (e.u, e.v, e.weight)).collect();
            b_set.sort_unstable();
            prop_assert_eq!(a_set, b_set);
        }
    }

    #[test]
    fn tune_delta_prunes_exactly_the_weakest_edge() {
        // heavy triangle plus one weak extra edge
        let edges = vec![
            WeightedEdge { u: 0, v: 1, weight: 30 },
            WeightedEdge { u: 1, v: 2, weight: 30 },
            WeightedEdge { u: 0, v: 2, weight: 30 },
            WeightedEdge { u: 2, v: 3, weight: 1 },
        ];
        let g = graph_from_edges(4, edges);
        let scores = edge_scores(&g);
        let weakest = scores
            .iter()
            .min_by(|a, b| a.score.total_cmp(&b.score))
            .unwrap();
        assert_eq!((weakest.u, weakest.v), (2, 3));

        let tuned = tune_delta(&g, g.edge_count() - 1).unwrap();
        assert_eq!(tuned.achieved_edges, g.edge_count() - 1);
        let out = noise_corrected_backbone(
            &g,
            BackboneParams { delta: tuned.delta, keep_isolates: true },
        )
        .unwrap();
        assert!(out
            .graph
            .edges()
            .iter()
            .all(|e| (e.u, e.v) != (2, 3)));

        // exhaustive sweep oracle: thresholding at the weakest score is
        // the unique way to drop exactly one edge
        let at_weakest = scores
            .iter()
            .filter(|o| o.score > weakest.score)
            .count();
        assert_eq!(at_weakest, g.edge_count() - 1);
        for s in &scores {
            let count = scores.iter().filter(|o| o.score > s.score).count();
            if count == g.edge_count() - 1 {
                assert_eq!((s.u, s.v), (weakest.u, weakest.v));
            }
        }
    }

    #[test]
    fn tune_delta_full_target_returns_zero_when_everything_is_salient() {
        let edges = (1..4)
            .map(|v| WeightedEdge { u: 0, v, weight: 1 })
            .collect();
        let g = graph_from_edges(4, edges);
        let tuned = tune_delta(&g, g.edge_count()).unwrap();
        assert_eq!(tuned.delta, 0.0);
        assert_eq!(tuned.achieved_edges, g.edge_count());
        assert!(tuned.warning.is_none());
    }

    #[test]
    fn tune_delta_halves_a_large_graph_within_tolerance() {
        let g = random_graph(7, 170, 0.7, 40);
        assert!(g.edge_count() > 9_000, "fixture too small: {}", g.edge_count());
        let target = g.edge_count() / 2;
        let tuned = tune_delta(&g, target).unwrap();
        assert!(
            (tuned.achieved_edges as f64 - target as f64).abs() <= target as f64 * 0.01,
            "achieved {} for target {target}",
            tuned.achieved_edges
        );
        // exhaustive-sweep oracle agrees with the surviving count
        let scores = edge_scores(&g);
        let oracle = scores.iter().filter(|s| s.score > tuned.delta).count();
        assert_eq!(oracle, tuned.achieved_edges);
    }
}
