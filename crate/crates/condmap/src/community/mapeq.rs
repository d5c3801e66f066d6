//! Map-equation codelength for flat partitions of undirected graphs.
//!
//! Visit rates are strength-proportional (no teleportation). For a
//! partition M the two-level codelength is
//!
//! `L(M) = q * H(Q) + sum_m p_m_circ * H(P_m)`
//!
//! computed here in the expanded form
//!
//! `L = plogp(q) - 2 * sum_m plogp(q_m) + sum_m plogp(q_m + p_m) - sum_i plogp(p_i)`
//!
//! with `q_m` the flow crossing module m's boundary, `p_m` the module's
//! visit mass, and `plogp(x) = x log2 x`.

use crate::error::{Error, Result};
use crate::graph::CooccurrenceGraph;

#[inline]
pub fn plogp(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Stationary visit rate of each node: `p_i = s_i / (2T)`.
pub fn visit_rates(g: &CooccurrenceGraph) -> Result<Vec<f64>> {
    if g.node_count() == 0 || g.edge_count() == 0 {
        return Err(Error::InvalidInput(
            "visit rates need a graph with at least one edge".into(),
        ));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let t2 = 2.0 * g.total_weight() as f64;
    Ok((0..g.node_count())
        .map(|i| g.strength(i) as f64 / t2)
        .collect())
}

/// Codelength in bits of a flat partition (`partition[node] = module`).
/// The all-in-one-module partition yields the entropy of the visit rates.
pub fn map_equation_codelength(g: &CooccurrenceGraph, partition: &[usize]) -> f64 {
    assert_eq!(
        partition.len(),
        g.node_count(),
        "partition must cover all nodes"
    );
    if g.node_count() == 0 {
        return 0.0;
    }
    let t2 = 2.0 * g.total_weight() as f64;
    if t2 == 0.0 {
        return 0.0;
    }
    let n_modules = partition.iter().copied().max().unwrap_or(0) + 1;
    let mut module_flow = vec![0.0f64; n_modules];
    let mut module_cut = vec![0.0f64; n_modules];
    let mut node_term = 0.0;
    for (node, &m) in partition.iter().enumerate() {
        let p = g.strength(node) as f64 / t2;
        module_flow[m] += p;
        node_term += plogp(p);
    }
    for e in g.edges() {
        if partition[e.u] != partition[e.v] {
            let flow = e.weight as f64 / t2;
            module_cut[partition[e.u]] += flow;
            module_cut[partition[e.v]] += flow;
        }
    }
    let sum_cut: f64 = module_cut.iter().sum();
    let sum_plogp_cut: f64 = module_cut.iter().map(|&q| plogp(q)).sum();
    let sum_plogp_circ: f64 = module_cut
        .iter()
        .zip(&module_flow)
        .map(|(&q, &p)| plogp(q + p))
        .sum();
    plogp(sum_cut) - 2.0 * sum_plogp_cut + sum_plogp_circ - node_term
}

/// Per-module share of the codelength: the module codebook cost
/// `p_m_circ * H(P_m)`, in bits. Keys are module ids.
pub fn module_codelength_terms(g: &CooccurrenceGraph, partition: &[usize]) -> Vec<f64> {
    assert_eq!(partition.len(), g.node_count());
    if g.node_count() == 0 {
        return Vec::new();
    }
    let t2 = 2.0 * g.total_weight() as f64;
    let n_modules = partition.iter().copied().max().unwrap_or(0) + 1;
    let mut module_cut = vec![0.0f64; n_modules];
    let mut node_terms = vec![0.0f64; n_modules];
    let mut module_flow = vec![0.0f64; n_modules];
    for (node, &m) in partition.iter().enumerate() {
        let p = g.strength(node) as f64 / t2;
        module_flow[m] += p;
        node_terms[m] += plogp(p);
    }
    for e in g.edges() {
        if partition[e.u] != partition[e.v] {
            let flow = e.weight as f64 / t2;
            module_cut[partition[e.u]] += flow;
            module_cut[partition[e.v]] += flow;
        }
    }
    (0..n_modules)
        .map(|m| plogp(module_cut[m] + module_flow[m]) - plogp(module_cut[m]) - node_terms[m])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedEdge;

    fn graph(n: usize, edges: &[(usize, usize, u64)]) -> CooccurrenceGraph {
        CooccurrenceGraph::new(
            (0..n).map(|i| format!("c{i}")).collect(),
            vec![1; n],
            edges
                .iter()
                .map(|&(u, v, weight)| WeightedEdge { u, v, weight })
                .collect(),
        )
        .unwrap()
    }

    /// Independent route: evaluate the map equation from the entropy
    /// definitions instead of the plogp expansion.
    fn codelength_by_entropies(g: &CooccurrenceGraph, partition: &[usize]) -> f64 {
        let t2 = 2.0 * g.total_weight() as f64;
        let n_modules = partition.iter().copied().max().unwrap() + 1;
        let mut q = vec![0.0f64; n_modules];
        for e in g.edges() {
            if partition[e.u] != partition[e.v] {
                q[partition[e.u]] += e.weight as f64 / t2;
                q[partition[e.v]] += e.weight as f64 / t2;
            }
        }
        let q_total: f64 = q.iter().sum();
        let entropy = |probs: &[f64]| -> f64 {
            probs
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| -p * p.log2())
                .sum()
        };
        let mut result = 0.0;
        if q_total > 0.0 {
            let shares: Vec<f64> = q.iter().map(|&x| x / q_total).collect();
            result += q_total * entropy(&shares);
        }
        for m in 0..n_modules {
            let members: Vec<usize> = (0..g.node_count()).filter(|&i| partition[i] == m).collect();
            let p_circ: f64 =
                q[m] + members.iter().map(|&i| g.strength(i) as f64 / t2).sum::<f64>();
            if p_circ == 0.0 {
                continue;
            }
            let mut probs: Vec<f64> = members
                .iter()
                .map(|&i| g.strength(i) as f64 / t2 / p_circ)
                .collect();
            probs.push(q[m] / p_circ);
            result += p_circ * entropy(&probs);
        }
        result
    }

    #[test]
    fn triangle_visit_rates_are_uniform() {
        let g = graph(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 1)]);
        let p = visit_rates(&g).unwrap();
        for rate in &p {
            assert!((rate - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn path_visit_rates_follow_strengths() {
        let g = graph(3, &[(0, 1, 1), (1, 2, 1)]);
        let p = visit_rates(&g).unwrap();
        assert_eq!(p, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn visit_rates_sum_to_one() {
        let g = graph(5, &[(0, 1, 3), (1, 2, 1), (2, 3, 7), (3, 4, 2), (0, 4, 1)]);
        let p = visit_rates(&g).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn visit_rates_reject_disconnected_graphs() {
        let g = graph(4, &[(0, 1, 1), (2, 3, 1)]);
        assert!(matches!(visit_rates(&g), Err(Error::Disconnected)));
    }

    #[test]
    fn single_module_codelength_is_visit_rate_entropy() {
        let g = graph(4, &[(0, 1, 2), (1, 2, 1), (2, 3, 4), (0, 3, 1)]);
        let p = visit_rates(&g).unwrap();
        let entropy: f64 = p.iter().map(|&x| -x * x.log2()).sum();
        let len = map_equation_codelength(&g, &[0, 0, 0, 0]);
        assert!((len - entropy).abs() < 1e-12);
    }

    #[test]
    fn two_cliques_prefer_the_two_module_split() {
        // two 4-cliques joined by one unit edge
        let mut edges = Vec::new();
        for base in [0usize, 4] {
            for i in 0..4 {
                for j in (i + 1)..4 {
                    edges.push((base + i, base + j, 1));
                }
            }
        }
        edges.push((3, 4, 1));
        let g = graph(8, &edges);
        let one = map_equation_codelength(&g, &[0; 8]);
        let two = map_equation_codelength(&g, &[0, 0, 0, 0, 1, 1, 1, 1]);
        assert!(two < one, "two-module {two} should beat one-module {one}");

        // agreement with the entropy-form oracle on both partitions
        let oracle_one = codelength_by_entropies(&g, &[0; 8]);
        let oracle_two = codelength_by_entropies(&g, &[0, 0, 0, 0, 1, 1, 1, 1]);
        assert!((one - oracle_one).abs() < 1e-12);
        assert!((two - oracle_two).abs() < 1e-12);
    }

    #[test]
    fn codelength_invariant_under_module_relabeling() {
        let g = graph(5, &[(0, 1, 1), (1, 2, 2), (2, 3, 1), (3, 4, 3), (0, 4, 1)]);
        let a = map_equation_codelength(&g, &[0, 0, 1, 1, 2]);
        let b = map_equation_codelength(&g, &[2, 2, 0, 0, 1]);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn module_terms_sum_to_codelength_minus_index_cost() {
        let g = graph(6, &[(0, 1, 1), (1, 2, 1), (0, 2, 1), (3, 4, 1), (4, 5, 1), (3, 5, 1), (2, 3, 1)]);
        let part = [0, 0, 0, 1, 1, 1];
        let terms = module_codelength_terms(&g, &part);
        let t2 = 2.0 * g.total_weight() as f64;
        let q_m = 1.0 / t2;
        let q = 2.0 * q_m;
        let index_cost = plogp(q) - 2.0 * plogp(q_m);
        let total = map_equation_codelength(&g, &part);
        assert!((terms.iter().sum::<f64>() + index_cost - total).abs() < 1e-12);
    }
}
