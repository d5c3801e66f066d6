//! Seeded greedy map-equation optimizer: node moving in random sweep
//! order, module aggregation, and single-node refinement, repeated until
//! no move improves the codelength by more than 1e-12 bits.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::mapeq::plogp;

const MIN_GAIN: f64 = 1e-12;

/// Flat working graph in flow units: every edge weight is `w / (2T)` of
/// the graph the level runs on, and `node_flow` carries visit mass.
pub(crate) struct LocalGraph {
    pub n: usize,
    offsets: Vec<usize>,
    edges: Vec<(u32, f64)>,
    pub node_flow: Vec<f64>,
    node_exit: Vec<f64>,
}

impl LocalGraph {
    pub fn from_weighted_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let total: f64 = edges.iter().map(|&(_, _, w)| w).sum();
        let scale = if total > 0.0 { 1.0 / (2.0 * total) } else { 0.0 };
        let mut degree = vec![0usize; n];
        for &(u, v, _) in edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut adj = vec![(0u32, 0.0f64); offsets[n]];
        let mut cursor = offsets.clone();
        let mut node_flow = vec![0.0f64; n];
        for &(u, v, w) in edges {
            let flow = w * scale;
            adj[cursor[u]] = (v as u32, flow);
            cursor[u] += 1;
            adj[cursor[v]] = (u as u32, flow);
            cursor[v] += 1;
            node_flow[u] += flow;
            node_flow[v] += flow;
        }
        let node_exit = node_flow.clone();
        Self {
            n,
            offsets,
            edges: adj,
            node_flow,
            node_exit,
        }
    }

    fn from_flows(
        n: usize,
        edge_flows: &[((u32, u32), f64)],
        node_flow: Vec<f64>,
    ) -> Self {
        let mut degree = vec![0usize; n];
        for &((u, v), _) in edge_flows {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut adj = vec![(0u32, 0.0f64); offsets[n]];
        let mut cursor = offsets.clone();
        let mut node_exit = vec![0.0f64; n];
        for &((u, v), flow) in edge_flows {
            adj[cursor[u as usize]] = (v, flow);
            cursor[u as usize] += 1;
            adj[cursor[v as usize]] = (u, flow);
            cursor[v as usize] += 1;
            node_exit[u as usize] += flow;
            node_exit[v as usize] += flow;
        }
        Self {
            n,
            offsets,
            edges: adj,
            node_flow,
            node_exit,
        }
    }

    #[inline]
    fn neighbors(&self, v: usize) -> &[(u32, f64)] {
        &self.edges[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Codelength of a partition of this graph, from scratch. The node
    /// term uses this graph's own node flows, so values are comparable
    /// only within one level.
    pub fn codelength(&self, partition: &[usize]) -> f64 {
        let n_modules = partition.iter().copied().max().unwrap_or(0) + 1;
        let mut cut = vec![0.0f64; n_modules];
        let mut flow = vec![0.0f64; n_modules];
        let mut node_term = 0.0;
        for v in 0..self.n {
            flow[partition[v]] += self.node_flow[v];
            node_term += plogp(self.node_flow[v]);
            for &(u, f) in self.neighbors(v) {
                let u = u as usize;
                if u > v && partition[u] != partition[v] {
                    cut[partition[u]] += f;
                    cut[partition[v]] += f;
                }
            }
        }
        let sum_cut: f64 = cut.iter().sum();
        let sum_plogp_cut: f64 = cut.iter().map(|&q| plogp(q)).sum();
        let sum_plogp_circ: f64 = cut
            .iter()
            .zip(&flow)
            .map(|(&q, &p)| plogp(q + p))
            .sum();
        plogp(sum_cut) - 2.0 * sum_plogp_cut + sum_plogp_circ - node_term
    }
}

/// Incremental node-moving state over one working graph.
struct Mover<'a> {
    g: &'a LocalGraph,
    part: Vec<usize>,
    module_flow: Vec<f64>,
    module_cut: Vec<f64>,
    module_size: Vec<usize>,
    sum_cut: f64,
    free_modules: Vec<usize>,
    // scratch for gathering flows into neighboring modules
    flow_to: Vec<f64>,
    active: Vec<usize>,
}

impl<'a> Mover<'a> {
    fn new(g: &'a LocalGraph, initial: &[usize]) -> Self {
        let n_modules = initial.iter().copied().max().unwrap_or(0) + 1;
        let mut module_flow = vec![0.0f64; n_modules];
        let mut module_cut = vec![0.0f64; n_modules];
        let mut module_size = vec![0usize; n_modules];
        for v in 0..g.n {
            module_flow[initial[v]] += g.node_flow[v];
            module_size[initial[v]] += 1;
        }
        for v in 0..g.n {
            for &(u, f) in g.neighbors(v) {
                let u = u as usize;
                if u > v && initial[u] != initial[v] {
                    module_cut[initial[u]] += f;
                    module_cut[initial[v]] += f;
                }
            }
        }
        let sum_cut = module_cut.iter().sum();
        let free_modules = (0..n_modules).filter(|&m| module_size[m] == 0).collect();
        Self {
            g,
            part: initial.to_vec(),
            module_flow,
            module_cut,
            module_size,
            sum_cut,
            free_modules,
            flow_to: vec![0.0f64; n_modules + g.n + 1],
            active: Vec::new(),
        }
    }

    fn ensure_module_slot(&mut self) -> usize {
        if let Some(free) = self.free_modules.last() {
            return *free;
        }
        let id = self.module_flow.len();
        self.module_flow.push(0.0);
        self.module_cut.push(0.0);
        self.module_size.push(0);
        if self.flow_to.len() <= id {
            self.flow_to.resize(id + 1, 0.0);
        }
        self.free_modules.push(id);
        id
    }

    /// Codelength change of moving `v` from its module to `target`.
    fn move_gain(&self, v: usize, target: usize, flow_va: f64, flow_vb: f64) -> f64 {
        let a = self.part[v];
        let pv = self.g.node_flow[v];
        let vexit = self.g.node_exit[v];
        let (qa, qb) = (self.module_cut[a], self.module_cut[target]);
        let (pa, pb) = (self.module_flow[a], self.module_flow[target]);
        let qa_new = (qa - vexit + 2.0 * flow_va).max(0.0);
        let qb_new = (qb + vexit - 2.0 * flow_vb).max(0.0);
        let pa_new = (pa - pv).max(0.0);
        let pb_new = pb + pv;
        let sum_new = self.sum_cut - qa - qb + qa_new + qb_new;
        plogp(sum_new) - plogp(self.sum_cut)
            - 2.0 * (plogp(qa_new) - plogp(qa) + plogp(qb_new) - plogp(qb))
            + plogp(qa_new + pa_new) - plogp(qa + pa)
            + plogp(qb_new + pb_new) - plogp(qb + pb)
    }

    fn apply_move(&mut self, v: usize, target: usize, flow_va: f64, flow_vb: f64) {
        let a = self.part[v];
        let pv = self.g.node_flow[v];
        let vexit = self.g.node_exit[v];
        let qa_new = (self.module_cut[a] - vexit + 2.0 * flow_va).max(0.0);
        let qb_new = (self.module_cut[target] + vexit - 2.0 * flow_vb).max(0.0);
        self.sum_cut += qa_new + qb_new - self.module_cut[a] - self.module_cut[target];
        self.module_cut[a] = qa_new;
        self.module_cut[target] = qb_new;
        self.module_flow[a] -= pv;
        self.module_flow[target] += pv;
        self.module_size[a] -= 1;
        self.module_size[target] += 1;
        if self.module_size[target] == 1 {
            self.free_modules.retain(|&m| m != target);
        }
        if self.module_size[a] == 0 {
            // zero the slot exactly to stop float drift from accumulating
            self.sum_cut -= self.module_cut[a];
            self.module_cut[a] = 0.0;
            self.module_flow[a] = 0.0;
            self.free_modules.push(a);
        }
        self.part[v] = target;
    }

    /// One pass over the nodes in `order`; returns the number of moves.
    fn sweep(&mut self, order: &[usize]) -> usize {
        let mut moves = 0;
        for &v in order {
            let a = self.part[v];
            // gather flow from v into each adjacent module
            self.active.clear();
            for &(u, f) in self.g.neighbors(v) {
                let m = self.part[u as usize];
                if self.flow_to[m] == 0.0 {
                    self.active.push(m);
                }
                self.flow_to[m] += f;
            }
            let flow_va = self.flow_to[a];
            let mut best_target = a;
            let mut best_gain = -MIN_GAIN;
            for idx in 0..self.active.len() {
                let b = self.active[idx];
                if b == a {
                    continue;
                }
                let gain = self.move_gain(v, b, flow_va, self.flow_to[b]);
                if gain < best_gain {
                    best_gain = gain;
                    best_target = b;
                }
            }
            // isolating v into an empty module is also a candidate
            if self.module_size[a] > 1 {
                let b = self.ensure_module_slot();
                let gain = self.move_gain(v, b, flow_va, 0.0);
                if gain < best_gain {
                    best_target = b;
                }
            }
            if best_target != a {
                let flow_vb = self.flow_to[best_target];
                self.apply_move(v, best_target, flow_va, flow_vb);
                moves += 1;
            }
            for &m in &self.active {
                self.flow_to[m] = 0.0;
            }
        }
        moves
    }

    /// Partition with modules renumbered densely by first appearance.
    fn dense_partition(&self) -> (Vec<usize>, usize) {
        let mut remap = vec![usize::MAX; self.module_flow.len()];
        let mut next = 0;
        let mut out = vec![0usize; self.g.n];
        for v in 0..self.g.n {
            let m = self.part[v];
            if remap[m] == usize::MAX {
                remap[m] = next;
                next += 1;
            }
            out[v] = remap[m];
        }
        (out, next)
    }
}

fn run_node_moving(g: &LocalGraph, initial: &[usize], rng: &mut ChaCha8Rng) -> (Vec<usize>, usize) {
    let mut mover = Mover::new(g, initial);
    let mut order: Vec<usize> = (0..g.n).collect();
    for _ in 0..10_000 {
        order.shuffle(rng);
        if mover.sweep(&order) == 0 {
            break;
        }
    }
    mover.dense_partition()
}

/// Splits every module by optimizing its induced subgraph, then lets the
/// resulting submodules move between modules as units. This escapes the
/// local minima where two groups were merged and single-node moves cannot
/// pull them apart again.
fn coarse_tune(g: &LocalGraph, part: &mut Vec<usize>, rng: &mut ChaCha8Rng) {
    let n_modules = part.iter().copied().max().unwrap_or(0) + 1;
    let mut members_of: Vec<Vec<usize>> = vec![Vec::new(); n_modules];
    for v in 0..g.n {
        members_of[part[v]].push(v);
    }
    let mut sub_of = vec![0usize; g.n];
    let mut sub_module = Vec::new();
    for (m, members) in members_of.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() == 1 {
            sub_of[members[0]] = sub_module.len();
            sub_module.push(m);
            continue;
        }
        let local_id: std::collections::HashMap<usize, usize> = members
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i))
            .collect();
        // intra-module subgraph in parent flow units; the exact payoff of
        // any split is judged afterwards by the submodule-level moves
        let mut sub_edges = Vec::new();
        let mut sub_flow = vec![0.0f64; members.len()];
        for (i, &v) in members.iter().enumerate() {
            sub_flow[i] = g.node_flow[v];
            for &(u, f) in g.neighbors(v) {
                let u = u as usize;
                if u > v && part[u] == m {
                    sub_edges.push(((i as u32, local_id[&u] as u32), f));
                }
            }
        }
        let sub = LocalGraph::from_flows(members.len(), &sub_edges, sub_flow);
        let init: Vec<usize> = (0..sub.n).collect();
        let (split, k) = run_node_moving(&sub, &init, rng);
        for (i, &v) in members.iter().enumerate() {
            sub_of[v] = sub_module.len() + split[i];
        }
        for _ in 0..k {
            sub_module.push(m);
        }
    }
    let coarse = aggregate(g, &sub_of, sub_module.len());
    let (moved, _) = run_node_moving(&coarse, &sub_module, rng);
    for v in 0..g.n {
        part[v] = moved[sub_of[v]];
    }
}

fn aggregate(g: &LocalGraph, partition: &[usize], n_modules: usize) -> LocalGraph {
    let mut coarse_flow = vec![0.0f64; n_modules];
    for v in 0..g.n {
        coarse_flow[partition[v]] += g.node_flow[v];
    }
    let mut coarse_edges: std::collections::BTreeMap<(u32, u32), f64> =
        std::collections::BTreeMap::new();
    for v in 0..g.n {
        for &(u, f) in g.neighbors(v) {
            let u = u as usize;
            if u > v && partition[u] != partition[v] {
                let (a, b) = (
                    partition[u].min(partition[v]) as u32,
                    partition[u].max(partition[v]) as u32,
                );
                *coarse_edges.entry((a, b)).or_insert(0.0) += f;
            }
        }
    }
    let edge_flows: Vec<((u32, u32), f64)> = coarse_edges.into_iter().collect();
    LocalGraph::from_flows(n_modules, &edge_flows, coarse_flow)
}

/// One full optimization run: node moving, aggregation cascade, and
/// fine-level refinement, repeated until the codelength stops improving.
/// Returns the partition (dense module ids) and its codelength.
pub(crate) fn optimize(g: &LocalGraph, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    if g.n == 0 {
        return (Vec::new(), 0.0);
    }
    let singletons: Vec<usize> = (0..g.n).collect();
    let mut part = singletons.clone();
    let mut best_len = g.codelength(&part);
    for _ in 0..64 {
        // single-node moves on the fine graph (first round: plain greedy
        // node moving; later rounds: refinement of the projected partition)
        let (refined, mut n_modules) = run_node_moving(g, &part, rng);
        part = refined;

        // aggregation cascade
        loop {
            if n_modules == 1 {
                break;
            }
            let coarse = aggregate(g, &part, n_modules);
            let coarse_init: Vec<usize> = (0..coarse.n).collect();
            let (coarse_part, coarse_modules) = run_node_moving(&coarse, &coarse_init, rng);
            if coarse_modules == coarse.n {
                break;
            }
            for slot in part.iter_mut() {
                *slot = coarse_part[*slot];
            }
            n_modules = coarse_modules;
        }

        // submodule-level escape from over-merged modules
        coarse_tune(g, &mut part, rng);

        let len = g.codelength(&part);
        if len < best_len - MIN_GAIN {
            best_len = len;
        } else {
            break;
        }
    }
    // pairwise merges can miss the all-in-one optimum (each single merge
    // worsens L while the total merge improves it), so always consider it
    let single = vec![0usize; g.n];
    let single_len = g.codelength(&single);
    if single_len < best_len {
        return (single, single_len);
    }
    (part, best_len)
}
