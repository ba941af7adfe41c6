//! Graph materialisation.
//!
//! Generation is two-phase: every node is sampled from its own substream,
//! then all pairs are decided. Pair enumeration walks nodes in descending
//! weight order; for a fixed outer node the best achievable left-hand side
//! `w_i^alpha w_j^beta max(h)` is monotone in the inner weight, so each inner
//! loop stops at the first pair that cannot reach `theta`.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::model::{self, EdgeRule, ModelConfig, Node};
use crate::{Error, Result};

pub const DEFAULT_MAX_EDGES: u64 = 100_000_000;
pub const MAX_EDGES_ENV: &str = "FTM_MAX_EDGES";

const BLOCK: usize = 256;
const FLUSH_EVERY: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub max_edges: u64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { workers: None, max_edges: DEFAULT_MAX_EDGES }
    }
}

impl GenerateOptions {
    /// Defaults, with the edge guard overridden by `FTM_MAX_EDGES` when set.
    pub fn from_env() -> Result<Self> {
        let mut opts = Self::default();
        if let Ok(raw) = std::env::var(MAX_EDGES_ENV) {
            opts.max_edges = raw.trim().parse().map_err(|_| {
                Error::InvalidParameter(format!("{MAX_EDGES_ENV} must be a non-negative integer, got '{raw}'"))
            })?;
        }
        Ok(opts)
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GenerationStats {
    pub candidate_pairs: u64,
    pub wall_time: Duration,
}

/// Generated network. Undirected edges are stored once as `(i, j)` with
/// `i < j`; directed arcs as `(source, target)`. Edges are sorted.
#[derive(Debug, Clone)]
pub struct Graph {
    pub nodes: Vec<Node>,
    pub edges: Vec<(usize, usize)>,
    pub config: ModelConfig,
    pub stats: GenerationStats,
}

impl Graph {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_directed(&self) -> bool {
        self.config.rule.is_directed()
    }

    pub fn degrees(&self) -> Degrees {
        degree_sequence(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Degrees {
    Undirected(Vec<u64>),
    Directed { out: Vec<u64>, inn: Vec<u64> },
}

pub fn generate(config: &ModelConfig) -> Result<Graph> {
    generate_with(config, &GenerateOptions::default())
}

pub fn generate_with(config: &ModelConfig, opts: &GenerateOptions) -> Result<Graph> {
    config.validate()?;
    match opts.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
            pool.install(|| generate_inner(config, opts.max_edges))
        }
        None => generate_inner(config, opts.max_edges),
    }
}

/// Samples all `config.n` nodes from their per-id substreams.
pub fn sample_nodes(config: &ModelConfig) -> Result<Vec<Node>> {
    config.validate()?;
    (0..config.n)
        .into_par_iter()
        .map(|id| model::sample_node(config.seed, id, &config.pareto, config.d))
        .collect()
}

fn generate_inner(config: &ModelConfig, max_edges: u64) -> Result<Graph> {
    let start = Instant::now();
    let nodes = sample_nodes(config)?;
    let prepared = Prepared::new(&nodes, &config.rule, true);
    let n = nodes.len();
    let blocks = n.div_ceil(BLOCK);

    let total = AtomicU64::new(0);
    let overflow = AtomicBool::new(false);
    let parts: Vec<(Vec<(usize, usize)>, u64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut edges = Vec::new();
            let mut candidates = 0u64;
            let mut pending = 0u64;
            for p in b * BLOCK..((b + 1) * BLOCK).min(n) {
                if overflow.load(Ordering::Relaxed) {
                    break;
                }
                prepared.scan(p, |q| {
                    candidates += 1;
                    if prepared.decide(p, q) {
                        edges.push(prepared.edge_ids(p, q));
                        pending += 1;
                        if pending == FLUSH_EVERY {
                            if total.fetch_add(pending, Ordering::Relaxed) + pending > max_edges {
                                overflow.store(true, Ordering::Relaxed);
                            }
                            pending = 0;
                        }
                    }
                });
            }
            if total.fetch_add(pending, Ordering::Relaxed) + pending > max_edges {
                overflow.store(true, Ordering::Relaxed);
            }
            (edges, candidates)
        })
        .collect();

    if overflow.load(Ordering::Relaxed) {
        return Err(Error::EdgeLimit { limit: max_edges });
    }
    let candidate_pairs = parts.iter().map(|(_, c)| c).sum();
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(parts.iter().map(|(e, _)| e.len()).sum());
    for (part, _) in parts {
        edges.extend(part);
    }
    edges.par_sort_unstable();

    Ok(Graph {
        nodes,
        edges,
        config: *config,
        stats: GenerationStats { candidate_pairs, wall_time: start.elapsed() },
    })
}

/// Reference generator: every pair (arc) tested with [`model::edge_exists`].
pub fn generate_naive(config: &ModelConfig) -> Result<Graph> {
    config.validate()?;
    let start = Instant::now();
    let nodes: Vec<Node> = (0..config.n)
        .map(|id| model::sample_node(config.seed, id, &config.pareto, config.d))
        .collect::<Result<_>>()?;
    let rule = &config.rule;
    let mut edges = Vec::new();
    let mut candidate_pairs = 0u64;
    for i in 0..nodes.len() {
        let inner: Box<dyn Iterator<Item = usize>> = if rule.is_directed() {
            Box::new((0..nodes.len()).filter(move |&j| j != i))
        } else {
            Box::new(i + 1..nodes.len())
        };
        for j in inner {
            candidate_pairs += 1;
            if model::edge_exists(&nodes[i], &nodes[j], rule)? {
                edges.push((i, j));
            }
        }
    }
    edges.sort_unstable();
    Ok(Graph {
        nodes,
        edges,
        config: *config,
        stats: GenerationStats { candidate_pairs, wall_time: start.elapsed() },
    })
}

/// Pairs (arcs) whose best achievable left-hand side reaches `theta`: a
/// superset of the edges and a subset of all pairs. Undirected pairs are
/// yielded as `(min id, max id)`.
pub fn candidate_pairs(nodes: &[Node], rule: &EdgeRule) -> CandidatePairs {
    CandidatePairs { prepared: Prepared::new(nodes, rule, false), p: 0, q: None }
}

pub struct CandidatePairs {
    prepared: Prepared,
    p: usize,
    q: Option<usize>,
}

impl Iterator for CandidatePairs {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        let pr = &self.prepared;
        let n = pr.ids.len();
        while self.p < n {
            let p = self.p;
            let mut q = self.q.unwrap_or(if pr.rule.is_directed() { 0 } else { p + 1 });
            if pr.rule.is_directed() && q == p {
                q += 1;
            }
            if q < n && pr.admits(p, q) {
                self.q = Some(q + 1);
                return Some(pr.edge_ids(p, q));
            }
            self.p += 1;
            self.q = None;
        }
        None
    }
}

enum Pruning {
    /// Bound decreases along the weight order; break at the first failure.
    Sorted { hmax: f64 },
    /// `theta == 0` with `max h == 0`: the bound is met everywhere.
    All,
    /// No direction can reach `theta`.
    Nothing,
}

/// Nodes in descending-weight order with precomputed endpoint powers.
struct Prepared {
    rule: EdgeRule,
    pruning: Pruning,
    ids: Vec<usize>,
    src: Vec<f64>,
    tgt: Vec<f64>,
    dim: usize,
    dirs: Vec<f64>,
}

impl Prepared {
    fn new(nodes: &[Node], rule: &EdgeRule, with_directions: bool) -> Self {
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by(|&a, &b| {
            nodes[b]
                .weight
                .total_cmp(&nodes[a].weight)
                .then(nodes[a].id.cmp(&nodes[b].id))
        });
        let dim = nodes.first().map_or(0, Node::dim);
        let dirs = if with_directions {
            order.iter().flat_map(|&k| nodes[k].direction.iter().copied()).collect()
        } else {
            Vec::new()
        };
        let hmax = rule.max_link();
        let pruning = if hmax > 0.0 {
            Pruning::Sorted { hmax }
        } else if hmax == 0.0 && rule.theta() == 0.0 {
            Pruning::All
        } else {
            Pruning::Nothing
        };
        Self {
            rule: *rule,
            pruning,
            ids: order.iter().map(|&k| nodes[k].id).collect(),
            src: order.iter().map(|&k| rule.source_power(nodes[k].weight)).collect(),
            tgt: order.iter().map(|&k| rule.target_power(nodes[k].weight)).collect(),
            dim,
            dirs,
        }
    }

    #[inline]
    fn admits(&self, p: usize, q: usize) -> bool {
        match self.pruning {
            Pruning::Sorted { hmax } => (self.src[p] * self.tgt[q]) * hmax >= self.rule.theta(),
            Pruning::All => true,
            Pruning::Nothing => false,
        }
    }

    /// Calls `visit(q)` for every admitted inner position of outer position `p`.
    #[inline]
    fn scan(&self, p: usize, mut visit: impl FnMut(usize)) {
        let n = self.ids.len();
        let start = if self.rule.is_directed() { 0 } else { p + 1 };
        for q in start..n {
            if q == p {
                continue;
            }
            if !self.admits(p, q) {
                break;
            }
            visit(q);
        }
    }

    #[inline]
    fn decide(&self, p: usize, q: usize) -> bool {
        let d = self.dim;
        let dot = model::unit_dot(&self.dirs[p * d..(p + 1) * d], &self.dirs[q * d..(q + 1) * d]);
        self.rule.holds_powers(self.src[p], self.tgt[q], dot)
    }

    #[inline]
    fn edge_ids(&self, p: usize, q: usize) -> (usize, usize) {
        let (a, b) = (self.ids[p], self.ids[q]);
        if self.rule.is_directed() || a < b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

/// Degrees implied by the edge set; `(out, in)` for directed graphs.
pub fn degree_sequence(graph: &Graph) -> Degrees {
    degrees_from_edges(graph.nodes.len(), &graph.edges, graph.is_directed())
}

pub fn degrees_from_edges(n: usize, edges: &[(usize, usize)], directed: bool) -> Degrees {
    if directed {
        let mut out = vec![0u64; n];
        let mut inn = vec![0u64; n];
        for &(s, t) in edges {
            out[s] += 1;
            inn[t] += 1;
        }
        Degrees::Directed { out, inn }
    } else {
        let mut deg = vec![0u64; n];
        for &(a, b) in edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        Degrees::Undirected(deg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinkFn, ParetoParams};

    fn config(n: usize, theta: f64, seed: u64) -> ModelConfig {
        ModelConfig::new(
            n,
            3,
            ParetoParams::new(3.0, 1.0).unwrap(),
            EdgeRule::undirected(theta).unwrap(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn single_node_has_no_edges() {
        for rule in [
            EdgeRule::undirected(0.0).unwrap(),
            EdgeRule::directed(0.0, 1.0, 2.0).unwrap(),
            EdgeRule::link_function(0.0, 1.0, 1.0, LinkFn::Exp).unwrap(),
        ] {
            let mut cfg = config(1, 0.0, 3);
            cfg.rule = rule;
            let g = generate(&cfg).unwrap();
            assert!(g.edges.is_empty());
        }
    }

    #[test]
    fn matches_naive_reference() {
        let cfg = config(2000, 12.6, 42);
        let fast = generate(&cfg).unwrap();
        let slow = generate_naive(&cfg).unwrap();
        assert_eq!(fast.edges, slow.edges);
        assert_eq!(fast.nodes, slow.nodes);
        assert!(fast.stats.candidate_pairs < slow.stats.candidate_pairs / 10);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let mut cfg = config(1500, 4.0, 5);
        cfg.rule = EdgeRule::directed(4.0, 1.0, 2.0).unwrap();
        let one = generate_with(&cfg, &GenerateOptions::default().with_workers(1)).unwrap();
        let four = generate_with(&cfg, &GenerateOptions::default().with_workers(4)).unwrap();
        assert_eq!(one.edges, four.edges);
    }

    #[test]
    fn edge_guard_is_an_error() {
        let cfg = config(300, 0.0, 1);
        let opts = GenerateOptions { workers: None, max_edges: 1000 };
        assert!(matches!(generate_with(&cfg, &opts), Err(Error::EdgeLimit { limit: 1000 })));
    }

    #[test]
    fn candidate_pairs_without_threshold_is_every_pair() {
        let cfg = config(40, 0.0, 8);
        let nodes = sample_nodes(&cfg).unwrap();
        assert_eq!(candidate_pairs(&nodes, &cfg.rule).count(), 40 * 39 / 2);
        let dir = EdgeRule::directed(0.0, 2.0, 0.5).unwrap();
        assert_eq!(candidate_pairs(&nodes, &dir).count(), 40 * 39);
    }

    #[test]
    fn candidate_pairs_small_example() {
        let nodes: Vec<Node> = [10.0, 1.0, 1.0]
            .iter()
            .enumerate()
            .map(|(id, &w)| Node { id, weight: w, direction: vec![0.0, 0.0, 1.0] })
            .collect();
        let rule = EdgeRule::undirected(5.0).unwrap();
        let pairs: Vec<_> = candidate_pairs(&nodes, &rule).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn candidate_pairs_sorts_internally() {
        let nodes: Vec<Node> = [1.0, 10.0, 1.0, 3.0]
            .iter()
            .enumerate()
            .map(|(id, &w)| Node { id, weight: w, direction: vec![1.0, 0.0] })
            .collect();
        let rule = EdgeRule::undirected(2.5).unwrap();
        let mut pairs: Vec<_> = candidate_pairs(&nodes, &rule).collect();
        pairs.sort();
        assert_eq!(pairs, vec![(0, 1), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn negative_link_functions_prune_everything() {
        let cfg = config(50, 0.5, 2);
        let nodes = sample_nodes(&cfg).unwrap();
        let h = LinkFn::OddPowerPlusC { m: 1, c: -3.0 };
        let rule = EdgeRule::link_function(0.5, 1.0, 1.0, h).unwrap();
        assert_eq!(candidate_pairs(&nodes, &rule).count(), 0);
        let rule0 = EdgeRule::link_function(0.0, 1.0, 1.0, LinkFn::OddPowerPlusC { m: 1, c: -1.0 }).unwrap();
        assert_eq!(candidate_pairs(&nodes, &rule0).count(), 50 * 49);
    }

    #[test]
    fn degrees_of_small_graphs() {
        assert_eq!(degrees_from_edges(4, &[], false), Degrees::Undirected(vec![0; 4]));
        assert_eq!(
            degrees_from_edges(3, &[(0, 1), (0, 2), (1, 2)], false),
            Degrees::Undirected(vec![2, 2, 2])
        );
        assert_eq!(
            degrees_from_edges(3, &[(0, 1), (0, 2), (2, 1)], true),
            Degrees::Directed { out: vec![2, 0, 1], inn: vec![0, 2, 1] }
        );
    }

    #[test]
    fn handshake_identity() {
        let g = generate(&config(3000, 8.0, 9)).unwrap();
        let Degrees::Undirected(deg) = g.degrees() else { panic!() };
        assert_eq!(deg.iter().sum::<u64>(), 2 * g.edge_count() as u64);

        let mut cfg = config(3000, 8.0, 9);
        cfg.rule = EdgeRule::directed(8.0, 1.0, 2.0).unwrap();
        let g = generate(&cfg).unwrap();
        let Degrees::Directed { out, inn } = g.degrees() else { panic!() };
        assert_eq!(out.iter().sum::<u64>(), g.edge_count() as u64);
        assert_eq!(inn.iter().sum::<u64>(), g.edge_count() as u64);
    }

    #[test]
    fn symmetric_exponents_give_reciprocal_arcs() {
        let mut cfg = config(1500, 3.0, 4);
        cfg.rule = EdgeRule::directed(3.0, 1.5, 1.5).unwrap();
        let g = generate(&cfg).unwrap();
        let set: std::collections::HashSet<_> = g.edges.iter().copied().collect();
        assert!(!set.is_empty());
        assert!(set.iter().all(|&(s, t)| set.contains(&(t, s))));
    }

    #[test]
    fn edges_are_canonical() {
        let g = generate(&config(2000, 5.0, 77)).unwrap();
        assert!(g.edges.iter().all(|&(a, b)| a < b && b < 2000));
        assert!(g.edges.windows(2).all(|w| w[0] < w[1]));
    }
}
