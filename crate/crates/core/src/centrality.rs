//! Closeness and eigenvector centrality on the weighted co-trading graph.

use crate::graph::CoTradeGraph;
use crate::types::InsiderId;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CentralityMeasure {
    Closeness,
    Eigenvector,
}

impl CentralityMeasure {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "closeness" => Some(CentralityMeasure::Closeness),
            "eigenvector" => Some(CentralityMeasure::Eigenvector),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CentralityMeasure::Closeness => "closeness",
            CentralityMeasure::Eigenvector => "eigenvector",
        }
    }
}

/// How closeness measures path length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMode {
    /// Every edge has length 1.
    #[default]
    Unit,
    /// Edge length is the reciprocal of its weight (strong ties are short).
    InverseWeight,
}

/// Scores aligned with graph node order plus the descending ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityRanking {
    pub measure: CentralityMeasure,
    /// Score per node, aligned with `CoTradeGraph::nodes()`.
    pub scores: Vec<f64>,
    /// Node indices sorted by descending score; ties break on insider id.
    pub ranking: Vec<usize>,
}

impl CentralityRanking {
    fn from_scores(measure: CentralityMeasure, scores: Vec<f64>, graph: &CoTradeGraph) -> Self {
        let mut ranking: Vec<usize> = (0..scores.len()).collect();
        ranking.sort_by(|&x, &y| {
            scores[y]
                .partial_cmp(&scores[x])
                .unwrap()
                .then_with(|| graph.nodes()[x].cmp(&graph.nodes()[y]))
        });
        CentralityRanking {
            measure,
            scores,
            ranking,
        }
    }

    /// Ranked `(insider, score, component)` rows, best first.
    pub fn rows<'g>(&self, graph: &'g CoTradeGraph) -> Vec<(&'g InsiderId, f64, usize)> {
        self.ranking
            .iter()
            .map(|&i| (&graph.nodes()[i], self.scores[i], graph.component_of(i)))
            .collect()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CentralityError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("power iteration did not converge: residual {residual:.3e} after {iterations} iterations (tolerance {tolerance:.3e})")]
    NotConverged {
        residual: f64,
        iterations: usize,
        tolerance: f64,
    },
}

/// Closeness centrality with the component-scaled normalization
/// `((n_c - 1)/(N - 1)) * ((n_c - 1) / sum of distances)`, which keeps scores
/// comparable across components of a fragmented graph. Unit edge lengths by
/// default; singleton components score 0.
pub fn closeness(graph: &CoTradeGraph) -> Result<CentralityRanking, CentralityError> {
    closeness_with(graph, DistanceMode::Unit)
}

pub fn closeness_with(
    graph: &CoTradeGraph,
    mode: DistanceMode,
) -> Result<CentralityRanking, CentralityError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(CentralityError::EmptyGraph);
    }
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|source| {
            let component_size = graph.components()[graph.component_of(source)].len();
            if component_size <= 1 || n == 1 {
                return 0.0;
            }
            let total: f64 = match mode {
                DistanceMode::Unit => bfs_distance_sum(graph, source),
                DistanceMode::InverseWeight => dijkstra_distance_sum(graph, source),
            };
            if total <= 0.0 {
                return 0.0;
            }
            let reach = (component_size - 1) as f64;
            (reach / (n - 1) as f64) * (reach / total)
        })
        .collect();
    Ok(CentralityRanking::from_scores(
        CentralityMeasure::Closeness,
        scores,
        graph,
    ))
}

fn bfs_distance_sum(graph: &CoTradeGraph, source: usize) -> f64 {
    let n = graph.node_count();
    let mut dist = vec![usize::MAX; n];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    let mut total = 0usize;
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &graph.adjacency()[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                total += dist[v];
                queue.push_back(v);
            }
        }
    }
    total as f64
}

fn dijkstra_distance_sum(graph: &CoTradeGraph, source: usize) -> f64 {
    use std::cmp::Reverse;
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(Reverse((ordered(0.0), source)));
    while let Some(Reverse((d_bits, u))) = heap.pop() {
        let d = f64::from_bits(d_bits);
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &graph.adjacency()[u] {
            let nd = d + 1.0 / w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((ordered(nd), v)));
            }
        }
    }
    dist.iter().filter(|d| d.is_finite()).sum()
}

/// Nonnegative distances compare correctly through their bit patterns.
fn ordered(d: f64) -> u64 {
    d.to_bits()
}

/// Principal eigenvector of the weighted adjacency with tolerance 1e-10 and
/// at most 1000 iterations.
pub fn eigenvector(graph: &CoTradeGraph) -> Result<CentralityRanking, CentralityError> {
    eigenvector_with(graph, 1e-10, 1000)
}

/// Power iteration, evaluated per connected component.
///
/// The principal eigenvector of a disconnected nonnegative adjacency is the
/// Perron vector of the component with the largest spectral radius, zero
/// elsewhere, so each component is iterated on its own (a diagonal shift
/// keeps the dominant eigenvalue unique in magnitude on bipartite
/// components) and the winner is selected afterwards. Components whose radii
/// tie to within machine precision share the mass evenly. The residual
/// criterion is `||A v - lambda v|| <= tol * lambda` on the unshifted
/// adjacency.
pub fn eigenvector_with(
    graph: &CoTradeGraph,
    tolerance: f64,
    max_iterations: usize,
) -> Result<CentralityRanking, CentralityError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(CentralityError::EmptyGraph);
    }
    let adjacency = graph.adjacency();

    struct ComponentEigen {
        members: Vec<usize>,
        lambda: f64,
        vector: Vec<f64>,
    }

    let mut solved: Vec<ComponentEigen> = Vec::with_capacity(graph.components().len());
    for members in graph.components() {
        let k = members.len();
        let position = |v: usize| members.binary_search(&v).expect("member");
        let shift = 1.0
            + members
                .iter()
                .map(|&u| adjacency[u].iter().map(|&(_, w)| w).sum::<f64>())
                .fold(0.0f64, f64::max);
        let mut v = vec![1.0 / (k as f64).sqrt(); k];
        let mut av = vec![0.0; k];
        let mut converged = None;
        let mut last_residual = f64::INFINITY;
        for _ in 0..max_iterations {
            for (slot, &u) in members.iter().enumerate() {
                av[slot] = adjacency[u]
                    .iter()
                    .map(|&(j, w)| w * v[position(j)])
                    .sum();
            }
            let lambda: f64 = v.iter().zip(&av).map(|(x, y)| x * y).sum();
            if lambda > 0.0 {
                let residual: f64 = v
                    .iter()
                    .zip(&av)
                    .map(|(x, y)| (y - lambda * x).powi(2))
                    .sum::<f64>()
                    .sqrt();
                last_residual = residual;
                if residual <= tolerance * lambda {
                    converged = Some(lambda);
                    break;
                }
            }
            // Shifted update keeps iterates strictly positive.
            let mut norm = 0.0;
            for i in 0..k {
                av[i] += shift * v[i];
                norm += av[i] * av[i];
            }
            let norm = norm.sqrt();
            for i in 0..k {
                v[i] = av[i] / norm;
            }
        }
        let Some(lambda) = converged else {
            return Err(CentralityError::NotConverged {
                residual: last_residual,
                iterations: max_iterations,
                tolerance,
            });
        };
        solved.push(ComponentEigen {
            members: members.clone(),
            lambda,
            vector: v,
        });
    }

    let lambda_max = solved.iter().map(|c| c.lambda).fold(0.0f64, f64::max);
    let tie_band = lambda_max * 1e-14;
    let winners: Vec<&ComponentEigen> = solved
        .iter()
        .filter(|c| c.lambda >= lambda_max - tie_band)
        .collect();
    let scale = 1.0 / (winners.len() as f64).sqrt();
    let mut scores = vec![0.0; n];
    for component in winners {
        for (slot, &u) in component.members.iter().enumerate() {
            scores[u] = (component.vector[slot] * scale).max(0.0);
        }
    }
    Ok(CentralityRanking::from_scores(
        CentralityMeasure::Eigenvector,
        scores,
        graph,
    ))
}
