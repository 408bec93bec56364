//! Within-firm pair enumeration, edge filtering, and the global weighted
//! co-trading graph.

use crate::assignment::assignment_similarity;
use crate::similarity::{combined_similarity, KernelConfig};
use crate::types::{FirmId, InsiderFirmLog, InsiderId};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Which pair scoring backend feeds the edge weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimilarityMethod {
    BestMatch,
    Assignment,
}

impl SimilarityMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "best-match" | "best_match" | "bestmatch" => Some(SimilarityMethod::BestMatch),
            "assignment" => Some(SimilarityMethod::Assignment),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SimilarityMethod::BestMatch => "best-match",
            SimilarityMethod::Assignment => "assignment",
        }
    }
}

/// Edge-creation criteria applied to every within-firm pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFilterConfig {
    /// Each insider needs at least this many trades at the shared firm.
    pub min_trades: usize,
    /// Minimum count of ISO weeks with a kernel-positive cross-log pair.
    pub min_overlap_weeks: usize,
    /// Edges require a score strictly above this threshold.
    pub score_threshold: f64,
    /// Require the two tenure spans at the firm to intersect in >= 1 day.
    pub require_tenure_overlap: bool,
    pub method: SimilarityMethod,
    pub kernel: KernelConfig,
}

impl Default for EdgeFilterConfig {
    fn default() -> Self {
        EdgeFilterConfig {
            min_trades: 8,
            min_overlap_weeks: 4,
            score_threshold: 0.8,
            require_tenure_overlap: true,
            method: SimilarityMethod::BestMatch,
            kernel: KernelConfig::default(),
        }
    }
}

/// One firm context in which a pair passed every filter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeContext {
    pub firm_id: FirmId,
    pub score: f64,
    pub matched_weeks: usize,
}

/// Undirected edge; endpoints are ordered lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: InsiderId,
    pub b: InsiderId,
    /// Maximum score over the passing firm contexts.
    pub weight: f64,
    /// Firm of the maximal context.
    pub firm_id: FirmId,
    /// Every passing context, sorted by firm id.
    pub contexts: Vec<EdgeContext>,
}

/// Pair counts surviving each filter stage, in application order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BuildSummary {
    pub pairs_examined: u64,
    pub pass_min_trades: u64,
    pub pass_tenure_overlap: u64,
    pub pass_matched_weeks: u64,
    pub pass_score: u64,
    /// Distinct unordered insider pairs with an edge (multi-firm contexts
    /// collapse onto one edge).
    pub edges: u64,
}

/// Weighted undirected co-trading graph over insiders with at least one edge.
#[derive(Debug, Clone)]
pub struct CoTradeGraph {
    nodes: Vec<InsiderId>,
    edges: Vec<Edge>,
    /// Adjacency over node indices, aligned with `nodes`.
    adjacency: Vec<Vec<(usize, f64)>>,
    /// Firms at which each node holds a log, restricted to graph nodes.
    affiliations: Vec<BTreeSet<FirmId>>,
    /// Connected components as sorted node-index lists, largest first.
    components: Vec<Vec<usize>>,
    component_of: Vec<usize>,
    /// Distinct insiders in the input logs (graph nodes are a subset).
    population: usize,
    summary: BuildSummary,
}

/// Per-component size and firm spread, for the size/firm histograms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentInfo {
    pub size: usize,
    pub n_firms: usize,
}

impl CoTradeGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[InsiderId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn adjacency(&self) -> &[Vec<(usize, f64)>] {
        &self.adjacency
    }

    pub fn affiliations(&self) -> &[BTreeSet<FirmId>] {
        &self.affiliations
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn summary(&self) -> &BuildSummary {
        &self.summary
    }

    pub fn node_index(&self, insider: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(insider)).ok()
    }

    /// Connected components as node-index lists, ordered by descending size
    /// then smallest member, members sorted.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component_of(&self, node: usize) -> usize {
        self.component_of[node]
    }

    pub fn giant_component_size(&self) -> usize {
        self.components.first().map_or(0, Vec::len)
    }

    /// Size and distinct-firm count per component (firm spread counts every
    /// passing context of the component's edges).
    pub fn component_info(&self) -> Vec<ComponentInfo> {
        let mut firms: Vec<BTreeSet<&FirmId>> = vec![BTreeSet::new(); self.components.len()];
        for edge in &self.edges {
            let idx = self.component_of[self.node_index(&edge.a).unwrap()];
            for ctx in &edge.contexts {
                firms[idx].insert(&ctx.firm_id);
            }
        }
        self.components
            .iter()
            .zip(firms)
            .map(|(members, f)| ComponentInfo {
                size: members.len(),
                n_firms: f.len(),
            })
            .collect()
    }

    /// Insiders whose incident edges arise from at least two distinct firm
    /// contexts, with the sorted id list.
    pub fn multi_firm_insiders(&self) -> (usize, Vec<InsiderId>) {
        let mut firms_by_node: Vec<BTreeSet<&FirmId>> = vec![BTreeSet::new(); self.nodes.len()];
        for edge in &self.edges {
            let ia = self.node_index(&edge.a).unwrap();
            let ib = self.node_index(&edge.b).unwrap();
            for ctx in &edge.contexts {
                firms_by_node[ia].insert(&ctx.firm_id);
                firms_by_node[ib].insert(&ctx.firm_id);
            }
        }
        let ids: Vec<InsiderId> = self
            .nodes
            .iter()
            .zip(&firms_by_node)
            .filter(|(_, firms)| firms.len() >= 2)
            .map(|(id, _)| id.clone())
            .collect();
        (ids.len(), ids)
    }

    /// Count of edges with weight strictly above the given level.
    pub fn ties_above(&self, level: f64) -> usize {
        self.edges.iter().filter(|e| e.weight > level).count()
    }

    pub fn density(&self) -> Option<f64> {
        let n = self.nodes.len() as f64;
        if n < 2.0 {
            return None;
        }
        Some(2.0 * self.edges.len() as f64 / (n * (n - 1.0)))
    }

    /// Construct a graph directly from weighted edges; used by analyses that
    /// operate on synthetic or externally supplied graphs.
    pub fn from_weighted_edges(edges: Vec<(InsiderId, InsiderId, f64, FirmId)>) -> CoTradeGraph {
        let mut merged: BTreeMap<(InsiderId, InsiderId), Edge> = BTreeMap::new();
        for (u, v, weight, firm) in edges {
            assert!(u != v, "self-loops are not allowed");
            let (a, b) = if u <= v { (u, v) } else { (v, u) };
            let ctx = EdgeContext {
                firm_id: firm.clone(),
                score: weight,
                matched_weeks: 0,
            };
            merged
                .entry((a.clone(), b.clone()))
                .and_modify(|e| {
                    if weight > e.weight {
                        e.weight = weight;
                        e.firm_id = firm.clone();
                    }
                    e.contexts.push(ctx.clone());
                })
                .or_insert(Edge {
                    a,
                    b,
                    weight,
                    firm_id: firm,
                    contexts: vec![ctx],
                });
        }
        let edges: Vec<Edge> = merged.into_values().collect();
        let affiliation_map: BTreeMap<InsiderId, BTreeSet<FirmId>> = edges
            .iter()
            .flat_map(|e| {
                e.contexts.iter().flat_map(move |c| {
                    [(e.a.clone(), c.firm_id.clone()), (e.b.clone(), c.firm_id.clone())]
                })
            })
            .fold(BTreeMap::new(), |mut map, (id, firm)| {
                map.entry(id).or_default().insert(firm);
                map
            });
        let population = affiliation_map.len();
        Self::assemble(edges, &affiliation_map, population, BuildSummary::default())
    }

    fn assemble(
        mut edges: Vec<Edge>,
        affiliation_map: &BTreeMap<InsiderId, BTreeSet<FirmId>>,
        population: usize,
        mut summary: BuildSummary,
    ) -> CoTradeGraph {
        edges.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
        summary.edges = edges.len() as u64;

        let nodes: Vec<InsiderId> = edges
            .iter()
            .flat_map(|e| [e.a.clone(), e.b.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<&str, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();

        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
        for edge in &edges {
            let ia = index[edge.a.as_str()];
            let ib = index[edge.b.as_str()];
            adjacency[ia].push((ib, edge.weight));
            adjacency[ib].push((ia, edge.weight));
        }
        for list in &mut adjacency {
            list.sort_by(|x, y| x.0.cmp(&y.0));
        }

        let affiliations: Vec<BTreeSet<FirmId>> = nodes
            .iter()
            .map(|id| affiliation_map.get(id).cloned().unwrap_or_default())
            .collect();

        // Connected components by BFS over sorted adjacency.
        let mut component_of = vec![usize::MAX; nodes.len()];
        let mut components: Vec<Vec<usize>> = Vec::new();
        for start in 0..nodes.len() {
            if component_of[start] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut queue = std::collections::VecDeque::from([start]);
            component_of[start] = id;
            let mut members = vec![start];
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &adjacency[u] {
                    if component_of[v] == usize::MAX {
                        component_of[v] = id;
                        members.push(v);
                        queue.push_back(v);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components.sort_by(|x, y| y.len().cmp(&x.len()).then(x[0].cmp(&y[0])));
        for (new_id, members) in components.iter().enumerate() {
            for &m in members {
                component_of[m] = new_id;
            }
        }

        CoTradeGraph {
            nodes,
            edges,
            adjacency,
            affiliations,
            components,
            component_of,
            population,
            summary,
        }
    }
}

/// Score every within-firm insider pair and assemble the filtered graph.
///
/// Pairs are enumerated per firm, scored in parallel, and merged in a fixed
/// order, so the edge set does not depend on the thread schedule. A pair
/// sharing several firms keeps the maximum-score edge and records every
/// passing context.
pub fn build_graph(logs: &[InsiderFirmLog], cfg: &EdgeFilterConfig) -> CoTradeGraph {
    assert!(cfg.min_trades >= 1, "min_trades must be at least 1");
    assert!(
        (0.0..=1.0).contains(&cfg.score_threshold),
        "score_threshold must lie in [0, 1]"
    );
    let mut by_firm: BTreeMap<&FirmId, Vec<&InsiderFirmLog>> = BTreeMap::new();
    let mut affiliation_map: BTreeMap<InsiderId, BTreeSet<FirmId>> = BTreeMap::new();
    let mut insiders: BTreeSet<&InsiderId> = BTreeSet::new();
    for log in logs {
        by_firm.entry(&log.firm_id).or_default().push(log);
        insiders.insert(&log.insider_id);
        affiliation_map
            .entry(log.insider_id.clone())
            .or_default()
            .insert(log.firm_id.clone());
    }
    let population = insiders.len();

    struct FirmOutcome {
        contexts: Vec<(InsiderId, InsiderId, EdgeContext)>,
        summary: BuildSummary,
    }

    let firm_outcomes: Vec<FirmOutcome> = by_firm
        .par_iter()
        .map(|(firm, firm_logs)| {
            let mut sorted: Vec<&&InsiderFirmLog> = firm_logs.iter().collect();
            sorted.sort_by(|x, y| x.insider_id.cmp(&y.insider_id));
            let mut out = FirmOutcome {
                contexts: Vec::new(),
                summary: BuildSummary::default(),
            };
            for (i, x) in sorted.iter().enumerate() {
                for y in &sorted[i + 1..] {
                    if x.insider_id == y.insider_id {
                        continue; // duplicate log guard; same insider is never paired
                    }
                    out.summary.pairs_examined += 1;
                    if x.n_trades() < cfg.min_trades || y.n_trades() < cfg.min_trades {
                        continue;
                    }
                    out.summary.pass_min_trades += 1;
                    if cfg.require_tenure_overlap && !x.tenure_overlaps(y) {
                        continue;
                    }
                    out.summary.pass_tenure_overlap += 1;
                    let base = combined_similarity(x, y, &cfg.kernel)
                        .expect("logs are non-empty by construction");
                    if base.matched_weeks < cfg.min_overlap_weeks {
                        continue;
                    }
                    out.summary.pass_matched_weeks += 1;
                    let score = match cfg.method {
                        SimilarityMethod::BestMatch => base.combined,
                        SimilarityMethod::Assignment => {
                            assignment_similarity(x, y, &cfg.kernel)
                                .expect("logs are non-empty by construction")
                                .combined
                        }
                    };
                    if score > cfg.score_threshold {
                        out.summary.pass_score += 1;
                        out.contexts.push((
                            x.insider_id.clone(),
                            y.insider_id.clone(),
                            EdgeContext {
                                firm_id: (*firm).clone(),
                                score,
                                matched_weeks: base.matched_weeks,
                            },
                        ));
                    }
                }
            }
            out
        })
        .collect();

    let mut summary = BuildSummary::default();
    let mut merged: BTreeMap<(InsiderId, InsiderId), Vec<EdgeContext>> = BTreeMap::new();
    for outcome in firm_outcomes {
        summary.pairs_examined += outcome.summary.pairs_examined;
        summary.pass_min_trades += outcome.summary.pass_min_trades;
        summary.pass_tenure_overlap += outcome.summary.pass_tenure_overlap;
        summary.pass_matched_weeks += outcome.summary.pass_matched_weeks;
        summary.pass_score += outcome.summary.pass_score;
        for (u, v, ctx) in outcome.contexts {
            let key = if u <= v { (u, v) } else { (v, u) };
            merged.entry(key).or_default().push(ctx);
        }
    }

    let edges: Vec<Edge> = merged
        .into_iter()
        .map(|((a, b), mut contexts)| {
            contexts.sort_by(|x, y| x.firm_id.cmp(&y.firm_id));
            let best = contexts
                .iter()
                .max_by(|x, y| {
                    x.score
                        .partial_cmp(&y.score)
                        .unwrap()
                        .then_with(|| y.firm_id.cmp(&x.firm_id))
                })
                .unwrap()
                .clone();
            Edge {
                a,
                b,
                weight: best.score,
                firm_id: best.firm_id,
                contexts,
            }
        })
        .collect();

    CoTradeGraph::assemble(edges, &affiliation_map, population, summary)
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl CoTradeGraph {
    /// GraphML export with edge attributes `w` (weight) and `firm`.
    pub fn to_graphml(&self) -> String {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
        out.push_str("  <key id=\"w\" for=\"edge\" attr.name=\"w\" attr.type=\"double\"/>\n");
        out.push_str("  <key id=\"firm\" for=\"edge\" attr.name=\"firm\" attr.type=\"string\"/>\n");
        out.push_str("  <graph id=\"G\" edgedefault=\"undirected\">\n");
        for node in &self.nodes {
            out.push_str(&format!("    <node id=\"{}\"/>\n", xml_escape(node)));
        }
        for edge in &self.edges {
            out.push_str(&format!(
                "    <edge source=\"{}\" target=\"{}\"><data key=\"w\">{}</data><data key=\"firm\">{}</data></edge>\n",
                xml_escape(&edge.a),
                xml_escape(&edge.b),
                edge.weight,
                xml_escape(&edge.firm_id),
            ));
        }
        out.push_str("  </graph>\n</graphml>\n");
        out
    }

    /// JSON adjacency export: nodes with affiliations plus an edge list.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "nodes": self.nodes.iter().enumerate().map(|(i, id)| {
                json!({
                    "id": id,
                    "firms": self.affiliations[i].iter().collect::<Vec<_>>(),
                    "component": self.component_of[i],
                })
            }).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|e| {
                json!({
                    "source": e.a,
                    "target": e.b,
                    "weight": e.weight,
                    "firm": e.firm_id,
                    "contexts": e.contexts,
                })
            }).collect::<Vec<_>>(),
        })
    }

    /// Edge-list CSV with header `u,v,weight,firm`.
    pub fn to_edge_csv(&self) -> String {
        let mut out = String::from("u,v,weight,firm\n");
        for edge in &self.edges {
            out.push_str(&format!(
                "{},{},{},{}\n",
                edge.a, edge.b, edge.weight, edge.firm_id
            ));
        }
        out
    }
}
