//! Exact maximum-weight bipartite matching via augmenting paths.
//!
//! Weights are integers so optima are exact and tie-breaking is
//! deterministic. Instances here are per-pair trade logs, i.e. tiny, so a
//! Bellman-Ford search per augmentation is more than fast enough.

/// Candidate edge between `left` and `right` with a nonnegative integer weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchEdge {
    pub left: usize,
    pub right: usize,
    pub weight: i64,
}

/// An injective matching and its total weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// Matched `(left, right)` pairs, sorted by left index.
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: i64,
}

/// Computes a maximum-total-weight injective matching.
///
/// Repeatedly augments along the maximum-gain alternating path; stops when no
/// path has positive gain, at which point the matching weight is maximal.
/// Augmenting along maximum-gain paths keeps every intermediate matching
/// extreme for its cardinality, so the gain search is free of positive cycles.
pub fn max_weight_matching(n_left: usize, n_right: usize, edges: &[MatchEdge]) -> Matching {
    let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n_left];
    for e in edges {
        assert!(e.left < n_left && e.right < n_right, "edge endpoint out of range");
        adj[e.left].push((e.right, e.weight));
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    let weight_of = |adj: &[Vec<(usize, i64)>], i: usize, j: usize| -> i64 {
        adj[i]
            .iter()
            .find(|&&(jj, _)| jj == j)
            .map(|&(_, w)| w)
            .unwrap_or(0)
    };

    let mut match_left: Vec<Option<usize>> = vec![None; n_left];
    let mut match_right: Vec<Option<usize>> = vec![None; n_right];

    loop {
        // Gain of the best alternating path from any free left node that is
        // currently standing on left node i, plus the predecessor links
        // needed to replay the path: i was entered through the matched edge
        // of right node via_right[i], fed by left node via_left[i].
        let mut dist: Vec<Option<i64>> = match_left
            .iter()
            .map(|m| if m.is_none() { Some(0) } else { None })
            .collect();
        let mut via_right: Vec<Option<usize>> = vec![None; n_left];
        let mut via_left: Vec<Option<usize>> = vec![None; n_left];

        for _round in 0..=n_left {
            let mut changed = false;
            for i in 0..n_left {
                let Some(d) = dist[i] else { continue };
                for &(j, w) in &adj[i] {
                    if match_left[i] == Some(j) {
                        continue;
                    }
                    let Some(i2) = match_right[j] else { continue };
                    let gain = d + w - weight_of(&adj, i2, j);
                    if dist[i2].map_or(true, |old| gain > old) {
                        dist[i2] = Some(gain);
                        via_right[i2] = Some(j);
                        via_left[i2] = Some(i);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        // Best terminal hop onto a free right node.
        let mut best: Option<(i64, usize, usize)> = None; // (gain, left, right)
        for i in 0..n_left {
            let Some(d) = dist[i] else { continue };
            for &(j, w) in &adj[i] {
                if match_right[j].is_some() {
                    continue;
                }
                let gain = d + w;
                if best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, i, j));
                }
            }
        }
        let Some((gain, end_left, end_right)) = best else { break };
        if gain <= 0 {
            break;
        }

        // Replay the path backwards, reassigning each right node on it. The
        // path visits each left node once; a longer walk would mean the gain
        // search found a cycle, which max-gain augmentation rules out.
        let mut i = end_left;
        let mut j = end_right;
        for steps in 0.. {
            assert!(steps <= n_left, "augmenting path replay cycled");
            let prev = via_right[i].zip(via_left[i]);
            match_left[i] = Some(j);
            match_right[j] = Some(i);
            match prev {
                Some((pj, pi)) => {
                    j = pj;
                    i = pi;
                }
                None => break,
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = match_left
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|j| (i, j)))
        .collect();
    pairs.sort_unstable();
    let total_weight = pairs.iter().map(|&(i, j)| weight_of(&adj, i, j)).sum();
    Matching { pairs, total_weight }
}
