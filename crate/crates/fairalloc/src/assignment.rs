//! Maximum-weight perfect matching on a dense square bipartite graph.
//!
//! Shortest-augmenting-path Hungarian algorithm with dual potentials, O(m^3).
//! Used as the linear maximization oracle over the Birkhoff polytope and to
//! peel permutations during the doubly-stochastic decomposition.

/// Returns `perm` with `perm[agent] = resource` maximizing
/// `sum_agent weights[agent * m + resource]` over all permutations.
///
/// `weights` is column-major with agent-major blocks: entry `(resource,
/// agent)` lives at `weights[agent * m + resource]`.
pub(crate) fn max_weight_perfect_matching(weights: &[f64], m: usize) -> Vec<usize> {
    assert_eq!(weights.len(), m * m);
    // Minimize the negated weights with the classical potential scheme;
    // indices are shifted by one so row/column 0 acts as a sentinel.
    let cost = |agent: usize, resource: usize| -> f64 { -weights[agent * m + resource] };
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; m + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut matched_agent = vec![0usize; m + 1]; // per resource (1-based)
    let mut way = vec![0usize; m + 1];

    for agent in 1..=m {
        matched_agent[0] = agent;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_agent[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_agent[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_agent[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_agent[j0] = matched_agent[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; m];
    for resource in 1..=m {
        perm[matched_agent[resource] - 1] = resource - 1;
    }
    perm
}
