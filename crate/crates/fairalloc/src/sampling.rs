//! Randomized rounding of fractional allocations to integral ones whose
//! expectation matches the fractional point exactly.
//!
//! * Cache configurations: Madow's systematic sampling over the inclusion
//!   probabilities.
//! * Job distributions: a single categorical draw.
//! * Fractional matchings: decompose into permutation matrices
//!   (Birkhoff-von-Neumann) and draw one with the decomposition weights.

use crate::error::{Error, Result};
use crate::feasible::{FeasibleFamily, MEMBERSHIP_TOL};
use crate::rng::SplitMix64;

/// A 0/1 allocation of the family's decision shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntegralAllocation {
    /// Exactly `k` cached files (sorted indices).
    CacheSet(Vec<usize>),
    /// The machine receiving the whole job.
    Machine(usize),
    /// Permutation: agent `a` holds resource `perm[a]`.
    Matching(Vec<usize>),
}

impl IntegralAllocation {
    /// Expand to the family's flat decision vector.
    pub fn to_point(&self, family: &FeasibleFamily) -> Vec<f64> {
        let mut out = vec![0.0; family.decision_dim()];
        match (self, family) {
            (IntegralAllocation::CacheSet(set), FeasibleFamily::SharedCappedSimplex { .. }) => {
                for &i in set {
                    out[i] = 1.0;
                }
            }
            (IntegralAllocation::Machine(i), FeasibleFamily::JobSimplex { .. }) => {
                out[*i] = 1.0;
            }
            (IntegralAllocation::Matching(perm), FeasibleFamily::BirkhoffPolytope { side }) => {
                for (agent, &resource) in perm.iter().enumerate() {
                    out[agent * side + resource] = 1.0;
                }
            }
            _ => panic!("integral allocation does not match family {family:?}"),
        }
        out
    }
}

/// Madow's systematic sampling: a `k`-subset whose inclusion probabilities
/// equal `p` exactly, driven by a single uniform draw `u` in `[0, 1)`.
///
/// With prefix sums `P_0 = 0, P_j = P_{j-1} + p_j`, element `j` is selected
/// iff `P_{j-1} <= u + i < P_j` for some `i` in `{0, ..., k-1}`.
pub fn madow_sample(p: &[f64], k: usize, u: f64) -> Result<Vec<usize>> {
    if k == 0 || k > p.len() {
        return Err(Error::Domain(format!(
            "sample size k={k} invalid for {} inclusion probabilities",
            p.len()
        )));
    }
    if !(0.0..1.0).contains(&u) {
        return Err(Error::Domain(format!("uniform draw must lie in [0,1), got {u}")));
    }
    let mut sum = 0.0;
    for &pi in p {
        if !pi.is_finite() || pi < -MEMBERSHIP_TOL || pi > 1.0 + MEMBERSHIP_TOL {
            return Err(Error::Domain(format!(
                "inclusion probability {pi} outside [0, 1]"
            )));
        }
        sum += pi;
    }
    if (sum - k as f64).abs() > 1e-9 * k as f64 {
        return Err(Error::Domain(format!(
            "inclusion probabilities sum to {sum}, expected {k}"
        )));
    }
    // Renormalize float drift so the prefix sums end exactly at k.
    let scale = k as f64 / sum;
    let mut prefix = Vec::with_capacity(p.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &pi in p {
        acc += pi.clamp(0.0, 1.0) * scale;
        prefix.push(acc);
    }
    let n = p.len();
    prefix[n] = k as f64;

    // Successive targets differ by one and every prefix gap is at most one,
    // so the selected indices are strictly increasing: exactly k distinct.
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let target = u + i as f64;
        let j = prefix.partition_point(|&x| x <= target) - 1;
        out.push(j.min(n - 1));
    }
    assert!(
        out.windows(2).all(|w| w[0] < w[1]),
        "systematic draw must return k distinct items"
    );
    Ok(out)
}

/// Decompose an (approximately) doubly stochastic matrix into a convex
/// combination of permutation matrices by greedy vertex peeling:
/// find a permutation supported on the positive entries, subtract the
/// minimum entry along it, repeat.
///
/// Returns `(coefficient, permutation)` pairs; `permutation[agent] = resource`.
/// The matrix is column-major with agent-major blocks, as in
/// [`FeasibleFamily::BirkhoffPolytope`] decision vectors.
pub fn bvn_decompose(matrix: &[f64], side: usize, tol: f64) -> Result<Vec<(f64, Vec<usize>)>> {
    let m = side;
    if matrix.len() != m * m {
        return Err(Error::Dimension(format!(
            "matrix has {} entries, expected {}",
            matrix.len(),
            m * m
        )));
    }
    if matrix.iter().any(|&x| !x.is_finite() || x < -tol || x > 1.0 + tol) {
        return Err(Error::Domain("matrix entries must lie in [0, 1]".into()));
    }
    for c in 0..m {
        let s: f64 = matrix[c * m..(c + 1) * m].iter().sum();
        if (s - 1.0).abs() > tol {
            return Err(Error::Domain(format!("column {c} sums to {s}, not 1")));
        }
    }
    for r in 0..m {
        let s: f64 = (0..m).map(|c| matrix[c * m + r]).sum();
        if (s - 1.0).abs() > tol {
            return Err(Error::Domain(format!("row {r} sums to {s}, not 1")));
        }
    }

    let mut residual: Vec<f64> = matrix.iter().map(|&x| x.clamp(0.0, 1.0)).collect();
    let mut terms: Vec<(f64, Vec<usize>)> = Vec::new();
    let max_terms = m * m + 2;
    loop {
        for x in residual.iter_mut() {
            if *x < 1e-13 {
                *x = 0.0;
            }
        }
        let mass: f64 = residual.iter().sum::<f64>() / m as f64;
        if mass <= 1e-10 {
            break;
        }
        let perm = support_perfect_matching(&residual, m).ok_or_else(|| {
            Error::Infeasible("no permutation supported on the residual matrix".into())
        })?;
        let theta = perm
            .iter()
            .enumerate()
            .map(|(a, &r)| residual[a * m + r])
            .fold(f64::INFINITY, f64::min);
        for (a, &r) in perm.iter().enumerate() {
            residual[a * m + r] -= theta;
        }
        terms.push((theta, perm));
        if terms.len() > max_terms {
            return Err(Error::NonConvergence(
                "doubly stochastic peeling exceeded its term budget".into(),
                mass,
            ));
        }
    }
    Ok(terms)
}

/// Perfect matching restricted to entries above the support threshold.
/// Kuhn's augmenting paths; deterministic scan order.
fn support_perfect_matching(matrix: &[f64], m: usize) -> Option<Vec<usize>> {
    const SUPPORT: f64 = 1e-13;
    fn try_agent(
        agent: usize,
        matrix: &[f64],
        m: usize,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for resource in 0..m {
            if matrix[agent * m + resource] > SUPPORT && !seen[resource] {
                seen[resource] = true;
                let free = match owner[resource] {
                    None => true,
                    Some(prev) => try_agent(prev, matrix, m, seen, owner),
                };
                if free {
                    owner[resource] = Some(agent);
                    return true;
                }
            }
        }
        false
    }
    let mut owner: Vec<Option<usize>> = vec![None; m];
    for agent in 0..m {
        let mut seen = vec![false; m];
        if !try_agent(agent, matrix, m, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut perm = vec![0usize; m];
    for (resource, agent) in owner.iter().enumerate() {
        perm[agent.unwrap()] = resource;
    }
    Some(perm)
}

/// Draw an integral allocation with expectation equal to the feasible point `y`.
pub fn sample_integral(
    family: &FeasibleFamily,
    y: &[f64],
    rng: &mut SplitMix64,
) -> Result<IntegralAllocation> {
    if !family.is_member(y, MEMBERSHIP_TOL * 10.0) {
        return Err(Error::Infeasible(format!(
            "point is not in the {} family",
            family.tag()
        )));
    }
    match *family {
        FeasibleFamily::SharedCappedSimplex { capacity, .. } => {
            let set = madow_sample(y, capacity, rng.next_f64())?;
            Ok(IntegralAllocation::CacheSet(set))
        }
        FeasibleFamily::JobSimplex { .. } => {
            let total: f64 = y.iter().sum();
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut choice = y.len() - 1;
            for (i, &p) in y.iter().enumerate() {
                acc += p;
                if target < acc {
                    choice = i;
                    break;
                }
            }
            Ok(IntegralAllocation::Machine(choice))
        }
        FeasibleFamily::BirkhoffPolytope { side } => {
            let terms = bvn_decompose(y, side, 1e-7)?;
            let total: f64 = terms.iter().map(|(c, _)| c).sum();
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut choice = terms.len() - 1;
            for (i, (c, _)) in terms.iter().enumerate() {
                acc += c;
                if target < acc {
                    choice = i;
                    break;
                }
            }
            Ok(IntegralAllocation::Matching(terms[choice].1.clone()))
        }
    }
}

/// One permutation drawn via an explicit decomposition; exposed so callers
/// that already hold a decomposition can reuse it across draws.
pub fn sample_from_decomposition(
    terms: &[(f64, Vec<usize>)],
    rng: &mut SplitMix64,
) -> IntegralAllocation {
    let total: f64 = terms.iter().map(|(c, _)| c).sum();
    let target = rng.next_f64() * total;
    let mut acc = 0.0;
    for (c, perm) in terms {
        acc += c;
        if target < acc {
            return IntegralAllocation::Matching(perm.clone());
        }
    }
    IntegralAllocation::Matching(terms.last().unwrap().1.clone())
}
