//! Geometry of the three allocation polytopes.
//!
//! Each family owns one flat decision vector:
//!
//! * [`FeasibleFamily::SharedCappedSimplex`] — cache configurations
//!   `{ y in [0,1]^N : sum y = k }`, one vector shared by all users.
//! * [`FeasibleFamily::JobSimplex`] — probability distributions over `m`
//!   machines.
//! * [`FeasibleFamily::BirkhoffPolytope`] — `m x m` doubly stochastic
//!   matrices stored column-major (column `i` is agent `i`'s vector).
//!
//! Projection, linear maximization and the diameter bound are the only
//! geometric primitives the online policy and the offline solvers need.

use crate::assignment::max_weight_perfect_matching;
use crate::error::{Error, Result};

/// Membership tolerance used by feasibility predicates throughout the crate.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Tag naming a family in trace files and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyTag {
    Cache,
    Sched,
    Match,
}

impl FamilyTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyTag::Cache => "cache",
            FamilyTag::Sched => "sched",
            FamilyTag::Match => "match",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cache" => Ok(FamilyTag::Cache),
            "sched" => Ok(FamilyTag::Sched),
            "match" => Ok(FamilyTag::Match),
            other => Err(Error::Domain(format!("unknown family tag {other:?}"))),
        }
    }
}

impl std::fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibleFamily {
    /// Shared cache of `capacity` slots over a `library` of files, `users` agents.
    SharedCappedSimplex {
        library: usize,
        capacity: usize,
        users: usize,
    },
    /// One job per round split over `machines` agents.
    JobSimplex { machines: usize },
    /// Fractional matchings of `side` agents to `side` resources.
    BirkhoffPolytope { side: usize },
}

impl FeasibleFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FeasibleFamily::SharedCappedSimplex {
                library,
                capacity,
                users,
            } => {
                if library == 0 || users == 0 {
                    return Err(Error::Domain("cache family needs N >= 1 and m >= 1".into()));
                }
                if capacity == 0 || capacity > library {
                    return Err(Error::Domain(format!(
                        "cache capacity must satisfy 1 <= k <= N, got k={capacity}, N={library}"
                    )));
                }
            }
            FeasibleFamily::JobSimplex { machines } => {
                if machines == 0 {
                    return Err(Error::Domain("job simplex needs m >= 1".into()));
                }
            }
            FeasibleFamily::BirkhoffPolytope { side } => {
                if side == 0 {
                    return Err(Error::Domain("Birkhoff polytope needs m >= 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn tag(&self) -> FamilyTag {
        match self {
            FeasibleFamily::SharedCappedSimplex { .. } => FamilyTag::Cache,
            FeasibleFamily::JobSimplex { .. } => FamilyTag::Sched,
            FeasibleFamily::BirkhoffPolytope { .. } => FamilyTag::Match,
        }
    }

    /// Number of agents sharing the allocation.
    pub fn agents(&self) -> usize {
        match *self {
            FeasibleFamily::SharedCappedSimplex { users, .. } => users,
            FeasibleFamily::JobSimplex { machines } => machines,
            FeasibleFamily::BirkhoffPolytope { side } => side,
        }
    }

    /// Length of each agent's demand vector.
    pub fn demand_dim(&self) -> usize {
        match *self {
            FeasibleFamily::SharedCappedSimplex { library, .. } => library,
            FeasibleFamily::JobSimplex { .. } => 1,
            FeasibleFamily::BirkhoffPolytope { side } => side,
        }
    }

    /// Length of the flat decision vector.
    pub fn decision_dim(&self) -> usize {
        match *self {
            FeasibleFamily::SharedCappedSimplex { library, .. } => library,
            FeasibleFamily::JobSimplex { machines } => machines,
            FeasibleFamily::BirkhoffPolytope { side } => side * side,
        }
    }

    /// Total mass carried by any member (`k`, `1`, or `m`).
    pub fn total_mass(&self) -> f64 {
        match *self {
            FeasibleFamily::SharedCappedSimplex { capacity, .. } => capacity as f64,
            FeasibleFamily::JobSimplex { .. } => 1.0,
            FeasibleFamily::BirkhoffPolytope { side } => side as f64,
        }
    }

    /// The scale `mu` of the all-ones point guaranteed to be feasible.
    pub fn canonical_mu(&self) -> f64 {
        match *self {
            FeasibleFamily::SharedCappedSimplex {
                library, capacity, ..
            } => capacity as f64 / library as f64,
            FeasibleFamily::JobSimplex { machines } => 1.0 / machines as f64,
            FeasibleFamily::BirkhoffPolytope { side } => 1.0 / side as f64,
        }
    }

    /// Uniform feasible starting point `mu * 1`.
    pub fn uniform_point(&self) -> Vec<f64> {
        vec![self.canonical_mu(); self.decision_dim()]
    }

    /// Upper bound on the Euclidean diameter of the feasible set.
    pub fn diameter(&self) -> f64 {
        match *self {
            FeasibleFamily::SharedCappedSimplex { capacity, .. } => (2.0 * capacity as f64).sqrt(),
            FeasibleFamily::JobSimplex { .. } => 2f64.sqrt(),
            FeasibleFamily::BirkhoffPolytope { side } => (2.0 * side as f64).sqrt(),
        }
    }

    /// Membership predicate at tolerance `tol`.
    pub fn is_member(&self, point: &[f64], tol: f64) -> bool {
        if point.len() != self.decision_dim() {
            return false;
        }
        if point.iter().any(|&x| !x.is_finite()) {
            return false;
        }
        match *self {
            FeasibleFamily::SharedCappedSimplex { capacity, .. } => {
                let in_box = point.iter().all(|&x| x >= -tol && x <= 1.0 + tol);
                let sum: f64 = point.iter().sum();
                in_box && (sum - capacity as f64).abs() <= tol * capacity.max(1) as f64
            }
            FeasibleFamily::JobSimplex { .. } => {
                let nonneg = point.iter().all(|&x| x >= -tol);
                let sum: f64 = point.iter().sum();
                nonneg && (sum - 1.0).abs() <= tol
            }
            FeasibleFamily::BirkhoffPolytope { side } => {
                let m = side;
                if !point.iter().all(|&x| x >= -tol && x <= 1.0 + tol) {
                    return false;
                }
                for c in 0..m {
                    let s: f64 = point[c * m..(c + 1) * m].iter().sum();
                    if (s - 1.0).abs() > tol {
                        return false;
                    }
                }
                for r in 0..m {
                    let s: f64 = (0..m).map(|c| point[c * m + r]).sum();
                    if (s - 1.0).abs() > tol {
                        return false;
                    }
                }
                true
            }
        }
    }

    /// Euclidean projection onto the feasible set.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.decision_dim() {
            return Err(Error::Dimension(format!(
                "projection input has length {}, expected {}",
                v.len(),
                self.decision_dim()
            )));
        }
        if v.iter().any(|&x| !x.is_finite()) {
            return Err(Error::Domain("projection input must be finite".into()));
        }
        Ok(match *self {
            FeasibleFamily::SharedCappedSimplex { capacity, .. } => {
                let mut out = v.to_vec();
                project_capped_simplex(&mut out, capacity as f64);
                out
            }
            FeasibleFamily::JobSimplex { .. } => {
                let mut out = v.to_vec();
                project_capped_simplex(&mut out, 1.0);
                out
            }
            FeasibleFamily::BirkhoffPolytope { side } => project_birkhoff(v, side),
        })
    }

    /// Vertex maximizing the linear objective `<g, y>`.
    ///
    /// Ties break toward lower indices so repeated runs stay reproducible.
    pub fn lmo(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.decision_dim() {
            return Err(Error::Dimension(format!(
                "lmo input has length {}, expected {}",
                g.len(),
                self.decision_dim()
            )));
        }
        Ok(match *self {
            FeasibleFamily::SharedCappedSimplex { capacity, .. } => {
                let idx = top_k_indices(g, capacity);
                let mut out = vec![0.0; g.len()];
                for i in idx {
                    out[i] = 1.0;
                }
                out
            }
            FeasibleFamily::JobSimplex { .. } => {
                let best = argmax(g);
                let mut out = vec![0.0; g.len()];
                out[best] = 1.0;
                out
            }
            FeasibleFamily::BirkhoffPolytope { side } => {
                let perm = max_weight_perfect_matching(g, side);
                let mut out = vec![0.0; g.len()];
                for (agent, resource) in perm.iter().enumerate() {
                    out[agent * side + resource] = 1.0;
                }
                out
            }
        })
    }
}

/// Index of the largest entry; lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Indices of the `k` largest entries; lowest index wins ties.
pub(crate) fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let n = values.len();
    debug_assert!(k <= n);
    if k == n {
        return (0..n).collect();
    }
    // Total order (value desc, index asc) makes the selected set unique,
    // so an unstable partition is still deterministic.
    let cmp = |&a: &usize, &b: &usize| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap()
            .then_with(|| a.cmp(&b))
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.select_nth_unstable_by(k, cmp);
    order.truncate(k);
    order.sort_unstable();
    order
}

/// In-place projection onto `{ y in [0,1]^n : sum y = mass }`.
///
/// Solves for the shift `lambda` in `sum_j clip(v_j + lambda, 0, 1) = mass`
/// by safeguarded Newton bisection; the sum function is piecewise linear and
/// non-decreasing in `lambda`, so the iteration is monotone and needs no sort.
pub fn project_capped_simplex(v: &mut [f64], mass: f64) {
    let n = v.len();
    debug_assert!(mass >= 0.0 && mass <= n as f64);
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for &x in v.iter() {
        vmin = vmin.min(x);
        vmax = vmax.max(x);
    }
    let mut lo = -vmax; // sum = 0 here
    let mut hi = 1.0 - vmin; // sum = n here
    let eval = |v: &[f64], lambda: f64| -> (f64, usize) {
        let mut s = 0.0;
        let mut active = 0usize;
        for &x in v {
            let y = x + lambda;
            if y <= 0.0 {
                // clipped at zero
            } else if y >= 1.0 {
                s += 1.0;
            } else {
                s += y;
                active += 1;
            }
        }
        (s, active)
    };
    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (s, active) = eval(v, lambda);
        let gap = s - mass;
        if gap.abs() <= 1e-12 * mass.max(1.0) {
            break;
        }
        if gap < 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let newton = if active > 0 {
            lambda - gap / active as f64
        } else {
            f64::NAN
        };
        lambda = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * (1.0 + lambda.abs()) {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = (*x + lambda).clamp(0.0, 1.0);
    }
}

/// A random feasible point built without the projection routine, so
/// projection audits have independent witnesses: convex combinations of
/// random vertices for the cache, normalized exponentials on the simplex,
/// Sinkhorn balancing for the matchings.
pub fn random_feasible_point(family: &FeasibleFamily, rng: &mut crate::rng::SplitMix64) -> Vec<f64> {
    match *family {
        FeasibleFamily::SharedCappedSimplex {
            library, capacity, ..
        } => {
            let vertices = 8;
            let mut weights: Vec<f64> = (0..vertices)
                .map(|_| -(1.0 - rng.next_f64()).ln())
                .collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            let mut point = vec![0.0; library];
            let mut pool: Vec<usize> = (0..library).collect();
            for w in weights {
                // Partial Fisher-Yates draw of a random k-subset.
                for i in 0..capacity {
                    let j = i + rng.next_below((library - i) as u64) as usize;
                    pool.swap(i, j);
                }
                for &idx in &pool[..capacity] {
                    point[idx] += w;
                }
            }
            point
        }
        FeasibleFamily::JobSimplex { machines } => {
            let mut point: Vec<f64> = (0..machines)
                .map(|_| -(1.0 - rng.next_f64()).ln())
                .collect();
            let total: f64 = point.iter().sum();
            for x in &mut point {
                *x /= total;
            }
            point
        }
        FeasibleFamily::BirkhoffPolytope { side } => random_doubly_stochastic(side, rng),
    }
}

/// Sinkhorn balancing of a strictly positive random matrix; doubly
/// stochastic to well below the membership tolerance.
pub fn random_doubly_stochastic(side: usize, rng: &mut crate::rng::SplitMix64) -> Vec<f64> {
    let m = side;
    let mut mat: Vec<f64> = (0..m * m).map(|_| 0.05 + rng.next_f64()).collect();
    for _ in 0..500 {
        for c in 0..m {
            let s: f64 = mat[c * m..(c + 1) * m].iter().sum();
            for x in &mut mat[c * m..(c + 1) * m] {
                *x /= s;
            }
        }
        for r in 0..m {
            let s: f64 = (0..m).map(|c| mat[c * m + r]).sum();
            for c in 0..m {
                mat[c * m + r] /= s;
            }
        }
    }
    mat
}

/// Dykstra's alternating projections between the row-constraint and
/// column-constraint sets of the Birkhoff polytope. Each half-step is a
/// capped-simplex projection with unit mass.
fn project_birkhoff(v: &[f64], m: usize) -> Vec<f64> {
    let dim = m * m;
    let mut x = v.to_vec();
    let mut p = vec![0.0; dim]; // correction for the column half-step
    let mut q = vec![0.0; dim]; // correction for the row half-step
    let mut row_buf = vec![0.0; m];
    let mut prev = vec![0.0; dim];
    for _ in 0..10_000 {
        prev.copy_from_slice(&x);
        // Columns: each agent's vector sums to one.
        for c in 0..m {
            let col = &mut x[c * m..(c + 1) * m];
            for (xi, pi) in col.iter_mut().zip(&p[c * m..(c + 1) * m]) {
                *xi += *pi;
            }
            let before: Vec<f64> = col.to_vec();
            project_capped_simplex(col, 1.0);
            for ((pi, b), xi) in p[c * m..(c + 1) * m].iter_mut().zip(before).zip(col.iter()) {
                *pi = b - *xi;
            }
        }
        // Rows: each resource's incoming mass sums to one.
        for r in 0..m {
            for c in 0..m {
                row_buf[c] = x[c * m + r] + q[c * m + r];
            }
            let before = row_buf.clone();
            project_capped_simplex(&mut row_buf, 1.0);
            for c in 0..m {
                q[c * m + r] = before[c] - row_buf[c];
                x[c * m + r] = row_buf[c];
            }
        }
        let change = x
            .iter()
            .zip(prev.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if change < 1e-10 {
            break;
        }
    }
    x
}
