//! Shared domain types: demands, allocations, cumulative rewards, and the
//! structural assumptions every experiment relies on.
//!
//! Demands are stored per agent as either a one-hot index or a dense vector;
//! the semantics are always the dense `N x m` matrix whose column `i` is
//! agent `i`'s demand.

use crate::error::{Error, Result};
use crate::fairness::check_alpha;
use crate::feasible::{FamilyTag, FeasibleFamily, MEMBERSHIP_TOL};

/// Parameters governing one experiment.
#[derive(Debug, Clone)]
pub struct FairnessParams {
    /// Fairness exponent in `[0, 1)`.
    pub alpha: f64,
    /// Lower bound on the l1 norm of every demand column.
    pub delta: f64,
    /// Scale of the uniform feasible point.
    pub mu: f64,
    /// Per-agent weights; `None` means all ones.
    pub weights: Option<Vec<f64>>,
}

impl FairnessParams {
    pub fn new(alpha: f64, delta: f64, mu: f64, weights: Option<Vec<f64>>) -> Result<Self> {
        check_alpha(alpha)?;
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Domain(format!("delta must lie in (0, 1], got {delta}")));
        }
        if !(mu > 0.0) {
            return Err(Error::Domain(format!("mu must be positive, got {mu}")));
        }
        if let Some(w) = &weights {
            if w.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(Error::Domain("weights must be nonnegative".into()));
            }
        }
        Ok(Self {
            alpha,
            delta,
            mu,
            weights,
        })
    }

    /// Check that `mu * 1` is feasible for `family` (the uniform-point
    /// assumption). The equality constraints pin `mu` to the canonical value.
    pub fn check_mu_feasible(&self, family: &FeasibleFamily) -> Result<()> {
        let canonical = family.canonical_mu();
        if (self.mu - canonical).abs() > MEMBERSHIP_TOL {
            return Err(Error::Domain(format!(
                "mu = {} but the uniform feasible point of {} requires mu = {}",
                self.mu,
                family.tag(),
                canonical
            )));
        }
        Ok(())
    }
}

/// One agent's demand vector.
#[derive(Debug, Clone, PartialEq)]
pub enum DemandColumn {
    /// Standard basis vector `e_j` (0-based index).
    OneHot(usize),
    /// Dense nonnegative vector of length `N`.
    Dense(Vec<f64>),
}

impl DemandColumn {
    pub fn l1(&self) -> f64 {
        match self {
            DemandColumn::OneHot(_) => 1.0,
            DemandColumn::Dense(v) => v.iter().sum(),
        }
    }

    /// Inner product with an allocation slice of length `N`.
    pub fn dot(&self, y: &[f64]) -> f64 {
        match self {
            DemandColumn::OneHot(j) => y[*j],
            DemandColumn::Dense(v) => v.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }

    /// `out += c * x` where `x` is this column.
    pub fn axpy(&self, c: f64, out: &mut [f64]) {
        match self {
            DemandColumn::OneHot(j) => out[*j] += c,
            DemandColumn::Dense(v) => {
                for (o, &x) in out.iter_mut().zip(v) {
                    *o += c * x;
                }
            }
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        match self {
            DemandColumn::OneHot(j) => {
                let mut v = vec![0.0; n];
                v[*j] = 1.0;
                v
            }
            DemandColumn::Dense(v) => v.clone(),
        }
    }
}

/// The `N x m` demand matrix for one round; column `i` is agent `i`'s demand.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandMatrix {
    n: usize,
    columns: Vec<DemandColumn>,
}

impl DemandMatrix {
    /// Entries must be nonnegative and finite; the l1-norm bounds of the
    /// structural assumption are checked by [`validate_trace`], not here, so
    /// that out-of-range traces can still be loaded and diagnosed.
    pub fn new(n: usize, columns: Vec<DemandColumn>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Dimension("demand matrix needs at least one agent".into()));
        }
        for (i, col) in columns.iter().enumerate() {
            match col {
                DemandColumn::OneHot(j) => {
                    if *j >= n {
                        return Err(Error::Dimension(format!(
                            "agent {i}: one-hot index {j} out of range for N={n}"
                        )));
                    }
                }
                DemandColumn::Dense(v) => {
                    if v.len() != n {
                        return Err(Error::Dimension(format!(
                            "agent {i}: dense demand has length {}, expected {n}",
                            v.len()
                        )));
                    }
                    if v.iter().any(|&x| !x.is_finite() || x < 0.0) {
                        return Err(Error::Domain(format!(
                            "agent {i}: demand entries must be finite and nonnegative"
                        )));
                    }
                }
            }
        }
        Ok(Self { n, columns })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn agents(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &DemandColumn {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[DemandColumn] {
        &self.columns
    }
}

/// An ordered sequence of demand matrices sharing dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandTrace {
    pub n: usize,
    pub m: usize,
    pub family: FamilyTag,
    pub rounds: Vec<DemandMatrix>,
}

impl DemandTrace {
    pub fn new(n: usize, m: usize, family: FamilyTag, rounds: Vec<DemandMatrix>) -> Result<Self> {
        if rounds.is_empty() {
            return Err(Error::Dimension("trace must contain at least one round".into()));
        }
        for (t, round) in rounds.iter().enumerate() {
            if round.n() != n || round.agents() != m {
                return Err(Error::Dimension(format!(
                    "round {}: dimensions {}x{} but trace is {}x{}",
                    t + 1,
                    round.n(),
                    round.agents(),
                    n,
                    m
                )));
            }
        }
        Ok(Self {
            n,
            m,
            family,
            rounds,
        })
    }

    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    /// View of the first `t` rounds as a borrowed prefix.
    pub fn prefix(&self, t: usize) -> &[DemandMatrix] {
        &self.rounds[..t.min(self.rounds.len())]
    }
}

/// A feasible allocation: the family plus its flat decision vector.
///
/// For the shared cache the single vector stands for all `m` identical
/// agent columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    family: FeasibleFamily,
    point: Vec<f64>,
}

impl Allocation {
    pub fn new(family: FeasibleFamily, point: Vec<f64>) -> Result<Self> {
        if !family.is_member(&point, MEMBERSHIP_TOL) {
            return Err(Error::Infeasible(format!(
                "point fails the {} membership predicate",
                family.tag()
            )));
        }
        Ok(Self { family, point })
    }

    pub fn family(&self) -> &FeasibleFamily {
        &self.family
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    /// Agent `i`'s slice of the decision vector.
    pub fn agent_slice(&self, i: usize) -> &[f64] {
        match self.family {
            FeasibleFamily::SharedCappedSimplex { .. } => &self.point,
            FeasibleFamily::JobSimplex { .. } => &self.point[i..i + 1],
            FeasibleFamily::BirkhoffPolytope { side } => &self.point[i * side..(i + 1) * side],
        }
    }

    /// Reward `<x_i, y_i>` accrued by agent `i` under demand `x`.
    pub fn agent_reward(&self, demand: &DemandMatrix, i: usize) -> f64 {
        agent_reward_on_point(&self.family, &self.point, demand, i)
    }
}

/// Reward of agent `i` for a raw decision vector, shared by the policy's hot
/// loop which avoids constructing `Allocation` values every round.
pub(crate) fn agent_reward_on_point(
    family: &FeasibleFamily,
    point: &[f64],
    demand: &DemandMatrix,
    i: usize,
) -> f64 {
    match family {
        FeasibleFamily::SharedCappedSimplex { .. } => demand.column(i).dot(point),
        FeasibleFamily::JobSimplex { .. } => demand.column(i).dot(&point[i..i + 1]),
        FeasibleFamily::BirkhoffPolytope { side } => {
            demand.column(i).dot(&point[i * side..(i + 1) * side])
        }
    }
}

/// Per-agent cumulative rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardState {
    rewards: Vec<f64>,
    round: usize,
}

impl RewardState {
    /// Unit initialization: every agent starts at `R_i = 1`, which keeps
    /// the utility derivative finite on the very first round.
    pub fn unit(agents: usize) -> Self {
        Self {
            rewards: vec![1.0; agents],
            round: 0,
        }
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Raw accumulated reward, without the unit offset.
    pub fn raw_rewards(&self) -> Vec<f64> {
        self.rewards.iter().map(|r| r - 1.0).collect()
    }
}

/// Accrue one round of rewards: `R_i += <x_i, y_i>`, round index advances.
pub fn accrue(state: &RewardState, demand: &DemandMatrix, alloc: &Allocation) -> Result<RewardState> {
    if demand.agents() != state.rewards.len() {
        return Err(Error::Dimension(format!(
            "demand has {} agents, reward state has {}",
            demand.agents(),
            state.rewards.len()
        )));
    }
    if demand.n() != alloc.family().demand_dim() {
        return Err(Error::Dimension(format!(
            "demand dimension {} does not match family demand dimension {}",
            demand.n(),
            alloc.family().demand_dim()
        )));
    }
    let mut rewards = state.rewards.clone();
    for (i, r) in rewards.iter_mut().enumerate() {
        *r += alloc.agent_reward(demand, i);
    }
    Ok(RewardState {
        rewards,
        round: state.round + 1,
    })
}

/// One structural-assumption violation found in a trace.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Column l1 norm below `delta`.
    L1TooSmall { round: usize, agent: usize, norm: f64 },
    /// Column l1 norm above one.
    L1TooLarge { round: usize, agent: usize, norm: f64 },
    /// Round dimensions disagree with the trace header.
    Dimensions { round: usize, n: usize, m: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::L1TooSmall { round, agent, norm } => write!(
                f,
                "round {round}, agent {agent}: demand l1 norm {norm} below delta"
            ),
            Violation::L1TooLarge { round, agent, norm } => write!(
                f,
                "round {round}, agent {agent}: demand l1 norm {norm} above 1"
            ),
            Violation::Dimensions { round, n, m } => {
                write!(f, "round {round}: dimensions {n}x{m} differ from the trace header")
            }
        }
    }
}

/// Diagnostic check of the demand-norm assumption: empty iff every column's
/// l1 norm lies in `[delta, 1]` and all rounds share the trace dimensions.
/// Violations are data, not failures.
pub fn validate_trace(trace: &DemandTrace, params: &FairnessParams) -> Vec<Violation> {
    let mut out = Vec::new();
    const TOL: f64 = 1e-9;
    for (t, round) in trace.rounds.iter().enumerate() {
        let round_no = t + 1;
        if round.n() != trace.n || round.agents() != trace.m {
            out.push(Violation::Dimensions {
                round: round_no,
                n: round.n(),
                m: round.agents(),
            });
            continue;
        }
        for i in 0..round.agents() {
            let norm = round.column(i).l1();
            if norm < params.delta - TOL {
                out.push(Violation::L1TooSmall {
                    round: round_no,
                    agent: i,
                    norm,
                });
            } else if norm > 1.0 + TOL {
                out.push(Violation::L1TooLarge {
                    round: round_no,
                    agent: i,
                    norm,
                });
            }
        }
    }
    out
}
