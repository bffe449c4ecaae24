//! The online proportional-fair allocation policy.
//!
//! Adaptive-step projected online gradient ascent on greedily estimated
//! gradients: each agent's demand is divided by its cumulative reward raised
//! to the fairness exponent, so agents that accumulated less reward weigh
//! more in the update. For the shared cache the per-agent gradients collapse
//! onto the single shared vector.
//!
//! The policy commits an allocation before the round's demands are revealed;
//! `feed` then settles the round: rewards first, gradient step second.

use crate::error::{Error, Result};
use crate::fairness::check_alpha;
use crate::feasible::FeasibleFamily;
use crate::model::{agent_reward_on_point, Allocation, DemandMatrix, DemandTrace};
use crate::rng::SplitMix64;
use crate::sampling::sample_integral;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Fractional,
    Integral,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::Fractional => "frac",
            RunMode::Integral => "int",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "frac" | "fractional" => Ok(RunMode::Fractional),
            "int" | "integral" => Ok(RunMode::Integral),
            other => Err(Error::Domain(format!("unknown mode {other:?}"))),
        }
    }
}

/// Default multiplier on `D / sqrt(S)`; yields the adaptive step
/// `D / sqrt(2 S)` whose regret guarantee the analysis invokes.
pub const DEFAULT_STEP_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Knobs for one policy run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: RunMode,
    pub seed: u64,
    /// Multiplier `x` in the step size `x * D / sqrt(S)`.
    pub step_scale: f64,
    /// Override for the diameter bound `D`; `None` uses the family's bound.
    pub diameter: Option<f64>,
    /// Keep per-round allocations and gradients in the run record. Turn off
    /// for long horizons over large decision spaces.
    pub record_rounds: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: RunMode::Fractional,
            seed: 0,
            step_scale: DEFAULT_STEP_SCALE,
            diameter: None,
            record_rounds: true,
        }
    }
}

/// Internal state of the online policy.
///
/// Single-owner: `act` and `feed` must alternate on one state instance.
#[derive(Debug, Clone)]
pub struct PolicyState {
    family: FeasibleFamily,
    alpha: f64,
    /// Cumulative rewards with the unit offset; the policy's own dynamics
    /// always track the fractional (expected) rewards, which keeps the
    /// allocation sequence deterministic even in integral mode.
    rewards: Vec<f64>,
    /// Accumulated squared gradient norm `S`.
    grad_norm_sq: f64,
    /// Current fractional decision point.
    y: Vec<f64>,
    diameter: f64,
    step_scale: f64,
    mode: RunMode,
    rng: SplitMix64,
    round: usize,
    /// Decision point committed by the last `act` (integral mode).
    committed: Option<Vec<f64>>,
}

impl PolicyState {
    pub fn new(family: FeasibleFamily, alpha: f64, opts: &RunOptions) -> Result<Self> {
        family.validate()?;
        check_alpha(alpha)?;
        if !(opts.step_scale > 0.0) || !opts.step_scale.is_finite() {
            return Err(Error::Domain(format!(
                "step scale must be positive, got {}",
                opts.step_scale
            )));
        }
        let diameter = match opts.diameter {
            Some(d) if d > 0.0 && d.is_finite() => d,
            Some(d) => return Err(Error::Domain(format!("diameter override {d} invalid"))),
            None => family.diameter(),
        };
        Ok(Self {
            family,
            alpha,
            rewards: vec![1.0; family.agents()],
            grad_norm_sq: 0.0,
            y: family.uniform_point(),
            diameter,
            step_scale: opts.step_scale,
            mode: opts.mode,
            rng: SplitMix64::new(opts.seed),
            round: 0,
            committed: None,
        })
    }

    pub fn family(&self) -> &FeasibleFamily {
        &self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Offset cumulative rewards driving the gradient weights.
    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn accumulated_grad_norm_sq(&self) -> f64 {
        self.grad_norm_sq
    }

    pub fn decision(&self) -> &[f64] {
        &self.y
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Commit the allocation for the upcoming round.
    ///
    /// Fractional mode returns the current decision point unchanged; integral
    /// mode draws a fresh 0/1 allocation with matching expectation and
    /// remembers it so `feed` can settle realized rewards against it.
    pub fn act(&mut self) -> Result<Allocation> {
        let point = self.commit()?;
        Allocation::new(self.family, point)
    }

    fn commit(&mut self) -> Result<Vec<f64>> {
        match self.mode {
            RunMode::Fractional => Ok(self.y.clone()),
            RunMode::Integral => {
                let sample = sample_integral(&self.family, &self.y, &mut self.rng)?;
                let point = sample.to_point(&self.family);
                self.committed = Some(point.clone());
                Ok(point)
            }
        }
    }

    /// Reveal the round's demands and advance the state: settle rewards for
    /// the committed allocation, then take the projected gradient step.
    pub fn feed(&mut self, demand: &DemandMatrix) -> Result<FeedOutcome> {
        if demand.agents() != self.family.agents() || demand.n() != self.family.demand_dim() {
            return Err(Error::Dimension(format!(
                "demand is {}x{}, family expects {}x{}",
                demand.n(),
                demand.agents(),
                self.family.demand_dim(),
                self.family.agents()
            )));
        }
        let m = self.family.agents();
        let committed = self.committed.take();

        let mut fractional = vec![0.0; m];
        let mut realized = vec![0.0; m];
        for i in 0..m {
            fractional[i] = agent_reward_on_point(&self.family, &self.y, demand, i);
            realized[i] = match &committed {
                Some(point) => agent_reward_on_point(&self.family, point, demand, i),
                None => fractional[i],
            };
        }

        // Rewards first; the gradient uses the rewards updated through this
        // round, matching the delayed-gradient schedule of the algorithm.
        for (r, inc) in self.rewards.iter_mut().zip(&fractional) {
            *r += inc;
        }

        let mut gradient = vec![0.0; self.family.decision_dim()];
        map_agent_gradients(&self.family, demand, &self.rewards, self.alpha, &mut gradient);
        let norm_sq: f64 = gradient.iter().map(|g| g * g).sum();
        self.grad_norm_sq += norm_sq;

        if self.grad_norm_sq > 0.0 {
            let step = self.step_scale * self.diameter / self.grad_norm_sq.sqrt();
            let mut target = self.y.clone();
            for (t, g) in target.iter_mut().zip(&gradient) {
                *t += step * g;
            }
            self.y = self.family.project(&target)?;
        }
        self.round += 1;
        Ok(FeedOutcome {
            fractional,
            realized,
            gradient,
        })
    }
}

/// Per-round settlement data returned by [`PolicyState::feed`].
#[derive(Debug, Clone)]
pub struct FeedOutcome {
    /// `<x_i, y_i>` against the fractional decision point.
    pub fractional: Vec<f64>,
    /// `<x_i, Y_i>` against the committed allocation (equals `fractional`
    /// in fractional mode).
    pub realized: Vec<f64>,
    /// The gradient used for the update to the next decision point.
    pub gradient: Vec<f64>,
}

/// Map per-agent gradient components `coef_i * x_i` into the family's
/// decision shape. For the shared cache the components sum onto the single
/// shared vector; coefficient is `R_i^-alpha`.
pub(crate) fn map_agent_gradients(
    family: &FeasibleFamily,
    demand: &DemandMatrix,
    rewards: &[f64],
    alpha: f64,
    out: &mut [f64],
) {
    match family {
        FeasibleFamily::SharedCappedSimplex { .. } => {
            for (i, r) in rewards.iter().enumerate() {
                demand.column(i).axpy(r.powf(-alpha), out);
            }
        }
        FeasibleFamily::JobSimplex { .. } => {
            for (i, r) in rewards.iter().enumerate() {
                demand.column(i).axpy(r.powf(-alpha), &mut out[i..i + 1]);
            }
        }
        FeasibleFamily::BirkhoffPolytope { side } => {
            for (i, r) in rewards.iter().enumerate() {
                demand
                    .column(i)
                    .axpy(r.powf(-alpha), &mut out[i * side..(i + 1) * side]);
            }
        }
    }
}

/// Everything recorded about one simulation.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub family: FeasibleFamily,
    pub alpha: f64,
    pub mode: RunMode,
    pub seed: u64,
    pub horizon: usize,
    /// Fractional per-round per-agent reward increments (`T x m`).
    pub increments: Vec<Vec<f64>>,
    /// Realized per-round increments against the committed allocations.
    pub realized_increments: Vec<Vec<f64>>,
    /// Committed decision points per round, when round recording is on.
    pub allocations: Option<Vec<Vec<f64>>>,
    /// Fractional decision points per round, when round recording is on.
    pub fractional_points: Option<Vec<Vec<f64>>>,
    /// Policy gradients per round, when round recording is on.
    pub gradients: Option<Vec<Vec<f64>>>,
    /// Offset fractional rewards at the horizon.
    pub final_rewards: Vec<f64>,
    /// Offset realized rewards at the horizon.
    pub final_realized: Vec<f64>,
    /// Sum over rounds of the same-round surrogate gradients, in the
    /// family's decision shape.
    pub surrogate_grad_sum: Vec<f64>,
    /// Sum over rounds of the surrogate gradient paired with the fractional
    /// decision actually held that round.
    pub surrogate_played: f64,
}

impl RunRecord {
    /// Offset rewards after each round, reconstructed from the increments.
    pub fn running_rewards(&self) -> Vec<Vec<f64>> {
        let m = self.final_rewards.len();
        let mut acc = vec![1.0; m];
        let mut out = Vec::with_capacity(self.horizon);
        for inc in &self.increments {
            for (a, d) in acc.iter_mut().zip(inc) {
                *a += d;
            }
            out.push(acc.clone());
        }
        out
    }

    pub fn min_rate(&self) -> f64 {
        let t = self.horizon.max(1) as f64;
        self.final_rewards.iter().fold(f64::INFINITY, |a, &b| a.min(b)) / t
    }

    pub fn max_rate(&self) -> f64 {
        let t = self.horizon.max(1) as f64;
        self.final_rewards.iter().fold(0.0f64, |a, &b| a.max(b)) / t
    }
}

/// Run the policy over a whole trace.
pub fn run_policy(
    family: &FeasibleFamily,
    trace: &DemandTrace,
    alpha: f64,
    opts: &RunOptions,
) -> Result<RunRecord> {
    run_policy_prefix(family, trace, trace.horizon(), alpha, opts)
}

/// Run the policy over the first `horizon` rounds of a trace.
pub fn run_policy_prefix(
    family: &FeasibleFamily,
    trace: &DemandTrace,
    horizon: usize,
    alpha: f64,
    opts: &RunOptions,
) -> Result<RunRecord> {
    if horizon == 0 || horizon > trace.horizon() {
        return Err(Error::Domain(format!(
            "horizon {horizon} outside 1..={}",
            trace.horizon()
        )));
    }
    if trace.n != family.demand_dim() || trace.m != family.agents() {
        return Err(Error::Dimension(format!(
            "trace is {}x{}, family expects {}x{}",
            trace.n,
            trace.m,
            family.demand_dim(),
            family.agents()
        )));
    }
    let m = family.agents();
    let mut state = PolicyState::new(*family, alpha, opts)?;
    let mut increments = Vec::with_capacity(horizon);
    let mut realized_increments = Vec::with_capacity(horizon);
    let mut allocations = opts.record_rounds.then(|| Vec::with_capacity(horizon));
    let mut fractional_points = opts.record_rounds.then(|| Vec::with_capacity(horizon));
    let mut gradients = opts.record_rounds.then(|| Vec::with_capacity(horizon));
    let mut surrogate_grad_sum = vec![0.0; family.decision_dim()];
    let mut surrogate_played = 0.0;
    let mut realized_total = vec![1.0; m];

    for round in trace.prefix(horizon) {
        // Integral mode draws the committed allocation now; fractional mode
        // implicitly commits the current decision point.
        let committed_point = match opts.mode {
            RunMode::Integral => Some(state.commit()?),
            RunMode::Fractional => None,
        };
        let fractional_point = opts.record_rounds.then(|| state.decision().to_vec());
        // Same-round surrogate gradient, weighted by the rewards known when
        // the allocation was committed.
        let rewards_before = state.rewards().to_vec();
        map_agent_gradients(family, round, &rewards_before, alpha, &mut surrogate_grad_sum);

        let outcome = state.feed(round)?;
        for (i, inc) in outcome.fractional.iter().enumerate() {
            surrogate_played += rewards_before[i].powf(-alpha) * inc;
        }
        for (tot, inc) in realized_total.iter_mut().zip(&outcome.realized) {
            *tot += inc;
        }
        increments.push(outcome.fractional);
        realized_increments.push(outcome.realized);
        if let Some(allocs) = allocations.as_mut() {
            allocs.push(committed_point.unwrap_or_else(|| fractional_point.clone().unwrap()));
        }
        if let Some(points) = fractional_points.as_mut() {
            points.push(fractional_point.unwrap());
        }
        if let Some(grads) = gradients.as_mut() {
            grads.push(outcome.gradient);
        }
    }

    Ok(RunRecord {
        family: *family,
        alpha,
        mode: opts.mode,
        seed: opts.seed,
        horizon,
        increments,
        realized_increments,
        allocations,
        fractional_points,
        gradients,
        final_rewards: state.rewards().to_vec(),
        final_realized: realized_total,
        surrogate_grad_sum,
        surrogate_played,
    })
}
