//! Static offline comparators and diagnostics.
//!
//! The offline benchmark is the best fixed allocation in hindsight under the
//! aggregate fairness objective `F(y) = sum_i w_i * phi(sum_t <x_i(t), y_i>)`.
//! `F` is concave, so projected gradient ascent with a Frank-Wolfe gap
//! certificate solves it to checkable accuracy. Tiny instances additionally
//! get an exhaustive grid oracle, and the scheduling family has a closed-form
//! optimum used as an independent cross-check.

use crate::error::{Error, Result};
use crate::fairness::{aggregate_fairness, check_alpha};
use crate::feasible::FeasibleFamily;
use crate::model::{DemandMatrix, DemandTrace};
use crate::policy::RunRecord;

/// Best fixed allocation in hindsight.
#[derive(Debug, Clone)]
pub struct OfflineSolution {
    /// The maximizing decision point.
    pub y_star: Vec<f64>,
    /// Optimal aggregate fairness `sum_i w_i * phi(R*_i)`.
    pub value: f64,
    /// Per-agent rewards `R*_i = sum_t <x_i(t), y*_i>` under `y_star`.
    pub per_agent: Vec<f64>,
    /// Frank-Wolfe gap certificate at termination (normalized units).
    pub gap: f64,
    pub iterations: usize,
}

/// Aggregate demand per agent over the given rounds, divided by the horizon.
///
/// The fairness objective is positively homogeneous, so optimizing against
/// per-round average demands and scaling back by `T^(1-alpha)` is exact and
/// keeps gradients O(1) regardless of the horizon.
fn normalized_aggregate_demands(rounds: &[DemandMatrix], dim: usize) -> Vec<Vec<f64>> {
    let m = rounds[0].agents();
    let t = rounds.len() as f64;
    let mut agg = vec![vec![0.0; dim]; m];
    for round in rounds {
        for (i, acc) in agg.iter_mut().enumerate() {
            round.column(i).axpy(1.0 / t, acc);
        }
    }
    agg
}

/// Per-agent normalized rewards `<A_i, y_i> / T` for a decision point.
fn normalized_rewards(family: &FeasibleFamily, agg: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let m = agg.len();
    let mut out = vec![0.0; m];
    for i in 0..m {
        let yi = match family {
            FeasibleFamily::SharedCappedSimplex { .. } => y,
            FeasibleFamily::JobSimplex { .. } => &y[i..i + 1],
            FeasibleFamily::BirkhoffPolytope { side } => &y[i * side..(i + 1) * side],
        };
        out[i] = agg[i].iter().zip(yi).map(|(a, b)| a * b).sum();
    }
    out
}

fn weight_of(weights: Option<&[f64]>, i: usize) -> f64 {
    weights.map_or(1.0, |w| w[i])
}

/// Normalized objective value; `phi` with the reward floored away from zero
/// so the gradient stays finite on the boundary during the ascent.
fn objective(alpha: f64, weights: Option<&[f64]>, rewards: &[f64]) -> f64 {
    rewards
        .iter()
        .enumerate()
        .map(|(i, &r)| weight_of(weights, i) * r.max(0.0).powf(1.0 - alpha) / (1.0 - alpha))
        .sum()
}

fn gradient(
    family: &FeasibleFamily,
    agg: &[Vec<f64>],
    alpha: f64,
    weights: Option<&[f64]>,
    rewards: &[f64],
    out: &mut [f64],
) {
    out.fill(0.0);
    for (i, a) in agg.iter().enumerate() {
        let coef = weight_of(weights, i) * rewards[i].max(1e-12).powf(-alpha);
        let slice = match family {
            FeasibleFamily::SharedCappedSimplex { .. } => &mut out[..],
            FeasibleFamily::JobSimplex { .. } => &mut out[i..i + 1],
            FeasibleFamily::BirkhoffPolytope { side } => {
                let side = *side;
                &mut out[i * side..(i + 1) * side]
            }
        };
        for (o, &x) in slice.iter_mut().zip(a) {
            *o += coef * x;
        }
    }
}

const MAX_ITERATIONS: usize = 20_000;

/// Maximize the aggregate fairness of a fixed allocation over the family.
///
/// Projected gradient ascent with an adaptive step (grow on success, shrink
/// on failure) from the uniform point; terminates when the Frank-Wolfe gap
/// `max_v <grad, v - y>` certifies the value is within `tol` of optimal.
/// `tol` is in raw objective units; `None` uses `1e-6 * T^(1-alpha)`.
pub fn offline_optimal(
    family: &FeasibleFamily,
    trace: &DemandTrace,
    horizon: usize,
    alpha: f64,
    weights: Option<&[f64]>,
    tol: Option<f64>,
) -> Result<OfflineSolution> {
    check_alpha(alpha)?;
    family.validate()?;
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
    if let Some(w) = weights {
        if w.len() != family.agents() {
            return Err(Error::Dimension(format!(
                "{} weights for {} agents",
                w.len(),
                family.agents()
            )));
        }
    }
    let t = horizon as f64;
    let scale = t.powf(1.0 - alpha);
    let tol_norm = tol.map_or(1e-6, |v| v / scale);
    let rounds = trace.prefix(horizon);
    let agg = normalized_aggregate_demands(rounds, family.demand_dim());

    let mut y = family.uniform_point();
    let mut rewards = normalized_rewards(family, &agg, &y);
    let mut fval = objective(alpha, weights, &rewards);
    let mut grad = vec![0.0; family.decision_dim()];
    let mut step = family.diameter();
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        gradient(family, &agg, alpha, weights, &rewards, &mut grad);
        let vertex = family.lmo(&grad)?;
        gap = vertex
            .iter()
            .zip(&y)
            .zip(&grad)
            .map(|((v, yi), g)| g * (v - yi))
            .sum::<f64>()
            .max(0.0);
        if gap <= tol_norm {
            break;
        }
        // Adaptive step with monotone acceptance.
        let mut accepted = false;
        for _ in 0..60 {
            let target: Vec<f64> = y.iter().zip(&grad).map(|(a, g)| a + step * g).collect();
            let candidate = family.project(&target)?;
            let cand_rewards = normalized_rewards(family, &agg, &candidate);
            let cand_val = objective(alpha, weights, &cand_rewards);
            if cand_val >= fval - 1e-14 * (1.0 + fval.abs()) {
                y = candidate;
                rewards = cand_rewards;
                fval = cand_val;
                step = (step * 1.5).min(1e6);
                accepted = true;
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
        if !accepted {
            break;
        }
    }

    if gap > tol_norm {
        return Err(Error::NonConvergence(
            format!("offline ascent stopped after {iterations} iterations"),
            gap * scale,
        ));
    }
    let per_agent: Vec<f64> = rewards.iter().map(|r| r * t).collect();
    let value = aggregate_fairness(alpha, weights, &per_agent)?;
    Ok(OfflineSolution {
        y_star: y,
        value,
        per_agent,
        gap,
        iterations,
    })
}

/// Closed-form offline optimum for the job scheduling family.
///
/// Given per-machine total rewards `R`, the optimal split is
/// `y*_i = R_i^((1-alpha)/alpha) / sum_j R_j^((1-alpha)/alpha)` with value
/// `(1-alpha)^-1 * (sum_i R_i^((1-alpha)/alpha))^alpha`.
pub fn scheduling_closed_form(r_tot: &[f64], alpha: f64) -> Result<OfflineSolution> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "closed form needs alpha in (0, 1), got {alpha}; use the linear oracle at alpha = 0"
        )));
    }
    if r_tot.is_empty() || r_tot.iter().any(|&r| !r.is_finite() || r <= 0.0) {
        return Err(Error::Domain(
            "per-machine totals must be positive and finite".into(),
        ));
    }
    let expo = (1.0 - alpha) / alpha;
    let powered: Vec<f64> = r_tot.iter().map(|&r| r.powf(expo)).collect();
    let z: f64 = powered.iter().sum();
    let y_star: Vec<f64> = powered.iter().map(|p| p / z).collect();
    let per_agent: Vec<f64> = y_star.iter().zip(r_tot).map(|(y, r)| y * r).collect();
    let value = z.powf(alpha) / (1.0 - alpha);
    Ok(OfflineSolution {
        y_star,
        value,
        per_agent,
        gap: 0.0,
        iterations: 0,
    })
}

/// Exhaustive grid search over the feasible set. Tiny dimensions only.
pub fn brute_force_offline(
    family: &FeasibleFamily,
    trace: &DemandTrace,
    horizon: usize,
    alpha: f64,
    grid_step: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::Domain(format!("grid step {grid_step} out of range")));
    }
    if horizon == 0 || horizon > trace.horizon() {
        return Err(Error::Domain(format!(
            "horizon {horizon} outside 1..={}",
            trace.horizon()
        )));
    }
    let rounds = trace.prefix(horizon);
    let agg = normalized_aggregate_demands(rounds, family.demand_dim());
    let t = horizon as f64;
    let scale = t.powf(1.0 - alpha);
    let steps = (1.0 / grid_step).round() as usize;
    let grid = |i: usize| (i as f64 * grid_step).min(1.0);

    let mut best = f64::NEG_INFINITY;
    let eval = |family: &FeasibleFamily, point: &[f64], best: &mut f64| {
        let rewards = normalized_rewards(family, &agg, point);
        let v = objective(alpha, None, &rewards);
        if v > *best {
            *best = v;
        }
    };

    match *family {
        FeasibleFamily::SharedCappedSimplex {
            library,
            capacity,
            users,
        } => {
            if library > 3 || users > 2 {
                return Err(Error::Domain(
                    "grid oracle supports cache instances up to N=3, m=2".into(),
                ));
            }
            let k = capacity as f64;
            match library {
                1 => eval(family, &[k], &mut best),
                2 => {
                    for i in 0..=steps {
                        let y1 = grid(i);
                        let y2 = k - y1;
                        if (-1e-12..=1.0 + 1e-12).contains(&y2) {
                            eval(family, &[y1, y2.clamp(0.0, 1.0)], &mut best);
                        }
                    }
                }
                _ => {
                    for i in 0..=steps {
                        for j in 0..=steps {
                            let y1 = grid(i);
                            let y2 = grid(j);
                            let y3 = k - y1 - y2;
                            if (-1e-12..=1.0 + 1e-12).contains(&y3) {
                                eval(family, &[y1, y2, y3.clamp(0.0, 1.0)], &mut best);
                            }
                        }
                    }
                }
            }
        }
        FeasibleFamily::JobSimplex { machines } => {
            if machines > 3 {
                return Err(Error::Domain(
                    "grid oracle supports simplex instances up to m=3".into(),
                ));
            }
            match machines {
                1 => eval(family, &[1.0], &mut best),
                2 => {
                    for i in 0..=steps {
                        let y1 = grid(i);
                        eval(family, &[y1, 1.0 - y1], &mut best);
                    }
                }
                _ => {
                    for i in 0..=steps {
                        for j in 0..=steps {
                            let y1 = grid(i);
                            let y2 = grid(j);
                            let y3 = 1.0 - y1 - y2;
                            if y3 >= -1e-12 {
                                eval(family, &[y1, y2, y3.max(0.0)], &mut best);
                            }
                        }
                    }
                }
            }
        }
        FeasibleFamily::BirkhoffPolytope { side } => {
            if side > 2 {
                return Err(Error::Domain(
                    "grid oracle supports matchings up to m=2".into(),
                ));
            }
            if side == 1 {
                eval(family, &[1.0], &mut best);
            } else {
                for i in 0..=steps {
                    let a = grid(i);
                    eval(family, &[a, 1.0 - a, 1.0 - a, a], &mut best);
                }
            }
        }
    }
    Ok(best * scale)
}

/// Regret of the recorded run on the surrogate linear problem.
///
/// The per-round surrogate gradients (same-round demands weighted by the
/// run's rewards) are accumulated during the run; the best static comparator
/// is the vertex maximizing the summed gradient, so no iterative solve is
/// needed.
pub fn surrogate_regret(record: &RunRecord) -> Result<f64> {
    let vertex = record.family.lmo(&record.surrogate_grad_sum)?;
    let best: f64 = vertex
        .iter()
        .zip(&record.surrogate_grad_sum)
        .map(|(v, g)| v * g)
        .sum();
    Ok(best - record.surrogate_played)
}

/// The two-machine offline reward surface whose curvature the diagnostics
/// probe: `f(x, y) = (x^((1-alpha)/alpha) + y^((1-alpha)/alpha))^alpha`.
pub fn offline_reward_surface(x: f64, y: f64, alpha: f64) -> f64 {
    let c = (1.0 - alpha) / alpha;
    (x.powf(c) + y.powf(c)).powf(alpha)
}

/// Closed-form curvature diagnostics of the offline reward surface.
///
/// Returns `(det_hessian(x, y), d2f_dx2 at (1, 1))`. The determinant's sign
/// equals the sign of `2*alpha - 1`, which is what makes the surface
/// non-convex on at least one side of `alpha = 1/2`.
pub fn nonconvexity_diagnostics(x: f64, y: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "diagnostics need alpha in (0, 1), got {alpha}"
        )));
    }
    if !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite() {
        return Err(Error::Domain("diagnostics need positive finite (x, y)".into()));
    }
    let e = 1.0 / alpha - 1.0;
    let det = (2.0 * alpha - 1.0) * (alpha - 1.0).powi(2) * x.powf(e) * y.powf(e)
        * (x.powf(e) + y.powf(e)).powf(2.0 * alpha)
        / (y * x.powf(1.0 / alpha) + x * y.powf(1.0 / alpha)).powi(2);
    let d2f_dx2_at_11 =
        -(2f64.powf(alpha - 2.0)) * (1.0 - alpha) * (alpha * alpha + 2.0 * alpha - 1.0) / alpha;
    Ok((det, d2f_dx2_at_11))
}
