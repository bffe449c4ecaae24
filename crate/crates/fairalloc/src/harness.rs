//! Experiment driver: runs the policy against trace prefixes, recomputes the
//! offline comparator per checkpoint, and emits deterministic CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::adversary::TraceSpec;
use crate::error::{Error, Result};
use crate::fairness::{aggregate_fairness, approx_factor, check_alpha};
use crate::feasible::FeasibleFamily;
use crate::model::{validate_trace, FairnessParams};
use crate::offline::{offline_optimal, surrogate_regret};
use crate::policy::{run_policy_prefix, RunMode, RunOptions, DEFAULT_STEP_SCALE};

/// One experiment: a trace source, fairness exponents, horizon checkpoints,
/// mode and seeds.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub trace: TraceSpec,
    pub family: FeasibleFamily,
    pub alphas: Vec<f64>,
    /// Checkpoint horizons, ascending. Each checkpoint reruns the policy on
    /// the trace prefix; commit-before-reveal makes prefixes self-consistent.
    pub horizons: Vec<usize>,
    pub mode: RunMode,
    pub step_scale: f64,
    pub seeds: Vec<u64>,
    pub weights: Option<Vec<f64>>,
    /// Tolerance handed to the offline solver (raw objective units).
    pub offline_tol: Option<f64>,
    pub out_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(trace: TraceSpec, family: FeasibleFamily) -> Self {
        Self {
            trace,
            family,
            alphas: vec![0.5],
            horizons: vec![1024],
            mode: RunMode::Fractional,
            step_scale: DEFAULT_STEP_SCALE,
            seeds: vec![0],
            weights: None,
            offline_tol: None,
            out_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if self.alphas.is_empty() || self.horizons.is_empty() || self.seeds.is_empty() {
            return Err(Error::Domain(
                "experiment needs at least one alpha, horizon and seed".into(),
            ));
        }
        for &a in &self.alphas {
            check_alpha(a)?;
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("horizons must be strictly ascending".into()));
        }
        Ok(())
    }
}

/// Metrics for one (horizon, alpha, seed) cell.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub horizon: usize,
    pub alpha: f64,
    pub seed: u64,
    pub mode: RunMode,
    pub fairness_online: f64,
    pub fairness_offline: f64,
    pub c_alpha_regret: f64,
    pub surrogate_regret: f64,
    pub min_rate: f64,
    pub max_rate: f64,
    /// Offset per-agent rewards (realized rewards in integral mode).
    pub rewards: Vec<f64>,
    /// The same fairness metrics against raw (offset-free) rewards.
    pub fairness_online_raw: f64,
    pub c_alpha_regret_raw: f64,
}

/// The approximate regret: offline fairness minus `c_alpha` times the online
/// fairness.
pub fn c_alpha_regret(
    offline_value: f64,
    online_rewards: &[f64],
    alpha: f64,
    weights: Option<&[f64]>,
) -> Result<f64> {
    let online = aggregate_fairness(alpha, weights, online_rewards)?;
    Ok(offline_value - approx_factor(alpha)? * online)
}

/// Least-squares slope of `log(value)` against `log(horizon)`.
pub fn slope_fit(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 4 {
        return Err(Error::Domain(format!(
            "slope fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(t, v)| t <= 0.0 || v <= 0.0) {
        return Err(Error::Domain("slope fit needs positive horizons and values".into()));
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(t, v) in points {
        let x = t.ln();
        let y = v.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Run a full experiment grid in deterministic config order
/// (seed-major, then alpha, then horizon) and render the CSV.
///
/// The CSV is written through a temporary file and an atomic rename, so a
/// failed run never leaves a partial file behind.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(Vec<MetricsRow>, String)> {
    config.validate()?;
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let trace = config.trace.generate(seed)?;
        if trace.n != config.family.demand_dim() || trace.m != config.family.agents() {
            return Err(Error::Dimension(format!(
                "trace is {}x{}, family expects {}x{}",
                trace.n,
                trace.m,
                config.family.demand_dim(),
                config.family.agents()
            )));
        }
        let max_horizon = *config.horizons.last().unwrap();
        if max_horizon > trace.horizon() {
            return Err(Error::Domain(format!(
                "horizon {max_horizon} exceeds trace length {}",
                trace.horizon()
            )));
        }
        // Gate on the structural assumption before burning compute.
        let gate = FairnessParams::new(0.0, 1e-9, config.family.canonical_mu(), None)?;
        let violations = validate_trace(&trace, &gate);
        if !violations.is_empty() {
            return Err(Error::Domain(format!(
                "trace violates the demand-norm assumption: {} (+{} more)",
                violations[0],
                violations.len() - 1
            )));
        }
        for &alpha in &config.alphas {
            for &horizon in &config.horizons {
                let opts = RunOptions {
                    mode: config.mode,
                    seed,
                    step_scale: config.step_scale,
                    diameter: None,
                    record_rounds: false,
                };
                let record = run_policy_prefix(&config.family, &trace, horizon, alpha, &opts)?;
                let offline = offline_optimal(
                    &config.family,
                    &trace,
                    horizon,
                    alpha,
                    config.weights.as_deref(),
                    config.offline_tol,
                )?;
                let online_rewards = match config.mode {
                    RunMode::Fractional => record.final_rewards.clone(),
                    RunMode::Integral => record.final_realized.clone(),
                };
                let raw_rewards: Vec<f64> =
                    online_rewards.iter().map(|r| (r - 1.0).max(0.0)).collect();
                let weights = config.weights.as_deref();
                let fairness_online = aggregate_fairness(alpha, weights, &online_rewards)?;
                let fairness_online_raw = aggregate_fairness(alpha, weights, &raw_rewards)?;
                let regret = c_alpha_regret(offline.value, &online_rewards, alpha, weights)?;
                let regret_raw = c_alpha_regret(offline.value, &raw_rewards, alpha, weights)?;
                let t = horizon as f64;
                let min_rate = online_rewards.iter().fold(f64::INFINITY, |a, &b| a.min(b)) / t;
                let max_rate = online_rewards.iter().fold(0.0f64, |a, &b| a.max(b)) / t;
                rows.push(MetricsRow {
                    horizon,
                    alpha,
                    seed,
                    mode: config.mode,
                    fairness_online,
                    fairness_offline: offline.value,
                    c_alpha_regret: regret,
                    surrogate_regret: surrogate_regret(&record)?,
                    min_rate,
                    max_rate,
                    rewards: online_rewards,
                    fairness_online_raw,
                    c_alpha_regret_raw: regret_raw,
                });
            }
        }
    }
    let csv = render_csv(&rows, config.family.agents());
    if let Some(path) = &config.out_path {
        write_atomic(path, csv.as_bytes())?;
    }
    Ok((rows, csv))
}

/// Render rows as CSV. Floats use Rust's shortest round-trip decimal form,
/// which makes repeated runs byte-identical.
pub fn render_csv(rows: &[MetricsRow], agents: usize) -> String {
    let mut out = String::new();
    out.push_str("T,alpha,seed,mode,fairness_online,fairness_offline,c_alpha_regret,surrogate_regret,min_rate,max_rate");
    for i in 1..=agents {
        out.push_str(&format!(",R_{i}"));
    }
    out.push_str(",fairness_online_raw,c_alpha_regret_raw\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}",
            row.horizon,
            row.alpha,
            row.seed,
            row.mode.as_str(),
            row.fairness_online,
            row.fairness_offline,
            row.c_alpha_regret,
            row.surrogate_regret,
            row.min_rate,
            row.max_rate
        ));
        for r in &row.rewards {
            out.push_str(&format!(",{r}"));
        }
        out.push_str(&format!(",{},{}\n", row.fairness_online_raw, row.c_alpha_regret_raw));
    }
    out
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp)?;
    file.write_all(bytes)?;
    file.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasible::FamilyTag;

    #[test]
    fn c_alpha_regret_zero_on_matching_linear_rewards() {
        // alpha = 0 has factor 1; identical rewards give zero regret.
        let offline = aggregate_fairness(0.0, None, &[30.0, 20.0]).unwrap();
        let r = c_alpha_regret(offline, &[30.0, 20.0], 0.0, None).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn matched_fairness_at_half_gives_negative_regret() {
        let rewards = [50.0, 50.0];
        let offline = aggregate_fairness(0.5, None, &rewards).unwrap();
        let r = c_alpha_regret(offline, &rewards, 0.5, None).unwrap();
        let expected = (1.0 - 2f64.sqrt()) * offline;
        assert!((r - expected).abs() < 1e-9);
        assert!(r < 0.0);
    }

    #[test]
    fn slope_fit_recovers_exact_power_laws() {
        let pts: Vec<(f64, f64)> = (10..18)
            .map(|e| {
                let t = (1u64 << e) as f64;
                (t, 3.0 * t.sqrt())
            })
            .collect();
        assert!((slope_fit(&pts).unwrap() - 0.5).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = (10..18).map(|e| ((1u64 << e) as f64, 7.0)).collect();
        assert!(slope_fit(&flat).unwrap().abs() < 1e-9);
    }

    #[test]
    fn slope_fit_on_sqrt_log_stays_small() {
        let pts: Vec<(f64, f64)> = (10..=17)
            .map(|e| {
                let t = (1u64 << e) as f64;
                (t, 2.0 * t.ln().sqrt())
            })
            .collect();
        let slope = slope_fit(&pts).unwrap();
        assert!(slope < 0.08, "slope {slope}");
        assert!(slope > 0.0);
    }

    #[test]
    fn slope_fit_rejects_bad_inputs() {
        assert!(slope_fit(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(slope_fit(&[(1.0, 1.0), (2.0, 2.0), (3.0, 0.0), (4.0, 1.0)]).is_err());
    }

    #[test]
    fn experiment_rows_and_csv_shape() {
        let family = FeasibleFamily::SharedCappedSimplex {
            library: 8,
            capacity: 2,
            users: 2,
        };
        let config = ExperimentConfig {
            alphas: vec![0.0, 0.5],
            horizons: vec![64, 128],
            seeds: vec![1, 2],
            ..ExperimentConfig::new(
                TraceSpec::ZipfCache {
                    library: 8,
                    users: 2,
                    exponent: 0.8,
                    horizon: 128,
                },
                family,
            )
        };
        let (rows, csv) = run_experiment(&config).unwrap();
        assert_eq!(rows.len(), 8);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with(
            "T,alpha,seed,mode,fairness_online,fairness_offline,c_alpha_regret,surrogate_regret,min_rate,max_rate,R_1,R_2"
        ));
        assert_eq!(lines.count(), 8);
        // Definition check: regret equals offline minus c_alpha * online.
        for row in &rows {
            let want = row.fairness_offline
                - approx_factor(row.alpha).unwrap() * row.fairness_online;
            assert!((row.c_alpha_regret - want).abs() < 1e-9);
        }
    }

    #[test]
    fn rerun_is_byte_identical() {
        let family = FeasibleFamily::JobSimplex { machines: 3 };
        let config = ExperimentConfig {
            alphas: vec![0.25],
            horizons: vec![32, 64],
            seeds: vec![7],
            ..ExperimentConfig::new(
                TraceSpec::IidUniform {
                    family: FamilyTag::Sched,
                    n: 1,
                    m: 3,
                    horizon: 64,
                },
                family,
            )
        };
        let (_, csv1) = run_experiment(&config).unwrap();
        let (_, csv2) = run_experiment(&config).unwrap();
        assert_eq!(csv1, csv2);
    }

    #[test]
    fn config_validation_rejects_unsorted_horizons() {
        let family = FeasibleFamily::JobSimplex { machines: 2 };
        let mut config = ExperimentConfig::new(
            TraceSpec::IidUniform {
                family: FamilyTag::Sched,
                n: 1,
                m: 2,
                horizon: 64,
            },
            family,
        );
        config.horizons = vec![64, 32];
        assert!(config.validate().is_err());
    }
}
