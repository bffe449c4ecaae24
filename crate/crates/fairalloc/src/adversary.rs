//! Demand-trace generators and the trace file format.
//!
//! The two-phase instances drive the worst case for any online policy:
//! a first phase that tempts the policy to split the cache, then a tail in
//! which one user's demand collapses onto the other's file while the second
//! user turns into uniform noise.
//!
//! Trace files are line-oriented text:
//!
//! ```text
//! # fairalloc-trace v1 N=<n> m=<m> family=<tag>
//! <field>|<field>|...        one line per round, m fields
//! ```
//!
//! A field is either a bare integer (one-hot file id, 1-indexed) or a
//! comma-separated list of `N` reals. Reals are written in shortest
//! round-trip decimal form, so save/load is a bit-exact identity.
//! Generators draw from the pinned SplitMix64 stream (see [`crate::rng`]),
//! one draw per random column in round-major, agent-minor order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::feasible::FamilyTag;
use crate::model::{DemandColumn, DemandMatrix, DemandTrace};
use crate::rng::SplitMix64;

/// Lower bound of the per-round scheduling rewards drawn by the uniform
/// generator; keeps generated traces inside the demand-norm assumption.
pub const SCHED_REWARD_FLOOR: f64 = 0.1;

/// What trace to run an experiment against.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceSpec {
    /// Two-phase adversarial instance (shared cache, m=2, k=1).
    LowerBound {
        horizon: usize,
        eta: f64,
        instance: u8,
        library: usize,
    },
    /// Independent Zipf(s) requests over `library` files from each of `m` users.
    ZipfCache {
        library: usize,
        users: usize,
        exponent: f64,
        horizon: usize,
    },
    /// Uniform demands matched to the family shape.
    IidUniform {
        family: FamilyTag,
        n: usize,
        m: usize,
        horizon: usize,
    },
    /// Load from a trace file; the seed only affects the policy.
    File { path: PathBuf },
}

impl TraceSpec {
    pub fn generate(&self, seed: u64) -> Result<DemandTrace> {
        match self {
            TraceSpec::LowerBound {
                horizon,
                eta,
                instance,
                library,
            } => lower_bound_trace(*horizon, *eta, *instance, *library, seed),
            TraceSpec::ZipfCache {
                library,
                users,
                exponent,
                horizon,
            } => zipf_trace(*library, *users, *exponent, *horizon, seed),
            TraceSpec::IidUniform { family, n, m, horizon } => {
                iid_uniform_trace(*family, *n, *m, *horizon, seed)
            }
            TraceSpec::File { path } => load_trace(path),
        }
    }
}

/// The two-phase instance pair behind the approximation-factor lower bound.
///
/// Phase 1 (rounds `1..=floor(eta * T)`): user 1 requests file 1, user 2
/// requests file 2. Tail: in instance 1, user 1 requests file 2 while user 2
/// requests a uniformly random file; instance 2 swaps the roles (user 2
/// requests file 1, user 1 goes random).
pub fn lower_bound_trace(
    horizon: usize,
    eta: f64,
    instance: u8,
    library: usize,
    seed: u64,
) -> Result<DemandTrace> {
    if library < 3 {
        return Err(Error::Domain(format!(
            "lower-bound instance needs a library of at least 3 files, got {library}"
        )));
    }
    if !(0.0..=0.5).contains(&eta) {
        return Err(Error::Domain(format!("eta must lie in [0, 1/2], got {eta}")));
    }
    if instance != 1 && instance != 2 {
        return Err(Error::Domain(format!("instance must be 1 or 2, got {instance}")));
    }
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let phase1 = (eta * horizon as f64).floor() as usize;
    let mut rng = SplitMix64::new(seed);
    let mut rounds = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let cols = if t <= phase1 {
            vec![DemandColumn::OneHot(0), DemandColumn::OneHot(1)]
        } else {
            let random_file = rng.next_below(library as u64) as usize;
            match instance {
                1 => vec![DemandColumn::OneHot(1), DemandColumn::OneHot(random_file)],
                _ => vec![DemandColumn::OneHot(random_file), DemandColumn::OneHot(0)],
            }
        };
        rounds.push(DemandMatrix::new(library, cols)?);
    }
    DemandTrace::new(library, 2, FamilyTag::Cache, rounds)
}

/// Every user independently requests file `j` with probability proportional
/// to `j^-s` (1-indexed ranks) on every round.
pub fn zipf_trace(
    library: usize,
    users: usize,
    exponent: f64,
    horizon: usize,
    seed: u64,
) -> Result<DemandTrace> {
    if library == 0 || users == 0 || horizon == 0 {
        return Err(Error::Domain("zipf trace needs N, m, T >= 1".into()));
    }
    if !(exponent >= 0.0) || !exponent.is_finite() {
        return Err(Error::Domain(format!(
            "zipf exponent must be nonnegative, got {exponent}"
        )));
    }
    let mut cumulative = Vec::with_capacity(library);
    let mut acc = 0.0;
    for j in 1..=library {
        acc += (j as f64).powf(-exponent);
        cumulative.push(acc);
    }
    let total = acc;
    let mut rng = SplitMix64::new(seed);
    let mut rounds = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let cols = (0..users)
            .map(|_| {
                let target = rng.next_f64() * total;
                let j = cumulative.partition_point(|&c| c <= target);
                DemandColumn::OneHot(j.min(library - 1))
            })
            .collect();
        rounds.push(DemandMatrix::new(library, cols)?);
    }
    DemandTrace::new(library, users, FamilyTag::Cache, rounds)
}

/// Uniform demands matched to the family: one-hot uniform requests for the
/// cache and matching families, uniform scalar rewards in
/// `[SCHED_REWARD_FLOOR, 1]` for the scheduling family.
pub fn iid_uniform_trace(
    family: FamilyTag,
    n: usize,
    m: usize,
    horizon: usize,
    seed: u64,
) -> Result<DemandTrace> {
    if n == 0 || m == 0 || horizon == 0 {
        return Err(Error::Domain("uniform trace needs N, m, T >= 1".into()));
    }
    if family == FamilyTag::Sched && n != 1 {
        return Err(Error::Domain("scheduling demands are scalars; N must be 1".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let mut rounds = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let cols = (0..m)
            .map(|_| match family {
                FamilyTag::Sched => {
                    let x = SCHED_REWARD_FLOOR + (1.0 - SCHED_REWARD_FLOOR) * rng.next_f64();
                    DemandColumn::Dense(vec![x])
                }
                _ => DemandColumn::OneHot(rng.next_below(n as u64) as usize),
            })
            .collect();
        rounds.push(DemandMatrix::new(n, cols)?);
    }
    DemandTrace::new(n, m, family, rounds)
}

/// Write a trace in the line-oriented text format. The write goes through a
/// temporary file and an atomic rename so a crash never leaves a torn file.
pub fn save_trace(trace: &DemandTrace, path: &Path) -> Result<()> {
    let mut body = String::new();
    body.push_str(&format!(
        "# fairalloc-trace v1 N={} m={} family={}\n",
        trace.n, trace.m, trace.family
    ));
    for round in &trace.rounds {
        let mut line = String::new();
        for i in 0..trace.m {
            if i > 0 {
                line.push('|');
            }
            match round.column(i) {
                DemandColumn::OneHot(j) => line.push_str(&format!("{}", j + 1)),
                DemandColumn::Dense(v) => {
                    let mut field = String::new();
                    for (idx, x) in v.iter().enumerate() {
                        if idx > 0 {
                            field.push(',');
                        }
                        field.push_str(&format!("{x}"));
                    }
                    // A single integral value would read back as one-hot;
                    // force a decimal marker to keep the field dense.
                    if !field.contains([',', '.', 'e', 'E']) {
                        field.push_str(".0");
                    }
                    line.push_str(&field);
                }
            }
        }
        body.push_str(&line);
        body.push('\n');
    }
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp)?;
    file.write_all(body.as_bytes())?;
    file.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Parse a trace file; errors carry 1-based line numbers.
pub fn load_trace(path: &Path) -> Result<DemandTrace> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::TraceParse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let (n, m, family) = parse_header(header).map_err(|msg| Error::TraceParse { line: 1, msg })?;

    let mut rounds = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() != m {
            return Err(Error::TraceParse {
                line: line_no,
                msg: format!("expected {m} fields separated by '|', found {}", fields.len()),
            });
        }
        let mut cols = Vec::with_capacity(m);
        for (agent, field) in fields.iter().enumerate() {
            cols.push(parse_field(field, n).map_err(|msg| Error::TraceParse {
                line: line_no,
                msg: format!("agent {}: {msg}", agent + 1),
            })?);
        }
        let matrix = DemandMatrix::new(n, cols).map_err(|e| Error::TraceParse {
            line: line_no,
            msg: e.to_string(),
        })?;
        rounds.push(matrix);
    }
    if rounds.is_empty() {
        return Err(Error::TraceParse {
            line: 1,
            msg: "trace has no rounds".into(),
        });
    }
    DemandTrace::new(n, m, family, rounds)
}

fn parse_header(header: &str) -> std::result::Result<(usize, usize, FamilyTag), String> {
    let rest = header
        .strip_prefix("# fairalloc-trace v1 ")
        .ok_or_else(|| "header must start with '# fairalloc-trace v1'".to_string())?;
    let mut n = None;
    let mut m = None;
    let mut family = None;
    for part in rest.split_whitespace() {
        if let Some(v) = part.strip_prefix("N=") {
            n = Some(v.parse::<usize>().map_err(|e| format!("bad N: {e}"))?);
        } else if let Some(v) = part.strip_prefix("m=") {
            m = Some(v.parse::<usize>().map_err(|e| format!("bad m: {e}"))?);
        } else if let Some(v) = part.strip_prefix("family=") {
            family = Some(FamilyTag::parse(v).map_err(|e| e.to_string())?);
        } else {
            return Err(format!("unknown header field {part:?}"));
        }
    }
    match (n, m, family) {
        (Some(n), Some(m), Some(f)) if n > 0 && m > 0 => Ok((n, m, f)),
        _ => Err("header needs positive N=, m= and family=".into()),
    }
}

fn parse_field(field: &str, n: usize) -> std::result::Result<DemandColumn, String> {
    if field.is_empty() {
        return Err("empty field".into());
    }
    if field.contains(',') || field.contains('.') || field.contains('e') || field.contains('E') {
        let values: Vec<f64> = field
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad real {s:?}: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        if values.len() != n {
            return Err(format!("dense field has {} entries, expected {n}", values.len()));
        }
        Ok(DemandColumn::Dense(values))
    } else {
        let id: usize = field
            .trim()
            .parse()
            .map_err(|e| format!("bad one-hot id {field:?}: {e}"))?;
        if id == 0 || id > n {
            return Err(format!("one-hot id {id} outside 1..={n}"));
        }
        Ok(DemandColumn::OneHot(id - 1))
    }
}
