//! Thin command-line front end over the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fairalloc::adversary::TraceSpec;
use fairalloc::feasible::{
    project_capped_simplex, random_doubly_stochastic, random_feasible_point, FamilyTag,
    FeasibleFamily,
};
use fairalloc::harness::{run_experiment, slope_fit, write_atomic, ExperimentConfig};
use fairalloc::policy::{RunMode, DEFAULT_STEP_SCALE};
use fairalloc::{
    approx_factor, bvn_decompose, lb_ratio, madow_sample, offline_optimal, Error, SplitMix64,
};

#[derive(Parser)]
#[command(
    name = "fairalloc",
    about = "Online proportional-fair allocation experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the online policy against a trace and emit per-checkpoint metrics.
    Simulate(ExperimentArgs),
    /// Compute the hindsight-optimal fixed allocation per checkpoint.
    Offline(ExperimentArgs),
    /// Sweep alphas and horizons, then fit regret growth exponents.
    PhaseScan(ExperimentArgs),
    /// Table of approximation-factor bounds over an alpha grid.
    LbCurve(LbCurveArgs),
    /// Frequency audit of the randomized rounding routines.
    SampleTest(SampleTestArgs),
    /// Projection audit: variational-inequality residuals on random inputs.
    ProjectTest(ProjectTestArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Fairness exponents, comma separated.
    #[arg(long = "alpha", value_delimiter = ',', default_value = "0.5")]
    alphas: Vec<f64>,
    /// Checkpoint horizons, comma separated, ascending.
    #[arg(long = "T", value_delimiter = ',', default_value = "1024")]
    horizons: Vec<usize>,
    /// Feasible family: cache | sched | match.
    #[arg(long, default_value = "cache")]
    family: String,
    /// Library size (cache) or demand dimension.
    #[arg(long = "N", default_value_t = 50)]
    n: usize,
    /// Cache capacity.
    #[arg(long = "k", default_value_t = 5)]
    k: usize,
    /// Number of agents.
    #[arg(long = "m", default_value_t = 4)]
    m: usize,
    /// Trace file to replay instead of a generator.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Generator: zipf:<s> | lb:<eta>:<instance> | uniform.
    #[arg(long, default_value = "zipf:0.8")]
    gen: String,
    /// frac | int.
    #[arg(long, default_value = "frac")]
    mode: String,
    /// Seeds, comma separated.
    #[arg(long = "seed", value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Multiplier x in the step size x * D / sqrt(S).
    #[arg(long = "step-scale", default_value_t = DEFAULT_STEP_SCALE)]
    step_scale: f64,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LbCurveArgs {
    /// Alpha grid start.
    #[arg(long, default_value_t = 0.05)]
    from: f64,
    /// Alpha grid end (inclusive).
    #[arg(long, default_value_t = 0.95)]
    to: f64,
    /// Alpha grid step.
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleTestArgs {
    /// Draws per audited vector.
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    /// Library size for the cache audit.
    #[arg(long = "N", default_value_t = 10)]
    n: usize,
    /// Cache capacity for the cache audit.
    #[arg(long = "k", default_value_t = 3)]
    k: usize,
    /// Matrix side for the matching audit.
    #[arg(long = "m", default_value_t = 4)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectTestArgs {
    /// Random inputs per family.
    #[arg(long, default_value_t = 200)]
    inputs: usize,
    /// Random feasible witnesses per input.
    #[arg(long, default_value_t = 500)]
    witnesses: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => {
            let config = experiment_config(&args)?;
            let (_, csv) = run_experiment(&config)?;
            print!("{csv}");
            Ok(())
        }
        Command::Offline(args) => {
            let (family, _) = parse_family(&args)?;
            let spec = parse_trace_spec(&args, family)?;
            let mut csv = String::from("T,alpha,seed,fairness_offline");
            for i in 1..=family.agents() {
                csv.push_str(&format!(",Rstar_{i}"));
            }
            csv.push('\n');
            for &seed in &args.seeds {
                let trace = spec.generate(seed)?;
                for &alpha in &args.alphas {
                    for &horizon in &args.horizons {
                        let sol = offline_optimal(&family, &trace, horizon, alpha, None, None)?;
                        csv.push_str(&format!("{horizon},{alpha},{seed},{}", sol.value));
                        for r in &sol.per_agent {
                            csv.push_str(&format!(",{r}"));
                        }
                        csv.push('\n');
                    }
                }
            }
            emit(&csv, args.out.as_deref())
        }
        Command::PhaseScan(args) => {
            let config = experiment_config(&args)?;
            let (rows, csv) = run_experiment(&config)?;
            if let Some(path) = &config.out_path {
                eprintln!("wrote {}", path.display());
            } else {
                print!("{csv}");
            }
            // Per-alpha slope of mean surrogate regret across seeds.
            println!("alpha,slope_surrogate_regret,theory_max(0,1/2-alpha)");
            for &alpha in &config.alphas {
                let pts: Vec<(f64, f64)> = config
                    .horizons
                    .iter()
                    .filter_map(|&t| {
                        let vals: Vec<f64> = rows
                            .iter()
                            .filter(|r| r.horizon == t && r.alpha == alpha)
                            .map(|r| r.surrogate_regret)
                            .collect();
                        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                        (mean > 0.0).then_some((t as f64, mean))
                    })
                    .collect();
                match slope_fit(&pts) {
                    Ok(slope) => {
                        println!("{alpha},{slope},{}", (0.5 - alpha).max(0.0));
                    }
                    Err(_) => println!("{alpha},nan,{}", (0.5 - alpha).max(0.0)),
                }
            }
            Ok(())
        }
        Command::LbCurve(args) => {
            if !(args.step > 0.0) || args.from <= 0.0 || args.to >= 1.0 || args.from > args.to {
                return Err(Error::Domain("alpha grid must lie inside (0, 1)".into()));
            }
            let mut csv = String::from("alpha,lb_ratio,eta_star,c_alpha\n");
            let mut alpha = args.from;
            while alpha <= args.to + 1e-12 {
                let (ratio, eta) = lb_ratio(alpha)?;
                let upper = approx_factor(alpha)?;
                csv.push_str(&format!("{alpha},{ratio},{eta},{upper}\n"));
                alpha = (alpha + args.step).min(1.0 - 1e-9);
                if (alpha - args.to).abs() < 1e-12 {
                    alpha = args.to;
                }
            }
            emit(&csv, args.out.as_deref())
        }
        Command::SampleTest(args) => {
            let mut rng = SplitMix64::new(args.seed);
            let mut csv = String::from("audit,index,target,frequency,deviation,limit\n");
            // Madow audit on a random inclusion-probability vector.
            let mut p: Vec<f64> = (0..args.n).map(|_| rng.next_f64()).collect();
            project_capped_simplex(&mut p, args.k as f64);
            let mut counts = vec![0usize; args.n];
            for _ in 0..args.draws {
                let set = madow_sample(&p, args.k, rng.next_f64())?;
                if set.len() != args.k {
                    return Err(Error::Domain("madow returned a wrong-size set".into()));
                }
                for i in set {
                    counts[i] += 1;
                }
            }
            let mut worst = 0.0f64;
            for (i, &c) in counts.iter().enumerate() {
                let freq = c as f64 / args.draws as f64;
                let dev = (freq - p[i]).abs();
                let limit = 4.0 * (p[i] * (1.0 - p[i]) / args.draws as f64).sqrt();
                worst = worst.max(if limit > 0.0 { dev / limit } else { 0.0 });
                csv.push_str(&format!("madow,{i},{},{freq},{dev},{limit}\n", p[i]));
            }
            // Matching audit: reconstruction error of the decomposition.
            let mat = random_doubly_stochastic(args.m, &mut rng);
            let terms = bvn_decompose(&mat, args.m, 1e-9)?;
            let mut rebuilt = vec![0.0; args.m * args.m];
            for (c, perm) in &terms {
                for (a, &r) in perm.iter().enumerate() {
                    rebuilt[a * args.m + r] += c;
                }
            }
            let recon = rebuilt
                .iter()
                .zip(&mat)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            csv.push_str(&format!(
                "bvn,0,{},{},{recon},1e-9\n",
                terms.len(),
                terms.iter().map(|(c, _)| c).sum::<f64>()
            ));
            emit(&csv, args.out.as_deref())?;
            if worst > 1.0 {
                return Err(Error::Domain(format!(
                    "madow frequency deviation exceeded its limit ({worst:.2}x)"
                )));
            }
            if recon > 1e-9 {
                return Err(Error::Domain(format!(
                    "matching decomposition reconstruction error {recon:.3e}"
                )));
            }
            Ok(())
        }
        Command::ProjectTest(args) => {
            let mut rng = SplitMix64::new(args.seed);
            let families = [
                FeasibleFamily::SharedCappedSimplex {
                    library: 5,
                    capacity: 2,
                    users: 2,
                },
                FeasibleFamily::JobSimplex { machines: 4 },
                FeasibleFamily::BirkhoffPolytope { side: 3 },
            ];
            println!("family,max_vi_residual,limit");
            for family in families {
                let mut worst = f64::NEG_INFINITY;
                for _ in 0..args.inputs {
                    let v: Vec<f64> = (0..family.decision_dim())
                        .map(|_| 4.0 * rng.next_f64() - 2.0)
                        .collect();
                    let y = family.project(&v)?;
                    for _ in 0..args.witnesses {
                        let z = random_feasible_point(&family, &mut rng);
                        let resid: f64 = v
                            .iter()
                            .zip(&y)
                            .zip(&z)
                            .map(|((vi, yi), zi)| (vi - yi) * (zi - yi))
                            .sum();
                        worst = worst.max(resid);
                    }
                }
                println!("{},{worst},1e-7", family.tag());
                if worst > 1e-7 {
                    return Err(Error::Domain(format!(
                        "projection residual {worst:.3e} above 1e-7 for {}",
                        family.tag()
                    )));
                }
            }
            Ok(())
        }
    }
}

fn emit(text: &str, out: Option<&std::path::Path>) -> Result<(), Error> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_family(args: &ExperimentArgs) -> Result<(FeasibleFamily, FamilyTag), Error> {
    let tag = FamilyTag::parse(&args.family)?;
    let family = match tag {
        FamilyTag::Cache => FeasibleFamily::SharedCappedSimplex {
            library: args.n,
            capacity: args.k,
            users: args.m,
        },
        FamilyTag::Sched => FeasibleFamily::JobSimplex { machines: args.m },
        FamilyTag::Match => FeasibleFamily::BirkhoffPolytope { side: args.m },
    };
    family.validate()?;
    Ok((family, tag))
}

fn parse_trace_spec(args: &ExperimentArgs, family: FeasibleFamily) -> Result<TraceSpec, Error> {
    if let Some(path) = &args.trace {
        return Ok(TraceSpec::File { path: path.clone() });
    }
    let horizon = *args.horizons.last().ok_or_else(|| {
        Error::Domain("at least one horizon is required".into())
    })?;
    let parts: Vec<&str> = args.gen.split(':').collect();
    match parts[0] {
        "zipf" => {
            let s: f64 = parts
                .get(1)
                .ok_or_else(|| Error::Domain("zipf generator needs zipf:<s>".into()))?
                .parse()
                .map_err(|e| Error::Domain(format!("bad zipf exponent: {e}")))?;
            Ok(TraceSpec::ZipfCache {
                library: args.n,
                users: args.m,
                exponent: s,
                horizon,
            })
        }
        "lb" => {
            let eta: f64 = parts
                .get(1)
                .ok_or_else(|| Error::Domain("lb generator needs lb:<eta>:<instance>".into()))?
                .parse()
                .map_err(|e| Error::Domain(format!("bad eta: {e}")))?;
            let instance: u8 = parts
                .get(2)
                .ok_or_else(|| Error::Domain("lb generator needs lb:<eta>:<instance>".into()))?
                .parse()
                .map_err(|e| Error::Domain(format!("bad instance: {e}")))?;
            Ok(TraceSpec::LowerBound {
                horizon,
                eta,
                instance,
                library: args.n,
            })
        }
        "uniform" => Ok(TraceSpec::IidUniform {
            family: family.tag(),
            n: family.demand_dim(),
            m: family.agents(),
            horizon,
        }),
        other => Err(Error::Domain(format!("unknown generator {other:?}"))),
    }
}

fn experiment_config(args: &ExperimentArgs) -> Result<ExperimentConfig, Error> {
    let (family, _) = parse_family(args)?;
    let spec = parse_trace_spec(args, family)?;
    let mut config = ExperimentConfig::new(spec, family);
    config.alphas = args.alphas.clone();
    config.horizons = args.horizons.clone();
    config.mode = RunMode::parse(&args.mode)?;
    config.step_scale = args.step_scale;
    config.seeds = args.seeds.clone();
    config.out_path = args.out.clone();
    config.validate()?;
    Ok(config)
}

