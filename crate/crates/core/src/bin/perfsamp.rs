use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use perfect_sampling::analytics::{
    cftp_runtime_law, fmmr_runtime_law, id_runtime_law, rate_shapes, rev_runtime_law, DEFAULT_TAIL_TOL,
};
use perfect_sampling::chain::{exact_coalescence_prob, CoalescenceTarget, DEFAULT_ENUMERATION_BUDGET};
use perfect_sampling::harness::experiment::{ChainSpec, CouplingKind, ExperimentSpec, OutputFormat, WeightSpec};
use perfect_sampling::harness::run_experiment;
use perfect_sampling::harness::table::{default_families, scaling_table, write_scaling_csv};
use perfect_sampling::harness::verify::{describe, family_wise_p, verify_suite, VerifyConfig, VerifyLevel};
use perfect_sampling::{
    Algorithm, Error, MtfModel, OrderedChain, Permutation, SpinChainModel, SweepDir, ThreeStateModel, WeightFamily,
};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "PERFSAMP_OUT_DIR";

#[derive(Parser)]
#[command(name = "perfsamp", version, about = "Perfect sampling experiments: CFTP, FMMR and the move-to-front chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sampler repeatedly and write one record per run.
    Sample {
        chain: ChainKind,
        algo: AlgoArg,
        #[command(flatten)]
        chain_args: ChainArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print exact laws for a chain as JSON.
    Dist {
        chain: ChainKind,
        #[command(flatten)]
        chain_args: ChainArgs,
        /// Start state for running-time laws.
        #[arg(long)]
        start: Option<String>,
    },
    /// Run an experiment from a JSON spec file, or from flags.
    Experiment {
        /// Path to a JSON experiment spec.
        spec: Option<PathBuf>,
        #[arg(long, value_enum, requires = "algo")]
        chain: Option<ChainKind>,
        #[arg(long, value_enum)]
        algo: Option<AlgoArg>,
        #[command(flatten)]
        chain_args: ChainArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the verification suite; exits 1 if any check fails.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: LevelArg,
        /// Write the reports as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Exact mean running times against the rate constants, as CSV.
    Table {
        /// Comma-separated families such as `zipf,gzl:0.5,geometric:0.5`.
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<String>>,
        /// Comma-separated list sizes.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1_000usize, 10_000, 100_000])]
        sizes: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ChainKind {
    Mtf,
    ThreeState,
    Spin,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Cftp,
    Fmmr,
    FmmrSet,
    Incremental,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Cftp => Algorithm::Cftp,
            AlgoArg::Fmmr => Algorithm::Fmmr,
            AlgoArg::FmmrSet => Algorithm::FmmrSet,
            AlgoArg::Incremental => Algorithm::Incremental,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum CouplingArg {
    Auto,
    AllStates,
    Monotone,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct ChainArgs {
    /// Number of records (MTF) or sites (spin).
    #[arg(long)]
    n: Option<usize>,
    /// MTF weights: `uniform`, `zipf`, `gzl:<alpha>`, `power:<s>`,
    /// `geometric:<theta>`, or explicit comma-separated values.
    #[arg(long, default_value = "uniform")]
    weights: String,
    /// Three-state chain parameter.
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    /// Spin coupling.
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    /// Spin field at sites 1..n-1.
    #[arg(long, default_value_t = 0.5)]
    h: f64,
    /// Spin field at site n.
    #[arg(long = "big-h", default_value_t = 10.0)]
    big_h: f64,
    /// Spin sweep direction.
    #[arg(long, value_enum, default_value = "left-to-right")]
    dir: DirArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirArg {
    LeftToRight,
    RightToLeft,
}

#[derive(Args)]
struct RunArgs {
    /// FMMR start: `bottom`, `top`, `id`, `rev` or a state such as `2-1-3`.
    #[arg(long)]
    start: Option<String>,
    /// FMMR_SET target: `down:<state>` or `up:<state>`.
    #[arg(long)]
    set: Option<String>,
    #[arg(long, default_value_t = 1000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "max-window", default_value_t = 1_000_000)]
    max_window: u64,
    /// Search windows 1, 2, 4, ... instead of 1, 2, 3, ...
    #[arg(long)]
    doubling: bool,
    #[arg(long, value_enum, default_value = "auto")]
    coupling: CouplingArg,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Output file; defaults to $PERFSAMP_OUT_DIR or stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_weights(s: &str) -> anyhow::Result<WeightSpec> {
    if s.contains(',') || s.trim().parse::<f64>().is_ok() {
        let w = s
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("bad weight list {s:?}"))?;
        return Ok(WeightSpec::Explicit(w));
    }
    Ok(WeightSpec::Family(s.parse::<WeightFamily>()?))
}

fn chain_spec(kind: ChainKind, a: &ChainArgs) -> anyhow::Result<ChainSpec> {
    Ok(match kind {
        ChainKind::Mtf => ChainSpec::Mtf { n: a.n.unwrap_or(4), weights: parse_weights(&a.weights)? },
        ChainKind::ThreeState => ChainSpec::ThreeState { epsilon: a.epsilon },
        ChainKind::Spin => ChainSpec::Spin {
            n: a.n.unwrap_or(10),
            beta: a.beta,
            h: a.h,
            big_h: a.big_h,
            dir: match a.dir {
                DirArg::LeftToRight => SweepDir::LeftToRight,
                DirArg::RightToLeft => SweepDir::RightToLeft,
            },
        },
    })
}

fn experiment_spec(kind: ChainKind, algo: AlgoArg, ca: &ChainArgs, run: &RunArgs) -> anyhow::Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(chain_spec(kind, ca)?, algo.into());
    spec.start = run.start.clone();
    spec.set = run.set.clone();
    spec.replications = run.reps;
    spec.seed = run.seed;
    spec.max_window = run.max_window;
    spec.doubling = run.doubling;
    spec.coupling = match run.coupling {
        CouplingArg::Auto => CouplingKind::Auto,
        CouplingArg::AllStates => CouplingKind::AllStates,
        CouplingArg::Monotone => CouplingKind::Monotone,
    };
    spec.format = match run.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };
    spec.output = run.out.clone();
    Ok(spec)
}

fn chain_tag(chain: &ChainSpec) -> &'static str {
    match chain {
        ChainSpec::Mtf { .. } => "mtf",
        ChainSpec::ThreeState { .. } => "three_state",
        ChainSpec::Spin { .. } => "spin",
    }
}

/// Where output goes: the explicit path, else a file in the default
/// directory, else stdout.
fn sink(explicit: Option<&Path>, default_name: impl FnOnce() -> String) -> anyhow::Result<Box<dyn Write>> {
    let path = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(OUT_DIR_ENV).map(|dir| {
            let dir = PathBuf::from(dir);
            dir.join(default_name())
        }),
    };
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn run_spec(spec: &ExperimentSpec) -> anyhow::Result<ExitCode> {
    let out = run_experiment(spec)?;
    let ext = match spec.format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    let mut w = sink(spec.output.as_deref(), || {
        format!("{}_{}_seed{}.{ext}", chain_tag(&spec.chain), spec.algorithm, spec.seed)
    })?;
    out.write(spec.format, &mut w)?;
    w.flush()?;
    let s = &out.summary;
    eprintln!(
        "{} {}: {} of {} runs completed, {} timed out",
        s.chain, s.algorithm, s.completed, s.replications, s.timeouts
    );
    if let Some(m) = &s.window {
        eprintln!(
            "window: mean {:.4} (se {:.4}), median {}, q05 {}, q95 {}, max {}",
            m.mean, m.se, m.median, m.q05, m.q95, m.max
        );
    }
    if s.completed == 0 {
        eprintln!("every replication timed out");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn dist(kind: ChainKind, ca: &ChainArgs, start: Option<&str>) -> anyhow::Result<serde_json::Value> {
    Ok(match chain_spec(kind, ca)? {
        ChainSpec::Mtf { n, weights } => {
            let w = weights.build(n)?;
            let model = MtfModel::new(w.clone());
            let z = match start.unwrap_or("rev") {
                "rev" | "top" => model.top(),
                "id" | "bottom" => model.bottom(),
                other => other.parse::<Permutation>()?,
            };
            let stationary = model.stationary_law().ok().map(|law| {
                law.into_iter().map(|(z, p)| json!({"state": z.to_string(), "prob": p})).collect::<Vec<_>>()
            });
            let cftp = cftp_runtime_law(&w, 200).ok();
            let family = match &weights {
                WeightSpec::Family(f) => rate_shapes(*f).ok(),
                WeightSpec::Explicit(_) => None,
            };
            json!({
                "chain": "mtf",
                "n": n,
                "weights": w.as_slice(),
                "start": z.to_string(),
                "stationary": stationary,
                "fmmr_runtime": fmmr_runtime_law(&w, &z)?.summary(DEFAULT_TAIL_TOL),
                "rev_runtime": rev_runtime_law(&w).summary(DEFAULT_TAIL_TOL),
                "id_runtime": id_runtime_law(&w).summary(DEFAULT_TAIL_TOL),
                "cftp_runtime": cftp,
                "rate_shapes": family,
            })
        }
        ChainSpec::ThreeState { epsilon } => {
            let model = ThreeStateModel::new(epsilon)?;
            let x: u8 = start.unwrap_or("0").parse().context("three-state start must be 0, 1 or 2")?;
            let pi = model.stationary();
            let success: Vec<f64> = (0..=8u32)
                .map(|t| {
                    exact_coalescence_prob(&model, t, CoalescenceTarget::State(&x), DEFAULT_ENUMERATION_BUDGET)
                        .map(|p| p / pi[x as usize])
                })
                .collect::<Result<_, _>>()?;
            let mut pmf = vec![0.0];
            let mut t = 1;
            while (1.0 - epsilon).powi(t - 1) > DEFAULT_TAIL_TOL {
                pmf.push(epsilon * (1.0 - epsilon).powi(t - 1));
                t += 1;
            }
            json!({
                "chain": "three_state",
                "epsilon": epsilon,
                "stationary": pi,
                "cftp_window_pmf": pmf,
                "start": x,
                "fmmr_success_by_t": success,
            })
        }
        ChainSpec::Spin { n, beta, h, big_h, dir } => {
            let model = SpinChainModel::new(n, beta, h, big_h, dir)?;
            let law = model.gibbs_measure()?;
            json!({
                "chain": "spin",
                "n": n,
                "beta": beta,
                "h": h,
                "big_h": big_h,
                "bottom": model.bottom().to_string(),
                "top": model.top().to_string(),
                "stationary": law.into_iter().map(|(s, p)| json!({"state": s.to_string(), "prob": p})).collect::<Vec<_>>(),
            })
        }
    })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Sample { chain, algo, chain_args, run } => run_spec(&experiment_spec(chain, algo, &chain_args, &run)?),
        Command::Experiment { spec, chain, algo, chain_args, run } => {
            let spec = match (spec, chain, algo) {
                (Some(path), None, None) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let mut spec: ExperimentSpec =
                        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("spec: {e}")))?;
                    if run.out.is_some() {
                        spec.output = run.out.clone();
                    }
                    spec
                }
                (None, Some(chain), Some(algo)) => experiment_spec(chain, algo, &chain_args, &run)?,
                _ => bail!(Error::InvalidInput("give either a spec file or --chain and --algo".into())),
            };
            run_spec(&spec)
        }
        Command::Dist { chain, chain_args, start } => {
            let v = dist(chain, &chain_args, start.as_deref())?;
            let mut w = sink(None, || "dist.json".into())?;
            serde_json::to_writer_pretty(&mut w, &v)?;
            writeln!(w)?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { level, json } => {
            let level = match level {
                LevelArg::Quick => VerifyLevel::Quick,
                LevelArg::Full => VerifyLevel::Full,
            };
            let results = verify_suite(&VerifyConfig::new(level))?;
            let all_ok = results.iter().all(|r| r.passed());
            if json {
                let v = json!({"level": level, "passed": all_ok, "family_wise_p": family_wise_p(&results), "criteria": results});
                println!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                for r in &results {
                    println!("{r}");
                    for rep in &r.reports {
                        println!("{}", describe(rep));
                    }
                }
                println!("family-wise p (Bonferroni over chi-square tests): {:.4e}", family_wise_p(&results));
            }
            Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Table { families, sizes, out } => {
            let families = match families {
                Some(list) => list.iter().map(|s| s.parse::<WeightFamily>()).collect::<Result<Vec<_>, _>>()?,
                None => default_families(),
            };
            let rows = scaling_table(&families, &sizes)?;
            let mut w = sink(out.as_deref(), || "scaling_table.csv".into())?;
            write_scaling_csv(&rows, &mut w)?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::InvalidInput(_) | Error::DimensionMismatch { .. } | Error::Unsupported(_) => 2,
            Error::Timeout { .. } | Error::Budget { .. } => 3,
            _ => 1,
        };
    }
    if err.downcast_ref::<io::Error>().is_some() {
        return 3;
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e)
            if e.chain()
                .any(|c| c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
