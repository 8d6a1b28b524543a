use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sobolev_core::bench::{run_benchmark, write_csv, BenchConfig, Experiment};
use sobolev_core::estimators::{Quantity, ZnRule};
use sobolev_core::pipeline::{run_estimate, run_test, EstimateRequest, TestRequest};
use sobolev_core::report::Envelope;
use sobolev_core::rescale::{RescaleMode, DEFAULT_MARGIN};
use sobolev_core::samples::{read_csv, Samples};
use sobolev_core::Error;

const EXIT_REJECT: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "sobolev",
    version,
    about = "Sobolev inner products, norms and distances from samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate an inner product, squared norm or squared distance.
    Estimate(EstimateArgs),
    /// Two-sample test of p = q.
    Test(TestArgs),
    /// Run a Monte Carlo experiment and emit a CSV table and JSON summary.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum QuantityArg {
    Inner,
    Norm,
    Distance,
}

impl From<QuantityArg> for Quantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::Inner => Quantity::InnerProduct,
            QuantityArg::Norm => Quantity::SquaredNorm,
            QuantityArg::Distance => Quantity::SquaredDistance,
        }
    }
}

#[derive(Args, Debug)]
#[group(multiple = false)]
struct ZnArgs {
    /// Fixed frequency radius.
    #[arg(long, value_name = "Z")]
    zn: Option<usize>,
    /// Rate-optimal radius for densities of smoothness S_PRIME.
    #[arg(long, value_name = "S_PRIME")]
    auto_optimal: Option<f64>,
    /// Budget radius n^(T/D).
    #[arg(long, value_name = "T")]
    theta: Option<f64>,
}

impl ZnArgs {
    fn rule(&self) -> Option<ZnRule> {
        if let Some(zn) = self.zn {
            Some(ZnRule::Manual { zn })
        } else if let Some(s_prime) = self.auto_optimal {
            Some(ZnRule::Optimal { s_prime, c: 1.0 })
        } else {
            self.theta.map(|theta| ZnRule::Budget { theta })
        }
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    quantity: QuantityArg,
    /// Sobolev order s >= 0.
    #[arg(long, value_name = "S")]
    order: f64,
    #[command(flatten)]
    zn: ZnArgs,
    /// Attach a confidence interval at this level, e.g. 0.95.
    #[arg(long, value_name = "LEVEL")]
    ci: Option<f64>,
    /// identity, wrap, minmax, box:A,B or random.
    #[arg(long, default_value = "identity")]
    rescale: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    file: PathBuf,
    file2: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long, value_name = "S")]
    order: f64,
    #[arg(long, value_name = "Z", conflicts_with = "theta")]
    zn: Option<usize>,
    #[arg(long, value_name = "T")]
    theta: Option<f64>,
    #[arg(long, value_name = "A")]
    alpha: f64,
    #[arg(long, default_value = "identity")]
    rescale: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    file1: PathBuf,
    file2: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_name = "TAG")]
    experiment: String,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', value_name = "n1,n2,...")]
    grid: Option<Vec<usize>>,
    #[arg(long, value_name = "K")]
    trials: Option<usize>,
    #[arg(long, value_name = "S")]
    order: Option<f64>,
    #[command(flatten)]
    zn: ZnArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write TAG.csv and TAG.json here instead of stdout/stderr.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_rescale(spec: &str, seed: u64) -> Result<RescaleMode, Failure> {
    match spec {
        "identity" => Ok(RescaleMode::Identity),
        "wrap" => Ok(RescaleMode::Wrap),
        "minmax" => Ok(RescaleMode::MinMax {
            margin: DEFAULT_MARGIN,
        }),
        "random" => Ok(RescaleMode::Random {
            seed,
            margin: DEFAULT_MARGIN,
        }),
        other => {
            let bounds = other
                .strip_prefix("box:")
                .ok_or_else(|| usage(format!("unknown rescale mode '{other}'")))?;
            let parts: Vec<&str> = bounds.split(',').collect();
            let parsed: Result<Vec<f64>, _> =
                parts.iter().map(|p| p.trim().parse::<f64>()).collect();
            match parsed.as_deref() {
                Ok([a, b]) if a < b => Ok(RescaleMode::FixedBox {
                    lo: vec![*a],
                    hi: vec![*b],
                }),
                _ => Err(usage(format!("expected box:A,B with A < B, got '{other}'"))),
            }
        }
    }
}

/// A one-dimensional declared box applies to every column.
fn broadcast_box(mode: RescaleMode, dim: usize) -> RescaleMode {
    match mode {
        RescaleMode::FixedBox { lo, hi } if lo.len() == 1 => RescaleMode::FixedBox {
            lo: vec![lo[0]; dim],
            hi: vec![hi[0]; dim],
        },
        m => m,
    }
}

fn load(path: &Path) -> Result<Samples, Failure> {
    read_csv(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn estimate(args: EstimateArgs) -> Result<u8, Failure> {
    let quantity = Quantity::from(args.quantity);
    let mode = parse_rescale(&args.rescale, args.seed)?;
    match (quantity, &args.file2) {
        (Quantity::SquaredNorm, Some(_)) => return Err(usage("--quantity norm takes one file")),
        (Quantity::InnerProduct | Quantity::SquaredDistance, None) => {
            return Err(usage("--quantity inner and distance need two files"))
        }
        _ => {}
    }
    let x = load(&args.file)?;
    let y = args.file2.as_deref().map(load).transpose()?;
    let req = EstimateRequest {
        quantity,
        order: args.order,
        zn_rule: args.zn.rule().unwrap_or_default(),
        rescale: broadcast_box(mode, x.dim()),
        ci_level: args.ci,
        seed: args.seed,
    };
    let report = run_estimate(&req, &x, y.as_ref())?;
    println!(
        "{}",
        Envelope::new("estimate", Some(args.seed), &report).to_json()
    );
    Ok(0)
}

fn test(args: TestArgs) -> Result<u8, Failure> {
    let mode = parse_rescale(&args.rescale, args.seed)?;
    let x = load(&args.file1)?;
    let y = load(&args.file2)?;
    let rule = match (args.zn, args.theta) {
        (Some(zn), _) => ZnRule::Manual { zn },
        (None, Some(theta)) => ZnRule::Budget { theta },
        (None, None) => ZnRule::default(),
    };
    let mut req = TestRequest::new(args.order, rule, args.alpha);
    req.rescale = broadcast_box(mode, x.dim());
    let outcome = run_test(&req, &x, &y)?;
    println!(
        "{}",
        Envelope::new("test", Some(args.seed), &outcome).to_json()
    );
    Ok(if outcome.report.reject {
        EXIT_REJECT
    } else {
        0
    })
}

fn bench(args: BenchArgs) -> Result<u8, Failure> {
    let experiment: Experiment = args.experiment.parse()?;
    let mut cfg = BenchConfig::new(experiment);
    if let Some(grid) = args.grid {
        cfg.grid = grid;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    cfg.order = args.order;
    cfg.zn_rule = args.zn.rule();
    cfg.seed = args.seed;
    let out = run_benchmark(&cfg)?;
    let json = Envelope::new("bench", Some(args.seed), &out.summary).to_json();
    let io_err = |e: io::Error| Failure::Input(e.to_string());
    match args.out {
        Some(dir) => {
            fs::create_dir_all(&dir).map_err(io_err)?;
            let tag = experiment.tag();
            let file = fs::File::create(dir.join(format!("{tag}.csv"))).map_err(io_err)?;
            write_csv(&out.rows, io::BufWriter::new(file))?;
            fs::write(dir.join(format!("{tag}.json")), json + "\n").map_err(io_err)?;
        }
        None => {
            write_csv(&out.rows, io::stdout().lock())?;
            writeln!(io::stderr(), "{json}").map_err(io_err)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Test(a) => test(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
