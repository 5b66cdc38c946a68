use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cllab_cli::config::{Experiment, RunConfig, ScanMethod};
use cllab_cli::{output, CliError};

#[derive(Parser)]
#[command(name = "cllab", version, about = "Complex Langevin and Fokker-Planck experiments")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration; command-line values override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (CLLAB_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct BArg {
    #[arg(short = 'B', long = "b")]
    b: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Im<z^2> of the quartic model over a list of B values.
    QuarticScan {
        #[arg(short = 'B', long = "b", value_delimiter = ',')]
        b_list: Option<Vec<f64>>,
        #[arg(long)]
        method: Option<ScanMethod>,
    },
    /// Steady Fokker-Planck density of the quartic model.
    FpSolve(BArg),
    /// Power-law fits of the steady-state tails.
    Tails {
        #[command(flatten)]
        b: BArg,
        /// Window for the y marginal as LO,HI.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        window: Option<Vec<f64>>,
    },
    /// Boundary term E(y) of <z^2>.
    Boundary(BArg),
    /// Small-eps expansion at B = sqrt 3 - eps.
    Asymptotics {
        #[arg(long)]
        order: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// One-link SU(2) model.
    Su2 {
        #[arg(short = 'A', long = "a")]
        a: Option<f64>,
        #[command(flatten)]
        b: BArg,
        /// Matrix Langevin without the cooled coordinate representation.
        #[arg(long)]
        uncooled: bool,
    },
    /// Abelian chain: per-step drift off the cooled manifold.
    U1CoolCheck {
        #[arg(long)]
        n_links: Option<usize>,
    },
    /// Eigenvalue dynamics of the cooled SU(n) chain.
    Eigen {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        n_links: Option<usize>,
        #[arg(short = 'A', long = "a")]
        a: Option<f64>,
        #[command(flatten)]
        b: BArg,
    },
    /// Rerun from the config embedded in an output file.
    Replay { file: PathBuf },
}

impl Cmd {
    fn experiment(&self) -> Option<Experiment> {
        Some(match self {
            Cmd::QuarticScan { .. } => Experiment::QuarticScan,
            Cmd::FpSolve(_) => Experiment::FpSolve,
            Cmd::Tails { .. } => Experiment::Tails,
            Cmd::Boundary(_) => Experiment::Boundary,
            Cmd::Asymptotics { .. } => Experiment::Asymptotics,
            Cmd::Su2 { .. } => Experiment::Su2,
            Cmd::U1CoolCheck { .. } => Experiment::U1CoolCheck,
            Cmd::Eigen { .. } => Experiment::Eigen,
            Cmd::Replay { .. } => return None,
        })
    }

    fn apply(self, cfg: &mut RunConfig) {
        match self {
            Cmd::QuarticScan { b_list, method } => {
                set(&mut cfg.scan.b_list, b_list);
                set(&mut cfg.scan.method, method);
            }
            Cmd::FpSolve(b) => set(&mut cfg.fp_solve.b, b.b),
            Cmd::Tails { b, window } => {
                set(&mut cfg.tails.b, b.b);
                if let Some(w) = window {
                    cfg.tails.window_y = [w[0], w[1]];
                }
            }
            Cmd::Boundary(b) => set(&mut cfg.boundary.b, b.b),
            Cmd::Asymptotics { order, eps } => {
                set(&mut cfg.asymptotics.order, order);
                set(&mut cfg.asymptotics.eps_list, eps);
            }
            Cmd::Su2 { a, b, uncooled } => {
                set(&mut cfg.su2.a, a);
                set(&mut cfg.su2.b, b.b);
                if uncooled {
                    cfg.su2.cooled = false;
                }
            }
            Cmd::U1CoolCheck { n_links } => set(&mut cfg.u1.n_links, n_links),
            Cmd::Eigen { n, n_links, a, b } => {
                set(&mut cfg.eigen.n, n);
                set(&mut cfg.eigen.n_links, n_links);
                set(&mut cfg.eigen.a, a);
                set(&mut cfg.eigen.b, b.b);
            }
            Cmd::Replay { .. } => {}
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match std::env::var("CLLAB_THREADS") {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| CliError::Config(format!("CLLAB_THREADS: not a thread count: `{s}`"))),
        Err(_) => Ok(flag),
    }
}

fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match (&cli.cmd, &cli.config) {
        (Cmd::Replay { file }, _) => output::embedded_config(file)?,
        (cmd, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            let mut table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let exp = cmd.experiment().expect("not replay");
            table.insert("experiment".into(), toml::Value::String(exp.name().into()));
            RunConfig::from_toml(&toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))?)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        (cmd, None) => RunConfig::new(cmd.experiment().expect("not replay")),
    };
    if let Some(out) = cli.out {
        cfg.out = out.to_string_lossy().into_owned();
    }
    set(&mut cfg.seed, cli.seed);
    cli.cmd.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = threads(cli.threads)? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = resolve(cli)?;
    for f in cllab_cli::run(&cfg)? {
        println!("{}", std::path::Path::new(&cfg.out).join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(1)
        }
    }
}
