use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pto::bench::{self, Method, RunRequest, RunSummary};
use pto::config::{RunConfig, DEFAULT_VLIM};
use pto::output;
use pto::{Error, ProblemKind};

/// Proportional topology optimization benchmarks.
#[derive(Parser, Debug)]
#[command(name = "pto", version)]
struct Cli {
    /// TOML key/value configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one method on one problem.
    Run {
        #[command(flatten)]
        params: Params,
        /// ptos, ptoc or oc.
        #[arg(long)]
        method: Option<Method>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// PTOc and OC over a list of volume fractions.
    Sweep {
        #[command(flatten)]
        params: Params,
        /// Comma-separated volume fractions (default 0.25,0.30,...,0.50).
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Alternate PTOc and PTOs, feeding each one's output to the other.
    Alternate {
        #[command(flatten)]
        params: Params,
        #[arg(long, default_value_t = 0.5)]
        start_vf: f64,
        #[arg(long, default_value_t = 5)]
        rounds: usize,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// PTOc and OC side by side at one volume fraction.
    Compare {
        #[command(flatten)]
        params: Params,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
struct Params {
    /// mbb, cantilever or lbracket.
    #[arg(long)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    nelx: Option<usize>,
    #[arg(long)]
    nely: Option<usize>,
    #[arg(long = "E0")]
    e0: Option<f64>,
    #[arg(long = "Emin")]
    e_min: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    penal: Option<f64>,
    /// Element edge length.
    #[arg(long = "L")]
    edge_length: Option<f64>,
    /// Total load.
    #[arg(long)]
    lv: Option<f64>,
    /// Number of elements the load is spread over.
    #[arg(long)]
    ld: Option<usize>,
    #[arg(long)]
    rmin: Option<f64>,
    /// Volume fraction.
    #[arg(long)]
    vlim: Option<f64>,
    /// Stress limit.
    #[arg(long)]
    vmslim: Option<f64>,
    /// Density bounds as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    xlim: Option<Vec<f64>>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

impl Params {
    fn into_config(self, method: Option<Method>) -> RunConfig {
        RunConfig {
            problem: self.problem,
            method,
            nelx: self.nelx,
            nely: self.nely,
            e0: self.e0,
            e_min: self.e_min,
            nu: self.nu,
            penal: self.penal,
            edge_length: self.edge_length,
            lv: self.lv,
            ld: self.ld,
            rmin: self.rmin,
            vlim: self.vlim,
            vmslim: self.vmslim,
            xlim: self.xlim.map(|v| [v[0], v[1]]),
            q: self.q,
            alpha: self.alpha,
            max_iterations: self.max_iterations,
        }
    }
}

const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_SOLVER: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidGrid(_)
        | Error::InvalidMaterial(_)
        | Error::InvalidBoundary(_)
        | Error::InvalidSpec(_)
        | Error::InvalidConfig(_) => EXIT_INVALID,
        Error::SingularSystem { .. }
        | Error::UnreachableTarget { .. }
        | Error::StagnantInnerLoop { .. }
        | Error::BisectionFailure(_) => EXIT_SOLVER,
        Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NOT_CONVERGED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load(path: Option<&Path>, flags: RunConfig) -> pto::Result<RunConfig> {
    let file = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(file.overridden_by(flags))
}

/// Returns whether every run converged.
fn execute(cli: Cli) -> pto::Result<bool> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::Run { params, method, out } => {
            let config = load(file, params.into_config(method))?;
            let spec = config.problem_spec();
            let request = config.request()?;
            let run = bench::run_benchmark(&spec, &request, out.as_deref())?;
            print!("{}", output::format_summary(&spec, &run.summary));
            println!("wall_time_s = {:.3}", run.summary.wall_time.as_secs_f64());
            Ok(run.summary.converged())
        }
        Command::Sweep { params, fractions, out } => {
            let config = load(file, params.into_config(None))?;
            let problem = config.problem_spec().build()?;
            let fractions = fractions.unwrap_or_else(bench::default_sweep);
            let points = bench::run_sweep(&problem, &fractions, &config.tuning(), |p| {
                println!("vf={:.2}  {}  |  {}  gap={:.4}", p.volume_fraction, p.ptoc, p.oc, p.relative_gap());
            })?;
            let table = output::format_sweep(&points);
            write_table(out.as_deref(), "sweep.tsv", &table)?;
            print!("{table}");
            Ok(points.iter().all(|p| p.ptoc.converged() && p.oc.converged()))
        }
        Command::Alternate {
            params,
            start_vf,
            rounds,
            out,
        } => {
            let config = load(file, params.into_config(None))?;
            let problem = config.problem_spec().build()?;
            let alt = bench::run_alternation(&problem, start_vf, rounds, &config.tuning(), |s| println!("{s}"))?;
            let table = output::format_alternation(&alt);
            write_table(out.as_deref(), "alternation.tsv", &table)?;
            print!("{table}");
            let converged = alt.summaries().all(RunSummary::converged);
            Ok(converged)
        }
        Command::Compare { params, out } => {
            let config = load(file, params.into_config(None))?;
            let spec = config.problem_spec();
            let problem = spec.build()?;
            let vf = config.vlim.unwrap_or(DEFAULT_VLIM);
            let mut converged = true;
            for method in [Method::Ptoc, Method::Oc] {
                let request = RunRequest::new(method, vf).with_tuning(config.tuning());
                let run = bench::run_problem(&problem, &request)?;
                if let Some(dir) = &out {
                    output::write_run(&dir.join(method.to_string()), &spec, &problem, &run)?;
                }
                println!("{}", run.summary);
                converged &= run.summary.converged();
            }
            Ok(converged)
        }
    }
}

fn write_table(dir: Option<&Path>, name: &str, text: &str) -> pto::Result<()> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}
