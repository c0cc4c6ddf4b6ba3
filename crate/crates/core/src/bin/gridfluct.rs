use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gridfluct::io::{self, Format, McConfigFile, StateSummary, SweepSpec};
use gridfluct::montecarlo::simulate_covariance;
use gridfluct::{linearize, solve_synchronous_state, Error, Method, Result};

#[derive(Parser)]
#[command(name = "gridfluct", version, about = "Stationary fluctuations of stochastically disturbed power networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Machine-readable output; omit for a human summary.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Write machine output to a file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Synchronous state and security margins of a network file.
    Solve { network: PathBuf },
    /// Stationary covariance by one method.
    Variance {
        network: PathBuf,
        #[arg(long, value_parser = parse_method, default_value = "numeric")]
        method: Method,
        /// Simulation settings for `--method mc`.
        #[arg(long)]
        mc_config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Every applicable route against the numeric one.
    Compare {
        network: PathBuf,
        /// Also run the Monte Carlo route with these settings.
        #[arg(long)]
        mc_config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parameter sweep described by a spec file.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo estimate of the stationary covariance.
    Simulate {
        network: PathBuf,
        #[arg(long)]
        mc_config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method `{s}`; expected numeric, uniform, closed, first-order or mc"))
}

fn mc_settings(path: &Option<PathBuf>) -> Result<McConfigFile> {
    match path {
        Some(p) => McConfigFile::load(p),
        None => Ok(McConfigFile {
            schema_version: io::SCHEMA_VERSION,
            ..Default::default()
        }),
    }
}

struct Output {
    machine: Option<String>,
    human: String,
}

/// Output plus an error to report after the output has been written.
fn run(cli: &Cli) -> Result<(Output, Option<Error>)> {
    let format = cli.format.map(|f| match f {
        OutputFormat::Csv => Format::Csv,
        OutputFormat::Json => Format::Json,
    });
    let pool = io::thread_pool()?;
    match &cli.command {
        Command::Solve { network } => {
            let net = io::load_network(network)?;
            let state = solve_synchronous_state(&net)?;
            let summary = StateSummary::new(&net, &state);
            let machine = format.map(|f| match f {
                Format::Csv => summary.to_csv(),
                Format::Json => summary.to_json(),
            });
            let insecure: Vec<usize> = (0..summary.lines.len()).filter(|&k| summary.lines[k].margin <= 0.0).collect();
            let failure = (!insecure.is_empty()).then_some(Error::InsecureState { lines: insecure });
            Ok((
                Output {
                    machine,
                    human: summary.human(),
                },
                failure,
            ))
        }
        Command::Variance {
            network,
            method,
            mc_config,
            seed,
        } => {
            let lin = linearized(network)?;
            let report = if *method == Method::MonteCarlo {
                let cfg = mc_settings(mc_config)?.resolve(&lin, *seed)?;
                pool.install(|| simulate_covariance(&lin, &cfg))?
            } else {
                io::run_method(&lin, *method, None)?
            };
            let reports = [report];
            let machine = format.map(|f| io::emit(&reports, f));
            let human = report_summary(&reports[0]);
            Ok((Output { machine, human }, None))
        }
        Command::Compare {
            network,
            mc_config,
            seed,
        } => {
            let lin = linearized(network)?;
            let mut methods = io::EXACT_ROUTES.to_vec();
            let cfg = match mc_config {
                Some(_) => {
                    methods.push(Method::MonteCarlo);
                    Some(mc_settings(mc_config)?.resolve(&lin, *seed)?)
                }
                None => None,
            };
            let cmp = pool.install(|| io::compare(&lin, &methods, cfg.as_ref()))?;
            let machine = format.map(|f| match f {
                Format::Csv => cmp.to_csv(),
                Format::Json => cmp.to_json(),
            });
            let mut human = String::from("max relative discrepancy against the numeric route\n");
            for (m, outcome) in &cmp.routes {
                match outcome {
                    io::RouteOutcome::Ran {
                        max_relative_discrepancy,
                        ..
                    } => human.push_str(&format!("  {:<14} {max_relative_discrepancy:.3e}\n", m.as_str())),
                    io::RouteOutcome::Skipped(why) => human.push_str(&format!("  {:<14} skipped: {why}\n", m.as_str())),
                }
            }
            Ok((Output { machine, human }, None))
        }
        Command::Sweep { spec, seed } => {
            let mut spec = SweepSpec::load(spec)?;
            if let Some(s) = seed {
                spec.seed = *s;
            }
            let result = io::run_sweep(&spec)?;
            let human = format!(
                "{} rows over {} grid points\n",
                result.rows.len(),
                result.rows.last().map_or(0, |r| r.point + 1)
            );
            // a sweep is data; CSV is the default machine output
            let machine = Some(result.emit(format.unwrap_or(Format::Csv)));
            Ok((Output { machine, human }, None))
        }
        Command::Simulate {
            network,
            mc_config,
            seed,
        } => {
            let lin = linearized(network)?;
            let cfg = mc_settings(mc_config)?.resolve(&lin, *seed)?;
            let report = pool.install(|| simulate_covariance(&lin, &cfg))?;
            let reports = [report];
            let machine = format.map(|f| io::emit(&reports, f));
            let human = report_summary(&reports[0]);
            Ok((Output { machine, human }, None))
        }
    }
}

fn linearized(path: &PathBuf) -> Result<gridfluct::LinearizedSystem> {
    let net = io::load_network(path)?;
    let state = solve_synchronous_state(&net)?;
    linearize(&net, &state)
}

fn report_summary(r: &gridfluct::CovarianceReport) -> String {
    let mut s = format!("method {}, {} nodes, {} lines\n", r.method, r.node_count(), r.line_count());
    for i in 0..r.node_count() {
        s.push_str(&format!("  var ω[{}] = {:.9e}\n", i + 1, r.q_omega()[(i, i)]));
    }
    for k in 0..r.line_count() {
        s.push_str(&format!("  var δ-line[{}] = {:.9e}\n", k + 1, r.q_delta()[(k, k)]));
    }
    if let Some(res) = r.diagnostics.lyapunov_residual {
        s.push_str(&format!("  Lyapunov residual {res:.2e}\n"));
    }
    if let Some(n) = r.diagnostics.samples {
        s.push_str(&format!("  {n} samples\n"));
    }
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((out, failure)) => {
            match (&out.machine, &cli.output) {
                (Some(text), Some(path)) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(1);
                    }
                    print!("{}", out.human);
                }
                (Some(text), None) => print!("{text}"),
                (None, _) => print!("{}", out.human),
            }
            match failure {
                None => ExitCode::SUCCESS,
                Some(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_assumption_violation() { 2 } else { 1 })
        }
    }
}
