use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use selfai_cli::bench::{read_report, render_report, run_suite, write_report, BenchSuite};
use selfai_cli::run::{resume_study, run_study, BackendChoice, RunOptions};
use selfai_cli::serve::{serve, ServiceConfig, TOKEN_VAR};
use selfai_cli::CliError;
use selfai_core::agent::{ChatClient, EndpointConfig, HttpTransport, RetryConfig};
use selfai_core::config::draft_config;
use selfai_core::solvers::SolverKind;
use selfai_core::synthetic;

#[derive(Parser)]
#[command(name = "selfai", version, about = "Autonomous hyperparameter search over discrete grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a study from a config file and run it.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// grid, tpe, random, llm, llm-es, cognitive or scripted.
        #[arg(long)]
        solver: SolverKind,
        /// Chat-completions URL; defaults to SELFAI_ENDPOINT.
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trials executed at the same time.
        #[arg(long, default_value_t = 1)]
        slots: usize,
        /// Hold stop verdicts for approval instead of stopping.
        #[arg(long)]
        supervised: bool,
        /// Benchmark table to look trial values up in.
        #[arg(long, conflicts_with = "command")]
        table: Option<PathBuf>,
        /// Simulated latency per tabulated trial, in ms.
        #[arg(long, default_value_t = 0)]
        latency_ms: u64,
        /// Shell command run per trial; `{name}` placeholders take config values.
        #[arg(long)]
        command: Option<String>,
        #[arg(long)]
        workdir: Option<PathBuf>,
        #[arg(long, default_value_t = 3600)]
        timeout: u64,
        #[arg(long, default_value = "data/studies")]
        data: PathBuf,
        #[arg(long)]
        id: Option<String>,
        /// Suggestions per round; defaults to the config's n_jobs.
        #[arg(long)]
        n_jobs: Option<usize>,
        /// Scripted replies used instead of a model endpoint.
        #[arg(long)]
        playbook: Option<PathBuf>,
    },
    /// Continue a study from its event log.
    Resume {
        #[arg(long, default_value = "data/studies")]
        data: PathBuf,
        #[arg(long)]
        study: String,
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Run a benchmark suite and write its report.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        /// Defaults to the suite's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Print a report as tables.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Print per-task and overall ranks instead of per-run rows.
        #[arg(long)]
        ranks: bool,
    },
    /// Serve the study-control API; the bearer token comes from SELFAI_API_TOKEN.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, default_value = "data/studies")]
        data: PathBuf,
    },
    /// Ask a model to fill the study config template from a research summary.
    Draft {
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        endpoint: Option<String>,
        /// Where to write the draft; printed when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the generated benchmark tables.
    Synth {
        #[arg(long, default_value = "data/benchmarks")]
        out: PathBuf,
    },
}

fn print(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            solver,
            endpoint,
            seed,
            slots,
            supervised,
            table,
            latency_ms,
            command,
            workdir,
            timeout,
            data,
            id,
            n_jobs,
            playbook,
        } => {
            let backend = match (table, command) {
                (Some(path), _) => Some(BackendChoice::Table { path, latency_ms }),
                (None, Some(command)) => Some(BackendChoice::Command {
                    command,
                    workdir,
                    timeout_secs: timeout,
                }),
                (None, None) => None,
            };
            let opts = RunOptions {
                endpoint,
                seed,
                slots,
                supervised,
                backend,
                data,
                id,
                n_jobs,
                playbook,
                ..RunOptions::new(config, solver)
            };
            print(&run_study(&opts)?.render());
        }
        Command::Resume { data, study, endpoint } => {
            print(&resume_study(&data, &study, endpoint.as_deref())?.render());
        }
        Command::Bench { suite, out, endpoint } => {
            let spec = BenchSuite::load(&suite)?;
            let doc = run_suite(&spec, &suite, EndpointConfig::from_env(endpoint.as_deref()))?;
            match out.or(spec.out) {
                Some(path) => {
                    write_report(&doc, &path)?;
                    print(&doc.runs_table());
                }
                None => print(&render_report(&doc)),
            }
        }
        Command::Report { input, ranks } => {
            let doc = read_report(&input)?;
            if ranks {
                print(&doc.ranks_table());
            } else {
                print(&doc.runs_table());
            }
            if !doc.failures.is_empty() {
                print(&doc.failures_table());
            }
        }
        Command::Serve { port, host, data } => {
            let token = std::env::var(TOKEN_VAR).ok().filter(|t| !t.trim().is_empty());
            let token = token.ok_or(CliError::NoToken)?;
            let rt = tokio::runtime::Runtime::new().map_err(CliError::Serve)?;
            rt.block_on(serve(SocketAddr::new(host, port), ServiceConfig::new(data, token)))?;
        }
        Command::Draft { summary, endpoint, out } => {
            let text = std::fs::read_to_string(&summary).map_err(|source| CliError::Read {
                path: summary.clone(),
                source,
            })?;
            let ep = EndpointConfig::from_env(endpoint.as_deref()).ok_or(CliError::NoEndpoint)?;
            let model = ep.model.clone();
            let mut client = ChatClient::new(Box::new(HttpTransport::new(ep))).with_retry(RetryConfig::default());
            let (_, config) = draft_config(&text, &mut client, &model)?;
            let doc = config.emit();
            match out {
                Some(path) => write_file(&path, &doc)?,
                None => print(&doc),
            }
            eprintln!("review the drafted config before running it");
        }
        Command::Synth { out } => {
            std::fs::create_dir_all(&out).map_err(|source| CliError::Write {
                path: out.clone(),
                source,
            })?;
            for spec in synthetic::shipped() {
                let path = synthetic::generate(&spec).write(&out)?;
                print(&format!("{}\n", path.display()));
            }
        }
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn main() -> ExitCode {
    // The HTTP client logs request URLs; endpoints must never reach the log.
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .parse_env("RUST_LOG")
        .filter_module("ureq", log::LevelFilter::Off)
        .filter_module("ureq_proto", log::LevelFilter::Off)
        .init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
