use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use magshield::cutoff_ladder::{convergence_report, run_pair, seed_band, ConvergencePair};
use magshield::experiment::{emit_plot_data, run_scenario, sweep, PlotKind, RunError, RunStatus};
use magshield::scenario::ScenarioConfig;
use magshield_ledger::{compute_intervals, parse_rational, LedgerError, LedgerInput};

const EXIT_RUN: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "magshield", version, about = "Magnetically shielded plasma simulator")]
struct Cli {
    /// Root directory for run outputs; defaults to the scenario's output_dir.
    #[arg(long, global = true, env = "MAGSHIELD_OUTPUT_ROOT")]
    output_root: Option<PathBuf>,
    /// Worker thread count.
    #[arg(long, global = true, env = "MAGSHIELD_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run { config: PathBuf },
    /// Run a (mu, tau) grid on top of a base scenario.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        mu: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        tau: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        repeats: u32,
    },
    /// Print the exact feasibility ledger for (mu, tau).
    Ledger {
        #[arg(long)]
        mu: String,
        #[arg(long)]
        tau: String,
        #[arg(long)]
        gamma: Option<String>,
        #[arg(long)]
        c6: Option<f64>,
        #[arg(long)]
        vmax: Option<f64>,
    },
    /// Write plot-ready text files for a run or sweep.
    Plot {
        id: String,
        #[arg(long, value_parser = parse_kind)]
        kind: PlotKind,
    },
    /// Compare dynamics at cutoffs N and N+1 for each given N.
    Pair {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        cutoffs: Vec<f64>,
        /// Read cutoffs as multiples of the thermal speed sqrt(1/(2 lambda)).
        #[arg(long)]
        thermal_units: bool,
        #[arg(long, default_value_t = 1)]
        seeds: u32,
    },
}

fn parse_kind(s: &str) -> Result<PlotKind, String> {
    s.parse()
}

fn output_root(cli_root: &Option<PathBuf>, cfg: Option<&ScenarioConfig>) -> PathBuf {
    match (cli_root, cfg) {
        (Some(r), _) => r.clone(),
        (None, Some(c)) => c.output_dir.clone(),
        (None, None) => PathBuf::from("runs"),
    }
}

fn exit_for(e: &RunError) -> ExitCode {
    match e {
        RunError::Config(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_RUN),
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, ExitCode> {
    ScenarioConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn print_json<T: serde::Serialize>(v: &T) {
    match serde_json::to_string_pretty(v) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("error: {e}"),
    }
}

fn ledger(mu: &str, tau: &str, gamma: Option<&str>, c6: Option<f64>, vmax: Option<f64>) -> ExitCode {
    let parsed = (|| -> Result<LedgerInput, LedgerError> {
        let mut input = LedgerInput::new(parse_rational(mu)?, parse_rational(tau)?);
        if let Some(g) = gamma {
            input.gamma = parse_rational(g)?;
        }
        if let Some(c) = c6 {
            input.c6 = c;
        }
        if let Some(v) = vmax {
            input.vmax = v;
        }
        Ok(input)
    })();
    match parsed.and_then(|i| compute_intervals(&i)) {
        Ok(report) => {
            print_json(&report);
            if report.feasible() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CONFIG)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn pair(config: &Path, cutoffs: &[f64], thermal_units: bool, seeds: u32, root: &Option<PathBuf>) -> ExitCode {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let scale = if thermal_units { cfg.datum.thermal_sigma() } else { 1.0 };
    let dir = output_root(root, Some(&cfg)).join(format!("pair-{}", cfg.run_id()));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_RUN);
    }
    let mut by_cutoff: Vec<Vec<ConvergencePair>> = Vec::new();
    let mut rows = String::from("cutoff_n,seed,shell_count,sup_delta,sup_eta,sup_sigma,steps\n");
    for &c in cutoffs {
        let n = c * scale;
        let mut group = Vec::new();
        for s in 0..seeds {
            let seed = cfg.seed.wrapping_add(s as u64);
            match run_pair(&cfg, n, seed) {
                Ok(p) => {
                    let sup = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
                    rows.push_str(&format!(
                        "{:?},{},{},{:?},{:?},{:?},{}\n",
                        p.cutoff_n,
                        p.seed,
                        p.shell_count,
                        sup(&p.delta_series),
                        sup(&p.eta_series),
                        p.sup_sigma,
                        p.steps
                    ));
                    group.push(p);
                }
                Err(e) => {
                    eprintln!("error: cutoff {n}, seed {seed}: {e}");
                    return exit_for(&e);
                }
            }
        }
        by_cutoff.push(group);
    }
    if let Err(e) = std::fs::write(dir.join("pairs.csv"), rows) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_RUN);
    }
    let bands: Vec<_> = by_cutoff.iter().filter_map(|g| seed_band(g)).collect();
    let firsts: Vec<ConvergencePair> = by_cutoff.iter().filter_map(|g| g.first().cloned()).collect();
    let report = convergence_report(&firsts).ok();
    print_json(&serde_json::json!({
        "dir": dir,
        "report": report,
        "bands": bands,
    }));
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = cli.threads.unwrap_or(0);
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match &cli.command {
        Command::Run { config } => {
            let cfg = match load(config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match run_scenario(config, &output_root(&cli.output_root, Some(&cfg))) {
                Ok(m) => {
                    print_json(&m);
                    if m.status == RunStatus::Completed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_RUN)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_for(&e)
                }
            }
        }
        Command::Sweep { config, mu, tau, repeats } => {
            let cfg = match load(config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let workers = if threads > 0 { threads } else { rayon::current_num_threads() };
            match sweep(&cfg, mu, tau, *repeats, &output_root(&cli.output_root, Some(&cfg)), workers) {
                Ok(r) => {
                    print_json(&serde_json::json!({
                        "sweep_id": r.sweep_id,
                        "dir": r.dir,
                        "cells": r.cells,
                    }));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_for(&e)
                }
            }
        }
        Command::Ledger { mu, tau, gamma, c6, vmax } => ledger(mu, tau, gamma.as_deref(), *c6, *vmax),
        Command::Plot { id, kind } => match emit_plot_data(&output_root(&cli.output_root, None), id, *kind) {
            Ok(path) => {
                println!("{}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_for(&e)
            }
        },
        Command::Pair { config, cutoffs, thermal_units, seeds } => {
            pair(config, cutoffs, *thermal_units, *seeds, &cli.output_root)
        }
    }
}
