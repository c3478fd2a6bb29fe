//! Command-line front end: run scenarios, compare engines, fit utility weights.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 finished with
//! non-convergence warnings.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use datamarket::irl::{self, Action, FitConfig};
use datamarket::scenario::{self, ScenarioConfig};
use datamarket::{Engine, GlobalParams, UtilityWeights};

#[derive(Parser)]
#[command(name = "datamarket", version, about = "Data-market reputation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or all engines over several seeds and write reports.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Engine name, or `all`.
        #[arg(long)]
        engine: Option<String>,
        /// Number of consecutive seeds.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate engine aggregates found under the given directories.
    Compare {
        #[arg(long = "in", num_args = 1.., required = true)]
        dirs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inverse reinforcement learning on user event traces.
    Irl {
        #[command(subcommand)]
        command: IrlCommand,
    },
}

#[derive(Subcommand)]
enum IrlCommand {
    /// Fit reward weights and write the derived utility coefficients.
    Fit {
        /// CSV with `user_id,order,action` rows.
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Parameter file supplying the IRL discounts and regularizer.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Keep only this many buyer-like users (most votes, few dataset creations).
        #[arg(long)]
        users: Option<usize>,
        /// Dataset-creation percentile cap used with `--users`.
        #[arg(long, default_value_t = 50.0)]
        creation_percentile: f64,
        #[arg(long, default_value_t = 2000)]
        max_iter: usize,
    },
}

enum Outcome {
    Clean,
    Warnings,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate {
            config,
            engine,
            seeds,
            out,
        } => simulate(&config, engine.as_deref(), seeds, out),
        Command::Compare { dirs, out } => compare(&dirs, out.as_deref()),
        Command::Irl {
            command:
                IrlCommand::Fit {
                    traces,
                    out,
                    config,
                    users,
                    creation_percentile,
                    max_iter,
                },
        } => irl_fit(&traces, &out, config.as_deref(), users, creation_percentile, max_iter),
    };
    match result {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Warnings) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn simulate(
    path: &Path,
    engine: Option<&str>,
    seeds: Option<u64>,
    out: Option<PathBuf>,
) -> anyhow::Result<Outcome> {
    let mut config = ScenarioConfig::<f64>::load(path)
        .with_context(|| format!("loading {}", path.display()))?;
    match engine {
        Some(name) if name.eq_ignore_ascii_case("all") => config.engines = Engine::ALL.to_vec(),
        Some(name) => config.engines = vec![name.parse()?],
        None => {}
    }
    if let Some(n) = seeds {
        if n == 0 {
            bail!("--seeds must be positive");
        }
        config.set_seed_count(n);
    }
    if let Some(dir) = out {
        config.out_dir = dir;
    }
    let outcomes = scenario::run_scenario(&config)?;
    let aggregates: Vec<_> = outcomes.iter().map(|o| o.aggregate.clone()).collect();
    print!("{}", scenario::comparison_table(&scenario::compare(&aggregates)));
    println!("reports written to {}", config.out_dir.display());
    let warnings: Vec<&String> = outcomes.iter().flat_map(|o| &o.warnings).collect();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(if warnings.is_empty() { Outcome::Clean } else { Outcome::Warnings })
}

fn compare(dirs: &[PathBuf], out: Option<&Path>) -> anyhow::Result<Outcome> {
    let mut aggregates = Vec::new();
    for dir in dirs {
        let found = scenario::find_aggregates(dir)?;
        if found.is_empty() {
            bail!("no engine reports under {}", dir.display());
        }
        aggregates.extend(found);
    }
    let rows = scenario::compare(&aggregates);
    print!("{}", scenario::comparison_table(&rows));
    if let Some(path) = out {
        std::fs::write(path, scenario::comparison_csv(&rows))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let warned = aggregates.iter().any(|a| a.warnings > 0);
    Ok(if warned { Outcome::Warnings } else { Outcome::Clean })
}

fn irl_fit(
    traces_path: &Path,
    out: &Path,
    config: Option<&Path>,
    users: Option<usize>,
    creation_percentile: f64,
    max_iter: usize,
) -> anyhow::Result<Outcome> {
    let params = match config {
        Some(p) => GlobalParams::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => GlobalParams::default(),
    };
    let mut traces = irl::load_traces(traces_path)
        .with_context(|| format!("reading {}", traces_path.display()))?;
    if let Some(n) = users {
        traces = irl::select_buyer_like_users(&traces, n, creation_percentile);
    }
    let fit_config = FitConfig {
        max_iter,
        ..FitConfig::default()
    };
    let (_, report) = irl::irl_fit(&traces, &params, &fit_config)?;
    let raw = report.action_weights(irl::N_ACTIONS);
    let normalized = irl::normalize_weights(&raw)?;
    let (l, o, u) = irl::derive_lou(&normalized)?;
    let weights = UtilityWeights {
        utility_quality: l,
        utility_reputation: o,
        utility_price: u,
    };
    let mut comments = vec![format!(
        "fitted on {} users; {} iterations; gradient norm {:.3e}; converged {}",
        traces.len(),
        report.iterations,
        report.gradient_norm,
        report.converged
    )];
    comments.push("action raw normalized".into());
    for a in Action::ALL {
        comments.push(format!(
            "{} {:.4} {:.4}",
            a.name(),
            raw[a.index()],
            normalized[a.index()]
        ));
    }
    std::fs::write(out, weights.to_config_string(&comments))
        .with_context(|| format!("writing {}", out.display()))?;
    for c in &comments {
        println!("{c}");
    }
    println!("l = {l:.4}  o = {o:.4}  u = {u:.4}");
    let mut outcome = Outcome::Clean;
    if !report.converged {
        eprintln!("warning: gradient ascent stopped at the iteration cap");
        outcome = Outcome::Warnings;
    }
    if report.value_iteration_capped {
        eprintln!("warning: soft value iteration hit its sweep cap");
        outcome = Outcome::Warnings;
    }
    Ok(outcome)
}
