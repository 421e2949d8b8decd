use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hitlbo::engine::{compare_selectors, parse_seed_range, sweep};
use hitlbo::{Campaign, CampaignConfig, CampaignHandle, Mode, RunOptions, SelectorKind};

#[derive(Parser)]
#[command(name = "hitlbo", version, about = "Human-in-the-loop Bayesian optimization campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one campaign and write trace.csv, summary.json and labels.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write every published preference snapshot.
        #[arg(long)]
        snapshots: bool,
    },
    /// Run a campaign per seed (and per selector) and compare selectors.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `A..B` (half-open) or `A..=B`.
        #[arg(long)]
        seeds: String,
        /// Comma-separated selectors; defaults to the config's.
        #[arg(long, value_delimiter = ',')]
        selectors: Option<Vec<SelectorKind>>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Start a live campaign behind the HTTP API.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Where to write outputs on shutdown.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> Result<CampaignConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    CampaignConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(config: &Path, seed: Option<u64>, out: PathBuf, snapshots: bool) -> Result<(), String> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let opts = RunOptions {
        out_dir: Some(out.clone()),
        persist_snapshots: snapshots,
    };
    let outcome = hitlbo::run_campaign(&cfg, &opts).map_err(|e| e.to_string())?;
    println!(
        "best_value {} after {} iterations, {} labels, {} posterior versions -> {}",
        outcome.summary.best_value,
        outcome.trace.len(),
        outcome.summary.labels_total,
        outcome.summary.versions_published,
        out.display()
    );
    match outcome.aborted {
        Some(reason) => Err(format!("campaign aborted: {reason} (partial outputs written)")),
        None => Ok(()),
    }
}

fn run_sweep(config: &Path, seeds: &str, selectors: Option<Vec<SelectorKind>>, out: PathBuf) -> Result<(), String> {
    let cfg = load_config(config)?;
    let seeds = parse_seed_range(seeds).map_err(|e| e.to_string())?;
    let runs = sweep(&cfg, seeds, selectors.as_deref(), Some(&out)).map_err(|e| e.to_string())?;
    println!("selector,n_seeds,mean_final_best,std_final_best,mean_labels");
    for s in compare_selectors(&runs) {
        println!(
            "{},{},{},{},{}",
            s.selector, s.n_seeds, s.mean_final_best, s.std_final_best, s.mean_labels
        );
    }
    let aborted = runs.iter().filter(|r| r.aborted).count();
    if aborted > 0 {
        eprintln!("{aborted} of {} runs aborted", runs.len());
    }
    println!("comparison written to {}", out.join("comparison.csv").display());
    Ok(())
}

fn serve(config: &Path, host: &str, port: u16, out: Option<PathBuf>) -> Result<(), String> {
    let cfg = load_config(config)?;
    if cfg.mode != Mode::Live {
        log::warn!("serving a sim-mode campaign: /api/pairs will stay empty");
    }
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| format!("bad address {host}:{port}: {e}"))?;
    let handle = CampaignHandle::new(cfg).map_err(|e| e.to_string())?;
    let campaign = Campaign::start(
        handle.clone(),
        RunOptions {
            out_dir: out,
            persist_snapshots: false,
        },
    )
    .map_err(|e| e.to_string())?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(hitlbo_server::serve(handle.clone(), addr, async {
        let _ = tokio::signal::ctrl_c().await;
    }))
    .map_err(|e| e.to_string())?;
    handle.stop();
    let outcome = campaign.wait().map_err(|e| e.to_string())?;
    println!(
        "stopped after {} iterations, best_value {}, {} labels",
        outcome.trace.len(),
        outcome.summary.best_value,
        outcome.summary.labels_total
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            snapshots,
        } => run(&config, seed, out, snapshots),
        Command::Sweep {
            config,
            seeds,
            selectors,
            out,
        } => run_sweep(&config, &seeds, selectors, out),
        Command::Serve { config, port, host, out } => serve(&config, &host, port, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
