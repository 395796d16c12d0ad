use std::path::PathBuf;

use ald_cli::config::Profile;
use ald_core::{knn_kl, AnnealSchedule};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ald", version, about = "Annealed Langevin sampling experiments")]
struct Cli {
    /// Worker threads for chain simulation and neighbor search.
    #[arg(long, env = "ALD_WORKERS", global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment a config describes and write CSV and plot script.
    Run {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// `full` or `ci`.
        #[arg(long, default_value = "full")]
        profile: Profile,
    },
    /// Tabulate theory bounds and condition verdicts for a config.
    Bounds {
        config: PathBuf,
        #[arg(long, default_value = "full")]
        profile: Profile,
    },
    /// kNN estimate of KL(P || Q) from two sample files.
    Kl {
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
        #[arg(long, default_value_t = 20)]
        k: usize,
    },
    /// Print the annealing schedule.
    Schedule {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        s: f64,
    },
    /// Regenerate a plot script from a results CSV.
    Plot {
        csv: PathBuf,
        script: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        log_floor: f64,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("building worker pool")?;
    }
    match cli.command {
        Command::Run { config, seed, profile } => {
            let cfg = ald_cli::prepare(&config, profile, seed)?;
            let summary = ald_cli::run_config(&cfg, profile, seed)?;
            for p in &summary.written {
                println!("wrote {}", p.display());
            }
        }
        Command::Bounds { config, profile } => {
            let cfg = ald_cli::prepare(&config, profile, None)?;
            let (_, written) = ald_cli::run_bounds(&cfg)?;
            for p in &written {
                println!("wrote {}", p.display());
            }
        }
        Command::Kl { p, q, k } => {
            let p = ald_cli::read_matrix(&p)?;
            let q = ald_cli::read_matrix(&q)?;
            let est = knn_kl(p.view(), q.view(), k)?;
            println!(
                "kl={} k={} n={} m={} dim={} clamped_pairs={}",
                est.value, est.k, est.n, est.m, est.dim, est.clamped_pairs
            );
        }
        Command::Schedule { n, dt, s } => {
            let schedule = AnnealSchedule::new(n, dt, s)?;
            println!("k,t,theta,kappa");
            for k in 0..schedule.n_steps() {
                println!("{k},{},{},{}", k as f64 * dt, schedule.theta(k), schedule.kappa(k));
            }
        }
        Command::Plot { csv, script, log_floor } => {
            let rows = ald_cli::output::read_csv(&csv)?;
            ald_cli::output::emit_plot_script(&rows, &csv, log_floor, &script)?;
            println!("wrote {}", script.display());
        }
    }
    Ok(())
}
