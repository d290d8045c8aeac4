mod commands;
mod config;
mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::Config;
use crate::error::CliError;

/// Experiment runner for the 2-d Zakai SPDE estimators.
///
/// Settings come from `--config <file>` (flat `key = value`), then from the
/// flags below, which override the file. Model keys: mu_x, mu_y, rho_x,
/// rho_y, rho_xy, t, x0, y0, x_min, x_max, y_min, y_max.
#[derive(Parser, Debug)]
#[command(name = "zakai", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Mean and variance of every mixed difference on [0, levels]^2 at fixed k.
    Table1,
    /// Coupled level corrections of the sparse-combination hierarchy.
    Table2,
    /// Plain MC on a sparse combination (fixed --level, or tolerance --eps).
    SparseMc,
    /// Multilevel MC on sparse combinations.
    Mlmc,
    /// Plain MC on isotropic grids (fixed --level, or tolerance --eps).
    FullMc,
    /// Multilevel MC on isotropic grids.
    FullMlmc,
    /// Total cost of all four estimators over a tolerance sweep.
    CompareCost,
    /// Per-frequency moments and the high-wave decay bound.
    OracleCheck,
    /// Predicted cost against the bias/variance split.
    AlphaSearch,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Table1 => "table1",
            Command::Table2 => "table2",
            Command::SparseMc => "sparse-mc",
            Command::Mlmc => "mlmc",
            Command::FullMc => "full-mc",
            Command::FullMlmc => "full-mlmc",
            Command::CompareCost => "compare-cost",
            Command::OracleCheck => "oracle-check",
            Command::AlphaSearch => "alpha-search",
        }
    }
}

#[derive(clap::Args, Debug)]
struct Opts {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Full-size sample counts instead of the reduced defaults.
    #[arg(long, global = true)]
    full: bool,
    /// Write the sample-0 Brownian path of each level as binary files here.
    #[arg(long, global = true)]
    dump_paths: Option<PathBuf>,
    /// Write the first and last layers of a sample-0 solve as CSV.
    #[arg(long, global = true)]
    dump_field: Option<PathBuf>,
    /// Extra `key=value` settings (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[arg(long, global = true)]
    h0: Option<String>,
    #[arg(long, global = true)]
    k0: Option<String>,
    /// Fixed timestep (table1, fixed-level sparse-mc, oracle-check).
    #[arg(long, global = true)]
    k: Option<String>,
    /// Mesh width for oracle-check.
    #[arg(long, global = true)]
    h: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<String>,
    /// High-wave exponent for oracle-check.
    #[arg(long, global = true)]
    p: Option<String>,
    /// `standard` or `balanced`.
    #[arg(long, global = true)]
    index_set: Option<String>,
    #[arg(long, global = true)]
    l_star: Option<String>,
    #[arg(long, global = true)]
    levels: Option<String>,
    #[arg(long, global = true)]
    level: Option<String>,
    #[arg(long, global = true)]
    samples: Option<String>,
    /// Comma-separated tolerances.
    #[arg(long, global = true)]
    eps: Option<String>,
    /// Budget split in (0, 1), or `search`.
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// Estimator for alpha-search: full-mc, sparse-mc, full-mlmc, sparse-mlmc.
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    pilot_samples: Option<String>,
    #[arg(long, global = true)]
    max_level: Option<String>,
}

impl Opts {
    fn build_config(&self) -> Result<Config, CliError> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        let flags = [
            ("h0", &self.h0),
            ("k0", &self.k0),
            ("k", &self.k),
            ("h", &self.h),
            ("lambda", &self.lambda),
            ("p", &self.p),
            ("index_set", &self.index_set),
            ("l_star", &self.l_star),
            ("levels", &self.levels),
            ("level", &self.level),
            ("samples", &self.samples),
            ("eps", &self.eps),
            ("alpha", &self.alpha),
            ("method", &self.method),
            ("pilot_samples", &self.pilot_samples),
            ("max_level", &self.max_level),
        ];
        for (key, val) in flags {
            if let Some(v) = val {
                cfg.set(key, v)?;
            }
        }
        if let Some(s) = self.seed {
            cfg.set("seed", &s.to_string())?;
        }
        if let Some(t) = self.threads {
            cfg.set("threads", &t.to_string())?;
        }
        Ok(cfg)
    }
}

fn setup_threads(cfg: &Config) -> Result<(), CliError> {
    let threads: Option<usize> = cfg.peek("threads")?;
    match threads {
        Some(0) => Err(CliError::Config("threads must be at least 1".into())),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}"))),
        #[cfg(not(feature = "parallel"))]
        Some(n) => {
            if n > 1 {
                log::warn!("built without the `parallel` feature; running on one thread");
            }
            Ok(())
        }
        None => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.opts.build_config()?;
    setup_threads(&cfg)?;
    std::fs::create_dir_all(&cli.opts.out)?;
    let ctx = commands::Context {
        cfg,
        command: cli.command.name(),
        out: cli.opts.out.clone(),
        full: cli.opts.full,
        dump_paths: cli.opts.dump_paths.clone(),
        dump_field: cli.opts.dump_field.clone(),
    };
    match cli.command {
        Command::Table1 => commands::table1(&ctx),
        Command::Table2 => commands::table2(&ctx),
        Command::SparseMc => commands::sparse_mc(&ctx),
        Command::Mlmc => commands::estimator(&ctx, commands::Kind::SparseMlmc),
        Command::FullMc => commands::full_mc(&ctx),
        Command::FullMlmc => commands::estimator(&ctx, commands::Kind::FullMlmc),
        Command::CompareCost => commands::compare_cost(&ctx),
        Command::OracleCheck => commands::oracle_check(&ctx),
        Command::AlphaSearch => commands::alpha_search(&ctx),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("zakai {}: {e}", cli.command.name());
        std::process::exit(e.exit_code());
    }
}
