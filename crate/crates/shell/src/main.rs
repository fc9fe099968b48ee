use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vesicle_core::veriflab::SweepConfig;
use vesicle_shell::commands::{self, with_threads};
use vesicle_shell::error::{EXIT_VERIFICATION, EXIT_OK};
use vesicle_shell::{Resolved, Result, RunConfig, ShellError};

/// Stochastic phase-field α-Navier-Stokes vesicle simulator.
#[derive(Parser)]
#[command(name = "vesicle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for ensembles; defaults to RAYON_NUM_THREADS or all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration (or a manifest from an earlier run).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seed; overrides `noise.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulate even when the trace hypothesis fails.
    #[arg(long)]
    override_hypothesis: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One trajectory: ledger CSV, snapshots, manifest.
    Run(Common),
    /// Monte Carlo moments over independent noise streams.
    Ensemble {
        #[command(flatten)]
        common: Common,
        /// Number of trajectories; overrides `ensemble.trajectories`.
        #[arg(long)]
        trajectories: Option<usize>,
    },
    /// Identity and inequality sweeps.
    Verify {
        /// TOML sweep configuration; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sample seed; overrides the sweep's.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Same-noise runs from nearby initial data.
    Twin {
        #[command(flatten)]
        common: Common,
        /// Initial distance in ‖w‖_V + ‖φ‖_H².
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        /// Steps between distance samples.
        #[arg(long, default_value_t = 10)]
        every: u64,
    },
    /// Eigenvalue and noise-trace table.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        /// Number of modes to list, in eigenvalue order.
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long)]
        override_hypothesis: bool,
    },
}

fn load(common: &Common) -> Result<(Resolved, PathBuf)> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.noise.seed = seed;
    }
    if common.override_hypothesis {
        cfg.noise.override_hypothesis = true;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    cfg.provenance = None;
    let out = cfg.output.dir.clone();
    Ok((cfg.resolve()?, out))
}

fn sweep(path: Option<&Path>, seed: Option<u64>) -> Result<SweepConfig> {
    let mut cfg = match path {
        None => SweepConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ShellError::Config(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| ShellError::Config(e.to_string()))?
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(common) => {
            let (resolved, out) = load(&common)?;
            let o = commands::run(&resolved, &out)?;
            eprintln!(
                "t = {:.6}, {} ledger rows, {} snapshots, output in {}",
                o.final_state.t,
                o.ledger_rows,
                o.snapshots.len() + 1,
                out.display()
            );
        }
        Command::Ensemble {
            common,
            trajectories,
        } => {
            let (resolved, out) = load(&common)?;
            let r = trajectories.unwrap_or(resolved.config.ensemble.trajectories);
            let o = with_threads(cli.threads, || commands::ensemble(&resolved, r, Some(&out)))??;
            let s = &o.summary;
            println!(
                "R = {}, k = {}: E[sup F^k] = {:.6e} ± {:.2e}, sup E[F^k] = {:.6e}, E[martingale] = {:.3e} ± {:.2e}",
                s.trajectories,
                s.moment,
                s.mean_sup_fk,
                s.half_width_sup_fk,
                s.sup_mean_fk,
                s.martingale_mean,
                s.half_width_martingale
            );
        }
        Command::Verify { config, out, seed } => {
            let cfg = sweep(config.as_deref(), seed)?;
            let reports = commands::verify(&cfg, out.as_deref())?;
            let mut failed = Vec::new();
            for r in &reports {
                println!("{}", r.summary());
                if !r.pass {
                    failed.push(r.id.clone());
                }
            }
            if !failed.is_empty() {
                eprintln!("failing reports: {}", failed.join(", "));
                return Ok(EXIT_VERIFICATION);
            }
        }
        Command::Twin {
            common,
            delta,
            every,
        } => {
            let (resolved, out) = load(&common)?;
            let rep = commands::twin(&resolved, delta, every, Some(&out))?;
            let max = rep.distance.iter().cloned().fold(0.0, f64::max);
            println!(
                "delta = {delta:e}: max distance {max:.6e}, final {:.6e}, fitted rate {:.4}, curvature excess {:.4}",
                rep.distance.last().copied().unwrap_or(0.0),
                rep.growth.rate,
                rep.growth.curvature_excess
            );
            if delta == 0.0 && !rep.bitwise_equal {
                return Err(ShellError::Verification("zero-distance twins diverged".into()));
            }
            if delta > 0.0 && !rep.growth.at_most_linear() {
                return Err(ShellError::Verification(
                    "log-distance grows faster than linearly".into(),
                ));
            }
        }
        Command::Spectrum {
            config,
            modes,
            override_hypothesis,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.noise.override_hypothesis |= override_hypothesis;
            let rows = commands::spectrum(&cfg, modes)?;
            print!("{}", commands::spectrum_text(&cfg, &rows)?);
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
