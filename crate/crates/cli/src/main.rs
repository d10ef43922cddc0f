use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dnad_cli::commands::{self, Failed, OracleKind, EXIT_CHECK_FAILED};
use dnad_cli::config::RunConfig;
use dnad_cli::io::{emit, read_snapshots, write_json};
use dnad_core::Anisotropy;

#[derive(Parser)]
#[command(name = "dnad", version, about = "Doubly nonlinear anisotropic diffusion: solver and checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print derived exponents and regime flags.
    Derive {
        /// Take `alpha`, `p` and `lambda_struct` from a run configuration.
        #[arg(long, conflicts_with_all = ["alpha", "p", "dim"])]
        config: Option<PathBuf>,
        /// Checked against the number of exponents when given.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, required_unless_present = "config")]
        alpha: Option<f64>,
        /// Comma-separated growth exponents, one per axis.
        #[arg(long, value_delimiter = ',', required_unless_present = "config")]
        p: Vec<f64>,
        #[arg(long)]
        lambda_struct: Option<f64>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
        /// Write the JSON report to this file; the table still goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the solver from a TOML configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.csv_path`.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Overrides `output.snapshot_dir`.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Overrides `output.summary_path`; the summary always goes to stdout too.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Fit decay and support laws to a time series.
    #[command(alias = "scaling")]
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        /// Fit window `t_lo,t_hi`; defaults to the last decade of the series.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        window: Option<Vec<f64>>,
        /// Second series (e.g. another threshold) for slope sensitivity.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the randomized and deterministic lemma checks.
    Check {
        /// Defaults to the `seed` key of `--config`, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        /// Tighten the mollifier tolerance to zero so the suite must fail.
        #[arg(long)]
        expect_fail: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate energy estimates on stored snapshots.
    Energy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        snapshots: PathBuf,
        #[arg(long)]
        probes: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the solver against an exact solution.
    Oracle {
        #[arg(value_enum)]
        which: OracleKind,
        #[arg(long = "resolution", value_delimiter = ',', default_values_t = [128usize, 256])]
        resolutions: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn window_arg(w: Option<Vec<f64>>) -> Option<(f64, f64)> {
    w.map(|v| (v[0], v[1]))
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Derive {
            config,
            dim,
            alpha,
            p,
            lambda_struct,
            json,
            out,
        } => {
            let mut anis = match (config, alpha) {
                (Some(path), _) => RunConfig::load(&path)?.anisotropy()?,
                (None, Some(alpha)) => {
                    if let Some(n) = dim.filter(|&n| n != p.len()) {
                        bail!("--dim {n} does not match the {} exponents given", p.len());
                    }
                    Anisotropy::new(alpha, &p)?
                }
                (None, None) => bail!("--alpha is required without --config"),
            };
            if let Some(l) = lambda_struct {
                anis = anis.with_lambda_struct(l)?;
            }
            let report = commands::derive_report(&anis);
            if let Some(path) = &out {
                write_json(path, &report)?;
            }
            if json {
                emit(None, &report)?;
            } else {
                print!("{}", commands::derive_table(&report));
            }
        }
        Cmd::Run {
            config,
            csv,
            snapshots,
            summary,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.output.csv_path = csv.or(cfg.output.csv_path);
            cfg.output.snapshot_dir = snapshots.or(cfg.output.snapshot_dir);
            cfg.output.summary_path = summary.or(cfg.output.summary_path);
            let (out, summary) = commands::run_config(&cfg)?;
            emit(None, &summary)?;
            if let Some(e) = out.abort {
                return Err(e).context("run stopped early; partial outputs were written");
            }
        }
        Cmd::Fit {
            config,
            csv,
            window,
            compare,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let series = commands::read_csv(&csv)?;
            let other = compare.as_deref().map(commands::read_csv).transpose()?;
            let report = commands::fit_report(&cfg, &series, window_arg(window), other.as_deref())?;
            emit(out.as_deref(), &report)?;
        }
        Cmd::Check {
            seed,
            config,
            trials,
            expect_fail,
            out,
        } => {
            let seed = match (seed, config) {
                (Some(s), _) => s,
                (None, Some(path)) => RunConfig::load(&path)?.seed.unwrap_or(0),
                (None, None) => 0,
            };
            let report = commands::check_report(seed, trials, expect_fail);
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            emit(out.as_deref(), &report)?;
            if !report.pass {
                return Err(Failed {
                    code: EXIT_CHECK_FAILED,
                    message: "at least one check failed".into(),
                }
                .into());
            }
        }
        Cmd::Energy {
            config,
            snapshots,
            probes,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let snaps = read_snapshots(&snapshots)?;
            let file = commands::ProbeFile::load(&probes)?;
            let report = commands::energy_report(&cfg.anisotropy()?, &snaps, &file)?;
            emit(out.as_deref(), &report)?;
        }
        Cmd::Oracle { which, resolutions, out } => {
            let report = commands::oracle_report(which, &resolutions)?;
            emit(out.as_deref(), &report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
