use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rcpgm::circuit::{emit_location_tables, reduce_coefficients, ReductionTarget, UnitCellCircuit};
use rcpgm::config::RunConfig;
use rcpgm::experiment::{analyze_experiment, find_experiments, phase_csv, plot_csv, run_experiment, ExperimentOptions};

#[derive(Parser)]
#[command(name = "rcpgm", version, about = "Monte Carlo thresholds for surface codes via random gauge models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured size and disorder sample, resuming from checkpoints.
    Run {
        config: PathBuf,
        /// Override the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to RCPGM_WORKERS or the core count).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the error-effect tables of the syndrome extraction circuit.
    Tables {
        /// Print the single-qubit location table instead of the CNOT tables.
        #[arg(long)]
        single_qubit: bool,
    },
    /// Print the effective noise rates of the circuit as a config fragment.
    Reduce {
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long)]
        p: f64,
    },
    /// Transition estimates, finite-size fits and verdicts for a results directory.
    Analyze {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Write to a file instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Tidy CSV of every curve for external plotting.
    PlotData {
        dir: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Rpgm,
    Rcpgm,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn emit(out: Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, workers } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = RunConfig::parse(&text).with_context(|| format!("parsing {}", config.display()))?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            let result = run_experiment(&cfg, &ExperimentOptions { write: true, workers })?;
            log::info!(
                "wrote {} runs to {} (config {})",
                result.runs.len(),
                cfg.output_dir.display(),
                result.config_hash
            );
        }
        Command::Tables { single_qubit } => {
            let tables = emit_location_tables(&UnitCellCircuit::toric())?;
            let text = if single_qubit { tables.single_tsv() } else { tables.cnot_tsv() };
            emit(None, &text)?;
        }
        Command::Reduce { target, p } => {
            let target = match target {
                Target::Rpgm => ReductionTarget::Rpgm,
                Target::Rcpgm => ReductionTarget::Rcpgm,
            };
            anyhow::ensure!((0.0..1.0).contains(&p), "p must lie in [0, 1), got {p}");
            let tables = emit_location_tables(&UnitCellCircuit::toric())?;
            let c = reduce_coefficients(&tables, target)?;
            let r = c.at(p);
            let mut text = String::from("[noise]\nkind = \"explicit\"\n");
            for (name, coef, value) in [
                ("px_h", c.px_h, r.px_h),
                ("px_v", c.px_v, r.px_v),
                ("py_h", c.py_h, r.py_h),
                ("py_v", c.py_v, r.py_v),
                ("pz_h", c.pz_h, r.pz_h),
                ("pz_v", c.pz_v, r.pz_v),
                ("q", c.q, r.q),
            ] {
                text.push_str(&format!("{name} = {value:?} # {coef} p\n"));
            }
            emit(None, &text)?;
        }
        Command::Analyze { dir, format, out } => {
            let exps = find_experiments(&dir)?;
            let rows = exps.iter().map(analyze_experiment).collect::<rcpgm::Result<Vec<_>>>()?;
            let text = match format {
                Format::Csv => phase_csv(&rows),
                Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
            };
            emit(out, &text)?;
        }
        Command::PlotData { dir, out } => {
            let exps = find_experiments(&dir)?;
            let rows = exps.iter().map(analyze_experiment).collect::<rcpgm::Result<Vec<_>>>()?;
            emit(out, &plot_csv(&exps, &rows))?;
        }
    }
    Ok(())
}
