use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rplsim_core::output::{append_rows, plot_data, read_rows, summarize, write_rows, Figure};
use rplsim_core::trace::write_trace;
use rplsim_core::{run_scenario, run_sweep, ResultRow, RunOptions, ScenarioConfig, SweepSpec};

#[derive(Parser)]
#[command(name = "rplsim", version, about = "RPL routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and append its result row.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// CSV file to append to; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Writes the event trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run every cell of a sweep spec.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        parallel: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reshape a results CSV into a long table for one figure.
    PlotData {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        figure: Figure,
        #[arg(long)]
        out: PathBuf,
    },
}

/// `results.csv` becomes `results.<tag>.csv`.
fn sibling(path: &Path, tag: &str) -> PathBuf {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("csv");
    path.with_extension(format!("{tag}.{ext}"))
}

fn run(config: &Path, seed: Option<u64>, out: Option<&Path>, trace: Option<&Path>) -> Result<()> {
    let mut cfg = ScenarioConfig::from_path(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let opts = RunOptions {
        record_trace: trace.is_some(),
    };
    let outcome = run_scenario(&cfg, opts)?;
    let row = ResultRow::from_outcome(&outcome);
    match out {
        Some(path) => {
            append_rows(path, &[row]).with_context(|| format!("writing {}", path.display()))?
        }
        None => write_rows(&[row], io::stdout().lock(), true)?,
    }
    if let Some(path) = trace {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_trace(&outcome.trace, BufWriter::new(file))?;
    }
    Ok(())
}

fn sweep(spec: &Path, parallel: usize, out: &Path) -> Result<()> {
    let spec = SweepSpec::from_path(spec)?;
    let result = run_sweep(&spec, parallel);
    let create = |p: &Path| File::create(p).with_context(|| format!("creating {}", p.display()));

    write_rows(&result.rows, create(out)?, true)?;
    let summary = sibling(out, "summary");
    write_rows(&summarize(&result.rows), create(&summary)?, true)?;
    let errors = sibling(out, "errors");
    write_rows(&result.failures, create(&errors)?, true)?;

    eprintln!(
        "{} runs, {} failed; rows in {}, summary in {}, failures in {}",
        result.rows.len() + result.failures.len(),
        result.failures.len(),
        out.display(),
        summary.display(),
        errors.display()
    );
    Ok(())
}

fn plot(input: &Path, figure: Figure, out: &Path) -> Result<()> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let rows = read_rows(file).with_context(|| format!("parsing {}", input.display()))?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_rows(&plot_data(&rows, figure), file, true)?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            trace,
        } => run(&config, seed, out.as_deref(), trace.as_deref()),
        Command::Sweep {
            spec,
            parallel,
            out,
        } => sweep(&spec, parallel, &out),
        Command::PlotData { input, figure, out } => plot(&input, figure, &out),
    }
}
