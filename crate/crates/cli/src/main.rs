//! `da`: run single adaptation tasks or full benchmark suites over
//! pre-extracted features, and emit geodesic demo curves.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mda_core::features::{load_csv, save_binary};
use mda_core::harness::{run_suite, run_task, Dataset, HarnessConfig, Method, SuiteSpec};
use mda_core::manifold::{demo_emit, DemoKind};

#[derive(Parser)]
#[command(name = "da", version, about = "Distribution-alignment domain adaptation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one source -> target task.
    Run {
        #[arg(long)]
        dataset: Dataset,
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        /// Directory holding `<dataset>/<domain>.mdaf`.
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = "mda")]
        method: Method,
        /// JSON configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run every task of a dataset for every configured method.
    Suite {
        #[arg(long)]
        dataset: Dataset,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the table as CSV here in addition to printing it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tasks run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write sphere or shape geodesic samples as CSV.
    Demo {
        #[arg(long)]
        kind: DemoKind,
        #[arg(long, default_value_t = 21)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a `label,f1,...,fd` CSV file to the binary feature format.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<HarnessConfig> {
    match path {
        Some(p) => HarnessConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(HarnessConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            dataset,
            source,
            target,
            features,
            method,
            config,
        } => {
            let config = load_config(config.as_deref())?;
            let spec = SuiteSpec::new(dataset, features, config);
            let out = run_task(&spec, &source, &target, method)?;
            println!("{dataset} {source}->{target} {method}: {:.1}", 100.0 * out.accuracy);
            if let Some(diag) = &out.diagnostics {
                for (i, d) in diag.iter().enumerate() {
                    let acc = d.accuracy.map_or("-".to_string(), |a| format!("{:.1}", 100.0 * a));
                    println!("iter {:>2}  mu {:.4}  churn {:>5}  acc {acc}", i + 1, d.mu, d.churn);
                }
            }
            println!("confusion (rows: true class, columns: predicted):");
            for row in &out.confusion {
                let cells: Vec<String> = row.iter().map(usize::to_string).collect();
                println!("{}", cells.join(" "));
            }
        }
        Command::Suite {
            dataset,
            features,
            config,
            out,
            jobs,
        } => {
            let config = load_config(config.as_deref())?;
            let spec = SuiteSpec::new(dataset, features, config);
            let table = run_suite(&spec, jobs.max(1))?;
            print!("{}", table.to_text());
            if let Some(path) = out {
                fs::write(&path, table.to_csv())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Demo { kind, steps, out } => demo_emit(kind, steps, &out)?,
        Command::Convert { input, out } => {
            let ds = load_csv(&input)?;
            save_binary(&ds, &out)?;
            println!(
                "wrote {} ({} rows, {} features, {} classes)",
                out.display(),
                ds.n(),
                ds.d(),
                ds.class_count()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
