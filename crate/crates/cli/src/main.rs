use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use rtlfmi::bench::{bench, report_csv, report_table};
use rtlfmi::design::DesignRegistry;
use rtlfmi::pipeline::{self, FailureKind, PipelineError};
use rtlfmi::trace::TraceTable;
use rtlfmi::Duration;

#[derive(Parser)]
#[command(name = "rtlfmi", version, about = "Package RTL designs as co-simulation units and run them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an archive from a project config and print its path.
    Build { config: PathBuf },
    /// Run one archive with the step, stop time and start values of a config.
    Simulate {
        fmu: PathBuf,
        config: PathBuf,
        /// Trace CSV output (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a multi-archive plan.
    Cosim {
        plan: PathBuf,
        /// Trace CSV output (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare native and wrapped execution time.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = ["crc".to_string(), "delta_sigma".to_string()])]
        designs: Vec<String>,
        /// Simulated lengths such as 100ms, 1s, 10s.
        #[arg(long, value_delimiter = ',', value_parser = parse_length, default_values = ["100ms", "1s", "10s"])]
        lengths: Vec<Duration>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Report CSV output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn parse_length(s: &str) -> Result<Duration, String> {
    let s = s.trim();
    let (num, scale) = if let Some(n) = s.strip_suffix("ms") {
        (n, 1.0)
    } else if let Some(n) = s.strip_suffix("us") {
        (n, 1e-3)
    } else if let Some(n) = s.strip_suffix('s') {
        (n, 1e3)
    } else {
        (s, 1.0)
    };
    let v: f64 = num.trim().parse().map_err(|_| format!("bad length `{s}`"))?;
    match Duration::from_ms_f64(v * scale) {
        Some(d) if !d.is_zero() => Ok(d),
        _ => Err(format!("bad length `{s}`")),
    }
}

// A closed pipe (e.g. `| head`) is not an error.
fn stdout(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e).context("writing stdout"),
        _ => Ok(()),
    }
}

fn emit(trace: &TraceTable, output: Option<&Path>) -> Result<()> {
    if !trace.events.is_empty() || trace.isr_invocations > 0 {
        for e in &trace.events {
            eprintln!("event {}.{} at {} ms ({:?})", e.instance, e.signal, e.at.ms_text(), e.mode);
        }
        eprintln!("isr invocations: {}", trace.isr_invocations);
    }
    match output {
        Some(p) => {
            pipeline::write_text(p, &trace.to_csv())?;
            eprintln!("trace written to {}", p.display());
        }
        None => stdout(&trace.to_csv())?,
    }
    Ok(())
}

fn run(cmd: Command) -> Result<()> {
    let registry = DesignRegistry::builtin();
    match cmd {
        Command::Build { config } => {
            let path = pipeline::build(&config)?;
            println!("{}", path.display());
        }
        Command::Simulate { fmu, config, output } => {
            let cfg = pipeline::load_project(&config)?;
            let archive = pipeline::load_fmu(&fmu, &registry)?;
            let trace = pipeline::simulate(&archive, &cfg)?;
            emit(&trace, output.as_deref())?;
        }
        Command::Cosim { plan, output } => {
            let trace = pipeline::cosim(&plan, &registry)?;
            emit(&trace, output.as_deref())?;
        }
        Command::Bench { designs, lengths, runs, output } => {
            let cells = bench(&designs, &lengths, runs, &registry);
            for (row, err) in &cells {
                if let Some(e) = err {
                    eprintln!("warning: {} @ {} ms unmeasurable: {e}", row.design, row.length.ms_text());
                }
            }
            let rows: Vec<_> = cells.into_iter().map(|c| c.0).collect();
            stdout(&report_table(&rows))?;
            if let Some(p) = output {
                std::fs::write(&p, report_csv(&rows)).with_context(|| format!("writing {}", p.display()))?;
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<PipelineError>() {
        Some(e) => match e.kind() {
            FailureKind::Io => 1,
            FailureKind::Validation => 2,
            FailureKind::Runtime => 3,
        },
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // pipeline errors already embed their cause
            match e.downcast_ref::<PipelineError>() {
                Some(p) => eprintln!("error: {p}"),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths() {
        assert_eq!(parse_length("100ms").unwrap(), Duration::from_ms(100));
        assert_eq!(parse_length("1s").unwrap(), Duration::from_secs(1));
        assert_eq!(parse_length("250us").unwrap(), Duration::from_us(250));
        assert_eq!(parse_length("7").unwrap(), Duration::from_ms(7));
        assert!(parse_length("0s").is_err());
        assert!(parse_length("fast").is_err());
    }
}
