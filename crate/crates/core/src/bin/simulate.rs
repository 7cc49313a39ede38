use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use irsmc::harness::io::{write_records, write_rows, write_traces};
use irsmc::harness::reports::{
    cdf_report, convergence_report, energy_report, theorem1_report, CONVERGENCE_GROUPS, ENERGY_POWERS_DBM,
    THEOREM1_ANTENNAS,
};
use irsmc::harness::{sweep, Baseline, ExperimentSpec, SweepVar};
use irsmc::{Error, SystemConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepArg {
    Power,
    Elements,
    Streams,
    Groups,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportArg {
    Theorem1,
    Cdf,
    Energy,
    Convergence,
}

/// Monte Carlo simulator for IRS-assisted multigroup multicast mmWave MIMO.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Args {
    /// JSON scenario file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    sweep: Option<SweepArg>,
    /// Comma-separated subset of proposed,a,b,c,d,e.
    #[arg(long, default_value = "proposed,a,b,c,d,e")]
    baselines: String,
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    /// Results CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Phase-optimizer trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum)]
    report: Option<ReportArg>,
    /// Fill the wall_ms column (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) | Error::NotEnoughPaths(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn open_out(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Returns the number of failed runs.
fn run(args: &Args) -> Result<usize, Failure> {
    let cfg = SystemConfig::from_json_file(&args.config).map_err(|e| match e {
        Error::Io(io) => Failure::Config(format!("cannot read {}: {io}", args.config.display())),
        other => Failure::Config(other.to_string()),
    })?;
    let baselines = Baseline::parse_list(&args.baselines)?;
    if args.seeds == 0 {
        return Err(Failure::Config("--seeds must be at least 1".into()));
    }
    let out = open_out(args.out.as_deref())?;
    match args.report {
        None => {
            let sweep_var = match args.sweep {
                None => SweepVar::None,
                Some(SweepArg::Power) => SweepVar::Power,
                Some(SweepArg::Elements) => SweepVar::Elements,
                Some(SweepArg::Streams) => SweepVar::Streams,
                Some(SweepArg::Groups) => SweepVar::Groups,
            };
            let mut spec = ExperimentSpec::new(cfg, sweep_var, baselines, args.seeds);
            if sweep_var == SweepVar::None {
                spec.values = vec![SweepVar::None.current_value(&spec.base)];
            }
            spec.record_timing = args.timing;
            spec.keep_traces = args.trace.is_some();
            let res = sweep(&spec)?;
            write_records(out, &res.records)?;
            if let Some(p) = &args.trace {
                write_traces(File::create(p)?, &res.traces)?;
            }
            for r in res.records.iter().filter(|r| r.error.is_some()) {
                eprintln!("seed {} {} {}={}: {}", r.seed, r.baseline, r.sweep_var.column_name(), r.sweep_value, r.error.as_deref().unwrap_or(""));
            }
            Ok(res.failures())
        }
        Some(ReportArg::Theorem1) => {
            let rows = theorem1_report(&cfg, args.seeds, &THEOREM1_ANTENNAS)?;
            write_rows(out, &rows)?;
            Ok(rows.iter().filter(|r| r.status != "ok").count())
        }
        Some(ReportArg::Cdf) => {
            write_rows(out, &cdf_report(&cfg, args.seeds, &baselines)?)?;
            Ok(0)
        }
        Some(ReportArg::Energy) => {
            let res = energy_report(&cfg, &ENERGY_POWERS_DBM, args.seeds, &baselines)?;
            write_records(out, &res.records)?;
            Ok(res.failures())
        }
        Some(ReportArg::Convergence) => {
            let rep = convergence_report(&cfg, args.seeds, &CONVERGENCE_GROUPS)?;
            write_rows(out, &rep.iterations)?;
            if let Some(p) = &args.trace {
                write_rows(File::create(p)?, &rep.traces)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&args) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} run(s) did not complete; see the status column");
            ExitCode::from(2)
        }
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
