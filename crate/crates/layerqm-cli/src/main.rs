use clap::Parser;
use layerqm_cli::{emit, parse_config_for, run_job, CliError, Format, Mode};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

/// Bound states, scattering and magnetic gaps of point interactions in a
/// Dirichlet layer.
#[derive(Parser)]
#[command(name = "layerqm", version)]
struct Args {
    /// xi-scan, bound-states, smatrix, magnetic-gaps or eigenfunction-grid
    mode: Mode,
    /// TOML job document
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides output.path, stdout when neither is set
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json; overrides output.format
    #[arg(long)]
    format: Option<Format>,
    /// Leave the wall-clock timestamp out of the metadata
    #[arg(long)]
    no_timestamp: bool,
}

fn run(args: Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    let job = parse_config_for(&text, args.mode)?;
    let mut table = run_job(&job)?;
    if !args.no_timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        table.meta("timestamp_unix", secs);
    }
    let format = args.format.unwrap_or(job.output.format);
    let path = args.out.or_else(|| job.output.path.as_ref().map(PathBuf::from));
    let io = |e: io::Error| CliError::Io(e.to_string());
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?);
            emit(&table, format, &mut w)?;
            w.flush().map_err(io)
        }
        None => {
            let mut w = io::stdout().lock();
            emit(&table, format, &mut w)?;
            w.flush().map_err(io)
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("layerqm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
