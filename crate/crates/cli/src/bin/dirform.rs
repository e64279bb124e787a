use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dirform::suite::SuiteConfig;
use dirform_cli::{emit, parse_config_with, run, summary, CliError, Command, ExperimentConfig, Overrides};

#[derive(Debug, Parser)]
#[command(name = "dirform", version, about = "Truncated non-local Dirichlet form experiments")]
struct Args {
    /// eigen, sample, propagator, form, chain, qr-report or verify
    command: String,

    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Replaces the seed in the config file.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Data file for the records; the summary then goes to stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Worker threads; results do not depend on it.
    #[arg(long, value_name = "K")]
    threads: Option<usize>,
}

fn load(args: &Args) -> Result<ExperimentConfig, CliError> {
    let command: Command = args.command.parse().map_err(CliError::Usage)?;
    let text = match &args.config {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        })?,
        None if command == Command::Verify => format!("seed = {}\n", SuiteConfig::default().seed),
        None => return Err(CliError::Usage(format!("command '{command}' needs --config PATH"))),
    };
    let overrides = Overrides {
        command: Some(command),
        seed: args.seed,
    };
    let mut cfg = parse_config_with(&text, overrides).map_err(CliError::Config)?;
    if let Some(out) = &args.out {
        cfg.set_out(&out.display().to_string());
    }
    if let Some(k) = args.threads {
        cfg.set_threads(k);
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(k) = cfg.threads {
        if k == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let out = run(&cfg);
    let data = emit::render(&out.header, &out.records);
    let path = cfg.out.as_ref().map(PathBuf::from);
    let text = summary(out.records.len(), &out.table);
    let written = emit::write_data(path.as_deref(), &data);
    if path.is_some() {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
    let code = match (written, &out.error) {
        (Err(e), _) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        (Ok(()), Some(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        (Ok(()), None) => 0,
    };
    ExitCode::from(code as u8)
}
