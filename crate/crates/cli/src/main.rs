//! `irrm`: train, downscale, upscale, evaluate, inspect, and z-sweep.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;
mod config;

use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<irrm_core::Error> for CliError {
    fn from(e: irrm_core::Error) -> Self {
        match e {
            irrm_core::Error::NonFinite { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

const USAGE: &str = "\
usage: irrm <command> [flags]

commands:
  train      --data DIR --out DIR [--config PATH] [--seed N] [--resume CKPT] [config flags]
  downscale  --model CKPT --in PNG --out-lr PNG [--out-z PATH] [--quantize-lr]
  upscale    --model CKPT --in-lr PNG --out PNG (--z PATH | [--sample-sigma S] [--seed N])
  eval       (--model CKPT | --bicubic [--scale N]) --data DIR [--draws K] [--sigma S]
             [--crop-border B] [--seed N] [--quantize-lr]
  inspect    (--model CKPT | [--config PATH] [config flags]) [--size HxW]
  zsweep     --model CKPT --in PNG --out DIR [--sigmas LIST] [--seed N]

Configuration is flat `key = value` text with `#` comments; any config key
can also be passed as a --key value flag, which overrides the file. The
resolved configuration is echoed to stderr before each run. IRRM_THREADS
caps eval parallelism.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("\n{USAGE}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(args: &[String]) -> CliResult<()> {
    let Some(command) = args.first() else {
        return Err(CliError::Usage("missing command".into()));
    };
    let flags = commands::parse_flags(&args[1..])?;
    match command.as_str() {
        "train" => commands::train::run(flags),
        "downscale" => commands::downscale::run(flags),
        "upscale" => commands::upscale::run(flags),
        "eval" | "roundtrip" => commands::eval::run(flags),
        "inspect" => commands::inspect::run(flags),
        "zsweep" => commands::zsweep::run(flags),
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            Ok(())
        }
        other => Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
}
