mod cli;
mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::cli::{Cli, Command};
use crate::commands::Ctx;
use crate::config::{FileConfig, UsageError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let pretty = cli.pretty || file.pretty.unwrap_or(false);
    let ctx = Ctx { file, pretty };
    match &cli.command {
        Command::Detect(a) => commands::detect(&ctx, a),
        Command::DetectEnhanced(a) => commands::detect_enhanced_cmd(&ctx, a),
        Command::Encode(a) => commands::encode(&ctx, a),
        Command::Match(a) => commands::match_cmd(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Enroll(a) => commands::enroll(&ctx, a),
        Command::Identify(a) => commands::identify(&ctx, a),
    }
}
