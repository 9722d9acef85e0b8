mod args;
mod commands;
mod config;
mod emit;

use std::ffi::OsString;
use std::io::Write;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command, CriterionSub};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Lab(#[from] lpplab::LabError),
    #[error("output error: {0}")]
    Output(String),
}

const EXIT_VERDICT: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn parse(argv: &[OsString]) -> Result<(Cli, config::RunConfig), ExitCode> {
    let mut cmd = Cli::command();
    cmd.build();
    let fail = |e: clap::Error| {
        let _ = e.print();
        ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 })
    };
    let mut matches = cmd.clone().try_get_matches_from(argv).map_err(fail)?;
    if let Some(path) = matches.get_one::<std::path::PathBuf>("config").cloned() {
        let merged = config::merge_config(argv, &cmd, &matches, &path).map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        })?;
        matches = cmd.clone().try_get_matches_from(merged).map_err(fail)?;
    }
    let cfg = config::effective(&cmd, &matches);
    let cli = Cli::from_arg_matches(&matches).map_err(fail)?;
    Ok((cli, cfg))
}

fn dispatch(cli: &Cli) -> Result<commands::Outcome, CliError> {
    let seed = cli.common.seed;
    match &cli.command {
        Command::Shape(a) => commands::shape(a, seed),
        Command::Criterion(a) => match &a.sub {
            None => commands::criterion(a),
            Some(CriterionSub::Pstar) => commands::pstar(),
            Some(CriterionSub::Phi(p)) => commands::phi(p),
        },
        Command::Phi(a) => commands::phi(a),
        Command::Pstar => commands::pstar(),
        Command::Busemann(a) => commands::busemann(a, seed),
        Command::Coarse(a) => commands::coarse(a, seed),
        Command::Legendre(a) => commands::legendre(a, seed),
        Command::Dist(a) => commands::dist(a, seed),
    }
}

fn run(cli: &Cli, cfg: &config::RunConfig) -> Result<Option<bool>, CliError> {
    let (artifact, verdict) = dispatch(cli)?;
    let bytes = artifact.render(cfg, cli.common.format)?;
    match &cli.common.out {
        Some(path) => std::fs::write(path, &bytes)
            .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?,
        None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::Output(e.to_string()))?,
    }
    Ok(verdict)
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let (cli, cfg) = match parse(&argv) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if cli.common.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.common.threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(&cli, &cfg) {
        Ok(Some(false)) if cli.common.assert_verdict => {
            eprintln!("verdict failed");
            ExitCode::from(EXIT_VERDICT)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
