//! The `hdcgan` command line: argument handling and one module per
//! subcommand.

pub mod args;
pub mod commands;
pub mod config;
pub mod curves;

use std::ffi::OsString;

use clap::{CommandFactory, FromArgMatches};

use args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

fn parse(argv: &[OsString]) -> Result<Cli, clap::Error> {
    let matches = Cli::command().try_get_matches_from(argv)?;
    Cli::from_arg_matches(&matches)
}

/// Parses, applies any `--config` file, and dispatches. Returns the
/// process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match with_config(&argv) {
        Ok(Ok(cli)) => cli,
        Ok(Err(e)) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_RUNTIME;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

/// Outer error: the config file could not be applied. Inner error: the
/// arguments do not parse.
fn with_config(argv: &[OsString]) -> anyhow::Result<Result<Cli, clap::Error>> {
    let root = Cli::command();
    let matches = match root.clone().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => return Ok(Err(e)),
    };
    let Some((name, sub_matches)) = matches.subcommand() else {
        return Ok(parse(argv));
    };
    let Some(path) = sub_matches.get_one::<std::path::PathBuf>("config") else {
        return Ok(parse(argv));
    };
    let sub = root
        .find_subcommand(name)
        .expect("matched subcommand exists");
    let extra = config::config_args(path, sub, sub_matches)?;
    let full: Vec<OsString> = argv.iter().cloned().chain(extra).collect();
    Ok(parse(&full))
}

/// The subcommand names, as typed on the command line.
pub fn subcommand_names() -> Vec<String> {
    Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect()
}
