//! `hypokinetic`: certification, constants and simulation runs from the command line.
//!
//! Exit codes: 0 success, 1 a certification check failed, 2 usage error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches};

use crate::config::{Command, ConfigError, RunConfig};

fn cli() -> clap::Command {
    let mut app = clap::Command::new("hypokinetic")
        .about("Numerical laboratory for kinetic Brownian motion on model manifolds")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for cmd in Command::ALL {
        let mut sub = clap::Command::new(cmd.name())
            .about(cmd.about())
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("key = value file, or a JSON/CSV output of an earlier run"),
            )
            .arg(
                Arg::new("output")
                    .long("output")
                    .short('o')
                    .value_name("FILE")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("Write the JSON record here instead of stdout"),
            );
        if matches!(cmd, Command::Simulate | Command::RateExperiment) {
            sub = sub.arg(
                Arg::new("csv")
                    .long("csv")
                    .value_name("FILE")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("Write the time series as CSV"),
            );
        }
        for key in cmd.keys() {
            let help = match key.default {
                Some(d) if !d.is_empty() => format!("{} [default: {d}]", key.help),
                Some(_) => format!("{} [optional]", key.help),
                None => format!("{} [required]", key.help),
            };
            let mut arg = Arg::new(key.name)
                .long(key.name)
                .value_name(key.kind.hint())
                .help(help)
                .action(ArgAction::Set)
                .allow_negative_numbers(true);
            if key.name.contains('-') {
                arg = arg.alias(&*key.name.replace('-', "_").leak());
            }
            sub = sub.arg(arg);
        }
        app = app.subcommand(sub);
    }
    app
}

fn resolve(cmd: Command, m: &ArgMatches) -> Result<RunConfig, ConfigError> {
    let file = match m.get_one::<PathBuf>("config") {
        Some(path) => {
            let fc = config::read_file(path)?;
            if let Some(other) = fc.command.as_deref().filter(|c| *c != cmd.name()) {
                return Err(ConfigError::File {
                    path: path.clone(),
                    message: format!("written by '{other}', not '{}'", cmd.name()),
                });
            }
            fc.pairs
        }
        None => Vec::new(),
    };
    let flags: Vec<(String, String)> = cmd
        .keys()
        .iter()
        .filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    config::resolve(
        cmd,
        &file,
        &flags,
        m.get_one::<PathBuf>("output").cloned(),
        m.try_get_one::<PathBuf>("csv").ok().flatten().cloned(),
    )
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("HYPOKINETIC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("HYPOKINETIC_THREADS = '{raw}' is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let cmd = Command::from_name(name).expect("registered subcommand");
    let cfg = match resolve(cmd, sub) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let (result, passed, csv) = match commands::run(&cfg) {
        Ok(o) => (o.result, o.passed, o.csv),
        Err(e @ commands::RunError::Usage { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(commands::RunError::Failure(msg)) => {
            eprintln!("error: {msg}");
            (serde_json::json!({ "error": msg }), false, None)
        }
    };
    let record = output::Record::new(&cfg, &result, passed);
    let written =
        output::write_text(cfg.output.as_deref(), &output::to_json(&record)).and_then(|()| match (&cfg.csv, csv) {
            (Some(path), Some(body)) => std::fs::write(path, output::csv_header(&cfg) + &body),
            _ => Ok(()),
        });
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
