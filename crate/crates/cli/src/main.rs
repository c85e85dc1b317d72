//! `mca`: command-line driver for the convolved-action toolkit.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure or a failed verification.

mod args;
mod commands;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

use args::{config_to_args, Cli, Command};
use commands::Status;

const USAGE: u8 = 1;
const NUMERICAL: u8 = 2;

/// Value of `--config` among the arguments after the subcommand.
fn config_path(rest: &[OsString]) -> Option<OsString> {
    let mut it = rest.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Splices config-file keys in front of the explicit flags so the flags win.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    if argv.len() < 2 {
        return Ok(argv);
    }
    let Some(path) = config_path(&argv[2..]) else {
        return Ok(argv);
    };
    let sub = argv[1].to_string_lossy().into_owned();
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.to_string_lossy()))?;
    let extra = config_to_args(&sub, &text)?;
    let mut out = argv[..2].to_vec();
    out.extend(extra);
    out.extend(argv[2..].iter().cloned());
    Ok(out)
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::VerifyIdentities(a) => commands::verify_identities(a),
        Command::Sdof(a) => commands::sdof(a),
        Command::Mdof(a) => commands::mdof(a),
        Command::Convergence(a) => commands::convergence(a),
        Command::Actions(a) => commands::actions(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(NUMERICAL),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { NUMERICAL } else { USAGE })
        }
    }
}
