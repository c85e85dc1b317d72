//! Command-line definitions and config-file merging.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand};

const PRECEDENCE: &str = "Precedence: command-line flags override keys of the --config file, which override \
the MCA_OUTPUT_DIR environment variable and the built-in defaults.\n\
A config file is a JSON object whose keys are the long flag names with '-' or '_' \
(e.g. {\"m\": 1.0, \"alpha\": [0.25, 0.5], \"output_dir\": \"out\"}); unknown keys are rejected.";

#[derive(Debug, Parser)]
#[command(name = "mca", version, about = "Convolved and mixed convolved actions: identities, solves and convergence studies")]
#[command(after_help = PRECEDENCE, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the integration-by-parts identities under grid refinement.
    #[command(args_override_self = true, after_help = PRECEDENCE)]
    VerifyIdentities(VerifyArgs),
    /// Solve the mixed convolved action for a damped oscillator.
    #[command(args_override_self = true, after_help = PRECEDENCE)]
    Sdof(SdofArgs),
    /// Solve the mixed convolved action for a multi-degree-of-freedom model.
    #[command(args_override_self = true, after_help = PRECEDENCE)]
    Mdof(MdofArgs),
    /// Error and observed order of the stationarity solve over a grid sequence.
    #[command(args_override_self = true, after_help = PRECEDENCE)]
    Convergence(ConvergenceArgs),
    /// Action value and Euler-Lagrange residuals for one action kind.
    #[command(args_override_self = true, after_help = PRECEDENCE)]
    Actions(ActionsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON config file; its keys are overridden by flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory for CSV output.
    #[arg(long, value_name = "DIR", env = "MCA_OUTPUT_DIR", default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ForcingArgs {
    /// Applied force: zero, harmonic or pulse.
    #[arg(long, default_value = "zero")]
    pub forcing: String,
    /// Forcing amplitude.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Harmonic angular frequency.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Harmonic phase.
    #[arg(long)]
    pub phase: Option<f64>,
    /// Half-sine pulse duration.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Applied impulse at time zero.
    #[arg(long, default_value_t = 0.0)]
    pub j_hat_0: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OscillatorArgs {
    /// Mass.
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    /// Damping coefficient.
    #[arg(long, default_value_t = 0.2)]
    pub c: f64,
    /// Spring stiffness.
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[command(flatten)]
    pub forcing: ForcingArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// MDOF model JSON file (keys M, C, A_blocks, B, forcing, j_hat_0).
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    pub model: Option<PathBuf>,
    /// Built-in MDOF model: three-story or bar.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Identity kinds (comma separated); all seven by default.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub kind: Option<Vec<String>>,
    /// Fractional orders.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "0.25,0.5,0.75")]
    pub alpha: Vec<f64>,
    /// Grid sizes, strictly increasing.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "64,128,256")]
    pub n: Vec<usize>,
    /// Interval length.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Seed of the random smooth test signals.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Corrupts the first left-hand side before checking (test hook).
    #[arg(long, hide = true)]
    pub tamper_lhs: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct SdofArgs {
    #[command(flatten)]
    pub osc: OscillatorArgs,
    /// Initial displacement.
    #[arg(long, default_value_t = 1.0)]
    pub u0: f64,
    /// Initial velocity.
    #[arg(long, default_value_t = 0.0)]
    pub v0: f64,
    /// Final time.
    #[arg(long, default_value_t = 10.0)]
    pub t: f64,
    /// Number of time steps.
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    /// Semi-derivative evaluation path: direct or reduced.
    #[arg(long, default_value = "reduced")]
    pub scheme: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct MdofArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Initial displacements, one per DOF (zeros by default).
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub u0: Option<Vec<f64>>,
    /// Initial velocities, one per DOF (zeros by default).
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub v0: Option<Vec<f64>>,
    /// Final time.
    #[arg(long, default_value_t = 10.0)]
    pub t: f64,
    /// Number of time steps.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Semi-derivative evaluation path: direct or reduced.
    #[arg(long, default_value = "reduced")]
    pub scheme: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    /// System to study: sdof (oscillator flags) or mdof (--model/--preset).
    #[arg(long, default_value = "sdof")]
    pub system: String,
    #[command(flatten)]
    pub osc: OscillatorArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Initial displacements (sdof default 1, mdof default zeros).
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub u0: Option<Vec<f64>>,
    /// Initial velocities (default zeros).
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub v0: Option<Vec<f64>>,
    /// Final time.
    #[arg(long, default_value_t = 10.0)]
    pub t: f64,
    /// Grid sizes, strictly increasing, at least three.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "128,256,512")]
    pub n: Vec<usize>,
    /// Semi-derivative evaluation path: direct or reduced.
    #[arg(long, default_value = "reduced")]
    pub scheme: String,
    /// Record wall-clock times in the wall_ms column (breaks byte-identical output).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct ActionsArgs {
    /// HAMILTON, GURTIN, TONTI, MCA_SDOF or MCA_MDOF.
    #[arg(long)]
    pub kind: String,
    #[command(flatten)]
    pub osc: OscillatorArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Initial displacements (sdof default 1, mdof default zeros).
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub u0: Option<Vec<f64>>,
    /// Initial velocities (default zeros).
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub v0: Option<Vec<f64>>,
    /// Final time.
    #[arg(long, default_value_t = 10.0)]
    pub t: f64,
    /// Number of time steps.
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    /// Semi-derivative evaluation path: direct or reduced.
    #[arg(long, default_value = "reduced")]
    pub scheme: String,
    /// Trajectory CSV (tau,u[0],...,J[0],...); the oracle trajectory by default.
    #[arg(long, value_name = "FILE")]
    pub trajectory: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

/// Flag arguments equivalent to the keys of a JSON config object.
pub fn config_to_args(subcommand: &str, text: &str) -> Result<Vec<OsString>, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("config is not valid JSON: {e}"))?;
    let obj = value.as_object().ok_or("config must be a JSON object")?;
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(subcommand).ok_or_else(|| format!("unknown subcommand '{subcommand}'"))?;
    let mut out = Vec::new();
    for (key, val) in obj {
        let flag = key.replace('_', "-");
        let known = sub
            .get_arguments()
            .any(|a| a.get_long() == Some(flag.as_str()) && !a.is_hide_set() && flag != "config");
        if !known {
            return Err(format!("config key '{key}' is not an option of '{subcommand}'"));
        }
        let scalar = |v: &serde_json::Value| -> Result<String, String> {
            match v {
                serde_json::Value::Number(n) => Ok(n.to_string()),
                serde_json::Value::String(s) => Ok(s.clone()),
                _ => Err(format!("config key '{key}' must be a number, string or list of those")),
            }
        };
        match val {
            serde_json::Value::Bool(true) => out.push(format!("--{flag}")),
            serde_json::Value::Bool(false) => {}
            serde_json::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                out.push(format!("--{flag}={}", parts.join(",")));
            }
            v => out.push(format!("--{flag}={}", scalar(v)?)),
        }
    }
    Ok(out.into_iter().map(OsString::from).collect())
}
