// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod error;
mod output;
mod setup;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde_json::Value;

use args::{Cli, Command, CrimeArgs, EfficiencyArgs, FitArgs, HermiteArgs, MinimaxArgs, SimulateArgs};
use error::{usage, CliError, CliResult};
use output::{num, read_bytes, sha256_hex, Manifest, Output};

/// A subcommand that writes into an output directory.
enum Job {
    Fit(FitArgs),
    Efficiency(EfficiencyArgs),
    Minimax(MinimaxArgs),
    Simulate(SimulateArgs),
    Crime(CrimeArgs),
}

fn parameters<T: DeserializeOwned>(subcommand: &str, value: Value) -> CliResult<T> {
    serde_json::from_value(value)
        .map_err(|e| usage(format!("manifest parameters do not fit `{subcommand}`: {e}")))
}

impl Job {
    fn name(&self) -> &'static str {
        match self {
            Job::Fit(_) => "fit",
            Job::Efficiency(_) => "efficiency",
            Job::Minimax(_) => "minimax",
            Job::Simulate(_) => "simulate",
            Job::Crime(_) => "crime",
        }
    }

    fn parameters(&self) -> Value {
        let value = match self {
            Job::Fit(a) => serde_json::to_value(a),
            Job::Efficiency(a) => serde_json::to_value(a),
            Job::Minimax(a) => serde_json::to_value(a),
            Job::Simulate(a) => serde_json::to_value(a),
            Job::Crime(a) => serde_json::to_value(a),
        };
        value.expect("arguments serialize")
    }

    fn from_manifest(manifest: &Manifest) -> CliResult<Self> {
        let p = manifest.parameters.clone();
        let name = manifest.subcommand.as_str();
        Ok(match name {
            "fit" => Job::Fit(parameters(name, p)?),
            "efficiency" => Job::Efficiency(parameters(name, p)?),
            "minimax" => Job::Minimax(parameters(name, p)?),
            "simulate" => Job::Simulate(parameters(name, p)?),
            "crime" => Job::Crime(parameters(name, p)?),
            other => return Err(usage(format!("manifest names unknown subcommand `{other}`"))),
        })
    }

    fn execute(&self, out: &mut Output) -> CliResult<()> {
        match self {
            Job::Fit(a) => commands::fit::run(a, out),
            Job::Efficiency(a) => commands::efficiency::run(a, out),
            Job::Minimax(a) => commands::minimax::run(a, out),
            Job::Simulate(a) => commands::simulate::run(a, out),
            Job::Crime(a) => commands::crime::run(a, out),
        }
    }

    /// Runs the job and writes the manifest whenever any file was produced,
    /// including partial results of a failed run.
    fn run_in(&self, dir: &Path) -> CliResult<()> {
        let mut out = Output::new(dir)?;
        let result = self.execute(&mut out);
        if out.has_outputs() {
            let manifest = out.finish(self.name(), self.parameters());
            if result.is_ok() {
                manifest?;
            }
        }
        result
    }
}

fn hermite_table(args: &HermiteArgs) {
    let mut header = vec!["x".to_string()];
    header.extend((0..=args.degree).map(|j| format!("H{j}")));
    println!("{}", header.join(","));
    for &x in &args.x {
        let mut row = vec![num(x)];
        row.extend(deconv::numerics::hermite_all(args.degree, x).into_iter().map(num));
        println!("{}", row.join(","));
    }
}

fn replay(manifest_path: &Path, dir: &Path) -> CliResult<()> {
    let bytes = read_bytes(manifest_path)?;
    let manifest: Manifest = serde_json::from_slice(&bytes).map_err(|e| CliError::Input {
        path: manifest_path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    for (path, digest) in &manifest.inputs {
        let current = sha256_hex(&read_bytes(Path::new(path))?);
        if &current != digest {
            return Err(usage(format!(
                "input {path} changed since the recorded run (sha256 {current}, expected {digest})"
            )));
        }
    }
    Job::from_manifest(&manifest)?.run_in(dir)
}

fn run(cli: Cli) -> CliResult<()> {
    let (job, out) = match cli.command {
        Command::Fit { args, out } => (Job::Fit(args), out),
        Command::Efficiency { args, out } => (Job::Efficiency(args), out),
        Command::Minimax { args, out } => (Job::Minimax(args), out),
        Command::Simulate { args, out } => (Job::Simulate(args), out),
        Command::Crime { args, out } => (Job::Crime(args), out),
        Command::Hermite(args) => {
            hermite_table(&args);
            return Ok(());
        }
        Command::Replay { manifest, out } => return replay(&manifest, &out.out),
    };
    job.run_in(&out.out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(hint) = e.hint() {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
