use serde_json::json;

use deconv::sim::{run_replicates, SimConfig};

use crate::args::SimulateArgs;
use crate::error::{CliError, CliResult};
use crate::output::{num, Output};

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn run(args: &SimulateArgs, out: &mut Output) -> CliResult<()> {
    let bytes = out.read_input(&args.config)?;
    let config: SimConfig = serde_json::from_slice(&bytes).map_err(|e| CliError::Input {
        path: args.config.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    config.validate()?;
    out.seed = Some(config.seed);

    let result = run_replicates(&config)?;
    let header: Vec<String> = [
        "index", "seed", "kl", "ise", "functional", "abs_error", "converged", "bandwidth", "error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = result
        .records
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                r.seed.to_string(),
                num(r.kl),
                num(r.ise),
                num(r.functional),
                num(r.abs_error),
                r.converged.map(|c| c.to_string()).unwrap_or_default(),
                opt(r.bandwidth),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    out.write_text_csv("replicates.csv", &header, &rows)?;
    out.write_json(
        "summary.json",
        &json!({
            "config": result.config,
            "true_functional": result.true_functional,
            "replicates": result.records.len(),
            "failures": result.failures,
            "kl": result.kl,
            "ise": result.ise,
            "functional": result.functional,
            "abs_error": result.abs_error,
        }),
    )?;
    println!(
        "{} replicates ({} failed): median functional {:.4} (truth {:.4}), median |error| {:.4}, median KL {:.3e}",
        result.records.len(),
        result.failures,
        result.functional.median,
        result.true_functional,
        result.abs_error.median,
        result.kl.median
    );
    Ok(())
}
