use serde::Serialize;

use deconv::minimax::minimax_report;
use deconv::{EllipsoidSpec, MinimaxReport};

use crate::args::MinimaxArgs;
use crate::error::{usage, CliResult};
use crate::output::Output;

/// Published rounded constants for the standard Gaussian carrier
/// with `kappa = 2`, shown next to the computed ones.
#[derive(Debug, Serialize)]
struct PublishedReference {
    alpha: f64,
    beta: f64,
    ratio: f64,
}

#[derive(Debug, Serialize)]
struct Document {
    #[serde(flatten)]
    report: MinimaxReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    published_reference: Option<PublishedReference>,
}

pub fn run(args: &MinimaxArgs, out: &mut Output) -> CliResult<()> {
    if !(args.kappa > 1.0) {
        return Err(usage(format!("--kappa must exceed 1, got {}", args.kappa)));
    }
    let spec = EllipsoidSpec::new(args.sigma, args.kappa, args.c)?;
    let report = minimax_report(&spec)?;
    let published_reference = (args.sigma == 1.0 && args.kappa == 2.0).then_some(PublishedReference {
        alpha: 1.7,
        beta: 3.0,
        ratio: 1.8,
    });
    println!(
        "p* = {}, alpha = {:.6}, beta = {:.6}, ratio = {:.4}, R^L = {:.6}",
        report.p_star, report.alpha, report.beta, report.ratio_bound, report.linear_risk
    );
    if let Some(r) = &published_reference {
        println!(
            "published (rounded): alpha ~ {}, beta = {}, ratio ~ {}",
            r.alpha, r.beta, r.ratio
        );
    }
    if report.small_signal_warning {
        println!("warning: C < 10 sigma; the asymptotic constants may be loose");
    }
    out.write_json(
        "minimax.json",
        &Document {
            report,
            published_reference,
        },
    )?;
    Ok(())
}
