use serde_json::json;

use deconv::{fit_mle, DomainPolicy, FitOptions};

use crate::args::{CarrierKind, DomainArg, FitArgs};
use crate::commands::matrix_rows;
use crate::error::{usage, CliError, CliResult};
use crate::output::Output;
use crate::setup::{build_basis, read_numeric_csv, Carrier, Domain};

pub fn run(args: &FitArgs, out: &mut Output) -> CliResult<()> {
    let bytes = out.read_input(&args.samples)?;
    let samples: Vec<f64> = read_numeric_csv(&args.samples, &bytes, &["x"])?
        .into_iter()
        .map(|r| r[0])
        .collect();
    if args.basis.p == 0 {
        return Err(usage("--p must be at least 1"));
    }
    let carrier = Carrier::from_args(&args.carrier, CarrierKind::Uniform, out)?;

    let reach = samples.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let domain_arg = args.domain.unwrap_or(match args.grid.m_half {
        Some(_) => DomainArg::Reject,
        None => DomainArg::Expand,
    });
    let mut m_half = args
        .grid
        .m_half
        .unwrap_or_else(|| carrier.default_half_width());
    if domain_arg == DomainArg::Expand && reach >= m_half {
        m_half = reach.ceil() + 1.0;
    }
    out.resolve("m_half", m_half);
    out.resolve("domain", domain_arg);

    let domain = Domain::new(m_half, &args.grid)?;
    let density = carrier.floored_density(&domain.grid)?;
    let basis = build_basis(&args.basis, &carrier, &density, &domain)?;
    let options = FitOptions {
        max_iterations: args.max_iterations,
        tolerance: args.tolerance,
        ridge: args.ridge,
        domain: match domain_arg {
            DomainArg::Clamp => DomainPolicy::Clamp,
            DomainArg::Reject | DomainArg::Expand => DomainPolicy::Reject,
        },
        ..FitOptions::default()
    };
    let fit = fit_mle(&density, &basis, &domain.kernel, &samples, &options)?;

    let g = fit.model.g();
    let rows: Vec<Vec<f64>> = domain
        .grid
        .points()
        .iter()
        .zip(g.values())
        .map(|(&m, &v)| vec![m, v])
        .collect();
    out.write_csv("density.csv", &["mu".into(), "g_hat".into()], &rows)?;

    let n = samples.len();
    let report = json!({
        "n": n,
        "basis": basis.labels(),
        "eta": fit.model.eta(),
        "psi": fit.model.psi(),
        "log_likelihood": fit.log_likelihood,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "gradient_norm": fit.gradient_norm,
        "fisher_x": matrix_rows(&fit.expected_information),
        "observed_information": matrix_rows(&fit.observed_information),
        "standard_errors": fit.standard_errors(n),
        "grid": { "m_half": m_half, "n_points": domain.grid.len() },
        "carrier_floor": carrier.floor,
        "mass": g.mass(),
    });
    out.write_json("fit_report.json", &report)?;
    println!(
        "fit: {} samples, {} iterations, converged = {}, log-likelihood = {:.6}",
        n, fit.iterations, fit.converged, fit.log_likelihood
    );
    if !fit.converged {
        return Err(CliError::Numerical(format!(
            "no convergence after {} iterations (gradient norm {:e}); partial report written",
            fit.iterations, fit.gradient_norm
        )));
    }
    Ok(())
}
