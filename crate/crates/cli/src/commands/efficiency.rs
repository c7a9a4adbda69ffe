use serde_json::json;

use deconv::{most_favorable, rho_multivariate};

use crate::args::{CarrierKind, EfficiencyArgs, EfficiencyMode};
use crate::commands::matrix_rows;
use crate::error::{usage, CliResult};
use crate::output::{num, Output};
use crate::setup::{build_basis, Carrier, Domain};

pub fn run(args: &EfficiencyArgs, out: &mut Output) -> CliResult<()> {
    let carrier = Carrier::from_args(&args.carrier, CarrierKind::Gaussian, out)?;
    let m_half = args
        .grid
        .m_half
        .unwrap_or_else(|| carrier.default_half_width());
    out.resolve("m_half", m_half);
    let domain = Domain::new(m_half, &args.grid)?;
    let p = args.basis.p;
    if p == 0 {
        return Err(usage("--p must be at least 1"));
    }

    match args.mode {
        EfficiencyMode::Rho => {
            let density = carrier.floored_density(&domain.grid)?;
            let basis = build_basis(&args.basis, &carrier, &density, &domain)?;
            let report = rho_multivariate(&density, &domain.kernel, &basis)?;
            out.write_json(
                "rho.json",
                &json!({
                    "basis": basis.labels(),
                    "rho": report.rho,
                    "worst_direction": report.worst_direction,
                    "generalized_eigenvalues": report.generalized_eigenvalues,
                    "fisher_mu": matrix_rows(&report.i_mu),
                    "fisher_x": matrix_rows(&report.i_x),
                    "carrier_floor": carrier.floor,
                }),
            )?;
            println!("rho = {:.10}", report.rho);
        }
        EfficiencyMode::Favorable | EfficiencyMode::Spectrum => {
            let density = carrier.density(&domain.grid)?;
            let spectral = most_favorable(&density, &domain.kernel, p, carrier.floor)?;
            let count = args.count.min(spectral.eigenvalues.len());
            let rows: Vec<Vec<String>> = spectral.eigenvalues[..count]
                .iter()
                .enumerate()
                .map(|(j, &l)| vec![j.to_string(), num(l)])
                .collect();
            out.write_text_csv("spectrum.csv", &["j".into(), "lambda".into()], &rows)?;

            if args.mode == EfficiencyMode::Favorable {
                let mut header = vec!["mu".to_string()];
                header.extend((1..=p).map(|j| format!("T{j}")));
                let stat_rows: Vec<Vec<f64>> = domain
                    .grid
                    .points()
                    .iter()
                    .enumerate()
                    .map(|(i, &m)| {
                        let mut row = vec![m];
                        row.extend(spectral.favorable_stats.iter().map(|t| t[i]));
                        row
                    })
                    .collect();
                out.write_csv("favorable.csv", &header, &stat_rows)?;
                out.write_json(
                    "rho.json",
                    &json!({
                        "rho_per_dim": spectral.rho_per_dim,
                        "degenerate_spectrum": spectral.degenerate_spectrum,
                        "carrier_floor": spectral.floor,
                    }),
                )?;
            }
            let shown: Vec<String> = spectral.eigenvalues[..count.min(p + 1)]
                .iter()
                .map(|l| format!("{l:.6}"))
                .collect();
            println!("leading eigenvalues: {}", shown.join(", "));
            if spectral.degenerate_spectrum {
                println!("warning: repeated eigenvalues; favorable statistics are determined only up to rotation");
            }
        }
    }
    Ok(())
}
