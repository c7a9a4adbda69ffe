use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use deconv::sim::{crime_pipeline, BandwidthRule, CommunityRecord, CrimeOptions};

use crate::args::CrimeArgs;
use crate::error::{usage, CliError, CliResult};
use crate::output::{num, Output};

pub const UCI_URL: &str =
    "https://archive.ics.uci.edu/ml/machine-learning-databases/00211/CommViolPredUnnormalizedData.txt";
const UCI_FILE: &str = "CommViolPredUnnormalizedData.txt";
const CSV_HEADER: &str = "community,population,burglaries,larcenies,auto_theft,arsons";

// Zero-based columns of the UCI unnormalized file.
const UCI_NAME: usize = 0;
const UCI_STATE: usize = 1;
const UCI_POPULATION: usize = 5;
const UCI_CRIMES: [usize; 4] = [137, 139, 141, 143];

/// Published posterior probabilities at p_hat = 0.02, from one unrecorded
/// down-sampling draw.
const PUBLISHED_EFRON: f64 = 0.186;
const PUBLISHED_KERNEL: f64 = 0.396;
const PUBLISHED_ORACLE: f64 = 0.215;

#[derive(Debug, Default, Serialize)]
pub struct LoadSummary {
    pub rows: usize,
    pub missing: usize,
    pub inconsistent: usize,
}

fn input_err(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_count(path: &Path, line: usize, field: &str) -> CliResult<Option<u64>> {
    let field = field.trim();
    if field == "?" || field.is_empty() {
        return Ok(None);
    }
    let v: f64 = field
        .parse()
        .map_err(|_| input_err(path, line, format!("`{field}` is not a number")))?;
    if !(v >= 0.0) || v.fract() != 0.0 || !v.is_finite() {
        return Err(input_err(path, line, format!("`{field}` is not a nonnegative integer")));
    }
    Ok(Some(v as u64))
}

/// Builds the record, or `None` (counted) for missing or inconsistent rows.
fn record(
    name: String,
    population: Option<u64>,
    crimes: &[Option<u64>],
    summary: &mut LoadSummary,
) -> Option<CommunityRecord> {
    summary.rows += 1;
    let (Some(population), Some(total)) = (population, crimes.iter().copied().sum::<Option<u64>>())
    else {
        summary.missing += 1;
        return None;
    };
    match CommunityRecord::new(name, population, total) {
        Ok(r) => Some(r),
        Err(_) => {
            summary.inconsistent += 1;
            None
        }
    }
}

/// Reads either the raw UCI file or the documented CSV schema.
pub fn load_records(path: &Path, bytes: &[u8]) -> CliResult<(Vec<CommunityRecord>, LoadSummary)> {
    let text = std::str::from_utf8(bytes).map_err(|e| input_err(path, 0, e.to_string()))?;
    let mut summary = LoadSummary::default();
    let mut records = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let own_schema = lines
        .peek()
        .is_some_and(|(_, l)| l.trim().replace(' ', "") == CSV_HEADER);
    if own_schema {
        lines.next();
        for (i, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(input_err(path, i + 1, format!("expected 6 fields, found {}", fields.len())));
            }
            let population = parse_count(path, i + 1, fields[1])?;
            let crimes = fields[2..]
                .iter()
                .map(|f| parse_count(path, i + 1, f))
                .collect::<CliResult<Vec<_>>>()?;
            records.extend(record(fields[0].trim().to_string(), population, &crimes, &mut summary));
        }
    } else {
        let needed = UCI_CRIMES[3] + 1;
        for (i, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < needed {
                return Err(input_err(
                    path,
                    i + 1,
                    format!(
                        "expected at least {needed} comma-separated fields (UCI layout) or the header `{CSV_HEADER}`, found {}",
                        fields.len()
                    ),
                ));
            }
            let name = format!("{}, {}", fields[UCI_NAME].trim(), fields[UCI_STATE].trim());
            let population = parse_count(path, i + 1, fields[UCI_POPULATION])?;
            let crimes = UCI_CRIMES
                .iter()
                .map(|&c| parse_count(path, i + 1, fields[c]))
                .collect::<CliResult<Vec<_>>>()?;
            records.extend(record(name, population, &crimes, &mut summary));
        }
    }
    if records.is_empty() {
        return Err(input_err(path, 0, "no usable community records"));
    }
    Ok((records, summary))
}

fn fetch_hint(target: &Path) -> String {
    format!(
        "download {UCI_URL} by hand and pass it with --data, or place it at {}",
        target.display()
    )
}

/// Path of the cached UCI file, downloading it on a cache miss.
fn fetch(cache_dir: Option<&Path>) -> CliResult<PathBuf> {
    let dir = cache_dir
        .ok_or_else(|| usage("--fetch needs --cache-dir or the DECONV_CACHE_DIR environment variable"))?;
    let target = dir.join(UCI_FILE);
    if target.is_file() {
        return Ok(target);
    }
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Fetch(format!("cannot create cache directory {}: {e}; {}", dir.display(), fetch_hint(&target)))
    })?;
    let mut body = Vec::new();
    ureq::get(UCI_URL)
        .call()
        .map_err(|e| CliError::Fetch(format!("download failed: {e}; {}", fetch_hint(&target))))?
        .body_mut()
        .as_reader()
        .read_to_end(&mut body)
        .map_err(|e| CliError::Fetch(format!("download interrupted: {e}; {}", fetch_hint(&target))))?;
    let partial = dir.join(format!("{UCI_FILE}.part"));
    fs::write(&partial, &body)
        .and_then(|_| fs::rename(&partial, &target))
        .map_err(|e| CliError::Fetch(format!("cannot write {}: {e}", target.display())))?;
    Ok(target)
}

pub fn run(args: &CrimeArgs, out: &mut Output) -> CliResult<()> {
    let path = match (&args.data, args.fetch) {
        (Some(p), _) => p.clone(),
        (None, true) => fetch(args.cache_dir.as_deref())?,
        (None, false) => return Err(usage("give --data PATH or --fetch")),
    };
    let bytes = out.read_input(&path)?;
    let (records, load) = load_records(&path, &bytes)?;
    out.seed = Some(args.seed);
    out.resolve("data", path.display().to_string());

    let options = CrimeOptions {
        b: args.b,
        seed: args.seed,
        degree: args.degree,
        min_population: args.min_population,
        threshold: args.threshold,
        n_points: args.n_points,
        bandwidth: match args.bandwidth {
            Some(h) => BandwidthRule::Fixed { h },
            None => BandwidthRule::PlugIn,
        },
    };
    let report = crime_pipeline(&records, &options)?;

    let curve: Vec<Vec<f64>> = report.curve.iter().map(|p| vec![p.p_hat, p.efron]).collect();
    out.write_csv("posterior.csv", &["p_hat".into(), "prob_safe".into()], &curve)?;
    let methods: Vec<Vec<String>> = report
        .curve
        .iter()
        .map(|p| {
            vec![
                p.count.to_string(),
                num(p.p_hat),
                num(p.efron),
                p.kernel.map(num).unwrap_or_default(),
                num(p.oracle),
            ]
        })
        .collect();
    let header: Vec<String> = ["count", "p_hat", "efron", "kernel", "oracle"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    out.write_text_csv("posterior_methods.csv", &header, &methods)?;

    let at = &report.at_threshold;
    out.write_json(
        "crime_report.json",
        &json!({
            "load": load,
            "records_total": report.records_total,
            "communities": report.communities,
            "b": report.b,
            "seed": report.seed,
            "threshold": report.threshold,
            "efron_eta": report.efron_eta,
            "efron_converged": report.efron_converged,
            "kernel_bandwidth": report.kernel_bandwidth,
            "kernel_error": report.kernel_error,
            "at_threshold": at,
            "efron_monotone_violations": report.efron_monotone_violations,
            "kernel_monotone_violations": report.kernel_monotone_violations,
            "published_reference": {
                "efron": PUBLISHED_EFRON,
                "kernel": PUBLISHED_KERNEL,
                "oracle": PUBLISHED_ORACLE,
                "note": "single unrecorded down-sampling draw; informational only",
            },
        }),
    )?;

    println!(
        "{} communities kept of {} usable records ({} rows, {} missing, {} inconsistent)",
        report.communities, report.records_total, load.rows, load.missing, load.inconsistent
    );
    println!("P(p <= {} | p_hat = {:.4}):", report.threshold, at.p_hat);
    println!("  efron  {:.3}   (published {PUBLISHED_EFRON})", at.efron);
    match at.kernel {
        Some(k) => println!("  kernel {k:.3}   (published {PUBLISHED_KERNEL})"),
        None => println!(
            "  kernel unavailable: {}   (published {PUBLISHED_KERNEL})",
            report.kernel_error.as_deref().unwrap_or("unknown error")
        ),
    }
    println!("  oracle {:.3}   (published {PUBLISHED_ORACLE})", at.oracle);
    if report.efron_monotone_violations > 0 {
        println!(
            "note: Efron curve increases at {} points (multimodal fit)",
            report.efron_monotone_violations
        );
    }
    Ok(())
}
