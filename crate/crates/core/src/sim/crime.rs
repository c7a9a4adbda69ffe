use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Discrete, Hypergeometric as HyperPmf};

use super::kernel_deconv::{kernel_deconv_with_noise, BandwidthRule};
use crate::expfam::{fit_mle, DomainPolicy, FitOptions, StatisticBasis};
use crate::numerics::{cyclic_kernel, make_grid, normal_pdf, DensityVector, DEFAULT_WRAP_TERMS};
use crate::{invalid, Result};

/// Margin added on each side of the observed range when laying out the grid.
const GRID_MARGIN: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityRecord {
    pub community: String,
    pub population: u64,
    /// Non-violent crimes: burglaries, larcenies, auto thefts and arsons.
    pub crimes: u64,
}

impl CommunityRecord {
    pub fn new(community: impl Into<String>, population: u64, crimes: u64) -> Result<Self> {
        if crimes > population {
            return Err(invalid(format!(
                "{crimes} crimes exceed population {population}"
            )));
        }
        Ok(Self {
            community: community.into(),
            population,
            crimes,
        })
    }

    pub fn rate(&self) -> f64 {
        self.crimes as f64 / self.population as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrimeOptions {
    /// Number of residents sampled per community.
    pub b: u64,
    pub seed: u64,
    /// Degree of the log-polynomial model.
    pub degree: usize,
    /// Communities with population at or below this are dropped.
    pub min_population: u64,
    /// A community is safe when its crime rate is at most this.
    pub threshold: f64,
    pub n_points: usize,
    pub bandwidth: BandwidthRule,
}

impl Default for CrimeOptions {
    fn default() -> Self {
        Self {
            b: 500,
            seed: 0,
            degree: 5,
            min_population: 20_000,
            threshold: 0.02,
            n_points: 512,
            bandwidth: BandwidthRule::PlugIn,
        }
    }
}

/// `P(p <= threshold | p_hat)` under each method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorPoint {
    pub count: u64,
    pub p_hat: f64,
    pub efron: f64,
    pub kernel: Option<f64>,
    /// Exact posterior under the empirical distribution of true rates.
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrimeReport {
    pub records_total: usize,
    pub communities: usize,
    pub b: u64,
    pub seed: u64,
    pub threshold: f64,
    pub counts: Vec<u64>,
    pub efron_eta: Vec<f64>,
    pub efron_converged: bool,
    pub kernel_bandwidth: Option<f64>,
    pub kernel_error: Option<String>,
    pub curve: Vec<PosteriorPoint>,
    pub at_threshold: PosteriorPoint,
    /// Number of increases along the Efron curve; zero for unimodal fits.
    pub efron_monotone_violations: usize,
    pub kernel_monotone_violations: usize,
}

/// Hypergeometric sample counts `N_i`: crimes among `b` residents drawn
/// without replacement.
pub fn draw_counts(records: &[CommunityRecord], b: u64, seed: u64) -> Result<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records
        .iter()
        .map(|r| {
            if b > r.population {
                return Err(invalid(format!(
                    "community {} has fewer than {b} residents",
                    r.community
                )));
            }
            // Sequential draws; rand_distr's sampler underflows at these
            // population sizes.
            let (mut left, mut hits, mut count) = (r.population, r.crimes, 0);
            for _ in 0..b {
                if rng.random_range(0..left) < hits {
                    hits -= 1;
                    count += 1;
                }
                left -= 1;
            }
            Ok(count)
        })
        .collect()
}

/// `2 sqrt(k)`: the count on the scale where the noise is approximately
/// `N(0, 1)`, since `sd(sqrt(p_hat)) ~ 1 / (2 sqrt(b))`.
pub fn stabilize(count: u64) -> f64 {
    2.0 * (count as f64).sqrt()
}

fn posterior_safe(g: &DensityVector, shift: f64, x: f64, cutoff: f64) -> f64 {
    let grid = g.grid();
    let h = grid.spacing();
    let (mut safe, mut total) = (0.0, 0.0);
    for (i, (&mu, &gi)) in grid.points().iter().zip(g.values()).enumerate() {
        let weight = normal_pdf(x - shift - mu) * gi;
        total += weight;
        let left = grid.cell_left(i);
        safe += weight * ((cutoff - shift - left) / h).clamp(0.0, 1.0);
    }
    safe / total
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn oracle_safe(records: &[CommunityRecord], b: u64, k: u64, threshold: f64) -> Result<f64> {
    let mut safe = Vec::new();
    let mut all = Vec::with_capacity(records.len());
    for r in records {
        let dist = HyperPmf::new(r.population, r.crimes, b)
            .map_err(|e| invalid(format!("community {}: {e}", r.community)))?;
        let lp = dist.ln_pmf(k);
        all.push(lp);
        if r.rate() <= threshold {
            safe.push(lp);
        }
    }
    let denom = log_sum_exp(&all);
    if denom == f64::NEG_INFINITY {
        return Ok(f64::NAN);
    }
    Ok((log_sum_exp(&safe) - denom).exp())
}

fn increases(values: impl Iterator<Item = f64>) -> usize {
    let v: Vec<f64> = values.collect();
    v.windows(2).filter(|w| w[1] > w[0] + 1e-9).count()
}

/// Subsamples each community, deconvolves the variance-stabilized rates, and
/// returns `P(p <= threshold | p_hat)` along the grid `p_hat = k / b`.
pub fn crime_pipeline(records: &[CommunityRecord], options: &CrimeOptions) -> Result<CrimeReport> {
    let b = options.b;
    if b == 0 {
        return Err(invalid("sample size b must be at least 1"));
    }
    if !(options.threshold > 0.0 && options.threshold < 1.0) {
        return Err(invalid("threshold must lie in (0, 1)"));
    }
    let kept: Vec<CommunityRecord> = records
        .iter()
        .filter(|r| r.population > options.min_population)
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(invalid(format!(
            "no community has population above {}",
            options.min_population
        )));
    }
    let counts = draw_counts(&kept, b, options.seed)?;
    let xs: Vec<f64> = counts.iter().map(|&k| stabilize(k)).collect();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shift = 0.5 * (lo + hi);
    let grid = make_grid(0.5 * (hi - lo) + GRID_MARGIN, options.n_points)?;
    let centred: Vec<f64> = xs.iter().map(|x| x - shift).collect();

    let kernel = Arc::new(cyclic_kernel(&grid, DEFAULT_WRAP_TERMS)?);
    let uniform = DensityVector::normalized(grid.clone(), vec![1.0; grid.len()])?;
    let basis = StatisticBasis::polynomial(grid.clone(), options.degree)?;
    let fit_options = FitOptions {
        domain: DomainPolicy::Clamp,
        ..FitOptions::default()
    };
    let fit = fit_mle(&uniform, &basis, &kernel, &centred, &fit_options)?;
    let g_efron = fit.model.g().clone();

    let kernel_fit = kernel_deconv_with_noise(&centred, &grid, options.bandwidth, 1.0);
    let (g_kernel, kernel_bandwidth, kernel_error) = match kernel_fit {
        Ok((g, h)) => (Some(g), Some(h), None),
        Err(e) => (None, None, Some(e.to_string())),
    };

    let cutoff = 2.0 * (options.threshold * b as f64).sqrt();
    let k_threshold = (options.threshold * b as f64).round() as u64;
    let k_max = counts.iter().copied().max().unwrap_or(0).max(2 * k_threshold).min(b);
    let curve = (0..=k_max)
        .map(|k| {
            let x = stabilize(k);
            Ok(PosteriorPoint {
                count: k,
                p_hat: k as f64 / b as f64,
                efron: posterior_safe(&g_efron, shift, x, cutoff),
                kernel: g_kernel.as_ref().map(|g| posterior_safe(g, shift, x, cutoff)),
                oracle: oracle_safe(&kept, b, k, options.threshold)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let at_threshold = curve[k_threshold.min(k_max) as usize].clone();

    Ok(CrimeReport {
        records_total: records.len(),
        communities: kept.len(),
        b,
        seed: options.seed,
        threshold: options.threshold,
        efron_monotone_violations: increases(curve.iter().map(|p| p.efron)),
        kernel_monotone_violations: increases(curve.iter().filter_map(|p| p.kernel)),
        counts,
        efron_eta: fit.model.eta().to_vec(),
        efron_converged: fit.converged,
        kernel_bandwidth,
        kernel_error,
        curve,
        at_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n: usize) -> Vec<CommunityRecord> {
        (0..n)
            .map(|i| {
                let population = 25_000 + 1_000 * (i as u64 % 50);
                let rate = 0.01 + 0.08 * ((i * 7919) % n) as f64 / n as f64;
                CommunityRecord::new(format!("c{i}"), population, (rate * population as f64) as u64)
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_crime_community_never_sampled() {
        let records = vec![CommunityRecord::new("quiet", 30_000, 0).unwrap(); 20];
        assert!(draw_counts(&records, 500, 1).unwrap().iter().all(|&k| k == 0));
        assert!(CommunityRecord::new("bad", 10, 11).is_err());
    }

    #[test]
    fn pipeline_produces_threshold_row() {
        let mut records = synthetic(300);
        records.push(CommunityRecord::new("small", 5_000, 100).unwrap());
        let report = crime_pipeline(&records, &CrimeOptions::default()).unwrap();
        assert_eq!(report.communities, 300);
        assert_eq!(report.records_total, 301);
        assert_eq!(report.at_threshold.count, 10);
        assert!((report.at_threshold.p_hat - 0.02).abs() < 1e-15);
        for p in &report.curve {
            assert!((0.0..=1.0).contains(&p.efron));
        }
        // Far above the threshold almost nobody is safe.
        let last = report.curve.last().unwrap();
        assert!(last.efron < 0.05 && last.oracle < 0.05);
    }

    #[test]
    fn empty_after_filter_is_rejected() {
        let records = vec![CommunityRecord::new("small", 1_000, 10).unwrap()];
        assert!(crime_pipeline(&records, &CrimeOptions::default()).is_err());
    }
}
