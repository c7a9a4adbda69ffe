use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::carriers::{carrier_library, CarrierSpec};
use super::kernel_deconv::{kernel_deconv_with_noise, BandwidthRule};
use super::loss::{ise_loss, kl_loss};
use super::sampling::sample_hierarchical;
use crate::expfam::{fit_mle, DomainPolicy, FitOptions, StatisticBasis};
use crate::numerics::{cyclic_kernel, make_grid, DensityVector, Grid, KernelMatrix, DEFAULT_WRAP_TERMS};
use crate::{invalid, par, Error, Result};

/// Largest tolerated fraction of failed replicates.
const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m_half: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        make_grid(self.m_half, self.n_points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Estimator {
    /// Log-polynomial model of degree `p` over a uniform carrier.
    Efron {
        p: usize,
        #[serde(default)]
        ridge: f64,
    },
    /// Fourier deconvolving kernel estimator.
    Kernel { bandwidth: BandwidthRule },
}

fn default_interval() -> [f64; 2] {
    [-2.0, 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub carrier: CarrierSpec,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub estimator: Estimator,
    pub grid: GridSpec,
    /// Interval `[a, b]` of the target functional `int_a^b g`.
    #[serde(default = "default_interval")]
    pub functional_interval: [f64; 2],
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("sample size must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(invalid("need at least one replicate"));
        }
        if let Estimator::Efron { p, ridge } = self.estimator {
            if p == 0 {
                return Err(invalid("polynomial degree must be at least 1"));
            }
            if !(ridge >= 0.0) {
                return Err(invalid("ridge must be nonnegative"));
            }
        }
        let [a, b] = self.functional_interval;
        if !(a < b) {
            return Err(invalid(format!("empty functional interval [{a}, {b}]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub seed: u64,
    pub error: Option<String>,
    pub kl: f64,
    pub ise: f64,
    /// `int_a^b g_hat`.
    pub functional: f64,
    pub abs_error: f64,
    pub converged: Option<bool>,
    pub bandwidth: Option<f64>,
}

impl ReplicateRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// Median, deciles (10%, ..., 90%) and mean over successful replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub median: f64,
    pub deciles: Vec<f64>,
    pub mean: f64,
}

impl MetricSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let deciles = (1..=9).map(|k| quantile(&sorted, k as f64 / 10.0)).collect();
        Self {
            median: quantile(&sorted, 0.5),
            deciles,
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    if t == 0.0 || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + t * (sorted[hi] - sorted[lo])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    /// `int_a^b g` for the true density.
    pub true_functional: f64,
    pub records: Vec<ReplicateRecord>,
    pub failures: usize,
    pub kl: MetricSummary,
    pub ise: MetricSummary,
    pub functional: MetricSummary,
    pub abs_error: MetricSummary,
}

struct Shared {
    truth: DensityVector,
    kernel: Arc<KernelMatrix>,
    efron: Option<(DensityVector, StatisticBasis)>,
}

fn estimate(
    config: &SimConfig,
    shared: &Shared,
    samples: &[f64],
) -> Result<(DensityVector, Option<bool>, Option<f64>)> {
    let grid = shared.truth.grid();
    match (&config.estimator, &shared.efron) {
        (Estimator::Efron { ridge, .. }, Some((carrier, basis))) => {
            let options = FitOptions {
                ridge: *ridge,
                domain: DomainPolicy::Clamp,
                ..FitOptions::default()
            };
            let fit = fit_mle(carrier, basis, &shared.kernel, samples, &options)?;
            let converged = fit.converged;
            Ok((fit.model.g().clone(), Some(converged), None))
        }
        (Estimator::Kernel { bandwidth }, _) => {
            let (g, h) = kernel_deconv_with_noise(samples, grid, *bandwidth, 1.0)?;
            Ok((g, None, Some(h)))
        }
        (Estimator::Efron { .. }, None) => unreachable!("Efron setup is built with the config"),
    }
}

fn run_one(config: &SimConfig, shared: &Shared, index: usize, truth_value: f64) -> ReplicateRecord {
    let seed = config.seed.wrapping_add(index as u64);
    let samples = sample_hierarchical(&shared.truth, config.n, seed);
    let [a, b] = config.functional_interval;
    let outcome = estimate(config, shared, &samples).and_then(|(g_hat, converged, h)| {
        let functional = g_hat.mass_between(a, b)?;
        Ok(ReplicateRecord {
            index,
            seed,
            error: None,
            kl: kl_loss(&shared.truth, &g_hat)?,
            ise: ise_loss(&shared.truth, &g_hat)?,
            functional,
            abs_error: (functional - truth_value).abs(),
            converged,
            bandwidth: h,
        })
    });
    outcome.unwrap_or_else(|e| ReplicateRecord {
        index,
        seed,
        error: Some(e.to_string()),
        kl: f64::NAN,
        ise: f64::NAN,
        functional: f64::NAN,
        abs_error: f64::NAN,
        converged: None,
        bandwidth: None,
    })
}

/// Runs `config.replicates` independent simulations; replicate `i` uses seed
/// `seed + i`. Results do not depend on the thread count.
pub fn run_replicates(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let grid = config.grid.build()?;
    let truth = carrier_library(&config.carrier, &grid)?;
    let kernel = Arc::new(cyclic_kernel(&grid, DEFAULT_WRAP_TERMS)?);
    let efron = match config.estimator {
        Estimator::Efron { p, .. } => {
            let uniform = DensityVector::normalized(grid.clone(), vec![1.0; grid.len()])?;
            Some((uniform, StatisticBasis::polynomial(grid.clone(), p)?))
        }
        Estimator::Kernel { .. } => None,
    };
    let shared = Shared { truth, kernel, efron };
    let [a, b] = config.functional_interval;
    let truth_value = shared.truth.mass_between(a, b)?;

    let records = par::map_indexed(config.replicates, |i| run_one(config, &shared, i, truth_value));
    let failures = records.iter().filter(|r| !r.succeeded()).count();
    if failures as f64 > MAX_FAILURE_FRACTION * config.replicates as f64 {
        return Err(Error::ReplicateFailures {
            failed: failures,
            total: config.replicates,
        });
    }
    let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| r.succeeded()).collect();
    let summary = |f: fn(&ReplicateRecord) -> f64| {
        MetricSummary::from_values(&ok.iter().map(|r| f(r)).collect::<Vec<_>>())
    };
    Ok(SimResult {
        config: config.clone(),
        true_functional: truth_value,
        failures,
        kl: summary(|r| r.kl),
        ise: summary(|r| r.ise),
        functional: summary(|r| r.functional),
        abs_error: summary(|r| r.abs_error),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(estimator: Estimator, replicates: usize) -> SimConfig {
        SimConfig {
            carrier: CarrierSpec::Gaussian { sigma: 1.0 },
            n: 500,
            replicates,
            seed: 9,
            estimator,
            grid: GridSpec {
                m_half: 8.0,
                n_points: 256,
            },
            functional_interval: [-2.0, 2.0],
        }
    }

    #[test]
    fn one_replicate_one_record() {
        let result = run_replicates(&small(Estimator::Efron { p: 2, ridge: 0.0 }, 1)).unwrap();
        assert_eq!(result.records.len(), 1);
        assert_eq!(result.failures, 0);
        let r = &result.records[0];
        assert!(r.kl >= 0.0 && r.ise >= 0.0);
        assert!((r.functional - 0.9545).abs() < 0.1);
    }

    #[test]
    fn rerun_is_identical() {
        let config = small(
            Estimator::Kernel {
                bandwidth: BandwidthRule::PlugIn,
            },
            4,
        );
        let a = run_replicates(&config).unwrap();
        let b = run_replicates(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records[3].seed, 12);
    }

    #[test]
    fn rejects_invalid_config() {
        let mut config = small(Estimator::Efron { p: 0, ridge: 0.0 }, 1);
        assert!(run_replicates(&config).is_err());
        config.estimator = Estimator::Efron { p: 2, ridge: 0.0 };
        config.replicates = 0;
        assert!(run_replicates(&config).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let s = MetricSummary::from_values(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.mean, 2.5);
        assert!((s.deciles[0] - 1.3).abs() < 1e-12);
    }
}
