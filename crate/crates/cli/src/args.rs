use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "deconv",
    version,
    about = "Exponential-family deconvolution, efficiency spectra and minimax risk"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an exponential-family prior to noisy samples.
    Fit {
        #[command(flatten)]
        args: FitArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Relative efficiency, spectrum of P_g and most favorable statistics.
    Efficiency {
        #[command(flatten)]
        args: EfficiencyArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Minimax constants for a Sobolev-type ellipsoid of tilts.
    Minimax {
        #[command(flatten)]
        args: MinimaxArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Replicated simulation from a JSON configuration.
    Simulate {
        #[command(flatten)]
        args: SimulateArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Crime-rate posterior curves from the communities-and-crime data.
    Crime {
        #[command(flatten)]
        args: CrimeArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Print normalized Hermite polynomials H_0..H_j as CSV.
    Hermite(HermiteArgs),
    /// Re-run the command recorded in a manifest.
    Replay {
        /// Manifest written by an earlier run.
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CarrierKind {
    /// Flat on the grid.
    Uniform,
    /// Wrapped N(0, sigma^2).
    Gaussian,
    TwoTowers,
    GaussSpike,
    GeneMixture,
    Bump,
    /// Two-column CSV `mu,g`, interpolated onto the grid.
    File,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CarrierArgs {
    /// Carrier density g0.
    #[arg(long, value_enum)]
    pub carrier: Option<CarrierKind>,
    /// Standard deviation of the Gaussian carrier.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Two-towers variant (1 or 2).
    #[arg(long, default_value_t = 1)]
    pub variant: u8,
    /// Location of the spike for gauss-spike.
    #[arg(long, default_value_t = 3.0)]
    pub location: f64,
    /// CSV with columns `mu,g` for --carrier file.
    #[arg(long)]
    pub carrier_file: Option<PathBuf>,
    /// Raise the carrier to this fraction of its maximum before use.
    #[arg(long)]
    pub floor: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GridArgs {
    /// Half-width M of the cyclic domain [-M, M]; chosen automatically when
    /// omitted.
    #[arg(long)]
    pub m_half: Option<f64>,
    #[arg(long, default_value_t = 1024)]
    pub n_points: usize,
    /// Wrap-around terms in the cyclic kernel.
    #[arg(long, default_value_t = 8)]
    pub wrap_terms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// mu, mu^2, ..., mu^p.
    Poly,
    /// H_1(mu / s), ..., H_p(mu / s).
    Hermite,
    /// First p most favorable statistics of the carrier.
    Favorable,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BasisArgs {
    #[arg(long, value_enum, default_value_t = BasisKind::Poly)]
    pub basis: BasisKind,
    /// Family dimension.
    #[arg(long, default_value_t = 4)]
    pub p: usize,
    /// Scale s of the Hermite basis; defaults to the carrier's sigma.
    #[arg(long)]
    pub hermite_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainArg {
    /// Fail on samples outside [-M, M].
    Reject,
    /// Move outside samples to the nearest end.
    Clamp,
    /// Widen M to cover every sample.
    Expand,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// CSV with a single column headed `x`.
    #[arg(long)]
    pub samples: PathBuf,
    #[command(flatten)]
    pub carrier: CarrierArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Samples outside the domain; `expand` is used when --m-half is omitted.
    #[arg(long, value_enum)]
    pub domain: Option<DomainArg>,
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EfficiencyMode {
    /// Worst-direction efficiency of a basis.
    Rho,
    /// Most favorable statistics and their efficiencies.
    Favorable,
    /// Leading eigenvalues of P_g.
    Spectrum,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EfficiencyArgs {
    #[arg(long, value_enum, default_value_t = EfficiencyMode::Spectrum)]
    pub mode: EfficiencyMode,
    #[command(flatten)]
    pub carrier: CarrierArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Number of eigenvalues written in spectrum mode.
    #[arg(long, default_value_t = 20)]
    pub count: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MinimaxArgs {
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub kappa: f64,
    /// Ellipsoid radius C.
    #[arg(long)]
    pub c: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// JSON simulation configuration.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CrimeArgs {
    /// Local data file: the UCI unnormalized text file or a CSV with header
    /// `community,population,burglaries,larcenies,auto_theft,arsons`.
    #[arg(long, conflicts_with = "fetch")]
    pub data: Option<PathBuf>,
    /// Download the UCI file into the cache directory if it is not there yet.
    #[arg(long)]
    pub fetch: bool,
    /// Cache directory for --fetch.
    #[arg(long, env = "DECONV_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Residents sampled per community.
    #[arg(long, default_value_t = 500)]
    pub b: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Degree of the log-polynomial prior.
    #[arg(long, default_value_t = 5)]
    pub degree: usize,
    #[arg(long, default_value_t = 0.02)]
    pub threshold: f64,
    #[arg(long, default_value_t = 20_000)]
    pub min_population: u64,
    #[arg(long, default_value_t = 512)]
    pub n_points: usize,
    /// Kernel bandwidth; plug-in rule when omitted.
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct HermiteArgs {
    /// Highest degree.
    #[arg(long)]
    pub degree: usize,
    /// Evaluation points.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x: Vec<f64>,
}
