//! Data generators, losses, a Fourier kernel-deconvolution baseline, the
//! replicate runner and the crime-rate pipeline.

mod carriers;
mod crime;
mod kernel_deconv;
mod loss;
mod replicate;
mod sampling;

pub use carriers::{carrier_library, CarrierSpec};
pub use crime::{
    crime_pipeline, draw_counts, stabilize, CommunityRecord, CrimeOptions, CrimeReport, PosteriorPoint,
};
pub use kernel_deconv::{
    kernel_deconv_baseline, kernel_deconv_with_noise, plug_in_bandwidth, BandwidthRule,
    MAX_AMPLIFICATION,
};
pub use loss::{ise_loss, kl_loss, scaled_deviance};
pub use replicate::{
    run_replicates, Estimator, GridSpec, MetricSummary, ReplicateRecord, SimConfig, SimResult,
};
pub use sampling::{sample_hierarchical, sample_pairs};
