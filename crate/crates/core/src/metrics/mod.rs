//! Sample-quality and diversity measures.

pub mod features;
pub mod frechet;
pub mod msssim;
pub mod nn;
pub mod protocol;
pub mod report;

pub use features::{read_feature_file, FeatureExtractor};
pub use frechet::{fit_gaussian, frechet_distance, GaussianSummary};
pub use msssim::{ms_ssim, ms_ssim_planes, ms_ssim_terms, MsSsimConfig, MsSsimTerms, Plane};
pub use nn::{nearest_neighbors, Neighbor, DEFAULT_K};
pub use protocol::{
    fd_protocol, msssim_protocol, sample_pairs, FdMode, FdProtocol, MsSsimProtocol,
    DEFAULT_FD_RESIZE, DEFAULT_MSSSIM_RESIZE, DEFAULT_PAIRS,
};
pub use report::MetricReport;
