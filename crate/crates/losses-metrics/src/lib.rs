//! Training objective terms and evaluation metrics for paired-volume
//! synthesis: differentiable image-domain L1 losses (values, gradients,
//! Laplacians), their weighted combination, and plain-number fidelity
//! metrics (PSNR, SSIM, MAE, MSE with dB variants, HU line profiles).

mod error;
mod losses;
mod metrics;
mod profile;
mod weights;

pub use error::MetricError;
pub use losses::{image_domain_losses, total_loss, total_loss_node};
pub use metrics::{
    compute_metrics, csv_aggregate_row, csv_header, csv_row, MetricReport, SliceMetrics,
    DB_FLOOR, DYNAMIC_RANGE, PSNR_CAP_DB,
};
pub use profile::{line_profile, profile_csv};
pub use weights::LossWeights;

pub type Result<T> = std::result::Result<T, MetricError>;
