//! Objective quality metrics and the evaluation report.

mod lsd;
mod report;
mod sisnr;
mod stoi;

pub use lsd::lsd;
pub use report::{Aggregates, FileMetrics, MetricReport, REPORT_SCHEMA_VERSION};
pub use sisnr::{si_snr, SI_SNR_CAP_DB};
pub use stoi::{stoi, StoiVariant, STOI_RATE_HZ};
